//! Box scalar products and norms on X₁×X₂, twisted and local U² norms, and
//! the regularity calculus residuals.

use rayon::prelude::*;
use serde::Serialize;

use super::bohr::BohrSet;
use super::fourier::CyclicFn;
use crate::error::{invalid, Result};

/// Four functions h_ω on X₁×X₂, stored row-major (|X₁| rows); ω = (ω₁, ω₂) ↦ 2ω₁ + ω₂.
#[derive(Clone, Debug)]
pub struct BoxFamily {
    pub x1: Vec<i64>,
    pub x2: Vec<i64>,
    pub h: [Vec<f64>; 4],
}

impl BoxFamily {
    pub fn new(x1: Vec<i64>, x2: Vec<i64>, h: [Vec<f64>; 4]) -> Result<Self> {
        if x1.is_empty() || x2.is_empty() {
            return invalid("empty factor set");
        }
        let n = x1.len() * x2.len();
        if h.iter().any(|v| v.len() != n) {
            return invalid("function tables must have |X1|·|X2| entries");
        }
        Ok(BoxFamily { x1, x2, h })
    }

    pub fn uniform(x1: Vec<i64>, x2: Vec<i64>, h: Vec<f64>) -> Result<Self> {
        Self::new(x1, x2, [h.clone(), h.clone(), h.clone(), h])
    }
}

/// E_{y,y′ ∈ X₂} (E_{x∈X₁} a(x,y) b(x,y′)) (E_{x∈X₁} c(x,y) d(x,y′)).
fn box_core(n1: usize, n2: usize, a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> f64 {
    let total: f64 = (0..n2)
        .into_par_iter()
        .map(|y| {
            let mut acc = 0.0;
            for y2 in 0..n2 {
                let (mut p, mut q) = (0.0, 0.0);
                for x in 0..n1 {
                    let r = x * n2;
                    p += a[r + y] * b[r + y2];
                    q += c[r + y] * d[r + y2];
                }
                acc += p * q;
            }
            acc
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    total / (n1 as f64).powi(2) / (n2 as f64).powi(2)
}

/// ⟨(h_ω)⟩_{□(X₁×X₂)}
pub fn box_inner(f: &BoxFamily) -> f64 {
    let [h00, h01, h10, h11] = &f.h;
    box_core(f.x1.len(), f.x2.len(), h00, h01, h10, h11)
}

/// ‖h‖_□ = ⟨(h)⟩^{1/4}; the fourth power is asserted nonnegative.
pub fn box_norm(h: &[f64], n1: usize, n2: usize) -> f64 {
    let v = box_core(n1, n2, h, h, h, h);
    assert!(v >= -1e-12, "negative box norm fourth power {v}");
    v.max(0.0).powf(0.25)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// |E h(x₁,x₂) b₁(x₁) b₂(x₂)| ≤ ‖h‖_□ with |b_k| ≤ 1.
pub fn box_vdc_check(h: &[f64], b1: &[f64], b2: &[f64]) -> Result<InequalityCheck> {
    let (n1, n2) = (b1.len(), b2.len());
    if n1 == 0 || n2 == 0 || h.len() != n1 * n2 {
        return invalid("shape mismatch");
    }
    if b1.iter().chain(b2).any(|v| v.abs() > 1.0) {
        return invalid("weights must lie in [-1, 1]");
    }
    let mut s = 0.0;
    for x in 0..n1 {
        for y in 0..n2 {
            s += h[x * n2 + y] * b1[x] * b2[y];
        }
    }
    let lhs = (s / (n1 * n2) as f64).abs();
    let rhs = box_norm(h, n1, n2);
    Ok(InequalityCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12,
    })
}

/// |⟨(h_ω)⟩| ≤ ∏_ω ‖h_ω‖_□.
pub fn gcs_check(f: &BoxFamily) -> InequalityCheck {
    let (n1, n2) = (f.x1.len(), f.x2.len());
    let lhs = box_inner(f).abs();
    let rhs: f64 = f.h.iter().map(|h| box_norm(h, n1, n2)).product();
    InequalityCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12,
    }
}

fn table(g: &CyclicFn, a: i64, b: i64, shift: i64, x1: &[i64], x2: &[i64]) -> Vec<f64> {
    let mut h = Vec::with_capacity(x1.len() * x2.len());
    for &u in x1 {
        for &v in x2 {
            h.push(g.at(shift + a * u + b * v));
        }
    }
    h
}

/// ‖g‖_{⊠_{a,b}(X₁×X₂)}⁴ = E ∏_ω g(a x₁^{(ω₁)} + b x₂^{(ω₂)}).
pub fn twisted_u2_fourth(g: &CyclicFn, a: i64, b: i64, x1: &[i64], x2: &[i64]) -> Result<f64> {
    let m = g.m as i64;
    if a.rem_euclid(m) == 0 || b.rem_euclid(m) == 0 {
        return invalid("twist coefficients must be nonzero modulo M");
    }
    if x1.is_empty() || x2.is_empty() {
        return invalid("empty factor set");
    }
    let h = table(g, a, b, 0, x1, x2);
    Ok(box_core(x1.len(), x2.len(), &h, &h, &h, &h))
}

pub fn twisted_u2(g: &CyclicFn, a: i64, b: i64, x1: &[i64], x2: &[i64]) -> Result<f64> {
    Ok(twisted_u2_fourth(g, a, b, x1, x2)?.max(0.0).powf(0.25))
}

/// E_{x₀∈X₀} ‖f(x₀ + m·)‖⁴_{⊠_{a,b}(X₁×X₂)}.
pub fn local_u2_fourth_twisted(
    f: &CyclicFn,
    x0: &[i64],
    step: i64,
    a: i64,
    b: i64,
    x1: &[i64],
    x2: &[i64],
) -> Result<f64> {
    if x0.is_empty() || x1.is_empty() || x2.is_empty() {
        return invalid("empty set in local norm");
    }
    let total: f64 = x0
        .par_iter()
        .map(|&u| {
            let h = table(f, step * a, step * b, u, x1, x2);
            box_core(x1.len(), x2.len(), &h, &h, &h, &h)
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(total / x0.len() as f64)
}

/// ‖f‖_{U²(X₀,X₁,X₂)}
pub fn local_u2(f: &CyclicFn, x0: &[i64], x1: &[i64], x2: &[i64]) -> Result<f64> {
    Ok(local_u2_fourth_twisted(f, x0, 1, 1, 1, x1, x2)?
        .max(0.0)
        .powf(0.25))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RegularityResiduals {
    pub translate: f64,
    pub average: f64,
    pub truncate: f64,
    pub bound: f64,
    pub holds: bool,
}

/// The three regularity-calculus residuals for f : Z_M → [−1, 1].
pub fn regularity_calculus_check(
    f: &CyclicFn,
    b: &BohrSet,
    xs: &[i64],
    x_shift: i64,
    rho: f64,
    k: f64,
) -> Result<RegularityResiduals> {
    if !b.is_regular() {
        return invalid("Bohr set must be regular");
    }
    let d = b.dim().max(1) as f64;
    if !(rho > 0.0 && rho <= 1.0 / (64.0 * d)) {
        return invalid("rho must lie in (0, 2^-6/d]");
    }
    let inner = b.dilate(rho)?;
    if !inner.contains(x_shift) || xs.iter().any(|&x| !inner.contains(x)) || xs.is_empty() {
        return invalid("shifts must lie in B_{|rho}");
    }
    if f.values.iter().any(|v| v.abs() > 1.0) {
        return invalid("f must take values in [-1, 1]");
    }
    let el: Vec<i64> = b.elements().iter().map(|&x| x as i64).collect();
    let n = el.len() as f64;
    let base: f64 = el.iter().map(|&x| f.at(x)).sum::<f64>() / n;
    let shifted: f64 = el.iter().map(|&x| f.at(x + x_shift)).sum::<f64>() / n;
    let avg: f64 = el
        .iter()
        .map(|&x| xs.iter().map(|&y| f.at(x + y)).sum::<f64>())
        .sum::<f64>()
        / (n * xs.len() as f64);
    let lower = b.dilate(1.0 - rho)?;
    let trunc: f64 = el
        .iter()
        .filter(|&&x| lower.contains(x))
        .map(|&x| f.at(x))
        .sum::<f64>()
        / n;
    let bound = k * rho * d;
    let (r1, r2, r3) = (
        (shifted - base).abs(),
        (base - avg).abs(),
        (trunc - base).abs(),
    );
    Ok(RegularityResiduals {
        translate: r1,
        average: r2,
        truncate: r3,
        bound,
        holds: r1 <= bound && r2 <= bound && r3 <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclic::fourier::u2_norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quad_inner(f: &BoxFamily) -> f64 {
        let (n1, n2) = (f.x1.len(), f.x2.len());
        let mut s = 0.0;
        for a0 in 0..n1 {
            for a1 in 0..n1 {
                for b0 in 0..n2 {
                    for b1 in 0..n2 {
                        s += f.h[0][a0 * n2 + b0]
                            * f.h[1][a0 * n2 + b1]
                            * f.h[2][a1 * n2 + b0]
                            * f.h[3][a1 * n2 + b1];
                    }
                }
            }
        }
        s / ((n1 * n1 * n2 * n2) as f64)
    }

    fn rnd(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn box_basics() {
        let x: Vec<i64> = (0..10).collect();
        assert!((box_norm(&vec![1.0; 100], 10, 10) - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fam = BoxFamily::new(
            x.clone(),
            x.clone(),
            [
                rnd(&mut rng, 100),
                rnd(&mut rng, 100),
                rnd(&mut rng, 100),
                rnd(&mut rng, 100),
            ],
        )
        .unwrap();
        assert!((box_inner(&fam) - quad_inner(&fam)).abs() < 1e-12);
        // product structure
        let u = rnd(&mut rng, 10);
        let v = rnd(&mut rng, 10);
        let h: Vec<f64> = (0..100).map(|k| u[k / 10] * v[k % 10]).collect();
        let e = |w: &[f64]| (w.iter().map(|t| t * t).sum::<f64>() / 10.0).sqrt();
        assert!((box_norm(&h, 10, 10) - e(&u) * e(&v)).abs() < 1e-12);
        assert!(BoxFamily::uniform(vec![], x, vec![]).is_err());
    }

    #[test]
    fn inequalities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<i64> = (0..8).collect();
        for _ in 0..20 {
            let fam = BoxFamily::new(
                x.clone(),
                x.clone(),
                [
                    rnd(&mut rng, 64),
                    rnd(&mut rng, 64),
                    rnd(&mut rng, 64),
                    rnd(&mut rng, 64),
                ],
            )
            .unwrap();
            assert!(gcs_check(&fam).holds);
            let c = box_vdc_check(&fam.h[0], &rnd(&mut rng, 8), &rnd(&mut rng, 8)).unwrap();
            assert!(c.holds);
        }
        let h = rnd(&mut rng, 64);
        let same = BoxFamily::uniform(x.clone(), x.clone(), h).unwrap();
        let c = gcs_check(&same);
        assert!((c.lhs - c.rhs).abs() < 1e-12);
        let zero = box_vdc_check(&vec![0.0; 64], &[1.0; 8], &[1.0; 8]).unwrap();
        assert_eq!(zero.lhs, 0.0);
    }

    #[test]
    fn twisted_and_local() {
        let m = 53u64;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = CyclicFn::from_fn(m, |_| rng.gen_range(-1.0..1.0));
        let all: Vec<i64> = (0..m as i64).collect();
        assert!(
            (twisted_u2(&CyclicFn::constant(m, 1.0), 3, 5, &all[..7], &all[..4]).unwrap() - 1.0)
                .abs()
                < 1e-12
        );
        assert!((twisted_u2(&g, 1, 1, &all, &all).unwrap() - u2_norm(&g)).abs() < 1e-10);
        let x1 = &all[..6];
        let x2 = &all[10..15];
        let h = table(&g, 1, 1, 0, x1, x2);
        assert!((twisted_u2(&g, 1, 1, x1, x2).unwrap() - box_norm(&h, 6, 5)).abs() < 1e-12);
        assert!((local_u2(&g, &[0], &all, &all).unwrap() - u2_norm(&g)).abs() < 1e-10);
        assert!(twisted_u2(&g, 53, 1, x1, x2).is_err());
        // direct five-fold sum
        let x0 = [0i64, 3, 7];
        let x1 = [1i64, 2, 9];
        let x2 = [0i64, 4];
        let mut s = 0.0;
        for &u in &x0 {
            for &a0 in &x1 {
                for &a1 in &x1 {
                    for &b0 in &x2 {
                        for &b1 in &x2 {
                            s += g.at(u + a0 + b0)
                                * g.at(u + a0 + b1)
                                * g.at(u + a1 + b0)
                                * g.at(u + a1 + b1);
                        }
                    }
                }
            }
        }
        s /= 3.0 * 9.0 * 4.0;
        assert!((local_u2(&g, &x0, &x1, &x2).unwrap() - s.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn regularity_calculus() {
        let b = BohrSet::new(20011, &[1, 5], 0.2).unwrap();
        let (_, b) = b.find_regular_dilate().unwrap();
        let rho = 1.0 / 128.0;
        let f = CyclicFn::constant(20011, 0.5);
        let inner = b.dilate(rho).unwrap();
        let xs: Vec<i64> = inner.elements().iter().map(|&x| x as i64).collect();
        let r = regularity_calculus_check(&f, &b, &xs, xs[1], rho, 512.0).unwrap();
        assert!(r.translate < 1e-12 && r.average < 1e-12);
        // the truncation residual is c·|B \ B_{|1-ρ}|/|B|, bounded by regularity
        assert!(r.truncate <= 0.5 * 64.0 * rho * 2.0 + 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = CyclicFn::from_fn(20011, |_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        let r = regularity_calculus_check(&g, &b, &xs, xs[xs.len() / 2], rho, 512.0).unwrap();
        assert!(r.holds, "{r:?}");
    }
}

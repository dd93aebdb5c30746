//! Local probabilities α(p, B), Euler factors and the Euler product.
//!
//! Subsets B ⊆ Ω = [t]×[2] are bitmasks with bit 2i+j for (i, j).

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::gpy::{h_rw, GpyConfig, WTrickContext};
use super::primes::primes_up_to;
use crate::error::{invalid, Error, Result};
use crate::linsys::matrix::{inv_mod, rank_mod};
use crate::linsys::LinearSystem;

/// Forms touched by B: I(B) = {i : B_i ≠ ∅}, as a mask over [t].
pub fn touched(b: u32, t: usize) -> u32 {
    (0..t)
        .filter(|&i| b >> (2 * i) & 3 != 0)
        .fold(0, |m, i| m | 1 << i)
}

/// B non-empty and contained in a single slice {i}×[2].
pub fn is_vertical(b: u32, t: usize) -> bool {
    b != 0 && touched(b, t).count_ones() == 1
}

pub fn vertical_sets(t: usize) -> Vec<u32> {
    (0..t)
        .flat_map(|i| [1u32 << (2 * i), 2 << (2 * i), 3 << (2 * i)])
        .collect()
}

/// Σ_{B vertical} (−1)^{|B|}.
pub fn vertical_sign_sum(t: usize) -> i64 {
    vertical_sets(t)
        .iter()
        .map(|b| if b.count_ones() % 2 == 0 { 1 } else { -1 })
        .sum()
}

fn residue(x: &BigInt, p: u64) -> u64 {
    let r = x % BigInt::from(p);
    let r = if r < BigInt::zero() {
        r + BigInt::from(p)
    } else {
        r
    };
    r.to_u64().unwrap()
}

/// For each mask I over [t], #{n ∈ Z_p^d : p | Wψ_i(n)+b ∀ i ∈ I} / p^d, by enumeration.
pub fn alpha_by_enumeration(
    p: u64,
    psi: &LinearSystem,
    ctx: &WTrickContext,
    budget: u64,
) -> Result<Vec<BigRational>> {
    let d = psi.d();
    let t = psi.t();
    if t > 20 {
        return invalid("too many forms");
    }
    let total = (p as f64).powi(d as i32);
    if total > budget as f64 {
        return Err(Error::Budget(format!(
            "{p}^{d} points exceed enumeration budget"
        )));
    }
    let w = ctx.w_u64() % p;
    let b = (ctx.b.rem_euclid(p as i64)) as u64;
    let coef: Vec<Vec<u64>> = (0..t)
        .map(|i| psi.form(i).iter().map(|c| residue(c, p)).collect())
        .collect();
    let cons: Vec<u64> = psi.constants().iter().map(|c| residue(c, p)).collect();
    let mut hist = vec![0u64; 1 << t];
    let mut n = vec![0u64; d];
    loop {
        let mut s = 0usize;
        for i in 0..t {
            let mut v = cons[i];
            for k in 0..d {
                v = (v + coef[i][k] * n[k]) % p;
            }
            if (w * v + b) % p == 0 {
                s |= 1 << i;
            }
        }
        hist[s] += 1;
        let mut k = 0;
        loop {
            if k == d {
                return Ok(superset_sums(hist, t, p.pow(d as u32)));
            }
            n[k] += 1;
            if n[k] < p {
                break;
            }
            n[k] = 0;
            k += 1;
        }
    }
}

fn superset_sums(mut h: Vec<u64>, t: usize, denom: u64) -> Vec<BigRational> {
    for i in 0..t {
        for m in 0..h.len() {
            if m >> i & 1 == 0 {
                h[m] += h[m | 1 << i];
            }
        }
    }
    h.into_iter()
        .map(|c| BigRational::new(BigInt::from(c), BigInt::from(denom)))
        .collect()
}

/// Same quantity over F_p: p^{−rank} when the affine system is consistent, else 0.
pub fn alpha_algebraic(p: u64, psi: &LinearSystem, ctx: &WTrickContext) -> Vec<BigRational> {
    let t = psi.t();
    let w = ctx.w_u64() % p;
    let mut out = vec![BigRational::zero(); 1 << t];
    out[0] = BigRational::one();
    if w == 0 {
        return out;
    }
    // ψ_i(n) ≡ −b W^{-1} (mod p)
    let target = (p - (ctx.b.rem_euclid(p as i64) as u64) % p) % p * inv_mod(w, p) % p;
    for mask in 1u32..(1 << t) {
        let mut lin = Vec::new();
        let mut aug = Vec::new();
        for i in 0..t {
            if mask >> i & 1 == 1 {
                let row: Vec<BigInt> = psi.form(i).to_vec();
                let rhs = (target + p - residue(&psi.constants()[i], p)) % p;
                let mut a = row.clone();
                a.push(BigInt::from(rhs));
                lin.push(row);
                aug.push(a);
            }
        }
        let r = rank_mod(&lin, p);
        if rank_mod(&aug, p) == r {
            out[mask as usize] = BigRational::new(BigInt::one(), BigInt::from(p).pow(r as u32));
        }
    }
    out
}

/// α(p, B) for every B ⊆ Ω.
#[derive(Clone, Debug)]
pub struct LocalFactorTable {
    pub p: u64,
    pub t: usize,
    by_touched: Vec<BigRational>,
}

impl LocalFactorTable {
    pub fn from_touched(p: u64, t: usize, by_touched: Vec<BigRational>) -> Self {
        LocalFactorTable { p, t, by_touched }
    }

    pub fn enumerate(p: u64, psi: &LinearSystem, ctx: &WTrickContext, budget: u64) -> Result<Self> {
        Ok(Self::from_touched(
            p,
            psi.t(),
            alpha_by_enumeration(p, psi, ctx, budget)?,
        ))
    }

    pub fn algebraic(p: u64, psi: &LinearSystem, ctx: &WTrickContext) -> Self {
        Self::from_touched(p, psi.t(), alpha_algebraic(p, psi, ctx))
    }

    pub fn alpha(&self, b: u32) -> &BigRational {
        &self.by_touched[touched(b, self.t) as usize]
    }

    pub fn omega_size(&self) -> usize {
        2 * self.t
    }
}

/// α(p, B) by full enumeration of Z_p^d.
pub fn local_alpha(
    p: u64,
    b: u32,
    psi: &LinearSystem,
    ctx: &WTrickContext,
    budget: u64,
) -> Result<BigRational> {
    let tab = LocalFactorTable::enumerate(p, psi, ctx, budget)?;
    Ok(tab.alpha(b).clone())
}

/// E_{p,ξ} = Σ_B (−1)^{|B|} α(p,B) p^{−Σ_B z_ij}, z_ij = (1+iξ_ij)/log R.
pub fn euler_factor(tab: &LocalFactorTable, xi: &[f64], cfg: &GpyConfig) -> Complex64 {
    assert_eq!(xi.len(), tab.omega_size());
    let lr = cfg.r.ln();
    let lp = (tab.p as f64).ln();
    let n = tab.omega_size();
    let mut acc = Complex64::new(0.0, 0.0);
    for b in 0u32..(1 << n) {
        let a = tab.alpha(b);
        if a.is_zero() {
            continue;
        }
        let mut z = Complex64::new(0.0, 0.0);
        for k in 0..n {
            if b >> k & 1 == 1 {
                z += Complex64::new(1.0, xi[k]) / lr;
            }
        }
        let sign = if b.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        acc += (-z * lp).exp() * (sign * a.to_f64().unwrap());
    }
    acc
}

/// Σ_{B ≠ ∅} α(p,B), the triangle-inequality bound on |E_{p,ξ} − 1|.
pub fn euler_factor_bound(tab: &LocalFactorTable) -> f64 {
    (1u32..(1 << tab.omega_size()))
        .map(|b| tab.alpha(b).to_f64().unwrap())
        .sum()
}

/// E_1(w) for Re w > 0.
pub fn exp_integral_e1(w: Complex64) -> Complex64 {
    const GAMMA: f64 = 0.577_215_664_901_532_9;
    if w.norm() <= 2.0 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 1..200 {
            term *= -w / k as f64;
            let c = term / k as f64;
            sum += c;
            if c.norm() < 1e-17 {
                break;
            }
        }
        return -GAMMA - w.ln() - sum;
    }
    // modified Lentz on e^{-w} / (w + 1/(1 + 1/(w + 2/(1 + 2/(w + ...)))))
    let tiny = 1e-300;
    let mut f = w;
    let mut c = w;
    let mut dd = Complex64::new(0.0, 0.0);
    for k in 1..500 {
        let a = ((k + 1) / 2) as f64;
        let bk = if k % 2 == 1 {
            Complex64::new(1.0, 0.0)
        } else {
            w
        };
        dd = bk + dd * a;
        if dd.norm() < tiny {
            dd = Complex64::new(tiny, 0.0);
        }
        c = bk + Complex64::new(a, 0.0) / c;
        if c.norm() < tiny {
            c = Complex64::new(tiny, 0.0);
        }
        dd = dd.inv();
        let delta = c * dd;
        f *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            break;
        }
    }
    (-w).exp() / f
}

#[derive(Clone, Debug, Serialize)]
pub struct EulerProductReport {
    pub p_max: u64,
    pub product: [f64; 2],
    /// product times the prime-number-theorem tail exp(Σ_B (−1)^{|B|} E_1(z_B log P))
    pub tail_corrected: [f64; 2],
    pub approximation: [f64; 2],
    pub ratio: [f64; 2],
    pub ratio_tail_corrected: [f64; 2],
    pub l_regime_ok: bool,
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

/// h_{R,W}^{−t} ∏_{B vertical} (Σ_B (1+iξ_ij))^{−(−1)^{|B|}}.
pub fn euler_approximation(
    xi: &[f64],
    t: usize,
    ctx: &WTrickContext,
    cfg: &GpyConfig,
) -> Complex64 {
    let h = h_rw(ctx, cfg);
    let mut acc = Complex64::new(h.powi(-(t as i32)), 0.0);
    for b in vertical_sets(t) {
        let s: Complex64 = (0..2 * t)
            .filter(|k| b >> k & 1 == 1)
            .map(|k| Complex64::new(1.0, xi[k]))
            .sum();
        acc *= if b.count_ones() % 2 == 0 { s.inv() } else { s };
    }
    acc
}

/// ∏_{p ≤ P_max} E_{p,ξ} with α computed over F_p, compared to the closed form.
pub fn euler_product(
    xi: &[f64],
    psi: &LinearSystem,
    ctx: &WTrickContext,
    cfg: &GpyConfig,
    p_max: u64,
) -> Result<EulerProductReport> {
    let t = psi.t();
    if xi.len() != 2 * t {
        return invalid("ξ must have 2t coordinates");
    }
    let mut prod = Complex64::new(1.0, 0.0);
    for p in primes_up_to(p_max) {
        let tab = LocalFactorTable::algebraic(p, psi, ctx);
        prod *= euler_factor(&tab, xi, cfg);
    }
    let lr = cfg.r.ln();
    let mut log_tail = Complex64::new(0.0, 0.0);
    if p_max >= 2 {
        let lp = (p_max as f64).ln();
        for b in vertical_sets(t) {
            let z: Complex64 = (0..2 * t)
                .filter(|k| b >> k & 1 == 1)
                .map(|k| Complex64::new(1.0, xi[k]) / lr)
                .sum();
            let sign = if b.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            log_tail += exp_integral_e1(z * lp) * sign;
        }
    }
    let corrected = prod * log_tail.exp();
    let approx = euler_approximation(xi, t, ctx, cfg);
    let l = xi.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let l_regime_ok = ctx.omega < 2.0 || l <= lr / ctx.omega.ln();
    Ok(EulerProductReport {
        p_max,
        product: pair(prod),
        tail_corrected: pair(corrected),
        approximation: pair(approx),
        ratio: pair(prod / approx),
        ratio_tail_corrected: pair(corrected / approx),
        l_regime_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsys::systems::{midpoints, three_ap};

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn vertical_identity() {
        for t in 1..=6 {
            assert_eq!(vertical_sign_sum(t), -(t as i64));
            let brute = (1u32..(1 << (2 * t)))
                .filter(|&b| is_vertical(b, t))
                .count();
            assert_eq!(brute, 3 * t);
        }
    }

    #[test]
    fn three_ap_cases() {
        let ctx = WTrickContext::new(1000, 5.0, 1).unwrap();
        let psi = three_ap();
        // p ≤ ω
        assert!(local_alpha(3, 0b1, &psi, &ctx, 1 << 20).unwrap().is_zero());
        // vertical
        assert_eq!(local_alpha(7, 0b11, &psi, &ctx, 1 << 20).unwrap(), r(1, 7));
        // touches forms 1 and 3
        assert_eq!(
            local_alpha(7, 0b01_00_01, &psi, &ctx, 1 << 20).unwrap(),
            r(1, 49)
        );
        assert!(local_alpha(7, 0, &psi, &ctx, 1 << 20).unwrap().is_one());
    }

    #[test]
    fn enumeration_matches_algebra() {
        let ctx = WTrickContext::new(1000, 5.0, 1).unwrap();
        for psi in [three_ap(), midpoints(2)] {
            for p in primes_up_to(23) {
                let a = alpha_by_enumeration(p, &psi, &ctx, 1 << 24).unwrap();
                assert_eq!(a, alpha_algebraic(p, &psi, &ctx), "p = {p}");
            }
        }
    }

    #[test]
    fn euler_factor_single_form() {
        let ctx = WTrickContext::new(10000, 2.0, 1).unwrap();
        let cfg = GpyConfig::new(&ctx, 0.5).unwrap();
        let psi = LinearSystem::from_i64(&[vec![1]]);
        let p = 7u64;
        let tab = LocalFactorTable::enumerate(p, &psi, &ctx, 100).unwrap();
        let got = euler_factor(&tab, &[0.0, 0.0], &cfg);
        let lr = cfg.r.ln();
        let pf = p as f64;
        let want = 1.0 - (2.0 * pf.powf(-1.0 - 1.0 / lr) - pf.powf(-1.0 - 2.0 / lr));
        assert!((got.re - want).abs() < 1e-14 && got.im.abs() < 1e-14);
        // p ≤ ω
        let tab2 = LocalFactorTable::enumerate(2, &psi, &ctx, 100).unwrap();
        assert!((euler_factor(&tab2, &[0.3, -1.0], &cfg) - 1.0).norm() < 1e-15);
    }

    #[test]
    fn euler_factor_triangle_bound() {
        let ctx = WTrickContext::new(10000, 5.0, 1).unwrap();
        let cfg = GpyConfig::new(&ctx, 0.4).unwrap();
        let psi = three_ap();
        let xi = [0.5, -1.0, 2.0, 0.0, 0.1, -0.3];
        for p in primes_up_to(40) {
            let tab = LocalFactorTable::algebraic(p, &psi, &ctx);
            let e = euler_factor(&tab, &xi, &cfg);
            assert!((e - 1.0).norm() <= euler_factor_bound(&tab) + 1e-12);
        }
    }

    #[test]
    fn approximation_at_zero() {
        let ctx = WTrickContext::new(10000, 2.0, 1).unwrap();
        let cfg = GpyConfig::new(&ctx, 0.5).unwrap();
        let h = h_rw(&ctx, &cfg);
        // t = 1: 1 · 1 · 2^{-1}
        let a = euler_approximation(&[0.0, 0.0], 1, &ctx, &cfg);
        assert!((a.re - 0.5 / h).abs() < 1e-12);
        let rep = euler_product(
            &[0.0, 0.0],
            &LinearSystem::from_i64(&[vec![1]]),
            &ctx,
            &cfg,
            1,
        )
        .unwrap();
        assert_eq!(rep.product, [1.0, 0.0]);
    }

    #[test]
    fn e1_values() {
        // E_1(1) = 0.21938393439552
        let v = exp_integral_e1(Complex64::new(1.0, 0.0));
        assert!((v.re - 0.219_383_934_395_520_3).abs() < 1e-13);
        // E_1(5) = 0.001148295591275
        let v = exp_integral_e1(Complex64::new(5.0, 0.0));
        assert!((v.re - 0.001_148_295_591_275_3).abs() < 1e-14);
        // continuity across the switch
        let a = exp_integral_e1(Complex64::new(1.999, 0.5));
        let b = exp_integral_e1(Complex64::new(2.001, 0.5));
        assert!((a - b).norm() < 1e-3);
    }
}

//! Majorants on Z_M, averaging, von Neumann checks, smoothing and level sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::constants::TransferenceConstants;
use crate::cyclic::{convolve, dft, u2_norm, BohrSet, CyclicFn};
use crate::error::{invalid, Error, Result};
use crate::linsys::{systems, LinearSystem};
use crate::patterns::{t_operator, TMethod};
use crate::sieve::is_prime;

const BAD_BOX_EXHAUSTIVE: u64 = 10_000_000;
const BAD_BOX_SAMPLES: u64 = 200_000;
const AVERAGE_BUDGET: f64 = 2e8;

#[derive(Clone, Debug, Serialize)]
pub struct TransferenceConfig {
    pub delta: f64,
    pub eps: f64,
    pub degree: usize,
    pub level_fraction: f64,
    pub c_log: f64,
    pub eta: f64,
    pub bad_box_k: f64,
    pub tolerance: f64,
}

impl TransferenceConfig {
    pub fn new(delta: f64, eps: f64, t: &TransferenceConstants) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) || !(eps > 0.0 && eps <= 1.0) {
            return invalid("delta and eps must lie in (0, 1]");
        }
        Ok(TransferenceConfig {
            delta,
            eps,
            degree: t.degree_budget,
            level_fraction: t.level_fraction,
            c_log: t.c_log,
            eta: t.eta,
            bad_box_k: t.bad_box_k,
            tolerance: 1e-9,
        })
    }

    pub fn from_constants(t: &TransferenceConstants) -> Result<Self> {
        Self::new(t.spectral_threshold, t.bohr_radius, t)
    }

    /// δ^{−4} log ε^{−1} ≤ c log N
    pub fn constraint(&self, n: u64) -> (f64, f64, bool) {
        let lhs = self.delta.powi(-4) * (1.0 / self.eps).ln();
        let rhs = self.c_log * (n as f64).ln();
        (lhs, rhs, lhs <= rhs)
    }
}

/// f_A = 1_A − α 1_B on a host Bohr set.
#[derive(Clone, Debug)]
pub struct BalancedFn {
    pub f: CyclicFn,
    pub host: BohrSet,
    pub alpha: f64,
}

impl BalancedFn {
    /// `a` holds residues (any representatives) inside the host.
    pub fn new(a: &[i64], host: &BohrSet) -> Result<Self> {
        let m = host.modulus();
        let mut f = CyclicFn::zeros(m);
        for &x in host.elements() {
            f.values[x as usize] = 0.0;
        }
        let mut count = 0usize;
        for &x in a {
            if !host.contains(x) {
                return invalid(format!("{x} is not in the host Bohr set"));
            }
            let r = x.rem_euclid(m as i64) as usize;
            if f.values[r] == 0.0 {
                f.values[r] = 1.0;
                count += 1;
            }
        }
        let alpha = count as f64 / host.len() as f64;
        for &x in host.elements() {
            f.values[x as usize] -= alpha;
        }
        let b = BalancedFn {
            f,
            host: host.clone(),
            alpha,
        };
        if b.host_mean().abs() > 1e-12 {
            return Err(Error::Certification(
                "balanced function has nonzero mean on its host".into(),
            ));
        }
        Ok(b)
    }

    pub fn host_mean(&self) -> f64 {
        let s: f64 = self
            .host
            .elements()
            .iter()
            .map(|&x| self.f.values[x as usize])
            .sum();
        s / self.host.len() as f64
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FormsAverage {
    pub system: String,
    pub t: usize,
    pub d: usize,
    /// None when exact evaluation is over budget at this modulus
    pub average: Option<f64>,
    pub deviation: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BadBoxReport {
    pub system: String,
    pub side: u64,
    pub fraction: f64,
    pub bound: f64,
    pub holds: bool,
    pub exhaustive: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MajorantReport {
    /// max λ/ν over the support of λ
    pub ratio: f64,
    /// points with λ > 0 and ν = 0
    pub uncovered: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PseudorandomReport {
    pub modulus: u64,
    pub mean: f64,
    pub averages: Vec<FormsAverage>,
    pub bad_boxes: Vec<BadBoxReport>,
    pub majorization: Option<MajorantReport>,
}

/// The systems sampled for the linear-forms averages, within degree budget D.
pub fn sample_systems(degree: usize) -> Vec<LinearSystem> {
    let mut out = vec![systems::identity(), systems::three_ap()];
    if degree >= 2 {
        out.push(LinearSystem::from_i64(&[
            vec![1, 0, 0],
            vec![1, 1, 0],
            vec![1, 0, 1],
            vec![1, 1, 1],
        ]));
    }
    if degree >= 3 {
        out.push(LinearSystem::from_i64(&[
            vec![1, 0],
            vec![1, 1],
            vec![1, 2],
            vec![1, 3],
        ]));
    }
    out
}

fn label(sys: &LinearSystem) -> String {
    sys.to_string().trim_end().replace('\n', "; ")
}

/// E_x ∏ ν(ψ_i(x)) for each system, against the target 1.
pub fn forms_averages(nu: &CyclicFn, systems: &[LinearSystem]) -> Result<Vec<FormsAverage>> {
    systems
        .iter()
        .map(|s| {
            let theta = s.modulo(nu.m)?;
            let k = s.d().min(s.t().saturating_sub(s.d())) as i32;
            let average = if (nu.m as f64).powi(k) > AVERAGE_BUDGET {
                None
            } else {
                let fs = vec![nu.clone(); s.t()];
                Some(t_operator(&theta, &fs, TMethod::Auto)?.value)
            };
            let deviation = average.map(|v| (v - 1.0).abs());
            Ok(FormsAverage {
                system: label(s),
                t: s.t(),
                d: s.d(),
                average,
                deviation,
            })
        })
        .collect()
}

/// Fraction of m ∈ [M]^d whose box m + [P]^d (P = ⌊√M⌋) has some ψ_i straddling
/// a block boundary kM.
pub fn bad_box_fraction(sys: &LinearSystem, m: u64, k: f64) -> Result<BadBoxReport> {
    let rows = sys.rows_i64()?;
    let consts: Vec<i64> = sys.eval_i64(&vec![0; sys.d()]);
    let d = sys.d() as u32;
    let p = (m as f64).sqrt().floor() as i64;
    let mi = m as i64;
    let bad = |pt: &[i64]| {
        rows.iter().zip(&consts).any(|(r, &c)| {
            let (mut lo, mut hi) = (c, c);
            for (&a, &x) in r.iter().zip(pt) {
                let (u, v) = (a * (x + 1), a * (x + p));
                lo += u.min(v);
                hi += u.max(v);
            }
            (lo - 1).div_euclid(mi) != (hi - 1).div_euclid(mi)
        })
    };
    let total = m.checked_pow(d);
    let (count, n, exhaustive) = match total {
        Some(tot) if tot <= BAD_BOX_EXHAUSTIVE => {
            let mut pt = vec![1i64; d as usize];
            let mut c = 0u64;
            'outer: loop {
                if bad(&pt) {
                    c += 1;
                }
                for x in pt.iter_mut() {
                    *x += 1;
                    if *x <= mi {
                        continue 'outer;
                    }
                    *x = 1;
                }
                break;
            }
            (c, tot, true)
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0xb0c5);
            let mut c = 0u64;
            let mut pt = vec![0i64; d as usize];
            for _ in 0..BAD_BOX_SAMPLES {
                for x in pt.iter_mut() {
                    *x = rng.gen_range(1..=mi);
                }
                if bad(&pt) {
                    c += 1;
                }
            }
            (c, BAD_BOX_SAMPLES, false)
        }
    };
    let fraction = count as f64 / n as f64;
    let bound = k / (m as f64).sqrt();
    Ok(BadBoxReport {
        system: label(sys),
        side: p as u64,
        fraction,
        bound,
        holds: fraction <= bound,
        exhaustive,
    })
}

/// ν̃ on Z_M from ν on [N] (nu[k] = ν(k+1)), with the pseudorandomness report.
pub fn extend_weight(
    nu: &[f64],
    m: u64,
    lambda: Option<&[f64]>,
    systems: &[LinearSystem],
    bad_box_k: f64,
) -> Result<(CyclicFn, PseudorandomReport)> {
    let n = nu.len() as u64;
    if !is_prime(m) || m < n {
        return invalid(format!("M = {m} must be a prime at least N = {n}"));
    }
    let wrap = |w: &[f64]| {
        let mut f = CyclicFn::zeros(m);
        for (k, &v) in w.iter().enumerate() {
            f.values[((k as u64 + 1) % m) as usize] = v;
        }
        f
    };
    let nut = wrap(nu);
    let majorization = match lambda {
        None => None,
        Some(l) => {
            if l.len() != nu.len() {
                return invalid("λ and ν must have the same length");
            }
            let mut ratio: f64 = 0.0;
            let mut uncovered = 0;
            for (&a, &b) in l.iter().zip(nu) {
                if a > 0.0 {
                    if b > 0.0 {
                        ratio = ratio.max(a / b);
                    } else {
                        uncovered += 1;
                    }
                }
            }
            Some(MajorantReport { ratio, uncovered })
        }
    };
    let averages = forms_averages(&nut, systems)?;
    let bad_boxes = systems
        .iter()
        .map(|s| bad_box_fraction(s, m, bad_box_k))
        .collect::<Result<Vec<_>>>()?;
    let report = PseudorandomReport {
        modulus: m,
        mean: nut.mean(),
        averages,
        bad_boxes,
        majorization,
    };
    Ok((nut, report))
}

/// μ_B = (M/|B|) 1_B
pub fn bohr_measure(b: &BohrSet) -> CyclicFn {
    CyclicFn::indicator(b.modulus(), b.elements()).scale(b.modulus() as f64 / b.len() as f64)
}

/// ν′ = ½(ν̃ + ν̃∗μ_B)
pub fn average_weight(nu: &CyclicFn, b: &BohrSet) -> Result<CyclicFn> {
    if b.modulus() != nu.m {
        return invalid("Bohr set and weight over different moduli");
    }
    let sm = smooth(nu, b)?;
    Ok(CyclicFn {
        m: nu.m,
        values: nu
            .values
            .iter()
            .zip(&sm.values)
            .map(|(a, c)| 0.5 * (a + c))
            .collect(),
    })
}

/// f ∗ μ_B, directly when B is small, by FFT otherwise.
pub fn smooth(f: &CyclicFn, b: &BohrSet) -> Result<CyclicFn> {
    let m = f.m as usize;
    let els = b.elements();
    if (els.len() as u64) * (f.m) <= 50_000_000 {
        let inv = 1.0 / els.len() as f64;
        let vals = (0..m)
            .map(|x| {
                els.iter()
                    .map(|&e| f.values[(x + m - e as usize) % m])
                    .sum::<f64>()
                    * inv
            })
            .collect();
        return CyclicFn::new(f.m, vals);
    }
    convolve(f, &bohr_measure(b))
}

#[derive(Clone, Debug, Serialize)]
pub struct GvnReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub bounded: bool,
    /// Some(true/false) in the bounded case, None with a weight
    pub holds: Option<bool>,
    /// max |f_j| / ν over the support (weighted case)
    pub majorant_ratio: Option<f64>,
}

/// |T(f₁,…,f_t)|⁴ against ‖f_i‖⁴_{U²} for θ exact 1-normal at i.
pub fn gvn_check(
    theta: &LinearSystem,
    nu: Option<&CyclicFn>,
    fs: &[CyclicFn],
    i: usize,
) -> Result<GvnReport> {
    if i >= theta.t() || fs.len() != theta.t() {
        return invalid("need one function per form and i < t");
    }
    if !theta.is_exact_normal_at(i, 1) {
        return invalid(format!("system is not in exact 1-normal form at {i}"));
    }
    let majorant_ratio = match nu {
        None => {
            if fs
                .iter()
                .any(|f| f.values.iter().any(|v| v.abs() > 1.0 + 1e-12))
            {
                return invalid("bounded case needs |f_j| ≤ 1");
            }
            None
        }
        Some(nu) => {
            let mut r: f64 = 0.0;
            for f in fs {
                for (a, b) in f.values.iter().zip(&nu.values) {
                    if a.abs() > 0.0 {
                        r = r.max(if *b > 0.0 { a.abs() / b } else { f64::INFINITY });
                    }
                }
            }
            Some(r)
        }
    };
    let lhs = t_operator(theta, fs, TMethod::Auto)?.value.powi(4);
    let rhs = u2_norm(&fs[i]).powi(4);
    let bounded = nu.is_none();
    let slack = (lhs - rhs).max(0.0);
    let holds = bounded.then_some(lhs <= rhs + 1e-9);
    Ok(GvnReport {
        lhs,
        rhs,
        slack,
        bounded,
        holds,
        majorant_ratio,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SmoothingReport {
    pub gamma: Vec<u64>,
    pub bohr: BohrSet,
    pub radius_scale: f64,
    #[serde(skip)]
    pub lambda_prime: CyclicFn,
    pub mean_before: f64,
    pub mean_after: f64,
    pub support_ok: bool,
    pub gamma_bound: f64,
    pub gamma_ok: bool,
    pub u2_distance: f64,
    pub u2_scale: f64,
    pub fitted_k: f64,
}

/// Γ = {r : |λ̂(r)| ≥ δ} ∪ {1}, B = B(Γ, ε) regularized, λ′ = λ ∗ μ_B.
pub fn build_smoothing(
    lambda: &CyclicFn,
    cfg: &TransferenceConfig,
    n: u64,
) -> Result<SmoothingReport> {
    let m = lambda.m;
    let spec = dft(lambda);
    let mut gamma = spec.large(cfg.delta);
    if !gamma.contains(&1) {
        gamma.push(1);
        gamma.sort_unstable();
    }
    let fourth: f64 = spec.coeffs.iter().map(|z| z.norm_sqr().powi(2)).sum();
    let gamma_bound = cfg.delta.powi(-4) * fourth;
    let nonzero = gamma.iter().filter(|&&r| r != 0).count();
    let (radius_scale, bohr) = BohrSet::new(m, &gamma, cfg.eps.min(0.5))?.find_regular_dilate()?;
    let lambda_prime = smooth(lambda, &bohr)?;
    let top = lambda_prime
        .values
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let cut = cfg.tolerance * top.max(1.0);
    let two_n = 2 * n as i64;
    let mi = m as i64;
    let support_ok = (0..mi).all(|x| {
        let c = if 2 * x > mi { x - mi } else { x };
        c.abs() <= two_n || lambda_prime.values[x as usize].abs() <= cut
    });
    let diff = lambda.sub(&lambda_prime)?;
    let u2_distance = u2_norm(&diff);
    let u2_scale = cfg.eps.powf(0.25) + cfg.delta.powf(0.25);
    Ok(SmoothingReport {
        gamma_ok: nonzero as f64 <= gamma_bound + 1e-9,
        gamma,
        bohr,
        radius_scale,
        mean_before: lambda.mean(),
        mean_after: lambda_prime.mean(),
        lambda_prime,
        support_ok,
        gamma_bound,
        u2_distance,
        u2_scale,
        fitted_k: u2_distance / u2_scale,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSetReport {
    /// centred representatives, sorted
    pub elements: Vec<i64>,
    pub threshold: f64,
    pub density: f64,
    /// (p, ‖λ′‖_p)
    pub moments: Vec<(u32, f64)>,
}

/// A′ = {x : λ′(x) ≥ α·fraction}.
pub fn level_set(lp: &CyclicFn, alpha: f64, fraction: f64) -> LevelSetReport {
    let m = lp.m as i64;
    let threshold = alpha * fraction;
    let mut elements: Vec<i64> = (0..m)
        .filter(|&x| lp.values[x as usize] >= threshold - 1e-12)
        .map(|x| if 2 * x > m { x - m } else { x })
        .collect();
    elements.sort_unstable();
    let moments = [4u32, 6, 8]
        .iter()
        .map(|&p| {
            let s: f64 = lp
                .values
                .iter()
                .map(|v| v.abs().powi(p as i32))
                .sum::<f64>()
                / m as f64;
            (p, s.powf(1.0 / p as f64))
        })
        .collect();
    LevelSetReport {
        density: elements.len() as f64 / m as f64,
        elements,
        threshold,
        moments,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::increment::Constants;
    use crate::sieve::{GpyConfig, GpySieve, WTrickContext};

    fn rand_fn(m: u64, seed: u64, lo: f64, hi: f64) -> CyclicFn {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CyclicFn::from_fn(m, |_| rng.gen_range(lo..hi))
    }

    #[test]
    fn balanced_mean_zero() {
        let b = BohrSet::new(101, &[1, 7], 0.2).unwrap();
        let a: Vec<i64> = b.centred().into_iter().filter(|x| x % 3 == 0).collect();
        let f = BalancedFn::new(&a, &b).unwrap();
        assert!(f.host_mean().abs() < 1e-12);
        assert!(BalancedFn::new(&[50], &BohrSet::new(101, &[1], 0.1).unwrap()).is_err());
    }

    #[test]
    fn extend_flat_weight() {
        let (n, m) = (60usize, 61u64);
        let (nut, rep) = extend_weight(&vec![1.0; n], m, None, &sample_systems(1), 16.0).unwrap();
        assert_eq!(nut.values[0], 0.0);
        // identity: E ν̃ = N/M
        assert!((rep.averages[0].average.unwrap() - n as f64 / m as f64).abs() < 1e-12);
        for b in &rep.bad_boxes {
            assert!(b.holds, "{b:?}");
        }
    }

    #[test]
    fn identity_bad_boxes_are_the_top_strip() {
        let m = 101u64;
        let r = bad_box_fraction(&systems::identity(), m, 4.0).unwrap();
        assert_eq!(r.side, 10);
        assert!((r.fraction - 9.0 / 101.0).abs() < 1e-12);
        assert!(r.holds);
    }

    #[test]
    fn gpy_weight_three_ap_average() {
        let n = 2000u64;
        let ctx = WTrickContext::new(n, 2.0, 1).unwrap();
        let cfg = GpyConfig::new(&ctx, 0.5).unwrap();
        let sieve = GpySieve::new(ctx, cfg, 200_000);
        let nu: Vec<f64> = (1..=n as i64)
            .map(|k| sieve.normalized_nu(k).unwrap())
            .collect();
        let m = crate::sieve::next_prime(n);
        let (nut, rep) = extend_weight(&nu, m, None, &[systems::three_ap()], 4.0).unwrap();
        assert!(nut.values.iter().all(|v| *v >= 0.0));
        assert!(rep.averages[0].average.unwrap() > 0.0);
    }

    #[test]
    fn averaging_extremes() {
        let m = 53;
        let nu = rand_fn(m, 1, 0.0, 3.0);
        let whole = BohrSet::new(m, &[], 0.5).unwrap();
        let a = average_weight(&nu, &whole).unwrap();
        let e = nu.mean();
        for x in 0..m as usize {
            assert!((a.values[x] - 0.5 * (nu.values[x] + e)).abs() < 1e-12);
        }
        let zero = BohrSet::new(m, &[1], 0.001).unwrap();
        assert_eq!(zero.len(), 1);
        let z = average_weight(&nu, &zero).unwrap();
        for x in 0..m as usize {
            assert!((z.values[x] - nu.values[x]).abs() < 1e-12);
        }
        let b = BohrSet::new(m, &[3, 11], 0.3).unwrap();
        assert!((average_weight(&nu, &b).unwrap().mean() - e).abs() < 1e-10);
    }

    #[test]
    fn smoothing_paths_agree() {
        let m = 211;
        let f = rand_fn(m, 5, -1.0, 1.0);
        let b = BohrSet::new(m, &[1, 17], 0.2).unwrap();
        let direct = smooth(&f, &b).unwrap();
        let fft = convolve(&f, &bohr_measure(&b)).unwrap();
        for x in 0..m as usize {
            assert!((direct.values[x] - fft.values[x]).abs() < 1e-10);
        }
    }

    #[test]
    fn gvn_bounded_cases() {
        let m = 101;
        let theta =
            LinearSystem::from_i64(&[vec![1, 0, 0], vec![1, 1, 0], vec![1, 0, 1], vec![1, 1, 1]])
                .modulo(m)
                .unwrap();
        let ones = vec![CyclicFn::constant(m, 1.0); 4];
        let r = gvn_check(&theta, None, &ones, 3).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-9 && (r.rhs - 1.0).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let mut fs = ones.clone();
            fs[3] = CyclicFn::from_fn(m, |_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
            let r = gvn_check(&theta, None, &fs, 3).unwrap();
            assert_eq!(r.holds, Some(true));
            assert_eq!(r.slack, 0.0);
        }
        let three = systems::three_ap().modulo(m).unwrap();
        assert!(gvn_check(&three, None, &ones[..3], 2).is_err());
    }

    #[test]
    fn smoothing_flat_and_mean() {
        let m = 101;
        let cfg = TransferenceConfig::from_constants(&Constants::default().transference).unwrap();
        let flat = CyclicFn::constant(m, 0.3);
        let r = build_smoothing(&flat, &cfg, 50).unwrap();
        assert_eq!(r.gamma, vec![0, 1]);
        assert!(r
            .lambda_prime
            .values
            .iter()
            .all(|v| (v - 0.3).abs() < 1e-12));
        let g = rand_fn(m, 3, 0.0, 1.0);
        let r = build_smoothing(&g, &cfg, 50).unwrap();
        assert!((r.mean_after - r.mean_before).abs() < 1e-12);
        assert!(r.bohr.is_regular());
    }

    #[test]
    fn level_set_examples() {
        let m = 20;
        let a = 0.4;
        let flat = CyclicFn::constant(m, a);
        assert_eq!(level_set(&flat, a, 0.5).elements.len(), 20);
        let half = CyclicFn::from_fn(m, |x| if x < 10 { 2.0 * a } else { 0.0 });
        let r = level_set(&half, a, 0.5);
        assert_eq!(r.elements, (0..10).collect::<Vec<i64>>());
        assert!((r.density - 0.5).abs() < 1e-12);
        assert_eq!(r.moments.len(), 3);
    }
}

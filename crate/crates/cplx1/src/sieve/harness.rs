//! Exhaustive and sampled checks of the linear forms behaviour of the GPY weight.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::gpy::{rho, GpyConfig, GpySieve, WTrickContext};
use super::local::LocalFactorTable;
use super::primes::{mobius, primes_up_to};
use crate::error::{invalid, Error, Result};
use crate::linsys::LinearSystem;

/// Neumaier compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Σ_{m | x, m < R} μ(m)ρ(m) by trial over m; x = 0 is divisible by every m.
fn divisor_sum_direct(x: i128, cfg: &GpyConfig) -> f64 {
    let mut s = 0.0;
    let mut m = 1u64;
    while (m as f64) < cfg.r {
        if x % m as i128 == 0 {
            s += mobius(m) as f64 * rho(m, cfg);
        }
        m += 1;
    }
    s
}

/// α(m_1,…,m_t) = P_{n ∈ Z_m^d}(m_i | Wψ_i(n)+b ∀i) with m = lcm m_i, by enumeration.
pub fn alpha_direct(
    ms: &[u64],
    psi: &LinearSystem,
    ctx: &WTrickContext,
    budget: u64,
) -> Result<BigRational> {
    let d = psi.d();
    let m = ms.iter().fold(1u64, |a, &b| lcm(a, b));
    if (m as f64).powi(d as i32) > budget as f64 {
        return Err(Error::Budget("alpha enumeration".into()));
    }
    let rows = psi.rows_i64()?;
    let cons: Vec<i64> = psi
        .constants()
        .iter()
        .map(|c| c.to_i64().unwrap())
        .collect();
    let w = ctx.w_u64() as i128;
    let mut n = vec![0i64; d];
    let mut hits = 0u64;
    loop {
        let ok = (0..psi.t()).all(|i| {
            let v: i128 = cons[i] as i128
                + (0..d)
                    .map(|k| rows[i][k] as i128 * n[k] as i128)
                    .sum::<i128>();
            (w * v + ctx.b as i128).rem_euclid(ms[i] as i128) == 0
        });
        if ok {
            hits += 1;
        }
        let mut k = 0;
        loop {
            if k == d {
                return Ok(BigRational::new(
                    hits.into(),
                    (m as u128).pow(d as u32).into(),
                ));
            }
            n[k] += 1;
            if (n[k] as u64) < m {
                break;
            }
            n[k] = 0;
            k += 1;
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct UnfoldingReport {
    pub lhs: f64,
    pub rhs: f64,
    pub difference: f64,
    /// Σ over tuples of |∏μρ|·((q+1)^d − q^d)·α·m^d with P = qm + r
    pub boundary_bound: f64,
    pub within_bound: bool,
    pub tuples: usize,
}

/// Both sides of the unfolding identity, by exhaustion.
pub fn unfolding_oracle(
    psi: &LinearSystem,
    ctx: &WTrickContext,
    cfg: &GpyConfig,
    p: u64,
    budget: u64,
) -> Result<UnfoldingReport> {
    let d = psi.d();
    let t = psi.t();
    if (p as f64).powi(d as i32) > budget as f64 {
        return Err(Error::Budget("unfolding LHS".into()));
    }
    // LHS: h^{-t} Σ ∏ Λ = Σ ∏ S²
    let mut lhs = KahanSum::default();
    let mut n = vec![1i64; d];
    let w = ctx.w_u64() as i128;
    loop {
        let vals = psi.eval_i64(&n);
        let mut prod = 1.0;
        for v in vals {
            let s = divisor_sum_direct(w * v as i128 + ctx.b as i128, cfg);
            prod *= s * s;
        }
        lhs.add(prod);
        let mut k = 0;
        loop {
            if k == d {
                break;
            }
            n[k] += 1;
            if n[k] as u64 <= p {
                break;
            }
            n[k] = 1;
            k += 1;
        }
        if k == d {
            break;
        }
    }
    // RHS over squarefree m_ij < R
    let support: Vec<u64> = (1u64..)
        .take_while(|&m| (m as f64) < cfg.r)
        .filter(|&m| mobius(m) != 0)
        .collect();
    let nt = 2 * t;
    let tuples = support.len().pow(nt as u32);
    if tuples as u64 > budget {
        return Err(Error::Budget("unfolding RHS".into()));
    }
    let primes = primes_up_to(cfg.r.ceil() as u64);
    let tables: Vec<LocalFactorTable> = primes
        .iter()
        .map(|&q| LocalFactorTable::algebraic(q, psi, ctx))
        .collect();
    let mut rhs = KahanSum::default();
    let mut bound = KahanSum::default();
    let mut idx = vec![0usize; nt];
    loop {
        let ms: Vec<u64> = idx.iter().map(|&k| support[k]).collect();
        let weight: f64 = ms.iter().map(|&m| mobius(m) as f64 * rho(m, cfg)).product();
        if weight != 0.0 {
            // α by multiplicativity over the primes dividing some m_ij
            let mut alpha = 1.0;
            for (q, tab) in primes.iter().zip(&tables) {
                let b = (0..nt)
                    .filter(|&k| ms[k] % q == 0)
                    .fold(0u32, |a, k| a | 1 << k);
                if b != 0 {
                    alpha *= tab.alpha(b).to_f64().unwrap();
                }
            }
            let pd = (p as f64).powi(d as i32);
            rhs.add(pd * alpha * weight);
            let period = ms.iter().fold(1u64, |a, &b| lcm(a, b));
            let q = (p / period) as f64;
            let pm = (period as f64).powi(d as i32);
            bound.add(weight.abs() * ((q + 1.0).powi(d as i32) - q.powi(d as i32)) * alpha * pm);
        }
        let mut k = 0;
        loop {
            if k == nt {
                break;
            }
            idx[k] += 1;
            if idx[k] < support.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == nt {
            break;
        }
    }
    let (l, r, b) = (lhs.value(), rhs.value(), bound.value());
    let diff = (l - r).abs();
    Ok(UnfoldingReport {
        lhs: l,
        rhs: r,
        difference: diff,
        boundary_bound: b,
        within_bound: diff <= b * (1.0 + 1e-9) + 1e-9,
        tuples,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrelationStats {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub exhaustive: bool,
    pub deviation: f64,
}

/// E_{n∈[P]^d} ∏_i ν(ψ_i(n)): exhaustive when P^d ≤ max_samples, else sampled with a fixed seed.
pub fn correlation_harness(
    psi: &LinearSystem,
    p: u64,
    sieve: &GpySieve,
    max_samples: u64,
    seed: u64,
) -> Result<CorrelationStats> {
    if p == 0 {
        return invalid("P must be positive");
    }
    let d = psi.d();
    if psi.t() == 0 {
        return Ok(CorrelationStats {
            mean: 1.0,
            stderr: 0.0,
            samples: 1,
            exhaustive: true,
            deviation: 0.0,
        });
    }
    let eval = |n: &[i64]| -> Result<f64> {
        let mut prod = 1.0;
        for v in psi.eval_i64(n) {
            prod *= sieve.normalized_nu(v)?;
        }
        Ok(prod)
    };
    let total = (p as f64).powi(d as i32);
    let (mut s1, mut s2) = (KahanSum::default(), KahanSum::default());
    let exhaustive = total <= max_samples as f64;
    let samples;
    if exhaustive {
        samples = total as u64;
        let mut n = vec![1i64; d];
        'outer: loop {
            let x = eval(&n)?;
            s1.add(x);
            s2.add(x * x);
            let mut k = 0;
            loop {
                if k == d {
                    break 'outer;
                }
                n[k] += 1;
                if n[k] as u64 <= p {
                    break;
                }
                n[k] = 1;
                k += 1;
            }
        }
    } else {
        samples = max_samples;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut n = vec![0i64; d];
        for _ in 0..samples {
            for v in n.iter_mut() {
                *v = rng.gen_range(1..=p as i64);
            }
            let x = eval(&n)?;
            s1.add(x);
            s2.add(x * x);
        }
    }
    let k = samples as f64;
    let mean = s1.value() / k;
    let var = (s2.value() / k - mean * mean).max(0.0);
    let stderr = if exhaustive {
        0.0
    } else {
        (var / (k - 1.0).max(1.0)).sqrt()
    };
    Ok(CorrelationStats {
        mean,
        stderr,
        samples,
        exhaustive,
        deviation: mean - 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sieve::local::alpha_algebraic;

    #[test]
    fn unfolding_trivial_cutoff() {
        // R < 2: only m = 1 survives
        let ctx = WTrickContext::new(100, 2.0, 1).unwrap();
        let cfg = GpyConfig::new(&ctx, 0.1).unwrap();
        let psi = LinearSystem::from_i64(&[vec![1, 0], vec![1, 1]]);
        let rep = unfolding_oracle(&psi, &ctx, &cfg, 12, 1 << 20).unwrap();
        assert_eq!(rep.lhs, 144.0);
        assert_eq!(rep.rhs, 144.0);
    }

    #[test]
    fn unfolding_single_form() {
        // t = d = 1, P = 50, R = 5
        let ctx = WTrickContext::new(625, 2.0, 1).unwrap();
        let mut cfg = GpyConfig::new(&ctx, 0.25).unwrap();
        cfg.r = 5.0;
        let psi = LinearSystem::from_i64(&[vec![1]]);
        let rep = unfolding_oracle(&psi, &ctx, &cfg, 50, 1 << 20).unwrap();
        assert!(rep.within_bound, "{rep:?}");
        assert!(rep.difference <= rep.boundary_bound);
    }

    #[test]
    fn alpha_multiplicative() {
        let ctx = WTrickContext::new(1000, 2.0, 1).unwrap();
        let psi = LinearSystem::from_i64(&[vec![1, 0], vec![1, 1], vec![1, 2]]);
        for &(a, b) in &[(3u64, 5u64), (3, 7), (5, 7)] {
            for pattern in 0..8u32 {
                let pick = |q: u64| -> Vec<u64> {
                    (0..3)
                        .map(|i| if pattern >> i & 1 == 1 { q } else { 1 })
                        .collect()
                };
                let ma = pick(a);
                let mb: Vec<u64> = (0..3).map(|i| if i % 2 == 0 { b } else { 1 }).collect();
                let both: Vec<u64> = ma.iter().zip(&mb).map(|(x, y)| x * y).collect();
                let lhs = alpha_direct(&both, &psi, &ctx, 1 << 20).unwrap();
                let rhs = alpha_direct(&ma, &psi, &ctx, 1 << 20).unwrap()
                    * alpha_direct(&mb, &psi, &ctx, 1 << 20).unwrap();
                assert_eq!(lhs, rhs);
            }
        }
        // prime-level agreement with the F_p computation
        let a = alpha_direct(&[7, 1, 7], &psi, &ctx, 1 << 20).unwrap();
        assert_eq!(a, alpha_algebraic(7, &psi, &ctx)[0b101].clone());
    }

    #[test]
    fn empty_system_is_one() {
        let ctx = WTrickContext::new(1000, 2.0, 1).unwrap();
        let cfg = GpyConfig::new(&ctx, 0.3).unwrap();
        let s = GpySieve::new(ctx, cfg, 10);
        let psi = LinearSystem::linear(crate::linsys::IntMatrix::empty(2));
        assert_eq!(correlation_harness(&psi, 10, &s, 100, 1).unwrap().mean, 1.0);
    }

    #[test]
    fn kahan() {
        let mut k = KahanSum::default();
        for _ in 0..10 {
            k.add(0.1);
        }
        k.add(1e16);
        k.add(-1e16);
        assert!((k.value() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sampled_matches_exhaustive_scale() {
        let ctx = WTrickContext::new(10000, 5.0, 1).unwrap();
        let cfg = GpyConfig::new(&ctx, 0.3).unwrap();
        let lim = ctx.max_value();
        let s = GpySieve::new(ctx, cfg, lim);
        let psi = LinearSystem::from_i64(&[vec![1]]);
        let ex = correlation_harness(&psi, 10000, &s, 1 << 20, 7).unwrap();
        let mc = correlation_harness(&psi, 10000, &s, 4000, 7).unwrap();
        assert!(ex.exhaustive && !mc.exhaustive);
        assert!((ex.mean - mc.mean).abs() < 5.0 * mc.stderr + 1e-9);
    }
}

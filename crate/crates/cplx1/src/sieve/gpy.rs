//! The W-trick, the prime measure λ_{b,W} and the GPY weight Λ_{χ,R,W}.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use super::cutoff::{c_chi2, chi, Quadrature};
use super::primes::{factorize, is_prime, primes_up_to, primorial, LpfTable};
use crate::error::{invalid, Error, Result};

/// (N, ω, W, b) with gcd(b, W) = 1.
#[derive(Clone, Debug, Serialize)]
pub struct WTrickContext {
    pub n: u64,
    pub omega: f64,
    #[serde(serialize_with = "ser_big")]
    pub w: BigInt,
    pub b: i64,
    /// φ(W)/W
    pub phi_ratio: f64,
    w_small: u64,
}

fn ser_big<S: serde::Serializer>(x: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

impl WTrickContext {
    pub fn new(n: u64, omega: f64, b: i64) -> Result<Self> {
        if n == 0 {
            return invalid("N must be positive");
        }
        if omega < 0.0 {
            return invalid("omega must be non-negative");
        }
        let w = primorial(omega);
        if !w.gcd(&BigInt::from(b)).is_one() {
            return invalid(format!("gcd(b, W) = gcd({b}, {w}) ≠ 1"));
        }
        let w_small = w
            .to_u64()
            .ok_or_else(|| Error::Budget("W exceeds u64".into()))?;
        let phi_ratio = primes_up_to(omega.floor().max(0.0) as u64)
            .iter()
            .map(|&p| 1.0 - 1.0 / p as f64)
            .product();
        Ok(WTrickContext {
            n,
            omega,
            w,
            b,
            phi_ratio,
            w_small,
        })
    }

    pub fn w_u64(&self) -> u64 {
        self.w_small
    }

    /// W·n + b as i128.
    pub fn value(&self, n: i64) -> i128 {
        self.w_small as i128 * n as i128 + self.b as i128
    }

    /// Largest W·n + b with n ∈ [N].
    pub fn max_value(&self) -> u64 {
        (self.w_small as i128 * self.n as i128 + self.b as i128).max(1) as u64
    }
}

/// (η, R = N^η, L, quadrature).
#[derive(Clone, Debug, Serialize)]
pub struct GpyConfig {
    pub eta: f64,
    pub r: f64,
    pub l: f64,
    pub quadrature: Quadrature,
}

impl GpyConfig {
    pub fn new(ctx: &WTrickContext, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 0.5) {
            return invalid("eta must lie in (0, 1/2]");
        }
        let r = (ctx.n as f64).powf(eta);
        if r <= 1.0 {
            return invalid("R = N^eta must exceed 1");
        }
        Ok(GpyConfig {
            eta,
            r,
            l: 1.0,
            quadrature: Quadrature::default(),
        })
    }

    /// The usual range assumption R ≥ 2 (otherwise ρ is supported on m = 1 only).
    pub fn r_at_least_two(&self) -> bool {
        self.r >= 2.0
    }
}

/// λ_{b,W}(n) = (φ(W)/W) log N when n ∈ [N] and Wn+b is prime.
pub fn lambda_bw(n: i64, ctx: &WTrickContext) -> f64 {
    if n < 1 || n as u64 > ctx.n {
        return 0.0;
    }
    let v = ctx.value(n);
    if v > 1 && is_prime(v as u64) {
        ctx.phi_ratio * (ctx.n as f64).ln()
    } else {
        0.0
    }
}

/// ρ(m) = χ(log m / log R).
pub fn rho(m: u64, cfg: &GpyConfig) -> f64 {
    assert!(m >= 1);
    if m == 1 {
        return 1.0;
    }
    if m as f64 >= cfg.r {
        return 0.0;
    }
    chi((m as f64).ln() / cfg.r.ln())
}

/// h_{R,W} = (φ(W)/W) log R.
pub fn h_rw(ctx: &WTrickContext, cfg: &GpyConfig) -> f64 {
    ctx.phi_ratio * cfg.r.ln()
}

/// Cached tables for repeated evaluation of the GPY weight.
#[derive(Clone, Debug)]
pub struct GpySieve {
    pub ctx: WTrickContext,
    pub cfg: GpyConfig,
    pub h: f64,
    pub c2: f64,
    table: LpfTable,
    budget: u64,
}

impl GpySieve {
    /// `limit` bounds the values Wn+b that will be factored through the table.
    pub fn new(ctx: WTrickContext, cfg: GpyConfig, limit: u64) -> Self {
        let h = h_rw(&ctx, &cfg);
        let table = LpfTable::new(limit.clamp(2, 1 << 31));
        GpySieve {
            ctx,
            cfg,
            h,
            c2: c_chi2(),
            table,
            budget: 1 << 24,
        }
    }

    pub fn table(&self) -> &LpfTable {
        &self.table
    }

    /// Σ_{m | x, m ≤ R} μ(m)ρ(m) from the prime factorisation of x.
    pub fn divisor_sum(&self, x: u64) -> Result<f64> {
        let fac = factorize(x, Some(&self.table), self.budget)?;
        let small: Vec<u64> = fac
            .iter()
            .map(|&(p, _)| p)
            .filter(|&p| (p as f64) < self.cfg.r)
            .collect();
        let mut total = 0.0;
        let mut stack = vec![(0usize, 1u64, 1i32)];
        while let Some((k, m, mu)) = stack.pop() {
            total += mu as f64 * rho(m, &self.cfg);
            for j in k..small.len() {
                let next = m * small[j];
                if (next as f64) < self.cfg.r {
                    stack.push((j + 1, next, -mu));
                }
            }
        }
        Ok(total)
    }

    /// Λ_{χ,R,W}(n) = h (Σ_{m|Wn+b} μ(m)ρ(m))².
    pub fn gpy_weight(&self, n: i64) -> Result<f64> {
        let v = self.ctx.value(n);
        if v < 1 {
            return invalid(format!("W·n + b = {v} < 1"));
        }
        let v = u64::try_from(v).map_err(|_| Error::Budget("value exceeds u64".into()))?;
        let s = self.divisor_sum(v)?;
        Ok(self.h * s * s)
    }

    /// ν = Λ / c_{χ,2}.
    pub fn normalized_nu(&self, n: i64) -> Result<f64> {
        Ok(self.gpy_weight(n)? / self.c2)
    }
}

/// Direct evaluation: Σ over every m ≤ R dividing Wn+b of μ(m)ρ(m), squared, times h.
pub fn gpy_weight_bruteforce(n: i64, ctx: &WTrickContext, cfg: &GpyConfig) -> f64 {
    let x = ctx.value(n) as u64;
    let mut s = 0.0;
    let mut m = 1u64;
    while (m as f64) < cfg.r {
        if x % m == 0 {
            s += super::primes::mobius(m) as f64 * rho(m, cfg);
        }
        m += 1;
    }
    h_rw(ctx, cfg) * s * s
}

#[derive(Clone, Debug, Serialize)]
pub struct MajorizationReport {
    pub regime_ok: bool,
    pub checked: usize,
    pub violations: Vec<i64>,
    pub max_ratio: f64,
}

/// λ_{b,W}(n) ≤ η^{−1} Λ(n) on the sample.
pub fn majorization_check(s: &GpySieve, sample: &[i64]) -> Result<MajorizationReport> {
    let regime_ok = s.ctx.w_u64() as f64 + s.ctx.b as f64 > s.cfg.r;
    let mut violations = Vec::new();
    let mut max_ratio: f64 = 0.0;
    for &n in sample {
        let lam = lambda_bw(n, &s.ctx);
        if lam == 0.0 {
            continue;
        }
        let big = s.gpy_weight(n)?;
        let ratio = lam / big;
        max_ratio = max_ratio.max(ratio);
        if lam > big / s.cfg.eta * (1.0 + 1e-12) {
            violations.push(n);
        }
    }
    Ok(MajorizationReport {
        regime_ok,
        checked: sample.len(),
        violations,
        max_ratio,
    })
}

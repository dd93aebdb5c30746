//! Pattern counts: the averaging operator T over Z_M and Z, exact solution
//! counts in finite sets, and averages over chains of Bohr sets.

mod chain;
mod count;

pub(crate) use chain::shift_histogram;
pub use chain::{t_bohr, BohrChain, TBohrOptions};
pub use count::{count_distinct_solutions, count_solutions, count_solutions_brute, set_partitions};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;

use crate::cyclic::{dft, CyclicFn};
use crate::error::{invalid, Error, Result};
use crate::linsys::{
    integer_kernel, nullspace_mod, rref_mod, Ambient, Domain, IntMatrix, Lattice, LinearSystem,
};
use crate::sieve::is_prime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Brute,
    Lattice,
    Fourier,
    Sampled,
}

/// A normalized average or an exact count.
#[derive(Clone, Debug, Serialize)]
pub struct PatternCountResult {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<u64>,
    pub method: Method,
    /// Terms evaluated or search nodes visited.
    pub cost: u64,
    /// Half-width of a 95% interval, sampled results only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_half_width: Option<f64>,
}

impl PatternCountResult {
    fn average(value: f64, method: Method, cost: u64) -> Self {
        PatternCountResult {
            value,
            exact: None,
            method,
            cost,
            ci_half_width: None,
        }
    }
}

pub const DEFAULT_BUDGET: u64 = 200_000_000;
pub const BRUTE_LIMIT: u64 = 10_000_000;

/// Which evaluation of T to use. `Auto` picks the cheapest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TMethod {
    Auto,
    Brute,
    Lattice,
    Fourier,
}

fn residues(theta: &LinearSystem, m: u64) -> (Vec<Vec<u64>>, Vec<u64>) {
    let mb = BigInt::from(m);
    let red = |a: &BigInt| a.mod_floor(&mb).to_u64().unwrap();
    let rows = (0..theta.t())
        .map(|i| theta.form(i).iter().map(red).collect())
        .collect();
    let consts = theta.constants().iter().map(red).collect();
    (rows, consts)
}

fn checked_pow(m: u64, e: usize) -> Option<u64> {
    m.checked_pow(e as u32)
}

/// Sum of g over all F_M-combinations of `basis`, plus `offset`.
/// Work is split on the first coefficient; partial sums are added in order.
fn sum_over_span<F>(basis: &[Vec<u64>], offset: &[u64], m: u64, g: F) -> f64
where
    F: Fn(&[u64]) -> f64 + Sync,
{
    let t = offset.len();
    let k = basis.len();
    if k == 0 {
        return g(offset);
    }
    let partial: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|c0| {
            let mut y: Vec<u64> = (0..t)
                .map(|j| {
                    ((offset[j] as u128 + c0 as u128 * basis[0][j] as u128) % m as u128) as u64
                })
                .collect();
            let mut coef = vec![0u64; k];
            let mut acc = 0.0;
            loop {
                acc += g(&y);
                // odometer over coefficients 1..k
                let mut pos = 1;
                loop {
                    if pos == k {
                        return acc;
                    }
                    coef[pos] += 1;
                    for j in 0..t {
                        y[j] += basis[pos][j];
                        if y[j] >= m {
                            y[j] -= m;
                        }
                    }
                    if coef[pos] < m {
                        break;
                    }
                    coef[pos] = 0;
                    pos += 1;
                }
            }
        })
        .collect();
    partial.iter().sum()
}

fn check_fs(theta: &LinearSystem, fs: &[CyclicFn]) -> Result<u64> {
    let Ambient::Cyclic(m) = theta.ambient() else {
        return invalid("T over Z_M needs a cyclic system");
    };
    if fs.len() != theta.t() {
        return invalid(format!(
            "expected {} functions, got {}",
            theta.t(),
            fs.len()
        ));
    }
    if fs.iter().any(|f| f.m != m) {
        return invalid("function modulus differs from the system's");
    }
    Ok(m)
}

/// E_{n∈Z_M^d} ∏ f_i(θ_i(n)) by direct enumeration.
pub fn t_operator_brute(theta: &LinearSystem, fs: &[CyclicFn]) -> Result<PatternCountResult> {
    let m = check_fs(theta, fs)?;
    let d = theta.d();
    let total = checked_pow(m, d)
        .filter(|&c| c <= BRUTE_LIMIT)
        .ok_or_else(|| {
            Error::Budget(format!(
                "brute force over Z_{m}^{d} exceeds {BRUTE_LIMIT} points"
            ))
        })?;
    let (rows, consts) = residues(theta, m);
    // columns of θ are the generators; every n is a combination of unit vectors
    let cols: Vec<Vec<u64>> = (0..d)
        .map(|k| rows.iter().map(|r| r[k]).collect())
        .collect();
    let s = sum_over_span(&cols, &consts, m, |y| prod_at(fs, y));
    Ok(PatternCountResult::average(
        s / total as f64,
        Method::Brute,
        total,
    ))
}

#[inline]
fn prod_at(fs: &[CyclicFn], y: &[u64]) -> f64 {
    let mut p = 1.0;
    for (f, &v) in fs.iter().zip(y) {
        p *= f.values[v as usize];
        if p == 0.0 {
            return 0.0;
        }
    }
    p
}

fn require_prime(m: u64) -> Result<()> {
    if !is_prime(m) {
        return invalid(format!("modulus {m} is not prime"));
    }
    Ok(())
}

/// E over the image of θ (a coset of a subspace of F_M^t); the fibres of θ have equal size.
pub fn t_operator_lattice(theta: &LinearSystem, fs: &[CyclicFn]) -> Result<PatternCountResult> {
    let m = check_fs(theta, fs)?;
    require_prime(m)?;
    let (rows, consts) = residues(theta, m);
    let t = theta.t();
    let cols: Vec<Vec<u64>> = (0..theta.d())
        .map(|k| rows.iter().map(|r| r[k]).collect())
        .collect();
    let (basis, _) = rref_mod(&cols, t, m);
    let total = checked_pow(m, basis.len())
        .filter(|&c| c <= DEFAULT_BUDGET)
        .ok_or_else(|| Error::Budget(format!("image of dimension {} too large", basis.len())))?;
    let s = sum_over_span(&basis, &consts, m, |y| prod_at(fs, y));
    Ok(PatternCountResult::average(
        s / total as f64,
        Method::Lattice,
        total,
    ))
}

/// Σ_{r ⊥ image θ} ∏ f̂_i(r_i) e(c_i r_i / M).
pub fn t_operator_fourier(theta: &LinearSystem, fs: &[CyclicFn]) -> Result<PatternCountResult> {
    let m = check_fs(theta, fs)?;
    require_prime(m)?;
    let (rows, consts) = residues(theta, m);
    let t = theta.t();
    // r·θ(n) = 0 for all n  ⟺  θᵀ r = 0
    let theta_t: Vec<Vec<u64>> = (0..theta.d())
        .map(|k| rows.iter().map(|r| r[k]).collect())
        .collect();
    let ann = nullspace_mod(&theta_t, t, m);
    let total = checked_pow(m, ann.len())
        .filter(|&c| c <= DEFAULT_BUDGET)
        .ok_or_else(|| {
            Error::Budget(format!("annihilator of dimension {} too large", ann.len()))
        })?;
    let spectra: Vec<Vec<Complex64>> = fs
        .iter()
        .zip(&consts)
        .map(|(f, &c)| {
            let s = dft(f);
            (0..m)
                .map(|r| {
                    let ang =
                        2.0 * std::f64::consts::PI * ((c as u128 * r as u128) % m as u128) as f64
                            / m as f64;
                    s.coeffs[r as usize] * Complex64::from_polar(1.0, ang)
                })
                .collect()
        })
        .collect();
    let zero = vec![0u64; t];
    let re = sum_over_span(&ann, &zero, m, |r| {
        let mut p = Complex64::new(1.0, 0.0);
        for (sp, &ri) in spectra.iter().zip(r) {
            p *= sp[ri as usize];
        }
        p.re
    });
    Ok(PatternCountResult::average(
        re,
        Method::Fourier,
        total + t as u64 * m,
    ))
}

/// T(f_1,…,f_t) for a linear system over Z_M.
pub fn t_operator(
    theta: &LinearSystem,
    fs: &[CyclicFn],
    method: TMethod,
) -> Result<PatternCountResult> {
    let m = check_fs(theta, fs)?;
    match method {
        TMethod::Brute => t_operator_brute(theta, fs),
        TMethod::Lattice => t_operator_lattice(theta, fs),
        TMethod::Fourier => t_operator_fourier(theta, fs),
        TMethod::Auto => {
            if !is_prime(m) {
                return t_operator_brute(theta, fs);
            }
            let (rows, _) = residues(theta, m);
            let cols: Vec<Vec<u64>> = (0..theta.d())
                .map(|k| rows.iter().map(|r| r[k]).collect())
                .collect();
            let k = rref_mod(&cols, theta.t(), m).0.len();
            if k <= theta.t() - k {
                t_operator_lattice(theta, fs)
            } else {
                t_operator_fourier(theta, fs)
            }
        }
    }
}

/// A function on [−2N, 2N]; `values[y + 2N]`.
#[derive(Clone, Debug)]
pub struct BoxFn {
    pub n: i64,
    pub values: Vec<f64>,
}

impl BoxFn {
    pub fn new(n: i64, values: Vec<f64>) -> Result<Self> {
        if n < 0 || values.len() as i64 != 4 * n + 1 {
            return invalid(format!("expected {} values on [-2N, 2N]", 4 * n + 1));
        }
        Ok(BoxFn { n, values })
    }

    pub fn indicator(n: i64, set: &[i64]) -> Result<Self> {
        let mut values = vec![0.0; (4 * n + 1).max(0) as usize];
        for &a in set {
            if a.abs() > 2 * n {
                return invalid(format!("{a} outside [-2N, 2N]"));
            }
            values[(a + 2 * n) as usize] = 1.0;
        }
        Self::new(n, values)
    }

    pub fn at(&self, y: i64) -> f64 {
        if y.abs() > 2 * self.n {
            0.0
        } else {
            self.values[(y + 2 * self.n) as usize]
        }
    }

    fn support(&self) -> Vec<i64> {
        (-2 * self.n..=2 * self.n)
            .filter(|&y| self.at(y) != 0.0)
            .collect()
    }

    /// The same function read on Z_M.
    pub fn wrap(&self, m: u64) -> Result<CyclicFn> {
        let pts: Vec<(i64, f64)> = (-2 * self.n..=2 * self.n)
            .map(|y| (y, self.at(y)))
            .filter(|p| p.1 != 0.0)
            .collect();
        CyclicFn::wrap(m, &pts)
    }
}

/// M^{−(t−r)} Σ_{y ∈ [−2N,2N]^t, Vy = 0} ∏ f_i(y_i).
pub fn t_over_z(v: &IntMatrix, fs: &[BoxFn], m: u64) -> Result<PatternCountResult> {
    let t = v.cols();
    if fs.len() != t {
        return invalid(format!("expected {t} functions, got {}", fs.len()));
    }
    let n = fs.first().map(|f| f.n).unwrap_or(0);
    if fs.iter().any(|f| f.n != n) {
        return invalid("functions live on different boxes");
    }
    require_prime(m)?;
    let bound = BigInt::from(2) * v.l1_norm() * BigInt::from(n);
    if BigInt::from(m) <= bound {
        return invalid(format!("modulus {m} must exceed 2‖V‖N = {bound}"));
    }
    let r = v.rank();
    let ker = integer_kernel(&v.row_vecs(), t);
    let lat = Lattice::from_generators(&ker, t)?;
    let domains: Vec<Domain> = fs
        .iter()
        .map(|f| Domain::from_values(f.support()))
        .collect();
    let mut sum = 0.0;
    let cost = lat.for_each_point(&domains, DEFAULT_BUDGET, |y| {
        sum += fs.iter().zip(y).map(|(f, &yi)| f.at(yi)).product::<f64>();
    })?;
    let scale = (m as f64).powi(-((t - r) as i32));
    Ok(PatternCountResult::average(
        sum * scale,
        Method::Lattice,
        cost,
    ))
}

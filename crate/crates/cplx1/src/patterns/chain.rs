//! Chains B₀ ≥_ρ B₁ ≥_ρ … of regular Bohr sets and the average T_B over them.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{Method, PatternCountResult};
use crate::cyclic::{BohrSet, CyclicFn};
use crate::error::{invalid, Error, Result};
use crate::linsys::LinearSystem;

#[derive(Clone, Debug, Serialize)]
pub struct BohrChain {
    sets: Vec<BohrSet>,
    /// rhos[i] is the ratio with B_{i+1} ⊆ B_{i|rhos[i]}
    rhos: Vec<f64>,
}

impl BohrChain {
    pub fn new(sets: Vec<BohrSet>, rhos: Vec<f64>) -> Result<Self> {
        if sets.is_empty() {
            return invalid("empty chain");
        }
        if rhos.len() + 1 != sets.len() {
            return invalid("need one ratio per consecutive pair");
        }
        let m = sets[0].modulus();
        for (i, b) in sets.iter().enumerate() {
            if b.modulus() != m {
                return invalid("Bohr sets over different moduli");
            }
            if !b.is_regular() {
                return Err(Error::Certification(format!("B_{i} is not regular")));
            }
        }
        for i in 0..rhos.len() {
            if !sets[i + 1].is_within(&sets[i], rhos[i]) {
                return Err(Error::Certification(format!(
                    "B_{} is not inside B_{}|{}",
                    i + 1,
                    i,
                    rhos[i]
                )));
            }
        }
        Ok(BohrChain { sets, rhos })
    }

    /// B₀ = regular dilate of `base`, then B_{i+1} = regular dilate of B_{i|ρ}.
    pub fn geometric(base: &BohrSet, rho: f64, len: usize) -> Result<Self> {
        if len == 0 {
            return invalid("empty chain");
        }
        let mut sets = vec![base.find_regular_dilate()?.1];
        for _ in 1..len {
            let next = sets.last().unwrap().dilate(rho)?.find_regular_dilate()?.1;
            sets.push(next);
        }
        BohrChain::new(sets, vec![rho; len - 1])
    }

    pub fn sets(&self) -> &[BohrSet] {
        &self.sets
    }

    pub fn rhos(&self) -> &[f64] {
        &self.rhos
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn modulus(&self) -> u64 {
        self.sets[0].modulus()
    }
}

#[derive(Clone, Debug)]
pub struct TBohrOptions {
    /// Exact evaluation when its cost is at most this.
    pub exact_limit: u64,
    pub samples: u64,
    pub seed: u64,
}

impl Default for TBohrOptions {
    fn default() -> Self {
        TBohrOptions {
            exact_limit: 100_000_000,
            samples: 2_000_000,
            seed: 0x5eed,
        }
    }
}

fn coeffs_mod(phi: &LinearSystem, m: u64) -> Result<(Vec<Vec<i64>>, Vec<i64>)> {
    let mb = BigInt::from(m);
    let red = |a: &BigInt| {
        a.mod_floor(&mb)
            .to_i64()
            .ok_or_else(|| Error::Budget("modulus too large".into()))
    };
    let rows = (0..phi.t())
        .map(|i| phi.form(i).iter().map(red).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let consts = phi.constants().iter().map(red).collect::<Result<_>>()?;
    Ok((rows, consts))
}

/// E_{x₀∈B₀,…,x_q∈B_q} ∏ f_i(φ_i(x)).
///
/// When φ is in shift form (x₀ has coefficient 1 everywhere) the tuple of
/// shifts ψ(x₁,…,x_q) is histogrammed first, so the cost is the number of
/// distinct shift tuples times |B₀|.
pub fn t_bohr(
    phi: &LinearSystem,
    chain: &BohrChain,
    fs: &[CyclicFn],
    opts: &TBohrOptions,
) -> Result<PatternCountResult> {
    let m = chain.modulus();
    if phi.d() != chain.len() {
        return invalid(format!(
            "system has {} variables, chain has {} sets",
            phi.d(),
            chain.len()
        ));
    }
    if fs.len() != phi.t() || fs.iter().any(|f| f.m != m) {
        return invalid("need one function on Z_M per form");
    }
    let (rows, consts) = coeffs_mod(phi, m)?;
    let els: Vec<Vec<i64>> = chain
        .sets()
        .iter()
        .map(|b| b.elements().iter().map(|&x| x as i64).collect())
        .collect();
    let shift_form = (0..phi.t()).all(|i| phi.coeff(i, 0).is_one());
    let tail: u64 = els[1..]
        .iter()
        .map(|e| e.len() as u64)
        .try_fold(1u64, |a, n| a.checked_mul(n))
        .unwrap_or(u64::MAX);
    let b0 = els[0].len() as u64;
    let brute = tail.saturating_mul(b0);
    if shift_form && tail <= opts.exact_limit {
        let hist = shift_histogram(&rows, &consts, &els[1..], m);
        let cost = tail + hist.len() as u64 * b0;
        if cost <= opts.exact_limit {
            return Ok(exact_from_histogram(hist, &els[0], fs, m, tail, cost));
        }
    }
    if brute <= opts.exact_limit {
        return Ok(brute_force(&rows, &consts, &els, fs, m, brute));
    }
    Ok(sampled(&rows, &consts, &els, fs, m, opts))
}

pub(crate) fn shift_histogram(
    rows: &[Vec<i64>],
    consts: &[i64],
    els: &[Vec<i64>],
    m: u64,
) -> HashMap<Vec<u32>, u64> {
    let t = rows.len();
    let mi = m as i64;
    let q = els.len();
    let mut hist: HashMap<Vec<u32>, u64> = HashMap::new();
    if els.iter().any(|e| e.is_empty()) {
        return hist;
    }
    let mut idx = vec![0usize; q];
    let mut s: Vec<i64> = consts.to_vec();
    for (k, e) in els.iter().enumerate() {
        for i in 0..t {
            s[i] = (s[i] + rows[i][k + 1] * e[0]).rem_euclid(mi);
        }
    }
    loop {
        *hist
            .entry(s.iter().map(|&v| v as u32).collect())
            .or_insert(0) += 1;
        let mut pos = 0;
        loop {
            if pos == q {
                return hist;
            }
            let e = &els[pos];
            let old = e[idx[pos]];
            idx[pos] += 1;
            let wrapped = idx[pos] == e.len();
            if wrapped {
                idx[pos] = 0;
            }
            let new = e[idx[pos]];
            for i in 0..t {
                s[i] = (s[i] + rows[i][pos + 1] * (new - old)).rem_euclid(mi);
            }
            if !wrapped {
                break;
            }
            pos += 1;
        }
    }
}

fn exact_from_histogram(
    hist: HashMap<Vec<u32>, u64>,
    b0: &[i64],
    fs: &[CyclicFn],
    m: u64,
    tail: u64,
    cost: u64,
) -> PatternCountResult {
    let mut entries: Vec<(Vec<u32>, u64)> = hist.into_iter().collect();
    entries.sort_unstable();
    let mi = m as i64;
    let partial: Vec<f64> = entries
        .par_chunks(256)
        .map(|chunk| {
            let mut acc = 0.0;
            for (s, c) in chunk {
                let mut inner = 0.0;
                for &x0 in b0 {
                    let mut p = 1.0;
                    for (f, &si) in fs.iter().zip(s) {
                        p *= f.values[((x0 + si as i64) % mi) as usize];
                        if p == 0.0 {
                            break;
                        }
                    }
                    inner += p;
                }
                acc += *c as f64 * inner;
            }
            acc
        })
        .collect();
    let total = tail as f64 * b0.len() as f64;
    let value = if total == 0.0 {
        0.0
    } else {
        partial.iter().sum::<f64>() / total
    };
    PatternCountResult {
        value,
        exact: None,
        method: Method::Brute,
        cost,
        ci_half_width: None,
    }
}

fn eval(rows: &[Vec<i64>], consts: &[i64], x: &[i64], fs: &[CyclicFn], m: i64) -> f64 {
    let mut p = 1.0;
    for (i, f) in fs.iter().enumerate() {
        let mut v = consts[i];
        for (k, &xk) in x.iter().enumerate() {
            v += rows[i][k] * xk;
        }
        p *= f.values[v.rem_euclid(m) as usize];
        if p == 0.0 {
            return 0.0;
        }
    }
    p
}

fn brute_force(
    rows: &[Vec<i64>],
    consts: &[i64],
    els: &[Vec<i64>],
    fs: &[CyclicFn],
    m: u64,
    cost: u64,
) -> PatternCountResult {
    if els.iter().any(|e| e.is_empty()) {
        return PatternCountResult {
            value: 0.0,
            exact: None,
            method: Method::Brute,
            cost: 0,
            ci_half_width: None,
        };
    }
    let mi = m as i64;
    let q = els.len();
    let partial: Vec<f64> = els[0]
        .par_iter()
        .map(|&x0| {
            let mut idx = vec![0usize; q];
            let mut x: Vec<i64> = els.iter().map(|e| e[0]).collect();
            x[0] = x0;
            let mut acc = 0.0;
            loop {
                acc += eval(rows, consts, &x, fs, mi);
                let mut pos = 1;
                loop {
                    if pos == q {
                        return acc;
                    }
                    idx[pos] += 1;
                    if idx[pos] < els[pos].len() {
                        x[pos] = els[pos][idx[pos]];
                        break;
                    }
                    idx[pos] = 0;
                    x[pos] = els[pos][0];
                    pos += 1;
                }
            }
        })
        .collect();
    let total: f64 = els.iter().map(|e| e.len() as f64).product();
    PatternCountResult {
        value: partial.iter().sum::<f64>() / total,
        exact: None,
        method: Method::Brute,
        cost,
        ci_half_width: None,
    }
}

/// x₀ runs through B₀ cyclically (proportional strata), x₁…x_q uniform.
fn sampled(
    rows: &[Vec<i64>],
    consts: &[i64],
    els: &[Vec<i64>],
    fs: &[CyclicFn],
    m: u64,
    opts: &TBohrOptions,
) -> PatternCountResult {
    let mi = m as i64;
    let n = opts.samples.max(2);
    let block = 4096u64;
    let blocks = n.div_ceil(block);
    let sums: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|bi| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(opts.seed ^ bi.wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let mut x = vec![0i64; els.len()];
            let (mut s, mut s2) = (0.0, 0.0);
            for k in bi * block..((bi + 1) * block).min(n) {
                x[0] = els[0][(k % els[0].len() as u64) as usize];
                for j in 1..els.len() {
                    x[j] = els[j][rng.gen_range(0..els[j].len())];
                }
                let v = eval(rows, consts, &x, fs, mi);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let nf = n as f64;
    let mean = s / nf;
    let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    PatternCountResult {
        value: mean,
        exact: None,
        method: Method::Sampled,
        cost: n,
        ci_half_width: Some(1.96 * (var / nf).sqrt()),
    }
}

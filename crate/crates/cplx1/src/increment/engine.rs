//! The density-increment iteration over Bohr sets in Z_M.

use std::collections::HashSet;

use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use super::constants::IncrementConstants;
use super::weights::BalancedFn;
use crate::cyclic::{convolve, dft, local_u2_fourth_twisted, BohrSet, CyclicFn};
use crate::error::{invalid, Error, Result};
use crate::linsys::{
    integer_kernel, kernel_parametrization, Domain, IntMatrix, Lattice, LinearSystem,
};
use crate::patterns::{count_solutions, shift_histogram, BohrChain};
use crate::sieve::next_prime;

/// Where the expansion landed.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "case", rename_all = "lowercase")]
pub enum Case {
    /// T_B(1_A,…,1_A) ≥ fraction·α^t; `count` is the exact chain pattern count.
    One { count: u64, degenerate: bool },
    /// Term `mask` (bit i set: f_A in slot i) is large; `index` = min(mask).
    Two {
        mask: usize,
        index: usize,
        eta: f64,
        certified: f64,
        threshold_met: Option<bool>,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct Expansion {
    pub alpha: f64,
    /// |B₀|·…·|B_q|
    pub total: u64,
    /// counts[S] = #{x : φ_i(x) ∈ A for i ∈ S, φ_i(x) ∈ B₀ otherwise}
    pub counts: Vec<u64>,
    /// terms[S] = T_B(h₁,…,h_t) with h_i = f_A on S and α1_{B₀} elsewhere
    pub terms: Vec<f64>,
    pub t_full: f64,
    pub main: f64,
    /// |Σ_S terms[S] − t_full|
    pub identity_error: f64,
    pub case: Case,
}

fn shift_rows(phi: &LinearSystem, m: u64) -> Result<(Vec<Vec<i64>>, Vec<i64>)> {
    if (0..phi.t()).any(|i| !phi.coeff(i, 0).is_one()) {
        return invalid("φ must carry the shift variable x₀ with coefficient 1 in every form");
    }
    let red = phi.modulo(m)?;
    let rows = red.rows_i64()?;
    let consts = red
        .constants()
        .iter()
        .map(|c| c.to_i64().unwrap())
        .collect();
    Ok((rows, consts))
}

/// Upper estimate of the work of one expansion on this chain.
pub fn expansion_work(chain: &BohrChain, t: usize) -> f64 {
    let sets = chain.sets();
    let tail: f64 = sets[1..].iter().map(|b| b.len() as f64).product();
    let words = sets[0].len().div_ceil(64) as f64;
    tail * (1.0 + (1u64 << t) as f64 * t as f64 * words)
}

/// The 2^t terms of T_B(1_A,…,1_A) with 1_A = f_A + α1_{B₀}, from exact subset counts.
pub fn multilinear_expand(
    a: &[i64],
    chain: &BohrChain,
    phi: &LinearSystem,
    fraction: f64,
) -> Result<Expansion> {
    let t = phi.t();
    if t == 0 || t > 16 {
        return invalid("need 1 ≤ t ≤ 16 forms");
    }
    if phi.d() != chain.len() {
        return invalid(format!(
            "system has {} variables, chain has {} sets",
            phi.d(),
            chain.len()
        ));
    }
    let m = chain.modulus();
    let b0 = &chain.sets()[0];
    let (rows, consts) = shift_rows(phi, m)?;
    let mut in_a = vec![false; m as usize];
    let mut size = 0usize;
    for &x in a {
        if !b0.contains(x) {
            return invalid(format!("{x} is not in B₀"));
        }
        let r = x.rem_euclid(m as i64) as usize;
        if !in_a[r] {
            in_a[r] = true;
            size += 1;
        }
    }
    let mut in_b = vec![false; m as usize];
    for &x in b0.elements() {
        in_b[x as usize] = true;
    }
    let n0 = b0.len();
    let alpha = size as f64 / n0 as f64;
    let els0: Vec<i64> = b0.elements().iter().map(|&x| x as i64).collect();
    let tail_sets: Vec<Vec<i64>> = chain.sets()[1..]
        .iter()
        .map(|b| b.elements().iter().map(|&x| x as i64).collect())
        .collect();
    let tail: u64 = tail_sets.iter().map(|e| e.len() as u64).product();
    let total = tail * n0 as u64;
    let full = (1usize << t) - 1;

    let hist = shift_histogram(&rows, &consts, &tail_sets, m);
    let mut entries: Vec<(Vec<u32>, u64)> = hist.into_iter().collect();
    entries.sort_unstable();

    // bitsets over x₀ ∈ B₀ for every distinct shift value of every form
    let words = n0.div_ceil(64);
    let bits = |s: u32, table: &[bool]| -> Vec<u64> {
        let mut w = vec![0u64; words];
        for (k, &x0) in els0.iter().enumerate() {
            if table[((x0 + s as i64) % m as i64) as usize] {
                w[k / 64] |= 1 << (k % 64);
            }
        }
        w
    };
    let mut tables: Vec<(Vec<u32>, Vec<Vec<u64>>, Vec<Vec<u64>>)> = Vec::with_capacity(t);
    for i in 0..t {
        let mut vals: Vec<u32> = entries.iter().map(|(s, _)| s[i]).collect();
        vals.sort_unstable();
        vals.dedup();
        let ba: Vec<Vec<u64>> = vals.par_iter().map(|&s| bits(s, &in_a)).collect();
        let bb: Vec<Vec<u64>> = vals.par_iter().map(|&s| bits(s, &in_b)).collect();
        tables.push((vals, ba, bb));
    }

    let partial: Vec<Vec<u64>> = entries
        .par_chunks(64)
        .map(|chunk| {
            let mut acc = vec![0u64; full + 1];
            let mut sel: Vec<(&[u64], &[u64])> = Vec::with_capacity(t);
            let mut scratch = vec![0u64; words];
            for (s, c) in chunk {
                sel.clear();
                for (i, (vals, ba, bb)) in tables.iter().enumerate() {
                    let j = vals.binary_search(&s[i]).unwrap();
                    sel.push((&ba[j], &bb[j]));
                }
                for (mask, slot) in acc.iter_mut().enumerate() {
                    scratch.fill(u64::MAX);
                    for (i, (ba, bb)) in sel.iter().enumerate() {
                        let src = if mask >> i & 1 == 1 { ba } else { bb };
                        for (d, w) in scratch.iter_mut().zip(src.iter()) {
                            *d &= w;
                        }
                    }
                    *slot += c * scratch.iter().map(|w| w.count_ones() as u64).sum::<u64>();
                }
            }
            acc
        })
        .collect();
    let mut counts = vec![0u64; full + 1];
    for p in partial {
        for (c, v) in counts.iter_mut().zip(p) {
            *c += v;
        }
    }

    let tf = total as f64;
    let terms: Vec<f64> = (0..=full)
        .map(|mask| {
            let k = mask.count_ones() as i32;
            let mut sum = 0.0;
            // subsets S' of mask
            let mut sub = mask;
            loop {
                let kk = (mask & !sub).count_ones() as i32;
                sum += (-alpha).powi(kk) * counts[sub] as f64 / tf;
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & mask;
            }
            alpha.powi(t as i32 - k) * sum
        })
        .collect();
    let t_full = counts[full] as f64 / tf;
    let main = terms[0];
    let identity_error = (terms.iter().sum::<f64>() - t_full).abs();
    if identity_error > 1e-9 {
        return Err(Error::Certification(format!(
            "multilinear identity off by {identity_error:e}"
        )));
    }
    let at = alpha.powi(t as i32);
    let case = if size == 0 {
        Case::One {
            count: 0,
            degenerate: true,
        }
    } else if t_full >= fraction * at {
        Case::One {
            count: counts[full],
            degenerate: false,
        }
    } else {
        let mut best = 1usize;
        for mask in 2..=full {
            if terms[mask].abs() > terms[best].abs() {
                best = mask;
            }
        }
        let certified = (main - t_full) / full as f64;
        let eta = terms[best].abs();
        if eta + 1e-12 < certified {
            return Err(Error::Certification("pigeonhole bound violated".into()));
        }
        let threshold_met = (main >= 0.75 * at).then(|| eta >= at / (2.0 * full as f64));
        Case::Two {
            mask: best,
            index: best.trailing_zeros() as usize,
            eta,
            certified,
            threshold_met,
        }
    };
    Ok(Expansion {
        alpha,
        total,
        counts,
        terms,
        t_full,
        main,
        identity_error,
        case,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LargeNorm {
    /// chain indices (1-based positions in B₀,…,B_q)
    pub k: usize,
    pub l: usize,
    pub a: i64,
    pub b: i64,
    pub value: f64,
    pub threshold: f64,
    pub candidates: Vec<(usize, usize, i64, i64, f64)>,
}

fn box_args<'a>(x1: &'a [i64], x2: &'a [i64], a: i64, b: i64) -> (&'a [i64], &'a [i64], i64, i64) {
    // the box norm is symmetric; put the larger set first (cost n₁n₂²)
    if x1.len() >= x2.len() {
        (x1, x2, a, b)
    } else {
        (x2, x1, b, a)
    }
}

fn box_cost(n0: usize, n1: usize, n2: usize) -> f64 {
    let (big, small) = if n1 >= n2 { (n1, n2) } else { (n2, n1) };
    n0 as f64 * big as f64 * (small as f64).powi(2)
}

/// Search the pairs ψ_i depends on for E_{u₀∈B₀}‖f(u₀+·)‖⁴_{⊠a,b(B_k×B_ℓ)} ≥ fraction·η⁴.
pub fn locate_large_norm(
    f: &CyclicFn,
    chain: &BohrChain,
    psi: &LinearSystem,
    i: usize,
    eta: f64,
    c: &IncrementConstants,
) -> Result<LargeNorm> {
    if psi.d() + 1 != chain.len() {
        return invalid("chain must have one set per variable plus B₀");
    }
    let q = psi.d();
    let sets: Vec<Vec<i64>> = chain.sets().iter().map(|b| b.centred()).collect();
    let mut pairs = Vec::new();
    for k in 0..q {
        for l in k + 1..q {
            if psi.depends(i, k) && psi.depends(i, l) {
                let a = psi
                    .coeff(i, k)
                    .to_i64()
                    .ok_or_else(|| Error::Budget("coefficient overflow".into()))?;
                let b = psi
                    .coeff(i, l)
                    .to_i64()
                    .ok_or_else(|| Error::Budget("coefficient overflow".into()))?;
                pairs.push((k + 1, l + 1, a, b));
            }
        }
    }
    if pairs.is_empty() {
        return invalid(format!("form {i} depends on fewer than two variables"));
    }
    let work: f64 = pairs
        .iter()
        .map(|&(k, l, _, _)| box_cost(sets[0].len(), sets[k].len(), sets[l].len()))
        .sum();
    if work > c.norm_work {
        return Err(Error::Budget(format!(
            "box-norm search needs {work:.3e} operations"
        )));
    }
    let mut candidates = Vec::with_capacity(pairs.len());
    for &(k, l, a, b) in &pairs {
        let (x1, x2, a1, b1) = box_args(&sets[k], &sets[l], a, b);
        let v = local_u2_fourth_twisted(f, &sets[0], 1, a1, b1, x1, x2)?;
        candidates.push((k, l, a, b, v));
    }
    let mut best = 0;
    for (j, cand) in candidates.iter().enumerate() {
        if cand.4 > candidates[best].4 {
            best = j;
        }
    }
    let (k, l, a, b, value) = candidates[best];
    let threshold = c.large_norm_fraction * eta.powi(4);
    if value < threshold {
        return Err(Error::Certification(format!(
            "no large twisted norm: best {value:e} at (k,l,a,b) = ({k},{l},{a},{b}) below {threshold:e}"
        )));
    }
    Ok(LargeNorm {
        k,
        l,
        a,
        b,
        value,
        threshold,
        candidates,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Untwist {
    pub step: i64,
    pub value: f64,
    pub premise: f64,
    pub kappa: f64,
    pub relaxations: u32,
    pub holds: bool,
}

/// E_{u₀∈B₀}‖f(u₀+ab·)‖⁴_{□(B̃₁×B̃₂)} against κ·premise, relaxing κ by halves.
#[allow(clippy::too_many_arguments)]
pub fn untwist(
    f: &CyclicFn,
    a: i64,
    b: i64,
    b0: &BohrSet,
    bt1: &BohrSet,
    bt2: &BohrSet,
    premise: f64,
    kappa: f64,
    max_relax: u32,
    norm_work: f64,
) -> Result<Untwist> {
    let (x0, y1, y2) = (b0.centred(), bt1.centred(), bt2.centred());
    let work = box_cost(x0.len(), y1.len(), y2.len());
    if work > norm_work {
        return Err(Error::Budget(format!(
            "untwisted norm needs {work:.3e} operations"
        )));
    }
    let step = a * b;
    let (x1, x2, _, _) = box_args(&y1, &y2, 1, 1);
    let value = local_u2_fourth_twisted(f, &x0, step, 1, 1, x1, x2)?;
    let mut k = kappa;
    let mut relaxations = 0;
    while value < k * premise && relaxations < max_relax {
        k /= 2.0;
        relaxations += 1;
    }
    Ok(Untwist {
        step,
        value,
        premise,
        kappa: k,
        relaxations,
        holds: value >= k * premise,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalInverse {
    pub u: i64,
    pub m: i64,
    pub frequency: Option<u64>,
    pub radius_scale: f64,
    pub b3: BohrSet,
    pub value: f64,
    pub threshold: f64,
    pub delta_floor: f64,
    pub tried: usize,
}

fn top_frequencies(spec: &crate::cyclic::Spectrum, k: usize) -> Vec<(f64, u64)> {
    let m = spec.m;
    let mut v: Vec<(f64, u64)> = (1..=m / 2)
        .map(|r| (spec.coeffs[r as usize].norm(), r))
        .collect();
    v.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
    v.truncate(k);
    v
}

fn fold(r: u64, m: u64) -> u64 {
    let r = r % m;
    r.min(m - r)
}

/// Does u + m·B₃ sit inside B₀ as a set of integers?
fn contained(u: i64, step: i64, b3: &[i64], b0: &BohrSet) -> bool {
    let half = b0.modulus() as i64 / 2;
    b3.iter().all(|&x| {
        let y = u + step * x;
        y.abs() <= half && b0.contains(y)
    })
}

/// Find u and a regular B₃ with E_{x∈B₃} f(u + m x) ≥ c′η¹², u + mB₃ ⊆ B₀.
#[allow(clippy::too_many_arguments)]
pub fn local_inverse_u2(
    f: &CyclicFn,
    b0: &BohrSet,
    b1: &BohrSet,
    step: i64,
    eta: f64,
    c: &IncrementConstants,
) -> Result<LocalInverse> {
    let m = f.m;
    let mi = m as i64;
    let host_mean: f64 = b0
        .elements()
        .iter()
        .map(|&x| f.values[x as usize])
        .sum::<f64>()
        / b0.len() as f64;
    if host_mean.abs() > 1e-9 {
        return invalid("f must have mean zero on B₀");
    }
    if step == 0 || step.rem_euclid(mi) == 0 {
        return invalid("step must be nonzero modulo M");
    }
    let x0 = b0.centred();
    // candidate frequencies in the variable of f(u + step·x)
    let mut freqs: Vec<u64> = Vec::new();
    let push = |r: u64, freqs: &mut Vec<u64>| {
        let r = fold(r, m);
        if r != 0 && !freqs.contains(&r) {
            freqs.push(r);
        }
    };
    for (_, r) in top_frequencies(&dft(f), c.top_frequencies) {
        push(
            (r as u128 * step.rem_euclid(mi) as u128 % m as u128) as u64,
            &mut freqs,
        );
    }
    let samples = c.translate_samples.max(1).min(x0.len());
    let b1c = b1.centred();
    let local: Vec<(f64, u64)> = (0..samples)
        .into_par_iter()
        .map(|j| {
            let u0 = x0[j * x0.len() / samples];
            let mut h = CyclicFn::zeros(m);
            for &x in &b1c {
                h.values[x.rem_euclid(mi) as usize] = f.at(u0 + step * x);
            }
            top_frequencies(&dft(&h), 1)
                .into_iter()
                .next()
                .unwrap_or((0.0, 0))
        })
        .collect();
    let mut local = local;
    local.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
    for (_, r) in local.into_iter().take(c.top_frequencies) {
        push(r, &mut freqs);
    }
    let mut options: Vec<Option<u64>> = vec![None];
    options.extend(freqs.into_iter().map(Some));

    let d1 = b1.dim().max(1);
    let delta_floor = (eta / d1 as f64).powf(c.radius_exponent) * b1.delta();
    let threshold = c.inverse_c * eta.powi(12);
    let mut tried = 0usize;
    let mut best: Option<LocalInverse> = None;
    for r in &options {
        for &s in &c.inverse_radii {
            let mut gamma = b1.gamma().to_vec();
            if let Some(r) = r {
                gamma.push(*r);
            }
            let (scale, b3) =
                BohrSet::new(m, &gamma, (s * b1.delta()).min(0.5))?.find_regular_dilate()?;
            tried += 1;
            if b3.dim() > b1.dim() + 1 || b3.delta() < delta_floor {
                continue;
            }
            let b3c = b3.centred();
            // Σ_{x∈B₃} f(u + step·x) for every u at once
            let mut g = CyclicFn::zeros(m);
            for &x in &b3c {
                g.values[(-step * x).rem_euclid(mi) as usize] = 1.0;
            }
            let corr = convolve(f, &g)?;
            let mut order: Vec<i64> = x0.clone();
            order.sort_by(|&p, &q| {
                let (vp, vq) = (
                    corr.values[p.rem_euclid(mi) as usize],
                    corr.values[q.rem_euclid(mi) as usize],
                );
                vq.partial_cmp(&vp).unwrap().then(p.cmp(&q))
            });
            let found = order
                .iter()
                .take(4096)
                .find(|&&u| contained(u, step, &b3c, b0));
            let Some(&u) = found else { continue };
            let value = b3c.iter().map(|&x| f.at(u + step * x)).sum::<f64>() / b3c.len() as f64;
            if best.as_ref().is_none_or(|bst| value > bst.value) {
                best = Some(LocalInverse {
                    u,
                    m: step,
                    frequency: *r,
                    radius_scale: s * scale,
                    b3,
                    value,
                    threshold,
                    delta_floor,
                    tried: 0,
                });
            }
        }
    }
    let mut out =
        best.ok_or_else(|| Error::Certification("no translate u + m·B₃ fits inside B₀".into()))?;
    out.tried = tried;
    certify_inverse(f, b0, b1, &out)?;
    Ok(out)
}

/// Re-evaluate every postcondition of a local-inverse witness.
pub fn certify_inverse(f: &CyclicFn, b0: &BohrSet, b1: &BohrSet, w: &LocalInverse) -> Result<()> {
    let b3c = w.b3.centred();
    let fail = |msg: String| Err(Error::Certification(msg));
    if !w.b3.is_regular() {
        return fail("B₃ is not regular".into());
    }
    if w.b3.dim() > b1.dim() + 1 {
        return fail(format!("dim B₃ = {} exceeds {}", w.b3.dim(), b1.dim() + 1));
    }
    if w.b3.delta() < w.delta_floor {
        return fail(format!(
            "radius {} below floor {}",
            w.b3.delta(),
            w.delta_floor
        ));
    }
    if !contained(w.u, w.m, &b3c, b0) {
        return fail("u + m·B₃ is not contained in B₀".into());
    }
    let value = b3c.iter().map(|&x| f.at(w.u + w.m * x)).sum::<f64>() / b3c.len() as f64;
    if (value - w.value).abs() > 1e-12 {
        return fail("recorded average does not match".into());
    }
    if value < w.threshold {
        return fail(format!("E_(u+mB3) f = {value:e} below {:e}", w.threshold));
    }
    Ok(())
}

/// Current position of the iteration.
#[derive(Clone, Debug)]
pub struct IncrementState {
    pub step: usize,
    pub bohr: BohrSet,
    /// centred representatives
    pub set: Vec<i64>,
    pub alpha: f64,
    /// A_i = {x ∈ B^{(i)} : u + m x ∈ A}
    pub u: i128,
    pub m: i128,
}

impl IncrementState {
    pub fn dim(&self) -> usize {
        self.bohr.dim()
    }

    pub fn delta(&self) -> f64 {
        self.bohr.delta()
    }

    /// Every u + m·x (x ∈ A_i) lies in the original set.
    pub fn maps_into(&self, original: &HashSet<i64>) -> bool {
        self.set.iter().all(|&x| {
            i64::try_from(self.u + self.m * x as i128)
                .map(|y| original.contains(&y))
                .unwrap_or(false)
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub alpha: f64,
    pub dim: usize,
    pub delta: f64,
    pub size: usize,
    pub rho: f64,
    pub chain_sizes: Vec<usize>,
    pub t_b: f64,
    pub main: f64,
    pub case: Case,
    pub norm: Option<LargeNorm>,
    pub untwist: Option<Untwist>,
    pub inverse: Option<LocalInverse>,
    pub next_alpha: Option<f64>,
    pub u: String,
    pub m: String,
    pub checks: Option<StepChecks>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StepChecks {
    pub increment: bool,
    pub dimension: bool,
    pub radius: bool,
    pub nested: bool,
    pub maps_into_a: bool,
}

impl StepChecks {
    pub fn all(&self) -> bool {
        self.increment && self.dimension && self.radius && self.nested && self.maps_into_a
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub step: usize,
    pub chain_count: u64,
    pub fiber: u64,
    /// lower bound on #{y ∈ A^t : Vy = 0}
    pub certified_bound: u64,
    pub formula_bound: f64,
    pub formula_exponent: f64,
    pub exact: Option<u64>,
    pub consistent: Option<bool>,
    pub degenerate: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IncrementReport {
    pub t: usize,
    pub rank: usize,
    pub q: usize,
    pub n: i64,
    pub modulus: u64,
    pub free_columns: usize,
    pub alpha0: f64,
    pub step_limit: f64,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
}

fn chain_for(b: &BohrSet, len: usize, t: usize, c: &IncrementConstants) -> Result<BohrChain> {
    let mut rho = c.chain_ratio;
    loop {
        let chain = BohrChain::geometric(b, rho, len)?;
        if expansion_work(&chain, t) <= c.chain_work {
            return Ok(chain);
        }
        rho /= 2.0;
        if rho < c.chain_ratio_floor {
            return Err(Error::Budget(
                "no chain fits the work budget above the ratio floor".into(),
            ));
        }
    }
}

/// #(ker φ ∩ ∏[−2W_j, 2W_j]) with W_j = max |B_j|.
fn fiber_bound(phi: &LinearSystem, chain: &BohrChain, budget: u64) -> Result<u64> {
    let ker = integer_kernel(&phi.linear_part().row_vecs(), phi.d());
    if ker.is_empty() {
        return Ok(1);
    }
    let lat = Lattice::from_generators(&ker, phi.d())?;
    let doms: Vec<Domain> = chain
        .sets()
        .iter()
        .map(|b| {
            let w = b.centred().iter().map(|x| x.abs()).max().unwrap_or(0);
            Domain::interval(-2 * w, 2 * w)
        })
        .collect();
    match lat.count(&doms, budget) {
        Err(Error::Budget(_)) => Ok(lat.count_upper_bound(&doms)),
        r => r,
    }
}

/// Iterate until the current set has many patterns, then certify a solution-count bound.
pub fn run_increment(
    v: &IntMatrix,
    a: &[i64],
    n: i64,
    c: &IncrementConstants,
) -> Result<IncrementReport> {
    if n < 1 {
        return invalid("N must be positive");
    }
    if !v.is_translation_invariant() {
        return invalid("matrix is not translation-invariant");
    }
    let mut set: Vec<i64> = a.to_vec();
    set.sort_unstable();
    set.dedup();
    if let Some(&x) = set.iter().find(|x| x.abs() > n) {
        return invalid(format!("{x} lies outside [−N, N]"));
    }
    let keep: Vec<usize> = (0..v.cols())
        .filter(|&j| v.column(j).iter().any(|x| !x.is_zero()))
        .collect();
    let free = v.cols() - keep.len();
    let rows: Vec<Vec<_>> = (0..v.rows())
        .map(|i| keep.iter().map(|&j| v.get(i, j).clone()).collect())
        .collect();
    let reduced = IntMatrix::from_rows(rows)?;
    let t = reduced.cols();
    let rank = reduced.rank();
    let free_factor = (set.len() as u64)
        .checked_pow(free as u32)
        .ok_or_else(|| Error::Budget("free-column factor overflows".into()))?;
    let alpha0 = set.len() as f64 / (2 * n + 1) as f64;
    let step_limit =
        (c.step_budget * alpha0.powf(-(12.0 * t as f64) + 1.0)).min(c.max_steps as f64);

    let trivial = |exact: u64, degenerate: bool| IncrementReport {
        t,
        rank,
        q: 0,
        n,
        modulus: 0,
        free_columns: free,
        alpha0,
        step_limit,
        steps: vec![],
        outcome: Outcome {
            step: 0,
            chain_count: exact,
            fiber: 1,
            certified_bound: exact * free_factor,
            formula_bound: 0.0,
            formula_exponent: 0.0,
            exact: Some(exact * free_factor),
            consistent: Some(true),
            degenerate,
        },
    };
    if set.is_empty() {
        return Ok(trivial(0, true));
    }
    if t < 3 {
        let exact = count_solutions(&reduced, &set, c.oracle_budget)?
            .exact
            .unwrap_or(0);
        return Ok(trivial(exact, false));
    }

    let (psi, phi) = kernel_parametrization(&reduced, 1)?;
    let q = psi.d();
    let norm = (0..phi.t())
        .map(|i| {
            phi.form(i)
                .iter()
                .map(|x| x.to_i64().unwrap_or(i64::MAX).abs())
                .sum::<i64>()
        })
        .max()
        .unwrap_or(1);
    let m = next_prime((2 * norm * n + 1) as u64);
    let mi = m as i64;
    let b0 = BohrSet::new(m, &[1], (n as f64 + 0.5) / m as f64)?;
    if b0.len() as i64 != 2 * n + 1 || !b0.is_regular() {
        return Err(Error::Certification(
            "B⁽⁰⁾ is not the regular interval [−N, N]".into(),
        ));
    }
    let original: HashSet<i64> = set.iter().copied().collect();
    let mut state = IncrementState {
        step: 0,
        bohr: b0,
        set,
        alpha: alpha0,
        u: 0,
        m: 1,
    };
    let mut steps = Vec::new();

    loop {
        if state.step as f64 >= step_limit {
            return Err(Error::Budget(format!("step budget {step_limit} exhausted")));
        }
        // refine the chain until the main term keeps its share
        let mut chain = chain_for(&state.bohr, q + 1, t, c)?;
        let mut exp = multilinear_expand(&state.set, &chain, &phi, c.many_patterns_fraction)?;
        while matches!(exp.case, Case::Two { .. })
            && exp.main < c.main_term_floor * state.alpha.powi(t as i32)
        {
            let rho = chain.rhos().first().copied().unwrap_or(c.chain_ratio) / 2.0;
            if rho < c.chain_ratio_floor {
                return Err(Error::Certification(
                    "main term stays below its floor at every chain ratio".into(),
                ));
            }
            chain = BohrChain::geometric(&state.bohr, rho, q + 1)?;
            exp = multilinear_expand(&state.set, &chain, &phi, c.many_patterns_fraction)?;
        }
        let rho = chain.rhos().first().copied().unwrap_or(1.0);
        let mut rec = StepRecord {
            step: state.step,
            alpha: state.alpha,
            dim: state.dim(),
            delta: state.delta(),
            size: state.bohr.len(),
            rho,
            chain_sizes: chain.sets().iter().map(|b| b.len()).collect(),
            t_b: exp.t_full,
            main: exp.main,
            case: exp.case.clone(),
            norm: None,
            untwist: None,
            inverse: None,
            next_alpha: None,
            u: state.u.to_string(),
            m: state.m.to_string(),
            checks: None,
        };
        match exp.case {
            Case::One { count, degenerate } => {
                let fiber = fiber_bound(&phi, &chain, c.oracle_budget)?;
                let bound = count.div_ceil(fiber) * free_factor;
                let exponent = c.case1_exponent * state.dim() as f64;
                let formula_bound = (state.alpha * state.delta() / state.dim() as f64)
                    .powf(exponent)
                    * (n as f64).powi((t - rank) as i32)
                    * free_factor as f64;
                let exact = count_solutions(
                    v,
                    &original.iter().copied().collect::<Vec<_>>(),
                    c.oracle_budget,
                )
                .ok()
                .and_then(|r| r.exact);
                let consistent = exact.map(|e| bound <= e);
                if consistent == Some(false) {
                    return Err(Error::Certification(format!(
                        "certified bound {bound} exceeds the exact count"
                    )));
                }
                steps.push(rec);
                return Ok(IncrementReport {
                    t,
                    rank,
                    q,
                    n,
                    modulus: m,
                    free_columns: free,
                    alpha0,
                    step_limit,
                    steps,
                    outcome: Outcome {
                        step: state.step,
                        chain_count: count,
                        fiber,
                        certified_bound: bound,
                        formula_bound,
                        formula_exponent: exponent,
                        exact,
                        consistent,
                        degenerate,
                    },
                });
            }
            Case::Two { index, eta, .. } => {
                let bal = BalancedFn::new(&state.set, &state.bohr)?;
                let norm = locate_large_norm(&bal.f, &chain, &psi, index, eta, c)?;
                let sets = chain.sets();
                let bt1 = sets[norm.k].dilate(rho)?.find_regular_dilate()?.1;
                let bt2 = sets[norm.l].dilate(rho)?.find_regular_dilate()?.1;
                let un = untwist(
                    &bal.f,
                    norm.a,
                    norm.b,
                    &sets[0],
                    &bt1,
                    &bt2,
                    norm.value,
                    c.untwist_kappa,
                    c.kappa_relaxations,
                    c.norm_work,
                )?;
                if !un.holds {
                    return Err(Error::Certification(format!(
                        "untwisted norm {:e} below κ·premise after {} relaxations",
                        un.value, un.relaxations
                    )));
                }
                let step = (norm.a * norm.b).abs();
                let inv = local_inverse_u2(&bal.f, &sets[0], &bt1, step, eta, c)?;
                // pass to A_{i+1} = {x ∈ B₃ : u + m x ∈ A_i}
                let current: HashSet<i64> = state.set.iter().copied().collect();
                let b3 = inv.b3.clone();
                let next: Vec<i64> = b3
                    .centred()
                    .into_iter()
                    .filter(|&x| current.contains(&(inv.u + inv.m * x)))
                    .collect();
                let next_alpha = next.len() as f64 / b3.len() as f64;
                if (next_alpha - state.alpha - inv.value).abs() > 1e-9 {
                    return Err(Error::Certification(
                        "density gain disagrees with the local average".into(),
                    ));
                }
                let checks = StepChecks {
                    increment: next_alpha
                        >= (1.0 + c.increment_c * state.alpha.powf(12.0 * t as f64 - 1.0))
                            * state.alpha,
                    dimension: b3.dim() <= state.dim() + 1,
                    radius: b3.delta()
                        >= (state.alpha / state.dim() as f64).powf(c.radius_exponent)
                            * state.delta()
                            - 1e-15,
                    nested: contained(inv.u, inv.m, &b3.centred(), &state.bohr),
                    maps_into_a: true,
                };
                let new_state = IncrementState {
                    step: state.step + 1,
                    bohr: b3,
                    set: next,
                    alpha: next_alpha,
                    u: state.u + state.m * inv.u as i128,
                    m: state.m * inv.m as i128,
                };
                let checks = StepChecks {
                    maps_into_a: new_state.maps_into(&original),
                    ..checks
                };
                let ok = checks.all();
                rec.norm = Some(norm);
                rec.untwist = Some(un);
                rec.inverse = Some(inv);
                rec.next_alpha = Some(next_alpha);
                rec.checks = Some(checks);
                steps.push(rec);
                if !ok {
                    let last = serde_json::to_string(steps.last().unwrap()).unwrap_or_default();
                    return Err(Error::Certification(format!(
                        "step invariants failed: {last}"
                    )));
                }
                if new_state.m.abs() >= mi as i128 {
                    return Err(Error::Budget(
                        "accumulated scale exceeds the modulus".into(),
                    ));
                }
                state = new_state;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::increment::Constants;
    use crate::linsys::systems;
    use crate::patterns::{count_solutions_brute, t_bohr, TBohrOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: i64, rho: f64) -> (LinearSystem, LinearSystem, BohrChain) {
        let (psi, phi) = kernel_parametrization(&systems::three_ap_matrix(), 1).unwrap();
        let m = next_prime((2 * 6 * n + 1) as u64);
        let b0 = BohrSet::new(m, &[1], (n as f64 + 0.5) / m as f64).unwrap();
        let chain = BohrChain::geometric(&b0, rho, psi.d() + 1).unwrap();
        (psi, phi, chain)
    }

    #[test]
    fn expansion_matches_t_bohr() {
        let (_, phi, chain) = setup(40, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<i64> = (-40..=40).filter(|_| rng.gen_bool(0.5)).collect();
        let e = multilinear_expand(&a, &chain, &phi, 0.25).unwrap();
        let m = chain.modulus();
        let ind = CyclicFn::indicator(
            m,
            &a.iter()
                .map(|x| x.rem_euclid(m as i64) as u64)
                .collect::<Vec<_>>(),
        );
        let tb = t_bohr(&phi, &chain, &vec![ind; 3], &TBohrOptions::default()).unwrap();
        assert!((tb.value - e.t_full).abs() < 1e-12);
        assert!(e.identity_error < 1e-12);
    }

    #[test]
    fn full_and_empty_sets() {
        let (_, phi, chain) = setup(30, 0.25);
        let all: Vec<i64> = (-30..=30).collect();
        let e = multilinear_expand(&all, &chain, &phi, 0.25).unwrap();
        assert!(matches!(
            e.case,
            Case::One {
                degenerate: false,
                ..
            }
        ));
        // patterns near the edge of B₀ leave it, so T_B(1_{B₀}) < 1
        assert!(e.t_full > 0.5 && e.t_full <= 1.0);
        let e = multilinear_expand(&[], &chain, &phi, 0.25).unwrap();
        assert!(matches!(
            e.case,
            Case::One {
                count: 0,
                degenerate: true
            }
        ));
    }

    #[test]
    fn case_two_pigeonhole() {
        let (_, phi, chain) = setup(60, 0.25);
        let a: Vec<i64> = (-60..=60).filter(|x| x % 3 != 0).collect();
        let e = multilinear_expand(&a, &chain, &phi, 0.9).unwrap();
        match e.case {
            Case::Two {
                eta,
                certified,
                index,
                mask,
                ..
            } => {
                assert!(eta >= certified && certified > 0.0);
                assert_eq!(index, mask.trailing_zeros() as usize);
            }
            c => panic!("expected case 2, got {c:?}"),
        }
    }

    #[test]
    fn untwist_identity_when_a_b_one() {
        let m = 101;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = CyclicFn::from_fn(m, |_| rng.gen_range(-1.0..1.0));
        let b0 = BohrSet::new(m, &[1], 0.1).unwrap();
        let b1 = BohrSet::new(m, &[1], 0.05).unwrap();
        let direct =
            local_u2_fourth_twisted(&f, &b0.centred(), 1, 1, 1, &b1.centred(), &b1.centred())
                .unwrap();
        let u = untwist(&f, 1, 1, &b0, &b1, &b1, direct, 0.5, 0, 1e12).unwrap();
        assert!((u.value - direct).abs() < 1e-12 && u.holds);
    }

    #[test]
    fn inverse_finds_character() {
        // f = cos(2π·7x/M) − its mean on B₀: the local average along a suitable B₃ is large
        let m = 401;
        let b0 = BohrSet::new(m, &[1], 0.2).unwrap();
        let b1 = b0.dilate(0.25).unwrap().find_regular_dilate().unwrap().1;
        let set: Vec<i64> = b0
            .centred()
            .into_iter()
            .filter(|&x| (x.rem_euclid(5)) == 0)
            .collect();
        let bal = BalancedFn::new(&set, &b0).unwrap();
        let c = Constants::default().increment;
        let inv = local_inverse_u2(&bal.f, &b0, &b1, 1, 0.1, &c).unwrap();
        certify_inverse(&bal.f, &b0, &b1, &inv).unwrap();
        assert!(inv.value > 0.5, "{}", inv.value);
        assert!(inv.b3.dim() <= b1.dim() + 1);
    }

    #[test]
    fn random_half_density_case_one() {
        let n = 120;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: Vec<i64> = (-n..=n).filter(|_| rng.gen_bool(0.5)).collect();
        let c = Constants::default().increment;
        let r = run_increment(&systems::three_ap_matrix(), &a, n, &c).unwrap();
        let exact = count_solutions_brute(&systems::three_ap_matrix(), &a, false).unwrap();
        assert_eq!(r.outcome.exact, Some(exact));
        assert!(r.outcome.certified_bound <= exact && r.outcome.certified_bound > 0);
    }

    #[test]
    fn planted_residue_class_increments() {
        let n = 150;
        let a: Vec<i64> = (-n..=n).filter(|x: &i64| x.rem_euclid(3) != 0).collect();
        let mut c = Constants::default().increment;
        c.many_patterns_fraction = 0.9;
        let r = run_increment(&systems::three_ap_matrix(), &a, n, &c).unwrap();
        assert!(
            r.steps.len() >= 2,
            "{}",
            serde_json::to_string_pretty(&r.steps).unwrap()
        );
        for s in &r.steps[..r.steps.len() - 1] {
            assert!(s.checks.as_ref().unwrap().all());
            assert!(s.next_alpha.unwrap() > s.alpha);
        }
        let exact = r.outcome.exact.unwrap();
        assert!(r.outcome.certified_bound <= exact);
    }

    #[test]
    fn degenerate_inputs() {
        let c = Constants::default().increment;
        let r = run_increment(&systems::three_ap_matrix(), &[], 10, &c).unwrap();
        assert!(r.outcome.degenerate && r.outcome.certified_bound == 0);
        // a zero column contributes a free factor |A|
        let v = IntMatrix::from_i64(&[vec![1, -2, 0, 1]]);
        let a: Vec<i64> = (-10..=10).collect();
        let r = run_increment(&v, &a, 10, &c).unwrap();
        assert_eq!(r.free_columns, 1);
        let exact = count_solutions_brute(&v, &a, false).unwrap();
        assert!(r.outcome.certified_bound <= exact);
        // two columns: exact count
        let r = run_increment(&IntMatrix::from_i64(&[vec![1, -1]]), &a, 10, &c).unwrap();
        assert_eq!(r.outcome.certified_bound, 21);
    }
}

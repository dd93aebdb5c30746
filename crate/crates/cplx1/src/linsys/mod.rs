//! Translation-invariant systems: complexity, normal forms, kernel
//! parametrizations, norms and transfer between Z and Z_M.

pub mod lattice;
pub mod matrix;
mod normal;
pub mod text;

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{invalid, Error, Result};
pub use lattice::{Domain, Lattice};
pub use matrix::{
    hnf, integer_kernel, nullspace_mod, rank_mod, rank_q, rref_mod, same_lattice, IntMatrix,
};
pub use normal::normal_extension;

/// Where a system of forms lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Ambient {
    Integers,
    Cyclic(u64),
}

/// Affine system ψ(x) = ψ̇x + ψ(0) with t forms in d variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LinearSystem {
    linear: IntMatrix,
    constants: Vec<String>,
    #[serde(skip)]
    consts: Vec<BigInt>,
    ambient: Ambient,
}

impl LinearSystem {
    pub fn new(linear: IntMatrix, consts: Vec<BigInt>, ambient: Ambient) -> Result<Self> {
        if consts.len() != linear.rows() {
            return invalid("constants length differs from number of forms");
        }
        if let Ambient::Cyclic(m) = ambient {
            if m < 2 {
                return invalid("modulus must be at least 2");
            }
        }
        let constants = consts.iter().map(|c| c.to_string()).collect();
        Ok(LinearSystem {
            linear,
            constants,
            consts,
            ambient,
        })
    }

    pub fn linear(linear: IntMatrix) -> Self {
        let t = linear.rows();
        Self::new(linear, vec![BigInt::zero(); t], Ambient::Integers).unwrap()
    }

    pub fn from_i64(rows: &[Vec<i64>]) -> Self {
        Self::linear(IntMatrix::from_i64(rows))
    }

    /// Number of forms.
    pub fn t(&self) -> usize {
        self.linear.rows()
    }
    /// Number of variables.
    pub fn d(&self) -> usize {
        self.linear.cols()
    }
    pub fn ambient(&self) -> Ambient {
        self.ambient
    }
    pub fn linear_part(&self) -> &IntMatrix {
        &self.linear
    }
    pub fn constants(&self) -> &[BigInt] {
        &self.consts
    }
    pub fn coeff(&self, i: usize, j: usize) -> &BigInt {
        self.linear.get(i, j)
    }
    pub fn form(&self, i: usize) -> &[BigInt] {
        self.linear.row(i)
    }
    pub fn is_linear(&self) -> bool {
        self.consts.iter().all(|c| self.is_zero_coeff(c))
    }

    fn is_zero_coeff(&self, c: &BigInt) -> bool {
        match self.ambient {
            Ambient::Integers => c.is_zero(),
            Ambient::Cyclic(m) => c.mod_floor(&BigInt::from(m)).is_zero(),
        }
    }

    /// Does form i depend on variable k?
    pub fn depends(&self, i: usize, k: usize) -> bool {
        !self.is_zero_coeff(self.coeff(i, k))
    }

    /// Ξ_i: the non-zero coefficients of form i.
    pub fn coefficient_set(&self, i: usize) -> Vec<BigInt> {
        let mut v: Vec<BigInt> = self
            .form(i)
            .iter()
            .filter(|c| !self.is_zero_coeff(c))
            .cloned()
            .collect();
        v.sort();
        v.dedup();
        v
    }

    /// Evaluate every form at an integer point (reduced mod M when cyclic).
    pub fn eval_i64(&self, x: &[i64]) -> Vec<i64> {
        let rows = self.linear.to_i64_rows().expect("coefficients fit i64");
        let consts: Vec<i64> = self
            .consts
            .iter()
            .map(|c| c.to_i64().expect("fits"))
            .collect();
        rows.iter()
            .zip(consts)
            .map(|(r, b)| {
                let v: i64 = r.iter().zip(x).map(|(a, x)| a * x).sum::<i64>() + b;
                match self.ambient {
                    Ambient::Integers => v,
                    Ambient::Cyclic(m) => v.rem_euclid(m as i64),
                }
            })
            .collect()
    }

    /// Rows as i64 (linear part).
    pub fn rows_i64(&self) -> Result<Vec<Vec<i64>>> {
        self.linear.to_i64_rows()
    }

    fn rank_of(&self, rows: &[Vec<BigInt>]) -> usize {
        match self.ambient {
            Ambient::Integers => rank_q(rows),
            Ambient::Cyclic(m) => rank_mod(rows, m),
        }
    }

    /// Is form i in the span of the forms listed in `block`?
    fn in_span(&self, i: usize, block: &[usize]) -> bool {
        let rows: Vec<Vec<BigInt>> = block.iter().map(|&j| self.form(j).to_vec()).collect();
        let mut with = rows.clone();
        with.push(self.form(i).to_vec());
        self.rank_of(&with) == self.rank_of(&rows)
    }

    /// Cauchy–Schwarz complexity at i (constants ignored).
    pub fn complexity_at(&self, i: usize) -> Complexity {
        self.complexity_witness(i).0
    }

    /// Complexity at i together with a minimal partition of [t]\{i}.
    pub fn complexity_witness(&self, i: usize) -> (Complexity, Option<Partition>) {
        let t = self.t();
        assert!(i < t, "index out of range");
        if t == 1 {
            return (
                Complexity::Finite(0),
                Some(Partition {
                    excluded: i,
                    blocks: vec![],
                }),
            );
        }
        let base: Vec<usize> = (0..t).filter(|&j| j != i).collect();
        min_good_partition(i, &base, |block| !self.in_span(i, block))
    }

    /// Maximum complexity over all positions.
    pub fn complexity(&self) -> Complexity {
        (0..self.t())
            .map(|i| self.complexity_at(i))
            .max()
            .unwrap_or(Complexity::Finite(0))
    }

    /// No two distinct forms are proportional (over the ambient field).
    pub fn has_finite_complexity(&self) -> bool {
        let t = self.t();
        for i in 0..t {
            if self.rank_of(&[self.form(i).to_vec()]) == 0 && t > 1 {
                return false;
            }
            for j in i + 1..t {
                if self.rank_of(&[self.form(i).to_vec(), self.form(j).to_vec()]) < 2 {
                    return false;
                }
            }
        }
        true
    }

    /// Lexicographically first J ⊂ [d], |J| = s+1, witnessing exact s-normal form at i.
    pub fn exact_normal_witness(&self, i: usize, s: usize) -> Option<Vec<usize>> {
        let d = self.d();
        let k = s + 1;
        if k > d {
            return None;
        }
        let mut comb: Vec<usize> = (0..k).collect();
        loop {
            if comb.iter().all(|&c| self.depends(i, c))
                && (0..self.t())
                    .filter(|&j| j != i)
                    .all(|j| !comb.iter().all(|&c| self.depends(j, c)))
            {
                return Some(comb);
            }
            // next combination
            let mut p = k;
            loop {
                if p == 0 {
                    return None;
                }
                p -= 1;
                if comb[p] < d - k + p {
                    comb[p] += 1;
                    for q in p + 1..k {
                        comb[q] = comb[q - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    pub fn is_exact_normal_at(&self, i: usize, s: usize) -> bool {
        self.exact_normal_witness(i, s).is_some()
    }

    /// Exact s_i-normal at every i with s_i ≤ s; returns the s_i and witnesses.
    pub fn normal_profile(&self, s: usize) -> Option<Vec<(usize, Vec<usize>)>> {
        (0..self.t())
            .map(|i| (0..=s).find_map(|si| self.exact_normal_witness(i, si).map(|j| (si, j))))
            .collect()
    }

    pub fn is_normal(&self, s: usize) -> bool {
        self.normal_profile(s).is_some()
    }

    /// ‖ψ‖_M over Z (constants weighted by 1/M, M = 1 if absent) or the toral norm over Z_M.
    pub fn norm(&self, m: Option<u64>) -> BigRational {
        match self.ambient {
            Ambient::Integers => {
                let lin: BigInt = self.linear.l1_norm();
                let den = BigInt::from(m.unwrap_or(1));
                let c: BigInt = self.consts.iter().map(|b| b.abs()).sum();
                BigRational::from_integer(lin) + BigRational::new(c, den)
            }
            Ambient::Cyclic(md) => {
                let mb = BigInt::from(md);
                let dist = |a: &BigInt| {
                    let r = a.mod_floor(&mb);
                    std::cmp::min(r.clone(), &mb - r)
                };
                let lin: BigInt = (0..self.t())
                    .flat_map(|i| self.form(i).iter().map(dist).collect::<Vec<_>>())
                    .sum();
                let c: BigInt = self.consts.iter().map(dist).sum();
                BigRational::from_integer(lin) + BigRational::new(c, mb)
            }
        }
    }

    /// ‖ψ̇‖ (linear part only, toral when cyclic).
    pub fn linear_norm(&self) -> BigInt {
        let lin = LinearSystem::new(
            self.linear.clone(),
            vec![BigInt::zero(); self.t()],
            self.ambient,
        )
        .unwrap();
        lin.norm(None).to_integer()
    }

    /// The system with a leading shift variable: φ(x₀,x) = x₀·1 + ψ(x).
    pub fn with_shift(&self) -> LinearSystem {
        let mut rows = Vec::with_capacity(self.t());
        for i in 0..self.t() {
            let mut r = vec![BigInt::one()];
            r.extend(self.form(i).iter().cloned());
            rows.push(r);
        }
        let m = if rows.is_empty() {
            IntMatrix::empty(self.d() + 1)
        } else {
            IntMatrix::from_rows(rows).unwrap()
        };
        LinearSystem::new(m, self.consts.clone(), self.ambient).unwrap()
    }

    /// Generators of the image lattice (the columns of ψ̇).
    pub fn image_generators(&self) -> Vec<Vec<BigInt>> {
        (0..self.d()).map(|j| self.linear.column(j)).collect()
    }

    /// Restrict to a subset of variables (in the given order).
    pub fn select_variables(&self, vars: &[usize]) -> LinearSystem {
        let rows: Vec<Vec<BigInt>> = (0..self.t())
            .map(|i| vars.iter().map(|&k| self.coeff(i, k).clone()).collect())
            .collect();
        let m = if rows.is_empty() {
            IntMatrix::empty(vars.len())
        } else {
            IntMatrix::from_rows(rows).unwrap()
        };
        LinearSystem::new(m, self.consts.clone(), self.ambient).unwrap()
    }

    /// Coefficients and constants reduced mod m, with no size condition.
    pub fn modulo(&self, m: u64) -> Result<LinearSystem> {
        let mb = BigInt::from(m);
        let rows: Vec<Vec<BigInt>> = (0..self.t())
            .map(|i| self.form(i).iter().map(|a| a.mod_floor(&mb)).collect())
            .collect();
        let lin = if rows.is_empty() {
            IntMatrix::empty(self.d())
        } else {
            IntMatrix::from_rows(rows)?
        };
        let consts = self.consts.iter().map(|b| b.mod_floor(&mb)).collect();
        LinearSystem::new(lin, consts, Ambient::Cyclic(m))
    }
}

impl fmt::Display for LinearSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.t() {
            let mut terms = Vec::new();
            for k in 0..self.d() {
                let a = self.coeff(i, k);
                if !a.is_zero() {
                    terms.push(if a.is_one() {
                        format!("x{}", k + 1)
                    } else {
                        format!("{}*x{}", a, k + 1)
                    });
                }
            }
            if !self.consts[i].is_zero() {
                terms.push(self.consts[i].to_string());
            }
            if terms.is_empty() {
                terms.push("0".into());
            }
            writeln!(f, "psi{} = {}", i + 1, terms.join(" + "))?;
        }
        Ok(())
    }
}

/// Complexity value: a non-negative integer or infinity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Complexity {
    Finite(usize),
    Infinite,
}

impl Complexity {
    pub fn is_finite(&self) -> bool {
        matches!(self, Complexity::Finite(_))
    }
}

impl Serialize for Complexity {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Complexity::Finite(k) => s.serialize_u64(*k as u64),
            Complexity::Infinite => s.serialize_str("infinite"),
        }
    }
}

/// A partition of [t]\{excluded} (0-based indices).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub excluded: usize,
    pub blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn is_valid(&self, t: usize) -> bool {
        let mut seen = vec![false; t];
        for b in &self.blocks {
            if b.is_empty() {
                return false;
            }
            for &j in b {
                if j >= t || j == self.excluded || seen[j] {
                    return false;
                }
                seen[j] = true;
            }
        }
        (0..t).all(|j| j == self.excluded || seen[j])
    }
}

/// Minimal partition of `base` into blocks accepted by `good` (downward closed).
fn min_good_partition<F: Fn(&[usize]) -> bool>(
    excluded: usize,
    base: &[usize],
    good: F,
) -> (Complexity, Option<Partition>) {
    let m = base.len();
    let full = (1usize << m) - 1;
    let members = |mask: usize| -> Vec<usize> {
        (0..m)
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| base[b])
            .collect()
    };
    let mut ok = vec![false; full + 1];
    for mask in 1..=full {
        ok[mask] = good(&members(mask));
    }
    const INF: usize = usize::MAX;
    let mut dp = vec![INF; full + 1];
    let mut choice = vec![0usize; full + 1];
    dp[0] = 0;
    for mask in 1..=full {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        // enumerate submasks of rest, each joined with low
        let mut sub = rest;
        loop {
            let blk = sub | low;
            if ok[blk] && dp[mask ^ blk] != INF && dp[mask ^ blk] + 1 < dp[mask] {
                dp[mask] = dp[mask ^ blk] + 1;
                choice[mask] = blk;
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    if dp[full] == INF {
        return (Complexity::Infinite, None);
    }
    let mut blocks = Vec::new();
    let mut cur = full;
    while cur != 0 {
        blocks.push(members(choice[cur]));
        cur ^= choice[cur];
    }
    blocks.sort();
    (
        Complexity::Finite(dp[full] - 1),
        Some(Partition { excluded, blocks }),
    )
}

pub fn is_translation_invariant(v: &IntMatrix) -> bool {
    v.is_translation_invariant()
}

/// Complexity at i via (e_i + span{e_j : j ∈ X}) ∩ rowspace(V) = ∅.
pub fn matrix_complexity_witness(v: &IntMatrix, i: usize) -> (Complexity, Option<Partition>) {
    let t = v.cols();
    assert!(i < t);
    if t == 1 {
        return (
            Complexity::Finite(0),
            Some(Partition {
                excluded: i,
                blocks: vec![],
            }),
        );
    }
    let base: Vec<usize> = (0..t).filter(|&j| j != i).collect();
    let unit = |k: usize| -> Vec<BigInt> {
        (0..t)
            .map(|c| {
                if c == k {
                    BigInt::one()
                } else {
                    BigInt::zero()
                }
            })
            .collect()
    };
    let good = |block: &[usize]| {
        let mut rows = v.row_vecs();
        rows.extend(block.iter().map(|&j| unit(j)));
        let r0 = rank_q(&rows);
        rows.push(unit(i));
        rank_q(&rows) > r0
    };
    min_good_partition(i, &base, good)
}

pub fn matrix_complexity_at(v: &IntMatrix, i: usize) -> Complexity {
    matrix_complexity_witness(v, i).0
}

pub fn matrix_complexity(v: &IntMatrix) -> Complexity {
    (0..v.cols())
        .map(|i| matrix_complexity_at(v, i))
        .max()
        .unwrap_or(Complexity::Finite(0))
}

fn check_parametrizable(v: &IntMatrix) -> Result<usize> {
    if !v.is_translation_invariant() {
        return invalid("matrix is not translation-invariant");
    }
    let r = v.rank();
    if r == 0 {
        return invalid("matrix has rank 0");
    }
    if r < v.rows() {
        return invalid(format!(
            "matrix rows are dependent (rank {r} < {} rows)",
            v.rows()
        ));
    }
    Ok(r)
}

/// Surjective parametrization of Z^t ∩ Ker(V) by a size-reduced kernel basis (no normal form).
pub fn kernel_basis_system(v: &IntMatrix) -> Result<LinearSystem> {
    check_parametrizable(v)?;
    let t = v.cols();
    let basis = integer_kernel(&v.row_vecs(), t);
    let k = basis.len();
    let rows: Vec<Vec<BigInt>> = (0..t)
        .map(|i| (0..k).map(|j| basis[j][i].clone()).collect())
        .collect();
    Ok(LinearSystem::linear(IntMatrix::from_rows(rows)?))
}

/// Kernel parametrization in s-normal form: returns (ψ, φ) with φ(x₀,x) = x₀·1 + ψ(x).
pub fn kernel_parametrization(v: &IntMatrix, s: usize) -> Result<(LinearSystem, LinearSystem)> {
    let psi0 = kernel_basis_system(v)?;
    match psi0.complexity() {
        Complexity::Finite(c) if c <= s => {}
        c => return invalid(format!("complexity {c:?} exceeds {s}")),
    }
    let psi = normal_extension(&psi0, s)?;
    // verification
    let prod = v.mul(psi.linear_part())?;
    if !prod.is_zero() {
        return Err(Error::Certification("V·ψ ≠ 0".into()));
    }
    if !same_lattice(&psi.image_generators(), &psi0.image_generators()) {
        return Err(Error::Certification(
            "parametrization is not surjective".into(),
        ));
    }
    if !psi.is_normal(s) {
        return Err(Error::Certification(
            "parametrization is not in normal form".into(),
        ));
    }
    let phi = psi.with_shift();
    Ok((psi, phi))
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |a, k| a * BigInt::from(k))
}

/// max(t!·‖ψ‖^t, r!·‖V‖^r).
pub fn reduction_threshold(psi: &LinearSystem, v: &IntMatrix) -> BigInt {
    let t = psi.t();
    let r = v.rank();
    let a = factorial(t) * num_traits::pow(psi.linear_norm(), t);
    let b = factorial(r) * num_traits::pow(v.l1_norm(), r);
    a.max(b)
}

/// Transfer ψ to Z_M. M must be a prime above the threshold.
pub fn reduce_mod(psi: &LinearSystem, v: &IntMatrix, m: u64) -> Result<LinearSystem> {
    if psi.ambient() != Ambient::Integers {
        return invalid("system already cyclic");
    }
    let thr = reduction_threshold(psi, v);
    if BigInt::from(m) <= thr {
        return invalid(format!("modulus {m} does not exceed threshold {thr}"));
    }
    if !crate::sieve::is_prime(m) {
        return invalid(format!("modulus {m} is not prime"));
    }
    let mb = BigInt::from(m);
    let rows: Vec<Vec<BigInt>> = (0..psi.t())
        .map(|i| psi.form(i).iter().map(|a| a.mod_floor(&mb)).collect())
        .collect();
    let lin = if rows.is_empty() {
        IntMatrix::empty(psi.d())
    } else {
        IntMatrix::from_rows(rows)?
    };
    let consts = psi.constants().iter().map(|b| b.mod_floor(&mb)).collect();
    let theta = LinearSystem::new(lin, consts, Ambient::Cyclic(m))?;
    // normal-form witnesses survive reduction
    for i in 0..psi.t() {
        for s in 0..psi.d() {
            if psi.exact_normal_witness(i, s) != theta.exact_normal_witness(i, s) {
                return Err(Error::Certification(format!(
                    "normal-form witness changed at {i}"
                )));
            }
        }
    }
    Ok(theta)
}

/// θ maps Z_M^d onto Ker_{Z_M}(V)?  Checked by ranks over F_M.
pub fn is_surjective_mod(theta: &LinearSystem, v: &IntMatrix) -> bool {
    let Ambient::Cyclic(m) = theta.ambient() else {
        return false;
    };
    let prod = match v.mul(theta.linear_part()) {
        Ok(p) => p,
        Err(_) => return false,
    };
    let mb = BigInt::from(m);
    if !(0..prod.rows()).all(|i| prod.row(i).iter().all(|x| x.mod_floor(&mb).is_zero())) {
        return false;
    }
    let img = rank_mod(&theta.image_generators(), m);
    img + rank_mod(&v.row_vecs(), m) == v.cols()
}

/// Lift a system over Z_M to Z using centred representatives in (−M/2, M/2].
pub fn lift_from_mod(theta: &LinearSystem) -> Result<LinearSystem> {
    let Ambient::Cyclic(m) = theta.ambient() else {
        return invalid("system is not cyclic");
    };
    if BigInt::from(m) <= BigInt::from(2) * theta.linear_norm() {
        return invalid("modulus too small for lifting");
    }
    let mb = BigInt::from(m);
    let centre = |a: &BigInt| {
        let r = a.mod_floor(&mb);
        if BigInt::from(2) * &r > mb {
            r - &mb
        } else {
            r
        }
    };
    let rows: Vec<Vec<BigInt>> = (0..theta.t())
        .map(|i| theta.form(i).iter().map(centre).collect())
        .collect();
    let lin = if rows.is_empty() {
        IntMatrix::empty(theta.d())
    } else {
        IntMatrix::from_rows(rows)?
    };
    let consts = theta.constants().iter().map(centre).collect();
    LinearSystem::new(lin, consts, Ambient::Integers)
}

/// #{y ∈ [−N,N]^t : Vy = 0, y_i = y_j}.
pub fn count_degenerate(v: &IntMatrix, n: i64, i: usize, j: usize) -> Result<u64> {
    let t = v.cols();
    if i == j || i >= t || j >= t {
        return invalid("need distinct indices i, j");
    }
    if n < 0 {
        return invalid("N must be non-negative");
    }
    let mut row = vec![BigInt::zero(); t];
    row[i] = BigInt::one();
    row[j] = -BigInt::one();
    let aug = v.stack(&[row])?;
    let ker = integer_kernel(&aug.row_vecs(), t);
    let lat = Lattice::from_generators(&ker, t)?;
    lat.count(&vec![Domain::interval(-n, n); t], 1 << 34)
}

/// Standard systems used throughout.
pub mod systems {
    use super::*;

    /// (x₁, x₁+x₂, x₁+2x₂).
    pub fn three_ap() -> LinearSystem {
        LinearSystem::from_i64(&[vec![1, 0], vec![1, 1], vec![1, 2]])
    }
    /// Forms x₀ + x_i + x_j for 1 ≤ i ≤ j ≤ d.
    pub fn midpoints(d: usize) -> LinearSystem {
        let mut rows = Vec::new();
        for i in 1..=d {
            for j in i..=d {
                let mut r = vec![0i64; d + 1];
                r[0] = 1;
                r[i] += 1;
                r[j] += 1;
                rows.push(r);
            }
        }
        LinearSystem::from_i64(&rows)
    }
    pub fn identity() -> LinearSystem {
        LinearSystem::from_i64(&[vec![1]])
    }
    pub fn three_ap_matrix() -> IntMatrix {
        IntMatrix::from_i64(&[vec![1, -2, 1]])
    }
    /// Integer matrix V with Ker(V) ⊗ Q = image of the midpoints system.
    pub fn midpoints_matrix(d: usize) -> IntMatrix {
        let psi = midpoints(d);
        let rows = integer_kernel(&psi.image_generators(), psi.t());
        IntMatrix::from_rows(rows).unwrap()
    }
}

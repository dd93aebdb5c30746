//! Integer matrices and exact elimination (fraction-free over Q, plain over F_p).

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{invalid, Result};

/// Dense row-major matrix of arbitrary-precision integers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl Serialize for IntMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.to_string()).collect())
            .collect();
        rows.serialize(s)
    }
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<BigInt>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return invalid("ragged matrix rows");
        }
        Ok(IntMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Convenience constructor; panics on ragged input.
    pub fn from_i64(rows: &[Vec<i64>]) -> Self {
        let big = rows
            .iter()
            .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
            .collect();
        Self::from_rows(big).expect("ragged rows")
    }

    /// Zero-row matrix with `cols` columns.
    pub fn empty(cols: usize) -> Self {
        IntMatrix {
            rows: 0,
            cols,
            data: vec![],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }
    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = v;
    }
    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
    pub fn row_vecs(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut t = IntMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != other.rows {
            return invalid("dimension mismatch in product");
        }
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    /// ‖V‖ = Σ|λ_ij|.
    pub fn l1_norm(&self) -> BigInt {
        self.data.iter().map(|x| x.abs()).sum()
    }

    pub fn rank(&self) -> usize {
        rank_q(&self.row_vecs())
    }

    pub fn is_translation_invariant(&self) -> bool {
        (0..self.rows).all(|i| self.row(i).iter().sum::<BigInt>().is_zero())
    }

    /// Entries as i64, failing if any does not fit.
    pub fn to_i64_rows(&self) -> Result<Vec<Vec<i64>>> {
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .map(|x| {
                        x.to_i64()
                            .ok_or_else(|| crate::Error::Budget("entry exceeds i64".into()))
                    })
                    .collect()
            })
            .collect()
    }

    /// Append rows (column count must match).
    pub fn stack(&self, extra: &[Vec<BigInt>]) -> Result<IntMatrix> {
        let mut rows = self.row_vecs();
        for r in extra {
            if r.len() != self.cols {
                return invalid("row length mismatch");
            }
            rows.push(r.clone());
        }
        if rows.is_empty() {
            return Ok(IntMatrix::empty(self.cols));
        }
        IntMatrix::from_rows(rows)
    }
}

/// Rank over Q by Bareiss fraction-free elimination.
pub fn rank_q(rows: &[Vec<BigInt>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let mut a: Vec<Vec<BigInt>> = rows.to_vec();
    let n = a[0].len();
    let mut rank = 0;
    let mut prev = BigInt::one();
    for c in 0..n {
        let Some(p) = (rank..a.len()).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        for i in rank + 1..a.len() {
            for j in c + 1..n {
                let v = (&a[rank][c] * &a[i][j] - &a[i][c] * &a[rank][j]) / &prev;
                a[i][j] = v;
            }
            a[i][c] = BigInt::zero();
        }
        prev = a[rank][c].clone();
        rank += 1;
        if rank == a.len() {
            break;
        }
    }
    rank
}

/// Rank over F_p.
pub fn rank_mod(rows: &[Vec<BigInt>], p: u64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let pb = BigInt::from(p);
    let mut a: Vec<Vec<u64>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|x| x.mod_floor(&pb).to_u64().unwrap())
                .collect()
        })
        .collect();
    let n = a[0].len();
    let mut rank = 0;
    for c in 0..n {
        let Some(piv) = (rank..a.len()).find(|&i| a[i][c] != 0) else {
            continue;
        };
        a.swap(rank, piv);
        let inv = inv_mod(a[rank][c], p);
        for j in c..n {
            a[rank][j] = mul_mod(a[rank][j], inv, p);
        }
        for i in 0..a.len() {
            if i != rank && a[i][c] != 0 {
                let f = a[i][c];
                for j in c..n {
                    let sub = mul_mod(f, a[rank][j], p);
                    a[i][j] = (a[i][j] + p - sub) % p;
                }
            }
        }
        rank += 1;
        if rank == a.len() {
            break;
        }
    }
    rank
}

/// Reduced row echelon form over F_p; returns the nonzero rows and their pivot columns.
pub fn rref_mod(rows: &[Vec<u64>], ncols: usize, p: u64) -> (Vec<Vec<u64>>, Vec<usize>) {
    let mut a: Vec<Vec<u64>> = rows
        .iter()
        .map(|r| r.iter().map(|x| x % p).collect())
        .collect();
    let mut pivots = Vec::new();
    let mut rank = 0;
    for c in 0..ncols {
        if rank == a.len() {
            break;
        }
        let Some(piv) = (rank..a.len()).find(|&i| a[i][c] != 0) else {
            continue;
        };
        a.swap(rank, piv);
        let inv = inv_mod(a[rank][c], p);
        for j in c..ncols {
            a[rank][j] = mul_mod(a[rank][j], inv, p);
        }
        for i in 0..a.len() {
            if i != rank && a[i][c] != 0 {
                let f = a[i][c];
                for j in c..ncols {
                    let sub = mul_mod(f, a[rank][j], p);
                    a[i][j] = (a[i][j] + p - sub) % p;
                }
            }
        }
        pivots.push(c);
        rank += 1;
    }
    a.truncate(rank);
    (a, pivots)
}

/// Basis of {x ∈ F_p^ncols : rows·x = 0}.
pub fn nullspace_mod(rows: &[Vec<u64>], ncols: usize, p: u64) -> Vec<Vec<u64>> {
    let (r, pivots) = rref_mod(rows, ncols, p);
    let mut basis = Vec::new();
    for free in (0..ncols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![0u64; ncols];
        v[free] = 1;
        for (k, &pc) in pivots.iter().enumerate() {
            v[pc] = (p - r[k][free]) % p;
        }
        basis.push(v);
    }
    basis
}

pub(crate) fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub(crate) fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Inverse modulo a prime.
pub(crate) fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

/// Integer vectors spanning the rational kernel {x : rows·x = 0}.
pub fn rational_kernel(rows: &[Vec<BigInt>], ncols: usize) -> Vec<Vec<BigInt>> {
    let mut a: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|x| BigRational::from_integer(x.clone()))
                .collect()
        })
        .collect();
    let mut pivots = Vec::new();
    let mut rank = 0;
    for c in 0..ncols {
        let Some(p) = (rank..a.len()).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        let inv = a[rank][c].recip();
        for j in 0..ncols {
            a[rank][j] = &a[rank][j] * &inv;
        }
        for i in 0..a.len() {
            if i != rank && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in 0..ncols {
                    let v = &a[i][j] - &f * &a[rank][j];
                    a[i][j] = v;
                }
            }
        }
        pivots.push(c);
        rank += 1;
    }
    let mut basis = Vec::new();
    for free in (0..ncols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![BigRational::zero(); ncols];
        v[free] = BigRational::one();
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = -a[r][free].clone();
        }
        basis.push(clear_denominators(&v));
    }
    basis
}

/// Scale a rational vector to a primitive integer vector.
pub fn clear_denominators(v: &[BigRational]) -> Vec<BigInt> {
    let l = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| x.numer() * (&l / x.denom())).collect();
    primitive(ints)
}

pub(crate) fn primitive(v: Vec<BigInt>) -> Vec<BigInt> {
    let g = v.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if g.is_zero() || g.is_one() {
        return v;
    }
    v.into_iter().map(|x| x / &g).collect()
}

/// Row Hermite normal form of the lattice spanned by `rows`; zero rows dropped.
pub fn hnf(rows: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    if rows.is_empty() {
        return vec![];
    }
    let n = rows[0].len();
    let mut a = rows.to_vec();
    let mut r = 0;
    for c in 0..n {
        if r == a.len() {
            break;
        }
        loop {
            let mut best: Option<usize> = None;
            for i in r..a.len() {
                if !a[i][c].is_zero() && best.map_or(true, |b| a[i][c].abs() < a[b][c].abs()) {
                    best = Some(i);
                }
            }
            let Some(b) = best else { break };
            a.swap(r, b);
            let mut done = true;
            for i in r + 1..a.len() {
                if !a[i][c].is_zero() {
                    let q = a[i][c].div_floor(&a[r][c]);
                    let pr = a[r].clone();
                    for (x, y) in a[i].iter_mut().zip(pr.iter()) {
                        *x -= &q * y;
                    }
                    if !a[i][c].is_zero() {
                        done = false;
                    }
                }
            }
            if done {
                break;
            }
        }
        if a[r][c].is_zero() {
            continue;
        }
        if a[r][c].is_negative() {
            for x in a[r].iter_mut() {
                *x = -x.clone();
            }
        }
        let pr = a[r].clone();
        for i in 0..r {
            let q = a[i][c].div_floor(&pr[c]);
            if !q.is_zero() {
                for (x, y) in a[i].iter_mut().zip(pr.iter()) {
                    *x -= &q * y;
                }
            }
        }
        r += 1;
    }
    a.truncate(r);
    a.retain(|row| row.iter().any(|x| !x.is_zero()));
    a
}

/// Basis of the integer kernel Z^n ∩ ker(rows).
pub fn integer_kernel(rows: &[Vec<BigInt>], ncols: usize) -> Vec<Vec<BigInt>> {
    let r = rows.len();
    let mut aug = Vec::with_capacity(ncols);
    for j in 0..ncols {
        let mut row: Vec<BigInt> = rows.iter().map(|x| x[j].clone()).collect();
        row.extend((0..ncols).map(|k| {
            if k == j {
                BigInt::one()
            } else {
                BigInt::zero()
            }
        }));
        aug.push(row);
    }
    let h = hnf(&aug);
    let basis: Vec<Vec<BigInt>> = h
        .into_iter()
        .filter(|row| row[..r].iter().all(|x| x.is_zero()))
        .map(|row| row[r..].to_vec())
        .collect();
    size_reduce(basis)
}

fn l1(v: &[BigInt]) -> BigInt {
    v.iter().map(|x| x.abs()).sum()
}

/// Pairwise size reduction: subtract integer multiples while the l1 norm drops.
pub fn size_reduce(mut basis: Vec<Vec<BigInt>>) -> Vec<Vec<BigInt>> {
    let k = basis.len();
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                for sign in [1i32, -1] {
                    loop {
                        let cand: Vec<BigInt> = basis[i]
                            .iter()
                            .zip(basis[j].iter())
                            .map(|(a, b)| a - BigInt::from(sign) * b)
                            .collect();
                        if l1(&cand) < l1(&basis[i]) {
                            basis[i] = cand;
                            changed = true;
                        } else {
                            break;
                        }
                    }
                }
            }
        }
    }
    for v in basis.iter_mut() {
        if let Some(first) = v.iter().find(|x| !x.is_zero()) {
            if first.is_negative() {
                for x in v.iter_mut() {
                    *x = -x.clone();
                }
            }
        }
    }
    basis
}

/// Do two generating sets span the same lattice?
pub fn same_lattice(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> bool {
    hnf(a) == hnf(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<i64>]) -> Vec<Vec<BigInt>> {
        IntMatrix::from_i64(rows).row_vecs()
    }

    #[test]
    fn ranks() {
        assert_eq!(rank_q(&m(&[vec![1, 2], vec![2, 4]])), 1);
        assert_eq!(
            rank_q(&m(&[vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 10]])),
            3
        );
        assert_eq!(rank_q(&m(&[vec![0, 0]])), 0);
        assert_eq!(rank_mod(&m(&[vec![1, 2], vec![3, 1]]), 5), 1);
        assert_eq!(rank_mod(&m(&[vec![1, 2], vec![3, 1]]), 7), 2);
    }

    #[test]
    fn hnf_canonical() {
        let a = m(&[vec![2, 4], vec![3, 6], vec![0, 5]]);
        let h = hnf(&a);
        assert_eq!(h, m(&[vec![1, 2], vec![0, 5]]));
        let b = m(&[vec![1, 7], vec![0, 5]]);
        assert!(same_lattice(&a, &b));
    }

    #[test]
    fn kernel_of_3ap() {
        let v = m(&[vec![1, -2, 1]]);
        let k = integer_kernel(&v, 3);
        assert_eq!(k.len(), 2);
        for x in &k {
            let s: BigInt = x.iter().zip(v[0].iter()).map(|(a, b)| a * b).sum();
            assert!(s.is_zero());
        }
        assert!(same_lattice(&k, &m(&[vec![1, 1, 1], vec![0, 1, 2]])));
    }

    #[test]
    fn rational_kernel_spans() {
        let v = m(&[vec![1, 1, 0], vec![0, 2, 2]]);
        let k = rational_kernel(&v, 3);
        assert_eq!(k, m(&[vec![1, -1, 1]]));
    }

    #[test]
    fn nullspace_mod_annihilates() {
        let p = 13;
        let rows = vec![vec![1, 11, 1, 0], vec![0, 1, 5, 7]];
        let ker = nullspace_mod(&rows, 4, p);
        assert_eq!(ker.len(), 2);
        for v in &ker {
            for r in &rows {
                let s: u64 = r.iter().zip(v).map(|(a, b)| a * b).sum();
                assert_eq!(s % p, 0);
            }
        }
        assert_eq!(rref_mod(&ker, 4, p).0.len(), 2);
    }
}

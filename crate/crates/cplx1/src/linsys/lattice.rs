//! Enumeration of integer lattice points inside per-coordinate domains.
//!
//! The lattice is put in row Hermite form; coefficients are then chosen one
//! pivot at a time, and every coordinate is tested as soon as it is fixed.

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use super::matrix::hnf;
use crate::error::{Error, Result};

/// Allowed values for one coordinate: a sorted list plus a membership bitmap.
#[derive(Clone, Debug)]
pub struct Domain {
    values: Vec<i64>,
    lo: i64,
    mask: Vec<bool>,
}

impl Domain {
    pub fn from_values(mut values: Vec<i64>) -> Self {
        values.sort_unstable();
        values.dedup();
        let lo = values.first().copied().unwrap_or(0);
        let hi = values.last().copied().unwrap_or(-1);
        let mut mask = vec![false; (hi - lo + 1).max(0) as usize];
        for &v in &values {
            mask[(v - lo) as usize] = true;
        }
        Domain { values, lo, mask }
    }

    pub fn interval(lo: i64, hi: i64) -> Self {
        Self::from_values((lo..=hi).collect())
    }

    #[inline]
    pub fn contains(&self, x: i64) -> bool {
        let k = x - self.lo;
        k >= 0 && (k as usize) < self.mask.len() && self.mask[k as usize]
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }
    pub fn min(&self) -> Option<i64> {
        self.values.first().copied()
    }
    pub fn max(&self) -> Option<i64> {
        self.values.last().copied()
    }
}

/// Lattice in Z^t given by an echelon basis with positive pivots.
#[derive(Clone, Debug)]
pub struct Lattice {
    dim: usize,
    basis: Vec<Vec<i64>>,
    pivots: Vec<usize>,
}

impl Lattice {
    pub fn from_generators(gens: &[Vec<BigInt>], dim: usize) -> Result<Self> {
        let h = hnf(gens);
        let mut basis = Vec::with_capacity(h.len());
        let mut pivots = Vec::with_capacity(h.len());
        for row in &h {
            let r: Vec<i64> = row
                .iter()
                .map(|x| {
                    x.to_i64()
                        .ok_or_else(|| Error::Budget("lattice entry exceeds i64".into()))
                })
                .collect::<Result<_>>()?;
            pivots.push(r.iter().position(|&x| x != 0).unwrap());
            basis.push(r);
        }
        Ok(Lattice { dim, basis, pivots })
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Upper bound on the number of points in the domains: the pivot coordinate of
    /// row p steps by basis[p][pivot] once the earlier coefficients are fixed.
    pub fn count_upper_bound(&self, domains: &[Domain]) -> u64 {
        assert_eq!(domains.len(), self.dim);
        let mut total = 1u64;
        for (row, &c) in self.basis.iter().zip(&self.pivots) {
            let d = &domains[c];
            let span = match (d.min(), d.max()) {
                (Some(lo), Some(hi)) => (hi - lo) as u64,
                _ => return 0,
            };
            total = total.saturating_mul(span / row[c].unsigned_abs() + 1);
        }
        total
    }

    /// Visit every lattice point y with y_c in domains[c] for all c.
    /// `budget` caps the number of search nodes.
    pub fn for_each_point<F: FnMut(&[i64])>(
        &self,
        domains: &[Domain],
        budget: u64,
        mut f: F,
    ) -> Result<u64> {
        assert_eq!(domains.len(), self.dim);
        if domains.iter().any(|d| d.values.is_empty()) {
            return Ok(0);
        }
        let mut y = vec![0i64; self.dim];
        let mut nodes = 0u64;
        // columns checked after choosing coefficient p: (pivot_p, pivot_{p+1})
        let mut segs = Vec::with_capacity(self.rank() + 1);
        let first = self.pivots.first().copied().unwrap_or(self.dim);
        for p in 0..self.rank() {
            let end = self.pivots.get(p + 1).copied().unwrap_or(self.dim);
            segs.push((self.pivots[p] + 1, end));
        }
        // columns before the first pivot are identically zero
        for c in 0..first {
            if !domains[c].contains(0) {
                return Ok(0);
            }
        }
        if self.rank() == 0 {
            if (0..self.dim).all(|c| domains[c].contains(0)) {
                f(&y);
                return Ok(1);
            }
            return Ok(0);
        }
        self.rec(0, domains, &segs, &mut y, &mut nodes, budget, &mut f)?;
        Ok(nodes)
    }

    #[allow(clippy::too_many_arguments)]
    fn rec<F: FnMut(&[i64])>(
        &self,
        p: usize,
        domains: &[Domain],
        segs: &[(usize, usize)],
        y: &mut Vec<i64>,
        nodes: &mut u64,
        budget: u64,
        f: &mut F,
    ) -> Result<()> {
        let c = self.pivots[p];
        let h = self.basis[p][c];
        let base = y[c];
        let row = &self.basis[p];
        for &target in domains[c].values() {
            let diff = target - base;
            if diff.rem_euclid(h) != 0 {
                continue;
            }
            let z = diff / h;
            *nodes += 1;
            if *nodes > budget {
                return Err(Error::Budget(format!(
                    "lattice enumeration exceeded {budget} nodes"
                )));
            }
            for j in c..self.dim {
                y[j] += z * row[j];
            }
            let (s, e) = segs[p];
            let ok = (s..e).all(|j| domains[j].contains(y[j]));
            if ok {
                if p + 1 == self.rank() {
                    f(y);
                } else {
                    self.rec(p + 1, domains, segs, y, nodes, budget, f)?;
                }
            }
            for j in c..self.dim {
                y[j] -= z * row[j];
            }
        }
        Ok(())
    }

    /// Number of lattice points in the domains.
    pub fn count(&self, domains: &[Domain], budget: u64) -> Result<u64> {
        let mut n = 0u64;
        self.for_each_point(domains, budget, |_| n += 1)?;
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsys::IntMatrix;

    #[test]
    fn three_ap_box_count() {
        // kernel of [1,-2,1] in [-N,N]^3: brute force oracle
        let gens = IntMatrix::from_i64(&[vec![1, 1, 1], vec![0, 1, 2]]).row_vecs();
        let lat = Lattice::from_generators(&gens, 3).unwrap();
        for n in [0i64, 1, 3, 7] {
            let doms = vec![Domain::interval(-n, n); 3];
            let got = lat.count(&doms, 1 << 30).unwrap();
            let mut want = 0;
            for a in -n..=n {
                for b in -n..=n {
                    for c in -n..=n {
                        if a - 2 * b + c == 0 {
                            want += 1;
                        }
                    }
                }
            }
            assert_eq!(got, want);
        }
    }

    #[test]
    fn sparse_domains() {
        let gens = IntMatrix::from_i64(&[vec![1, 1, 1], vec![0, 1, 2]]).row_vecs();
        let lat = Lattice::from_generators(&gens, 3).unwrap();
        let a: Vec<i64> = (1..=9).collect();
        let doms = vec![Domain::from_values(a.clone()); 3];
        let mut want = 0;
        for &x in &a {
            for &z in &a {
                if (x + z) % 2 == 0 {
                    want += 1;
                }
            }
        }
        assert_eq!(lat.count(&doms, 1 << 30).unwrap(), want);
    }

    #[test]
    fn upper_bound_dominates_count() {
        let gens = IntMatrix::from_i64(&[vec![2, 1, 0, 3], vec![0, 3, 1, -1]]).row_vecs();
        let lat = Lattice::from_generators(&gens, 4).unwrap();
        for n in [0i64, 2, 5, 9] {
            let doms = vec![
                Domain::interval(-n, n),
                Domain::interval(-2 * n, n),
                Domain::interval(0, n),
                Domain::interval(-n, n),
            ];
            assert!(lat.count_upper_bound(&doms) >= lat.count(&doms, 1 << 30).unwrap());
        }
    }

    #[test]
    fn rank_zero() {
        let lat = Lattice::from_generators(&[], 2).unwrap();
        assert_eq!(
            lat.count(&[Domain::interval(-1, 1), Domain::interval(0, 0)], 10)
                .unwrap(),
            1
        );
        assert_eq!(
            lat.count(&[Domain::interval(1, 1), Domain::interval(0, 0)], 10)
                .unwrap(),
            0
        );
    }
}

//! Normal extension by variable splitting: ψ′(x, y) = ψ(x + Σ_k y_k v_k).

use num_bigint::BigInt;
use num_traits::Zero;

use super::matrix::{rational_kernel, same_lattice};
use super::{Complexity, IntMatrix, LinearSystem};
use crate::error::{invalid, Error, Result};

/// Extend ψ by dummy variables so that it is in s-normal form with the same image.
///
/// For every position i whose minimal partition has blocks X_1..X_k, a
/// direction v with ψ_j(v) = 0 on X_l and ψ_i(v) ≠ 0 is attached to a new
/// variable. The result is then pruned greedily, keeping normality and the
/// image lattice. At most d·t dummy variables are allowed.
pub fn normal_extension(psi: &LinearSystem, s: usize) -> Result<LinearSystem> {
    if psi.ambient() != super::Ambient::Integers {
        return invalid("normal extension is implemented over Z only");
    }
    let t = psi.t();
    let d = psi.d();
    for i in 0..t {
        match psi.complexity_at(i) {
            Complexity::Finite(c) if c <= s => {}
            c => return invalid(format!("complexity {c:?} at {} exceeds {s}", i + 1)),
        }
    }
    if psi.is_normal(s) {
        return Ok(psi.clone());
    }
    let forms = psi.linear_part().row_vecs();
    let mut directions: Vec<Vec<BigInt>> = Vec::new();
    for i in 0..t {
        if (0..=s).any(|si| psi.is_exact_normal_at(i, si)) {
            continue;
        }
        let (_, part) = psi.complexity_witness(i);
        let part = part.expect("finite complexity has a witness");
        for block in &part.blocks {
            let rows: Vec<Vec<BigInt>> = block.iter().map(|&j| forms[j].clone()).collect();
            let ker = rational_kernel(&rows, d);
            let v = ker
                .into_iter()
                .find(|v| !dot(&forms[i], v).is_zero())
                .ok_or_else(|| Error::Certification("no separating direction".into()))?;
            directions.push(v);
        }
    }
    let e = directions.len();
    if e > d * t {
        return Err(Error::Budget(format!(
            "normal extension needs {e} > d·t = {} dummy variables",
            d * t
        )));
    }
    // columns of the extended system
    let mut cols: Vec<Vec<BigInt>> = psi.image_generators();
    for v in &directions {
        cols.push(forms.iter().map(|f| dot(f, v)).collect());
    }
    let build = |cols: &[Vec<BigInt>]| -> LinearSystem {
        let rows: Vec<Vec<BigInt>> = (0..t)
            .map(|i| cols.iter().map(|c| c[i].clone()).collect())
            .collect();
        LinearSystem::new(
            IntMatrix::from_rows(rows).unwrap(),
            psi.constants().to_vec(),
            psi.ambient(),
        )
        .unwrap()
    };
    let full = build(&cols);
    if !full.is_normal(s) {
        return Err(Error::Certification(
            "extension is not in normal form".into(),
        ));
    }
    let image = psi.image_generators();
    let mut keep = cols;
    let mut k = 0;
    while k < keep.len() {
        let mut trial = keep.clone();
        trial.remove(k);
        if !trial.is_empty() && same_lattice(&trial, &image) && build(&trial).is_normal(s) {
            keep = trial;
        } else {
            k += 1;
        }
    }
    Ok(build(&keep))
}

fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsys::systems::*;
    use std::collections::HashSet;

    fn image_in_box(psi: &LinearSystem, b: i64) -> HashSet<Vec<i64>> {
        let d = psi.d();
        let mut out = HashSet::new();
        let mut x = vec![-b; d];
        loop {
            out.insert(psi.eval_i64(&x));
            let mut p = 0;
            loop {
                if p == d {
                    return out;
                }
                x[p] += 1;
                if x[p] <= b {
                    break;
                }
                x[p] = -b;
                p += 1;
            }
        }
    }

    #[test]
    fn already_normal_is_unchanged() {
        let p = LinearSystem::from_i64(&[vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]]);
        assert_eq!(normal_extension(&p, 1).unwrap(), p);
    }

    #[test]
    fn three_ap_extension() {
        let psi = three_ap();
        let ext = normal_extension(&psi, 1).unwrap();
        assert!(ext.is_normal(1));
        for i in 0..3 {
            assert!(ext.is_exact_normal_at(i, 1));
        }
        assert!(same_lattice(
            &ext.image_generators(),
            &psi.image_generators()
        ));
        assert_eq!(ext.d(), 3);
    }

    #[test]
    fn midpoints_extension_same_image() {
        let psi = midpoints(2);
        let ext = normal_extension(&psi, 1).unwrap();
        assert!(ext.is_normal(1));
        // image equality checked on boxes both ways: a box image of one lies in
        // the (larger) box image of the other
        let small = image_in_box(&psi, 2);
        let big = image_in_box(&ext, 6);
        assert!(small.iter().all(|y| big.contains(y)));
        let small_e = image_in_box(&ext, 1);
        let big_p = image_in_box(&psi, 8);
        assert!(small_e.iter().all(|y| big_p.contains(y)));
    }

    #[test]
    fn rejects_high_complexity() {
        let dup = LinearSystem::from_i64(&[vec![1, 0], vec![2, 0], vec![0, 1]]);
        assert!(normal_extension(&dup, 1).is_err());
    }
}

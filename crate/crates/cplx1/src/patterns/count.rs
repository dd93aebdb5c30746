//! #{y ∈ A^t : Vy = 0}, with and without coincident coordinates.

use num_bigint::BigInt;

use super::{Method, PatternCountResult, BRUTE_LIMIT};
use crate::error::{invalid, Error, Result};
use crate::linsys::{integer_kernel, Domain, IntMatrix, Lattice};

fn exact(n: u64, method: Method, cost: u64) -> PatternCountResult {
    PatternCountResult {
        value: n as f64,
        exact: Some(n),
        method,
        cost,
        ci_half_width: None,
    }
}

fn kernel_lattice(rows: &[Vec<BigInt>], t: usize) -> Result<Lattice> {
    Lattice::from_generators(&integer_kernel(rows, t), t)
}

/// Exact count by walking the kernel lattice of V through A^t.
pub fn count_solutions(v: &IntMatrix, a: &[i64], budget: u64) -> Result<PatternCountResult> {
    let t = v.cols();
    let lat = kernel_lattice(&v.row_vecs(), t)?;
    let dom = Domain::from_values(a.to_vec());
    let mut n = 0u64;
    let cost = lat.for_each_point(&vec![dom; t], budget, |_| n += 1)?;
    Ok(exact(n, Method::Lattice, cost))
}

/// Direct enumeration of A^t; `distinct` keeps only pairwise-distinct tuples.
pub fn count_solutions_brute(v: &IntMatrix, a: &[i64], distinct: bool) -> Result<u64> {
    let t = v.cols();
    let mut a = a.to_vec();
    a.sort_unstable();
    a.dedup();
    let total = (a.len() as u64)
        .checked_pow(t as u32)
        .filter(|&c| c <= BRUTE_LIMIT);
    if total.is_none() {
        return Err(Error::Budget(format!("|A|^t exceeds {BRUTE_LIMIT}")));
    }
    if a.is_empty() {
        return Ok(if t == 0 { 1 } else { 0 });
    }
    let rows = v.to_i64_rows()?;
    let mut idx = vec![0usize; t];
    let mut n = 0u64;
    loop {
        let ok = rows
            .iter()
            .all(|r| r.iter().zip(&idx).map(|(c, &k)| c * a[k]).sum::<i64>() == 0);
        if ok && (!distinct || (0..t).all(|i| (i + 1..t).all(|j| idx[i] != idx[j]))) {
            n += 1;
        }
        let mut pos = 0;
        loop {
            if pos == t {
                return Ok(n);
            }
            idx[pos] += 1;
            if idx[pos] < a.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// All set partitions of {0,…,t−1}, blocks in order of first element.
pub fn set_partitions(t: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, t: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == t {
            out.push(cur.clone());
            return;
        }
        for b in 0..cur.len() {
            cur[b].push(i);
            rec(i + 1, t, cur, out);
            cur[b].pop();
        }
        cur.push(vec![i]);
        rec(i + 1, t, cur, out);
        cur.pop();
    }
    let mut out = Vec::new();
    rec(0, t, &mut Vec::new(), &mut out);
    out
}

/// Möbius inversion over the partition lattice:
/// #{distinct} = Σ_π μ(0̂, π) · #{solutions constant on the blocks of π}.
pub fn count_distinct_solutions(
    v: &IntMatrix,
    a: &[i64],
    budget: u64,
) -> Result<PatternCountResult> {
    let t = v.cols();
    if t > 10 {
        return invalid("distinct counting supports t ≤ 10");
    }
    let dom = Domain::from_values(a.to_vec());
    let rows = v.row_vecs();
    let mut total: i128 = 0;
    let mut cost = 0u64;
    for part in set_partitions(t) {
        let mut mu: i128 = 1;
        for b in &part {
            let k = b.len() as i128;
            mu *= if k % 2 == 1 { 1 } else { -1 } * (1..k).product::<i128>();
        }
        let merged: Vec<Vec<BigInt>> = rows
            .iter()
            .map(|r| {
                part.iter()
                    .map(|b| b.iter().map(|&j| r[j].clone()).sum())
                    .collect()
            })
            .collect();
        let lat = kernel_lattice(&merged, part.len())?;
        let mut n = 0u64;
        cost += lat.for_each_point(
            &vec![dom.clone(); part.len()],
            budget.saturating_sub(cost),
            |_| n += 1,
        )?;
        total += mu * n as i128;
    }
    if total < 0 {
        return Err(Error::Certification(
            "negative inclusion–exclusion total".into(),
        ));
    }
    Ok(exact(total as u64, Method::Lattice, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsys::{count_degenerate, systems};

    const B: u64 = 1 << 30;

    #[test]
    fn singleton_zero() {
        let v = systems::three_ap_matrix();
        assert_eq!(count_solutions(&v, &[0], B).unwrap().exact, Some(1));
        assert_eq!(
            count_distinct_solutions(&v, &[0], B).unwrap().exact,
            Some(0)
        );
    }

    #[test]
    fn three_ap_one_to_nine() {
        let v = systems::three_ap_matrix();
        let a: Vec<i64> = (1..=9).collect();
        let all = count_solutions(&v, &a, B).unwrap().exact.unwrap();
        let dist = count_distinct_solutions(&v, &a, B).unwrap().exact.unwrap();
        assert_eq!(all, count_solutions_brute(&v, &a, false).unwrap());
        assert_eq!(dist, count_solutions_brute(&v, &a, true).unwrap());
        assert_eq!((all, dist), (41, 32));
    }

    #[test]
    fn partitions_are_bell_numbers() {
        let bell: Vec<usize> = (0..7).map(|t| set_partitions(t).len()).collect();
        assert_eq!(bell, vec![1, 1, 2, 5, 15, 52, 203]);
    }

    #[test]
    fn salem_spencer_set() {
        // no 3-term progressions in {1,2,4,5,10,11,13,14}
        let a = [1, 2, 4, 5, 10, 11, 13, 14];
        let v = systems::three_ap_matrix();
        assert_eq!(count_solutions_brute(&v, &a, true).unwrap(), 0);
        assert_eq!(count_distinct_solutions(&v, &a, B).unwrap().exact, Some(0));
    }

    #[test]
    fn agrees_with_brute_on_assorted() {
        let mats = [
            IntMatrix::from_i64(&[vec![1, 1, -1, -1]]),
            IntMatrix::from_i64(&[vec![1, -2, 1, 0], vec![0, 1, -2, 1]]),
            IntMatrix::from_i64(&[vec![2, 3, -5]]),
        ];
        let sets: [Vec<i64>; 3] = [
            (-5..=5).collect(),
            vec![0, 1, 3, 4, 7, 9, 12, 13, 20],
            (1..=20).step_by(3).collect(),
        ];
        for v in &mats {
            for a in &sets {
                let all = count_solutions(v, a, B).unwrap().exact.unwrap();
                let dist = count_distinct_solutions(v, a, B).unwrap().exact.unwrap();
                assert_eq!(all, count_solutions_brute(v, a, false).unwrap());
                assert_eq!(dist, count_solutions_brute(v, a, true).unwrap());
            }
        }
    }

    #[test]
    fn degenerate_bound() {
        let v = IntMatrix::from_i64(&[vec![1, 1, -1, -1]]);
        let n = 6;
        let a: Vec<i64> = (-n..=n).collect();
        let all = count_solutions(&v, &a, B).unwrap().exact.unwrap();
        let dist = count_distinct_solutions(&v, &a, B).unwrap().exact.unwrap();
        let mut deg = 0;
        for i in 0..4 {
            for j in i + 1..4 {
                deg += count_degenerate(&v, n, i, j).unwrap();
            }
        }
        assert!(dist <= all && all - dist <= deg);
    }
}

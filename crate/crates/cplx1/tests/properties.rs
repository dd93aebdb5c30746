//! Randomized invariants across the library.

use cplx1::cyclic::fourier::u2_fourth_direct;
use cplx1::cyclic::{box_vdc_check, dft, gcs_check, idft, u2_norm, BohrSet, BoxFamily, CyclicFn};
use cplx1::increment::{gvn_check, run_increment, Constants};
use cplx1::linsys::{
    count_degenerate, kernel_parametrization, lift_from_mod, matrix_complexity,
    matrix_complexity_at, reduce_mod, reduction_threshold, Complexity, IntMatrix, LinearSystem,
};
use cplx1::patterns::{
    count_distinct_solutions, count_solutions, count_solutions_brute, t_operator, TMethod,
};
use cplx1::sieve::{gpy_weight_bruteforce, next_prime, rho, GpyConfig, GpySieve, WTrickContext};
use num_traits::ToPrimitive;
use proptest::prelude::*;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

/// Translation-invariant V with r ≤ 2 rows, t ≤ 5 columns, entries in [−3, 3].
fn invariant_matrix() -> impl Strategy<Value = IntMatrix> {
    (1usize..=2, 3usize..=5)
        .prop_flat_map(|(r, t)| prop::collection::vec(prop::collection::vec(-3i64..=3, t - 1), r))
        .prop_filter_map("entries must stay small and rows nonzero", |rows| {
            let full: Vec<Vec<i64>> = rows
                .into_iter()
                .map(|mut row| {
                    row.push(-row.iter().sum::<i64>());
                    row
                })
                .collect();
            let ok = full
                .iter()
                .all(|r| r.iter().all(|x| x.abs() <= 3) && r.iter().any(|&x| x != 0));
            ok.then(|| IntMatrix::from_i64(&full))
        })
}

fn rows(v: &IntMatrix) -> Vec<Vec<i64>> {
    (0..v.rows())
        .map(|i| {
            (0..v.cols())
                .map(|j| v.get(i, j).to_i64().unwrap())
                .collect()
        })
        .collect()
}

fn apply(v: &[Vec<i64>], y: &[i64]) -> Vec<i64> {
    v.iter()
        .map(|r| r.iter().zip(y).map(|(a, b)| a * b).sum())
        .collect()
}

fn random_fn(m: u64, seed: &[f64]) -> CyclicFn {
    CyclicFn::from_fn(m, |x| {
        seed[x as usize % seed.len()] * ((x * 7 + 3) % 11) as f64 / 11.0
    })
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn matrix_and_parametrization_complexity_agree(v in invariant_matrix()) {
        if let Ok((psi, _)) = kernel_parametrization(&v, 1) {
            for i in 0..v.cols() {
                prop_assert_eq!(matrix_complexity_at(&v, i), psi.complexity_at(i));
            }
        }
    }

    #[test]
    fn exact_normal_bounds_complexity(v in invariant_matrix()) {
        if let Ok((psi, _)) = kernel_parametrization(&v, 1) {
            for i in 0..psi.t() {
                for s in 0..=2 {
                    if psi.is_exact_normal_at(i, s) {
                        prop_assert!(matches!(psi.complexity_at(i), Complexity::Finite(c) if c <= s));
                    }
                }
            }
        }
    }

    #[test]
    fn parametrization_lands_in_kernel(v in invariant_matrix(), xs in prop::collection::vec(-50i64..=50, 8)) {
        if let Ok((psi, _)) = kernel_parametrization(&v, 1) {
            let vr = rows(&v);
            let x: Vec<i64> = (0..psi.d()).map(|k| xs[k % xs.len()] + k as i64).collect();
            prop_assert!(apply(&vr, &psi.eval_i64(&x)).iter().all(|&z| z == 0));
        }
    }

    #[test]
    fn complexity_one_parametrizations_are_exact(v in invariant_matrix()) {
        let zero_col = (0..v.cols()).any(|j| (0..v.rows()).all(|i| v.get(i, j).to_i64() == Some(0)));
        if matrix_complexity(&v) == Complexity::Finite(1) && !zero_col && v.cols() >= 3 {
            if let Ok((psi, _)) = kernel_parametrization(&v, 1) {
                if psi.is_normal(1) {
                    for i in 0..psi.t() {
                        prop_assert!(psi.is_exact_normal_at(i, 1));
                    }
                }
            }
        }
    }

    #[test]
    fn reduce_then_lift_is_identity(v in invariant_matrix()) {
        if let Ok((psi, _)) = kernel_parametrization(&v, 1) {
            let thr = reduction_threshold(&psi, &v).to_u64().unwrap();
            let m = next_prime(thr + 1);
            let theta = reduce_mod(&psi, &v, m).unwrap();
            let back = lift_from_mod(&theta).unwrap();
            prop_assert_eq!(back.linear_part(), psi.linear_part());
            prop_assert_eq!(back.constants(), psi.constants());
            let again = reduce_mod(&back, &v, m).unwrap();
            prop_assert_eq!(again.linear_part(), theta.linear_part());
        }
    }

    #[test]
    fn degenerate_counts_scale(v in invariant_matrix()) {
        if kernel_parametrization(&v, 1).is_ok() {
            let (t, r) = (v.cols(), v.rank());
            for i in 0..t {
                for j in i + 1..t {
                    let base = count_degenerate(&v, 1, i, j).unwrap();
                    for n in [5i64, 10, 20] {
                        let c = count_degenerate(&v, n, i, j).unwrap();
                        let bound = (base + 1) * (2 * n as u64 + 1).pow((t - r - 1) as u32);
                        prop_assert!(c <= bound, "{} > {} at N = {}", c, bound, n);
                    }
                }
            }
        }
    }

    #[test]
    fn distinct_counts_are_bounded_by_degenerate(v in invariant_matrix(), n in 2i64..=6) {
        let a: Vec<i64> = (-n..=n).collect();
        let all = count_solutions(&v, &a, 1 << 30).unwrap().exact.unwrap();
        let distinct = count_distinct_solutions(&v, &a, 1 << 30).unwrap().exact.unwrap();
        prop_assert!(distinct <= all);
        let t = v.cols();
        let mut deg = 0;
        for i in 0..t {
            for j in i + 1..t {
                deg += count_degenerate(&v, n, i, j).unwrap();
            }
        }
        prop_assert!(all - distinct <= deg);
    }

    #[test]
    fn wraparound_is_exact_above_the_norm(v in invariant_matrix(), a in prop::collection::btree_set(-6i64..=6, 1..8)) {
        let a: Vec<i64> = a.into_iter().collect();
        let vr = rows(&v);
        let norm = vr.iter().map(|r| r.iter().map(|x| x.abs()).sum::<i64>()).max().unwrap();
        let m = next_prime((2 * norm * 6 + 1) as u64) as i64;
        let t = v.cols();
        let mut y = vec![a[0]; t];
        let mut idx = vec![0usize; t];
        let mut modular = 0u64;
        loop {
            for k in 0..t {
                y[k] = a[idx[k]];
            }
            if apply(&vr, &y).iter().all(|z| z.rem_euclid(m) == 0) {
                modular += 1;
            }
            let mut k = 0;
            while k < t {
                idx[k] += 1;
                if idx[k] < a.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == t {
                break;
            }
        }
        prop_assert_eq!(modular, count_solutions(&v, &a, 1 << 30).unwrap().exact.unwrap());
    }
}

proptest! {
    #![proptest_config(cfg(24))]

    #[test]
    fn solution_counts_scale_with_box(v in invariant_matrix()) {
        if kernel_parametrization(&v, 1).is_ok() {
            let k = (v.cols() - v.rank()) as u32;
            let count = |n: i64| count_solutions(&v, &(-n..=n).collect::<Vec<_>>(), 1 << 32).unwrap().exact.unwrap() as f64;
            let ratio = count(20) / count(10);
            let p = 2f64.powi(k as i32);
            prop_assert!(ratio >= p / 2.0 && ratio <= 2.0 * p, "ratio {} for 2^{}", ratio, k);
        }
    }

    #[test]
    fn method_agreement(
        m in prop::sample::select(vec![53u64, 101]),
        coeffs in prop::collection::vec(-2i64..=2, 8),
        weights in prop::collection::vec(-1.0f64..1.0, 5),
    ) {
        let t = 4;
        let d = 2;
        let sys: Vec<Vec<i64>> = (0..t).map(|i| vec![1, coeffs[2 * i]]).collect();
        let theta = LinearSystem::from_i64(&sys).modulo(m).unwrap();
        prop_assert_eq!(theta.d(), d);
        let fs: Vec<CyclicFn> = (0..t).map(|i| random_fn(m, &weights[i..])).collect();
        let b = t_operator(&theta, &fs, TMethod::Brute).unwrap().value;
        let l = t_operator(&theta, &fs, TMethod::Lattice).unwrap().value;
        let f = t_operator(&theta, &fs, TMethod::Fourier).unwrap().value;
        prop_assert!((b - l).abs() < 1e-9 && (b - f).abs() < 1e-9, "{} {} {}", b, l, f);
    }

    #[test]
    fn gpy_weight_matches_divisor_sum(n in 1i64..=5000, eta in prop::sample::select(vec![0.05, 0.2, 0.4])) {
        let ctx = WTrickContext::new(5000, 5.0, 1).unwrap();
        let cfg = GpyConfig::new(&ctx, eta).unwrap();
        let sieve = GpySieve::new(ctx.clone(), cfg.clone(), ctx.max_value());
        let fast = sieve.gpy_weight(n).unwrap();
        let slow = gpy_weight_bruteforce(n, &ctx, &cfg);
        prop_assert!((fast - slow).abs() <= 1e-12 * slow.abs().max(1.0));
    }

    #[test]
    fn rho_support_and_bounds(eta in 0.05f64..0.5) {
        let ctx = WTrickContext::new(100_000, 3.0, 1).unwrap();
        let cfg = GpyConfig::new(&ctx, eta).unwrap();
        prop_assert_eq!(rho(1, &cfg), 1.0);
        let e2 = std::f64::consts::E.powi(2);
        for m in 1..(cfg.r as u64 + 20) {
            let v = rho(m, &cfg);
            prop_assert!(v.abs() <= e2);
            if m as f64 > cfg.r {
                prop_assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn fourier_identities(m in prop::sample::select(vec![53u64, 101, 257]), w in prop::collection::vec(-1.0f64..1.0, 7)) {
        let f = random_fn(m, &w);
        let spec = dft(&f);
        prop_assert!((spec.energy() - f.mean_square()).abs() < 1e-9);
        let back = idft(&spec);
        prop_assert!(back.values.iter().zip(&f.values).all(|(a, b)| (a - b).abs() < 1e-9));
        if m <= 101 {
            prop_assert!((u2_norm(&f).powi(4) - u2_fourth_direct(&f)).abs() < 1e-9);
        }
    }

    #[test]
    fn bohr_sets(
        m in prop::sample::select(vec![101u64, 1009, 9973]),
        gamma in prop::collection::vec(1u64..9000, 1..=3),
        delta in 0.05f64..0.45,
        rho_ in 0.05f64..1.0,
    ) {
        let gamma: Vec<u64> = gamma.into_iter().map(|g| g % m).collect();
        let b = BohrSet::new(m, &gamma, delta).unwrap();
        let d = b.dim() as i32;
        for &x in b.elements() {
            prop_assert!(b.contains(-(x as i64)));
        }
        prop_assert!(b.len() as f64 >= delta.powi(d) * m as f64);
        let small = b.dilate(rho_).unwrap();
        prop_assert!(small.elements().iter().all(|&x| b.contains(x as i64)));
        prop_assert!(small.len() as f64 >= (rho_ / 2.0).powi(2 * d) * b.len() as f64);
        let (c, reg) = b.find_regular_dilate().unwrap();
        prop_assert!((0.5..=1.0).contains(&c));
        prop_assert!(reg.is_regular());
    }

    #[test]
    fn box_inequalities(n1 in 1usize..6, n2 in 1usize..6, seed in prop::collection::vec(-1.0f64..1.0, 36)) {
        let n = n1 * n2;
        let h: Vec<f64> = seed[..n].to_vec();
        let b1: Vec<f64> = seed[n..n + n1].iter().map(|x| x.clamp(-1.0, 1.0)).collect();
        let b2: Vec<f64> = seed.iter().rev().take(n2).copied().collect();
        prop_assert!(box_vdc_check(&h, &b1, &b2).unwrap().holds);
        let hs = [0, 1, 2, 3].map(|k| (0..n).map(|i| seed[(i * 5 + k * 7) % seed.len()]).collect::<Vec<_>>());
        let fam = BoxFamily::new((0..n1 as i64).collect(), (0..n2 as i64).collect(), hs).unwrap();
        prop_assert!(gcs_check(&fam).holds);
    }

    #[test]
    fn bounded_gvn_has_no_slack(signs in prop::collection::vec(any::<bool>(), 4 * 101)) {
        let m = 101;
        let theta = LinearSystem::from_i64(&[vec![1, 0, 0], vec![1, 1, 0], vec![1, 0, 1], vec![1, 1, 1]]).modulo(m).unwrap();
        let fs: Vec<CyclicFn> = (0..4)
            .map(|k| CyclicFn::from_fn(m, |x| if signs[k * 101 + x as usize] { 1.0 } else { -1.0 }))
            .collect();
        let r = gvn_check(&theta, None, &fs, 3).unwrap();
        prop_assert_eq!(r.holds, Some(true));
        prop_assert_eq!(r.slack, 0.0);
    }
}

proptest! {
    #![proptest_config(cfg(12))]

    #[test]
    fn increment_runs_are_certified(n in 20i64..=45, bits in prop::collection::vec(any::<bool>(), 91)) {
        let a: Vec<i64> = (-n..=n).filter(|&x| bits[(x + 45) as usize]).collect();
        let v = IntMatrix::from_i64(&[vec![1, -2, 1]]);
        let r = run_increment(&v, &a, n, &Constants::default().increment).unwrap();
        prop_assert!(r.steps.len() as f64 <= r.step_limit.max(1.0));
        for s in &r.steps {
            if let Some(c) = &s.checks {
                prop_assert!(c.all(), "{:?}", c);
            }
        }
        let exact = count_solutions_brute(&v, &a, false).unwrap();
        prop_assert!(r.outcome.certified_bound <= exact);
        if let Some(e) = r.outcome.exact {
            prop_assert_eq!(e, exact);
        }
    }
}

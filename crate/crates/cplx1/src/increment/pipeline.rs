//! Primes in W-tricked progressions: λ_A, its smoothing, and the comparison
//! between T(λ_A,…,λ_A), the main term and the error terms.

use serde::Serialize;

use super::constants::Constants;
use super::engine::{run_increment, IncrementReport};
use super::weights::{
    average_weight, build_smoothing, extend_weight, gvn_check, level_set, sample_systems,
    GvnReport, LevelSetReport, PseudorandomReport, SmoothingReport, TransferenceConfig,
};
use crate::cyclic::CyclicFn;
use crate::error::{invalid, Error, Result};
use crate::linsys::{kernel_basis_system, kernel_parametrization, reduce_mod, IntMatrix};
use crate::patterns::{count_distinct_solutions, t_operator, t_over_z, BoxFn, TMethod};
use crate::sieve::{is_prime, lambda_bw, next_prime, GpyConfig, GpySieve, WTrickContext};

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionTerm {
    /// bit i set: λ_A − λ′_A in slot i, λ′_A otherwise
    pub mask: usize,
    pub value: f64,
    pub gvn: Option<GvnReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MainTerm {
    pub level_set: LevelSetSummary,
    pub increment: Option<IncrementReport>,
    /// (fraction·α)^t · (certified solutions in A′) / M^{t−r}
    pub lower_bound: f64,
    pub actual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSetSummary {
    pub size: usize,
    pub threshold: f64,
    pub density: f64,
    pub density_in_box: f64,
    pub moments: Vec<(u32, f64)>,
    /// density(A′) / α^{1.2}
    pub fitted_c: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransferenceReport {
    pub n: u64,
    pub omega: f64,
    pub w: u64,
    pub b: i64,
    pub modulus: u64,
    pub set_size: usize,
    pub alpha: f64,
    pub config: TransferenceConfig,
    pub constraint_lhs: f64,
    pub constraint_rhs: f64,
    pub constraint_ok: bool,
    pub t_over_z: f64,
    pub t_cyclic: f64,
    pub smoothing: Option<SmoothingReport>,
    pub terms: Vec<ExpansionTerm>,
    pub expansion_sum: f64,
    pub expansion_error: f64,
    pub majorant: Option<PseudorandomReport>,
    pub main: Option<MainTerm>,
    pub distinct_solutions: u64,
    pub solutions: u64,
}

/// {n ∈ [N] : W n + b prime}, optionally cut to [lo, hi].
pub fn w_tricked_primes(ctx: &WTrickContext, window: Option<(i64, i64)>) -> Vec<i64> {
    let (lo, hi) = window.unwrap_or((1, ctx.n as i64));
    (lo.max(1)..=hi.min(ctx.n as i64))
        .filter(|&k| {
            let v = ctx.value(k);
            v > 1 && u64::try_from(v).map(is_prime).unwrap_or(false)
        })
        .collect()
}

/// The whole comparison table for A ⊆ {n ∈ [N] : W n + b prime}.
pub fn transference_pipeline(
    v: &IntMatrix,
    ctx: &WTrickContext,
    a: &[i64],
    cfg: &TransferenceConfig,
    consts: &Constants,
) -> Result<TransferenceReport> {
    let n = ctx.n as i64;
    let t = v.cols();
    if !v.is_translation_invariant() {
        return invalid("matrix is not translation-invariant");
    }
    for &x in a {
        if x < 1 || x > n || !u64::try_from(ctx.value(x)).map(is_prime).unwrap_or(false) {
            return invalid(format!("{x} is not a W-tricked prime index in [N]"));
        }
    }
    let norm = v
        .l1_norm()
        .try_into()
        .map_err(|_| Error::Budget("‖V‖ too large".into()))?;
    let norm: u64 = norm;
    let m = next_prime(4 * (norm + 1) * ctx.n + 1);
    let scale = m as f64 / ctx.n as f64;

    let mut values = vec![0.0; (4 * n + 1) as usize];
    for &x in a {
        values[(x + 2 * n) as usize] = scale * lambda_bw(x, ctx);
    }
    let boxed = BoxFn::new(n, values)?;
    let tz = t_over_z(v, &vec![boxed.clone(); t], m)?.value;
    let lambda = boxed.wrap(m)?;
    let alpha = lambda.mean();
    let basis = reduce_mod(&kernel_basis_system(v)?, v, m)?;
    let tc = t_operator(&basis, &vec![lambda.clone(); t], TMethod::Auto)?.value;
    let (c_lhs, c_rhs, c_ok) = cfg.constraint(ctx.n);
    let exact_distinct = count_distinct_solutions(v, a, consts.increment.oracle_budget)?
        .exact
        .unwrap_or(0);
    let exact_all = crate::patterns::count_solutions(v, a, consts.increment.oracle_budget)?
        .exact
        .unwrap_or(0);

    let mut report = TransferenceReport {
        n: ctx.n,
        omega: ctx.omega,
        w: ctx.w_u64(),
        b: ctx.b,
        modulus: m,
        set_size: a.len(),
        alpha,
        config: cfg.clone(),
        constraint_lhs: c_lhs,
        constraint_rhs: c_rhs,
        constraint_ok: c_ok,
        t_over_z: tz,
        t_cyclic: tc,
        smoothing: None,
        terms: vec![],
        expansion_sum: 0.0,
        expansion_error: 0.0,
        majorant: None,
        main: None,
        distinct_solutions: exact_distinct,
        solutions: exact_all,
    };
    if a.is_empty() {
        report.terms = (0..1usize << t)
            .map(|mask| ExpansionTerm {
                mask,
                value: 0.0,
                gvn: None,
            })
            .collect();
        return Ok(report);
    }

    let sm = build_smoothing(&lambda, cfg, ctx.n)?;
    let lp = sm.lambda_prime.clone();
    let diff = lambda.sub(&lp)?;

    // majorant: GPY weight wrapped to Z_M and averaged over the smoothing Bohr set
    let gpy = GpyConfig::new(ctx, cfg.eta)?;
    let sieve = GpySieve::new(ctx.clone(), gpy, ctx.max_value().min(1 << 31));
    let nu: Vec<f64> = (1..=n)
        .map(|k| sieve.normalized_nu(k))
        .collect::<Result<_>>()?;
    let lam_z: Vec<f64> = (1..=n).map(|k| lambda_bw(k, ctx)).collect();
    let (nut, pr) = extend_weight(
        &nu,
        m,
        Some(&lam_z),
        &sample_systems(cfg.degree),
        cfg.bad_box_k,
    )?;
    let majorant = average_weight(&nut, &sm.bohr)?;

    let (psi, _) = kernel_parametrization(v, 1)?;
    let theta = reduce_mod(&psi, v, m)?;
    let full = (1usize << t) - 1;
    let mut terms = Vec::with_capacity(full + 1);
    for mask in 0..=full {
        let fs: Vec<CyclicFn> = (0..t)
            .map(|i| {
                if mask >> i & 1 == 1 {
                    diff.clone()
                } else {
                    lp.clone()
                }
            })
            .collect();
        let value = t_operator(&theta, &fs, TMethod::Auto)?.value;
        let gvn = if mask == 0 {
            None
        } else {
            (0..t)
                .filter(|&i| mask >> i & 1 == 1)
                .find(|&i| theta.is_exact_normal_at(i, 1))
                .map(|i| gvn_check(&theta, Some(&majorant), &fs, i))
                .transpose()?
        };
        terms.push(ExpansionTerm { mask, value, gvn });
    }
    let sum: f64 = terms.iter().map(|e| e.value).sum();
    report.expansion_sum = sum;
    report.expansion_error = (sum - tc).abs();

    // main term through the level set and the increment engine
    let ls: LevelSetReport = level_set(&lp, alpha, cfg.level_fraction);
    let two_n = 2 * n;
    let inside: Vec<i64> = ls
        .elements
        .iter()
        .copied()
        .filter(|x| x.abs() <= two_n)
        .collect();
    let summary = LevelSetSummary {
        size: ls.elements.len(),
        threshold: ls.threshold,
        density: ls.density,
        density_in_box: inside.len() as f64 / (2 * two_n + 1) as f64,
        moments: ls.moments.clone(),
        fitted_c: ls.density / alpha.powf(1.2),
    };
    let inc = run_increment(v, &inside, two_n, &consts.increment)?;
    let r = v.rank();
    let lower_bound = (cfg.level_fraction * alpha).powi(t as i32)
        * inc.outcome.certified_bound as f64
        / (m as f64).powi((t - r) as i32);
    report.main = Some(MainTerm {
        level_set: summary,
        increment: Some(inc),
        lower_bound,
        actual: terms[0].value,
    });
    report.terms = terms;
    report.smoothing = Some(sm);
    report.majorant = Some(pr);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsys::systems;
    use crate::patterns::count_solutions_brute;

    fn cfg() -> (TransferenceConfig, Constants) {
        let c = Constants::default();
        (
            TransferenceConfig::from_constants(&c.transference).unwrap(),
            c,
        )
    }

    #[test]
    fn empty_set_gives_zero_terms() {
        let ctx = WTrickContext::new(200, 3.0, 1).unwrap();
        let (cfg, c) = cfg();
        let r = transference_pipeline(&systems::three_ap_matrix(), &ctx, &[], &cfg, &c).unwrap();
        assert!(r.terms.iter().all(|e| e.value == 0.0));
        assert_eq!(r.t_over_z, 0.0);
        assert_eq!(r.distinct_solutions, 0);
    }

    #[test]
    fn small_pipeline_identity() {
        let ctx = WTrickContext::new(300, 3.0, 1).unwrap();
        let a = w_tricked_primes(&ctx, None);
        let (cfg, c) = cfg();
        let v = systems::three_ap_matrix();
        let r = transference_pipeline(&v, &ctx, &a, &cfg, &c).unwrap();
        assert!(r.expansion_error < 1e-9, "{}", r.expansion_error);
        assert!((r.t_over_z - r.t_cyclic).abs() < 1e-9 * r.t_cyclic.max(1.0));
        assert_eq!(
            r.distinct_solutions,
            count_solutions_brute(&v, &a, true).unwrap()
        );
        assert!(r.distinct_solutions > 0);
        let main = r.main.unwrap();
        assert!(main.lower_bound <= main.actual + 1e-9);
    }
}

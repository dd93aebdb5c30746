//! Command-line front end: argument parsing, dispatch, output and exit codes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::increment::{
    run_increment, transference_pipeline, w_tricked_primes, Constants, TransferenceConfig,
};
use crate::linsys::text::{format_matrix, parse_matrix, parse_set, parse_system};
use crate::linsys::{
    kernel_basis_system, kernel_parametrization, matrix_complexity, matrix_complexity_witness,
    systems, Complexity, IntMatrix, LinearSystem, Partition,
};
use crate::patterns::{count_distinct_solutions, count_solutions, DEFAULT_BUDGET};
use crate::sieve::{
    c_chi2, correlation_harness, GpyConfig, GpySieve, LocalFactorTable, WTrickContext,
};

/// Default output directory when `--out` is absent.
pub const OUT_DIR_ENV: &str = "CPLX1_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "cplx1",
    version,
    about = "Complexity-one linear systems, GPY weights and density increments"
)]
pub struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Constants table (TOML); defaults to the bundled table
    #[arg(long, global = true, value_parser = existing_file)]
    pub constants: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file; otherwise $CPLX1_OUT_DIR/<command>.<ext>, otherwise stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0x5eed)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Human,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Complexity, normal forms, parametrizations and norms of a system
    Analyze(AnalyzeArgs),
    /// Linear-forms averages of the GPY weight and local-factor spot checks
    Gpy(GpyArgs),
    /// Count solutions of V y = 0 in A^t
    Count(CountArgs),
    /// Run the density increment on A ⊆ [−N, N]
    Increment(IncrementArgs),
    /// Transference pipeline on W-tricked primes
    Transfer(TransferArgs),
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long, value_parser = existing_file, conflicts_with = "system", required_unless_present = "system")]
    pub matrix: Option<PathBuf>,
    #[arg(long, value_parser = existing_file)]
    pub system: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GpyArgs {
    /// 3ap-small or linear-forms; explicit flags override preset values
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long = "N", alias = "n")]
    pub n: Option<u64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<i64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Samples per system (exhaustive below this)
    #[arg(long)]
    pub samples: Option<u64>,
    /// Systems: identity, 3ap, midpoints (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub systems: Option<Vec<String>>,
}

#[derive(Args, Debug)]
pub struct CountArgs {
    #[arg(long, value_parser = existing_file)]
    pub matrix: PathBuf,
    #[arg(long, value_parser = existing_file)]
    pub set: PathBuf,
    /// Also count pairwise-distinct solutions
    #[arg(long)]
    pub distinct: bool,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
}

#[derive(Args, Debug)]
pub struct IncrementArgs {
    #[arg(long, value_parser = existing_file)]
    pub matrix: PathBuf,
    #[arg(long, value_parser = existing_file)]
    pub set: PathBuf,
    /// Box half-width (default: max |a|)
    #[arg(long = "N", alias = "n")]
    pub n: Option<i64>,
}

#[derive(Args, Debug)]
pub struct TransferArgs {
    #[arg(long = "N", alias = "n")]
    pub n: u64,
    #[arg(long)]
    pub omega: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1)]
    pub b: i64,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, value_parser = existing_file)]
    pub matrix: Option<PathBuf>,
    /// Restrict A to W-tricked primes in [lo, hi]
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_hyphen_values = true)]
    pub window: Option<Vec<i64>>,
}

fn existing_file(s: &str) -> std::result::Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_file() {
        Ok(p)
    } else {
        Err(format!("no such file: {s}"))
    }
}

fn read(p: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(p)?)
}

#[derive(Serialize)]
struct IndexReport {
    index: usize,
    complexity: Complexity,
    partition: Option<Partition>,
    normal: Option<(usize, Vec<usize>)>,
}

#[derive(Serialize)]
struct Parametrization {
    psi: LinearSystem,
    phi: LinearSystem,
    psi_text: String,
    phi_text: String,
    psi_norm: String,
}

#[derive(Serialize)]
struct MatrixAnalysis {
    matrix: String,
    t: usize,
    rows: usize,
    rank: usize,
    translation_invariant: bool,
    complexity: Complexity,
    indices: Vec<IndexReport>,
    kernel_basis: Option<LinearSystem>,
    parametrization: Option<Parametrization>,
    parametrization_error: Option<String>,
    norm: String,
}

#[derive(Serialize)]
struct SystemAnalysis {
    system: String,
    t: usize,
    d: usize,
    complexity: Complexity,
    finite_complexity: bool,
    indices: Vec<IndexReport>,
    normal_one: bool,
    norm: String,
}

fn analyze_matrix(v: &IntMatrix) -> MatrixAnalysis {
    let t = v.cols();
    let psi = kernel_parametrization(v, 1);
    let indices = (0..t)
        .map(|i| {
            let (complexity, partition) = matrix_complexity_witness(v, i);
            let normal = psi
                .as_ref()
                .ok()
                .and_then(|(p, _)| p.exact_normal_witness(i, 1))
                .map(|j| (1, j));
            IndexReport {
                index: i,
                complexity,
                partition,
                normal,
            }
        })
        .collect();
    let (param, err) = match psi {
        Ok((psi, phi)) => (
            Some(Parametrization {
                psi_text: psi.to_string(),
                phi_text: phi.to_string(),
                psi_norm: psi.linear_norm().to_string(),
                psi,
                phi,
            }),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    };
    MatrixAnalysis {
        matrix: format_matrix(v),
        t,
        rows: v.rows(),
        rank: v.rank(),
        translation_invariant: v.is_translation_invariant(),
        complexity: matrix_complexity(v),
        indices,
        kernel_basis: kernel_basis_system(v).ok(),
        parametrization: param,
        parametrization_error: err,
        norm: v.l1_norm().to_string(),
    }
}

fn analyze_system(s: &LinearSystem) -> SystemAnalysis {
    let indices = (0..s.t())
        .map(|i| {
            let (complexity, partition) = s.complexity_witness(i);
            let normal = (0..=1).find_map(|si| s.exact_normal_witness(i, si).map(|j| (si, j)));
            IndexReport {
                index: i,
                complexity,
                partition,
                normal,
            }
        })
        .collect();
    SystemAnalysis {
        system: s.to_string(),
        t: s.t(),
        d: s.d(),
        complexity: s.complexity(),
        finite_complexity: s.has_finite_complexity(),
        indices,
        normal_one: s.is_normal(1),
        norm: s.norm(None).to_string(),
    }
}

#[derive(Serialize)]
struct GpyRow {
    system: String,
    t: usize,
    d: usize,
    box_side: u64,
    mean: f64,
    stderr: f64,
    samples: u64,
    exhaustive: bool,
    deviation: f64,
}

#[derive(Serialize)]
struct LocalCheck {
    system: String,
    p: u64,
    agree: bool,
}

#[derive(Serialize)]
struct GpyReport {
    n: u64,
    omega: f64,
    b: i64,
    eta: f64,
    r: f64,
    c_chi2: f64,
    rows: Vec<GpyRow>,
    local: Vec<LocalCheck>,
}

struct GpyParams {
    n: u64,
    omega: f64,
    b: i64,
    eta: f64,
    samples: u64,
    systems: Vec<String>,
}

fn gpy_params(a: &GpyArgs) -> Result<GpyParams> {
    let mut p = match a.preset.as_deref() {
        None | Some("3ap-small") => GpyParams {
            n: 10_000,
            omega: 5.0,
            b: 1,
            eta: 0.05,
            samples: 20000,
            systems: vec!["3ap".into()],
        },
        Some("linear-forms") => GpyParams {
            n: 100_000,
            omega: 5.0,
            b: 1,
            eta: 0.05,
            samples: 200_000,
            systems: vec!["identity".into(), "3ap".into(), "midpoints".into()],
        },
        Some(other) => return Err(Error::Validation(format!("unknown preset {other:?}"))),
    };
    if let Some(n) = a.n {
        p.n = n;
    }
    if let Some(o) = a.omega {
        p.omega = o;
    }
    if let Some(b) = a.b {
        p.b = b;
    }
    if let Some(e) = a.eta {
        p.eta = e;
    }
    if let Some(s) = a.samples {
        p.samples = s;
    }
    if let Some(s) = &a.systems {
        p.systems = s.clone();
    }
    if p.samples == 0 {
        return Err(Error::Validation(
            "empty sample: --samples must be positive".into(),
        ));
    }
    if p.systems.is_empty() {
        return Err(Error::Validation("no systems requested".into()));
    }
    Ok(p)
}

fn named_system(name: &str) -> Result<LinearSystem> {
    match name {
        "identity" => Ok(systems::identity()),
        "3ap" => Ok(systems::three_ap()),
        "midpoints" => Ok(systems::midpoints(2)),
        other => Err(Error::Validation(format!("unknown system {other:?}"))),
    }
}

fn cmd_gpy(a: &GpyArgs, seed: u64) -> Result<GpyReport> {
    let p = gpy_params(a)?;
    let ctx = WTrickContext::new(p.n, p.omega, p.b)?;
    let cfg = GpyConfig::new(&ctx, p.eta)?;
    let r = cfg.r;
    let sieve = GpySieve::new(ctx.clone(), cfg, ctx.max_value().min(1 << 31));
    let mut rows = Vec::new();
    let mut local = Vec::new();
    for name in &p.systems {
        let psi = named_system(name)?;
        // the box [P]^d keeps every form inside [N]
        let lead = (0..psi.t()).map(|i| {
            psi.form(i)
                .iter()
                .map(|c| c.magnitude().clone())
                .sum::<num_bigint::BigUint>()
        });
        let norm: u64 = lead
            .max()
            .and_then(|x| x.try_into().ok())
            .unwrap_or(1)
            .max(1);
        let side = (p.n / norm).max(1);
        let st = correlation_harness(&psi, side, &sieve, p.samples, seed)?;
        rows.push(GpyRow {
            system: name.clone(),
            t: psi.t(),
            d: psi.d(),
            box_side: side,
            mean: st.mean,
            stderr: st.stderr,
            samples: st.samples,
            exhaustive: st.exhaustive,
            deviation: st.deviation,
        });
        for q in [7u64, 11, 13] {
            let algebraic = LocalFactorTable::algebraic(q, &psi, &ctx);
            let enumerated = LocalFactorTable::enumerate(q, &psi, &ctx, 1 << 24)?;
            let agree =
                (0..1u32 << (2 * psi.t())).all(|b| algebraic.alpha(b) == enumerated.alpha(b));
            local.push(LocalCheck {
                system: name.clone(),
                p: q,
                agree,
            });
        }
    }
    Ok(GpyReport {
        n: p.n,
        omega: p.omega,
        b: p.b,
        eta: p.eta,
        r,
        c_chi2: c_chi2(),
        rows,
        local,
    })
}

#[derive(Serialize)]
struct CountReport {
    t: usize,
    set_size: usize,
    solutions: u64,
    distinct: Option<u64>,
}

fn cmd_count(a: &CountArgs) -> Result<CountReport> {
    let v = parse_matrix(&read(&a.matrix)?)?;
    let set = parse_set(&read(&a.set)?)?;
    let solutions = count_solutions(&v, &set, a.budget)?.exact.unwrap_or(0);
    let distinct = if a.distinct {
        count_distinct_solutions(&v, &set, a.budget)?.exact
    } else {
        None
    };
    Ok(CountReport {
        t: v.cols(),
        set_size: set.len(),
        solutions,
        distinct,
    })
}

fn load_constants(p: &Option<PathBuf>) -> Result<Constants> {
    match p {
        Some(p) => Constants::load(p),
        None => Ok(Constants::default()),
    }
}

/// Rendered output plus the exit code it implies.
struct Rendered {
    text: String,
    ext: &'static str,
    code: i32,
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Validation(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn human<T: Serialize>(v: &T) -> Result<String> {
    let value = serde_json::to_value(v).map_err(|e| Error::Validation(e.to_string()))?;
    let mut out = String::new();
    fn walk(out: &mut String, prefix: &str, v: &serde_json::Value) {
        match v {
            serde_json::Value::Object(map) => {
                for (k, x) in map {
                    let p = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(out, &p, x);
                }
            }
            serde_json::Value::Array(xs) if xs.iter().any(|x| x.is_object() || x.is_array()) => {
                for (i, x) in xs.iter().enumerate() {
                    walk(out, &format!("{prefix}[{i}]"), x);
                }
            }
            other => {
                let _ = writeln!(out, "{prefix}: {other}");
            }
        }
    }
    walk(&mut out, "", &value);
    Ok(out)
}

fn csv_table(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn render<T: Serialize>(
    v: &T,
    fmt: Format,
    csv: impl FnOnce() -> Option<String>,
) -> Result<(String, &'static str)> {
    Ok(match fmt {
        Format::Json => (json(v)?, "json"),
        Format::Human => (human(v)?, "txt"),
        Format::Csv => match csv() {
            Some(s) => (s, "csv"),
            None => {
                return Err(Error::Validation(
                    "this command has no CSV form; use --format json".into(),
                ))
            }
        },
    })
}

fn dispatch(cli: &Cli) -> Result<Rendered> {
    let fmt = cli.format;
    match &cli.command {
        Command::Analyze(a) => {
            let (text, ext) = match (&a.matrix, &a.system) {
                (Some(m), _) => {
                    let r = analyze_matrix(&parse_matrix(&read(m)?)?);
                    render(&r, fmt, || None)?
                }
                (None, Some(s)) => {
                    let r = analyze_system(&parse_system(&read(s)?)?);
                    render(&r, fmt, || None)?
                }
                (None, None) => return Err(Error::Validation("give --matrix or --system".into())),
            };
            Ok(Rendered { text, ext, code: 0 })
        }
        Command::Gpy(a) => {
            let r = cmd_gpy(a, cli.seed)?;
            let (text, ext) = render(&r, fmt, || {
                let rows = r
                    .rows
                    .iter()
                    .map(|x| {
                        vec![
                            x.system.clone(),
                            x.t.to_string(),
                            x.d.to_string(),
                            x.box_side.to_string(),
                            format!("{:.12e}", x.mean),
                            format!("{:.6e}", x.stderr),
                            x.samples.to_string(),
                            x.exhaustive.to_string(),
                            format!("{:.12e}", x.deviation),
                        ]
                    })
                    .collect();
                Some(csv_table(
                    &[
                        "system",
                        "t",
                        "d",
                        "box_side",
                        "mean",
                        "stderr",
                        "samples",
                        "exhaustive",
                        "deviation",
                    ],
                    rows,
                ))
            })?;
            let code = if r.local.iter().all(|c| c.agree) {
                0
            } else {
                3
            };
            Ok(Rendered { text, ext, code })
        }
        Command::Count(a) => {
            let r = cmd_count(a)?;
            let (text, ext) = render(&r, fmt, || {
                let d = r.distinct.map(|x| x.to_string()).unwrap_or_default();
                Some(csv_table(
                    &["t", "set_size", "solutions", "distinct"],
                    vec![vec![
                        r.t.to_string(),
                        r.set_size.to_string(),
                        r.solutions.to_string(),
                        d,
                    ]],
                ))
            })?;
            Ok(Rendered { text, ext, code: 0 })
        }
        Command::Increment(a) => {
            let c = load_constants(&cli.constants)?;
            let v = parse_matrix(&read(&a.matrix)?)?;
            let set = parse_set(&read(&a.set)?)?;
            let n =
                a.n.unwrap_or_else(|| set.iter().map(|x| x.abs()).max().unwrap_or(0).max(1));
            let r = run_increment(&v, &set, n, &c.increment)?;
            let (text, ext) = render(&r, fmt, || {
                let rows = r
                    .steps
                    .iter()
                    .map(|s| {
                        let case = match s.case {
                            crate::increment::Case::One { .. } => "1",
                            crate::increment::Case::Two { .. } => "2",
                        };
                        vec![
                            s.step.to_string(),
                            format!("{:.12e}", s.alpha),
                            s.dim.to_string(),
                            format!("{:.12e}", s.delta),
                            s.u.clone(),
                            s.m.clone(),
                            case.into(),
                        ]
                    })
                    .collect();
                Some(csv_table(
                    &["step", "alpha", "d", "delta", "u", "m", "case"],
                    rows,
                ))
            })?;
            Ok(Rendered { text, ext, code: 0 })
        }
        Command::Transfer(a) => {
            let c = load_constants(&cli.constants)?;
            let v = match &a.matrix {
                Some(p) => parse_matrix(&read(p)?)?,
                None => systems::three_ap_matrix(),
            };
            let ctx = WTrickContext::new(a.n, a.omega, a.b)?;
            let cfg = TransferenceConfig::new(
                a.delta.unwrap_or(c.transference.spectral_threshold),
                a.eps.unwrap_or(c.transference.bohr_radius),
                &c.transference,
            )?;
            let window = a.window.as_ref().map(|w| (w[0], w[1]));
            let set = w_tricked_primes(&ctx, window);
            let r = transference_pipeline(&v, &ctx, &set, &cfg, &c)?;
            let code = if r.expansion_error <= 1e-9 { 0 } else { 3 };
            let (text, ext) = render(&r, fmt, || {
                let rows = r
                    .terms
                    .iter()
                    .map(|e| vec![e.mask.to_string(), format!("{:.12e}", e.value)])
                    .collect();
                Some(csv_table(&["mask", "value"], rows))
            })?;
            Ok(Rendered { text, ext, code })
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Analyze(_) => "analyze",
        Command::Gpy(_) => "gpy",
        Command::Count(_) => "count",
        Command::Increment(_) => "increment",
        Command::Transfer(_) => "transfer",
    }
}

fn emit(cli: &Cli, r: &Rendered) -> Result<()> {
    let target = match (&cli.out, std::env::var_os(OUT_DIR_ENV)) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(dir)) => {
            let dir = PathBuf::from(dir);
            std::fs::create_dir_all(&dir)?;
            Some(dir.join(format!("{}.{}", command_name(&cli.command), r.ext)))
        }
        (None, None) => None,
    };
    match target {
        Some(p) => std::fs::write(p, &r.text)?,
        None => print!("{}", r.text),
    }
    Ok(())
}

/// Parse, run and report; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return 1;
        }
        // a second call (e.g. in tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match dispatch(&cli).and_then(|r| emit(&cli, &r).map(|_| r.code)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn analyze_three_ap() {
        let r = analyze_matrix(&systems::three_ap_matrix());
        assert!(r.translation_invariant);
        assert_eq!(r.complexity, Complexity::Finite(1));
        assert!(r.parametrization.is_some());
    }

    #[test]
    fn analyze_zero_matrix() {
        let r = analyze_matrix(&IntMatrix::from_i64(&[vec![0, 0, 0]]));
        assert!(r.translation_invariant);
        assert_eq!(r.rank, 0);
        assert!(r.parametrization.is_none() && r.parametrization_error.is_some());
    }

    #[test]
    fn analyze_midpoints() {
        let r = analyze_matrix(&systems::midpoints_matrix(2));
        assert_eq!(r.complexity, Complexity::Finite(1));
    }

    #[test]
    fn unknown_preset_and_empty_sample() {
        let base = GpyArgs {
            preset: None,
            n: None,
            omega: None,
            b: None,
            eta: None,
            samples: Some(0),
            systems: None,
        };
        assert!(matches!(gpy_params(&base), Err(Error::Validation(_))));
        let bad = GpyArgs {
            preset: Some("nope".into()),
            samples: None,
            ..base
        };
        assert!(gpy_params(&bad).is_err());
    }

    #[test]
    fn bad_arguments_exit_one() {
        assert_eq!(
            run([
                "cplx1",
                "count",
                "--matrix",
                "/nonexistent",
                "--set",
                "/nonexistent"
            ]),
            1
        );
        assert_eq!(run(["cplx1", "frobnicate"]), 1);
    }
}

//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::constants::{self, lower_bound, EstimateOpts, StabilityEstimate};
use crate::error::{Error, Result};
use crate::exact_algebra::{parse_fn_spec, PolyGaussFn};
use crate::functionals::deficits;
use crate::manifold::{
    dist_grad_norm_matched, dist_grad_to_shup, dist_l2_to_hup, dist_vector_cfhup, VectorMetric,
};
use crate::verify::{self, IdentityOpts, InequalityOpts, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const DIM_MIN: u32 = 2;
const DIM_MAX: u32 = 60;
const SUITE_DIM_MAX: u32 = 10;

#[derive(Debug, Parser)]
#[command(
    name = "hupstab",
    version,
    about = "Stability constants and deficits for the second-order uncertainty principle"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Numeric sector constants with their closed-form bounds.
    Constants(ConstantsArgs),
    /// Run a check suite.
    Verify(VerifyArgs),
    /// Deficits of a radial profile.
    Deficit(DeficitArgs),
    /// Distance of a radial profile to an optimizer family.
    Distance(DistanceArgs),
    /// Constants grid plus every suite, written as one JSON document.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Args)]
struct ConstantsArgs {
    /// Dimension range `A..B` (inclusive) or a single dimension.
    #[arg(long, value_parser = parse_dims)]
    dims: DimRange,
    #[arg(long, default_value_t = 1)]
    kmax: u32,
    /// Largest basis size.
    #[arg(long)]
    basis: Option<usize>,
    #[arg(long, value_enum, default_value_t = OutFormat::Table)]
    out: OutFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Identities,
    Inequalities,
    Sharpness,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    suite: Suite,
    #[arg(long)]
    dim: u32,
    /// Corpus size (identities default 100, inequalities default 200).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = OutFormat::Json)]
    out: OutFormat,
}

#[derive(Debug, Args)]
struct DeficitArgs {
    /// Function spec JSON, or `@path` to read it from a file.
    #[arg(long = "fn")]
    spec: String,
    #[arg(long)]
    dim: u32,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    order: u8,
    /// Echo the canonical spec of the parsed profile.
    #[arg(long)]
    emit_spec: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Hup,
    Shup,
    Cfhup,
}

#[derive(Debug, Args)]
struct DistanceArgs {
    #[arg(long = "fn")]
    spec: String,
    #[arg(long)]
    dim: u32,
    #[arg(long, value_enum)]
    set: Family,
    /// Restrict to members with the same gradient norm.
    #[arg(long)]
    match_norm: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long, value_parser = parse_dims)]
    dims: DimRange,
    #[arg(long, default_value_t = 1)]
    kmax: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimRange {
    pub lo: u32,
    pub hi: u32,
}

impl DimRange {
    pub fn iter(self) -> impl Iterator<Item = u32> {
        self.lo..=self.hi
    }
}

pub fn parse_dims(s: &str) -> std::result::Result<DimRange, String> {
    let num = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("bad dimension {t:?}: {e}"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.strip_prefix('=').unwrap_or(b))?),
        None => {
            let n = num(s)?;
            (n, n)
        }
    };
    if lo > hi {
        return Err(format!("empty range {s}"));
    }
    if lo < DIM_MIN || hi > DIM_MAX {
        return Err(format!("dimensions must lie in [{DIM_MIN}, {DIM_MAX}], got {s}"));
    }
    Ok(DimRange { lo, hi })
}

/// Validated settings shared by every command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dims: DimRange,
    pub kmax: u32,
    pub trials: Option<usize>,
    pub seed: u64,
    pub tol: f64,
    pub basis: Option<usize>,
    pub out_format: OutFormat,
    pub out_path: Option<PathBuf>,
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if self.dims.lo < DIM_MIN || self.dims.hi > DIM_MAX || self.dims.lo > self.dims.hi {
            return Err(Error::Domain(format!("dimensions must lie in [{DIM_MIN}, {DIM_MAX}]")));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Domain(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.basis == Some(0) {
            return Err(Error::Domain("basis size must be positive".into()));
        }
        if self.trials == Some(0) {
            return Err(Error::Domain("trials must be positive".into()));
        }
        Ok(())
    }

    fn estimate_opts(&self) -> EstimateOpts {
        let mut opts = EstimateOpts::default();
        if let Some(m) = self.basis {
            let prev = (2 * m).div_ceil(3);
            opts.m_list = if prev < m { vec![prev, m] } else { vec![m] };
        }
        opts
    }

    fn base(dims: DimRange) -> Self {
        RunConfig {
            dims,
            kmax: 1,
            trials: None,
            seed: 0,
            tol: 1e-9,
            basis: None,
            out_format: OutFormat::Json,
            out_path: None,
        }
    }
}

/// Caps rayon's global pool at `HUPSTAB_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("HUPSTAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Domain(format!("HUPSTAB_THREADS must be a positive integer, got {v:?}")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Spec { .. }
            | Error::Domain(_)
            | Error::WrongParity { .. }
            | Error::UnsupportedSector(_)
            | Error::Degenerate(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = std::result::Result<bool, Failure>;

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        let _ = writeln!(err, "error: {e}");
        return EXIT_USAGE;
    }
    let result = match cli.command {
        Command::Constants(a) => cmd_constants(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Deficit(a) => cmd_deficit(a, out),
        Command::Distance(a) => cmd_distance(a, out),
        Command::Report(a) => cmd_report(a, out),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILED,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_FAILED
        }
    }
}

pub fn main_with_args() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable output")
}

fn read_spec(arg: &str) -> Result<PolyGaussFn> {
    match arg.strip_prefix('@') {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Domain(format!("cannot read {path}: {e}")))?;
            parse_fn_spec(&text)
        }
        None => parse_fn_spec(arg),
    }
}

fn check_numeric_dim(n: u32) -> Result<()> {
    RunConfig::base(DimRange { lo: n, hi: n }).validate()
}

fn estimates_table(rows: &[StabilityEstimate]) -> String {
    let mut s = format!(
        "{:>3} {:>2} {:>14} {:>14} {:>4} {:>14} {:>14} {:>9}\n",
        "N", "k", "value", "lower", "2k", "gaussian", "reference", "converged"
    );
    let cell = |v: Option<f64>| v.map(|x| format!("{x:.10}")).unwrap_or_else(|| "-".into());
    for e in rows {
        s.push_str(&format!(
            "{:>3} {:>2} {:>14} {:>14.10} {:>4} {:>14.10} {:>14} {:>9}\n",
            e.n,
            e.k,
            cell(e.value),
            e.lower,
            e.upper,
            e.gaussian_quotient,
            cell(e.reference),
            e.converged
        ));
    }
    s
}

fn estimates_csv(rows: &[StabilityEstimate]) -> String {
    let mut s = format!("{}\n{}\n", verify::CSV_HEADER, constants::CSV_COLUMNS);
    for e in rows {
        s.push_str(&constants::csv_row(e));
        s.push('\n');
    }
    s
}

/// A converged value outside its bounds counts as a failed check.
fn estimates_ok(rows: &[StabilityEstimate]) -> bool {
    rows.iter().all(|e| !e.converged || e.sandwich_ok())
}

fn cmd_constants(a: ConstantsArgs, out: &mut dyn Write) -> Outcome {
    let cfg = RunConfig { kmax: a.kmax, basis: a.basis, out_format: a.out, ..RunConfig::base(a.dims) };
    cfg.validate()?;
    let dims: Vec<u32> = cfg.dims.iter().collect();
    let ks: Vec<u32> = (0..=cfg.kmax).collect();
    let rows = constants::sweep(&dims, &ks, &cfg.estimate_opts())?;
    let text = match cfg.out_format {
        OutFormat::Json => to_json(&rows) + "\n",
        OutFormat::Csv => estimates_csv(&rows),
        OutFormat::Table => estimates_table(&rows),
    };
    out.write_all(text.as_bytes())?;
    Ok(estimates_ok(&rows))
}

fn suite_report(suite: Suite, n: u32, cfg: &RunConfig) -> Result<Report> {
    if !(DIM_MIN..=SUITE_DIM_MAX).contains(&n) {
        return Err(Error::Domain(format!("suites run for dimensions {DIM_MIN}..={SUITE_DIM_MAX}, got {n}")));
    }
    let (name, checks) = match suite {
        Suite::Identities => {
            let opts = IdentityOpts {
                tol: cfg.tol,
                corpus_size: cfg.trials.unwrap_or(100),
                seed: cfg.seed,
                ..Default::default()
            };
            ("identities", verify::run_identity_suite(n, &opts)?)
        }
        Suite::Inequalities => {
            let opts = InequalityOpts {
                tol: cfg.tol,
                trials: cfg.trials.unwrap_or(200),
                seed: cfg.seed,
                ..Default::default()
            };
            ("inequalities", verify::run_inequality_suite(n, &opts)?)
        }
        Suite::Sharpness => ("sharpness", vec![verify::sharpness_probe(n, &cfg.estimate_opts())?]),
    };
    Ok(Report { suite: name.into(), n, seed: cfg.seed, checks })
}

fn cmd_verify(a: VerifyArgs, out: &mut dyn Write) -> Outcome {
    let cfg = RunConfig {
        trials: a.trials,
        seed: a.seed,
        tol: a.tol,
        out_format: a.out,
        ..RunConfig::base(DimRange { lo: a.dim, hi: a.dim })
    };
    cfg.validate()?;
    let report = suite_report(a.suite, a.dim, &cfg)?;
    let text = match cfg.out_format {
        OutFormat::Json => report.to_json() + "\n",
        OutFormat::Csv => report.to_csv(),
        OutFormat::Table => {
            let mut s = format!("{} N={} seed={}\n", report.suite, report.n, report.seed);
            for c in &report.checks {
                s.push_str(&format!(
                    "{:<34} {:>13.6e} {:>10.3e} {}\n",
                    c.name,
                    c.residual,
                    c.tolerance,
                    if c.passed { "pass" } else { "FAIL" }
                ));
            }
            s
        }
    };
    out.write_all(text.as_bytes())?;
    Ok(report.passed())
}

fn cmd_deficit(a: DeficitArgs, out: &mut dyn Write) -> Outcome {
    check_numeric_dim(a.dim)?;
    let u = read_spec(&a.spec)?;
    let d = deficits(&u, a.dim)?;
    let values = match a.order {
        1 => vec![("theta1", d.theta1), ("theta2", d.theta2), ("theta3", d.theta3)],
        _ => vec![("delta1", d.delta1), ("delta2", d.delta2), ("delta3", d.delta3)],
    };
    let mut text = String::new();
    for (k, v) in &values {
        text.push_str(&format!("{k} = {v:e}\n"));
    }
    if a.emit_spec {
        text.push_str(&serde_json::to_string(&u).expect("spec serializes"));
        text.push('\n');
    }
    out.write_all(text.as_bytes())?;
    Ok(true)
}

fn cmd_distance(a: DistanceArgs, out: &mut dyn Write) -> Outcome {
    check_numeric_dim(a.dim)?;
    let u = read_spec(&a.spec)?;
    let n = a.dim;
    let r = match (a.set, a.match_norm) {
        (Family::Hup, false) => dist_l2_to_hup(&u, n)?,
        (Family::Hup, true) => {
            return Err(Failure::Usage("--match-norm applies to shup and cfhup only".into()));
        }
        (Family::Shup, false) => dist_grad_to_shup(&u, n)?,
        (Family::Shup, true) => dist_grad_norm_matched(&u, n)?,
        (Family::Cfhup, false) => dist_vector_cfhup(&u, n, VectorMetric::L2)?,
        (Family::Cfhup, true) => dist_vector_cfhup(&u, n, VectorMetric::NormMatched)?,
    };
    out.write_all((to_json(&r) + "\n").as_bytes())?;
    Ok(r.converged)
}

#[derive(Serialize)]
struct FullReport {
    seed: u64,
    constants: Vec<StabilityEstimate>,
    /// `(N, k, lower_bound(N,k))` rows showing every higher sector sits
    /// above the numeric `k = 1` value.
    certificates: Vec<(u32, u32, f64)>,
    suites: Vec<Report>,
}

fn cmd_report(a: ReportArgs, out: &mut dyn Write) -> Outcome {
    let cfg =
        RunConfig { kmax: a.kmax, seed: a.seed, out_path: Some(a.out.clone()), ..RunConfig::base(a.dims) };
    cfg.validate()?;
    let dims: Vec<u32> = cfg.dims.iter().collect();
    let ks: Vec<u32> = (0..=cfg.kmax.max(1)).collect();
    let rows = constants::sweep(&dims, &ks, &cfg.estimate_opts())?;
    let mut ok = estimates_ok(&rows);
    let mut certificates = Vec::new();
    for e in rows.iter().filter(|e| e.k == 1) {
        if let Some(v) = e.value {
            for k in 2..=cfg.kmax {
                let lb = lower_bound(e.n, k);
                ok &= lb > v;
                certificates.push((e.n, k, lb));
            }
        }
    }
    let mut suites = Vec::new();
    for n in dims.iter().copied().filter(|&n| n <= SUITE_DIM_MAX) {
        for s in [Suite::Identities, Suite::Inequalities, Suite::Sharpness] {
            let r = suite_report(s, n, &cfg)?;
            ok &= r.passed();
            suites.push(r);
        }
    }
    let doc = FullReport { seed: cfg.seed, constants: rows, certificates, suites };
    std::fs::write(&a.out, to_json(&doc) + "\n")?;
    writeln!(out, "report written to {}", a.out.display())?;
    Ok(ok)
}

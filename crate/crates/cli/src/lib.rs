//! Command-line front end: argument parsing, report serialization and the
//! regression suite behind `superpsc examples`.

pub mod suite;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use superpsc::criteria::{classify, Classification, CriteriaPointData, L2Variant, Verdict};
use superpsc::expr::{builtin, parse, DomainSpec, BUILTIN_NAMES};
use superpsc::fefferman::{domain_defect_scan, log_spaced, Approximation};
use superpsc::solver::{radial_residual, solve_radial, RadialOptions};
use superpsc::spectrum::{mc_rayleigh, rayleigh_scan, s_grid, RayleighPoint};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_ASSERTION: i32 = 3;

pub const CHECK_SCHEMA: &str = "superpsc.check/1";
pub const EXAMPLES_SCHEMA: &str = "superpsc.examples/1";

#[derive(Debug, Parser)]
#[command(name = "superpsc", version, about = "Checks super-pseudoconvexity and related Monge–Ampère quantities")]
pub struct Cli {
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a domain from boundary samples and write a JSON report.
    Check(CheckArgs),
    /// Run the regression suite and print PASS/FAIL per assertion.
    Examples(ExamplesArgs),
    /// Defect-order scan of the approximate solutions along inward rays.
    Approx(ApproxArgs),
    /// Solve the radial equation on the ball and write the profile as CSV.
    SolveRadial(SolveArgs),
    /// Rayleigh quotients of the test family on a grid of exponents.
    Spectrum(SpectrumArgs),
}

/// How the domain is given.
#[derive(Debug, Clone, Args)]
pub struct DomainArgs {
    /// Built-in domain name.
    #[arg(long, conflicts_with = "expr")]
    pub domain: Option<String>,
    /// Defining function over `x1, y1, re(z1), im(z1), abs2(z1), bump(t, delta)`.
    #[arg(long)]
    pub expr: Option<String>,
    /// Complex dimension.
    #[arg(long)]
    pub n: Option<usize>,
    /// Ellipsoid coefficients of `x_j²`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub a: Vec<f64>,
    /// Ellipsoid coefficients of `y_j²`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub b: Vec<f64>,
    /// Extra built-in parameter `key=value`; repeatable.
    #[arg(long = "param", value_parser = parse_key_value)]
    pub params: Vec<(String, f64)>,
    /// Interior point for `--expr`, real coordinates comma separated.
    #[arg(long, value_delimiter = ',')]
    pub interior: Vec<f64>,
    /// Radius beyond which `--expr` rays are outside the domain.
    #[arg(long, default_value_t = 4.0)]
    pub radius: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol_boundary: f64,
    #[arg(long, default_value = "eq311", value_parser = parse_variant)]
    pub l2_variant: L2Variant,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include wall-clock timing in the report.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ExamplesArgs {
    /// Run a single group.
    #[arg(long)]
    pub only: Option<String>,
    /// Also write the assertions as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ApproxKind {
    Rho0,
    Rho1,
}

#[derive(Debug, Clone, Args)]
pub struct ApproxArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    #[arg(long, default_value_t = 10)]
    pub rays: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Depths as `max:min:count`, log-spaced.
    #[arg(long, default_value = "1e-1:1e-3:5", value_parser = parse_depths)]
    pub depths: (f64, f64, usize),
    #[arg(long, value_enum, default_value = "rho1")]
    pub approximation: ApproxKind,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 2000)]
    pub nodes: usize,
    /// The mesh stops at `t = 1 − eps_grid`.
    #[arg(long, default_value_t = 1e-2)]
    pub eps_grid: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 60)]
    pub max_iter: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SpectrumMethod {
    /// Radial quadrature on the ball.
    Quadrature,
    /// Monte Carlo over any domain.
    Mc,
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    /// Exponent grid `lo:hi:step`.
    #[arg(long = "s", default_value = "1.2:3.0:0.1", value_parser = parse_grid)]
    pub grid: (f64, f64, f64),
    /// Cutoff width near the boundary.
    #[arg(long, default_value_t = 1e-8)]
    pub eps_c: f64,
    #[arg(long, value_enum, default_value = "quadrature")]
    pub method: SpectrumMethod,
    /// Monte Carlo draws per exponent.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure with its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        EXIT_USAGE
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn failed(e: impl ToString) -> CliError {
    CliError::Failed(e.to_string())
}

fn parse_key_value(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected key=value")?;
    let v: f64 = v.trim().parse().map_err(|e| format!("bad value for {k}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_variant(s: &str) -> Result<L2Variant, String> {
    s.parse()
}

fn parse_grid(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err("expected lo:hi:step".into());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    if !(v[2] > 0.0 && v[1] >= v[0]) {
        return Err("need step > 0 and hi >= lo".into());
    }
    Ok((v[0], v[1], v[2]))
}

fn parse_depths(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err("expected max:min:count".into());
    }
    let hi: f64 = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let lo: f64 = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    let count: usize = parts[2].trim().parse().map_err(|e| format!("{e}"))?;
    if !(hi > lo && lo > 0.0 && count >= 2) {
        return Err("need max > min > 0 and count >= 2".into());
    }
    Ok((hi, lo, count))
}

/// Builds the domain from `--domain`/`--expr`, falling back to `default`.
pub fn resolve_domain(args: &DomainArgs, default: Option<&str>) -> Result<DomainSpec, CliError> {
    if let Some(src) = &args.expr {
        let n = args.n.ok_or_else(|| usage("--expr needs --n"))?;
        let ast = parse(src, n).map_err(|e| usage(e.to_string()))?;
        let interior = if args.interior.is_empty() {
            None
        } else if args.interior.len() == 2 * n {
            Some(args.interior.clone())
        } else {
            return Err(usage(format!("--interior needs {} coordinates", 2 * n)));
        };
        return DomainSpec::from_expr("expr", ast, interior, args.radius).map_err(|e| usage(e.to_string()));
    }
    let name = args
        .domain
        .as_deref()
        .or(default)
        .ok_or_else(|| usage(format!("give --domain ({}) or --expr with --n", BUILTIN_NAMES.join(", "))))?;
    let mut params = BTreeMap::new();
    let fixed_dimension = matches!(name, "example51" | "disc_perturbed");
    if let (Some(n), false) = (args.n, fixed_dimension) {
        params.insert("n".to_string(), n as f64);
    }
    for (j, v) in args.a.iter().enumerate() {
        params.insert(format!("a{}", j + 1), *v);
    }
    for (j, v) in args.b.iter().enumerate() {
        params.insert(format!("b{}", j + 1), *v);
    }
    for (k, v) in &args.params {
        params.insert(k.clone(), *v);
    }
    let d = builtin(name, &params).map_err(|e| usage(e.to_string()))?;
    if let Some(n) = args.n {
        if n != d.n {
            return Err(usage(format!("{name} lives in dimension {}, not {n}", d.n)));
        }
    }
    Ok(d)
}

fn sink<'a>(out: &Option<PathBuf>, stdout: &'a mut (dyn Write + Send)) -> Result<Box<dyn Write + 'a>, CliError> {
    Ok(match out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(stdout),
    })
}

#[derive(Debug, Serialize)]
struct CheckOptions {
    samples: usize,
    seed: u64,
    tol_boundary: f64,
    l2_variant: L2Variant,
}

#[derive(Debug, Serialize)]
struct Timing {
    elapsed_ms: u128,
}

#[derive(Debug, Serialize)]
struct Failure {
    index: usize,
    error: String,
}

/// JSON report of `check`.
#[derive(Debug, Serialize)]
struct CheckReport<'a> {
    schema: &'static str,
    tool_version: &'static str,
    domain: &'a DomainSpec,
    options: CheckOptions,
    verdict: &'a Verdict,
    warnings: Vec<String>,
    failures: Vec<Failure>,
    rows: &'a [CriteriaPointData],
    #[serde(skip_serializing_if = "Option::is_none")]
    timing: Option<Timing>,
}

fn warnings_for(rows: &[CriteriaPointData], verdict: &Verdict, failures: usize) -> Vec<String> {
    let mut flags: BTreeMap<&str, usize> = BTreeMap::new();
    for r in rows {
        for f in &r.flags {
            *flags.entry(f.as_str()).or_default() += 1;
        }
    }
    let mut w: Vec<String> = flags.iter().map(|(f, c)| format!("{c} samples flagged {f}")).collect();
    if verdict.shortfall > 0 {
        w.push(format!("{} boundary samples could not be located", verdict.shortfall));
    }
    if failures > 0 {
        w.push(format!("{failures} samples failed to evaluate"));
    }
    if verdict.shift > 0.0 {
        w.push(format!(
            "H(r) is not positive definite on the boundary; criteria use r + (a/2) r² with a = {}",
            verdict.shift
        ));
    }
    if verdict.at_tolerance {
        w.push("margin is within tolerance of zero".to_string());
    }
    w
}

fn cmd_check(a: &CheckArgs, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> Result<i32, CliError> {
    let domain = resolve_domain(&a.domain, None)?;
    if a.samples == 0 {
        return Err(usage("--samples must be positive"));
    }
    let start = Instant::now();
    let c = classify(&domain, a.samples, a.seed, a.l2_variant, a.tol_boundary).map_err(failed)?;
    let report = CheckReport {
        schema: CHECK_SCHEMA,
        tool_version: env!("CARGO_PKG_VERSION"),
        domain: &domain,
        options: CheckOptions {
            samples: a.samples,
            seed: a.seed,
            tol_boundary: a.tol_boundary,
            l2_variant: a.l2_variant,
        },
        verdict: &c.verdict,
        warnings: warnings_for(&c.rows, &c.verdict, c.failures.len()),
        failures: c
            .failures
            .iter()
            .map(|(index, error)| Failure { index: *index, error: error.clone() })
            .collect(),
        rows: &c.rows,
        timing: a.timing.then(|| Timing { elapsed_ms: start.elapsed().as_millis() }),
    };
    let mut w = sink(&a.out, stdout)?;
    serde_json::to_writer_pretty(&mut w, &report).map_err(failed)?;
    writeln!(w)?;
    w.flush()?;
    let v = &c.verdict;
    writeln!(
        stderr,
        "{}: {}, margin {:.6e}, {}, {} samples",
        domain.name,
        serde_name(&v.classification),
        v.margin,
        serde_name(&v.convexity),
        v.samples_used
    )?;
    Ok(if v.classification == Classification::Inconclusive {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_OK
    })
}

fn serde_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_string))
        .unwrap_or_default()
}

#[derive(Debug, Serialize)]
struct ExamplesReport<'a> {
    schema: &'static str,
    tool_version: &'static str,
    passed: usize,
    failed: usize,
    assertions: &'a [suite::Assertion],
}

fn cmd_examples(a: &ExamplesArgs, stdout: &mut (dyn Write + Send)) -> Result<i32, CliError> {
    if let Some(g) = &a.only {
        if !suite::GROUPS.contains(&g.as_str()) {
            return Err(usage(format!("unknown group {g}; choose one of {}", suite::GROUPS.join(", "))));
        }
    }
    let results = suite::run_suite(a.only.as_deref());
    for r in &results {
        writeln!(stdout, "{}", r.line())?;
    }
    let failed_names: Vec<String> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{}.{}", r.group, r.name))
        .collect();
    writeln!(
        stdout,
        "{} passed, {} failed{}",
        results.len() - failed_names.len(),
        failed_names.len(),
        if failed_names.is_empty() {
            String::new()
        } else {
            format!(": {}", failed_names.join(", "))
        }
    )?;
    if let Some(p) = &a.out {
        let report = ExamplesReport {
            schema: EXAMPLES_SCHEMA,
            tool_version: env!("CARGO_PKG_VERSION"),
            passed: results.len() - failed_names.len(),
            failed: failed_names.len(),
            assertions: &results,
        };
        let mut f = File::create(p)?;
        serde_json::to_writer_pretty(&mut f, &report).map_err(failed)?;
        writeln!(f)?;
    }
    Ok(if failed_names.is_empty() { EXIT_OK } else { EXIT_ASSERTION })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

fn cmd_approx(a: &ApproxArgs, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> Result<i32, CliError> {
    let domain = resolve_domain(&a.domain, Some("ellipsoid"))?;
    if a.rays == 0 {
        return Err(usage("--rays must be positive"));
    }
    let which = match a.approximation {
        ApproxKind::Rho0 => Approximation::Rho0,
        ApproxKind::Rho1 => Approximation::Rho1,
    };
    let depths = log_spaced(a.depths.0, a.depths.1, a.depths.2);
    let scan = domain_defect_scan(&domain, a.rays, a.seed, &depths, which).map_err(failed)?;
    let mut w = csv::Writer::from_writer(sink(&a.out, stdout)?);
    w.write_record(["ray", "slope", "min_defect", "max_defect", "exact"]).map_err(failed)?;
    for (k, ray) in scan.rays.iter().enumerate() {
        let lo = ray.defects.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ray.defects.iter().copied().fold(0.0, f64::max);
        w.write_record([
            k.to_string(),
            fmt_opt(ray.slope),
            format!("{lo:.6e}"),
            format!("{hi:.6e}"),
            ray.exact.to_string(),
        ])
        .map_err(failed)?;
    }
    w.flush()?;
    if scan.exact {
        writeln!(stderr, "exact: every defect is below roundoff")?;
    } else {
        writeln!(
            stderr,
            "uniform_slope={} min_ray_slope={}",
            fmt_opt(scan.uniform_slope),
            fmt_opt(scan.min_ray_slope)
        )?;
    }
    Ok(EXIT_OK)
}

/// Part of the radial mesh where the exact solution is compared.
pub const RADIAL_COMPARE_UP_TO: f64 = 0.99;

fn cmd_solve_radial(a: &SolveArgs, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> Result<i32, CliError> {
    let opts = RadialOptions {
        n: a.n,
        nodes: a.nodes,
        eps_grid: a.eps_grid,
        tol: a.tol,
        max_iter: a.max_iter,
    };
    let p = solve_radial(&opts).map_err(|e| match e {
        superpsc::solver::SolverError::Diverged { .. } => failed(e),
        other => usage(other.to_string()),
    })?;
    let mut w = csv::Writer::from_writer(sink(&a.out, stdout)?);
    w.write_record(["t", "f", "fp", "rho", "residual"]).map_err(failed)?;
    for k in 0..p.t.len() {
        w.write_record([
            format!("{:.17e}", p.t[k]),
            format!("{:.17e}", p.f[k]),
            format!("{:.17e}", p.fp[k]),
            format!("{:.17e}", p.rho[k]),
            format!("{:.6e}", radial_residual(&p, k)),
        ])
        .map_err(failed)?;
    }
    w.flush()?;
    let identity = (0..p.t.len()).map(|k| p.log_identity_residual(k)).fold(0.0, f64::max);
    writeln!(
        stderr,
        "max_error={:.6e} (t <= {RADIAL_COMPARE_UP_TO}) rho_error={:.6e} identity_residual={:.3e} iterations={} relative_residual={:.3e}{}",
        p.max_deviation_from_ball(RADIAL_COMPARE_UP_TO),
        p.max_rho_deviation(RADIAL_COMPARE_UP_TO),
        identity,
        p.iterations,
        p.final_residual,
        if p.stopped_at_roundoff { " (stopped at roundoff)" } else { "" }
    )?;
    Ok(EXIT_OK)
}

fn cmd_spectrum(a: &SpectrumArgs, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> Result<i32, CliError> {
    let grid = s_grid(a.grid.0, a.grid.1, a.grid.2);
    let points: Vec<RayleighPoint> = match a.method {
        SpectrumMethod::Quadrature => {
            if a.domain.expr.is_some() || a.domain.domain.as_deref().is_some_and(|d| d != "ball") {
                return Err(usage("quadrature works on the ball only; use --method mc for other domains"));
            }
            let n = a.domain.n.unwrap_or(2);
            rayleigh_scan(n, &grid, a.eps_c).map_err(|e| usage(e.to_string()))?
        }
        SpectrumMethod::Mc => {
            let domain = resolve_domain(&a.domain, Some("ball"))?;
            grid.iter()
                .map(|&s| mc_rayleigh(&domain, s, a.eps_c, a.samples, a.seed))
                .collect::<Result<_, _>>()
                .map_err(|e| usage(e.to_string()))?
        }
    };
    let mut w = csv::Writer::from_writer(sink(&a.out, stdout)?);
    w.write_record(["s", "quotient", "stderr"]).map_err(failed)?;
    for p in &points {
        w.write_record([format!("{:.6}", p.s), format!("{:.12e}", p.quotient), format!("{:.3e}", p.stderr)])
            .map_err(failed)?;
    }
    w.flush()?;
    if let Some(best) = points.iter().min_by(|x, y| x.quotient.total_cmp(&y.quotient)) {
        writeln!(stderr, "min_quotient={:.9} at s={:.6}", best.quotient, best.s)?;
    }
    Ok(EXIT_OK)
}

/// Runs one parsed command line.
pub fn run(cli: &Cli, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> Result<i32, CliError> {
    let go = |stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)| match &cli.command {
        Command::Check(a) => cmd_check(a, stdout, stderr),
        Command::Examples(a) => cmd_examples(a, stdout),
        Command::Approx(a) => cmd_approx(a, stdout, stderr),
        Command::SolveRadial(a) => cmd_solve_radial(a, stdout, stderr),
        Command::Spectrum(a) => cmd_spectrum(a, stdout, stderr),
    };
    match cli.threads {
        Some(0) => Err(usage("--threads must be positive")),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build().map_err(failed)?;
            pool.install(|| go(stdout, stderr))
        }
        None => go(stdout, stderr),
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    match run(&cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

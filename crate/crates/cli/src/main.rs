//! `augpdg` command-line front end.
//!
//! Exit codes:
//!
//! | code | meaning                                              |
//! |------|------------------------------------------------------|
//! | 0    | success                                              |
//! | 1    | unreadable or invalid input                          |
//! | 2    | iteration limit reached before convergence           |
//! | 3    | divergence                                           |
//! | 4    | certificate could not be built (LICQ, positivity)    |
//! | 5    | `check` found a declared constant contradicted       |

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use augpdg::bench::{run_experiment, ExperimentPlan, RunStatus};
use augpdg::certificate::{build_certificate, CertificateOptions, DEFAULT_SAFETY};
use augpdg::linalg::stacked_norm;
use augpdg::oracle::{estimate_mu, estimate_smoothness};
use augpdg::problem::{DeclaredConstants, ProblemFile, ProblemSpec};
use augpdg::solver::{
    run, Monitor, SolverConfig, Termination, Trace, DEFAULT_MAX_ITERS, DEFAULT_STOP_TOL,
};
use augpdg::Error;
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

const EXIT_INPUT: u8 = 1;
const EXIT_MAX_ITERS: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_CERTIFICATE: u8 = 4;
const EXIT_CONTRADICTED: u8 = 5;

/// Samples drawn by `check` for each estimator.
const CHECK_SAMPLES: usize = 4000;
/// Relative slack before an estimate counts as contradicting a declaration.
const CHECK_SLACK: f64 = 1e-9;

#[derive(Parser, Debug)]
#[command(
    name = "augpdg",
    version,
    about = "Augmented primal-dual gradient solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the iteration on a problem file; writes trace.csv and solution.txt.
    Solve(Common),
    /// Build the linear-rate certificate at the file's reference solution
    /// (or at a converged solve when the file has none); writes certificate.txt.
    Certify {
        #[command(flatten)]
        common: Common,
        /// Initial distance the certificate covers [default: distance of the
        /// file's initial point, or the origin, from the solution]
        #[arg(long, value_parser = parse_positive)]
        d0: Option<f64>,
        /// Fraction of the admissible bound used for delta and alpha
        #[arg(long, default_value_t = DEFAULT_SAFETY, value_parser = parse_positive)]
        safety: f64,
    },
    /// Run the ten-bus power-flow experiment; FILE is an optional JSON plan.
    Bench(BenchArgs),
    /// Compare declared constants with sampled estimates; writes check.txt.
    Check(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Solve(_) => "solve",
            Self::Certify { .. } => "certify",
            Self::Bench(_) => "bench",
            Self::Check(_) => "check",
        }
    }

    fn flags(&self) -> &Overrides {
        match self {
            Self::Solve(c) | Self::Check(c) => &c.flags,
            Self::Certify { common, .. } => &common.flags,
            Self::Bench(b) => &b.flags,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct Overrides {
    /// Stepsize
    #[arg(long, value_parser = parse_positive)]
    alpha: Option<f64>,
    /// Penalty parameter
    #[arg(long, value_parser = parse_positive)]
    rho: Option<f64>,
    /// Iteration limit (accepts 1e5)
    #[arg(long, value_parser = parse_count)]
    max_iters: Option<usize>,
    /// Stop once stationarity + fixed-point gap falls below this
    #[arg(long, value_parser = parse_positive)]
    stop_tol: Option<f64>,
    /// Seed for every random draw
    #[arg(long, value_parser = parse_seed)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "augpdg-out")]
    out: PathBuf,
    /// More progress output on stderr (-v, -vv)
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Args, Debug)]
struct Common {
    #[command(flatten)]
    flags: Overrides,
    /// Problem file (JSON)
    file: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    flags: Overrides,
    /// Experiment plan (JSON) [default: rho = alpha = 0.1, d0 in {0.1, 5, 10}, 10 seeds]
    file: Option<PathBuf>,
}

const DEFAULT_ALPHA: f64 = 0.1;
const DEFAULT_RHO: f64 = 0.1;
const DEFAULT_SEED: u64 = 0;

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .parse()
        .map_err(|e| format!("`{s}` is not a number: {e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("`{s}` must be a positive finite number"))
    }
}

/// Integer given in plain or scientific notation (`20000`, `2e4`).
fn parse_count(s: &str) -> Result<usize, String> {
    if let Ok(v) = s.parse::<usize>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a count"))?;
    if v >= 0.0 && v.fract() == 0.0 && v <= usize::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(format!("`{s}` is not a nonnegative integer"))
    }
}

fn parse_seed(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    parse_count(s).map(|v| v as u64)
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Certificate(_) => EXIT_CERTIFICATE,
            Error::Numeric { .. } => EXIT_DIVERGED,
            _ => EXIT_INPUT,
        };
        Self::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, verbose) = (cli.command.name(), cli.command.flags().verbose);
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Solve(c) => cmd_solve(&c),
        Command::Certify { common, d0, safety } => cmd_certify(&common, d0, safety),
        Command::Bench(b) => cmd_bench(&b),
        Command::Check(c) => cmd_check(&c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("augpdg {name}: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Primal-dual point `(x, lambda)`.
type Pair = (DVector<f64>, DVector<f64>);

struct Loaded {
    file: ProblemFile,
    spec: ProblemSpec,
}

fn load(path: &Path) -> Result<Loaded, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_INPUT, format!("cannot read {}: {e}", path.display())))?;
    let file = ProblemFile::from_json(&text)
        .map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    let spec = file.to_structured()?.to_spec()?;
    Ok(Loaded { file, spec })
}

fn config(flags: &Overrides) -> Result<SolverConfig, Failure> {
    let c = SolverConfig::new(
        flags.alpha.unwrap_or(DEFAULT_ALPHA),
        flags.rho.unwrap_or(DEFAULT_RHO),
    )?
    .with_max_iters(flags.max_iters.unwrap_or(DEFAULT_MAX_ITERS))
    .with_stop_tol(flags.stop_tol.unwrap_or(DEFAULT_STOP_TOL));
    Ok(c)
}

fn start_point(l: &Loaded) -> Result<Pair, Failure> {
    match &l.file.initial {
        Some(p) => Ok(p.to_vectors(l.spec.n(), l.spec.m())?),
        None => Ok((DVector::zeros(l.spec.n()), DVector::zeros(l.spec.m()))),
    }
}

fn reference(l: &Loaded) -> Result<Option<Pair>, Failure> {
    match &l.file.reference {
        Some(p) => Ok(Some(p.to_vectors(l.spec.n(), l.spec.m())?)),
        None => Ok(None),
    }
}

fn out_dir(flags: &Overrides) -> Result<&Path, Failure> {
    fs::create_dir_all(&flags.out).map_err(|e| {
        Failure::new(
            EXIT_INPUT,
            format!("cannot create {}: {e}", flags.out.display()),
        )
    })?;
    Ok(&flags.out)
}

fn termination_code(t: &Termination) -> u8 {
    match t {
        Termination::Converged => 0,
        Termination::MaxIterations => EXIT_MAX_ITERS,
        Termination::Diverged { .. } => EXIT_DIVERGED,
    }
}

fn fmt_vec(v: &DVector<f64>) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
    format!("[{}]", items.join(", "))
}

fn solve_trace(l: &Loaded, c: &SolverConfig) -> Result<Trace, Failure> {
    let (x0, l0) = start_point(l)?;
    let monitor = match reference(l)? {
        Some((xs, ls)) => Monitor::with_reference(xs, ls),
        None => Monitor::default(),
    };
    Ok(run(&l.spec, c, &x0, &l0, &monitor)?)
}

fn cmd_solve(args: &Common) -> CmdResult {
    let l = load(&args.file)?;
    let c = config(&args.flags)?;
    let out = out_dir(&args.flags)?;
    log::info!(
        "solving {} (n = {}, m = {})",
        args.file.display(),
        l.spec.n(),
        l.spec.m()
    );
    let trace = solve_trace(&l, &c)?;
    trace.write_csv(BufWriter::new(fs::File::create(out.join("trace.csv"))?))?;

    let o = &trace.outcome;
    let status = match &o.termination {
        Termination::Converged => "converged".to_string(),
        Termination::MaxIterations => "max_iters".to_string(),
        Termination::Diverged { iteration, reason } => {
            format!("diverged at iteration {iteration}: {reason}")
        }
    };
    let r = &o.final_residual;
    let mut s = String::new();
    let _ = writeln!(s, "status = {status}");
    let _ = writeln!(s, "iterations = {}", o.iterations());
    let _ = writeln!(s, "alpha = {:e}", c.alpha);
    let _ = writeln!(s, "rho = {:e}", c.rho);
    let _ = writeln!(s, "x = {}", fmt_vec(&o.final_state.x));
    let _ = writeln!(s, "lambda = {}", fmt_vec(&o.final_state.lambda));
    let _ = writeln!(s, "stationarity = {:e}", r.stationarity);
    let _ = writeln!(s, "primal_infeas = {:e}", r.primal_infeas);
    let _ = writeln!(s, "dual_infeas = {:e}", r.dual_infeas);
    let _ = writeln!(s, "complementarity = {:e}", r.complementarity);
    let _ = writeln!(s, "fixed_point_gap = {:e}", r.fixed_point_gap);
    if let Some(k) = o.left_box_at {
        let _ = writeln!(s, "left_box_at = {k}");
    }
    fs::write(out.join("solution.txt"), &s)?;
    eprintln!(
        "{status} (last finite iterate {}, max KKT residual {:e})",
        o.iterations(),
        r.max()
    );
    Ok(termination_code(&o.termination))
}

fn cmd_certify(args: &Common, d0: Option<f64>, safety: f64) -> CmdResult {
    let l = load(&args.file)?;
    let c = config(&args.flags)?;
    let out = out_dir(&args.flags)?;
    let (xs, ls) = match reference(&l)? {
        Some(r) => r,
        None => {
            log::info!("no reference in file; solving to convergence first");
            let trace = solve_trace(&l, &c)?;
            let code = termination_code(&trace.outcome.termination);
            if code != 0 {
                return Err(Failure::new(code, "solve did not converge; cannot certify"));
            }
            let s = trace.outcome.final_state;
            (s.x, s.lambda)
        }
    };
    let d0 = match d0 {
        Some(d) => d,
        None => {
            let (x0, l0) = start_point(&l)?;
            stacked_norm(&(&x0 - &xs), &(&l0 - &ls))
        }
    };
    let opts = CertificateOptions {
        safety,
        ..CertificateOptions::default()
    };
    let cert = build_certificate(&l.spec, &xs, &ls, c.rho, d0, &opts)?;
    fs::write(out.join("certificate.txt"), cert.report())?;
    eprintln!(
        "alpha_max = {:e}, gamma = {:e} for d0 = {:e}",
        cert.alpha_max,
        cert.gamma(),
        d0
    );
    if c.alpha > cert.alpha_max {
        eprintln!(
            "note: alpha = {:e} exceeds the certified bound {:e}",
            c.alpha, cert.alpha_max
        );
    }
    Ok(0)
}

fn cmd_bench(args: &BenchArgs) -> CmdResult {
    let f = &args.flags;
    let mut plan = match &args.file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Failure::new(EXIT_INPUT, format!("cannot read {}: {e}", path.display()))
            })?;
            serde_json::from_str::<ExperimentPlan>(&text).map_err(|e| {
                Failure::new(
                    EXIT_INPUT,
                    format!(
                        "{}: parse error at line {}, column {}: {e}",
                        path.display(),
                        e.line(),
                        e.column()
                    ),
                )
            })?
        }
        None => ExperimentPlan::default(),
    };
    if let Some(v) = f.alpha {
        plan.alpha = v;
    }
    if let Some(v) = f.rho {
        plan.rho = v;
    }
    if let Some(v) = f.max_iters {
        plan.max_iters = v;
    }
    if let Some(v) = f.stop_tol {
        plan.stop_tol = v;
    }
    if let Some(v) = f.seed {
        plan.master_seed = v;
    }
    let out = out_dir(f)?;
    let runs = plan.d0_multipliers.len() * plan.seeds_per_case;
    eprintln!(
        "running {runs} runs (rho = {}, alpha = {})",
        plan.rho, plan.alpha
    );
    let report = run_experiment(&plan)?;
    report.write_all(out)?;

    let count = |s: RunStatus| report.runs.iter().filter(|r| r.status == s).count();
    let (ok, capped, diverged) = (
        count(RunStatus::Converged),
        count(RunStatus::MaxIterations),
        count(RunStatus::Diverged),
    );
    eprintln!(
        "{ok} converged, {capped} hit max_iters, {diverged} diverged; results in {}",
        out.display()
    );
    Ok(if diverged > 0 {
        EXIT_DIVERGED
    } else if capped > 0 {
        EXIT_MAX_ITERS
    } else {
        0
    })
}

fn cmd_check(args: &Common) -> CmdResult {
    let l = load(&args.file)?;
    let out = out_dir(&args.flags)?;
    let seed = args.flags.seed.unwrap_or(DEFAULT_SEED);
    let structured = l.file.to_structured()?;
    let bounds = &structured.bounds;
    let declared: DeclaredConstants = l.spec.constants().clone();

    let x_star = match reference(&l)? {
        Some((xs, _)) => xs,
        None => {
            let c = config(&args.flags)?;
            let trace = solve_trace(&l, &c)?;
            let code = termination_code(&trace.outcome.termination);
            if code != 0 {
                return Err(Failure::new(
                    code,
                    "solve did not converge; cannot locate x*",
                ));
            }
            trace.outcome.final_state.x
        }
    };
    let radius = bounds
        .lo
        .iter()
        .zip(&bounds.hi)
        .map(|(lo, hi)| (hi - lo) * (hi - lo))
        .sum::<f64>()
        .sqrt()
        * 0.5;
    let mu = estimate_mu(&l.spec, &x_star, CHECK_SAMPLES, radius.max(1e-3), seed)?;
    let smooth = estimate_smoothness(&l.spec, bounds, CHECK_SAMPLES, seed)?;

    let mut report = String::new();
    let mut contradictions = Vec::new();
    let mut line = |name: String, declared: f64, estimate: f64, ok: bool| {
        let verdict = if ok { "ok" } else { "CONTRADICTED" };
        let _ = writeln!(
            report,
            "{name} declared = {declared:e} estimate = {estimate:e} {verdict}"
        );
        if !ok {
            contradictions.push(name);
        }
    };
    // mu is overestimated by sampling; the rest are underestimated.
    line(
        "mu".into(),
        declared.mu,
        mu,
        declared.mu <= mu * (1.0 + CHECK_SLACK),
    );
    line(
        "l_smooth".into(),
        declared.l_smooth,
        smooth.l_smooth,
        smooth.l_smooth <= declared.l_smooth * (1.0 + CHECK_SLACK),
    );
    for (i, (d, e)) in declared
        .constraints
        .iter()
        .zip(&smooth.constraints)
        .enumerate()
    {
        line(
            format!("L_g{i}"),
            d.lipschitz,
            e.lipschitz,
            e.lipschitz <= d.lipschitz * (1.0 + CHECK_SLACK) + CHECK_SLACK,
        );
        line(
            format!("B_g{i}"),
            d.bound,
            e.bound,
            e.bound <= d.bound * (1.0 + CHECK_SLACK) + CHECK_SLACK,
        );
    }
    fs::write(out.join("check.txt"), &report)?;
    if contradictions.is_empty() {
        eprintln!("all declared constants consistent with {CHECK_SAMPLES} samples");
        Ok(0)
    } else {
        eprintln!("contradicted: {}", contradictions.join(", "));
        Ok(EXIT_CONTRADICTED)
    }
}

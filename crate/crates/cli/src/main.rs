//! `anneal-lab` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anneal_lab::bounds::{
    annealed_rhs_lipschitz, coefficient_curve, tuned_stepsize_lipschitz, tuned_stepsize_smooth,
    BoundMode, RhoRange,
};
use anneal_lab::config::{run_experiment, ExperimentConfig};
use anneal_lab::harness::degradation_csv;
use anneal_lab::plot::{render_svg, PlotSpec, Series};
use anneal_lab::problems::{
    fixed_step_adversary, invsqrt_adversary, AbsNoise, AbsProblem, AdversaryDemo, QuadProblem,
};
use anneal_lab::sgd::{
    discrete_last_iterate_bound_lipschitz, lemma3_audit, run_sgd, Problem, RunOptions, StepsizePlan,
};
use anneal_lab::{Error, ProblemScales, Schedule, TailFunctions};
use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "anneal-lab",
    version,
    about = "Stepsize-schedule robustness experiments"
)]
struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "ANNEAL_LAB_THREADS")]
    threads: Option<usize>,

    /// Embed a generation timestamp in SVG output.
    #[arg(long, global = true)]
    stamp: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coefficient of the tuned rate versus misspecification rho.
    BoundCurve(BoundCurveArgs),
    /// One SGD run with a trajectory.
    SgdRun(SgdRunArgs),
    /// Randomized check of the suffix-to-integral comparison.
    Lemma3Audit(AuditArgs),
    /// Deterministic lower-bound constructions on G|x|.
    Adversary(AdversaryArgs),
    /// Grid-search robustness experiment from a JSON config.
    GridRobustness(GridArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Lipschitz,
    Smooth,
}

#[derive(Args)]
struct Scales {
    /// Domain diameter D.
    #[arg(long, default_value_t = 1.0)]
    diameter: f64,
    /// Gradient bound G (Lipschitz mode).
    #[arg(long, default_value_t = 1.0)]
    grad_bound: f64,
    /// Smoothness beta (smooth mode).
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Noise level sigma (smooth mode).
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Number of steps T.
    #[arg(long, default_value_t = 10_000)]
    steps: u64,
}

#[derive(Args)]
struct BoundCurveArgs {
    /// Comma-separated schedules: cosine, poly:<p>.
    #[arg(long, default_value = "cosine,poly:1,poly:2,poly:3")]
    schedules: String,
    /// `lo:hi` for a log-spaced range, or a comma-separated list of values.
    #[arg(long, default_value = "1:50")]
    rho: String,
    /// Points in a `lo:hi` range.
    #[arg(long, default_value_t = 50)]
    points: usize,
    #[arg(long, value_enum, default_value_t = Mode::Lipschitz)]
    mode: Mode,
    #[command(flatten)]
    scales: Scales,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemKind {
    /// G|x| on [-D/2, D/2], Lipschitz setting.
    Abs,
    /// (beta/2)||x - x*||^2 on a ball, smooth setting.
    Quad,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseKind {
    None,
    Rademacher,
}

#[derive(Args)]
struct SgdRunArgs {
    #[arg(long, value_enum, default_value_t = ProblemKind::Abs)]
    problem: ProblemKind,
    #[arg(long, default_value = "cosine")]
    schedule: Schedule,
    /// Base stepsize; defaults to rho times the tuned stepsize.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, value_enum, default_value_t = NoiseKind::Rademacher)]
    noise: NoiseKind,
    /// Dimension of the quadratic problem.
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    scales: Scales,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, default_value_t = 500)]
    cases: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdversaryKindArg {
    Fixed,
    Invsqrt,
}

#[derive(Args)]
struct AdversaryArgs {
    #[arg(long, value_enum)]
    kind: AdversaryKindArg,
    #[arg(long, default_value_t = 1.0)]
    diameter: f64,
    #[arg(long, default_value_t = 1.0)]
    grad_bound: f64,
    #[arg(long)]
    steps: u64,
    #[arg(long)]
    rho: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    /// Experiment config; defaults to the desk-scale logistic regression.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Failure classes mapped to exit codes.
enum Failure {
    /// Bad flags or inputs, detected before computing.
    Usage(String),
    /// A computation ran and its contract check failed.
    Violation(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn stamp(enabled: bool) -> Option<String> {
    enabled.then(|| {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        format!("generated at unix time {secs}")
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn parse_rho(spec: &str, points: usize) -> Result<Vec<f64>, Failure> {
    if spec.contains(',') {
        let values = spec
            .split(',')
            .map(|s| s.parse::<RhoRange>().map(|r| r.lo))
            .collect::<Result<Vec<_>, _>>()
            .map_err(usage)?;
        return Ok(values);
    }
    if points == 0 {
        return Err(usage("--points must be at least 1"));
    }
    Ok(spec.parse::<RhoRange>().map_err(usage)?.geometric(points))
}

fn bound_curve(a: BoundCurveArgs, stamp_svg: bool) -> Result<(), Failure> {
    let schedules = a
        .schedules
        .split(',')
        .map(|s| s.parse::<Schedule>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(usage)?;
    let tails = schedules
        .iter()
        .map(|s| TailFunctions::analytic(*s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(usage)?;
    let rhos = parse_rho(&a.rho, a.points)?;
    let s = &a.scales;
    let mode = match a.mode {
        Mode::Lipschitz => {
            BoundMode::Lipschitz(ProblemScales::lipschitz(s.diameter, s.grad_bound, s.steps))
        }
        Mode::Smooth => {
            BoundMode::Smooth(ProblemScales::smooth(s.diameter, s.beta, s.sigma, s.steps))
        }
    };
    let mut csv = String::from("schedule,rho,coefficient,tau_star\n");
    let mut series = Vec::new();
    for t in &tails {
        let rows = coefficient_curve(t, &rhos, mode).map_err(|e| match e {
            Error::Domain { .. } | Error::InvalidArgument(_) => usage(e),
            other => Failure::Other(other.into()),
        })?;
        for r in &rows {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                t.schedule(),
                r.rho,
                r.coefficient,
                r.tau_star
            ));
        }
        series.push(Series {
            name: t.schedule().to_string(),
            points: rows.iter().map(|r| (r.rho, r.coefficient)).collect(),
        });
    }
    let csv_path = write(&a.out, "bound_curve.csv", &csv)?;
    let spec = PlotSpec {
        title: "Bound coefficient versus misspecification".into(),
        x_label: "rho".into(),
        y_label: "coefficient".into(),
        log_x: true,
        stamp: stamp(stamp_svg),
    };
    let svg = render_svg(&spec, &series).map_err(|e| Failure::Other(e.into()))?;
    let svg_path = write(&a.out, "bound_curve.svg", &svg)?;
    println!("wrote {} and {}", csv_path.display(), svg_path.display());
    Ok(())
}

fn sgd_run(a: SgdRunArgs) -> Result<(), Failure> {
    let s = &a.scales;
    let tails = TailFunctions::analytic(a.schedule).ok();
    let noise = match a.noise {
        NoiseKind::None => AbsNoise::None,
        NoiseKind::Rademacher => AbsNoise::Rademacher,
    };
    if !(a.rho >= 1.0 && a.rho.is_finite()) {
        return Err(usage(format!("--rho {} must be at least 1", a.rho)));
    }
    let (problem, x1, default_eta): (Box<dyn Problem>, Vec<f64>, Option<f64>) = match a.problem {
        ProblemKind::Abs => {
            let p = AbsProblem::new(s.grad_bound, s.diameter, noise).map_err(usage)?;
            let sc = ProblemScales::lipschitz(s.diameter, p.declared_grad_bound(), s.steps);
            let tuned = tails
                .as_ref()
                .map(|t| tuned_stepsize_lipschitz(&sc, t))
                .transpose()
                .map_err(usage)?;
            (Box::new(p), vec![s.diameter / 2.0], tuned)
        }
        ProblemKind::Quad => {
            if a.dim == 0 {
                return Err(usage("--dim must be positive"));
            }
            let sigma = if matches!(a.noise, NoiseKind::None) {
                0.0
            } else {
                s.sigma
            };
            let p = QuadProblem::new(s.beta, sigma, vec![0.0; a.dim], s.diameter / 2.0)
                .map_err(usage)?;
            let sc = ProblemScales::smooth(s.diameter, s.beta, sigma, s.steps);
            let tuned = tails
                .as_ref()
                .map(|t| tuned_stepsize_smooth(&sc, t))
                .transpose()
                .map_err(usage)?;
            let mut x1 = vec![0.0; a.dim];
            x1[0] = s.diameter / 2.0;
            (Box::new(p), x1, tuned)
        }
    };
    let eta = match (a.eta, default_eta) {
        (Some(e), _) => e,
        (None, Some(t)) => a.rho * t,
        (None, None) => {
            return Err(usage(format!(
                "--eta is required for the {} schedule",
                a.schedule
            )))
        }
    };
    let plan = StepsizePlan::new(eta, a.schedule, s.steps).map_err(usage)?;
    let opts = RunOptions {
        record_trajectory: true,
        ..RunOptions::default()
    };
    let run = run_sgd(problem.as_ref(), &plan, &x1, a.seed, &opts)
        .map_err(|e| Failure::Other(e.into()))?;
    let summary = run.summarize(problem.as_ref());
    // Last-iterate guarantee at this stepsize; the quadratic has none
    // without a stepsize cap, so it is omitted there.
    let bound = match (a.problem, &tails) {
        (ProblemKind::Abs, tails) => {
            let g = AbsProblem::new(s.grad_bound, s.diameter, noise)
                .map_err(usage)?
                .declared_grad_bound();
            match tails {
                Some(t) => annealed_rhs_lipschitz(
                    &ProblemScales::lipschitz(s.diameter, g, s.steps),
                    t,
                    eta,
                )
                .ok(),
                None => discrete_last_iterate_bound_lipschitz(&plan, s.diameter, g).ok(),
            }
        }
        (ProblemKind::Quad, _) => None,
    };
    let report = serde_json::json!({
        "summary": summary,
        "last_iterate_bound": bound,
    });
    let csv = run.trajectory_csv().expect("trajectory recorded");
    let csv_path = write(&a.out, "sgd_run.csv", &csv)?;
    let json_path = write(
        &a.out,
        "sgd_run.json",
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&report).expect("serializes")
        ),
    )?;
    println!(
        "eta = {eta}, last = {}, uniform average = {}, polynomial average = {}",
        summary.last, summary.uniform_average, summary.polynomial_average
    );
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

fn audit(a: AuditArgs) -> Result<(), Failure> {
    if a.cases == 0 {
        return Err(usage("--cases must be at least 1"));
    }
    let report = lemma3_audit(a.cases, a.seed).map_err(|e| Failure::Other(e.into()))?;
    if let Some(path) = &a.out {
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let name = path.file_name().context("--out needs a file name")?;
        write(
            dir,
            &name.to_string_lossy(),
            &serde_json::to_string_pretty(&report).expect("serializes"),
        )?;
    }
    println!(
        "cases = {}, violations = {}, worst lhs/rhs = {}",
        report.cases,
        report.violations.len(),
        report.worst_ratio
    );
    match report.violations.first() {
        None => Ok(()),
        Some(c) => Err(Failure::Violation(format!(
            "{} violation(s); first: {} T={} k={} tau={} eta={} lhs={} rhs={}",
            report.violations.len(),
            c.schedule,
            c.steps,
            c.k,
            c.tau,
            c.eta,
            c.lhs,
            c.rhs
        ))),
    }
}

fn adversary(a: AdversaryArgs) -> Result<(), Failure> {
    let demo: AdversaryDemo = match a.kind {
        AdversaryKindArg::Fixed => fixed_step_adversary(a.diameter, a.grad_bound, a.steps, a.rho),
        AdversaryKindArg::Invsqrt => invsqrt_adversary(a.diameter, a.grad_bound, a.steps, a.rho),
    }
    .map_err(usage)?;
    let name = match a.kind {
        AdversaryKindArg::Fixed => "adversary_fixed",
        AdversaryKindArg::Invsqrt => "adversary_invsqrt",
    };
    let verdict = demo.verdict();
    let checks: Vec<String> = demo
        .checks
        .iter()
        .map(|(n, ok)| format!("{n}={ok}"))
        .collect();
    let line = format!(
        "verdict: {verdict} (suboptimality {} >= lower bound {}; {})",
        demo.suboptimality,
        demo.lower_bound,
        checks.join(", ")
    );
    write(&a.out, &format!("{name}.csv"), &demo.trajectory_csv())?;
    write(&a.out, &format!("{name}_verdict.txt"), &format!("{line}\n"))?;
    println!("{line}");
    if verdict {
        Ok(())
    } else {
        Err(Failure::Violation("lower bound not attained".into()))
    }
}

fn grid(a: GridArgs, stamp_svg: bool) -> Result<(), Failure> {
    let cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(|e| usage(format!("{e:#}")))?;
            ExperimentConfig::parse(&text).map_err(usage)?
        }
        None => ExperimentConfig::desk(),
    };
    let result = run_experiment(&cfg).map_err(|e| Failure::Other(e.into()))?;
    write(&a.out, "raw.csv", &result.outcome.raw_csv())?;
    write(
        &a.out,
        "aggregated.csv",
        &degradation_csv(&result.degradation),
    )?;
    write(
        &a.out,
        "manifest.json",
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&result.manifest).expect("serializes")
        ),
    )?;
    let series: Vec<Series> = result
        .outcome
        .variants
        .iter()
        .map(|v| Series {
            name: v.clone(),
            points: result
                .degradation
                .iter()
                .filter(|r| &r.variant == v)
                .map(|r| (r.grid_factor, r.mean_best))
                .collect(),
        })
        .collect();
    let spec = PlotSpec {
        title: "Mean of sub-grid bests versus grid factor".into(),
        x_label: "grid factor".into(),
        y_label: "mean best loss".into(),
        log_x: true,
        stamp: stamp(stamp_svg),
    };
    let svg = render_svg(&spec, &series).map_err(|e| Failure::Other(e.into()))?;
    write(&a.out, "degradation.svg", &svg)?;
    for r in &result.degradation {
        println!(
            "{} level {} (factor {:.3}): mean best {:.6} (+{:.6})",
            r.variant, r.level, r.grid_factor, r.mean_best, r.degradation
        );
    }
    println!(
        "wrote raw.csv, aggregated.csv, manifest.json, degradation.svg to {}",
        a.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot build thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match cli.command {
        Command::BoundCurve(a) => bound_curve(a, cli.stamp),
        Command::SgdRun(a) => sgd_run(a),
        Command::Lemma3Audit(a) => audit(a),
        Command::Adversary(a) => adversary(a),
        Command::GridRobustness(a) => grid(a, cli.stamp),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Violation(m)) => {
            eprintln!("violation: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

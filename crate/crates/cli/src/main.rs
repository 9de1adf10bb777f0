//! Experiment runner: oracle computation, both reconstruction methods,
//! parameter sweeps, and shot-noise studies, emitting JSON reports or CSV.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 partial reconstruction
//! (omitted elements, report still emitted).

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dmtomo::modular::{
    Coupling, EstimatorMode, Method1Config, Method1Mode, Method1Outcome, TargetBasis,
};
use dmtomo::sequential::{GaussianPointerConfig, Method2Config};
use dmtomo::states::{RealizedState, StateSpec};
use dmtomo::statistics::{reconstruct_method1_sampled, reconstruct_method2_sampled, ShotPlan};
use dmtomo::tomography::{
    build_report, oracle_report, ReconstructionReport, ReportInputs, ReportParams,
};
use dmtomo::Bprime;

#[derive(Parser)]
#[command(
    name = "dmtomo",
    version,
    about = "Two-photon density-matrix reconstruction runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact density matrix of a state description.
    Oracle(CommonArgs),
    /// Postselected modular-value reconstruction.
    Method1(Method1Args),
    /// Sequential Gaussian-pointer reconstruction.
    Method2(Method2Args),
    /// Shot-noise reconstruction with simulated detector statistics.
    Sample(SampleArgs),
    /// Error metrics over a parameter grid, as CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// State description: inline JSON, @file, or fixture:NAME.
    #[arg(long)]
    state: String,
    /// Master seed for every random substream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Probability,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Aprime,
    Bprime,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    #[value(name = "first-order")]
    FirstOrder,
    #[value(name = "exact-inversion")]
    ExactInversion,
}

#[derive(Clone, Copy, ValueEnum)]
enum PostselectArg {
    DD,
    DA,
    AD,
    AA,
}

impl PostselectArg {
    fn to_bprime(self) -> Bprime {
        match self {
            PostselectArg::DD => Bprime::DD,
            PostselectArg::DA => Bprime::DA,
            PostselectArg::AD => Bprime::AD,
            PostselectArg::AA => Bprime::AA,
        }
    }
}

#[derive(Args)]
struct Method1Args {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Probability)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = BasisArg::Aprime)]
    basis: BasisArg,
    /// Coupling strength in radians.
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    g: f64,
    /// Path-pointer amplitude of the |down,up> mode.
    #[arg(long, default_value_t = 1e-2)]
    eta: f64,
    #[arg(long, value_enum, default_value_t = EstimatorArg::ExactInversion)]
    estimator: EstimatorArg,
}

#[derive(Args)]
struct Method2Args {
    #[command(flatten)]
    common: CommonArgs,
    /// Pointer displacement per unit projector eigenvalue.
    #[arg(long, default_value_t = 1e-3)]
    g: f64,
    /// Common transverse width of the four Gaussian pointers.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Middle-basis postselector.
    #[arg(long, value_enum, default_value_t = PostselectArg::DD)]
    postselect: PostselectArg,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which reconstruction method to drive with sampled counts.
    #[arg(long, default_value_t = 1)]
    method: u8,
    /// Shots per setting.
    #[arg(long, default_value_t = 1_000_000)]
    shots: u64,
    /// Full shot plan as inline JSON or @file; overrides --shots and --seed.
    #[arg(long)]
    plan: Option<String>,
    #[arg(long, value_enum, default_value_t = BasisArg::Aprime)]
    basis: BasisArg,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long, default_value_t = 1e-2)]
    eta: f64,
    #[arg(long, value_enum, default_value_t = EstimatorArg::ExactInversion)]
    estimator: EstimatorArg,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, value_enum, default_value_t = PostselectArg::DD)]
    postselect: PostselectArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum TimingArg {
    /// Report runtime_ms as 0 so repeated runs are byte-identical.
    None,
    /// Report wall-clock milliseconds.
    Wall,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 1)]
    method: u8,
    /// Parameter to sweep: eta, g, or shots.
    #[arg(long)]
    param: String,
    /// Comma-separated parameter values (at least two).
    #[arg(long)]
    values: String,
    #[arg(long, value_enum, default_value_t = TimingArg::None)]
    timing: TimingArg,
    #[arg(long, value_enum, default_value_t = BasisArg::Aprime)]
    basis: BasisArg,
    #[arg(long, value_enum, default_value_t = EstimatorArg::ExactInversion)]
    estimator: EstimatorArg,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long, default_value_t = 1e-2)]
    eta: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, value_enum, default_value_t = PostselectArg::DD)]
    postselect: PostselectArg,
    #[arg(long, default_value_t = 1_000_000)]
    shots: u64,
}

enum CliError {
    Config(String),
}

impl From<dmtomo::Error> for CliError {
    fn from(e: dmtomo::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

fn parse_state(text: &str) -> Result<(StateSpec, RealizedState), CliError> {
    let spec = if let Some(name) = text.strip_prefix("fixture:") {
        StateSpec::Fixture {
            name: name.to_string(),
        }
    } else if let Some(path) = text.strip_prefix('@') {
        let content = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("invalid StateSpec: cannot read {path}: {e}")))?;
        StateSpec::parse_json(&content)
            .map_err(|e| CliError::Config(format!("invalid StateSpec: {e}")))?
    } else {
        StateSpec::parse_json(text)
            .map_err(|e| CliError::Config(format!("invalid StateSpec: {e}")))?
    };
    let realized = spec
        .realize()
        .map_err(|e| CliError::Config(format!("invalid StateSpec: {e}")))?;
    Ok((spec, realized))
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, format!("{content}\n"))
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            use std::io::Write;
            if writeln!(std::io::stdout(), "{content}").is_err() {
                // Downstream closed the pipe; stop quietly.
                std::process::exit(0);
            }
            Ok(())
        }
    }
}

fn method1_config(
    mode: ModeArg,
    basis: BasisArg,
    g: f64,
    eta: f64,
    estimator: EstimatorArg,
) -> Result<Method1Config, CliError> {
    let mode = match mode {
        ModeArg::Exact => Method1Mode::Exact,
        ModeArg::Probability => Method1Mode::Probability,
    };
    if mode == Method1Mode::Probability && eta == 0.0 {
        return Err(CliError::Config(
            "eta must be nonzero in probability mode".into(),
        ));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(CliError::Config(format!(
            "eta must lie in [0, 1], got {eta}"
        )));
    }
    let coupling = Coupling::new(g);
    if coupling.is_degenerate() {
        return Err(CliError::Config(format!(
            "coupling g = {g} is degenerate (a multiple of 2 pi)"
        )));
    }
    Ok(Method1Config {
        mode,
        basis: match basis {
            BasisArg::Aprime => TargetBasis::Aprime,
            BasisArg::Bprime => TargetBasis::Bprime,
        },
        coupling,
        eta,
        estimator: match estimator {
            EstimatorArg::FirstOrder => EstimatorMode::FirstOrder,
            EstimatorArg::ExactInversion => EstimatorMode::ExactInversion,
        },
    })
}

fn method2_config(
    g: f64,
    sigma: f64,
    postselect: PostselectArg,
) -> Result<Method2Config, CliError> {
    let pointer = GaussianPointerConfig { g, sigma };
    pointer
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Method2Config {
        pointer,
        middle: postselect.to_bprime(),
    })
}

fn estimator_label(e: EstimatorArg) -> &'static str {
    match e {
        EstimatorArg::FirstOrder => "first-order",
        EstimatorArg::ExactInversion => "exact-inversion",
    }
}

struct RunResult {
    report: ReconstructionReport,
    partial: bool,
}

fn method1_report(
    state: &RealizedState,
    cfg: &Method1Config,
    outcome: Method1Outcome,
    method: &str,
    params: ReportParams,
) -> RunResult {
    let partial = !outcome.omitted.is_empty();
    let report = build_report(&ReportInputs {
        method: method.to_string(),
        basis: cfg.basis,
        params,
        rho_true: Some(state.rho.clone()),
        rho_raw: outcome.rho_raw,
        omitted: outcome.omitted,
    });
    RunResult { report, partial }
}

fn run_method1(args: &Method1Args) -> Result<RunResult, CliError> {
    let (_, state) = parse_state(&args.common.state)?;
    let cfg = method1_config(args.mode, args.basis, args.g, args.eta, args.estimator)?;
    let outcome = dmtomo::modular::reconstruct(&state, &cfg)?;
    let method = format!("method1-{}", cfg.mode.label());
    let params = ReportParams {
        g: Some(args.g),
        eta: Some(args.eta),
        mode: Some(cfg.mode.label().to_string()),
        estimator: (cfg.mode == Method1Mode::Probability)
            .then(|| estimator_label(args.estimator).to_string()),
        seed: Some(args.common.seed),
        ..ReportParams::default()
    };
    Ok(method1_report(&state, &cfg, outcome, &method, params))
}

fn run_method2(args: &Method2Args) -> Result<RunResult, CliError> {
    let (_, state) = parse_state(&args.common.state)?;
    let cfg = method2_config(args.g, args.sigma, args.postselect)?;
    let elements = dmtomo::sequential::reconstruct(&state.rho, &cfg)?;
    let report = build_report(&ReportInputs {
        method: "method2".to_string(),
        basis: TargetBasis::Aprime,
        params: ReportParams {
            g: Some(args.g),
            sigma: Some(args.sigma),
            postselection: Some(format!("{:?}", cfg.middle)),
            seed: Some(args.common.seed),
            ..ReportParams::default()
        },
        rho_true: Some(state.rho.clone()),
        rho_raw: elements,
        omitted: vec![],
    });
    Ok(RunResult {
        report,
        partial: false,
    })
}

fn run_sample(args: &SampleArgs) -> Result<RunResult, CliError> {
    let (_, state) = parse_state(&args.common.state)?;
    if args.shots == 0 {
        return Err(CliError::Config("shots must be positive".into()));
    }
    let plan = match &args.plan {
        Some(text) => {
            let content = match text.strip_prefix('@') {
                Some(path) => std::fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("invalid shot plan: cannot read {path}: {e}"))
                })?,
                None => text.clone(),
            };
            ShotPlan::parse_json(&content)?
        }
        None => ShotPlan::uniform(args.common.seed, args.shots),
    };
    match args.method {
        1 => {
            let g = args.g.unwrap_or(std::f64::consts::FRAC_PI_2);
            let cfg = method1_config(
                ModeArg::Probability,
                args.basis,
                g,
                args.eta,
                args.estimator,
            )?;
            let outcome = reconstruct_method1_sampled(&state, &cfg, &plan)?;
            let params = ReportParams {
                g: Some(g),
                eta: Some(args.eta),
                mode: Some("sampled".to_string()),
                estimator: Some(estimator_label(args.estimator).to_string()),
                shots: plan.shots,
                seed: Some(plan.seed),
                ..ReportParams::default()
            };
            Ok(method1_report(
                &state,
                &cfg,
                outcome,
                "method1-sampled",
                params,
            ))
        }
        2 => {
            let g = args.g.unwrap_or(1e-3);
            let cfg = method2_config(g, args.sigma, args.postselect)?;
            let outcome = reconstruct_method2_sampled(&state, &cfg, &plan)?;
            let report = build_report(&ReportInputs {
                method: "method2-sampled".to_string(),
                basis: TargetBasis::Aprime,
                params: ReportParams {
                    g: Some(g),
                    sigma: Some(args.sigma),
                    postselection: Some(format!("{:?}", cfg.middle)),
                    shots: plan.shots,
                    seed: Some(plan.seed),
                    ..ReportParams::default()
                },
                rho_true: Some(state.rho.clone()),
                rho_raw: outcome.elements,
                omitted: vec![],
            });
            Ok(RunResult {
                report,
                partial: false,
            })
        }
        m => Err(CliError::Config(format!(
            "unknown method {m}; expected 1 or 2"
        ))),
    }
}

struct SweepRow {
    param_value: f64,
    fidelity: f64,
    trace_distance: f64,
    max_abs_element_error: f64,
    runtime_ms: u128,
}

fn metrics_of(report: &ReconstructionReport) -> Result<(f64, f64, f64), CliError> {
    match (
        report.fidelity,
        report.trace_distance,
        report.max_abs_element_error,
    ) {
        (Some(f), Some(t), Some(m)) => Ok((f, t, m)),
        _ => Err(CliError::Config("sweep point produced no metrics".into())),
    }
}

fn run_sweep(args: &SweepArgs) -> Result<String, CliError> {
    let (_, state) = parse_state(&args.common.state)?;
    let values: Vec<f64> = args
        .values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("invalid sweep value `{v}`")))
        })
        .collect::<Result<_, _>>()?;
    if values.len() < 2 {
        return Err(CliError::Config(
            "sweep requires at least two values".into(),
        ));
    }
    if !matches!(args.param.as_str(), "eta" | "g" | "shots") {
        return Err(CliError::Config(format!(
            "unknown sweep parameter `{}`; expected eta, g, or shots",
            args.param
        )));
    }
    if args.param == "eta" && args.method != 1 {
        return Err(CliError::Config("eta sweeps apply to method 1 only".into()));
    }

    // Validate every point before computing anything.
    let mut runs: Vec<Box<dyn Fn() -> Result<ReconstructionReport, CliError>>> = Vec::new();
    for &v in &values {
        let state = state.clone();
        match (args.param.as_str(), args.method) {
            ("eta", _) => {
                let cfg = method1_config(
                    ModeArg::Probability,
                    args.basis,
                    args.g.unwrap_or(std::f64::consts::FRAC_PI_2),
                    v,
                    args.estimator,
                )?;
                runs.push(Box::new(move || {
                    let outcome = dmtomo::modular::reconstruct(&state, &cfg)?;
                    Ok(method1_report(
                        &state,
                        &cfg,
                        outcome,
                        "method1-probability",
                        ReportParams::default(),
                    )
                    .report)
                }));
            }
            ("g", 1) => {
                let cfg = method1_config(
                    ModeArg::Probability,
                    args.basis,
                    v,
                    args.eta,
                    args.estimator,
                )?;
                runs.push(Box::new(move || {
                    let outcome = dmtomo::modular::reconstruct(&state, &cfg)?;
                    Ok(method1_report(
                        &state,
                        &cfg,
                        outcome,
                        "method1-probability",
                        ReportParams::default(),
                    )
                    .report)
                }));
            }
            ("g", 2) => {
                let cfg = method2_config(v, args.sigma, args.postselect)?;
                runs.push(Box::new(move || {
                    let elements = dmtomo::sequential::reconstruct(&state.rho, &cfg)?;
                    Ok(build_report(&ReportInputs {
                        method: "method2".into(),
                        basis: TargetBasis::Aprime,
                        params: ReportParams::default(),
                        rho_true: Some(state.rho.clone()),
                        rho_raw: elements,
                        omitted: vec![],
                    }))
                }));
            }
            ("shots", 1) => {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(CliError::Config(format!("invalid shot count {v}")));
                }
                let g = args.g.unwrap_or(std::f64::consts::FRAC_PI_2);
                let cfg = method1_config(
                    ModeArg::Probability,
                    args.basis,
                    g,
                    args.eta,
                    args.estimator,
                )?;
                let seed = args.common.seed;
                runs.push(Box::new(move || {
                    let plan = ShotPlan::uniform(seed, v as u64);
                    let outcome = reconstruct_method1_sampled(&state, &cfg, &plan)?;
                    Ok(method1_report(
                        &state,
                        &cfg,
                        outcome,
                        "method1-sampled",
                        ReportParams::default(),
                    )
                    .report)
                }));
            }
            ("shots", 2) => {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(CliError::Config(format!("invalid shot count {v}")));
                }
                let cfg = method2_config(args.g.unwrap_or(1e-3), args.sigma, args.postselect)?;
                let seed = args.common.seed;
                runs.push(Box::new(move || {
                    let plan = ShotPlan::uniform(seed, v as u64);
                    let outcome = reconstruct_method2_sampled(&state, &cfg, &plan)?;
                    Ok(build_report(&ReportInputs {
                        method: "method2-sampled".into(),
                        basis: TargetBasis::Aprime,
                        params: ReportParams::default(),
                        rho_true: Some(state.rho.clone()),
                        rho_raw: outcome.elements,
                        omitted: vec![],
                    }))
                }));
            }
            (_, m) => {
                return Err(CliError::Config(format!(
                    "unknown method {m}; expected 1 or 2"
                )))
            }
        }
    }

    let mut rows = Vec::with_capacity(values.len());
    for (v, run) in values.iter().zip(&runs) {
        let start = Instant::now();
        let report = run()?;
        let elapsed = start.elapsed().as_millis();
        let (fidelity, trace_distance, max_err) = metrics_of(&report)?;
        rows.push(SweepRow {
            param_value: *v,
            fidelity,
            trace_distance,
            max_abs_element_error: max_err,
            runtime_ms: match args.timing {
                TimingArg::None => 0,
                TimingArg::Wall => elapsed,
            },
        });
    }

    let mut csv =
        String::from("param_value,fidelity,trace_distance,max_abs_element_error,runtime_ms\n");
    for row in rows {
        writeln!(
            csv,
            "{},{},{},{},{}",
            row.param_value,
            row.fidelity,
            row.trace_distance,
            row.max_abs_element_error,
            row.runtime_ms
        )
        .expect("string write");
    }
    Ok(csv.trim_end().to_string())
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Oracle(args) => {
            let (_, state) = parse_state(&args.state)?;
            emit(&args.out, &oracle_report(&state.rho).to_json())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Method1(args) => {
            let result = run_method1(&args)?;
            emit(&args.common.out, &result.report.to_json())?;
            Ok(if result.partial {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Method2(args) => {
            let result = run_method2(&args)?;
            emit(&args.common.out, &result.report.to_json())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sample(args) => {
            let result = run_sample(&args)?;
            emit(&args.common.out, &result.report.to_json())?;
            Ok(if result.partial {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Sweep(args) => {
            let csv = run_sweep(&args)?;
            emit(&args.common.out, &csv)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(CliError::Config(message)) => {
            eprintln!("{}", serde_json::json!({ "error": message }));
            ExitCode::from(2)
        }
    }
}

//! Command-line front end: generate MDPs, solve them exactly, run planner
//! and learner experiments, fit convergence rates, and validate MDP files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use geometry::Geometry;
use harness::{
    fit_from_csvs, generate_chain, generate_garnet, run_experiment, solve_mdp, Algorithm,
    DistSpec, ExperimentConfig, HarnessError, MdpSource, RateMetric,
};
use mdp_core::{load_mdp_json, save_mdp_json};
use planners::Schedule;

#[derive(Parser)]
#[command(
    name = "trpo",
    version,
    about = "Tabular trust-region policy optimization: generators, planners, learners, and rate fits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an MDP JSON file from a seeded family.
    Gen(GenArgs),
    /// Compute the optimal regularized value and policy of an MDP file.
    Solve(SolveArgs),
    /// Run a planning experiment (uniform or restricted trust-region).
    Plan(RunArgs),
    /// Run a sample-based learning experiment.
    Learn(RunArgs),
    /// Fit a log-log convergence rate to already-written run CSVs.
    Rates(RatesArgs),
    /// Validate an MDP JSON file and report its shape.
    Check(CheckArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum GeometryArg {
    Euclidean,
    NegEntropy,
}

impl From<GeometryArg> for Geometry {
    fn from(arg: GeometryArg) -> Geometry {
        match arg {
            GeometryArg::Euclidean => Geometry::Euclidean,
            GeometryArg::NegEntropy => Geometry::NegEntropy,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum AlgorithmArg {
    Uniform,
    Exact,
    Sample,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(arg: AlgorithmArg) -> Algorithm {
        match arg {
            AlgorithmArg::Uniform => Algorithm::Uniform,
            AlgorithmArg::Exact => Algorithm::Exact,
            AlgorithmArg::Sample => Algorithm::Sample,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ScheduleArg {
    /// Decaying step for unregularized runs.
    Sqrt,
    /// Harmonic step for regularized runs.
    Harmonic,
    /// Constant step; requires --step.
    Fixed,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Linf,
    Mu,
    Best,
}

impl From<MetricArg> for RateMetric {
    fn from(arg: MetricArg) -> RateMetric {
        match arg {
            MetricArg::Linf => RateMetric::Linf,
            MetricArg::Mu => RateMetric::Mu,
            MetricArg::Best => RateMetric::Best,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Sparse random MDP as S,A,B (states, actions, branching).
    #[arg(long, value_name = "S,A,B", conflicts_with = "chain")]
    garnet: Option<String>,
    /// Left-to-right chain with this many states.
    #[arg(long, value_name = "N")]
    chain: Option<usize>,
    /// Stall probability of the chain's forward action.
    #[arg(long, default_value_t = 0.0)]
    slip: f64,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// Cost ceiling for the random family.
    #[arg(long, default_value_t = 1.0)]
    c_max: f64,
    /// Base seed: costs use it directly, transitions use seed + 1.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the cost seed separately.
    #[arg(long)]
    cost_seed: Option<u64>,
    /// Override the transition seed separately.
    #[arg(long)]
    transition_seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    mdp: PathBuf,
    #[arg(long, value_enum, default_value_t = GeometryArg::Euclidean)]
    geometry: GeometryArg,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config JSON; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// MDP JSON file to run on.
    #[arg(long)]
    mdp: Option<PathBuf>,
    /// Sparse random MDP source as S,A,B.
    #[arg(long, value_name = "S,A,B")]
    garnet: Option<String>,
    /// Chain MDP source with this many states.
    #[arg(long, value_name = "N")]
    chain: Option<usize>,
    #[arg(long)]
    slip: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    c_max: Option<f64>,
    /// Base seed for generator sources (costs: seed, transitions: seed + 1).
    #[arg(long)]
    mdp_seed: Option<u64>,
    /// Planner choice (plan subcommand only): uniform or exact.
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmArg>,
    #[arg(long, value_enum)]
    geometry: Option<GeometryArg>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    schedule: Option<ScheduleArg>,
    /// Step size for --schedule fixed.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Comma-separated run seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Weighting distribution: uniform | point:S | p0,p1,...
    #[arg(long)]
    mu: Option<String>,
    /// Start distribution: uniform | point:S | p0,p1,...
    #[arg(long)]
    nu: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Desk-scale trajectory count overriding the theoretical formula.
    #[arg(long)]
    m_override: Option<u64>,
    /// Use the coarse iteration-independent batch formula.
    #[arg(long)]
    coarse_m: bool,
    /// Rate-fit window as LO,HI (inclusive).
    #[arg(long, value_name = "LO,HI")]
    rate_window: Option<String>,
    #[arg(long, value_enum)]
    rate_metric: Option<MetricArg>,
    /// Assert improvement and descent inequalities each iteration.
    #[arg(long)]
    check_invariants: bool,
    /// Record wall-clock times (breaks byte-identical reruns).
    #[arg(long)]
    record_timing: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RatesArgs {
    /// Directory containing run_*.csv files.
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, value_enum)]
    metric: MetricArg,
    /// Fit window as LO,HI (inclusive).
    #[arg(long, value_name = "LO,HI")]
    window: String,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    mdp: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let payload = serde_json::json!({
                "error": { "kind": err.kind(), "message": err.to_string() }
            });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Plan(args) => cmd_run(args, false),
        Command::Learn(args) => cmd_run(args, true),
        Command::Rates(args) => cmd_rates(args),
        Command::Check(args) => cmd_check(args),
    }
}

fn parse_triple(text: &str) -> Result<(usize, usize, usize), HarnessError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(HarnessError::InvalidParameter(format!(
            "expected S,A,B — got {text:?}"
        )));
    }
    let parse = |p: &str| {
        p.trim().parse::<usize>().map_err(|e| {
            HarnessError::InvalidParameter(format!("bad component {p:?} in {text:?}: {e}"))
        })
    };
    Ok((parse(parts[0])?, parse(parts[1])?, parse(parts[2])?))
}

fn parse_window(text: &str) -> Result<[usize; 2], HarnessError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(HarnessError::InvalidParameter(format!(
            "expected LO,HI — got {text:?}"
        )));
    }
    let parse = |p: &str| {
        p.trim().parse::<usize>().map_err(|e| {
            HarnessError::InvalidParameter(format!("bad window bound {p:?}: {e}"))
        })
    };
    Ok([parse(parts[0])?, parse(parts[1])?])
}

fn parse_dist(text: &str) -> Result<DistSpec, HarnessError> {
    let trimmed = text.trim();
    if trimmed == "uniform" {
        return Ok(DistSpec::Uniform);
    }
    if let Some(state) = trimmed.strip_prefix("point:") {
        let state = state.trim().parse::<usize>().map_err(|e| {
            HarnessError::InvalidParameter(format!("bad point-mass state in {text:?}: {e}"))
        })?;
        return Ok(DistSpec::PointMass { state });
    }
    let probs = trimmed
        .split(',')
        .map(|p| {
            p.trim().parse::<f64>().map_err(|e| {
                HarnessError::InvalidParameter(format!("bad probability {p:?} in {text:?}: {e}"))
            })
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(DistSpec::Explicit { probs })
}

fn cmd_gen(args: GenArgs) -> Result<(), HarnessError> {
    let mdp = match (&args.garnet, args.chain) {
        (Some(triple), None) => {
            let (s, a, b) = parse_triple(triple)?;
            let cost_seed = args.cost_seed.unwrap_or(args.seed);
            let transition_seed = args
                .transition_seed
                .unwrap_or_else(|| args.seed.wrapping_add(1));
            generate_garnet(s, a, b, cost_seed, transition_seed, args.gamma, args.c_max)?
        }
        (None, Some(n)) => generate_chain(n, args.slip, args.gamma)?,
        _ => {
            return Err(HarnessError::InvalidParameter(
                "pass exactly one of --garnet S,A,B or --chain N".into(),
            ))
        }
    };
    save_mdp_json(&mdp, &args.out)?;
    println!(
        "{}",
        serde_json::json!({
            "written": args.out,
            "n_states": mdp.n_states(),
            "n_actions": mdp.n_actions(),
            "gamma": mdp.gamma(),
            "c_max": mdp.c_max(),
        })
    );
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<(), HarnessError> {
    let mdp = load_mdp_json(&args.mdp)?;
    let (value, policy) = solve_mdp(&mdp, args.geometry.into(), args.lambda, args.tol)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "value": value,
            "policy": policy,
        }))?
    );
    Ok(())
}

/// Builds the experiment config from an optional JSON base plus flag
/// overrides, then runs it.
fn cmd_run(args: RunArgs, learn: bool) -> Result<(), HarnessError> {
    let base: Option<ExperimentConfig> = match &args.config {
        Some(path) => Some(serde_json::from_str(&std::fs::read_to_string(path)?)?),
        None => None,
    };

    let mdp_source = build_mdp_source(&args, base.as_ref().map(|c| c.mdp.clone()))?;

    let algorithm = if learn {
        if args.algorithm.is_some() {
            return Err(HarnessError::InvalidConfig(
                "learn always runs the sample algorithm; drop --algorithm".into(),
            ));
        }
        Algorithm::Sample
    } else {
        match args.algorithm.map(Algorithm::from) {
            Some(Algorithm::Sample) => {
                return Err(HarnessError::InvalidConfig(
                    "plan runs the uniform or exact planner; use `learn` for sampling".into(),
                ))
            }
            Some(algo) => algo,
            None => match &base {
                Some(b) if b.algorithm != Algorithm::Sample => b.algorithm,
                Some(_) => {
                    return Err(HarnessError::InvalidConfig(
                        "config requests the sample algorithm; use `learn`".into(),
                    ))
                }
                None => Algorithm::Uniform,
            },
        }
    };

    let schedule = match (args.schedule, args.step) {
        (Some(ScheduleArg::Sqrt), None) => Some(Schedule::UnregularizedSqrt),
        (Some(ScheduleArg::Harmonic), None) => Some(Schedule::RegularizedHarmonic),
        (Some(ScheduleArg::Fixed), Some(step)) => Some(Schedule::Fixed(step)),
        (Some(ScheduleArg::Fixed), None) => {
            return Err(HarnessError::InvalidConfig(
                "--schedule fixed requires --step".into(),
            ))
        }
        (Some(_), Some(_)) => {
            return Err(HarnessError::InvalidConfig(
                "--step only applies to --schedule fixed".into(),
            ))
        }
        (None, Some(_)) => {
            return Err(HarnessError::InvalidConfig(
                "--step requires --schedule fixed".into(),
            ))
        }
        (None, None) => None,
    };

    let mut config = match base {
        Some(mut c) => {
            c.mdp = mdp_source;
            c.algorithm = algorithm;
            if let Some(g) = args.geometry {
                c.geometry = g.into();
            }
            if let Some(l) = args.lambda {
                c.lambda = l;
            }
            if let Some(s) = schedule {
                c.schedule = s;
            }
            if let Some(n) = args.iterations {
                c.n_iterations = n;
            }
            if let Some(seeds) = args.seeds.clone() {
                c.seeds = seeds;
            }
            if let Some(dir) = args.out_dir.clone() {
                c.output_dir = dir;
            }
            c
        }
        None => {
            let geometry = args
                .geometry
                .map(Geometry::from)
                .ok_or_else(|| missing("--geometry"))?;
            let schedule = schedule.ok_or_else(|| missing("--schedule"))?;
            let iterations = args.iterations.ok_or_else(|| missing("--iterations"))?;
            let out_dir = args.out_dir.clone().ok_or_else(|| missing("--out-dir"))?;
            ExperimentConfig::new(
                mdp_source,
                algorithm,
                geometry,
                args.lambda.unwrap_or(0.0),
                schedule,
                iterations,
                args.seeds.clone().unwrap_or_else(|| vec![0]),
                out_dir,
            )
        }
    };

    if let Some(mu) = &args.mu {
        config.mu = parse_dist(mu)?;
    }
    if let Some(nu) = &args.nu {
        config.nu = Some(parse_dist(nu)?);
    }
    if let Some(e) = args.epsilon {
        config.epsilon = e;
    }
    if let Some(d) = args.delta {
        config.delta = d;
    }
    if let Some(m) = args.m_override {
        config.m_override = Some(m);
    }
    if args.coarse_m {
        config.coarse_m_formula = true;
    }
    if let Some(w) = &args.rate_window {
        config.rate_window = Some(parse_window(w)?);
    }
    if let Some(m) = args.rate_metric {
        config.rate_metric = Some(m.into());
    }
    if args.check_invariants {
        config.check_invariants = true;
    }
    if args.record_timing {
        config.record_timing = true;
    }
    // Learner runs default the start distribution instead of failing on an
    // omitted flag.
    if matches!(config.algorithm, Algorithm::Exact | Algorithm::Sample) && config.nu.is_none() {
        config.nu = Some(DistSpec::Uniform);
    }

    let summary = run_experiment(&config)?;
    let mut report = serde_json::json!({
        "output_dir": config.output_dir,
        "runs": config.seeds.len(),
        "iterations": config.n_iterations,
        "config_hash": summary.config_hash,
    });
    if let Some(fit) = &summary.rate_fit {
        report["rate_fit"] = serde_json::json!(fit);
    }
    if let Some(err) = &summary.rate_fit_error {
        report["rate_fit_error"] = serde_json::json!(err);
    }
    if let Some(conc) = &summary.concentrability {
        report["concentrability_max"] = conc.max.clone();
        if !conc.all_finite {
            report["warning"] = serde_json::json!(
                "infinite concentrability: the start distribution misses states the \
                 optimal policy visits, so distribution-mismatch guarantees do not apply"
            );
        }
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn build_mdp_source(
    args: &RunArgs,
    base: Option<MdpSource>,
) -> Result<MdpSource, HarnessError> {
    let flags = [
        args.mdp.is_some(),
        args.garnet.is_some(),
        args.chain.is_some(),
    ];
    if flags.iter().filter(|&&f| f).count() > 1 {
        return Err(HarnessError::InvalidConfig(
            "pass at most one of --mdp, --garnet, --chain".into(),
        ));
    }
    if let Some(path) = &args.mdp {
        return Ok(MdpSource::File { path: path.clone() });
    }
    if let Some(triple) = &args.garnet {
        let (s, a, b) = parse_triple(triple)?;
        let seed = args.mdp_seed.unwrap_or(0);
        return Ok(MdpSource::Garnet {
            n_states: s,
            n_actions: a,
            branching: b,
            cost_seed: seed,
            transition_seed: seed.wrapping_add(1),
            gamma: args.gamma.unwrap_or(0.9),
            c_max: args.c_max.unwrap_or(1.0),
        });
    }
    if let Some(n) = args.chain {
        return Ok(MdpSource::Chain {
            n_states: n,
            slip: args.slip.unwrap_or(0.0),
            gamma: args.gamma.unwrap_or(0.9),
        });
    }
    base.ok_or_else(|| missing("an MDP source (--mdp, --garnet, --chain, or --config)"))
}

fn missing(what: &str) -> HarnessError {
    HarnessError::InvalidConfig(format!("{what} is required"))
}

fn cmd_rates(args: RatesArgs) -> Result<(), HarnessError> {
    let window = parse_window(&args.window)?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&args.dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("run_") && n.ends_with(".csv"))
        })
        .collect();
    paths.sort();
    let fit = fit_from_csvs(&paths, args.metric.into(), (window[0], window[1]))?;
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "runs": paths.len(),
            "metric": format!("{:?}", RateMetric::from(args.metric)).to_lowercase(),
            "window": window,
            "fit": fit,
        }))?
    );
    Ok(())
}

fn cmd_check(args: CheckArgs) -> Result<(), HarnessError> {
    let mdp = load_mdp_json(&args.mdp)?;
    println!(
        "{}",
        serde_json::json!({
            "ok": true,
            "n_states": mdp.n_states(),
            "n_actions": mdp.n_actions(),
            "gamma": mdp.gamma(),
            "c_max": mdp.c_max(),
        })
    );
    Ok(())
}

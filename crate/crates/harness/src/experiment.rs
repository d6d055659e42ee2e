//! Experiment orchestration: a serializable configuration, parallel per-seed
//! execution of the configured algorithm, fixed-schema CSV rows, and an
//! aggregate JSON summary with rate fits.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use geometry::{Geometry, Regularizer};
use mdp_core::{optimal_value, parse_mdp_json, Mdp, Policy, StateDistribution};
use planners::{exact_trpo, uniform_trpo, PlannerConfig, Schedule};
use rayon::prelude::*;
use sample_trpo::{concentrability, sample_based_trpo, ExactEvaluator, LearnerConfig};
use sampler::RestartModel;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{fit_rate, HarnessError, RateFit};

/// Where the MDP under study comes from. Generator sources derive each
/// run's instance seeds by adding the run seed to the configured base seeds,
/// so a multi-seed experiment averages over instances; inline, file, and
/// chain sources give every run the same MDP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdpSource {
    /// A complete MDP JSON document embedded in the config.
    Inline { mdp: serde_json::Value },
    /// Path to an MDP JSON file.
    File { path: PathBuf },
    /// Seeded sparse random MDP; see [`crate::generate_garnet`].
    Garnet {
        n_states: usize,
        n_actions: usize,
        branching: usize,
        cost_seed: u64,
        transition_seed: u64,
        gamma: f64,
        #[serde(default = "default_c_max")]
        c_max: f64,
    },
    /// Left-to-right chain; see [`crate::generate_chain`].
    Chain {
        n_states: usize,
        #[serde(default)]
        slip: f64,
        gamma: f64,
    },
}

fn default_c_max() -> f64 {
    1.0
}

impl MdpSource {
    /// Materializes the MDP for one run.
    pub fn realize(&self, run_seed: u64) -> Result<Mdp, HarnessError> {
        match self {
            MdpSource::Inline { mdp } => Ok(parse_mdp_json(&serde_json::to_string(mdp)?)?),
            MdpSource::File { path } => Ok(mdp_core::load_mdp_json(path)?),
            MdpSource::Garnet {
                n_states,
                n_actions,
                branching,
                cost_seed,
                transition_seed,
                gamma,
                c_max,
            } => crate::generate_garnet(
                *n_states,
                *n_actions,
                *branching,
                cost_seed.wrapping_add(run_seed),
                transition_seed.wrapping_add(run_seed),
                *gamma,
                *c_max,
            ),
            MdpSource::Chain {
                n_states,
                slip,
                gamma,
            } => crate::generate_chain(*n_states, *slip, *gamma),
        }
    }
}

/// Which optimizer the experiment drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Trust-region planning over every state.
    Uniform,
    /// Trust-region planning restricted to the visitation support of `nu`.
    Exact,
    /// Sample-based learning through the restart simulator.
    Sample,
}

/// A start/weight distribution spec, resolved against the realized MDP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistSpec {
    Uniform,
    PointMass { state: usize },
    Explicit { probs: Vec<f64> },
}

impl DistSpec {
    pub fn realize(&self, n_states: usize) -> Result<StateDistribution, HarnessError> {
        match self {
            DistSpec::Uniform => Ok(StateDistribution::uniform(n_states)),
            DistSpec::PointMass { state } => {
                if *state >= n_states {
                    return Err(HarnessError::InvalidConfig(format!(
                        "point mass on state {state} but the MDP has {n_states} states"
                    )));
                }
                Ok(StateDistribution::point_mass(n_states, *state))
            }
            DistSpec::Explicit { probs } => {
                if probs.len() != n_states {
                    return Err(HarnessError::InvalidConfig(format!(
                        "explicit distribution has {} entries but the MDP has {n_states} states",
                        probs.len()
                    )));
                }
                Ok(StateDistribution::new(ndarray::Array1::from_vec(
                    probs.clone(),
                ))?)
            }
        }
    }
}

/// Which gap column a rate fit runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMetric {
    Linf,
    Mu,
    Best,
}

impl RateMetric {
    fn column_name(self) -> &'static str {
        match self {
            RateMetric::Linf => "linf_gap",
            RateMetric::Mu => "mu_gap",
            RateMetric::Best => "best_gap",
        }
    }
}

/// One experiment: an MDP source, an algorithm with its geometry and
/// schedule, the seeds to run, and where artifacts go.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mdp: MdpSource,
    pub algorithm: Algorithm,
    pub geometry: Geometry,
    pub lambda: f64,
    pub schedule: Schedule,
    pub n_iterations: usize,
    pub seeds: Vec<u64>,
    /// Gap-weighting distribution; uniform when omitted.
    #[serde(default = "default_dist")]
    pub mu: DistSpec,
    /// Start distribution, required by the `exact` and `sample` algorithms.
    #[serde(default)]
    pub nu: Option<DistSpec>,
    pub output_dir: PathBuf,
    /// Accuracy target feeding the sample-based batch-size and horizon
    /// formulas.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Failure probability feeding the sample-based batch-size formula.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Desk-scale batch-size override for the sample-based learner.
    #[serde(default)]
    pub m_override: Option<u64>,
    /// Use the coarse iteration-independent batch-size formula.
    #[serde(default)]
    pub coarse_m_formula: bool,
    /// Inclusive `[k_lo, k_hi]` window for the summary rate fit.
    #[serde(default)]
    pub rate_window: Option<[usize; 2]>,
    /// Gap column the rate fit runs on; defaults per algorithm (uniform ->
    /// linf, exact -> mu, sample -> best).
    #[serde(default)]
    pub rate_metric: Option<RateMetric>,
    /// Assert per-iteration improvement and descent inequalities inside the
    /// planners (planner algorithms only).
    #[serde(default)]
    pub check_invariants: bool,
    /// Record real wall-clock milliseconds. Off by default because timing
    /// breaks byte-identical reruns.
    #[serde(default)]
    pub record_timing: bool,
}

fn default_dist() -> DistSpec {
    DistSpec::Uniform
}

fn default_epsilon() -> f64 {
    0.5
}

fn default_delta() -> f64 {
    0.1
}

impl ExperimentConfig {
    pub fn new(
        mdp: MdpSource,
        algorithm: Algorithm,
        geometry: Geometry,
        lambda: f64,
        schedule: Schedule,
        n_iterations: usize,
        seeds: Vec<u64>,
        output_dir: PathBuf,
    ) -> Self {
        ExperimentConfig {
            mdp,
            algorithm,
            geometry,
            lambda,
            schedule,
            n_iterations,
            seeds,
            mu: default_dist(),
            nu: None,
            output_dir,
            epsilon: default_epsilon(),
            delta: default_delta(),
            m_override: None,
            coarse_m_formula: false,
            rate_window: None,
            rate_metric: None,
            check_invariants: false,
            record_timing: false,
        }
    }

    /// The regularizer assembled from the geometry and weight fields.
    pub fn regularizer(&self) -> Result<Regularizer, HarnessError> {
        Ok(match self.geometry {
            Geometry::Euclidean => Regularizer::euclidean(self.lambda)?,
            Geometry::NegEntropy => Regularizer::neg_entropy(self.lambda)?,
        })
    }

    /// The gap column the rate fit runs on.
    pub fn effective_rate_metric(&self) -> RateMetric {
        self.rate_metric.unwrap_or(match self.algorithm {
            Algorithm::Uniform => RateMetric::Linf,
            Algorithm::Exact => RateMetric::Mu,
            Algorithm::Sample => RateMetric::Best,
        })
    }

    /// Cheap structural validation; per-run shape checks happen against the
    /// realized MDP.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seeds.is_empty() {
            return Err(HarnessError::InvalidConfig(
                "at least one seed is required".into(),
            ));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(HarnessError::InvalidConfig(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        if self.schedule == Schedule::RegularizedHarmonic && self.lambda == 0.0 {
            return Err(HarnessError::InvalidConfig(
                "the harmonic schedule requires lambda > 0".into(),
            ));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(HarnessError::InvalidConfig(format!(
                "epsilon must be finite and positive, got {}",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(HarnessError::InvalidConfig(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.m_override == Some(0) {
            return Err(HarnessError::InvalidConfig(
                "m_override must be positive".into(),
            ));
        }
        if matches!(self.algorithm, Algorithm::Exact | Algorithm::Sample) && self.nu.is_none() {
            return Err(HarnessError::InvalidConfig(
                "the exact and sample algorithms require a start distribution nu".into(),
            ));
        }
        match &self.mdp {
            MdpSource::File { path } => {
                if !path.exists() {
                    return Err(HarnessError::InvalidConfig(format!(
                        "MDP file {} does not exist",
                        path.display()
                    )));
                }
            }
            MdpSource::Garnet {
                n_states,
                branching,
                ..
            } => {
                if *branching == 0 || branching > n_states {
                    return Err(HarnessError::InvalidConfig(format!(
                        "branching factor {branching} must lie in 1..={n_states}"
                    )));
                }
            }
            MdpSource::Chain { slip, .. } => {
                if !(0.0..1.0).contains(slip) {
                    return Err(HarnessError::InvalidConfig(format!(
                        "slip probability {slip} must lie in [0, 1)"
                    )));
                }
            }
            MdpSource::Inline { .. } => {}
        }
        Ok(())
    }

    /// Hex SHA-256 over the canonical JSON encoding with `output_dir`
    /// removed: the hash identifies what was computed, not where the
    /// artifacts landed, so reruns into different directories match.
    pub fn hash(&self) -> Result<String, HarnessError> {
        let mut value = serde_json::to_value(self)?;
        value
            .as_object_mut()
            .expect("config serializes to an object")
            .remove("output_dir");
        let canonical = serde_json::to_string(&value)?;
        let digest = Sha256::digest(canonical.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// The fixed CSV schema, one row per recorded iterate.
pub const CSV_COLUMNS: [&str; 10] = [
    "run_id", "seed", "k", "t_k", "M_k", "T", "linf_gap", "mu_gap", "best_gap", "wall_ms",
];

/// One CSV row. Planner runs leave the batch columns empty; sample runs
/// leave `linf_gap` empty. `wall_ms` is zero unless timing was requested,
/// in which case every row of a run carries that run's total wall-clock
/// milliseconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run_id: usize,
    pub seed: u64,
    pub k: usize,
    pub t_k: f64,
    #[serde(rename = "M_k")]
    pub m_k: Option<u64>,
    #[serde(rename = "T")]
    pub horizon: Option<usize>,
    pub linf_gap: Option<f64>,
    pub mu_gap: Option<f64>,
    pub best_gap: Option<f64>,
    pub wall_ms: u64,
}

/// Mean and standard deviation across runs at one iteration. The standard
/// deviation is the sample estimate (n - 1 divisor), zero for a single run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Cross-run gap statistics at one iteration; columns absent from the
/// algorithm's records are omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerKStat {
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linf_gap: Option<MeanStd>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_gap: Option<MeanStd>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_gap: Option<MeanStd>,
}

/// Concentrability coefficients of the runs' instances; infinite values are
/// encoded as the JSON string "infinity", and `all_finite` reports whether
/// the distribution-mismatch guarantees apply to every run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrabilityReport {
    pub per_run: Vec<serde_json::Value>,
    pub max: serde_json::Value,
    pub all_finite: bool,
}

fn encode_coefficient(value: f64) -> serde_json::Value {
    if value.is_finite() {
        serde_json::json!(value)
    } else {
        serde_json::Value::String("infinity".into())
    }
}

/// Aggregate artifact written as `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config_hash: String,
    pub per_k_stats: Vec<PerKStat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_fit: Option<RateFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_fit_error: Option<String>,
    /// Which gap column the rate fit ran on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_metric: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentrability: Option<ConcentrabilityReport>,
    pub versions: BTreeMap<String, String>,
    /// Total wall-clock milliseconds; present only when timing was
    /// requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_wall_ms: Option<u64>,
}

struct RunResult {
    rows: Vec<RunRow>,
    concentrability: Option<f64>,
}

/// Runs the configured algorithm over every seed (in parallel), writes one
/// `run_<run_id>.csv` per seed plus a `summary.json` into the output
/// directory, and returns the summary.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary, HarnessError> {
    config.validate()?;
    fs::create_dir_all(&config.output_dir)?;
    let started = Instant::now();

    let results: Vec<RunResult> = config
        .seeds
        .par_iter()
        .enumerate()
        .map(|(run_id, &seed)| run_single(config, run_id, seed))
        .collect::<Result<_, _>>()?;

    let per_run_rows: Vec<Vec<RunRow>> = results.iter().map(|r| r.rows.clone()).collect();
    let per_k_stats = aggregate_rows(&per_run_rows)?;

    let metric = config.effective_rate_metric();
    let (rate_fit, rate_fit_error, rate_metric) = match config.rate_window {
        None => (None, None, None),
        Some([lo, hi]) => {
            let gaps = metric_means(&per_k_stats, metric)?;
            match fit_rate(&gaps, (lo, hi)) {
                Ok(fit) => (Some(fit), None, Some(metric.column_name().to_string())),
                Err(e @ HarnessError::DegenerateFit(_)) => {
                    (None, Some(e.to_string()), Some(metric.column_name().to_string()))
                }
                Err(e) => return Err(e),
            }
        }
    };

    let coefficients: Vec<f64> = results
        .iter()
        .filter_map(|r| r.concentrability)
        .collect();
    let concentrability = if coefficients.is_empty() {
        None
    } else {
        let max = coefficients.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(ConcentrabilityReport {
            per_run: coefficients.iter().map(|&c| encode_coefficient(c)).collect(),
            max: encode_coefficient(max),
            all_finite: coefficients.iter().all(|c| c.is_finite()),
        })
    };

    let mut versions = BTreeMap::new();
    versions.insert("harness".to_string(), env!("CARGO_PKG_VERSION").to_string());
    versions.insert("csv_schema".to_string(), "1".to_string());

    let summary = ExperimentSummary {
        config_hash: config.hash()?,
        per_k_stats,
        rate_fit,
        rate_fit_error,
        rate_metric,
        concentrability,
        versions,
        total_wall_ms: config
            .record_timing
            .then(|| started.elapsed().as_millis() as u64),
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(config.output_dir.join("summary.json"), text)?;
    Ok(summary)
}

/// Executes one seed's run and writes its CSV.
fn run_single(
    config: &ExperimentConfig,
    run_id: usize,
    seed: u64,
) -> Result<RunResult, HarnessError> {
    let started = Instant::now();
    let mdp = config.mdp.realize(seed)?;
    let n = mdp.n_states();
    let reg = config.regularizer()?;
    let mu = config.mu.realize(n)?;
    let nu = config
        .nu
        .as_ref()
        .map(|spec| spec.realize(n))
        .transpose()?;

    let mut rows: Vec<RunRow>;
    let pi_star: Policy;
    match config.algorithm {
        Algorithm::Uniform | Algorithm::Exact => {
            let mut planner_config =
                PlannerConfig::new(config.n_iterations, config.schedule, reg);
            planner_config.check_invariants = config.check_invariants;
            planner_config.mu = Some(mu.clone());
            let run = if config.algorithm == Algorithm::Uniform {
                uniform_trpo(&mdp, &planner_config)?
            } else {
                planner_config.nu = nu.clone();
                exact_trpo(&mdp, &planner_config)?
            };
            pi_star = run.pi_star;
            rows = run
                .records
                .iter()
                .map(|r| RunRow {
                    run_id,
                    seed,
                    k: r.k,
                    t_k: r.t_k,
                    m_k: None,
                    horizon: None,
                    linf_gap: Some(r.linf_gap),
                    mu_gap: r.mu_gap,
                    best_gap: None,
                    wall_ms: 0,
                })
                .collect();
        }
        Algorithm::Sample => {
            let nu = nu.clone().expect("validated: sample requires nu");
            let model = RestartModel::new(mdp.clone(), nu, seed)?;
            let evaluator = ExactEvaluator::new(mdp.clone(), &reg, mu.clone())?;
            let mut learner_config = LearnerConfig::new(
                config.epsilon,
                config.delta,
                config.n_iterations,
                config.schedule,
                reg,
            );
            learner_config.m_override = config.m_override;
            learner_config.coarse_m_formula = config.coarse_m_formula;
            let report = sample_based_trpo(&model, &learner_config, &evaluator)?;
            pi_star = evaluator.pi_star().clone();
            rows = report
                .records
                .iter()
                .map(|r| RunRow {
                    run_id,
                    seed,
                    k: r.k,
                    t_k: r.t_k,
                    m_k: Some(r.m_k),
                    horizon: Some(r.horizon),
                    linf_gap: None,
                    mu_gap: Some(r.mu_gap),
                    best_gap: Some(r.best_gap),
                    wall_ms: 0,
                })
                .collect();
        }
    }

    let coefficient = match &nu {
        Some(nu) => Some(concentrability(&mdp, &mu, nu, &pi_star)),
        None => None,
    };

    if config.record_timing {
        let elapsed = started.elapsed().as_millis() as u64;
        for row in &mut rows {
            row.wall_ms = elapsed;
        }
    }

    write_run_csv(&config.output_dir.join(format!("run_{run_id}.csv")), &rows)?;
    Ok(RunResult {
        rows,
        concentrability: coefficient,
    })
}

fn write_run_csv(path: &Path, rows: &[RunRow]) -> Result<(), HarnessError> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    writer.write_record(CSV_COLUMNS)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(std::io::Error::from)?;
    Ok(())
}

/// Reads one per-seed CSV back into rows.
pub fn read_run_csv(path: &Path) -> Result<Vec<RunRow>, HarnessError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}

/// Cross-run mean/std per iteration. Every run must carry the same
/// iteration axis (guaranteed for runs of one config).
pub fn aggregate_rows(per_run: &[Vec<RunRow>]) -> Result<Vec<PerKStat>, HarnessError> {
    let Some(first) = per_run.first() else {
        return Ok(Vec::new());
    };
    for (i, rows) in per_run.iter().enumerate() {
        if rows.len() != first.len() {
            return Err(HarnessError::InvalidParameter(format!(
                "run 0 has {} rows but run {i} has {}; cannot aggregate",
                first.len(),
                rows.len()
            )));
        }
    }
    let mut stats = Vec::with_capacity(first.len());
    for i in 0..first.len() {
        let k = first[i].k;
        for (j, rows) in per_run.iter().enumerate() {
            if rows[i].k != k {
                return Err(HarnessError::InvalidParameter(format!(
                    "row {i} is iteration {k} in run 0 but iteration {} in run {j}",
                    rows[i].k
                )));
            }
        }
        stats.push(PerKStat {
            k,
            linf_gap: column_stat(per_run, i, |r| r.linf_gap)?,
            mu_gap: column_stat(per_run, i, |r| r.mu_gap)?,
            best_gap: column_stat(per_run, i, |r| r.best_gap)?,
        });
    }
    Ok(stats)
}

/// Mean/std of one optional column across runs; `None` when the column is
/// absent everywhere, an error when presence is inconsistent.
fn column_stat(
    per_run: &[Vec<RunRow>],
    i: usize,
    column: impl Fn(&RunRow) -> Option<f64>,
) -> Result<Option<MeanStd>, HarnessError> {
    let values: Vec<f64> = per_run.iter().filter_map(|rows| column(&rows[i])).collect();
    if values.is_empty() {
        return Ok(None);
    }
    if values.len() != per_run.len() {
        return Err(HarnessError::InvalidParameter(format!(
            "a gap column is present in {} of {} runs at row {i}; cannot aggregate",
            values.len(),
            per_run.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(Some(MeanStd { mean, std }))
}

/// Extracts the per-iteration means of one gap column, indexed by k.
/// The records must cover a contiguous `k = 0..=N` axis.
pub(crate) fn metric_means(
    stats: &[PerKStat],
    metric: RateMetric,
) -> Result<Vec<f64>, HarnessError> {
    let mut gaps = Vec::with_capacity(stats.len());
    for (i, stat) in stats.iter().enumerate() {
        if stat.k != i {
            return Err(HarnessError::InvalidParameter(format!(
                "records are not a contiguous iteration axis: row {i} is iteration {}",
                stat.k
            )));
        }
        let value = match metric {
            RateMetric::Linf => stat.linf_gap,
            RateMetric::Mu => stat.mu_gap,
            RateMetric::Best => stat.best_gap,
        };
        match value {
            Some(ms) => gaps.push(ms.mean),
            None => {
                return Err(HarnessError::InvalidParameter(format!(
                    "the {} column is not recorded by this algorithm",
                    metric.column_name()
                )))
            }
        }
    }
    Ok(gaps)
}

/// Convenience for the CLI `rates` subcommand: aggregate already-written
/// per-seed CSVs and fit the requested metric.
pub fn fit_from_csvs(
    paths: &[PathBuf],
    metric: RateMetric,
    window: (usize, usize),
) -> Result<RateFit, HarnessError> {
    if paths.is_empty() {
        return Err(HarnessError::InvalidParameter(
            "no run CSVs to fit".into(),
        ));
    }
    let per_run: Vec<Vec<RunRow>> = paths
        .iter()
        .map(|p| read_run_csv(p))
        .collect::<Result<_, _>>()?;
    let stats = aggregate_rows(&per_run)?;
    let gaps = metric_means(&stats, metric)?;
    fit_rate(&gaps, window)
}

/// Recomputes `optimal_value` for an MDP file; used by the CLI `solve`
/// subcommand.
pub fn solve_mdp(
    mdp: &Mdp,
    geometry: Geometry,
    lambda: f64,
    tol: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), HarnessError> {
    let reg = match geometry {
        Geometry::Euclidean => Regularizer::euclidean(lambda)?,
        Geometry::NegEntropy => Regularizer::neg_entropy(lambda)?,
    };
    let (v, pi) = optimal_value(mdp, &reg, tol)?;
    let value = v.0.to_vec();
    let policy = pi
        .probs()
        .outer_iter()
        .map(|row| row.to_vec())
        .collect();
    Ok((value, policy))
}

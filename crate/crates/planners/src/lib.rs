//! Exact-model planners. Both algorithms repeat: evaluate the current
//! policy exactly, form its q-function, and apply the per-state policy
//! update with a scheduled step size. The uniform planner updates every
//! state; the restricted planner updates only states visited by the
//! discounted stationary distribution induced from a start distribution.
//!
//! Each iterate is scored against the optimal regularized value, and the
//! theory's guarantees (monotone improvement, the per-iteration descent
//! inequality) can be asserted as the run progresses.

use geometry::{bregman, omega, omega_grad, GeometryError, Regularizer, RegularizerConstants};
use mdp_core::{
    bellman_pi, discounted_stationary, optimal_value, policy_value, q_function, Mdp, MdpError,
    Policy, StateDistribution, ValueVector,
};
use ndarray::{Array1, Array2};
use policy_update::{netrpo_update, ppg_update, ScheduleKind, StepSize, UpdateError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack for monotone-improvement assertions: exact solves accumulate
/// rounding at this scale over thousands of iterations.
pub const IMPROVEMENT_SLACK: f64 = 1e-9;

/// Residual threshold for the per-iteration descent inequality.
pub const FUNDAMENTAL_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("geometry error: {0}")]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Update(#[from] UpdateError),
    #[error("invariant `{kind}` violated at iteration {k}: residual {residual:.3e}")]
    InvariantViolation { k: usize, kind: &'static str, residual: f64 },
}

/// Step-size schedule selection. `Fixed` carries the constant step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    UnregularizedSqrt,
    RegularizedHarmonic,
    Fixed(f64),
}

/// Evaluates the configured schedule at iteration k.
///
/// `UnregularizedSqrt`: `t_k = (1-gamma) / (C_{omega,1} C_max sqrt(k+1))`,
/// valid for any lambda (it ignores the regularization weight, which is what
/// makes lambda -> 0 continuity hold). `RegularizedHarmonic`:
/// `t_k = 1 / (lambda (k+2))`, requiring lambda > 0 and guaranteeing
/// `lambda t_k <= 1/2`.
pub fn step_size(
    schedule: Schedule,
    k: usize,
    consts: &RegularizerConstants,
    gamma: f64,
    lambda: f64,
) -> Result<StepSize, PlannerError> {
    match schedule {
        Schedule::UnregularizedSqrt => {
            let t = (1.0 - gamma) / (consts.c_omega_1 * consts.c_max() * ((k + 1) as f64).sqrt());
            Ok(StepSize::new(t, ScheduleKind::UnregularizedSqrt)?)
        }
        Schedule::RegularizedHarmonic => {
            if lambda <= 0.0 {
                return Err(PlannerError::InvalidConfig(
                    "the harmonic schedule requires lambda > 0".into(),
                ));
            }
            let t = 1.0 / (lambda * (k + 2) as f64);
            Ok(StepSize::new(t, ScheduleKind::RegularizedHarmonic)?)
        }
        Schedule::Fixed(t) => Ok(StepSize::new(t, ScheduleKind::Fixed)?),
    }
}

/// Configuration shared by both planners.
#[derive(Clone, Debug)]
pub struct PlannerConfig {
    pub n_iterations: usize,
    pub schedule: Schedule,
    pub regularizer: Regularizer,
    /// Assert monotone improvement and the descent inequality every
    /// iteration (adds one extra evaluation per iteration).
    pub check_invariants: bool,
    /// Start distribution defining the visitation support (restricted
    /// planner only).
    pub nu: Option<StateDistribution>,
    /// Treat `d(s) <= support_epsilon` as unvisited. Zero means exact
    /// positivity of the analytically computed distribution.
    pub support_epsilon: f64,
    /// Weighting for the scalar `mu_gap` record column. The restricted
    /// planner falls back to `nu` when absent.
    pub mu: Option<StateDistribution>,
    /// Keep a snapshot of every iterate policy in the result.
    pub store_iterates: bool,
}

impl PlannerConfig {
    pub fn new(n_iterations: usize, schedule: Schedule, regularizer: Regularizer) -> Self {
        PlannerConfig {
            n_iterations,
            schedule,
            regularizer,
            check_invariants: false,
            nu: None,
            support_epsilon: 0.0,
            mu: None,
            store_iterates: false,
        }
    }
}

/// One scored iterate.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IterateRecord {
    pub k: usize,
    pub t_k: f64,
    /// `||v^{pi_k} - v*||_inf`.
    pub linf_gap: f64,
    /// `<mu, v^{pi_k} - v*>` when a weighting was configured.
    pub mu_gap: Option<f64>,
    /// Whether this iterate improved on the previous one (componentwise for
    /// the uniform planner, mu-weighted for the restricted planner). Always
    /// true for k=0.
    pub improved: bool,
}

/// Result of a planner run: per-iterate records (k = 0..=N; empty when
/// N = 0), the final policy, the optimal reference pair, and optional
/// iterate snapshots.
#[derive(Clone, Debug)]
pub struct PlannerRun {
    pub records: Vec<IterateRecord>,
    pub final_policy: Policy,
    pub v_star: ValueVector,
    pub pi_star: Policy,
    pub iterates: Option<Vec<Policy>>,
}

/// Outcome of one descent-inequality evaluation.
#[derive(Clone, Copy, Debug)]
pub struct FundamentalCheck {
    pub holds: bool,
    /// Largest over states of (left side - right side); negative when the
    /// inequality holds strictly.
    pub residual: f64,
}

/// Evaluates the per-iteration descent inequality for one planner step,
/// with `pi_ref` as the comparison policy (typically the optimal policy).
///
/// Per state s the inequality reads
///
/// ```text
/// t_k [(I - gamma P^ref)(v^{pi_k} - v^ref)](s)
///   <= (1 - lambda t_k) B(pi_ref, pi_k)(s) - B(pi_ref, pi_{k+1})(s)
///    + lambda t_k (omega(pi_k)(s) - omega(pi_{k+1})(s))
///    + t_k^2 h^2 / (2 (1 - lambda t_k))
/// ```
///
/// where h bounds the dual norm of any realizable q-vector. The left side
/// is evaluated through the identity
/// `(I - gamma P^ref)(v^{pi_k} - v^ref) = v^{pi_k} - T^ref v^{pi_k}`,
/// which avoids solving for `v^ref`.
pub fn check_fundamental_inequality(
    mdp: &Mdp,
    reg: &Regularizer,
    pi_k: &Policy,
    pi_k1: &Policy,
    pi_ref: &Policy,
    t_k: &StepSize,
) -> Result<FundamentalCheck, PlannerError> {
    let consts = RegularizerConstants::new(reg, mdp.n_actions(), mdp.c_max(), mdp.gamma())?;
    let lambda = reg.lambda();
    let t = t_k.value();
    let v_k = policy_value(mdp, pi_k, reg);
    let applied = bellman_pi(mdp, pi_ref, reg, &v_k);
    let h = consts.q_norm_bound();
    let second_order = if lambda * t < 1.0 {
        t * t * h * h / (2.0 * (1.0 - lambda * t))
    } else {
        f64::INFINITY
    };
    let mut residual = f64::NEG_INFINITY;
    for s in 0..mdp.n_states() {
        let lhs = t * (v_k.0[s] - applied.0[s]);
        let b_k = bregman(reg, pi_ref.row(s), pi_k.row(s))?;
        let b_k1 = bregman(reg, pi_ref.row(s), pi_k1.row(s))?;
        let drift = omega(reg, pi_k.row(s)) - omega(reg, pi_k1.row(s));
        let rhs = (1.0 - lambda * t) * b_k - b_k1 + lambda * t * drift + second_order;
        residual = residual.max(lhs - rhs);
    }
    Ok(FundamentalCheck { holds: residual <= FUNDAMENTAL_TOL, residual })
}

/// Which states one iteration may update.
enum UpdateScope {
    AllStates,
    /// Restrict to the support of `d_{nu, pi_k}`.
    VisitationSupport { nu: StateDistribution, epsilon: f64 },
}

/// Trust-region planning over every state simultaneously. Starts from the
/// uniform policy; improvement is guaranteed componentwise.
pub fn uniform_trpo(mdp: &Mdp, config: &PlannerConfig) -> Result<PlannerRun, PlannerError> {
    run_planner(mdp, config, UpdateScope::AllStates, config.mu.clone())
}

/// Trust-region planning restricted to states the start distribution `nu`
/// actually visits under the current policy. States outside the support
/// keep their current action distribution. Improvement is guaranteed in
/// the mu-weighted scalar sense, not componentwise.
pub fn exact_trpo(mdp: &Mdp, config: &PlannerConfig) -> Result<PlannerRun, PlannerError> {
    let nu = config.nu.clone().ok_or_else(|| {
        PlannerError::InvalidConfig("the restricted planner requires a start distribution nu".into())
    })?;
    if nu.n_states() != mdp.n_states() {
        return Err(PlannerError::InvalidConfig(format!(
            "nu covers {} states but the MDP has {}",
            nu.n_states(),
            mdp.n_states()
        )));
    }
    let weight = config.mu.clone().unwrap_or_else(|| nu.clone());
    run_planner(
        mdp,
        config,
        UpdateScope::VisitationSupport { nu, epsilon: config.support_epsilon },
        Some(weight),
    )
}

fn run_planner(
    mdp: &Mdp,
    config: &PlannerConfig,
    scope: UpdateScope,
    weight: Option<StateDistribution>,
) -> Result<PlannerRun, PlannerError> {
    let reg = &config.regularizer;
    let lambda = reg.lambda();
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    if let Some(mu) = &weight {
        if mu.n_states() != n {
            return Err(PlannerError::InvalidConfig(format!(
                "mu covers {} states but the MDP has {}",
                mu.n_states(),
                n
            )));
        }
    }
    let consts = RegularizerConstants::new(reg, m, mdp.c_max(), mdp.gamma())?;
    let (v_star, pi_star) = optimal_value(mdp, reg, 1e-12)?;

    let mut pi = Policy::uniform(n, m);
    if config.n_iterations == 0 {
        return Ok(PlannerRun {
            records: Vec::new(),
            final_policy: pi.clone(),
            v_star,
            pi_star,
            iterates: config.store_iterates.then(|| vec![pi]),
        });
    }

    let mut records = Vec::with_capacity(config.n_iterations + 1);
    let mut iterates: Option<Vec<Policy>> = config.store_iterates.then(Vec::new);
    let mut prev_v: Option<ValueVector> = None;
    let mut prev_scalar: Option<f64> = None;

    for k in 0..=config.n_iterations {
        let v_k = policy_value(mdp, &pi, reg);

        let mut min_diff = f64::INFINITY;
        let mut linf_gap = 0.0_f64;
        for s in 0..n {
            let diff = v_k.0[s] - v_star.0[s];
            min_diff = min_diff.min(diff);
            linf_gap = linf_gap.max(diff.abs());
        }
        if min_diff < -1e-10 {
            return Err(PlannerError::InvariantViolation {
                k,
                kind: "gap-negativity",
                residual: -min_diff,
            });
        }
        let mu_gap = weight.as_ref().map(|mu| v_k.dot(mu) - v_star.dot(mu));

        let improved = match scope {
            UpdateScope::AllStates => match &prev_v {
                None => true,
                Some(prev) => {
                    let worst = v_k
                        .0
                        .iter()
                        .zip(prev.0.iter())
                        .map(|(new, old)| new - old)
                        .fold(f64::NEG_INFINITY, f64::max);
                    if worst > IMPROVEMENT_SLACK && config.check_invariants {
                        return Err(PlannerError::InvariantViolation {
                            k,
                            kind: "improvement",
                            residual: worst,
                        });
                    }
                    worst <= IMPROVEMENT_SLACK
                }
            },
            UpdateScope::VisitationSupport { .. } => match (&prev_scalar, &mu_gap) {
                (Some(prev), Some(cur)) => {
                    let worst = cur - prev;
                    if worst > IMPROVEMENT_SLACK && config.check_invariants {
                        return Err(PlannerError::InvariantViolation {
                            k,
                            kind: "improvement",
                            residual: worst,
                        });
                    }
                    worst <= IMPROVEMENT_SLACK
                }
                _ => true,
            },
        };

        let t_k = step_size(config.schedule, k, &consts, mdp.gamma(), lambda)?;
        records.push(IterateRecord { k, t_k: t_k.value(), linf_gap, mu_gap, improved });
        if let Some(snaps) = iterates.as_mut() {
            snaps.push(pi.clone());
        }
        if k == config.n_iterations {
            break;
        }

        let updatable: Vec<bool> = match &scope {
            UpdateScope::AllStates => vec![true; n],
            UpdateScope::VisitationSupport { nu, epsilon } => {
                let d = discounted_stationary(mdp, &pi, nu);
                (0..n).map(|s| d.prob(s) > *epsilon).collect()
            }
        };

        let q_k = q_function(mdp, &pi, reg, &v_k);
        let rows: Vec<Array1<f64>> = (0..n)
            .into_par_iter()
            .map(|s| -> Result<Array1<f64>, UpdateError> {
                if !updatable[s] {
                    return Ok(pi.row(s).to_owned());
                }
                match reg.geometry() {
                    geometry::Geometry::Euclidean => ppg_update(pi.row(s), q_k.row(s), &t_k, lambda),
                    geometry::Geometry::NegEntropy => {
                        netrpo_update(pi.row(s), q_k.row(s), &t_k, lambda)
                    }
                }
            })
            .collect::<Result<_, _>>()?;
        let mut probs = Array2::zeros((n, m));
        for (s, row) in rows.iter().enumerate() {
            probs.row_mut(s).assign(row);
        }
        let next_pi = Policy::new(probs)?;

        #[cfg(debug_assertions)]
        drift_within_bound(reg, &consts, &pi, &next_pi, &updatable, k, t_k.value());

        if config.check_invariants && matches!(scope, UpdateScope::AllStates) {
            let check = check_fundamental_inequality(mdp, reg, &pi, &next_pi, &pi_star, &t_k)?;
            if !check.holds {
                return Err(PlannerError::InvariantViolation {
                    k,
                    kind: "fundamental-inequality",
                    residual: check.residual,
                });
            }
        }

        prev_v = Some(v_k);
        prev_scalar = mu_gap;
        pi = next_pi;
    }

    Ok(PlannerRun { records, final_policy: pi, v_star, pi_star, iterates })
}

/// Debug-build assertion that one update moved the regularizer gradient by
/// no more than the analytical drift bound. Only meaningful inside the
/// analyzed step regime `lambda * t <= 1`; a fixed schedule can leave it.
#[cfg(debug_assertions)]
fn drift_within_bound(
    reg: &Regularizer,
    consts: &RegularizerConstants,
    pi: &Policy,
    next_pi: &Policy,
    updatable: &[bool],
    k: usize,
    t: f64,
) {
    if reg.lambda() * t > 1.0 {
        return;
    }
    let bound = consts.a_omega(k, t);
    for s in 0..pi.n_states() {
        if !updatable[s] {
            continue;
        }
        let old = omega_grad(reg, pi.row(s)).expect("iterate rows stay in the gradient domain");
        let new = omega_grad(reg, next_pi.row(s)).expect("iterate rows stay in the gradient domain");
        let drift = old
            .iter()
            .zip(new.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        debug_assert!(
            drift <= bound + 1e-12,
            "gradient drift {drift:.3e} exceeds bound {bound:.3e} at state {s}, iteration {k}"
        );
    }
}

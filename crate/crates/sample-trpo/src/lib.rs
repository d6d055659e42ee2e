//! Sample-based trust-region policy optimization.
//!
//! The learner interacts with the environment only through a restart model:
//! each iteration collects a batch of truncated rollouts, forms the
//! importance-weighted q estimate, and applies the geometry's policy update
//! on every visited state while unvisited states keep their current rows.
//! The trajectory-count and truncation-horizon formulas that guarantee the
//! high-probability convergence rates are implemented exactly and exposed on
//! their own; for desk-scale experiments the batch size can be overridden.
//!
//! Progress is tracked against the true MDP through an [`ExactEvaluator`]
//! owned by the caller. The learner itself never reads transition or cost
//! tables; the evaluator is a diagnostic side channel.

use std::f64::consts::PI;

use geometry::{Geometry, GeometryError, Regularizer, RegularizerConstants};
use mdp_core::{
    discounted_stationary, optimal_value, policy_value, Mdp, MdpError, Policy,
    StateDistribution, ValueVector,
};
use ndarray::{Array1, Array2};
use planners::{step_size, PlannerError, Schedule};
use policy_update::{netrpo_update, ppg_update, UpdateError};
use rayon::prelude::*;
use sampler::{collect_batch, RestartModel};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("invalid learner config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Update(#[from] UpdateError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Trajectories required at iteration k so that, with probability at least
/// 1 - delta over all iterations, the batch objective stays epsilon-close to
/// its exact counterpart: `ceil((8 r_omega(k)^2 / eps^2) (S ln(2A) + ln(1/delta_k)))`
/// with the per-iteration confidence split `delta_k = 6 delta / (pi^2 (k+1)^2)`.
///
/// Values beyond the u64 range saturate at `u64::MAX`.
pub fn required_trajectories(
    consts: &RegularizerConstants,
    k: usize,
    epsilon: f64,
    delta: f64,
    n_states: usize,
) -> u64 {
    assert!(epsilon > 0.0 && epsilon.is_finite(), "epsilon must be positive");
    assert!(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    assert!(n_states >= 1, "n_states must be positive");
    let r = consts.r_omega(k);
    let delta_split = 6.0 * delta / (PI * PI * ((k + 1) as f64).powi(2));
    let inner =
        n_states as f64 * (2.0 * consts.n_actions() as f64).ln() + (1.0 / delta_split).ln();
    saturating_ceil(8.0 * r * r / (epsilon * epsilon) * inner)
}

/// The coarser iteration-independent trajectory count
/// `ceil(A^2 C_max_lambda^2 (S ln(2A) + ln(1/delta)) / ((1-gamma)^2 eps^2))`,
/// kept for comparison against [`required_trajectories`].
pub fn required_trajectories_coarse(
    consts: &RegularizerConstants,
    epsilon: f64,
    delta: f64,
    n_states: usize,
) -> u64 {
    assert!(epsilon > 0.0 && epsilon.is_finite(), "epsilon must be positive");
    assert!(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    assert!(n_states >= 1, "n_states must be positive");
    let a = consts.n_actions() as f64;
    let inner = n_states as f64 * (2.0 * a).ln() + (1.0 / delta).ln();
    let numerator = a * a * consts.c_max_lambda * consts.c_max_lambda * inner;
    let denominator = (1.0 - consts.gamma()).powi(2) * epsilon * epsilon;
    saturating_ceil(numerator / denominator)
}

/// Rollout and restart-chain truncation length
/// `max(1, ceil(ln(8 r_omega(k) / eps) / (1 - gamma)))`, the horizon at which
/// the geometric tail gamma^T drops below eps / (8 r_omega(k)).
pub fn truncation_horizon(consts: &RegularizerConstants, k: usize, epsilon: f64) -> usize {
    assert!(epsilon > 0.0 && epsilon.is_finite(), "epsilon must be positive");
    let t = ((8.0 * consts.r_omega(k) / epsilon).ln() / (1.0 - consts.gamma())).ceil();
    if t < 1.0 {
        1
    } else {
        t as usize
    }
}

fn saturating_ceil(x: f64) -> u64 {
    let c = x.ceil();
    if c >= u64::MAX as f64 {
        u64::MAX
    } else {
        c.max(0.0) as u64
    }
}

/// The concentrability coefficient `max_s d_{mu,pi*}(s) / nu(s)`: how badly
/// the restart distribution can undercover states the optimal policy visits
/// from mu. Conventions: 0/0 = 0 and positive/0 = infinity. Finite values
/// are required for the global-optimality guarantees to apply.
pub fn concentrability(
    mdp: &Mdp,
    mu: &StateDistribution,
    nu: &StateDistribution,
    pi_star: &Policy,
) -> f64 {
    let d = discounted_stationary(mdp, pi_star, mu);
    let mut worst = 0.0_f64;
    for s in 0..mdp.n_states() {
        let visit = d.prob(s);
        if visit == 0.0 {
            continue;
        }
        if nu.prob(s) == 0.0 {
            return f64::INFINITY;
        }
        worst = worst.max(visit / nu.prob(s));
    }
    worst
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Target accuracy entering the trajectory-count and horizon formulas.
    pub epsilon: f64,
    /// Overall confidence level in (0, 1).
    pub delta: f64,
    /// Number of policy updates N; records cover k = 0..=N.
    pub n_iterations: usize,
    pub schedule: Schedule,
    pub regularizer: Regularizer,
    /// Fixed per-iteration batch size for desk-scale runs. When unset, the
    /// exact formula decides (and typically demands millions of trajectories).
    pub m_override: Option<u64>,
    /// Use [`required_trajectories_coarse`] instead of the default formula
    /// when no override is given.
    pub coarse_m_formula: bool,
}

impl LearnerConfig {
    pub fn new(
        epsilon: f64,
        delta: f64,
        n_iterations: usize,
        schedule: Schedule,
        regularizer: Regularizer,
    ) -> Self {
        LearnerConfig {
            epsilon,
            delta,
            n_iterations,
            schedule,
            regularizer,
            m_override: None,
            coarse_m_formula: false,
        }
    }

    fn validate(&self) -> Result<(), LearnerError> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(LearnerError::InvalidConfig(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(LearnerError::InvalidConfig(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.m_override == Some(0) {
            return Err(LearnerError::InvalidConfig(
                "m_override must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One learner iteration: the policy pi_k before its update, the step and
/// batch parameters used, and the exact evaluation gaps.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LearnerRecord {
    pub k: usize,
    pub t_k: f64,
    pub m_k: u64,
    pub horizon: usize,
    /// mu-weighted gap of pi_k: <mu, v^{pi_k} - v*>.
    pub mu_gap: f64,
    /// Gap of the best policy seen so far; nonincreasing in k.
    pub best_gap: f64,
}

#[derive(Clone, Debug)]
pub struct LearnerReport {
    pub records: Vec<LearnerRecord>,
    /// Snapshot of the policy with the smallest mu-gap across k = 0..=N.
    pub best_policy: Policy,
    pub final_policy: Policy,
}

/// Exact diagnostic access to the true MDP for progress evaluation.
///
/// The learner's sampling path never touches this; the harness builds it
/// from the same MDP it wrapped into the restart model.
#[derive(Clone, Debug)]
pub struct ExactEvaluator {
    mdp: Mdp,
    reg: Regularizer,
    mu: StateDistribution,
    v_star: ValueVector,
    pi_star: Policy,
}

impl ExactEvaluator {
    pub fn new(mdp: Mdp, reg: &Regularizer, mu: StateDistribution) -> Result<Self, LearnerError> {
        if mu.n_states() != mdp.n_states() {
            return Err(LearnerError::InvalidConfig(format!(
                "evaluation distribution covers {} states but the MDP has {}",
                mu.n_states(),
                mdp.n_states()
            )));
        }
        let (v_star, pi_star) = optimal_value(&mdp, reg, 1e-12)?;
        Ok(ExactEvaluator { mdp, reg: *reg, mu, v_star, pi_star })
    }

    pub fn n_states(&self) -> usize {
        self.mdp.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.mdp.n_actions()
    }

    pub fn pi_star(&self) -> &Policy {
        &self.pi_star
    }

    pub fn v_star(&self) -> &ValueVector {
        &self.v_star
    }

    pub fn mu(&self) -> &StateDistribution {
        &self.mu
    }

    /// mu-weighted optimality gap of a policy, exact up to solver precision.
    pub fn mu_gap(&self, policy: &Policy) -> f64 {
        let v = policy_value(&self.mdp, policy, &self.reg);
        let gap = v.dot(&self.mu) - self.v_star.dot(&self.mu);
        debug_assert!(gap >= -1e-9, "mu-gap fell below the numerical floor: {gap}");
        gap
    }

    /// Largest per-state gap, exact up to solver precision.
    pub fn linf_gap(&self, policy: &Policy) -> f64 {
        policy_value(&self.mdp, policy, &self.reg).linf_distance(&self.v_star)
    }
}

/// Runs N iterations of batch-driven policy optimization against `model`.
///
/// Per iteration: compute (t_k, M_k, T), collect the batch, update every
/// visited state with the geometry's proximal rule using the batch estimate
/// q_hat(s, .), and keep the current row on unvisited states. The exact
/// evaluator supplies mu-gaps and drives best-policy tracking. The whole run
/// is a deterministic function of (model seed, config).
pub fn sample_based_trpo(
    model: &RestartModel,
    config: &LearnerConfig,
    eval: &ExactEvaluator,
) -> Result<LearnerReport, LearnerError> {
    config.validate()?;
    if eval.n_states() != model.n_states() || eval.n_actions() != model.n_actions() {
        return Err(LearnerError::InvalidConfig(
            "evaluator and restart model describe different MDP shapes".into(),
        ));
    }
    let reg = &config.regularizer;
    let lambda = reg.lambda();
    let consts = RegularizerConstants::new(reg, model.n_actions(), model.c_max(), model.gamma())?;
    let (n, n_actions) = (model.n_states(), model.n_actions());

    let mut pi = Policy::uniform(n, n_actions);
    if config.n_iterations == 0 {
        return Ok(LearnerReport {
            records: Vec::new(),
            best_policy: pi.clone(),
            final_policy: pi,
        });
    }

    let mut best_gap = f64::INFINITY;
    let mut best_policy = pi.clone();
    let mut records = Vec::with_capacity(config.n_iterations + 1);

    for k in 0..=config.n_iterations {
        let mu_gap = eval.mu_gap(&pi);
        if mu_gap < best_gap {
            best_gap = mu_gap;
            best_policy = pi.clone();
        }
        let t_k = step_size(config.schedule, k, &consts, model.gamma(), lambda)?;
        let m_k = config.m_override.unwrap_or_else(|| {
            if config.coarse_m_formula {
                required_trajectories_coarse(&consts, config.epsilon, config.delta, n)
            } else {
                required_trajectories(&consts, k, config.epsilon, config.delta, n)
            }
        });
        let horizon = truncation_horizon(&consts, k, config.epsilon);
        records.push(LearnerRecord { k, t_k: t_k.value(), m_k, horizon, mu_gap, best_gap });
        if k == config.n_iterations {
            break;
        }

        let batch = collect_batch(model, &pi, reg, m_k, horizon, k);
        let rows: Vec<Array1<f64>> = (0..n)
            .into_par_iter()
            .map(|s| -> Result<Array1<f64>, LearnerError> {
                if batch.state_visits(s) == 0 {
                    return Ok(pi.row(s).to_owned());
                }
                let row = match reg.geometry() {
                    Geometry::Euclidean => {
                        ppg_update(pi.row(s), batch.q_hat.row(s), &t_k, lambda)?
                    }
                    Geometry::NegEntropy => {
                        netrpo_update(pi.row(s), batch.q_hat.row(s), &t_k, lambda)?
                    }
                };
                Ok(row)
            })
            .collect::<Result<_, _>>()?;
        let mut probs = Array2::zeros((n, n_actions));
        for (s, row) in rows.iter().enumerate() {
            probs.row_mut(s).assign(row);
        }
        pi = Policy::new(probs)?;
    }

    Ok(LearnerReport { records, best_policy, final_policy: pi })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclid_consts() -> RegularizerConstants {
        let reg = Regularizer::unregularized();
        RegularizerConstants::new(&reg, 2, 1.0, 0.9).unwrap()
    }

    #[test]
    fn trajectory_count_matches_the_frozen_formula_value() {
        // Direct evaluation: r = 4 * 2 * 1 / 0.1 = 80, split confidence
        // 0.6 / pi^2, inner sum 5 ln 4 + ln(pi^2 / 0.6), scale 8 * 80^2 / 0.25.
        let m = required_trajectories(&euclid_consts(), 0, 0.5, 0.1, 5);
        assert_eq!(m, 1_993_064);
    }

    #[test]
    fn doubling_epsilon_quarters_the_trajectory_count() {
        let consts = euclid_consts();
        let fine = required_trajectories(&consts, 0, 0.25, 0.1, 5);
        let coarse = required_trajectories(&consts, 0, 0.5, 0.1, 5);
        assert!(fine >= 4 * coarse - 4);
        assert!(fine <= 4 * coarse + 4);
    }

    #[test]
    fn entropy_trajectory_count_follows_the_log_squared_formula() {
        let reg = Regularizer::neg_entropy(1.0).unwrap();
        let consts = RegularizerConstants::new(&reg, 2, 1.0, 0.9).unwrap();
        let (epsilon, delta, n_states) = (0.5, 0.1, 5);
        let mut previous = 0;
        for k in [1usize, 7, 100, 911] {
            let c_max_lambda = 1.0 + 2.0_f64.ln();
            let r = 4.0 * 2.0 * c_max_lambda / (1.0 - 0.9) * (1.0 + (k as f64).ln());
            let split = 6.0 * delta / (PI * PI * ((k + 1) as f64).powi(2));
            let longhand = (8.0 * r * r / (epsilon * epsilon)
                * (n_states as f64 * 4.0_f64.ln() + (1.0 / split).ln()))
            .ceil() as u64;
            let got = required_trajectories(&consts, k, epsilon, delta, n_states);
            assert_eq!(got, longhand, "k = {k}");
            assert!(got > previous, "count must grow with k");
            previous = got;
        }
    }

    #[test]
    fn coarse_count_is_iteration_independent() {
        let reg = Regularizer::neg_entropy(1.0).unwrap();
        let consts = RegularizerConstants::new(&reg, 3, 1.0, 0.9).unwrap();
        let m = required_trajectories_coarse(&consts, 0.5, 0.1, 4);
        let a = 3.0_f64;
        let c = 1.0 + 3.0_f64.ln();
        let longhand =
            (a * a * c * c * (4.0 * 6.0_f64.ln() + 10.0_f64.ln()) / (0.1 * 0.1 * 0.25)).ceil();
        assert_eq!(m, longhand as u64);
    }

    #[test]
    fn horizon_pins() {
        // r_omega = 4 * 1 * 1 / 0.1 = 40 with a single action.
        let reg = Regularizer::unregularized();
        let consts = RegularizerConstants::new(&reg, 1, 1.0, 0.9).unwrap();
        assert_eq!(truncation_horizon(&consts, 0, 0.4), 67);
        // epsilon = 8 r makes the log vanish; the horizon clamps to 1.
        assert_eq!(truncation_horizon(&consts, 0, 8.0 * consts.r_omega(0)), 1);
        assert_eq!(truncation_horizon(&consts, 0, 400.0), 1);
    }

    #[test]
    fn halving_epsilon_extends_the_horizon_by_a_fixed_amount() {
        let consts = euclid_consts();
        let shift = 2.0_f64.ln() / 0.1;
        for epsilon in [0.8, 0.4, 0.2, 0.1] {
            let t = truncation_horizon(&consts, 0, epsilon) as f64;
            let t_half = truncation_horizon(&consts, 0, epsilon / 2.0) as f64;
            assert!((t_half - t - shift).abs() <= 1.0);
        }
    }
}

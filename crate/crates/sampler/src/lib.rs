//! Simulation access to an MDP through a restart interface.
//!
//! The environment is wrapped in a [`RestartModel`] that only exposes
//! `reset` (draw a start state from the restart distribution nu) and `step`
//! (draw a successor and reveal the incurred cost). On top of it sit the
//! three sampling primitives a sample-based learner needs:
//!
//! - [`sample_restart_state`]: a state distributed as the horizon-truncated
//!   discounted visitation distribution of the current policy,
//! - [`truncated_rollout_q`]: a Monte-Carlo estimate of the regularized
//!   q-function from one truncated rollout,
//! - [`collect_batch`]: many such trajectories assembled into visit counts
//!   and an importance-weighted q estimate per state-action pair.
//!
//! Every trajectory draws from its own counter-based RNG stream keyed by
//! (model seed, iteration, trajectory index), so batches are bit-identical
//! regardless of thread count or scheduling order.

use geometry::Regularizer;
use mdp_core::{Mdp, Policy, StateDistribution};
use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

mod log;

pub use log::{read_trajectory_log, write_trajectory_log, TrajectoryRecord, RECORD_BYTES};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler input: {0}")]
    InvalidParameter(String),
    #[error("trajectory log io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed trajectory log: {0}")]
    MalformedLog(String),
}

/// An MDP hidden behind reset/step access plus the restart distribution nu.
///
/// Learners interact with the environment exclusively through this type;
/// the transition and cost tables are not readable from it.
#[derive(Clone, Debug)]
pub struct RestartModel {
    mdp: Mdp,
    nu: StateDistribution,
    rng_seed: u64,
}

impl RestartModel {
    pub fn new(mdp: Mdp, nu: StateDistribution, rng_seed: u64) -> Result<Self, SamplerError> {
        if nu.n_states() != mdp.n_states() {
            return Err(SamplerError::InvalidParameter(format!(
                "restart distribution covers {} states but the MDP has {}",
                nu.n_states(),
                mdp.n_states()
            )));
        }
        Ok(RestartModel { mdp, nu, rng_seed })
    }

    pub fn n_states(&self) -> usize {
        self.mdp.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.mdp.n_actions()
    }

    pub fn gamma(&self) -> f64 {
        self.mdp.gamma()
    }

    /// The declared cost ceiling. A scalar piece of problem metadata, not
    /// table access: sample-count formulas need it.
    pub fn c_max(&self) -> f64 {
        self.mdp.c_max()
    }

    pub fn seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn nu(&self) -> &StateDistribution {
        &self.nu
    }

    /// Draws a start state from nu.
    pub fn reset(&self, rng: &mut impl Rng) -> usize {
        draw_categorical(self.nu.probs(), rng)
    }

    /// Draws the successor of (s, a) and reveals the cost c(s, a).
    pub fn step(&self, s: usize, a: usize, rng: &mut impl Rng) -> (usize, f64) {
        let next = draw_categorical(self.mdp.transition_row(s, a), rng);
        (next, self.mdp.cost()[[s, a]])
    }
}

/// Inverse-CDF draw from a probability row. Entries with zero probability
/// are never selected; accumulated rounding at the tail falls back to the
/// last positive-probability index.
fn draw_categorical(row: ArrayView1<'_, f64>, rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}

/// The RNG stream for trajectory m of iteration k under a model seed.
///
/// Streams are disjoint across (iteration, trajectory) pairs, which is what
/// makes parallel batch collection reproducible: a trajectory's draws depend
/// only on this triple, never on scheduling.
pub fn trajectory_rng(seed: u64, iteration: usize, trajectory: u64) -> ChaCha12Rng {
    assert!(
        (iteration as u64) < (1 << 32) && trajectory < (1 << 32),
        "iteration and trajectory indices must fit in 32 bits"
    );
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(((iteration as u64) << 32) | trajectory);
    rng
}

/// Samples a state from the truncated discounted visitation distribution of
/// `policy` started at nu.
///
/// The chain accepts its current state with probability 1 - gamma at each of
/// the first `horizon` time steps and otherwise advances under the policy;
/// if no acceptance happens the state reached at time `horizon` is returned.
/// The result is within total-variation distance 2 * gamma^horizon of the
/// untruncated visitation distribution.
pub fn sample_restart_state(
    model: &RestartModel,
    policy: &Policy,
    horizon: usize,
    rng: &mut impl Rng,
) -> usize {
    assert!(horizon >= 1, "horizon must be at least 1");
    let gamma = model.gamma();
    let mut s = model.reset(rng);
    for _ in 0..horizon {
        if rng.gen::<f64>() >= gamma {
            return s;
        }
        let a = draw_categorical(policy.row(s), rng);
        (s, _) = model.step(s, a, rng);
    }
    s
}

/// One truncated rollout estimate of the regularized q-function at (s, a).
///
/// Returns sum_{t < horizon} gamma^t (c(s_t, a_t) + lambda * omega_{s_t}(policy))
/// along a single simulated trajectory that starts with (s, a) and then
/// follows `policy`. The regularization term is evaluated from the known
/// policy table, not estimated. The value lies in [0, C_max_lambda / (1 - gamma)].
pub fn truncated_rollout_q(
    model: &RestartModel,
    policy: &Policy,
    reg: &Regularizer,
    s: usize,
    a: usize,
    horizon: usize,
    rng: &mut impl Rng,
) -> f64 {
    assert!(horizon >= 1, "horizon must be at least 1");
    let gamma = model.gamma();
    let lambda = reg.lambda();
    let mut total = 0.0;
    let mut discount = 1.0;
    let (mut s_t, mut a_t) = (s, a);
    for t in 0..horizon {
        let hold_cost = if lambda > 0.0 {
            lambda * geometry::omega(reg, policy.row(s_t))
        } else {
            0.0
        };
        let (next, cost) = model.step(s_t, a_t, rng);
        total += discount * (cost + hold_cost);
        discount *= gamma;
        if t + 1 == horizon {
            break;
        }
        s_t = next;
        a_t = draw_categorical(policy.row(s_t), rng);
    }
    total
}

/// The data gathered from one batch of trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryBatch {
    /// States visited at least once, ascending.
    pub visited: Vec<usize>,
    /// Visit counts n(s, a).
    pub counts: Array2<u64>,
    /// Importance-weighted estimates: q_hat(s, a) = A * sum of rollout
    /// estimates at (s, a) / total visits to s. Exactly zero wherever
    /// n(s, a) = 0.
    pub q_hat: Array2<f64>,
    /// Number of trajectories collected.
    pub m_used: u64,
    /// Truncation horizon used for both the restart chain and the rollouts.
    pub horizon: usize,
}

impl TrajectoryBatch {
    /// Total visits n(s) to a state across all actions.
    pub fn state_visits(&self, s: usize) -> u64 {
        self.counts.row(s).sum()
    }
}

/// Collects `m_trajectories` independent trajectories for iteration
/// `iteration` and assembles them into a [`TrajectoryBatch`].
///
/// Each trajectory m draws its start state via [`sample_restart_state`], a
/// uniform action, and one [`truncated_rollout_q`] estimate, all from the
/// stream keyed by (model seed, iteration, m). Trajectories run in parallel;
/// accumulation happens sequentially in trajectory order so the result is
/// bit-identical across thread counts.
pub fn collect_batch(
    model: &RestartModel,
    policy: &Policy,
    reg: &Regularizer,
    m_trajectories: u64,
    horizon: usize,
    iteration: usize,
) -> TrajectoryBatch {
    let (batch, _) = run_batch(model, policy, reg, m_trajectories, horizon, iteration);
    batch
}

/// Like [`collect_batch`], additionally returning the per-trajectory records
/// (start state, action, estimate) for offline inspection or a binary dump.
pub fn collect_batch_logged(
    model: &RestartModel,
    policy: &Policy,
    reg: &Regularizer,
    m_trajectories: u64,
    horizon: usize,
    iteration: usize,
) -> (TrajectoryBatch, Vec<TrajectoryRecord>) {
    run_batch(model, policy, reg, m_trajectories, horizon, iteration)
}

fn run_batch(
    model: &RestartModel,
    policy: &Policy,
    reg: &Regularizer,
    m_trajectories: u64,
    horizon: usize,
    iteration: usize,
) -> (TrajectoryBatch, Vec<TrajectoryRecord>) {
    assert!(m_trajectories >= 1, "a batch needs at least one trajectory");
    assert_eq!(policy.n_states(), model.n_states());
    assert_eq!(policy.n_actions(), model.n_actions());

    let n_actions = model.n_actions();
    let records: Vec<TrajectoryRecord> = (0..m_trajectories)
        .into_par_iter()
        .map(|m| {
            let mut rng = trajectory_rng(model.seed(), iteration, m);
            let s = sample_restart_state(model, policy, horizon, &mut rng);
            let a = rng.gen_range(0..n_actions);
            let estimate = truncated_rollout_q(model, policy, reg, s, a, horizon, &mut rng);
            TrajectoryRecord {
                iteration: iteration as u32,
                m: m as u32,
                state: s as u32,
                action: a as u32,
                estimate,
            }
        })
        .collect();

    let n = model.n_states();
    let mut counts = Array2::<u64>::zeros((n, n_actions));
    let mut sums = Array2::<f64>::zeros((n, n_actions));
    for rec in &records {
        counts[[rec.state as usize, rec.action as usize]] += 1;
        sums[[rec.state as usize, rec.action as usize]] += rec.estimate;
    }

    let mut q_hat = Array2::<f64>::zeros((n, n_actions));
    let mut visited = Vec::new();
    for s in 0..n {
        let state_total: u64 = counts.row(s).sum();
        if state_total == 0 {
            continue;
        }
        visited.push(s);
        for a in 0..n_actions {
            if counts[[s, a]] > 0 {
                q_hat[[s, a]] = n_actions as f64 * sums[[s, a]] / state_total as f64;
            }
        }
    }

    let batch = TrajectoryBatch { visited, counts, q_hat, m_used: m_trajectories, horizon };
    (batch, records)
}

//! Seeded MDP generators: sparse random MDPs with a fixed branching factor
//! and the classic left-to-right chain.

use mdp_core::Mdp;
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Exp1;

use crate::HarnessError;

/// Generates a random MDP in which every state-action pair reaches exactly
/// `branching` distinct next states. Transition targets and weights are
/// drawn from `transition_seed`, costs from `cost_seed`; the result is fully
/// determined by the two seeds. Weights over the chosen targets follow the
/// flat Dirichlet (independent unit exponentials, normalized), and costs are
/// uniform on `[0, c_max]`.
pub fn generate_garnet(
    n_states: usize,
    n_actions: usize,
    branching: usize,
    cost_seed: u64,
    transition_seed: u64,
    gamma: f64,
    c_max: f64,
) -> Result<Mdp, HarnessError> {
    if n_states == 0 || n_actions == 0 {
        return Err(HarnessError::InvalidParameter(format!(
            "need at least one state and one action, got {n_states}x{n_actions}"
        )));
    }
    if branching == 0 || branching > n_states {
        return Err(HarnessError::InvalidParameter(format!(
            "branching factor {branching} must lie in 1..={n_states}"
        )));
    }

    let mut transition_rng = ChaCha12Rng::seed_from_u64(transition_seed);
    let mut transition = Array3::zeros((n_states, n_actions, n_states));
    for s in 0..n_states {
        for a in 0..n_actions {
            let targets = rand::seq::index::sample(&mut transition_rng, n_states, branching);
            let weights: Vec<f64> = (0..branching)
                .map(|_| transition_rng.sample::<f64, _>(Exp1))
                .collect();
            let total: f64 = weights.iter().sum();
            for (t, w) in targets.iter().zip(&weights) {
                transition[[s, a, t]] = w / total;
            }
        }
    }

    let mut cost_rng = ChaCha12Rng::seed_from_u64(cost_seed);
    let cost = Array2::from_shape_fn((n_states, n_actions), |_| cost_rng.gen::<f64>() * c_max);

    Ok(Mdp::new(transition, cost, gamma, c_max)?)
}

/// Generates the left-to-right chain: action 0 advances one state with
/// probability `1 - slip` (and stalls otherwise), action 1 resets to state 0,
/// and the last state absorbs under action 0. Every state costs 1 except the
/// terminal state, which is free.
pub fn generate_chain(n_states: usize, slip: f64, gamma: f64) -> Result<Mdp, HarnessError> {
    if n_states == 0 {
        return Err(HarnessError::InvalidParameter(
            "need at least one state".into(),
        ));
    }
    if !(0.0..1.0).contains(&slip) {
        return Err(HarnessError::InvalidParameter(format!(
            "slip probability {slip} must lie in [0, 1)"
        )));
    }
    let n = n_states;
    let mut transition = Array3::zeros((n, 2, n));
    for s in 0..n {
        if s + 1 < n {
            transition[[s, 0, s + 1]] = 1.0 - slip;
            transition[[s, 0, s]] = slip;
        } else {
            transition[[s, 0, s]] = 1.0;
        }
        transition[[s, 1, 0]] = 1.0;
    }
    let mut cost = Array2::from_elem((n, 2), 1.0);
    cost[[n - 1, 0]] = 0.0;
    cost[[n - 1, 1]] = 0.0;
    Ok(Mdp::new(transition, cost, gamma, 1.0)?)
}

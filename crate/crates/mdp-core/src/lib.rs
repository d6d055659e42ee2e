//! Finite tabular MDPs with regularized Bellman machinery.
//!
//! The model is a finite MDP (S, A, P, C, gamma) with costs in
//! `[0, C_max]`. A [`Regularizer`] shapes the per-state cost of a policy to
//! `c_lambda(s) = <pi(.|s), C(s,.)> + lambda * omega_s(pi)`, which keeps all
//! regularized values inside `[0, C_max_lambda / (1 - gamma)]`.
//!
//! Operations cover exact policy evaluation, q-functions, the policy and
//! optimality Bellman operators, value iteration with regularized-greedy
//! extraction, discounted stationary distributions, and the directional
//! derivative of the value with respect to the policy. All types are
//! immutable after construction and every operation is a pure function, so
//! everything here is safe to share across threads.

mod io;
mod linalg;
mod ops;
mod types;

pub use geometry::{Geometry, Regularizer, RegularizerConstants};
pub use io::{load_mdp_json, mdp_to_json, parse_mdp_json, save_mdp_json};
pub use ops::{
    bellman_opt, bellman_opt_with_policy, bellman_pi, directional_derivative,
    discounted_stationary, extended_value, optimal_value, optimal_value_with_cap, policy_cost,
    policy_transition, policy_value, q_function, DEFAULT_ITERATION_CAP,
};
pub use types::{Mdp, MdpError, Policy, QFunction, StateDistribution, ValueVector};

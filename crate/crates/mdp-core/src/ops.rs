use geometry::{bregman, omega, Geometry, Regularizer};
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::linalg;
use crate::types::{Mdp, MdpError, Policy, QFunction, StateDistribution, ValueVector};

/// Default sweep cap for value iteration.
pub const DEFAULT_ITERATION_CAP: usize = 1_000_000;

/// The state transition matrix `P^pi[s][s'] = sum_a pi(a|s) P[s][a][s']`.
pub fn policy_transition(mdp: &Mdp, policy: &Policy) -> Array2<f64> {
    let n = mdp.n_states();
    let mut p_pi = Array2::zeros((n, n));
    for s in 0..n {
        let mat = mdp.transition().slice(s![s, .., ..]).to_owned();
        let row = policy.row(s).dot(&mat);
        p_pi.row_mut(s).assign(&row);
    }
    p_pi
}

/// Per-state regularizer values `omega_s(pi)`.
fn omega_per_state(policy: &Policy, reg: &Regularizer) -> Array1<f64> {
    Array1::from_iter(policy.probs().outer_iter().map(|row| omega(reg, row)))
}

/// The regularized cost of a policy, `c_lambda(s) = <pi(.|s), C(s,.)> +
/// lambda * omega_s(pi)`.
pub fn policy_cost(mdp: &Mdp, policy: &Policy, reg: &Regularizer) -> Array1<f64> {
    let lambda = reg.lambda();
    Array1::from_iter((0..mdp.n_states()).map(|s| {
        policy.row(s).dot(&mdp.cost().row(s)) + lambda * omega(reg, policy.row(s))
    }))
}

/// Exact regularized value of a policy: the unique solution of
/// `(I - gamma P^pi) v = c_lambda^pi`.
pub fn policy_value(mdp: &Mdp, policy: &Policy, reg: &Regularizer) -> ValueVector {
    let n = mdp.n_states();
    let p_pi = policy_transition(mdp, policy);
    let c = policy_cost(mdp, policy, reg);
    let mut a = Array2::eye(n);
    a.scaled_add(-mdp.gamma(), &p_pi);
    let v = ValueVector(linalg::solve(a, &c));
    debug_assert!(
        bellman_pi(mdp, policy, reg, &v).linf_distance(&v) <= 1e-10,
        "policy evaluation residual exceeds 1e-10"
    );
    v
}

/// State-action values on top of an evaluated policy:
/// `q(s,a) = C(s,a) + lambda * omega_s(pi) + gamma * sum_s' P(s'|s,a) v(s')`.
pub fn q_function(mdp: &Mdp, policy: &Policy, reg: &Regularizer, v: &ValueVector) -> QFunction {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let lambda = reg.lambda();
    let omegas = omega_per_state(policy, reg);
    let mut q = Array2::zeros((n, m));
    for s in 0..n {
        let future = mdp.transition().slice(s![s, .., ..]).dot(&v.0);
        for a in 0..m {
            q[[s, a]] = mdp.cost()[[s, a]] + lambda * omegas[s] + mdp.gamma() * future[a];
        }
    }
    QFunction(q)
}

/// One application of the linear regularized Bellman operator,
/// `T_lambda^pi v = c_lambda^pi + gamma P^pi v`.
pub fn bellman_pi(mdp: &Mdp, policy: &Policy, reg: &Regularizer, v: &ValueVector) -> ValueVector {
    let p_pi = policy_transition(mdp, policy);
    let c = policy_cost(mdp, policy, reg);
    ValueVector(c + mdp.gamma() * p_pi.dot(&v.0))
}

/// Minimizes `<p, x> + lambda * omega(p)` over the simplex for one state.
/// Returns the minimum and its argmin distribution.
fn regularized_min(x: ArrayView1<f64>, reg: &Regularizer) -> (f64, Array1<f64>) {
    let a = x.len();
    let lambda = reg.lambda();
    if lambda == 0.0 {
        // Deterministic greedy choice; ties break to the lowest index.
        let mut best = 0;
        for i in 1..a {
            if x[i] < x[best] {
                best = i;
            }
        }
        let mut p = Array1::zeros(a);
        p[best] = 1.0;
        return (x[best], p);
    }
    match reg.geometry() {
        Geometry::Euclidean => {
            let p = geometry::project_simplex(x.mapv(|v| -v / lambda).view());
            let value = p.dot(&x) + lambda * omega(reg, p.view());
            (value, p)
        }
        Geometry::NegEntropy => {
            // Soft minimum evaluated in log space. Shifting by the smallest
            // entry keeps every exponent in [.., 0].
            let m = x.iter().copied().fold(f64::INFINITY, f64::min);
            let weights = x.mapv(|v| (-(v - m) / lambda).exp());
            let z = weights.sum();
            let value = m - lambda * (z / a as f64).ln();
            (value, weights / z)
        }
    }
}

/// The optimality Bellman operator `T_lambda v`, per state the minimum over
/// the simplex of `<p, x_s> + lambda * omega(p)` with
/// `x_s(a) = C(s,a) + gamma * sum_s' P(s'|s,a) v(s')`.
pub fn bellman_opt(mdp: &Mdp, reg: &Regularizer, v: &ValueVector) -> ValueVector {
    bellman_opt_with_policy(mdp, reg, v).0
}

/// `bellman_opt` together with the per-state minimizers as a policy, the
/// regularized-greedy policy of `v`.
pub fn bellman_opt_with_policy(mdp: &Mdp, reg: &Regularizer, v: &ValueVector) -> (ValueVector, Policy) {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let mut values = Array1::zeros(n);
    let mut probs = Array2::zeros((n, m));
    for s in 0..n {
        let future = mdp.transition().slice(s![s, .., ..]).dot(&v.0);
        let x = Array1::from_iter(
            (0..m).map(|a| mdp.cost()[[s, a]] + mdp.gamma() * future[a]),
        );
        let (value, p) = regularized_min(x.view(), reg);
        values[s] = value;
        probs.row_mut(s).assign(&p);
    }
    let policy = Policy::new(probs).expect("regularized minimizers are simplex rows");
    (ValueVector(values), policy)
}

/// Value iteration to the optimal regularized value, stopping once
/// `||v_{t+1} - v_t||_inf <= tol (1 - gamma) / gamma`, which brings the
/// iterate within `tol` of the fixed point. Returns the value estimate and
/// the regularized-greedy policy extracted from the final sweep.
pub fn optimal_value(
    mdp: &Mdp,
    reg: &Regularizer,
    tol: f64,
) -> Result<(ValueVector, Policy), MdpError> {
    optimal_value_with_cap(mdp, reg, tol, DEFAULT_ITERATION_CAP)
}

/// `optimal_value` with an explicit sweep cap.
pub fn optimal_value_with_cap(
    mdp: &Mdp,
    reg: &Regularizer,
    tol: f64,
    cap: usize,
) -> Result<(ValueVector, Policy), MdpError> {
    if !(tol > 0.0) {
        return Err(MdpError::invalid("tol", format!("must be positive, got {tol}")));
    }
    let gamma = mdp.gamma();
    let threshold = tol * (1.0 - gamma) / gamma;
    let mut v = ValueVector::zeros(mdp.n_states());
    for _ in 0..cap {
        let next = bellman_opt(mdp, reg, &v);
        let diff = next.linf_distance(&v);
        v = next;
        if diff <= threshold {
            return Ok(bellman_opt_with_policy(mdp, reg, &v));
        }
    }
    Err(MdpError::IterationCap { cap })
}

/// The discounted stationary distribution
/// `d_{mu,pi} = (1 - gamma) mu (I - gamma P^pi)^{-1}`, solved exactly via
/// the transposed system.
pub fn discounted_stationary(
    mdp: &Mdp,
    policy: &Policy,
    start: &StateDistribution,
) -> StateDistribution {
    let n = mdp.n_states();
    let p_pi = policy_transition(mdp, policy);
    let mut at = Array2::eye(n);
    at.scaled_add(-mdp.gamma(), &p_pi.t());
    let b = start.probs().mapv(|x| (1.0 - mdp.gamma()) * x);
    let mut d = linalg::solve(at, &b);
    // The exact solution is nonnegative; the solve can leave noise at the
    // scale of machine epsilon on entries that are mathematically zero.
    d.mapv_inplace(|x| if x < 0.0 && x > -1e-12 { 0.0 } else { x });
    StateDistribution::new(d).expect("discounted stationary distribution must be a distribution")
}

/// Directional derivative of the value at `pi` toward `pi_prime`:
/// `(I - gamma P^pi)^{-1} (T_lambda^{pi'} v_lambda^pi - v_lambda^pi -
/// lambda B_omega(pi', pi))`, one entry per state.
pub fn directional_derivative(
    mdp: &Mdp,
    reg: &Regularizer,
    pi: &Policy,
    pi_prime: &Policy,
) -> Result<ValueVector, MdpError> {
    if reg.geometry() == Geometry::NegEntropy && !pi.strictly_positive() {
        return Err(MdpError::Domain(
            "entropy-geometry directional derivative needs a strictly positive base policy".into(),
        ));
    }
    let n = mdp.n_states();
    let v = policy_value(mdp, pi, reg);
    let t_prime = bellman_pi(mdp, pi_prime, reg, &v);
    let lambda = reg.lambda();
    let mut rhs = Array1::zeros(n);
    for s in 0..n {
        let b = bregman(reg, pi_prime.row(s), pi.row(s))
            .map_err(|e| MdpError::Domain(e.to_string()))?;
        rhs[s] = t_prime.0[s] - v.0[s] - lambda * b;
    }
    let p_pi = policy_transition(mdp, pi);
    let mut a = Array2::eye(n);
    a.scaled_add(-mdp.gamma(), &p_pi);
    Ok(ValueVector(linalg::solve(a, &rhs)))
}

/// Value of a generalized policy-like weight matrix `y`, rows constrained by
/// `sum_a |y(a|s)| < 1 / gamma`. Extends policy evaluation off the simplex
/// and exists to support finite-difference checks of
/// [`directional_derivative`].
pub fn extended_value(
    mdp: &Mdp,
    reg: &Regularizer,
    y: ArrayView2<f64>,
) -> Result<ValueVector, MdpError> {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    if y.dim() != (n, m) {
        return Err(MdpError::invalid(
            "weights",
            format!("shape {:?} does not match MDP {n}x{m}", y.dim()),
        ));
    }
    let gamma = mdp.gamma();
    for (s, row) in y.outer_iter().enumerate() {
        let l1: f64 = row.iter().map(|x| x.abs()).sum();
        if gamma > 0.0 && l1 >= 1.0 / gamma {
            return Err(MdpError::invalid(
                format!("weights[{s}]"),
                format!("l1 mass {l1} must stay below 1/gamma = {}", 1.0 / gamma),
            ));
        }
        if reg.geometry() == Geometry::NegEntropy && row.iter().any(|&x| x < 0.0) {
            return Err(MdpError::Domain(
                "entropy-geometry extended value needs nonnegative weights".into(),
            ));
        }
    }
    let lambda = reg.lambda();
    let mut c = Array1::zeros(n);
    let mut p_y = Array2::zeros((n, n));
    for s in 0..n {
        c[s] = y.row(s).dot(&mdp.cost().row(s)) + lambda * omega(reg, y.row(s));
        let mat = mdp.transition().slice(s![s, .., ..]).to_owned();
        p_y.row_mut(s).assign(&y.row(s).dot(&mat));
    }
    let mut a = Array2::eye(n);
    a.scaled_add(-gamma, &p_y);
    Ok(ValueVector(linalg::solve(a, &c)))
}

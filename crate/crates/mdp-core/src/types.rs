use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3};
use thiserror::Error;

/// Tolerance for probability rows and distributions summing to one.
pub(crate) const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("{path}: {detail}")]
    Invalid { path: String, detail: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("value iteration did not converge within {cap} sweeps")]
    IterationCap { cap: usize },
    #[error("failed to parse MDP JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MdpError {
    pub(crate) fn invalid(path: impl Into<String>, detail: impl Into<String>) -> Self {
        MdpError::Invalid { path: path.into(), detail: detail.into() }
    }
}

/// A finite MDP: transition tensor `P[s][a][s']`, cost matrix `C[s][a]` in
/// `[0, C_max]`, and discount `gamma` in `[0, 1)`. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct Mdp {
    transition: Array3<f64>,
    cost: Array2<f64>,
    gamma: f64,
    c_max: f64,
}

impl Mdp {
    pub fn new(
        transition: Array3<f64>,
        cost: Array2<f64>,
        gamma: f64,
        c_max: f64,
    ) -> Result<Self, MdpError> {
        let (s_t, a_t, s2_t) = transition.dim();
        let (s_c, a_c) = cost.dim();
        if s_t == 0 || a_t == 0 {
            return Err(MdpError::invalid("transition", "state and action counts must be positive"));
        }
        if s_t != s2_t {
            return Err(MdpError::invalid(
                "transition",
                format!("tensor must be square in states, got {s_t}x{a_t}x{s2_t}"),
            ));
        }
        if (s_c, a_c) != (s_t, a_t) {
            return Err(MdpError::invalid(
                "cost",
                format!("shape {s_c}x{a_c} does not match transition {s_t}x{a_t}"),
            ));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(MdpError::invalid("gamma", format!("must lie in [0, 1), got {gamma}")));
        }
        if !(c_max > 0.0) || !c_max.is_finite() {
            return Err(MdpError::invalid("c_max", format!("must be positive, got {c_max}")));
        }
        for s in 0..s_t {
            for a in 0..a_t {
                let mut row_sum = 0.0;
                for s2 in 0..s_t {
                    let p = transition[[s, a, s2]];
                    if !(0.0..=1.0).contains(&p) {
                        return Err(MdpError::invalid(
                            format!("transition[{s}][{a}][{s2}]"),
                            format!("probability out of range: {p}"),
                        ));
                    }
                    row_sum += p;
                }
                if (row_sum - 1.0).abs() > STOCHASTIC_TOL {
                    return Err(MdpError::invalid(
                        format!("transition[{s}][{a}]"),
                        format!("row sums to {row_sum}, expected 1"),
                    ));
                }
                let c = cost[[s, a]];
                if !(0.0..=c_max).contains(&c) {
                    return Err(MdpError::invalid(
                        format!("cost[{s}][{a}]"),
                        format!("must lie in [0, {c_max}], got {c}"),
                    ));
                }
            }
        }
        Ok(Mdp { transition, cost, gamma, c_max })
    }

    pub fn n_states(&self) -> usize {
        self.transition.dim().0
    }

    pub fn n_actions(&self) -> usize {
        self.transition.dim().1
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    pub fn transition(&self) -> ArrayView3<'_, f64> {
        self.transition.view()
    }

    pub fn cost(&self) -> ArrayView2<'_, f64> {
        self.cost.view()
    }

    /// Next-state distribution for one state-action pair.
    pub fn transition_row(&self, s: usize, a: usize) -> ArrayView1<'_, f64> {
        self.transition.slice(ndarray::s![s, a, ..])
    }
}

/// A stationary policy: a row-stochastic S x A matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    probs: Array2<f64>,
}

impl Policy {
    pub fn new(probs: Array2<f64>) -> Result<Self, MdpError> {
        for (s, row) in probs.outer_iter().enumerate() {
            let mut sum = 0.0;
            for (a, &p) in row.iter().enumerate() {
                if !(p >= 0.0) || !p.is_finite() {
                    return Err(MdpError::invalid(
                        format!("policy[{s}][{a}]"),
                        format!("probability must be nonnegative and finite, got {p}"),
                    ));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(MdpError::invalid(
                    format!("policy[{s}]"),
                    format!("row sums to {sum}, expected 1"),
                ));
            }
        }
        Ok(Policy { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Policy { probs: Array2::from_elem((n_states, n_actions), 1.0 / n_actions as f64) }
    }

    /// Deterministic policy taking `actions[s]` in state s.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Self {
        let mut probs = Array2::zeros((actions.len(), n_actions));
        for (s, &a) in actions.iter().enumerate() {
            probs[[s, a]] = 1.0;
        }
        Policy { probs }
    }

    pub fn n_states(&self) -> usize {
        self.probs.dim().0
    }

    pub fn n_actions(&self) -> usize {
        self.probs.dim().1
    }

    pub fn probs(&self) -> ArrayView2<'_, f64> {
        self.probs.view()
    }

    pub fn row(&self, s: usize) -> ArrayView1<'_, f64> {
        self.probs.row(s)
    }

    /// True when every probability is strictly positive, the domain the
    /// entropy gradient needs.
    pub fn strictly_positive(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }
}

/// Length-S vector of discounted values.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueVector(pub Array1<f64>);

impl ValueVector {
    pub fn zeros(n_states: usize) -> Self {
        ValueVector(Array1::zeros(n_states))
    }

    pub fn linf_distance(&self, other: &ValueVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn dot(&self, weights: &StateDistribution) -> f64 {
        self.0.iter().zip(weights.probs().iter()).map(|(v, w)| v * w).sum()
    }
}

/// State-action value matrix `q[s][a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QFunction(pub Array2<f64>);

impl QFunction {
    pub fn row(&self, s: usize) -> ArrayView1<'_, f64> {
        self.0.row(s)
    }
}

/// A probability vector over states.
#[derive(Clone, Debug, PartialEq)]
pub struct StateDistribution {
    d: Array1<f64>,
}

impl StateDistribution {
    pub fn new(d: Array1<f64>) -> Result<Self, MdpError> {
        for (s, &p) in d.iter().enumerate() {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(MdpError::invalid(
                    format!("distribution[{s}]"),
                    format!("must be nonnegative and finite, got {p}"),
                ));
            }
        }
        let sum: f64 = d.sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(MdpError::invalid(
                "distribution",
                format!("sums to {sum}, expected 1"),
            ));
        }
        Ok(StateDistribution { d })
    }

    pub fn uniform(n_states: usize) -> Self {
        StateDistribution { d: Array1::from_elem(n_states, 1.0 / n_states as f64) }
    }

    pub fn point_mass(n_states: usize, state: usize) -> Self {
        let mut d = Array1::zeros(n_states);
        d[state] = 1.0;
        StateDistribution { d }
    }

    pub fn n_states(&self) -> usize {
        self.d.len()
    }

    pub fn probs(&self) -> ArrayView1<'_, f64> {
        self.d.view()
    }

    pub fn prob(&self, s: usize) -> f64 {
        self.d[s]
    }
}

//! Per-state policy updates: the projected-gradient step used with the
//! euclidean geometry and the multiplicative-weights step used with the
//! negative-entropy geometry. Both take the current action distribution of
//! one state, that state's q-values, a step size, and the regularization
//! weight, and return the next action distribution.
//!
//! Both are exact minimizers of the step's proximal objective
//! `t_k <q + lambda * grad omega(pi_k), p> + B_omega(p, pi_k)` over the
//! simplex, which keeps every improvement and convergence argument valid for
//! any `lambda * t_k < 1`.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest probability fed to a logarithm or returned by the
/// multiplicative-weights update. Guards against float underflow turning a
/// mathematically positive policy entry into zero.
const PROB_FLOOR: f64 = 1e-300;

/// Counts every time a probability had to be floored at [`PROB_FLOOR`].
static FLOOR_EVENTS: AtomicU64 = AtomicU64::new(0);

/// Number of probability-flooring events since process start. Flooring is
/// benign for the update itself but signals a run operating at the edge of
/// float range, so it is surfaced rather than hidden.
pub fn floor_event_count() -> u64 {
    FLOOR_EVENTS.load(Ordering::Relaxed)
}

fn floor_prob(p: f64) -> f64 {
    if p < PROB_FLOOR {
        FLOOR_EVENTS.fetch_add(1, Ordering::Relaxed);
        PROB_FLOOR
    } else {
        p
    }
}

#[derive(Debug, Error)]
pub enum UpdateError {
    /// The euclidean update is only defined for `lambda * t_k < 1`.
    #[error("step size {t} with lambda {lambda} leaves the valid regime lambda*t < 1")]
    StepRegime { t: f64, lambda: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// How a step size was produced. `Fixed` carries no payload; the value
/// itself lives in [`StepSize`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `t_k = (1-gamma) / (C_{omega,1} C_max sqrt(k+1))`, for unregularized
    /// objectives.
    UnregularizedSqrt,
    /// `t_k = 1 / (lambda (k+2))`, for regularized objectives; keeps
    /// `lambda * t_k <= 1/2` for every k.
    RegularizedHarmonic,
    Fixed,
}

/// A step size together with the schedule that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStepSize", into = "RawStepSize")]
pub struct StepSize {
    value: f64,
    kind: ScheduleKind,
}

#[derive(Serialize, Deserialize)]
struct RawStepSize {
    value: f64,
    kind: ScheduleKind,
}

impl TryFrom<RawStepSize> for StepSize {
    type Error = UpdateError;

    fn try_from(raw: RawStepSize) -> Result<Self, UpdateError> {
        StepSize::new(raw.value, raw.kind)
    }
}

impl From<StepSize> for RawStepSize {
    fn from(s: StepSize) -> RawStepSize {
        RawStepSize { value: s.value, kind: s.kind }
    }
}

impl StepSize {
    pub fn new(value: f64, kind: ScheduleKind) -> Result<Self, UpdateError> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(UpdateError::InvalidParameter(format!(
                "step size must be finite and nonnegative, got {value}"
            )));
        }
        Ok(StepSize { value, kind })
    }

    pub fn fixed(value: f64) -> Result<Self, UpdateError> {
        StepSize::new(value, ScheduleKind::Fixed)
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }
}

fn validate_inputs(
    pi_s: ArrayView1<f64>,
    q_s: ArrayView1<f64>,
    lambda: f64,
) -> Result<(), UpdateError> {
    if pi_s.len() != q_s.len() {
        return Err(UpdateError::InvalidParameter(format!(
            "policy row has {} actions but q row has {}",
            pi_s.len(),
            q_s.len()
        )));
    }
    if pi_s.is_empty() {
        return Err(UpdateError::InvalidParameter("empty action set".into()));
    }
    if q_s.iter().any(|q| !q.is_finite()) {
        return Err(UpdateError::InvalidParameter("q values must be finite".into()));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(UpdateError::InvalidParameter(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    Ok(())
}

/// Projected-gradient update for the euclidean geometry:
/// `project_simplex((1 - lambda t_k) pi_s - t_k q_s)`.
///
/// This is the exact minimizer over the simplex of both equivalent proximal
/// objectives: the linearized form
/// `t_k <q + lambda pi_s, p> + 1/2 ||p - pi_s||^2` and the partially
/// regularized form
/// `t_k <q, p> + t_k lambda omega(p) + (1 - lambda t_k) 1/2 ||p - pi_s||^2`
/// (their gradients coincide). At `lambda = 0` it reduces to
/// `project_simplex(pi_s - t_k q_s)`.
pub fn ppg_update(
    pi_s: ArrayView1<f64>,
    q_s: ArrayView1<f64>,
    t_k: &StepSize,
    lambda: f64,
) -> Result<Array1<f64>, UpdateError> {
    validate_inputs(pi_s, q_s, lambda)?;
    let t = t_k.value();
    if lambda * t >= 1.0 {
        return Err(UpdateError::StepRegime { t, lambda });
    }
    if t == 0.0 {
        return Ok(pi_s.to_owned());
    }
    let mut z = pi_s.mapv(|p| (1.0 - lambda * t) * p);
    z.scaled_add(-t, &q_s);
    Ok(geometry::project_simplex(z.view()))
}

/// Multiplicative-weights update for the negative-entropy geometry:
/// `pi'(a) proportional to pi(a)^(1 - lambda t_k) exp(-t_k q(a))`, evaluated
/// in log space with max-subtraction. The output is strictly positive.
pub fn netrpo_update(
    pi_s: ArrayView1<f64>,
    q_s: ArrayView1<f64>,
    t_k: &StepSize,
    lambda: f64,
) -> Result<Array1<f64>, UpdateError> {
    validate_inputs(pi_s, q_s, lambda)?;
    if let Some((a, &p)) = pi_s.iter().enumerate().find(|(_, &p)| p <= 0.0) {
        return Err(UpdateError::Domain(format!(
            "multiplicative-weights update needs strictly positive probabilities, got {p} at action {a}"
        )));
    }
    let t = t_k.value();
    if t == 0.0 {
        return Ok(pi_s.to_owned());
    }
    let mut w = Array1::zeros(pi_s.len());
    for (a, (&p, &q)) in pi_s.iter().zip(q_s.iter()).enumerate() {
        w[a] = (1.0 - lambda * t) * floor_prob(p).ln() - t * q;
    }
    let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    w.mapv_inplace(|x| (x - m).exp());
    let z = w.sum();
    w /= z;
    // exp() can underflow to exact zero for extremely unlikely actions; the
    // output contract is strict positivity.
    let mut floored = false;
    w.mapv_inplace(|p| {
        if p < PROB_FLOOR {
            floored = true;
        }
        floor_prob(p)
    });
    if floored {
        let z = w.sum();
        w /= z;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn step(t: f64) -> StepSize {
        StepSize::fixed(t).unwrap()
    }

    fn random_simplex(rng: &mut ChaCha12Rng, n: usize) -> Array1<f64> {
        let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let sum: f64 = raw.iter().sum();
        Array1::from_iter(raw.into_iter().map(|x| x / sum))
    }

    #[test]
    fn ppg_zero_step_returns_input() {
        let pi = Array1::from_vec(vec![0.3, 0.7]);
        let q = Array1::from_vec(vec![5.0, -2.0]);
        let out = ppg_update(pi.view(), q.view(), &step(0.0), 1.0).unwrap();
        assert_eq!(out, pi);
    }

    #[test]
    fn ppg_constant_q_is_a_noop_without_regularization() {
        let pi = Array1::from_vec(vec![0.2, 0.3, 0.5]);
        let q = Array1::from_elem(3, 4.2);
        let out = ppg_update(pi.view(), q.view(), &step(0.5), 0.0).unwrap();
        for a in 0..3 {
            assert_abs_diff_eq!(out[a], pi[a], epsilon = 1e-12);
        }
    }

    #[test]
    fn ppg_pinned_two_action_step() {
        let pi = Array1::from_vec(vec![0.5, 0.5]);
        let q = Array1::from_vec(vec![1.0, 0.0]);
        let out = ppg_update(pi.view(), q.view(), &step(0.2), 0.0).unwrap();
        assert_abs_diff_eq!(out[0], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], 0.6, epsilon = 1e-12);
    }

    #[test]
    fn ppg_rejects_steps_at_or_past_the_regime_boundary() {
        let pi = Array1::from_vec(vec![0.5, 0.5]);
        let q = Array1::from_vec(vec![1.0, 0.0]);
        for (t, lambda) in [(1.0, 1.0), (0.5, 2.0), (2.0, 1.0)] {
            let err = ppg_update(pi.view(), q.view(), &step(t), lambda).unwrap_err();
            assert!(matches!(err, UpdateError::StepRegime { .. }));
        }
    }

    #[test]
    fn netrpo_zero_step_returns_input() {
        let pi = Array1::from_vec(vec![0.3, 0.7]);
        let q = Array1::from_vec(vec![5.0, -2.0]);
        let out = netrpo_update(pi.view(), q.view(), &step(0.0), 1.0).unwrap();
        assert_eq!(out, pi);
    }

    #[test]
    fn netrpo_constant_q_is_a_noop_without_regularization() {
        let pi = Array1::from_vec(vec![0.2, 0.3, 0.5]);
        let q = Array1::from_elem(3, -1.7);
        let out = netrpo_update(pi.view(), q.view(), &step(0.8), 0.0).unwrap();
        for a in 0..3 {
            assert_abs_diff_eq!(out[a], pi[a], epsilon = 1e-12);
        }
    }

    #[test]
    fn netrpo_unit_lambda_t_forgets_the_current_policy() {
        // With lambda * t = 1 the pi^(1 - lambda t) factor drops out and the
        // update is the softmax of -t q regardless of pi.
        let q = Array1::from_vec(vec![0.4, -0.3, 1.1]);
        let t = 0.5;
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let pi_a = random_simplex(&mut rng, 3);
        let pi_b = random_simplex(&mut rng, 3);
        let out_a = netrpo_update(pi_a.view(), q.view(), &step(t), 1.0 / t).unwrap();
        let out_b = netrpo_update(pi_b.view(), q.view(), &step(t), 1.0 / t).unwrap();
        let weights = q.mapv(|x| (-t * x).exp());
        let softmax = &weights / weights.sum();
        for a in 0..3 {
            assert_abs_diff_eq!(out_a[a], out_b[a], epsilon = 1e-12);
            assert_abs_diff_eq!(out_a[a], softmax[a], epsilon = 1e-12);
        }
    }

    #[test]
    fn netrpo_pinned_two_action_step() {
        let pi = Array1::from_vec(vec![0.5, 0.5]);
        let q = Array1::from_vec(vec![1.0, 0.0]);
        let out = netrpo_update(pi.view(), q.view(), &step(1.0), 0.0).unwrap();
        let e = (-1.0f64).exp();
        assert_abs_diff_eq!(out[0], e / (e + 1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], 1.0 / (e + 1.0), epsilon = 1e-12);
    }

    #[test]
    fn netrpo_rejects_boundary_policies() {
        let pi = Array1::from_vec(vec![0.0, 1.0]);
        let q = Array1::from_vec(vec![1.0, 0.0]);
        let err = netrpo_update(pi.view(), q.view(), &step(0.5), 0.0).unwrap_err();
        assert!(matches!(err, UpdateError::Domain(_)));
    }

    #[test]
    fn both_updates_return_simplex_points() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..500 {
            let n = rng.gen_range(2..6);
            let pi = random_simplex(&mut rng, n);
            let q = Array1::from_iter((0..n).map(|_| rng.gen::<f64>() * 20.0 - 10.0));
            let lambda = rng.gen::<f64>();
            let t = rng.gen::<f64>() * 0.9 / lambda.max(1e-9);
            let t = step(t.min(5.0));
            for out in [
                ppg_update(pi.view(), q.view(), &t, lambda).unwrap(),
                netrpo_update(pi.view(), q.view(), &t, lambda).unwrap(),
            ] {
                assert_abs_diff_eq!(out.sum(), 1.0, epsilon = 1e-12);
                assert!(out.iter().all(|&p| p >= 0.0));
            }
            let ne = netrpo_update(pi.view(), q.view(), &t, lambda).unwrap();
            assert!(ne.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn both_updates_ignore_constant_shifts_of_q() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..200 {
            let n = rng.gen_range(2..5);
            let pi = random_simplex(&mut rng, n);
            let q = Array1::from_iter((0..n).map(|_| rng.gen::<f64>() * 4.0 - 2.0));
            let shifted = q.mapv(|x| x + 3.7);
            let t = step(0.3);
            let lambda = 0.5;
            let a = ppg_update(pi.view(), q.view(), &t, lambda).unwrap();
            let b = ppg_update(pi.view(), shifted.view(), &t, lambda).unwrap();
            let c = netrpo_update(pi.view(), q.view(), &t, lambda).unwrap();
            let d = netrpo_update(pi.view(), shifted.view(), &t, lambda).unwrap();
            for i in 0..n {
                assert_abs_diff_eq!(a[i], b[i], epsilon = 1e-12);
                assert_abs_diff_eq!(c[i], d[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn flooring_is_counted_not_hidden() {
        // Force underflow: one action is astronomically worse than the rest.
        let pi = Array1::from_vec(vec![0.5, 0.5]);
        let q = Array1::from_vec(vec![0.0, 1e6]);
        let before = floor_event_count();
        let out = netrpo_update(pi.view(), q.view(), &step(1.0), 0.0).unwrap();
        assert!(out[1] > 0.0);
        assert!(floor_event_count() > before);
    }
}

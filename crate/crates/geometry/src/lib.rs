//! Bregman geometries on the probability simplex.
//!
//! Two geometries are supported: euclidean, where the mirror map is the
//! squared 2-norm and the Bregman distance is squared euclidean distance,
//! and negative entropy, where the mirror map is shifted negative entropy
//! and the Bregman distance is the KL divergence. The [`Regularizer`] pairs
//! a geometry with a weight `lambda >= 0`; `lambda = 0` reduces every
//! regularized quantity to its unregularized counterpart.
//!
//! [`RegularizerConstants`] collects the geometry-dependent constants used
//! by step-size schedules, sample-count formulas, and runtime invariant
//! checks: the regularized cost ceiling `C_max_lambda`, the norm-equivalence
//! constants `C_omega_1..3`, the initial-distance bound `D_omega`, the
//! q-norm bounds `h_omega(k)`, and the per-sample range `r_omega(k)`.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("entropy gradient undefined: component {index} is {value} (must be strictly positive)")]
    NonPositiveEntry { index: usize, value: f64 },
    #[error("KL divergence undefined: p[{index}] > 0 but q[{index}] = 0")]
    AbsoluteContinuity { index: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Mirror-map choice on the simplex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    /// omega(p) = ||p||^2 / 2, Bregman distance ||p - q||^2 / 2.
    Euclidean,
    /// omega(p) = sum p ln p + ln A, Bregman distance KL(p || q).
    NegEntropy,
}

/// A geometry together with a regularization weight `lambda >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRegularizer", into = "RawRegularizer")]
pub struct Regularizer {
    geometry: Geometry,
    lambda: f64,
}

#[derive(Serialize, Deserialize)]
struct RawRegularizer {
    geometry: Geometry,
    lambda: f64,
}

impl TryFrom<RawRegularizer> for Regularizer {
    type Error = GeometryError;
    fn try_from(raw: RawRegularizer) -> Result<Self, Self::Error> {
        Regularizer::new(raw.geometry, raw.lambda)
    }
}

impl From<Regularizer> for RawRegularizer {
    fn from(reg: Regularizer) -> Self {
        RawRegularizer { geometry: reg.geometry, lambda: reg.lambda }
    }
}

impl Regularizer {
    pub fn new(geometry: Geometry, lambda: f64) -> Result<Self, GeometryError> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(GeometryError::InvalidParameter(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        Ok(Regularizer { geometry, lambda })
    }

    pub fn euclidean(lambda: f64) -> Result<Self, GeometryError> {
        Self::new(Geometry::Euclidean, lambda)
    }

    pub fn neg_entropy(lambda: f64) -> Result<Self, GeometryError> {
        Self::new(Geometry::NegEntropy, lambda)
    }

    /// Unregularized euclidean geometry, the common default in tests.
    pub fn unregularized() -> Self {
        Regularizer { geometry: Geometry::Euclidean, lambda: 0.0 }
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// omega(p) for a point of the simplex.
///
/// Euclidean: `||p||^2 / 2`. Negative entropy: `sum_a p_a ln p_a + ln A`,
/// with `0 ln 0 := 0`, so the range is `[0, ln A]` with 0 at the uniform
/// distribution and `ln A` at a vertex.
pub fn omega(reg: &Regularizer, p: ArrayView1<f64>) -> f64 {
    match reg.geometry {
        Geometry::Euclidean => 0.5 * p.iter().map(|x| x * x).sum::<f64>(),
        Geometry::NegEntropy => {
            let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum();
            h + (p.len() as f64).ln()
        }
    }
}

/// Gradient of omega. Euclidean: `p` itself. Negative entropy: `1 + ln p`
/// componentwise, which requires `p > 0` entrywise.
pub fn omega_grad(reg: &Regularizer, p: ArrayView1<f64>) -> Result<Array1<f64>, GeometryError> {
    match reg.geometry {
        Geometry::Euclidean => Ok(p.to_owned()),
        Geometry::NegEntropy => {
            if let Some((index, &value)) = p.iter().enumerate().find(|(_, &x)| x <= 0.0) {
                return Err(GeometryError::NonPositiveEntry { index, value });
            }
            Ok(p.mapv(|x| 1.0 + x.ln()))
        }
    }
}

/// Bregman distance B_omega(p, q): `||p - q||^2 / 2` in the euclidean
/// geometry, `KL(p || q)` in the entropy geometry. Zero iff `p = q`.
pub fn bregman(
    reg: &Regularizer,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
) -> Result<f64, GeometryError> {
    debug_assert_eq!(p.len(), q.len());
    match reg.geometry {
        Geometry::Euclidean => {
            Ok(0.5 * p.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        }
        Geometry::NegEntropy => {
            let mut kl = 0.0;
            for (index, (&pi, &qi)) in p.iter().zip(q.iter()).enumerate() {
                if pi > 0.0 {
                    if qi <= 0.0 {
                        return Err(GeometryError::AbsoluteContinuity { index });
                    }
                    kl += pi * (pi / qi).ln();
                }
            }
            // Rounding can drive a mathematically nonnegative KL slightly
            // below zero when p is numerically equal to q.
            Ok(kl.max(0.0))
        }
    }
}

/// Euclidean projection onto the simplex by sort and threshold: sort
/// descending, find the largest k whose running mean leaves the k-th
/// coordinate positive after shifting, subtract that threshold, clip at zero.
pub fn project_simplex(x: ArrayView1<f64>) -> Array1<f64> {
    let n = x.len();
    assert!(n > 0, "cannot project an empty vector");
    let mut sorted: Vec<f64> = x.iter().copied().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("non-finite entry in projection input"));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (i as f64 + 1.0);
        if u - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    x.mapv(|v| (v - tau).max(0.0))
}

/// Geometry-dependent constants for a problem instance `(A, C_max, gamma)`.
///
/// `h_omega(k)` bounds the dual norm of `q_lambda + lambda * grad omega(pi_k)`
/// along the prescribed schedules; `q_norm_bound` bounds the dual norm of
/// `q_lambda` alone; `r_omega(k)` is the per-sample range entering trajectory
/// counts; `a_omega(k, t)` bounds the drift of `grad omega` across one update.
#[derive(Clone, Debug)]
pub struct RegularizerConstants {
    reg: Regularizer,
    n_actions: usize,
    c_max: f64,
    gamma: f64,
    pub c_max_lambda: f64,
    pub c_omega_1: f64,
    pub c_omega_2: f64,
    pub c_omega_3: f64,
    pub d_omega: f64,
}

impl RegularizerConstants {
    pub fn new(
        reg: &Regularizer,
        n_actions: usize,
        c_max: f64,
        gamma: f64,
    ) -> Result<Self, GeometryError> {
        if n_actions == 0 {
            return Err(GeometryError::InvalidParameter("n_actions must be positive".into()));
        }
        if !(c_max > 0.0) || !c_max.is_finite() {
            return Err(GeometryError::InvalidParameter(format!(
                "c_max must be positive and finite, got {c_max}"
            )));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(GeometryError::InvalidParameter(format!(
                "gamma must lie in [0, 1), got {gamma}"
            )));
        }
        let a = n_actions as f64;
        let lambda = reg.lambda();
        let (c_max_lambda, c_omega_1, c_omega_2, c_omega_3, d_omega) = match reg.geometry() {
            Geometry::Euclidean => (c_max + lambda, a.sqrt(), 1.0, 1.0, 1.0),
            Geometry::NegEntropy => {
                (c_max + lambda * a.ln(), 1.0, a * a, a.ln(), a.ln())
            }
        };
        Ok(RegularizerConstants {
            reg: *reg,
            n_actions,
            c_max,
            gamma,
            c_max_lambda,
            c_omega_1,
            c_omega_2,
            c_omega_3,
            d_omega,
        })
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.reg
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Ceiling of any regularized value: `C_max_lambda / (1 - gamma)`.
    pub fn value_bound(&self) -> f64 {
        self.c_max_lambda / (1.0 - self.gamma)
    }

    /// Dual-norm bound on `q_lambda` alone, independent of the iteration:
    /// `sqrt(A) * C_max_lambda / (1 - gamma)` in the euclidean geometry
    /// (2-norm of a vector bounded entrywise), `C_max_lambda / (1 - gamma)`
    /// in the entropy geometry (sup norm).
    pub fn q_norm_bound(&self) -> f64 {
        match self.reg.geometry() {
            Geometry::Euclidean => (self.n_actions as f64).sqrt() * self.value_bound(),
            Geometry::NegEntropy => self.value_bound(),
        }
    }

    /// Bound on `max |ln pi_k|` reachable by iteration k from a uniform
    /// start. The first term grows like `ln k`, tracking the harmonic
    /// schedule fed exact q-values; it is capped by the schedule-free fixed
    /// point of the log recursion, `ln A + 2 q_hat / lambda`, which holds
    /// for any step sequence with `lambda t <= 1` and any q magnitudes up
    /// to the importance-weighted ceiling.
    fn log_policy_bound(&self, k: usize) -> f64 {
        let a = self.n_actions as f64;
        let lambda = self.reg.lambda();
        let growth = self.c_max_lambda / (lambda * (1.0 - self.gamma)) + a.ln();
        let harmonic = a.ln() + growth * (1.0 + ln_clamped(k));
        let universal = a.ln() + 2.0 * self.q_hat_bound() / lambda;
        harmonic.min(universal)
    }

    /// Dual-norm bound on `q_lambda + lambda * grad omega(pi_k)` at iteration
    /// k. Constant in the euclidean geometry; grows like `ln k` in the
    /// entropy geometry when `lambda > 0` because `|ln pi_k|` can grow.
    pub fn h_omega(&self, k: usize) -> f64 {
        let lambda = self.reg.lambda();
        match self.reg.geometry() {
            Geometry::Euclidean => self.q_norm_bound() + lambda,
            Geometry::NegEntropy => {
                if lambda == 0.0 {
                    self.value_bound()
                } else {
                    self.value_bound() + lambda * (1.0 + self.log_policy_bound(k))
                }
            }
        }
    }

    /// Per-sample range bound for importance-weighted rollout estimates:
    /// `4 A C_max_lambda / (1 - gamma)`, with an extra `1 + ln k` factor in
    /// the regularized entropy case.
    pub fn r_omega(&self, k: usize) -> f64 {
        let base = 4.0 * self.n_actions as f64 * self.value_bound();
        match self.reg.geometry() {
            Geometry::Euclidean => base,
            Geometry::NegEntropy => {
                if self.reg.lambda() == 0.0 {
                    base
                } else {
                    base * (1.0 + ln_clamped(k))
                }
            }
        }
    }

    /// Entrywise ceiling of the importance-weighted batch estimator:
    /// `A * C_max_lambda / (1 - gamma)`.
    pub fn q_hat_bound(&self) -> f64 {
        self.n_actions as f64 * self.value_bound()
    }

    /// Bound on `||grad omega(pi_{k+1}) - grad omega(pi_k)||_inf` across one
    /// update with step `t`, wide enough to cover importance-weighted
    /// estimates. Euclidean: projection is nonexpansive, so the drift is at
    /// most the step times the dual norm of the walked gradient. Entropy:
    /// the log moves by the exponent plus the normalizer, twice that norm.
    pub fn a_omega(&self, k: usize, t: f64) -> f64 {
        let lambda = self.reg.lambda();
        match self.reg.geometry() {
            Geometry::Euclidean => {
                let a = self.n_actions as f64;
                t * (a.sqrt() * self.q_hat_bound() + lambda)
            }
            Geometry::NegEntropy => {
                let grad_term = if lambda == 0.0 {
                    0.0
                } else {
                    lambda * (1.0 + self.log_policy_bound(k))
                };
                2.0 * t * (self.q_hat_bound() + grad_term)
            }
        }
    }
}

fn ln_clamped(k: usize) -> f64 {
    (k.max(1) as f64).ln()
}

//! Log-log convergence-rate fitting for optimality-gap sequences.

use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Gaps below this floor sit in float noise and are excluded from the fit
/// rather than fitted.
pub const GAP_CLIP: f64 = 1e-14;

/// Ordinary-least-squares fit of `log(gap)` against `log(k)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Fitted exponent: gap ~ k^slope.
    pub slope: f64,
    /// Fitted log-intercept: gap ~ exp(intercept) * k^slope.
    pub intercept: f64,
    /// Coefficient of determination of the fit.
    pub r_squared: f64,
    /// Number of points that survived the noise-floor clip.
    pub points_used: usize,
}

/// Fits `log(gaps[k])` against `log k` over the inclusive window
/// `[window.0, window.1]` by ordinary least squares. `gaps` is indexed by
/// iteration, so `gaps[0]` is the starting gap. Points below [`GAP_CLIP`]
/// are excluded; the window must start at `k >= 1` (the log of iteration 0
/// is undefined), lie inside the record range, and contain at least five
/// points before clipping. Fewer than two surviving points is a degenerate
/// fit.
pub fn fit_rate(gaps: &[f64], window: (usize, usize)) -> Result<RateFit, HarnessError> {
    let (lo, hi) = window;
    if lo < 1 {
        return Err(HarnessError::InvalidParameter(
            "rate window must start at iteration 1 or later".into(),
        ));
    }
    if lo > hi || hi >= gaps.len() {
        return Err(HarnessError::InvalidParameter(format!(
            "rate window [{lo}, {hi}] does not fit the {} recorded iterations",
            gaps.len()
        )));
    }
    if hi - lo + 1 < 5 {
        return Err(HarnessError::InvalidParameter(format!(
            "rate window [{lo}, {hi}] must contain at least 5 points"
        )));
    }
    let points: Vec<(f64, f64)> = (lo..=hi)
        .filter(|&k| gaps[k] >= GAP_CLIP)
        .map(|k| ((k as f64).ln(), gaps[k].ln()))
        .collect();
    if points.len() < 2 {
        return Err(HarnessError::DegenerateFit(format!(
            "only {} of {} window points survive the {GAP_CLIP:e} noise floor",
            points.len(),
            hi - lo + 1
        )));
    }

    let n = points.len() as f64;
    let x_bar = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let y_bar = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let s_xx: f64 = points.iter().map(|(x, _)| (x - x_bar) * (x - x_bar)).sum();
    let s_xy: f64 = points
        .iter()
        .map(|(x, y)| (x - x_bar) * (y - y_bar))
        .sum();
    let slope = s_xy / s_xx;
    let intercept = y_bar - slope * x_bar;
    let ss_res: f64 = points
        .iter()
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let ss_tot: f64 = points.iter().map(|(_, y)| (y - y_bar) * (y - y_bar)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points_used: points.len(),
    })
}

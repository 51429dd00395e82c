//! Accuracy of trajectory and α estimates against a known truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::TrajectorySummary;
use crate::simulator::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryScore {
    /// Fraction of cells whose interval strictly contains the truth.
    pub coverage: f64,
    /// Mean relative error of the median.
    pub bias: f64,
    /// Mean absolute relative error.
    pub deviance: f64,
    /// Mean squared error divided by the truth.
    pub mse: f64,
    /// Number of grid points.
    pub grid_size: usize,
}

/// Scores a per-cell summary against `truth` evaluated at the cell
/// midpoints.
pub fn score_trajectory(est: &TrajectorySummary, truth: &Trajectory) -> Result<TrajectoryScore> {
    let mids = est.midpoints();
    let values: Vec<f64> = mids.iter().map(|&t| truth.value(t)).collect();
    score_values(est, &values)
}

/// Scores against true sizes given per cell.
pub fn score_values(est: &TrajectorySummary, truth: &[f64]) -> Result<TrajectoryScore> {
    let n = est.cells();
    if n == 0 || truth.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} true values for {n} cells",
            truth.len()
        )));
    }
    if let Some(v) = truth.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidTrajectory(format!("true size {v} is not positive")));
    }
    let (mut covered, mut bias, mut deviance, mut mse) = (0usize, 0.0, 0.0, 0.0);
    for d in 0..n {
        let t = truth[d];
        let err = est.median[d] - t;
        covered += (est.lower[d] < t && t < est.upper[d]) as usize;
        bias += err / t;
        deviance += err.abs() / t;
        mse += err * err / t;
    }
    let nf = n as f64;
    Ok(TrajectoryScore {
        coverage: covered as f64 / nf,
        bias: bias / nf,
        deviance: deviance / nf,
        mse: mse / nf,
        grid_size: est.points.len(),
    })
}

/// Mean, bias and mean squared error of α estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaScore {
    pub mean: f64,
    pub bias: f64,
    pub mse: f64,
}

pub fn score_alpha(estimates: &[f64], truth: f64) -> Result<AlphaScore> {
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("no α estimates to score".into()));
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let mse = estimates.iter().map(|a| (a - truth).powi(2)).sum::<f64>() / n;
    Ok(AlphaScore {
        mean,
        bias: mean - truth,
        mse,
    })
}

//! Alternating optimization: Laplace trajectory at fixed α, then α at the
//! median trajectory.

use serde::{Deserialize, Serialize};

use super::block_size::block_size_mle;
use super::laplace::fit_table;
use super::optimize::{maximize, Bound};
use super::{require_events, Diagnostics, FitConfig, FitResult, Method};
use crate::error::Result;
use crate::genealogy::CoalescentData;
use crate::gmrf::{build_grid, GmrfPrior, SkyGrid};
use crate::lambda_rates::{LambdaMeasure, RateTable};
use crate::likelihood::{ExposureTable, Layout};

const SCAN: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridStep {
    pub alpha: f64,
    /// Full log-likelihood at `alpha` and the median trajectory it was
    /// chosen against.
    pub log_likelihood: f64,
}

pub(crate) fn exposure_at(layout: &Layout, alpha: f64) -> Result<ExposureTable> {
    let rates = RateTable::build(&LambdaMeasure::for_alpha(alpha)?, layout.max_lineages())?;
    Ok(layout.exposure(&rates))
}

fn full_log_likelihood(layout: &Layout, alpha: f64, gamma: &[f64]) -> f64 {
    match exposure_at(layout, alpha) {
        Ok(t) => t.log_likelihood(gamma),
        Err(_) => f64::NEG_INFINITY,
    }
}

pub fn hybrid_fit(data: &CoalescentData, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    require_events(data)?;
    let grid = build_grid(data, cfg.grid_points)?;
    let layout = Layout::new(data, &grid)?;
    let prior = GmrfPrior::for_grid(&grid)?.with_hyperprior(cfg.tau_shape, cfg.tau_rate)?;

    let mut alpha = block_size_mle(data, cfg)?.alpha;
    let mut trace: Vec<HybridStep> = Vec::new();
    let mut boundary: Option<Bound> = None;
    let mut converged = false;
    for _ in 0..cfg.hybrid_max_iterations {
        let fit = fit_table(&exposure_at(&layout, alpha)?, &grid, &prior)?;
        let gamma = fit.summary.log_median();
        let best = maximize(
            |a| full_log_likelihood(&layout, a, &gamma),
            cfg.alpha_lower,
            cfg.alpha_upper,
            SCAN,
            cfg.alpha_tolerance,
        );
        trace.push(HybridStep {
            alpha: best.x,
            log_likelihood: best.value,
        });
        boundary = best.at_bound;
        let delta = (best.x - alpha).abs();
        alpha = best.x;
        if delta < cfg.hybrid_tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        // Oscillation: fall back to the iterate with the best likelihood.
        let best = trace
            .iter()
            .max_by(|a, b| a.log_likelihood.total_cmp(&b.log_likelihood))
            .expect("at least one iteration");
        alpha = best.alpha;
        boundary = at_bound(alpha, cfg);
    }
    let summary = fit_table(&exposure_at(&layout, alpha)?, &grid, &prior)?.summary;
    Ok(FitResult {
        method: Method::Hybrid,
        alpha,
        alpha_boundary: boundary,
        alpha_median: None,
        alpha_mean: None,
        alpha_interval: None,
        trajectory: summary,
        diagnostics: Diagnostics {
            converged,
            hybrid_trace: trace,
            ..Diagnostics::default()
        },
        chain: None,
    })
}

fn at_bound(alpha: f64, cfg: &FitConfig) -> Option<Bound> {
    if (alpha - cfg.alpha_lower).abs() <= cfg.alpha_tolerance {
        Some(Bound::Lower)
    } else if (cfg.alpha_upper - alpha).abs() <= cfg.alpha_tolerance {
        Some(Bound::Upper)
    } else {
        None
    }
}

/// Laplace trajectory summary at a fixed measure on the default grid.
pub(crate) fn plug_in_trajectory(
    data: &CoalescentData,
    m: &LambdaMeasure,
    cfg: &FitConfig,
) -> Result<(SkyGrid, super::TrajectorySummary)> {
    let grid = build_grid(data, cfg.grid_points)?;
    let layout = Layout::new(data, &grid)?;
    let rates = RateTable::build(m, layout.max_lineages())?;
    let prior = GmrfPrior::for_grid(&grid)?.with_hyperprior(cfg.tau_shape, cfg.tau_rate)?;
    let summary = fit_table(&layout.exposure(&rates), &grid, &prior)?.summary;
    Ok((grid, summary))
}

//! Maximum of the block-size pseudo-likelihood in α.

use serde::{Deserialize, Serialize};

use super::optimize::{maximize, Bound};
use super::{require_events, FitConfig};
use crate::error::{Error, Result};
use crate::genealogy::CoalescentData;
use crate::lambda_rates::{LambdaMeasure, RateTable};
use crate::likelihood::block_size_log_pseudolik_with;

/// Points in the initial scan of the α interval.
const SCAN: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockSizeMle {
    pub alpha: f64,
    pub log_pseudolik: f64,
    pub boundary: Option<Bound>,
}

/// Block-size log pseudo-likelihood at α, with Kingman near α = 2.
pub(crate) fn pseudolik_at(data: &CoalescentData, b_max: usize, alpha: f64) -> f64 {
    match LambdaMeasure::for_alpha(alpha).and_then(|m| RateTable::build(&m, b_max)) {
        Ok(rates) => block_size_log_pseudolik_with(data, &rates),
        Err(_) => f64::NEG_INFINITY,
    }
}

pub fn block_size_mle(data: &CoalescentData, cfg: &FitConfig) -> Result<BlockSizeMle> {
    cfg.validate()?;
    require_events(data)?;
    let b_max = data.lineage_steps().counts.iter().copied().max().unwrap_or(2).max(2);
    let best = maximize(
        |a| pseudolik_at(data, b_max, a),
        cfg.alpha_lower,
        cfg.alpha_upper,
        SCAN,
        cfg.alpha_tolerance,
    );
    if !best.value.is_finite() {
        return Err(Error::InvalidData(
            "no α in the search interval can produce the observed block sizes".into(),
        ));
    }
    Ok(BlockSizeMle {
        alpha: best.x,
        log_pseudolik: best.value,
        boundary: best.at_bound,
    })
}

//! Estimators of α and the population size trajectory: the block-size
//! MLE, hybrid alternating optimization and Metropolis-within-Gibbs MCMC.

mod alpha;
mod block_size;
mod hmc;
mod hybrid;
mod laplace;
mod mcmc;
pub mod optimize;
mod summary;

pub use alpha::{alpha_intervals, AlphaSweep};
pub use block_size::{block_size_mle, BlockSizeMle};
pub use hmc::{Hmc, HmcState, Integrator, Mass, Transition};
pub use hybrid::{hybrid_fit, HybridStep};
pub use laplace::{laplace_fit, LaplaceFit};
pub use mcmc::{mcmc_fit, Chain};
pub use optimize::Bound;
pub use summary::{effective_sample_size, quantile, TrajectorySummary};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genealogy::CoalescentData;
use crate::lambda_rates::{LambdaMeasure, ALPHA_MAX, ALPHA_MIN};

/// Tuning for all three estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Number of grid points D; the trajectory has D - 1 cells.
    pub grid_points: usize,
    pub iterations: usize,
    /// Fraction of iterations discarded as burn-in.
    pub burn_in: f64,
    /// Number of equal-width intervals partitioning (0, 2] for α draws.
    pub alpha_intervals: usize,
    pub leapfrog_steps: usize,
    pub mass: Mass,
    /// Fixed HMC step size; tuned during burn-in when absent.
    pub step_size: Option<f64>,
    /// Target HMC acceptance rate for step-size tuning.
    pub target_accept: f64,
    pub integrator: Integrator,
    pub hybrid_tolerance: f64,
    pub hybrid_max_iterations: usize,
    pub alpha_lower: f64,
    pub alpha_upper: f64,
    /// Tolerance of the one-dimensional α searches.
    pub alpha_tolerance: f64,
    pub tau_shape: f64,
    pub tau_rate: f64,
    /// Window length and minimum rate for the acceptance-collapse check.
    pub collapse_window: usize,
    pub collapse_rate: f64,
    /// Holds α fixed at this value in MCMC.
    pub fixed_alpha: Option<f64>,
    /// Drops the likelihood from MCMC, sampling the prior.
    pub prior_only: bool,
    /// Cell whose log size is tracked for effective-sample-size reports;
    /// the middle cell when absent.
    pub probe_cell: Option<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            grid_points: 100,
            iterations: 20_000,
            burn_in: 0.1,
            alpha_intervals: 400,
            leapfrog_steps: 20,
            mass: Mass::Precision,
            step_size: None,
            target_accept: 0.7,
            integrator: Integrator::Split,
            hybrid_tolerance: 1e-4,
            hybrid_max_iterations: 50,
            alpha_lower: ALPHA_MIN,
            alpha_upper: ALPHA_MAX,
            alpha_tolerance: 1e-6,
            tau_shape: crate::gmrf::DEFAULT_SHAPE,
            tau_rate: crate::gmrf::DEFAULT_RATE,
            collapse_window: 500,
            collapse_rate: 0.05,
            fixed_alpha: None,
            prior_only: false,
            probe_cell: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.grid_points < 3 {
            return bad(format!("grid_points must be at least 3, got {}", self.grid_points));
        }
        if self.iterations == 0 || self.leapfrog_steps == 0 || self.alpha_intervals == 0 {
            return bad("iterations, leapfrog_steps and alpha_intervals must be positive".into());
        }
        if !(self.burn_in > 0.0 && self.burn_in < 1.0) {
            return bad(format!("burn_in must lie in (0, 1), got {}", self.burn_in));
        }
        if matches!(self.step_size, Some(s) if !(s > 0.0)) {
            return bad("step_size must be positive".into());
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad(format!("target_accept must lie in (0, 1), got {}", self.target_accept));
        }
        if !(self.hybrid_tolerance > 0.0) || self.hybrid_max_iterations == 0 {
            return bad("hybrid tolerance and iteration cap must be positive".into());
        }
        if !(ALPHA_MIN <= self.alpha_lower && self.alpha_lower < self.alpha_upper && self.alpha_upper <= ALPHA_MAX) {
            return bad(format!(
                "α search interval [{}, {}] must lie within [{ALPHA_MIN}, {ALPHA_MAX}]",
                self.alpha_lower, self.alpha_upper
            ));
        }
        if !(self.alpha_tolerance > 0.0) {
            return bad("alpha_tolerance must be positive".into());
        }
        if !(self.tau_shape > 0.0 && self.tau_rate > 0.0) {
            return bad("tau hyperprior parameters must be positive".into());
        }
        if self.collapse_window == 0 || !(0.0..1.0).contains(&self.collapse_rate) {
            return bad("collapse window must be positive and rate in [0, 1)".into());
        }
        if let Some(a) = self.fixed_alpha {
            if !(a > 0.0 && a <= ALPHA_MAX) {
                return bad(format!("fixed_alpha must lie in (0, 2], got {a}"));
            }
        }
        if let Some(p) = self.probe_cell {
            if p + 1 >= self.grid_points {
                return bad(format!("probe_cell {p} outside the {} cells", self.grid_points - 1));
            }
        }
        Ok(())
    }

    pub fn burn_in_iterations(&self) -> usize {
        ((self.iterations as f64) * self.burn_in).round() as usize
    }

    pub fn probe(&self) -> usize {
        self.probe_cell.unwrap_or((self.grid_points - 1) / 2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    BsMle,
    Hybrid,
    Mcmc,
    /// Trajectory fit at a fixed, user-supplied measure.
    Laplace,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::BsMle => "bs-mle",
            Method::Hybrid => "hybrid",
            Method::Mcmc => "mcmc",
            Method::Laplace => "laplace",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bs-mle" => Ok(Method::BsMle),
            "hybrid" => Ok(Method::Hybrid),
            "mcmc" => Ok(Method::Mcmc),
            "laplace" => Ok(Method::Laplace),
            _ => Err(Error::InvalidArgument(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Post-burn-in HMC acceptance rate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hmc_acceptance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ess_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ess_probe: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_cell: Option<usize>,
    /// False when an iterative method stopped at its iteration cap.
    pub converged: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub hybrid_trace: Vec<HybridStep>,
}

/// Output of any estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: Method,
    /// Point estimate: the MLE, the hybrid fixed point or the posterior
    /// median.
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_boundary: Option<Bound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_median: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_interval: Option<(f64, f64)>,
    pub trajectory: TrajectorySummary,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub chain: Option<Chain>,
}

pub(crate) fn require_events(data: &CoalescentData) -> Result<()> {
    if data.num_events() == 0 {
        Err(Error::InvalidData("the genealogy has no coalescent events".into()))
    } else {
        Ok(())
    }
}

/// Runs `method`. The Laplace method needs `measure`; the others estimate
/// α and ignore it. The block-size MLE reports the Laplace trajectory at
/// its α.
pub fn fit<R: rand::Rng + ?Sized>(
    data: &CoalescentData,
    method: Method,
    measure: Option<&LambdaMeasure>,
    cfg: &FitConfig,
    rng: &mut R,
) -> Result<FitResult> {
    match method {
        Method::Mcmc => mcmc_fit(data, cfg, rng),
        Method::Hybrid => hybrid_fit(data, cfg),
        Method::BsMle => {
            let mle = block_size_mle(data, cfg)?;
            let m = LambdaMeasure::for_alpha(mle.alpha)?;
            let (_, trajectory) = hybrid::plug_in_trajectory(data, &m, cfg)?;
            Ok(FitResult {
                method,
                alpha: mle.alpha,
                alpha_boundary: mle.boundary,
                alpha_median: None,
                alpha_mean: None,
                alpha_interval: None,
                trajectory,
                diagnostics: Diagnostics {
                    converged: true,
                    ..Diagnostics::default()
                },
                chain: None,
            })
        }
        Method::Laplace => {
            let m = measure.ok_or_else(|| Error::InvalidArgument("the laplace method needs a measure".into()))?;
            cfg.validate()?;
            require_events(data)?;
            let alpha = m.alpha().ok_or_else(|| {
                Error::InvalidArgument(format!("{m} has no α; call laplace_fit directly"))
            })?;
            let (_, trajectory) = hybrid::plug_in_trajectory(data, m, cfg)?;
            Ok(FitResult {
                method,
                alpha,
                alpha_boundary: None,
                alpha_median: None,
                alpha_mean: None,
                alpha_interval: None,
                trajectory,
                diagnostics: Diagnostics {
                    converged: true,
                    ..Diagnostics::default()
                },
                chain: None,
            })
        }
    }
}

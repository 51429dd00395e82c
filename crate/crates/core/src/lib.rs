//! Inference and simulation for Λ-coalescent genealogies under a variable
//! effective population size.

pub mod error;
pub mod estimators;
pub mod genealogy;
pub mod gmrf;
pub mod lambda_rates;
pub mod likelihood;
pub mod metrics;
mod numeric;
pub mod simulator;

pub use error::{Error, Result};
pub use estimators::{fit, FitConfig, FitResult, Method};
pub use genealogy::{extract_stats, parse_newick, CoalescentData, Genealogy};
pub use gmrf::{build_grid, GmrfPrior, SkyGrid};
pub use lambda_rates::{LambdaMeasure, RateTable};
pub use likelihood::{build_exposure, ExposureTable};
pub use metrics::{score_alpha, score_trajectory, AlphaScore, TrajectoryScore};
pub use simulator::{simulate, SamplingSchedule, Simulator, Trajectory};

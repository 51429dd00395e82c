use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("newick syntax error at byte {position}: {message}")]
    NewickSyntax { position: usize, message: String },

    #[error("negative branch length {length} above node '{node}'")]
    NegativeBranch { node: String, length: f64 },

    #[error("parent time {parent} is not greater than child time {child} at node '{node}'")]
    TimeInversion {
        node: String,
        parent: f64,
        child: f64,
    },

    #[error("two internal nodes share the coalescent time {0}; simultaneous mergers are not modelled")]
    SimultaneousMergers(f64),

    #[error("missing tip date for '{0}'")]
    MissingTipDate(String),

    #[error("invalid coalescent data: {0}")]
    InvalidData(String),

    #[error("invalid lambda measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid merger index: b = {b}, k = {k}")]
    InvalidMerger { b: usize, k: usize },

    #[error("quadrature did not converge: estimate {estimate}, error {error}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("hazard inversion failed at time {time}: {message}")]
    HazardInversion { time: f64, message: String },

    #[error("newton iteration did not converge after {iterations} iterations (gradient norm {gradient_norm})")]
    Newton {
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("HMC acceptance collapsed to {rate:.3} in iterations {start}..{end} (step size {step_size})")]
    AcceptanceCollapse {
        rate: f64,
        start: usize,
        end: usize,
        step_size: f64,
    },
}

impl Error {
    /// Whether the failure stems from the numerics rather than from the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. }
                | Error::HazardInversion { .. }
                | Error::Newton { .. }
                | Error::AcceptanceCollapse { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

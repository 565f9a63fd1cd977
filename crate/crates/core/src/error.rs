use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature failed to reach tolerance {tolerance:e} (estimated error {estimate:e}) after {evaluations} evaluations")]
    QuadratureFailure {
        tolerance: f64,
        estimate: f64,
        evaluations: usize,
    },

    #[error("frequency labels {first} and {second} coincide (separation {separation:e})")]
    DegenerateFrequencies {
        first: String,
        second: String,
        separation: f64,
    },

    #[error("self-consistent renormalization did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("bare Rabi frequency is zero with nonzero coupling; dressed angle is ill-defined")]
    UndrivenDegenerate,

    #[error("polaron scaling diverges: |1 + F'(0)| = {gap:e}")]
    PolaronDivergence { gap: f64 },

    #[error("residue system has kernel dimension {kernel_dimension}, expected 1")]
    SingularSystem { kernel_dimension: usize },

    #[error(
        "halving the time step changed the averaged observable by {change:e} (limit {limit:e})"
    )]
    StepTooCoarse { change: f64, limit: f64 },

    #[error("trajectory has not settled: running average drifted by {drift:e} (limit {limit:e})")]
    NotSettled { drift: f64, limit: f64 },

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

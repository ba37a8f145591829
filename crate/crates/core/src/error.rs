use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("maintenance cost decreases between level {level} and {next}", next = level + 1)]
    NonIncreasingCost { level: usize },

    #[error("maintenance cost is not discretely convex at level {level}")]
    NonConvexCost { level: usize },

    #[error("cost vector has {got} entries, expected xi + 1 = {expected}")]
    CostLength { got: usize, expected: usize },

    #[error("deterioration function must satisfy f(0) = 0, got {value}")]
    DeteriorationNotZeroAtOff { value: f64 },

    #[error("deterioration function must be of power form")]
    DeteriorationNotPower,

    #[error("invalid rate function: {0}")]
    InvalidRateFunction(String),

    #[error("unstable grid: dt * lambda * f(s_max) = {product} must be < 1")]
    UnstableGrid { product: f64 },

    #[error("empty horizon: T = {horizon}, dt = {dt}")]
    EmptyHorizon { horizon: f64, dt: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("rate function evaluated at negative input {0}")]
    NegativeRateInput(f64),

    #[error("rate {rate} outside the action interval [0, {s_max}]")]
    RateOutOfRange { rate: f64, s_max: f64 },

    #[error("query out of range: {0}")]
    OutOfRange(String),

    #[error("solution contains interior production rates; not a bang-bang solution")]
    NotBangBangSolution,

    #[error("solution grids are incompatible: {0}")]
    IncompatibleGrids(String),

    #[error("no interior maximizer on [{t_min}, {t_max}]")]
    NoInteriorMaximizer { t_min: f64, t_max: f64 },

    #[error("invalid costs: preventive {cp} must be below corrective {cu}")]
    InvalidCosts { cp: f64, cu: f64 },

    #[error("fixed-rate baseline profit {0} is too close to zero for a relative comparison")]
    DegenerateBaseline(f64),

    #[error("thinning acceptance probability {0} exceeds one")]
    EnvelopeViolated(f64),

    #[error("oracle mean profit {0} is not positive; relative regret undefined")]
    NonPositiveOracleMean(f64),

    #[error("action space of {size} joint actions exceeds the limit {limit}")]
    ActionSpaceTooLarge { size: usize, limit: usize },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

use crate::exponents::TrivialRule;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point {point:?} lies outside the kernel domain ({domain})")]
    OutsideDomain { point: Vec<f64>, domain: &'static str },

    #[error("sampled field does not match the measure reference points: {0}")]
    NodeMismatch(String),

    #[error("negative or non-finite weight {value} at node {node}")]
    InvalidWeight { node: usize, value: f64 },

    #[error("parameters lie in the trivial regime: {0}")]
    TrivialRegime(TrivialRule),

    #[error("atomic measures are not accepted by the solver (potential is infinite on atoms)")]
    AtomicMeasure,

    #[error("potential is infinite at node {0}")]
    InfinitePotential(usize),

    #[error("seed constant exhausted after {0} halvings without a monotone start")]
    SeedExhausted(usize),

    #[error("manufactured solution vanishes on cell {0} with positive density")]
    VanishingSolution(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

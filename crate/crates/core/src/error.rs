use thiserror::Error;

use crate::equilibrium::FlowOutcome;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The conditioning event of a truncation carries (numerically) no mass.
    #[error("conditioning interval [{lo}, {hi}] has probability {mass:e}")]
    ZeroMass { lo: f64, hi: f64, mass: f64 },

    #[error("unsupported distribution: {0}")]
    UnsupportedDistribution(String),

    #[error("value {value} lies outside the utility domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("cannot parse risk measure `{input}`: {reason}")]
    ParseSpec { input: String, reason: String },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("no path from `{from}` to `{to}`")]
    NoPath { from: String, to: String },

    #[error("negative cycle reachable from `{0}`")]
    NegativeCycle(String),

    /// Shortest-path reduction requested for a measure that does not split over arcs.
    #[error("risk measure `{0}` is not additive over independent arcs; use brute-force path evaluation")]
    NonAdditiveSpec(String),

    #[error("more than {limit} simple paths; instance too large for enumeration")]
    Capacity { limit: usize },

    #[error("cost of arc `{arc}` decreases with flow near y = {flow}")]
    Monotonicity { arc: String, flow: f64 },

    /// Frank-Wolfe stopped at the iteration cap; the best iterate is attached.
    #[error("Frank-Wolfe did not reach the target gap within {} iterations (best gap {:e})", .0.iterations, .0.relative_gap)]
    FlowNonConvergence(Box<FlowOutcome>),

    #[error("best-response dynamics did not settle within {rounds} rounds")]
    DynamicsNonConvergence { rounds: usize },
}

//! Network equilibrium under risk-adjusted arc costs.
//!
//! Non-atomic traffic: the Beckmann program solved by Frank-Wolfe. Atomic
//! traffic: a congestion game with Rosenthal's potential and best-response
//! dynamics. Both need an additive measure so that a path's cost is the sum
//! of its arc costs `sigma_a(y_a) = rho(F_a(y_a))`.

mod atomic;
mod flow;
mod latency;

pub use atomic::{
    best_response_dynamics, exhaustive_deviation_check, rosenthal_potential, AtomicProfile, BrdOutcome,
    CongestionGame, Deviation, Move, Player,
};
pub use flow::{
    beckmann_objective, frank_wolfe_solve, wardrop_violation, FlowAssignment, FlowOutcome, PathFlow,
    USED_PATH_SHARE,
};
pub use latency::{link_cost, validate_monotone, LatencyFamily};

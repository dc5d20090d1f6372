//! Risk measures for random travel times, consistency checks, risk-averse
//! routing and network equilibrium.

pub mod consistency;
pub mod dist;
pub mod equilibrium;
pub mod error;
pub mod risk;
pub mod routing;

pub use dist::{DiscreteDist, Distribution, NormalDist};
pub use error::{Error, Result};
pub use risk::{DistortionFn, RiskMeasureSpec, UtilityFn};
pub use routing::{Network, Path};

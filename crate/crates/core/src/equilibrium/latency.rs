use serde::{Deserialize, Serialize};

use crate::dist::{Distribution, NormalDist};
use crate::error::{Error, Result};
use crate::risk::RiskMeasureSpec;

/// Grid size for the monotonicity check of `y -> rho(F(y))`.
const MONOTONE_GRID: usize = 64;

/// How an arc's travel-time law `F(y)` depends on the arc flow `y`.
///
/// These two shapes are modeling choices; the crate does not infer a
/// dependence from data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencyFamily {
    /// `N(mean0 + mean_slope y, var0 + var_slope y)`, a point mass when the
    /// variance vanishes. Second parameter is the variance.
    NormalAffine { mean0: f64, mean_slope: f64, var0: f64, var_slope: f64 },
    /// `base` scaled by `1 + slope y`.
    DiscreteScaled { base: Distribution, slope: f64 },
}

impl LatencyFamily {
    pub fn normal_affine(mean0: f64, mean_slope: f64, var0: f64, var_slope: f64) -> Result<Self> {
        let f = Self::NormalAffine { mean0, mean_slope, var0, var_slope };
        f.validate()?;
        Ok(f)
    }

    pub fn discrete_scaled(base: Distribution, slope: f64) -> Result<Self> {
        let f = Self::DiscreteScaled { base, slope };
        f.validate()?;
        Ok(f)
    }

    /// Checks parameter signs; monotonicity of the induced cost is checked
    /// separately by [`validate_monotone`].
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(Error::InvalidParameter(format!("latency {what} must be finite and >= 0, got {v}")))
        };
        match self {
            Self::NormalAffine { mean0, mean_slope, var0, var_slope } => {
                if !mean0.is_finite() {
                    return Err(Error::InvalidParameter(format!("latency mean0 must be finite, got {mean0}")));
                }
                for (what, v) in [("mean_slope", mean_slope), ("var0", var0), ("var_slope", var_slope)] {
                    if !(v.is_finite() && *v >= 0.0) {
                        return bad(what, *v);
                    }
                }
                Ok(())
            }
            Self::DiscreteScaled { slope, .. } => {
                if !(slope.is_finite() && *slope >= 0.0) {
                    return bad("slope", *slope);
                }
                Ok(())
            }
        }
    }

    /// Travel-time law at flow `y`.
    pub fn law(&self, y: f64) -> Result<Distribution> {
        if !(y.is_finite() && y >= 0.0) {
            return Err(Error::InvalidParameter(format!("flow must be finite and >= 0, got {y}")));
        }
        match self {
            Self::NormalAffine { mean0, mean_slope, var0, var_slope } => {
                let mean = mean0 + mean_slope * y;
                let var = var0 + var_slope * y;
                if var == 0.0 {
                    Distribution::constant(mean)
                } else {
                    Ok(Distribution::Normal(NormalDist::with_variance(mean, var)?))
                }
            }
            Self::DiscreteScaled { base, slope } => Ok(base.scale(1.0 + slope * y)),
        }
    }

    /// `(a, b)` with `sigma(y) = a + b y` exactly, when the measure acts on
    /// this family as an affine function of flow.
    pub(crate) fn affine_cost(&self, spec: &RiskMeasureSpec) -> Option<(f64, f64)> {
        let Self::NormalAffine { mean0, mean_slope, var0, var_slope } = self else {
            return None;
        };
        let beta = match spec {
            RiskMeasureSpec::Entropic { beta } => *beta,
            RiskMeasureSpec::CertEquiv(c) => c.exponential_rate()?,
            RiskMeasureSpec::MeanVar { gamma } => 2.0 * gamma,
            _ => return None,
        };
        Some((mean0 + 0.5 * beta * var0, mean_slope + 0.5 * beta * var_slope))
    }
}

/// `sigma(y) = rho(F(y))`, the risk-adjusted cost of an arc at flow `y`.
pub fn link_cost(family: &LatencyFamily, spec: &RiskMeasureSpec, y: f64) -> Result<f64> {
    spec.evaluate(&family.law(y)?)
}

/// Rejects families whose cost decreases somewhere on `[0, y_max]`.
pub fn validate_monotone(arc: &str, family: &LatencyFamily, spec: &RiskMeasureSpec, y_max: f64) -> Result<()> {
    family.validate()?;
    let y_max = if y_max.is_finite() && y_max > 0.0 { y_max } else { 1.0 };
    let mut prev = link_cost(family, spec, 0.0)?;
    for i in 1..=MONOTONE_GRID {
        let y = y_max * i as f64 / MONOTONE_GRID as f64;
        let c = link_cost(family, spec, y)?;
        if c < prev - 1e-12 * (1.0 + prev.abs()) {
            return Err(Error::Monotonicity { arc: arc.to_string(), flow: y });
        }
        prev = c;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn link_cost_examples() {
        let e1 = RiskMeasureSpec::Entropic { beta: 1.0 };
        let constant = LatencyFamily::normal_affine(2.0, 0.0, 0.0, 0.0).unwrap();
        for y in [0.0, 1.0, 7.5] {
            assert_eq!(link_cost(&constant, &e1, y).unwrap(), 2.0);
        }
        let f = LatencyFamily::normal_affine(0.0, 1.0, 2.0, 0.0).unwrap();
        assert_eq!(link_cost(&f, &e1, 1.0).unwrap(), 2.0);
        let e0 = RiskMeasureSpec::Entropic { beta: 0.0 };
        let g = LatencyFamily::normal_affine(3.0, 0.5, 4.0, 1.0).unwrap();
        assert_eq!(link_cost(&g, &e0, 2.0).unwrap(), 4.0);
        assert_eq!(link_cost(&g, &RiskMeasureSpec::Entropic { beta: 2.0 }, 2.0).unwrap(), 4.0 + 6.0);
    }

    #[test]
    fn affine_form_matches_evaluation() {
        let f = LatencyFamily::normal_affine(1.0, 0.3, 0.5, 0.2).unwrap();
        for spec in ["entropic:0.7", "cert:exp:-0.2", "mean_var:1.5", "cert:identity"] {
            let spec: RiskMeasureSpec = spec.parse().unwrap();
            let (a, b) = f.affine_cost(&spec).unwrap();
            for y in [0.0, 0.5, 3.0] {
                assert!((a + b * y - link_cost(&f, &spec, y).unwrap()).abs() < 1e-12, "{spec}");
            }
        }
        assert!(f.affine_cost(&RiskMeasureSpec::MeanStdev { gamma: 1.0 }).is_none());
    }

    #[test]
    fn discrete_scaled_law() {
        let base = Distribution::discrete(vec![1.0, 3.0], vec![0.5, 0.5]).unwrap();
        let f = LatencyFamily::discrete_scaled(base, 0.5).unwrap();
        let law = f.law(2.0).unwrap();
        assert_eq!(law.mean(), 4.0);
        validate_monotone("a", &f, &RiskMeasureSpec::Avar { p: 0.1 }, 10.0).unwrap();
    }

    #[test]
    fn decreasing_cost_is_rejected() {
        // Risk-seeking entropic with growing variance lowers the cost.
        let f = LatencyFamily::normal_affine(1.0, 0.1, 1.0, 1.0).unwrap();
        let spec = RiskMeasureSpec::Entropic { beta: -1.0 };
        assert!(matches!(validate_monotone("a", &f, &spec, 4.0), Err(Error::Monotonicity { .. })));
        // A negative base support scaled up also decreases.
        let base = Distribution::discrete(vec![-2.0, -1.0], vec![0.5, 0.5]).unwrap();
        let g = LatencyFamily::discrete_scaled(base, 1.0).unwrap();
        assert!(validate_monotone("b", &g, &RiskMeasureSpec::Entropic { beta: 0.5 }, 2.0).is_err());
        assert!(LatencyFamily::normal_affine(0.0, -1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn json_schema() {
        let f: LatencyFamily = serde_json::from_str(
            r#"{"kind":"normal_affine","mean0":0,"mean_slope":1,"var0":2,"var_slope":0}"#,
        )
        .unwrap();
        assert_eq!(f, LatencyFamily::normal_affine(0.0, 1.0, 2.0, 0.0).unwrap());
        let g: LatencyFamily = serde_json::from_str(
            r#"{"kind":"discrete_scaled","base":{"type":"discrete","support":[1,2],"probs":[0.5,0.5]},"slope":0.25}"#,
        )
        .unwrap();
        let back: LatencyFamily = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
    }
}

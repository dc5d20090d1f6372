use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{DistortionFn, UtilityFn};
use crate::dist::Distribution;
use crate::error::{Error, Result};

/// Which risk functional to apply, with its parameters.
///
/// Textual form (used by the CLI and config files):
/// `entropic:<beta>`, `mean_var:<gamma>`, `mean_stdev:<gamma>`, `var:<p>`,
/// `avar:<p>`, `tce:<p>`, `distortion:<h>`, `cert:<c>`, `rankdep:<c>:<h>`
/// where `<h>` is `identity | power:<a> | avar_cap:<p>` and `<c>` is
/// `identity | exp:<beta> | cubic`.
#[derive(Debug, Clone, PartialEq)]
pub enum RiskMeasureSpec {
    Entropic { beta: f64 },
    MeanVar { gamma: f64 },
    MeanStdev { gamma: f64 },
    Var { p: f64 },
    Avar { p: f64 },
    Tce { p: f64 },
    Distortion(DistortionFn),
    CertEquiv(UtilityFn),
    RankDep { utility: UtilityFn, distortion: DistortionFn },
}

impl RiskMeasureSpec {
    pub fn evaluate(&self, x: &Distribution) -> Result<f64> {
        match self {
            Self::Entropic { beta } => super::entropic(x, *beta),
            Self::MeanVar { gamma } => super::mean_var(x, *gamma),
            Self::MeanStdev { gamma } => super::mean_stdev(x, *gamma),
            Self::Var { p } => super::value_at_risk(x, *p),
            Self::Avar { p } => super::avar(x, *p),
            Self::Tce { p } => super::tce(x, *p),
            Self::Distortion(h) => super::distortion_measure(x, h),
            Self::CertEquiv(c) => super::certainty_equivalent(x, c),
            Self::RankDep { utility, distortion } => super::rank_dependent(x, utility, distortion),
        }
    }

    /// `rho(X + Y) = rho(X) + rho(Y)` for independent `X`, `Y`; exactly the
    /// measures for which path risk splits into a sum of arc weights.
    pub fn is_additive(&self) -> bool {
        match self {
            Self::Entropic { .. } | Self::MeanVar { .. } => true,
            Self::Distortion(h) => h.is_identity(),
            Self::CertEquiv(c) => c.exponential_rate().is_some(),
            Self::RankDep { utility, distortion } => {
                utility.exponential_rate().is_some() && distortion.is_identity()
            }
            _ => false,
        }
    }

    /// `rho(X + m) = rho(X) + m` for every constant `m`.
    pub fn is_translation_invariant(&self) -> bool {
        match self {
            Self::CertEquiv(c) => c.exponential_rate().is_some(),
            Self::RankDep { utility, .. } => utility.exponential_rate().is_some(),
            _ => true,
        }
    }

    /// `X <= Y` almost surely implies `rho(X) <= rho(Y)`.
    pub fn is_monotone(&self) -> bool {
        !matches!(self, Self::MeanVar { .. } | Self::MeanStdev { .. } | Self::Tce { .. })
    }

    /// `rho(lambda X) = lambda rho(X)` for `lambda > 0`.
    pub fn is_positively_homogeneous(&self) -> bool {
        match self {
            Self::Var { .. } | Self::Avar { .. } | Self::Tce { .. } | Self::MeanStdev { .. } => true,
            Self::Distortion(_) => true,
            Self::CertEquiv(c) | Self::RankDep { utility: c, .. } => matches!(c, UtilityFn::Identity),
            Self::Entropic { beta } => *beta == 0.0,
            Self::MeanVar { .. } => false,
        }
    }
}

impl fmt::Display for RiskMeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Entropic { beta } => write!(f, "entropic:{beta}"),
            Self::MeanVar { gamma } => write!(f, "mean_var:{gamma}"),
            Self::MeanStdev { gamma } => write!(f, "mean_stdev:{gamma}"),
            Self::Var { p } => write!(f, "var:{p}"),
            Self::Avar { p } => write!(f, "avar:{p}"),
            Self::Tce { p } => write!(f, "tce:{p}"),
            Self::Distortion(h) => write!(f, "distortion:{h}"),
            Self::CertEquiv(c) => write!(f, "cert:{c}"),
            Self::RankDep { utility, distortion } => write!(f, "rankdep:{utility}:{distortion}"),
        }
    }
}

struct Tokens<'a> {
    input: &'a str,
    parts: std::iter::Peekable<std::str::Split<'a, char>>,
}

impl<'a> Tokens<'a> {
    fn new(input: &'a str) -> Self {
        Self { input, parts: input.split(':').peekable() }
    }

    fn fail<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(Error::ParseSpec { input: self.input.to_string(), reason: reason.into() })
    }

    fn word(&mut self, what: &str) -> Result<&'a str> {
        match self.parts.next() {
            Some(w) if !w.is_empty() => Ok(w),
            _ => self.fail(format!("missing {what}")),
        }
    }

    fn number(&mut self, what: &str) -> Result<f64> {
        let w = self.word(what)?;
        match w.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => self.fail(format!("{what} `{w}` is not a finite number")),
        }
    }

    fn finish(&mut self) -> Result<()> {
        match self.parts.next() {
            None => Ok(()),
            Some(extra) => self.fail(format!("unexpected trailing `{extra}`")),
        }
    }

    fn distortion(&mut self) -> Result<DistortionFn> {
        let h = match self.word("distortion kind")? {
            "identity" => DistortionFn::Identity,
            "power" => DistortionFn::power(self.number("power exponent")?)?,
            "avar_cap" => DistortionFn::avar_cap(self.number("avar_cap level")?)?,
            other => return self.fail(format!("unknown distortion `{other}`")),
        };
        Ok(h)
    }

    fn utility(&mut self) -> Result<UtilityFn> {
        let c = match self.word("utility kind")? {
            "identity" => UtilityFn::Identity,
            "exp" => UtilityFn::exponential(self.number("exponential rate")?)?,
            "cubic" => UtilityFn::CubicTest,
            other => return self.fail(format!("unknown utility `{other}`")),
        };
        Ok(c)
    }
}

impl FromStr for RiskMeasureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut t = Tokens::new(s.trim());
        let level = |t: &mut Tokens<'_>, what: &str| -> Result<f64> {
            let p = t.number(what)?;
            if p > 0.0 && p < 1.0 {
                Ok(p)
            } else {
                t.fail(format!("{what} {p} not in (0, 1)"))
            }
        };
        let weight = |t: &mut Tokens<'_>| -> Result<f64> {
            let g = t.number("gamma")?;
            if g > 0.0 {
                Ok(g)
            } else {
                t.fail(format!("gamma {g} must be positive"))
            }
        };
        let spec = match t.word("measure name")? {
            "entropic" => Self::Entropic { beta: t.number("beta")? },
            "mean_var" => Self::MeanVar { gamma: weight(&mut t)? },
            "mean_stdev" => Self::MeanStdev { gamma: weight(&mut t)? },
            "var" => Self::Var { p: level(&mut t, "VaR level")? },
            "avar" => Self::Avar { p: level(&mut t, "AVaR level")? },
            "tce" => Self::Tce { p: level(&mut t, "TCE level")? },
            "distortion" => Self::Distortion(t.distortion()?),
            "cert" => Self::CertEquiv(t.utility()?),
            "rankdep" => {
                let utility = t.utility()?;
                let distortion = t.distortion()?;
                Self::RankDep { utility, distortion }
            }
            other => return t.fail(format!("unknown measure `{other}`")),
        };
        t.finish()?;
        Ok(spec)
    }
}

impl Serialize for RiskMeasureSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RiskMeasureSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

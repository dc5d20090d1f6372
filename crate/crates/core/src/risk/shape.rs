//! Distortion maps `h: [0,1] -> [0,1]` and utility functions `c`.

use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Grid size for validating piecewise-defined shapes.
const SHAPE_CHECK_POINTS: usize = 1000;

/// A continuous nondecreasing map of `[0,1]` onto itself with `h(0)=0`, `h(1)=1`.
#[derive(Debug, Clone, PartialEq)]
pub enum DistortionFn {
    Identity,
    /// `h(u) = u^a`, `a > 0`.
    Power(f64),
    /// `h(u) = min(u / p, 1)`; the distortion behind AVaR at level `p`.
    AvarCap(f64),
    /// Linear interpolation between knots `(u, h(u))` from `(0,0)` to `(1,1)`.
    PiecewiseLinear(Vec<(f64, f64)>),
}

impl DistortionFn {
    pub fn power(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter(format!("power distortion needs a > 0, got {a}")));
        }
        Ok(Self::Power(a))
    }

    pub fn avar_cap(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!("avar_cap level {p} not in (0, 1)")));
        }
        Ok(Self::AvarCap(p))
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |why: &str| Err(Error::InvalidParameter(format!("piecewise distortion: {why}")));
        if knots.len() < 2 {
            return bad("need at least two knots");
        }
        if knots.first() != Some(&(0.0, 0.0)) || knots.last() != Some(&(1.0, 1.0)) {
            return bad("must start at (0,0) and end at (1,1)");
        }
        if knots.windows(2).any(|w| w[0].0 >= w[1].0) {
            return bad("knot abscissae must be strictly increasing");
        }
        let h = Self::PiecewiseLinear(knots);
        h.validate()?;
        Ok(h)
    }

    /// Checks `h(0)=0`, `h(1)=1`, range and monotonicity on a uniform grid.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Power(a) if !(a.is_finite() && *a > 0.0) => {
                return Err(Error::InvalidParameter(format!("power distortion needs a > 0, got {a}")))
            }
            Self::AvarCap(p) if !(*p > 0.0 && *p < 1.0) => {
                return Err(Error::InvalidParameter(format!("avar_cap level {p} not in (0, 1)")))
            }
            _ => {}
        }
        if self.eval(0.0) != 0.0 || self.eval(1.0) != 1.0 {
            return Err(Error::InvalidParameter("distortion must satisfy h(0)=0 and h(1)=1".into()));
        }
        let mut prev = 0.0;
        for i in 0..=SHAPE_CHECK_POINTS {
            let v = self.eval(i as f64 / SHAPE_CHECK_POINTS as f64);
            if !(0.0..=1.0).contains(&v) || v < prev {
                return Err(Error::InvalidParameter("distortion must be nondecreasing into [0,1]".into()));
            }
            prev = v;
        }
        Ok(())
    }

    /// `h(u)` with `u` clamped to `[0,1]`.
    pub fn eval(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            Self::Identity => u,
            Self::Power(a) => u.powf(*a),
            Self::AvarCap(p) => (u / p).min(1.0),
            Self::PiecewiseLinear(knots) => {
                let k = knots.partition_point(|&(x, _)| x <= u);
                if k >= knots.len() {
                    return knots[knots.len() - 1].1;
                }
                let (x0, y0) = knots[k - 1];
                let (x1, y1) = knots[k];
                y0 + (y1 - y0) * (u - x0) / (x1 - x0)
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            Self::Identity => true,
            Self::Power(a) => *a == 1.0,
            Self::AvarCap(_) => false,
            Self::PiecewiseLinear(knots) => knots.iter().all(|(x, y)| x == y),
        }
    }

    /// `h(u)` in exact rational arithmetic, for the shapes that admit it.
    pub(crate) fn eval_exact(&self, u: &BigRational) -> Option<BigRational> {
        let zero = BigRational::zero();
        let one = BigRational::one();
        let u = if *u < zero { zero } else if *u > one { one.clone() } else { u.clone() };
        match self {
            Self::Identity => Some(u),
            Self::Power(a) if *a == 1.0 => Some(u),
            Self::Power(_) => None,
            Self::AvarCap(p) => {
                let v = u / BigRational::from_float(*p)?;
                Some(if v > one { one } else { v })
            }
            Self::PiecewiseLinear(knots) => {
                let exact: Option<Vec<(BigRational, BigRational)>> = knots
                    .iter()
                    .map(|&(x, y)| Some((BigRational::from_float(x)?, BigRational::from_float(y)?)))
                    .collect();
                let exact = exact?;
                let k = exact.partition_point(|(x, _)| *x <= u);
                if k >= exact.len() {
                    return Some(exact[exact.len() - 1].1.clone());
                }
                let (x0, y0) = &exact[k - 1];
                let (x1, y1) = &exact[k];
                Some(y0 + (y1 - y0) * (&u - x0) / (x1 - x0))
            }
        }
    }
}

impl fmt::Display for DistortionFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "identity"),
            Self::Power(a) => write!(f, "power:{a}"),
            Self::AvarCap(p) => write!(f, "avar_cap:{p}"),
            Self::PiecewiseLinear(knots) => {
                write!(f, "piecewise:")?;
                for (i, (x, y)) in knots.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}/{y}")?;
                }
                Ok(())
            }
        }
    }
}

/// A strictly increasing utility `c` with `c(0) = 0`, together with its inverse.
#[derive(Debug, Clone, PartialEq)]
pub enum UtilityFn {
    Identity,
    /// `c(x) = (e^{beta x} - 1) / beta`, `beta != 0`.
    Exponential(f64),
    /// `c(x) = x + x^3`; a strictly increasing utility that is not exponential.
    CubicTest,
    /// Linear interpolation of a strictly increasing table through `(0, 0)`.
    /// The domain is the table's abscissa range.
    Table(Vec<(f64, f64)>),
}

const CUBIC_INVERSE_TOL: f64 = 1e-12;

impl UtilityFn {
    pub fn exponential(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "exponential utility needs a finite nonzero rate, got {beta}"
            )));
        }
        Ok(Self::Exponential(beta))
    }

    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |why: &str| Err(Error::InvalidParameter(format!("utility table: {why}")));
        if points.len() < 2 {
            return bad("need at least two points");
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return bad("non-finite entry");
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0 || w[0].1 >= w[1].1) {
            return bad("must be strictly increasing in both coordinates");
        }
        let c = Self::Table(points);
        match c.eval(0.0) {
            Ok(v) if v.abs() <= 1e-12 => Ok(c),
            _ => bad("must pass through (0, 0)"),
        }
    }

    /// Closed interval on which `c` is defined.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Self::Table(points) => (points[0].0, points[points.len() - 1].0),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// `Some(beta)` when `c` is exponential with rate `beta`, `Some(0)` for the identity.
    pub fn exponential_rate(&self) -> Option<f64> {
        match self {
            Self::Identity => Some(0.0),
            Self::Exponential(b) => Some(*b),
            _ => None,
        }
    }

    pub(crate) fn check_domain(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if x < lo || x > hi {
            return Err(Error::Domain { value: x, lo, hi });
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(match self {
            Self::Identity => x,
            Self::Exponential(b) => (b * x).exp_m1() / b,
            Self::CubicTest => x + x * x * x,
            Self::Table(points) => {
                let k = points.partition_point(|&(px, _)| px <= x).clamp(1, points.len() - 1);
                let (x0, y0) = points[k - 1];
                let (x1, y1) = points[k];
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        })
    }

    pub fn inverse(&self, y: f64) -> Result<f64> {
        match self {
            Self::Identity => Ok(y),
            Self::Exponential(b) => {
                let arg = b * y;
                if arg <= -1.0 {
                    return Err(Error::Domain { value: y, lo: -1.0 / b, hi: f64::INFINITY });
                }
                Ok(arg.ln_1p() / b)
            }
            Self::CubicTest => Ok(bisect_increasing(|x| x + x * x * x, y, -(y.abs() + 1.0), y.abs() + 1.0)),
            Self::Table(points) => {
                let (lo, hi) = (points[0].1, points[points.len() - 1].1);
                if y < lo || y > hi {
                    return Err(Error::Domain { value: y, lo, hi });
                }
                let k = points.partition_point(|&(_, py)| py <= y).clamp(1, points.len() - 1);
                let (x0, y0) = points[k - 1];
                let (x1, y1) = points[k];
                Ok(x0 + (x1 - x0) * (y - y0) / (y1 - y0))
            }
        }
    }
}

/// Root of `f(x) = target` for increasing `f`, bracketed by `[lo, hi]`.
fn bisect_increasing<F: Fn(f64) -> f64>(f: F, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= CUBIC_INVERSE_TOL * mid.abs().max(1.0) {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl fmt::Display for UtilityFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "identity"),
            Self::Exponential(b) => write!(f, "exp:{b}"),
            Self::CubicTest => write!(f, "cubic"),
            Self::Table(points) => write!(f, "table[{} points]", points.len()),
        }
    }
}

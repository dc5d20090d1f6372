//! Risk functionals on travel-time laws.
//!
//! Costs are read as disutilities: smaller values are preferred. Normal laws
//! get closed forms wherever one exists; finite laws are evaluated exactly up
//! to floating-point rounding.

mod shape;
mod spec;

use crate::dist::{accurate_sum, gaussian, DiscreteDist, Distribution};
use crate::error::{Error, Result};

pub use shape::{DistortionFn, UtilityFn};
pub use spec::RiskMeasureSpec;

/// Slack on the cumulative-probability comparison in the VaR quantile search.
const QUANTILE_SLACK: f64 = 1e-12;

fn check_level(p: f64, what: &str) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} level {p} not in (0, 1)")))
    }
}

fn check_weight(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("risk weight gamma must be > 0, got {gamma}")))
    }
}

fn unsupported_normal(what: &str) -> Error {
    Error::UnsupportedDistribution(format!(
        "{what} is defined here for bounded laws only; discretize and truncate normal inputs first"
    ))
}

/// `(1/beta) ln E[exp(beta (X - r))] + r` with `r` the extreme support point
/// on the side that keeps every exponent nonpositive.
fn log_mean_exp(x: &DiscreteDist, beta: f64) -> f64 {
    let reference = if beta > 0.0 { x.max() } else { x.min() };
    let centered = accurate_sum(x.atoms().map(|(v, p)| p * (beta * (v - reference)).exp_m1()));
    reference + centered.ln_1p() / beta
}

/// Entropic risk `(1/beta) ln E[e^{beta X}]`; the mean when `beta = 0`.
pub fn entropic(x: &Distribution, beta: f64) -> Result<f64> {
    if !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("entropic rate must be finite, got {beta}")));
    }
    Ok(match x {
        Distribution::Constant(m) => *m,
        _ if beta == 0.0 => x.mean(),
        Distribution::Normal(n) => n.mean() + 0.5 * beta * n.variance(),
        Distribution::Discrete(d) => log_mean_exp(d, beta),
    })
}

/// `mean + gamma * variance`.
pub fn mean_var(x: &Distribution, gamma: f64) -> Result<f64> {
    check_weight(gamma)?;
    Ok(x.mean() + gamma * x.variance())
}

/// `mean + gamma * standard deviation`.
pub fn mean_stdev(x: &Distribution, gamma: f64) -> Result<f64> {
    check_weight(gamma)?;
    Ok(x.mean() + gamma * x.variance().sqrt())
}

/// Index of `VaR_p` in the support: the first point whose upper tail is at most `p`.
fn var_index(x: &DiscreteDist, p: f64) -> usize {
    let tails = x.upper_tails();
    tails.iter().position(|&t| t <= p + QUANTILE_SLACK).unwrap_or(x.len() - 1)
}

/// `VaR_p(X) = inf { m : P(X <= m) >= 1 - p }`.
pub fn value_at_risk(x: &Distribution, p: f64) -> Result<f64> {
    check_level(p, "VaR")?;
    Ok(match x {
        Distribution::Constant(m) => *m,
        Distribution::Normal(n) => n.mean() - n.std() * gaussian::quantile(p),
        Distribution::Discrete(d) => d.support()[var_index(d, p)],
    })
}

/// Average of `VaR_q` over `q` in `(0, p)`: the mean of the worst `p` mass,
/// splitting the boundary atom fractionally.
pub fn avar(x: &Distribution, p: f64) -> Result<f64> {
    check_level(p, "AVaR")?;
    Ok(match x {
        Distribution::Constant(m) => *m,
        Distribution::Normal(n) => n.mean() + n.std() * gaussian::pdf(gaussian::quantile(p)) / p,
        Distribution::Discrete(d) => {
            let mut remaining = p;
            let mut terms = Vec::new();
            for (v, q) in d.atoms().collect::<Vec<_>>().into_iter().rev() {
                let w = q.min(remaining);
                terms.push(w / p * v);
                remaining -= w;
                if remaining <= 0.0 {
                    break;
                }
            }
            accurate_sum(terms)
        }
    })
}

/// AVaR via `(1/p) min_z { E[(X - z)+] + p z }`; the minimum over a finite
/// law is attained on its support.
pub fn avar_dual(x: &DiscreteDist, p: f64) -> Result<f64> {
    check_level(p, "AVaR")?;
    let (xs, ps) = (x.support(), x.probs());
    let n = xs.len();
    // excess = E[(X - xs[k])+], built from the top with nonnegative increments.
    let mut excess = 0.0;
    let mut tail = 0.0;
    let mut best = xs[n - 1] * p;
    for k in (0..n - 1).rev() {
        tail += ps[k + 1];
        excess += (xs[k + 1] - xs[k]) * tail;
        best = best.min(excess + p * xs[k]);
    }
    Ok(best / p)
}

/// Tail conditional expectation `E[X | X >= VaR_p(X)]`.
pub fn tce(x: &Distribution, p: f64) -> Result<f64> {
    check_level(p, "TCE")?;
    match x {
        Distribution::Constant(m) => Ok(*m),
        Distribution::Normal(_) => avar(x, p),
        Distribution::Discrete(d) => {
            let k = var_index(d, p);
            let mass = accurate_sum(d.probs()[k..].iter().copied());
            if mass <= 0.0 {
                let q = d.support()[k];
                return Err(Error::ZeroMass { lo: q, hi: f64::INFINITY, mass });
            }
            Ok(accurate_sum(d.atoms().skip(k).map(|(v, q)| v * q)) / mass)
        }
    }
}

/// Choquet integral `int h(P(X > t)) dt` (with the `h - 1` correction below 0)
/// of a finite law: `x_1 + sum_k h(P(X > x_k)) (x_{k+1} - x_k)`.
fn choquet(values: &[f64], tails: &[f64], h: &DistortionFn) -> f64 {
    let increments = values
        .windows(2)
        .zip(tails)
        .map(|(w, &s)| h.eval(s) * (w[1] - w[0]));
    values[0] + accurate_sum(increments)
}

/// Distortion risk measure `rho^h`.
pub fn distortion_measure(x: &Distribution, h: &DistortionFn) -> Result<f64> {
    h.validate()?;
    let d = x.as_discrete().ok_or_else(|| unsupported_normal("a distortion measure"))?;
    if d.len() == 1 {
        return Ok(d.min());
    }
    Ok(choquet(d.support(), &d.upper_tails(), h))
}

fn check_support_domain(d: &DiscreteDist, c: &UtilityFn) -> Result<()> {
    c.check_domain(d.min())?;
    c.check_domain(d.max())
}

/// Certainty equivalent `c^{-1}(E[c(X)])`.
pub fn certainty_equivalent(x: &Distribution, c: &UtilityFn) -> Result<f64> {
    match x {
        Distribution::Normal(n) => match c {
            UtilityFn::Identity => Ok(n.mean()),
            UtilityFn::Exponential(beta) => Ok(n.mean() + 0.5 * beta * n.variance()),
            // E[X + X^3] = mu + mu^3 + 3 mu sigma^2.
            UtilityFn::CubicTest => {
                let mu = n.mean();
                c.inverse(mu + mu * mu * mu + 3.0 * mu * n.variance())
            }
            UtilityFn::Table(_) => {
                let (lo, hi) = c.domain();
                Err(Error::Domain { value: f64::INFINITY, lo, hi })
            }
        },
        _ => {
            let d = x.as_discrete().unwrap();
            check_support_domain(&d, c)?;
            if d.len() == 1 {
                return Ok(d.min());
            }
            match c {
                UtilityFn::Identity => Ok(d.mean()),
                UtilityFn::Exponential(beta) => Ok(log_mean_exp(&d, *beta)),
                _ => {
                    let utilities: Result<Vec<f64>> =
                        d.atoms().map(|(v, p)| c.eval(v).map(|u| p * u)).collect();
                    c.inverse(accurate_sum(utilities?))
                }
            }
        }
    }
}

/// Rank-dependent expected utility `c^{-1}(int h(P(c(X) > t)) dt)`.
///
/// Reduces to [`certainty_equivalent`] when `h` is the identity and to
/// [`distortion_measure`] when `c` is the identity.
pub fn rank_dependent(x: &Distribution, c: &UtilityFn, h: &DistortionFn) -> Result<f64> {
    h.validate()?;
    let d = x.as_discrete().ok_or_else(|| unsupported_normal("a rank-dependent utility"))?;
    check_support_domain(&d, c)?;
    if d.len() == 1 {
        return Ok(d.min());
    }
    let tails = d.upper_tails();
    match c {
        UtilityFn::Identity => Ok(choquet(d.support(), &tails, h)),
        UtilityFn::Exponential(beta) => {
            // 1 + beta c(x) = e^{beta x}; factor out e^{beta r} so that every
            // exponent is nonpositive, then work with expm1 offsets.
            let beta = *beta;
            let reference = if beta > 0.0 { d.max() } else { d.min() };
            // Dividing by beta keeps the transformed values increasing in x.
            let offsets: Vec<f64> =
                d.support().iter().map(|v| (beta * (v - reference)).exp_m1() / beta).collect();
            let centered = beta * choquet(&offsets, &tails, h);
            if centered <= -1.0 {
                return Err(Error::Domain { value: centered, lo: -1.0, hi: f64::INFINITY });
            }
            Ok(reference + centered.ln_1p() / beta)
        }
        _ => {
            let utilities: Result<Vec<f64>> = d.support().iter().map(|&v| c.eval(v)).collect();
            c.inverse(choquet(&utilities?, &tails, h))
        }
    }
}

/// Evaluates `spec` on `x`.
pub fn evaluate(spec: &RiskMeasureSpec, x: &Distribution) -> Result<f64> {
    spec.evaluate(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(atoms: &[(f64, f64)]) -> Distribution {
        Distribution::Discrete(DiscreteDist::from_atoms(atoms.iter().copied()).unwrap())
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn three_point() -> Distribution {
        disc(&[(1.0, 0.5), (2.0, 0.3), (3.0, 0.2)])
    }

    #[test]
    fn entropic_examples() {
        for beta in [-3.0, 0.0, 0.5, 2.0] {
            assert_eq!(entropic(&Distribution::Constant(4.5), beta).unwrap(), 4.5);
        }
        let coin = disc(&[(0.0, 0.5), (1.0, 0.5)]);
        // ln((1 + e) / 2) by hand.
        close(entropic(&coin, 1.0).unwrap(), ((1.0 + std::f64::consts::E) / 2.0).ln(), 1e-15);
        close(entropic(&coin, 1.0).unwrap(), 0.620_114_506_958_693, 1e-12);
        assert_eq!(entropic(&coin, 0.0).unwrap(), 0.5);

        let n = Distribution::normal(10.0, 2.0).unwrap();
        assert_eq!(entropic(&n, 1.0).unwrap(), 12.0);
        let d = Distribution::Discrete(n.discretized(512).into_owned());
        // Equal-probability buckets are coarse in the tails, which dominate
        // once beta * sigma is large; a mild rate stays accurate.
        close(entropic(&d, 0.2).unwrap(), 10.4, 1e-3);
        assert!(entropic(&coin, f64::INFINITY).is_err());
    }

    #[test]
    fn entropic_survives_large_exponents() {
        let x = disc(&[(0.0, 0.5), (1000.0, 0.5)]);
        close(entropic(&x, 1.0).unwrap(), 1000.0 + 0.5_f64.ln(), 1e-9);
        close(entropic(&x, -1.0).unwrap(), -(0.5_f64.ln()), 1e-9);
        // Small rates approach the mean without cancellation.
        close(entropic(&disc(&[(0.0, 0.5), (1.0, 0.5)]), 1e-12).unwrap(), 0.5, 1e-12);
    }

    #[test]
    fn mean_risk_examples() {
        assert_eq!(mean_stdev(&Distribution::normal(11.0, 1.0).unwrap(), 1.0).unwrap(), 12.0);
        let y = Distribution::Normal(crate::dist::NormalDist::with_variance(20.0, 7.0).unwrap());
        close(mean_stdev(&y, 1.0).unwrap(), 20.0 + 7.0_f64.sqrt(), 1e-12);
        assert_eq!(mean_var(&Distribution::Constant(3.0), 2.0).unwrap(), 3.0);
        assert!(mean_var(&Distribution::Constant(3.0), 0.0).is_err());
    }

    #[test]
    fn var_examples() {
        assert_eq!(value_at_risk(&three_point(), 0.2).unwrap(), 2.0);
        assert_eq!(value_at_risk(&three_point(), 0.19).unwrap(), 3.0);
        assert_eq!(value_at_risk(&three_point(), 0.5).unwrap(), 1.0);
        assert_eq!(value_at_risk(&Distribution::Constant(-2.0), 0.3).unwrap(), -2.0);
        close(value_at_risk(&Distribution::normal(0.0, 1.0).unwrap(), 0.05).unwrap(), 1.644_853_626_951_472, 1e-12);
        assert!(value_at_risk(&three_point(), 1.0).is_err());
    }

    #[test]
    fn avar_examples() {
        assert_eq!(avar(&three_point(), 0.2).unwrap(), 3.0);
        // Worst 30%: 0.2 at 3 and 0.1 at 2.
        close(avar(&three_point(), 0.3).unwrap(), (0.6 + 0.2) / 0.3, 1e-12);
        assert_eq!(avar(&Distribution::Constant(7.0), 0.4).unwrap(), 7.0);
        let z: f64 = 1.644_853_626_951_472;
        let expected = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() / 0.05;
        close(avar(&Distribution::normal(0.0, 1.0).unwrap(), 0.05).unwrap(), expected, 1e-10);
        close(expected, 2.062_712_807_507_427_5, 1e-12);
    }

    #[test]
    fn avar_normal_matches_quantile_quadrature() {
        // (1/p) int_0^p VaR_q dq by the midpoint rule on a substituted grid.
        let p = 0.05;
        let n = 200_000;
        let mut acc = 0.0;
        for i in 0..n {
            let q = p * (i as f64 + 0.5) / n as f64;
            acc += -gaussian::quantile(q);
        }
        let quad = acc / n as f64;
        close(avar(&Distribution::normal(0.0, 1.0).unwrap(), p).unwrap(), quad, 1e-4);
    }

    #[test]
    fn avar_dual_agrees() {
        let d = DiscreteDist::from_atoms([(1.0, 0.5), (2.0, 0.3), (3.0, 0.2)]).unwrap();
        for p in [0.05, 0.2, 0.3, 0.5, 0.77, 0.95] {
            close(avar_dual(&d, p).unwrap(), avar(&Distribution::Discrete(d.clone()), p).unwrap(), 1e-12);
        }
    }

    #[test]
    fn tce_examples() {
        let n = Distribution::normal(0.0, 1.0).unwrap();
        close(tce(&n, 0.05).unwrap(), avar(&n, 0.05).unwrap(), 1e-9);
        assert_eq!(tce(&Distribution::Constant(1.5), 0.05).unwrap(), 1.5);
        assert_eq!(tce(&disc(&[(0.0, 0.9), (10.0, 0.1)]), 0.05).unwrap(), 10.0);
        // VaR_0.3 = 2, tail {2, 3} with masses 0.3, 0.2.
        close(tce(&three_point(), 0.3).unwrap(), (0.6 + 0.6) / 0.5, 1e-12);
    }

    #[test]
    fn distortion_examples() {
        close(distortion_measure(&three_point(), &DistortionFn::Identity).unwrap(), 1.7, 1e-15);
        assert_eq!(distortion_measure(&three_point(), &DistortionFn::AvarCap(0.2)).unwrap(), 3.0);
        assert_eq!(
            distortion_measure(&Distribution::Constant(-4.0), &DistortionFn::Power(0.3)).unwrap(),
            -4.0
        );
        // Negative support exercises the h - 1 branch: P(X > x) = 0.5 on [-2, 1).
        let x = disc(&[(-2.0, 0.5), (1.0, 0.5)]);
        close(distortion_measure(&x, &DistortionFn::Power(0.5)).unwrap(), -2.0 + 3.0 * 0.5_f64.sqrt(), 1e-15);
        assert!(matches!(
            distortion_measure(&Distribution::normal(0.0, 1.0).unwrap(), &DistortionFn::Identity),
            Err(Error::UnsupportedDistribution(_))
        ));
    }

    #[test]
    fn certainty_equivalent_examples() {
        let coin = disc(&[(0.0, 0.5), (1.0, 0.5)]);
        assert_eq!(certainty_equivalent(&coin, &UtilityFn::Identity).unwrap(), 0.5);
        close(
            certainty_equivalent(&coin, &UtilityFn::Exponential(1.0)).unwrap(),
            entropic(&coin, 1.0).unwrap(),
            1e-12,
        );
        close(certainty_equivalent(&coin, &UtilityFn::CubicTest).unwrap(), 0.682_327_803_8, 1e-9);
        let t = UtilityFn::table(vec![(0.0, 0.0), (1.0, 1.0)]).unwrap();
        assert!(matches!(certainty_equivalent(&disc(&[(-1.0, 0.5), (1.0, 0.5)]), &t), Err(Error::Domain { .. })));
    }

    #[test]
    fn certainty_equivalent_follows_generic_formula() {
        // c^{-1}(E c(X)) evaluated naively for moderate exponents.
        let x = disc(&[(0.3, 0.2), (1.1, 0.5), (2.4, 0.3)]);
        for beta in [-1.5, -0.2, 0.4, 1.7] {
            let c = |v: f64| ((beta * v).exp() - 1.0) / beta;
            let ey: f64 = [(0.3, 0.2), (1.1, 0.5), (2.4, 0.3)].iter().map(|&(v, p)| p * c(v)).sum();
            let naive = (1.0 + beta * ey).ln() / beta;
            close(certainty_equivalent(&x, &UtilityFn::Exponential(beta)).unwrap(), naive, 1e-12);
        }
    }

    #[test]
    fn rank_dependent_examples() {
        let x = three_point();
        close(rank_dependent(&x, &UtilityFn::Identity, &DistortionFn::Identity).unwrap(), 1.7, 1e-15);
        // z B_p with z = 2, p = 0.3: c^{-1}(h(p) c(z)).
        let zb = disc(&[(0.0, 0.7), (2.0, 0.3)]);
        for (c, h) in [
            (UtilityFn::Exponential(0.8), DistortionFn::Power(0.5)),
            (UtilityFn::CubicTest, DistortionFn::AvarCap(0.4)),
            (UtilityFn::Exponential(-0.6), DistortionFn::Identity),
            (UtilityFn::Exponential(-0.6), DistortionFn::Power(0.5)),
        ] {
            let expected = c.inverse(h.eval(0.3) * c.eval(2.0).unwrap()).unwrap();
            close(rank_dependent(&zb, &c, &h).unwrap(), expected, 1e-12);
        }
        let coin = disc(&[(0.0, 0.5), (1.0, 0.5)]);
        close(rank_dependent(&coin, &UtilityFn::Exponential(1.0), &DistortionFn::AvarCap(0.5)).unwrap(), 1.0, 1e-15);
    }

    #[test]
    fn rank_dependent_reduces_to_special_cases() {
        let x = disc(&[(-1.0, 0.1), (0.5, 0.4), (2.0, 0.3), (4.0, 0.2)]);
        for c in [UtilityFn::Exponential(0.9), UtilityFn::CubicTest, UtilityFn::Exponential(-0.4)] {
            close(
                rank_dependent(&x, &c, &DistortionFn::Identity).unwrap(),
                certainty_equivalent(&x, &c).unwrap(),
                1e-9,
            );
        }
        for h in [DistortionFn::Power(0.5), DistortionFn::AvarCap(0.25)] {
            close(
                rank_dependent(&x, &UtilityFn::Identity, &h).unwrap(),
                distortion_measure(&x, &h).unwrap(),
                1e-15,
            );
        }
    }

    #[test]
    fn evaluate_dispatch() {
        let x = three_point();
        assert_eq!(evaluate(&RiskMeasureSpec::Entropic { beta: 0.0 }, &x).unwrap(), x.mean());
        let y = Distribution::Normal(crate::dist::NormalDist::with_variance(10.0, 5.0).unwrap());
        close(evaluate(&RiskMeasureSpec::MeanStdev { gamma: 1.0 }, &y).unwrap(), 10.0 + 5.0_f64.sqrt(), 1e-14);
        assert_eq!(evaluate(&RiskMeasureSpec::Avar { p: 0.2 }, &x).unwrap(), 3.0);
    }
}

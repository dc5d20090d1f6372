use rand::Rng;
use serde_json::json;

use super::{sort_reports, TestEnsemble, ViolationReport, COMPOSED_TOL};
use crate::dist::{CoupledSample, DiscreteDist, Distribution};
use crate::error::Result;
use crate::risk::{avar, avar_dual, RiskMeasureSpec};

/// Slack for the monotonicity comparison.
const MONOTONE_SLACK: f64 = 1e-12;
const SCALES: [f64; 3] = [0.5, 2.0, 3.7];

fn relative_tol(v: f64) -> f64 {
    COMPOSED_TOL * (1.0 + v.abs())
}

/// Property checks of `spec` on seeded discrete laws:
///
/// * normalization on constants (always),
/// * translation invariance, monotonicity and positive homogeneity when the
///   spec claims them,
/// * law invariance (two columns with the same marginal),
/// * dual-vs-quantile agreement for AVaR.
///
/// Monotonicity uses a coupled pair `Y = X + U` with `U >= 0` outcome-wise.
pub fn check_axioms(spec: &RiskMeasureSpec, ensemble: &TestEnsemble) -> Result<Vec<ViolationReport>> {
    let mut reports = Vec::new();
    let rho = |d: &DiscreteDist| spec.evaluate(&Distribution::Discrete(d.clone()));
    let name = spec.to_string();

    for m in -5..=5 {
        let m = f64::from(m);
        let v = spec.evaluate(&Distribution::Constant(m))?;
        if (v - m).abs() > COMPOSED_TOL {
            reports.push(ViolationReport::equality("normalization", json!({"spec": name, "m": m}), v, m));
        }
    }

    let mut rng = ensemble.rng();
    for _ in 0..ensemble.count {
        let x = ensemble.draw(&mut rng);
        let rx = rho(&x)?;
        let dist = Distribution::Discrete(x.clone());
        let witness = |extra: serde_json::Value| json!({"spec": name, "x": dist, "extra": extra});

        if spec.is_translation_invariant() {
            let m = f64::from(rng.random_range(-5..=5));
            let shifted = rho(&x.shift(m))?;
            if (shifted - rx - m).abs() > COMPOSED_TOL {
                reports.push(ViolationReport::equality("translation_invariance", witness(json!({"m": m})), shifted, rx + m));
            }
        }

        if spec.is_monotone() {
            let increments: Vec<f64> = (0..x.len())
                .map(|_| if rng.random_bool(0.3) { 0.0 } else { 5.0 * rng.random::<f64>() })
                .collect();
            let rows = x.support().iter().zip(&increments).map(|(&v, &u)| vec![v, v + u]).collect();
            let pair = CoupledSample::new(vec!["x".into(), "y".into()], x.probs().to_vec(), rows)?;
            debug_assert!(pair.almost_surely_le(0, 1));
            let ry = rho(&pair.marginal(1))?;
            if rx > ry + MONOTONE_SLACK {
                let extra = json!({"y": Distribution::Discrete(pair.marginal(1))});
                reports.push(ViolationReport::inequality("monotonicity", witness(extra), rx, ry));
            }
        }

        if spec.is_positively_homogeneous() {
            for lambda in SCALES {
                let scaled = rho(&x.scale(lambda))?;
                if (scaled - lambda * rx).abs() > relative_tol(lambda * rx) {
                    let extra = json!({"lambda": lambda});
                    reports.push(ViolationReport::equality("positive_homogeneity", witness(extra), scaled, lambda * rx));
                }
            }
        }

        // Product coupling of X with an independent copy: both columns have
        // law X but differ outcome by outcome.
        let mut probs = Vec::new();
        let mut rows = Vec::new();
        for (a, p) in x.atoms() {
            for (b, q) in x.atoms() {
                probs.push(p * q);
                rows.push(vec![a, b]);
            }
        }
        let copies = CoupledSample::new(vec!["x".into(), "x_copy".into()], probs, rows)?;
        let (r0, r1) = (rho(&copies.marginal(0))?, rho(&copies.marginal(1))?);
        if (r0 - r1).abs() > relative_tol(r0) {
            reports.push(ViolationReport::equality("law_invariance", witness(json!(null)), r0, r1));
        }

        if let RiskMeasureSpec::Avar { p } = spec {
            let primal = avar(&dist, *p)?;
            let dual = avar_dual(&x, *p)?;
            if (primal - dual).abs() > COMPOSED_TOL {
                reports.push(ViolationReport::equality("avar_dual", witness(json!({"p": p})), primal, dual));
            }
        }
    }
    sort_reports(&mut reports);
    Ok(reports)
}

/// `X` uniform on `{0, 1/n, .., 1}` and `Y = (1 + X) / 2` on the same
/// outcomes, so `X <= Y` everywhere. Returns a report when `rho(Y) < rho(X)`.
pub fn monotonicity_failure_uniform(spec: &RiskMeasureSpec, n: usize) -> Result<Option<ViolationReport>> {
    let n = n.max(1);
    let w = 1.0 / (n as f64 + 1.0);
    let rows: Vec<Vec<f64>> = (0..=n)
        .map(|k| {
            let x = k as f64 / n as f64;
            vec![x, 0.5 * (1.0 + x)]
        })
        .collect();
    let pair = CoupledSample::new(vec!["x".into(), "y".into()], vec![w; n + 1], rows)?;
    debug_assert!(pair.almost_surely_le(0, 1));
    let rx = spec.evaluate(&Distribution::Discrete(pair.marginal(0)))?;
    let ry = spec.evaluate(&Distribution::Discrete(pair.marginal(1)))?;
    Ok((ry < rx - MONOTONE_SLACK).then(|| {
        ViolationReport::inequality("monotonicity", json!({"spec": spec.to_string(), "n": n}), rx, ry)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measures_satisfy_their_axioms() {
        let ensemble = TestEnsemble::new(9, 150);
        for s in [
            "entropic:0.5",
            "entropic:-1",
            "var:0.1",
            "avar:0.1",
            "avar:0.37",
            "tce:0.2",
            "distortion:power:0.5",
            "distortion:avar_cap:0.2",
            "mean_var:2",
            "mean_stdev:1",
            "cert:exp:0.3",
            "cert:cubic",
            "rankdep:exp:0.4:power:0.6",
        ] {
            let spec: RiskMeasureSpec = s.parse().unwrap();
            let r = check_axioms(&spec, &ensemble).unwrap();
            assert!(r.is_empty(), "{s}: {:?}", r.first());
        }
    }

    #[test]
    fn mean_var_is_not_monotone() {
        let r = monotonicity_failure_uniform(&RiskMeasureSpec::MeanVar { gamma: 8.0 }, 100).unwrap().unwrap();
        assert!(r.rhs < r.lhs && r.gap > 0.0);
        assert!(monotonicity_failure_uniform(&RiskMeasureSpec::Entropic { beta: 8.0 }, 100).unwrap().is_none());
        assert!(monotonicity_failure_uniform(&RiskMeasureSpec::Avar { p: 0.1 }, 100).unwrap().is_none());
    }
}

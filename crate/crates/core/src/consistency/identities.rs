use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::Rng;
use serde_json::json;

use super::{sort_reports, TestEnsemble, ViolationReport, COMPOSED_TOL};
use crate::dist::{DiscreteDist, Distribution};
use crate::error::{Error, Result};
use crate::risk::{certainty_equivalent, rank_dependent, DistortionFn, UtilityFn};

/// `P(B_p + B_q > x)` for independent Bernoulli variables.
pub fn bernoulli_sum_decumulative(p: f64, q: f64, x: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&q));
    if x < 0.0 {
        1.0
    } else if x < 1.0 {
        1.0 - (1.0 - p) * (1.0 - q)
    } else if x < 2.0 {
        p * q
    } else {
        0.0
    }
}

/// `h(1 - (1-p)(1-q)) + h(pq) - h(p) - h(q)`.
///
/// The identity residual is exactly zero. Piecewise-linear shapes are
/// evaluated in exact rational arithmetic on the binary values of the inputs.
pub fn efin_residual(h: &DistortionFn, p: f64, q: f64) -> f64 {
    let unit = |u: f64| (0.0..=1.0).contains(&u);
    if h.is_identity() && unit(p) && unit(q) {
        // Polynomial identity in p and q.
        return 0.0;
    }
    if !matches!(h, DistortionFn::PiecewiseLinear(_)) {
        let union = 1.0 - (1.0 - p) * (1.0 - q);
        return h.eval(union) + h.eval(p * q) - h.eval(p) - h.eval(q);
    }
    if let (Some(rp), Some(rq)) = (BigRational::from_float(p), BigRational::from_float(q)) {
        let one = BigRational::one();
        let union = &one - (&one - &rp) * (&one - &rq);
        let both = &rp * &rq;
        let terms = [h.eval_exact(&union), h.eval_exact(&both), h.eval_exact(&rp), h.eval_exact(&rq)];
        if let [Some(a), Some(b), Some(c), Some(d)] = terms {
            return (a + b - c - d).to_f64().unwrap_or(f64::NAN);
        }
    }
    let union = 1.0 - (1.0 - p) * (1.0 - q);
    h.eval(union) + h.eval(p * q) - h.eval(p) - h.eval(q)
}

/// `z in {-3..3} \ {0}`, `p in {0.1..0.9}`, `m in {-5..5}`.
pub fn default_translation_grid() -> Vec<(f64, f64, f64)> {
    let mut grid = Vec::new();
    for z in (-3..=3).filter(|&z| z != 0) {
        for p in 1..=9 {
            for m in -5..=5 {
                grid.push((f64::from(z), f64::from(p) / 10.0, f64::from(m)));
            }
        }
    }
    grid
}

/// Law of `z B_p`.
fn scaled_bernoulli(z: f64, p: f64) -> Result<Distribution> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("Bernoulli level {p} not in (0, 1)")));
    }
    Ok(Distribution::Discrete(DiscreteDist::from_atoms([(0.0, 1.0 - p), (z, p)])?))
}

/// Translation residual `rho_c(z B_p + m) - rho_c(z B_p) - m` of the
/// certainty equivalent at every grid point `(z, p, m)`.
pub fn verify_translation_invariance(c: &UtilityFn, grid: &[(f64, f64, f64)]) -> Result<Vec<ViolationReport>> {
    let mut reports = Vec::new();
    for &(z, p, m) in grid {
        let x = scaled_bernoulli(z, p)?;
        let shifted = certainty_equivalent(&x.shift(m), c)?;
        let base = certainty_equivalent(&x, c)?;
        if (shifted - base - m).abs() > COMPOSED_TOL {
            let witness = json!({"utility": c.to_string(), "z": z, "p": p, "m": m});
            reports.push(ViolationReport::equality("translation_invariance", witness, shifted, base + m));
        }
    }
    sort_reports(&mut reports);
    Ok(reports)
}

/// Translation and additivity failures of `rho_c^h` on scaled Bernoulli laws.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDependentReport {
    pub translation: Vec<ViolationReport>,
    pub additivity: Vec<ViolationReport>,
}

impl RankDependentReport {
    pub fn is_empty(&self) -> bool {
        self.translation.is_empty() && self.additivity.is_empty()
    }
}

/// Checks `rho(z B_p + m) = rho(z B_p) + m` and
/// `rho(z B_p + z B_q) = rho(z B_p) + rho(z B_q)` on `ensemble.count` seeded
/// tuples with `z in [0.1, 5]`, `p, q in [0.05, 0.95]`, `m in [-5, 5]`.
pub fn verify_rank_dependent(c: &UtilityFn, h: &DistortionFn, ensemble: &TestEnsemble) -> Result<RankDependentReport> {
    let mut rng = ensemble.rng();
    let mut translation = Vec::new();
    let mut additivity = Vec::new();
    for _ in 0..ensemble.count {
        let z = rng.random_range(0.1..=5.0);
        let p = rng.random_range(0.05..=0.95);
        let q = rng.random_range(0.05..=0.95);
        let m = rng.random_range(-5.0..=5.0);
        let witness = json!({"utility": c.to_string(), "distortion": h.to_string(), "z": z, "p": p, "q": q, "m": m});

        let bp = scaled_bernoulli(z, p)?;
        let rp = rank_dependent(&bp, c, h)?;
        let shifted = rank_dependent(&bp.shift(m), c, h)?;
        if (shifted - rp - m).abs() > COMPOSED_TOL {
            translation.push(ViolationReport::equality("rank_dependent_translation", witness.clone(), shifted, rp + m));
        }

        let rq = rank_dependent(&scaled_bernoulli(z, q)?, c, h)?;
        let (pb, qb) = (1.0 - p, 1.0 - q);
        let sum = Distribution::Discrete(DiscreteDist::from_atoms([
            (0.0, pb * qb),
            (z, p * qb + pb * q),
            (2.0 * z, p * q),
        ])?);
        let joint = rank_dependent(&sum, c, h)?;
        if (joint - rp - rq).abs() > COMPOSED_TOL {
            additivity.push(ViolationReport::equality("rank_dependent_additivity", witness, joint, rp + rq));
        }
    }
    sort_reports(&mut translation);
    sort_reports(&mut additivity);
    Ok(RankDependentReport { translation, additivity })
}

//! Brute-force checks of additive consistency, risk-measure axioms and the
//! characterization results, plus fixed counterexample fixtures.
//!
//! Every check returns a list of [`ViolationReport`]s; an empty list means
//! the property held on every generated instance.

mod axioms;
mod golden;
mod identities;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dist::{convolve, DiscreteDist, Distribution};
use crate::error::Result;
use crate::risk::RiskMeasureSpec;

pub use axioms::{check_axioms, monotonicity_failure_uniform};
pub use golden::{fig4_level, golden_allais, golden_fig1, golden_fig4, GoldenReport};
pub use identities::{
    bernoulli_sum_decumulative, default_translation_grid, efin_residual, verify_rank_dependent,
    verify_translation_invariance, RankDependentReport,
};

/// Slack on the preference-reversal test.
pub const REVERSAL_SLACK: f64 = 1e-12;
/// Tolerance for composed floating-point identities.
pub const COMPOSED_TOL: f64 = 1e-9;

/// One instance where a checked property failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationReport {
    pub property: String,
    pub witness: Value,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

impl ViolationReport {
    /// Equality property: `gap = |lhs - rhs|`.
    pub fn equality(property: &str, witness: Value, lhs: f64, rhs: f64) -> Self {
        Self { property: property.to_string(), witness, lhs, rhs, gap: (lhs - rhs).abs() }
    }

    /// Inequality property `lhs <= rhs`: `gap = max(0, lhs - rhs)`.
    pub fn inequality(property: &str, witness: Value, lhs: f64, rhs: f64) -> Self {
        Self { property: property.to_string(), witness, lhs, rhs, gap: (lhs - rhs).max(0.0) }
    }
}

/// Canonical report order: property name, then serialized witness.
pub fn sort_reports(reports: &mut [ViolationReport]) {
    reports.sort_by_cached_key(|r| (r.property.clone(), r.witness.to_string()));
}

/// Seeded generator of small random discrete laws.
#[derive(Debug, Clone, PartialEq)]
pub struct TestEnsemble {
    pub seed: u64,
    pub count: usize,
    /// Inclusive bounds on the number of atoms.
    pub atom_range: (usize, usize),
    pub value_range: (f64, f64),
}

impl Default for TestEnsemble {
    fn default() -> Self {
        Self { seed: 42, count: 1000, atom_range: (2, 6), value_range: (0.0, 20.0) }
    }
}

impl TestEnsemble {
    pub fn new(seed: u64, count: usize) -> Self {
        Self { seed, count, ..Self::default() }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// A law with a uniform number of atoms in `atom_range`, support drawn
    /// uniformly from `value_range` and normalized uniform weights.
    pub fn draw(&self, rng: &mut impl Rng) -> DiscreteDist {
        let (lo, hi) = self.atom_range;
        let n = rng.random_range(lo.max(1)..=hi.max(lo.max(1)));
        let (a, b) = self.value_range;
        let values: Vec<f64> = (0..n).map(|_| a + (b - a) * rng.random::<f64>()).collect();
        let weights: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        DiscreteDist::from_atoms(values.into_iter().zip(weights.into_iter().map(|w| w / total)))
            .expect("normalized draw is a valid law")
    }

    pub fn pairs(&self) -> Vec<(DiscreteDist, DiscreteDist)> {
        let mut rng = self.rng();
        (0..self.count).map(|_| (self.draw(&mut rng), self.draw(&mut rng))).collect()
    }

    pub fn triples(&self) -> Vec<(DiscreteDist, DiscreteDist, DiscreteDist)> {
        let mut rng = self.rng();
        (0..self.count)
            .map(|_| (self.draw(&mut rng), self.draw(&mut rng), self.draw(&mut rng)))
            .collect()
    }
}

/// `rho(X + Y) - rho(X) - rho(Y)` for independent `X`, `Y`.
pub fn additivity_residual(spec: &RiskMeasureSpec, x: &DiscreteDist, y: &DiscreteDist) -> Result<f64> {
    let sum = Distribution::Discrete(convolve(x, y));
    let rx = spec.evaluate(&Distribution::Discrete(x.clone()))?;
    let ry = spec.evaluate(&Distribution::Discrete(y.clone()))?;
    Ok(spec.evaluate(&sum)? - rx - ry)
}

/// Preference reversals caused by adding the independent `z` to both `x`
/// and `y`, tested in both orientations.
pub fn consistency_violations(
    spec: &RiskMeasureSpec,
    x: &DiscreteDist,
    y: &DiscreteDist,
    z: &DiscreteDist,
) -> Result<Vec<ViolationReport>> {
    let eval = |d: &DiscreteDist| spec.evaluate(&Distribution::Discrete(d.clone()));
    let (rx, ry) = (eval(x)?, eval(y)?);
    let (rxz, ryz) = (eval(&convolve(x, z))?, eval(&convolve(y, z))?);
    let mut out = Vec::new();
    let witness = |first: &DiscreteDist, second: &DiscreteDist, r1: f64, r2: f64| {
        json!({
            "spec": spec.to_string(),
            "x": Distribution::Discrete(first.clone()),
            "y": Distribution::Discrete(second.clone()),
            "z": Distribution::Discrete(z.clone()),
            "rho_x": r1,
            "rho_y": r2,
        })
    };
    if rx <= ry && rxz > ryz + REVERSAL_SLACK {
        out.push(ViolationReport::inequality("additive_consistency", witness(x, y, rx, ry), rxz, ryz));
    }
    if ry <= rx && ryz > rxz + REVERSAL_SLACK {
        out.push(ViolationReport::inequality("additive_consistency", witness(y, x, ry, rx), ryz, rxz));
    }
    Ok(out)
}

/// Runs [`consistency_violations`] over every triple of the ensemble.
pub fn check_additive_consistency(spec: &RiskMeasureSpec, ensemble: &TestEnsemble) -> Result<Vec<ViolationReport>> {
    let mut reports = Vec::new();
    for (x, y, z) in ensemble.triples() {
        reports.extend(consistency_violations(spec, &x, &y, &z)?);
    }
    sort_reports(&mut reports);
    Ok(reports)
}

/// Largest `|additivity_residual|` over the ensemble's pairs.
pub fn max_additivity_residual(spec: &RiskMeasureSpec, ensemble: &TestEnsemble) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (x, y) in ensemble.pairs() {
        worst = worst.max(additivity_residual(spec, &x, &y)?.abs());
    }
    Ok(worst)
}

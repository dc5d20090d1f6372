use crate::dist::{convolve, gaussian, mixture, truncate_conditional, Distribution, NormalDist};
use crate::error::Result;
use crate::risk::{avar, certainty_equivalent, mean_stdev, UtilityFn};

/// Common shift applied before truncating normals to a bounded interval.
const FIG1_SHIFT: f64 = 20.0;
const FIG1_UPPER: f64 = 100.0;
const CLOSED_FORM_TOL: f64 = 1e-12;
const DISCRETIZED_TOL: f64 = 1e-2;

/// Named values of a fixture and the assertions made about them.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldenReport {
    pub name: &'static str,
    pub values: Vec<(String, f64)>,
    pub checks: Vec<(String, bool)>,
}

impl GoldenReport {
    fn new(name: &'static str) -> Self {
        Self { name, values: Vec::new(), checks: Vec::new() }
    }

    fn value(&mut self, key: &str, v: f64) -> f64 {
        self.values.push((key.to_string(), v));
        v
    }

    fn check(&mut self, key: &str, ok: bool) {
        self.checks.push((key.to_string(), ok));
    }

    fn close(&mut self, key: &str, got: f64, want: f64, tol: f64) {
        self.check(key, (got - want).abs() <= tol);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|(_, ok)| !ok).map(|(k, _)| k.as_str()).collect()
    }
}

fn normal(mean: f64, variance: f64) -> Distribution {
    Distribution::Normal(NormalDist::with_variance(mean, variance).expect("fixture parameters are valid"))
}

/// Two parallel routes `X`, `Y` followed by a common arc `Z`, under the
/// mean-plus-one-standard-deviation measure. `X` beats `Y` alone, yet
/// `Y + Z` beats `X + Z`.
pub fn golden_fig1() -> Result<GoldenReport> {
    let mut r = GoldenReport::new("fig1");
    let (x, y, z) = (normal(11.0, 1.0), normal(10.0, 5.0), normal(10.0, 2.0));
    let rho = |d: &Distribution| mean_stdev(d, 1.0);
    let sum = |a: &Distribution, b: &Distribution| normal(a.mean() + b.mean(), a.variance() + b.variance());

    let rx = r.value("rho_x", rho(&x)?);
    let ry = r.value("rho_y", rho(&y)?);
    let rxz = r.value("rho_x_plus_z", rho(&sum(&x, &z))?);
    let ryz = r.value("rho_y_plus_z", rho(&sum(&y, &z))?);
    r.close("rho_x closed form", rx, 12.0, CLOSED_FORM_TOL);
    r.close("rho_y closed form", ry, 10.0 + 5.0_f64.sqrt(), CLOSED_FORM_TOL);
    r.close("rho_x_plus_z closed form", rxz, 21.0 + 3.0_f64.sqrt(), CLOSED_FORM_TOL);
    r.close("rho_y_plus_z closed form", ryz, 20.0 + 7.0_f64.sqrt(), CLOSED_FORM_TOL);
    r.check("reversal (closed form)", rx < ry && rxz > ryz);

    // Bounded re-enactment: shift, discretize, truncate and condition.
    let bounded = |d: &Distribution| truncate_conditional(&d.shift(FIG1_SHIFT), 0.0, FIG1_UPPER);
    let (xd, yd, zd) = (bounded(&x)?, bounded(&y)?, bounded(&z)?);
    let rho_d = |d: crate::dist::DiscreteDist, offset: f64| rho(&Distribution::Discrete(d)).map(|v| v - offset);
    let dx = r.value("discrete_rho_x", rho_d(xd.clone(), FIG1_SHIFT)?);
    let dy = r.value("discrete_rho_y", rho_d(yd.clone(), FIG1_SHIFT)?);
    let dxz = r.value("discrete_rho_x_plus_z", rho_d(convolve(&xd, &zd), 2.0 * FIG1_SHIFT)?);
    let dyz = r.value("discrete_rho_y_plus_z", rho_d(convolve(&yd, &zd), 2.0 * FIG1_SHIFT)?);
    r.close("discrete rho_x", dx, rx, DISCRETIZED_TOL);
    r.close("discrete rho_y", dy, ry, DISCRETIZED_TOL);
    r.close("discrete rho_x_plus_z", dxz, rxz, DISCRETIZED_TOL);
    r.close("discrete rho_y_plus_z", dyz, ryz, DISCRETIZED_TOL);
    r.check("reversal (discretized)", dx < dy && dxz > dyz);
    Ok(r)
}

/// Level `p` with `AVaR_p(N(mu, s^2)) = mu + s`, i.e. the root of
/// `phi(Phi^{-1}(1 - p)) / p = 1`, by bisection on `(0.01, 0.99)`.
pub fn fig4_level() -> f64 {
    let f = |p: f64| gaussian::pdf(gaussian::quantile(1.0 - p)) / p - 1.0;
    let (mut lo, mut hi) = (0.01, 0.99);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Route `X` then `Y` against a direct arc `Z` under AVaR at the level that
/// maps every normal to mean plus one standard deviation. Evaluating the
/// two-arc route arc by arc ranks `Z` first; merging it into one arc `U`
/// ranks `U` first.
pub fn golden_fig4() -> Result<GoldenReport> {
    let mut r = GoldenReport::new("fig4");
    let p = r.value("p_star", fig4_level());
    let (x, y, z) = (normal(10.0, 1.0), normal(10.0, 1.0), normal(20.0, 3.0));
    let u = normal(x.mean() + y.mean(), x.variance() + y.variance());

    let rx = r.value("rho_x", avar(&x, p)?);
    let ry = r.value("rho_y", avar(&y, p)?);
    let iterated = r.value("rho_iterated", rx + ry);
    let rz = r.value("rho_z", avar(&z, p)?);
    let ru = r.value("rho_u", avar(&u, p)?);
    r.close("rho_x = mean + std", rx, 11.0, 1e-9);
    r.close("rho_z = mean + std", rz, 20.0 + 3.0_f64.sqrt(), 1e-9);
    r.close("rho_u = mean + std", ru, 20.0 + 2.0_f64.sqrt(), 1e-9);
    r.close("iterated = 22", iterated, 22.0, 1e-9);
    r.check("22 > 20 + sqrt3 > 20 + sqrt2", iterated > rz + 1e-9 && rz > ru + 1e-9);
    r.check("order flip", rz < iterated && ru < rz);
    Ok(r)
}

/// Allais prospects: `X = 50`, `Y = 35 w.p. 0.8 else 100`, `Z = 100`, and
/// the compound lotteries reaching `X` or `Y` with probability 0.25.
/// Expected-utility rankings of `X` vs `Y` and of the two lotteries agree.
pub fn golden_allais() -> Result<GoldenReport> {
    let mut r = GoldenReport::new("allais");
    let x = Distribution::Constant(50.0);
    let y = Distribution::discrete(vec![35.0, 100.0], vec![0.8, 0.2])?;
    let z = Distribution::Constant(100.0);
    let lx = mixture(0.25, &x, &z)?;
    let ly = mixture(0.25, &y, &z)?;
    let ex = r.value("mean_x", x.mean());
    let ey = r.value("mean_y", y.mean());
    let elx = r.value("mean_lottery_x", lx.mean());
    let ely = r.value("mean_lottery_y", ly.mean());
    r.close("E(X) = 50", ex, 50.0, CLOSED_FORM_TOL);
    r.close("E(Y) = 48", ey, 48.0, CLOSED_FORM_TOL);
    r.close("E(L(X)) = 87.5", elx, 87.5, CLOSED_FORM_TOL);
    r.close("E(L(Y)) = 87", ely, 87.0, CLOSED_FORM_TOL);
    for (label, c) in [
        ("identity", UtilityFn::Identity),
        ("exp:0.05", UtilityFn::Exponential(0.05)),
        ("exp:-0.05", UtilityFn::Exponential(-0.05)),
    ] {
        let direct = certainty_equivalent(&x, &c)? - certainty_equivalent(&y, &c)?;
        let mixed = certainty_equivalent(&lx, &c)? - certainty_equivalent(&ly, &c)?;
        r.value(&format!("ce_gap_{label}"), direct);
        r.value(&format!("ce_gap_lottery_{label}"), mixed);
        r.check(&format!("independence under {label}"), direct.signum() == mixed.signum());
    }
    Ok(r)
}

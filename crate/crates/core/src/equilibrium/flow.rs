use std::sync::OnceLock;

use serde_json::{json, Map, Value};

use super::latency::validate_monotone;
use crate::dist::accurate_sum;
use crate::error::{Error, Result};
use crate::risk::RiskMeasureSpec;
use crate::routing::{shortest_path_with_weights, ArcCost, Network, Path};

/// Line-search bisection steps.
const LINE_SEARCH_STEPS: usize = 50;
/// Gauss-Legendre order for arc-cost integrals without a closed form.
const QUADRATURE_ORDER: usize = 32;
/// A path counts as used when it carries more than this share of its demand.
pub const USED_PATH_SHARE: f64 = 1e-8;

/// Flow on one path of one OD pair (indexed into [`Network::demands`]).
#[derive(Debug, Clone, PartialEq)]
pub struct PathFlow {
    pub demand: usize,
    pub path: Path,
    pub flow: f64,
}

/// Path flows per OD pair together with the link flows they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowAssignment {
    link_flows: Vec<f64>,
    path_flows: Vec<PathFlow>,
}

impl FlowAssignment {
    pub fn zero(g: &Network) -> Self {
        Self { link_flows: vec![0.0; g.arcs().len()], path_flows: Vec::new() }
    }

    /// Builds link flows `y_a = sum_{p contains a} x_p` from path flows.
    pub fn from_path_flows(g: &Network, path_flows: Vec<PathFlow>) -> Result<Self> {
        for pf in &path_flows {
            let d = g.demands().get(pf.demand).ok_or_else(|| {
                Error::InvalidParameter(format!("demand index {} out of range", pf.demand))
            })?;
            let nodes = pf.path.node_ids(g);
            if nodes.first() != Some(&d.origin.as_str()) || nodes.last() != Some(&d.dest.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "path {:?} does not join {} to {}",
                    pf.path.arc_ids(g),
                    d.origin,
                    d.dest
                )));
            }
            if !(pf.flow.is_finite() && pf.flow >= 0.0) {
                return Err(Error::InvalidParameter(format!("path flow {} must be >= 0", pf.flow)));
            }
        }
        let mut a = Self { link_flows: Vec::new(), path_flows };
        a.link_flows = a.induced_link_flows(g);
        Ok(a)
    }

    fn induced_link_flows(&self, g: &Network) -> Vec<f64> {
        (0..g.arcs().len())
            .map(|a| accurate_sum(self.path_flows.iter().filter(|pf| pf.path.contains(a)).map(|pf| pf.flow)))
            .collect()
    }

    pub fn link_flows(&self) -> &[f64] {
        &self.link_flows
    }

    pub fn path_flows(&self) -> &[PathFlow] {
        &self.path_flows
    }

    /// Largest violation of link-flow and demand conservation.
    pub fn conservation_error(&self, g: &Network) -> f64 {
        let links = self
            .induced_link_flows(g)
            .iter()
            .zip(&self.link_flows)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let demands = g
            .demands()
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let routed = accurate_sum(self.path_flows.iter().filter(|pf| pf.demand == k).map(|pf| pf.flow));
                (routed - d.rate).abs()
            })
            .fold(0.0, f64::max);
        links.max(demands)
    }

    /// `(1 - lambda) self + lambda other`, merging identical paths.
    fn blend(&self, other: &Self, lambda: f64) -> Self {
        let mut path_flows: Vec<PathFlow> = self
            .path_flows
            .iter()
            .map(|pf| PathFlow { flow: (1.0 - lambda) * pf.flow, ..pf.clone() })
            .collect();
        for pf in &other.path_flows {
            let add = lambda * pf.flow;
            match path_flows.iter_mut().find(|q| q.demand == pf.demand && q.path == pf.path) {
                Some(q) => q.flow += add,
                None => path_flows.push(PathFlow { flow: add, ..pf.clone() }),
            }
        }
        path_flows.retain(|pf| pf.flow > 0.0);
        let link_flows = self
            .link_flows
            .iter()
            .zip(&other.link_flows)
            .map(|(y, z)| y + lambda * (z - y))
            .collect();
        Self { link_flows, path_flows }
    }
}

/// Result of a Frank-Wolfe solve.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowOutcome {
    pub assignment: FlowAssignment,
    pub iterations: usize,
    pub relative_gap: f64,
    /// Relative gap measured at the start of every iteration.
    pub gap_trace: Vec<f64>,
    /// Beckmann objective after every iterate, starting with the initial one.
    pub objective_trace: Vec<f64>,
}

impl FlowOutcome {
    /// `{"link_flows": {arc: y}, "path_flows": [...], "relative_gap": .., "iterations": ..}`
    pub fn to_json(&self, g: &Network) -> Value {
        let link_flows: Map<String, Value> = g
            .arcs()
            .iter()
            .zip(self.assignment.link_flows())
            .map(|(a, y)| (a.id.clone(), json!(y)))
            .collect();
        let path_flows: Vec<Value> = self
            .assignment
            .path_flows()
            .iter()
            .map(|pf| {
                let d = &g.demands()[pf.demand];
                json!({
                    "origin": d.origin,
                    "dest": d.dest,
                    "nodes": pf.path.node_ids(g),
                    "arcs": pf.path.arc_ids(g),
                    "flow": pf.flow,
                })
            })
            .collect();
        json!({
            "link_flows": link_flows,
            "path_flows": path_flows,
            "relative_gap": self.relative_gap,
            "iterations": self.iterations,
        })
    }
}

fn arc_cost(g: &Network, spec: &RiskMeasureSpec, arc: usize, y: f64) -> Result<f64> {
    match &g.arcs()[arc].cost {
        ArcCost::Static(d) => spec.evaluate(d),
        ArcCost::Family(f) => super::link_cost(f, spec, y),
    }
}

fn arc_costs(g: &Network, spec: &RiskMeasureSpec, y: &[f64]) -> Result<Vec<f64>> {
    y.iter().enumerate().map(|(a, &v)| arc_cost(g, spec, a, v)).collect()
}

fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = QUADRATURE_ORDER;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // Legendre recurrence for P_n(x) and its derivative.
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        (nodes, weights)
    })
}

fn integrate<F: Fn(f64) -> Result<f64>>(f: F, upper: f64) -> Result<f64> {
    if upper == 0.0 {
        return Ok(0.0);
    }
    let (nodes, weights) = gauss_legendre();
    let half = 0.5 * upper;
    let terms = nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| f(half * (1.0 + x)).map(|v| w * v))
        .collect::<Result<Vec<_>>>()?;
    Ok(half * accurate_sum(terms))
}

fn arc_integral(g: &Network, spec: &RiskMeasureSpec, arc: usize, y: f64) -> Result<f64> {
    match &g.arcs()[arc].cost {
        ArcCost::Static(d) => Ok(spec.evaluate(d)? * y),
        ArcCost::Family(f) => match f.affine_cost(spec) {
            Some((a, b)) => Ok(a * y + 0.5 * b * y * y),
            None => integrate(|z| super::link_cost(f, spec, z), y),
        },
    }
}

/// `sum_a int_0^{y_a} sigma_a(z) dz`.
pub fn beckmann_objective(g: &Network, spec: &RiskMeasureSpec, flows: &FlowAssignment) -> Result<f64> {
    let parts = flows
        .link_flows()
        .iter()
        .enumerate()
        .map(|(a, &y)| arc_integral(g, spec, a, y))
        .collect::<Result<Vec<_>>>()?;
    Ok(accurate_sum(parts))
}

fn check_spec(spec: &RiskMeasureSpec) -> Result<()> {
    if spec.is_additive() {
        Ok(())
    } else {
        Err(Error::NonAdditiveSpec(spec.to_string()))
    }
}

pub(crate) fn validate_families(g: &Network, spec: &RiskMeasureSpec, y_max: f64) -> Result<()> {
    for link in g.arcs() {
        if let ArcCost::Family(f) = &link.cost {
            validate_monotone(&link.id, f, spec, y_max)?;
        }
    }
    Ok(())
}

/// Sends every OD demand along its cheapest path under `costs`. Returns the
/// assignment and `sum_k g_k * SP_k`.
fn all_or_nothing(g: &Network, costs: &[f64]) -> Result<(FlowAssignment, f64)> {
    let mut path_flows = Vec::new();
    let mut total = Vec::new();
    for (k, d) in g.demands().iter().enumerate() {
        if d.rate == 0.0 {
            continue;
        }
        let (path, cost) = shortest_path_with_weights(g, costs, &d.origin, &d.dest)?;
        total.push(d.rate * cost);
        path_flows.push(PathFlow { demand: k, path, flow: d.rate });
    }
    Ok((FlowAssignment::from_path_flows(g, path_flows)?, accurate_sum(total)))
}

fn relative_gap(total: f64, shortest: f64) -> f64 {
    let gap = total - shortest;
    let gap = if total > 0.0 { gap / total } else { gap };
    gap.max(0.0)
}

/// Conditional-gradient solve of the Beckmann program.
///
/// Each iteration prices arcs at the current flows, loads every demand on
/// its cheapest path, and moves toward that assignment with an exact line
/// search. Stops once the relative gap is at most `tol`.
pub fn frank_wolfe_solve(g: &Network, spec: &RiskMeasureSpec, tol: f64, max_iter: usize) -> Result<FlowOutcome> {
    check_spec(spec)?;
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be >= 0, got {tol}")));
    }
    let total_demand = accurate_sum(g.demands().iter().map(|d| d.rate));
    validate_families(g, spec, total_demand)?;

    let zero = FlowAssignment::zero(g);
    let (mut flows, _) = all_or_nothing(g, &arc_costs(g, spec, zero.link_flows())?)?;
    let mut objective_trace = vec![beckmann_objective(g, spec, &flows)?];
    let mut gap_trace = Vec::new();
    let mut best: Option<(FlowAssignment, f64)> = None;

    for iteration in 1..=max_iter {
        let costs = arc_costs(g, spec, flows.link_flows())?;
        let total = accurate_sum(costs.iter().zip(flows.link_flows()).map(|(c, y)| c * y));
        let (target, shortest) = all_or_nothing(g, &costs)?;
        let gap = relative_gap(total, shortest);
        gap_trace.push(gap);
        if best.as_ref().is_none_or(|(_, b)| gap < *b) {
            best = Some((flows.clone(), gap));
        }
        if gap <= tol {
            return Ok(FlowOutcome { assignment: flows, iterations: iteration, relative_gap: gap, gap_trace, objective_trace });
        }

        // phi'(lambda) = sum_a sigma_a(y_a + lambda d_a) d_a, nondecreasing.
        let direction: Vec<f64> = target.link_flows().iter().zip(flows.link_flows()).map(|(z, y)| z - y).collect();
        let slope = |lambda: f64| -> Result<f64> {
            let terms = direction
                .iter()
                .enumerate()
                .filter(|(_, d)| **d != 0.0)
                .map(|(a, d)| {
                    let y = (flows.link_flows()[a] + lambda * d).max(0.0);
                    arc_cost(g, spec, a, y).map(|c| c * d)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(accurate_sum(terms))
        };
        let lambda = if slope(1.0)? <= 0.0 {
            1.0
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..LINE_SEARCH_STEPS {
                let mid = 0.5 * (lo + hi);
                if slope(mid)? > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        };
        flows = flows.blend(&target, lambda);
        objective_trace.push(beckmann_objective(g, spec, &flows)?);
    }

    let costs = arc_costs(g, spec, flows.link_flows())?;
    let total = accurate_sum(costs.iter().zip(flows.link_flows()).map(|(c, y)| c * y));
    let (_, shortest) = all_or_nothing(g, &costs)?;
    let gap = relative_gap(total, shortest);
    gap_trace.push(gap);
    if gap <= tol {
        return Ok(FlowOutcome { assignment: flows, iterations: max_iter, relative_gap: gap, gap_trace, objective_trace });
    }
    if best.as_ref().is_none_or(|(_, b)| gap < *b) {
        best = Some((flows, gap));
    }
    let (assignment, relative_gap) = best.expect("at least one iterate");
    Err(Error::FlowNonConvergence(Box::new(FlowOutcome {
        assignment,
        iterations: max_iter,
        relative_gap,
        gap_trace,
        objective_trace,
    })))
}

/// Largest excess of a used path's cost over its OD minimum; zero at a
/// Wardrop equilibrium.
pub fn wardrop_violation(g: &Network, spec: &RiskMeasureSpec, flows: &FlowAssignment) -> Result<f64> {
    check_spec(spec)?;
    let costs = arc_costs(g, spec, flows.link_flows())?;
    let mut worst: f64 = 0.0;
    for (k, d) in g.demands().iter().enumerate() {
        let used: Vec<&PathFlow> = flows
            .path_flows()
            .iter()
            .filter(|pf| pf.demand == k && pf.flow > USED_PATH_SHARE * d.rate)
            .collect();
        if used.is_empty() {
            continue;
        }
        let (_, best) = shortest_path_with_weights(g, &costs, &d.origin, &d.dest)?;
        for pf in used {
            let cost = accurate_sum(pf.path.arcs().iter().map(|&a| costs[a]));
            worst = worst.max(cost - best);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::LatencyFamily;
    use crate::routing::{Demand, Link};

    fn family_link(id: &str, tail: &str, head: &str, f: LatencyFamily) -> Link {
        Link { id: id.into(), tail: tail.into(), head: head.into(), cost: ArcCost::Family(f) }
    }

    fn two_link(rate: f64) -> Network {
        Network::new(
            vec!["s".into(), "d".into()],
            vec![
                family_link("l1", "s", "d", LatencyFamily::normal_affine(2.0, 0.0, 0.0, 0.0).unwrap()),
                family_link("l2", "s", "d", LatencyFamily::normal_affine(0.0, 1.0, 2.0, 0.0).unwrap()),
            ],
            vec![Demand { origin: "s".into(), dest: "d".into(), rate }],
        )
        .unwrap()
    }

    fn on_arcs(g: &Network, split: &[(&str, f64)]) -> FlowAssignment {
        let pfs = split
            .iter()
            .map(|(id, flow)| PathFlow { demand: 0, path: Path::from_arc_ids(g, &[id]).unwrap(), flow: *flow })
            .collect();
        FlowAssignment::from_path_flows(g, pfs).unwrap()
    }

    #[test]
    fn quadrature_rule_is_exact_on_polynomials() {
        let (nodes, weights) = gauss_legendre();
        assert!((weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        for k in [2, 10, 40, 62] {
            let approx: f64 = nodes.iter().zip(weights).map(|(x, w)| w * x.powi(k)).sum();
            assert!((approx - 2.0 / (k as f64 + 1.0)).abs() < 1e-13, "degree {k}");
        }
        let v = integrate(|z| Ok(z.exp()), 2.0).unwrap();
        assert!((v - (2.0_f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn beckmann_examples() {
        let g = two_link(2.0);
        let spec = RiskMeasureSpec::Entropic { beta: 1.0 };
        assert_eq!(beckmann_objective(&g, &spec, &FlowAssignment::zero(&g)).unwrap(), 0.0);
        let eq = on_arcs(&g, &[("l1", 1.0), ("l2", 1.0)]);
        assert_eq!(beckmann_objective(&g, &spec, &eq).unwrap(), 3.5);
    }

    #[test]
    fn two_link_equilibrium() {
        let g = two_link(2.0);
        let spec = RiskMeasureSpec::Entropic { beta: 1.0 };
        let out = frank_wolfe_solve(&g, &spec, 1e-6, 200).unwrap();
        let y = out.assignment.link_flows();
        assert!((y[0] - 1.0).abs() < 1e-9 && (y[1] - 1.0).abs() < 1e-9, "{y:?}");
        assert!(out.relative_gap <= 1e-6);
        assert!(out.gap_trace.iter().all(|&g| g >= 0.0));
        assert!(out.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(wardrop_violation(&g, &spec, &out.assignment).unwrap() <= 1e-6);
        assert!(out.assignment.conservation_error(&g) < 1e-9);
        let costs = arc_costs(&g, &spec, y).unwrap();
        assert!((costs[0] - 2.0).abs() < 1e-9 && (costs[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn risk_neutral_reduces_to_mean_latency() {
        // Means 2 and y; demand 3 splits as (1, 2) at common cost 2.
        let g = two_link(3.0);
        let out = frank_wolfe_solve(&g, &RiskMeasureSpec::Entropic { beta: 0.0 }, 1e-9, 500).unwrap();
        let y = out.assignment.link_flows();
        assert!((y[0] - 1.0).abs() < 1e-6 && (y[1] - 2.0).abs() < 1e-6, "{y:?}");
    }

    #[test]
    fn wardrop_examples() {
        let g = two_link(2.0);
        let spec = RiskMeasureSpec::Entropic { beta: 1.0 };
        let worse = on_arcs(&g, &[("l2", 2.0)]);
        assert!((wardrop_violation(&g, &spec, &worse).unwrap() - 1.0).abs() < 1e-12);
        let idle = two_link(0.0);
        assert_eq!(wardrop_violation(&idle, &spec, &FlowAssignment::zero(&idle)).unwrap(), 0.0);
        let out = frank_wolfe_solve(&idle, &spec, 1e-6, 10).unwrap();
        assert_eq!(out.relative_gap, 0.0);
        assert!(out.assignment.link_flows().iter().all(|&y| y == 0.0));
    }

    #[test]
    fn single_path_network_converges_at_once() {
        let g = Network::new(
            vec!["s".into(), "m".into(), "d".into()],
            vec![
                family_link("a", "s", "m", LatencyFamily::normal_affine(1.0, 1.0, 1.0, 0.5).unwrap()),
                family_link("b", "m", "d", LatencyFamily::normal_affine(0.0, 2.0, 0.0, 0.0).unwrap()),
            ],
            vec![Demand { origin: "s".into(), dest: "d".into(), rate: 4.0 }],
        )
        .unwrap();
        let out = frank_wolfe_solve(&g, &RiskMeasureSpec::Entropic { beta: 0.5 }, 1e-12, 5).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.relative_gap, 0.0);
        assert_eq!(out.assignment.link_flows(), &[4.0, 4.0]);
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let g = two_link(3.0);
        match frank_wolfe_solve(&g, &RiskMeasureSpec::Entropic { beta: 0.0 }, 0.0, 0) {
            Err(Error::FlowNonConvergence(out)) => {
                assert_eq!(out.iterations, 0);
                assert!(out.relative_gap > 0.0);
                assert!(out.assignment.conservation_error(&g) < 1e-9);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
        // The last step of the budget may itself reach the target gap.
        let out = frank_wolfe_solve(&two_link(2.0), &RiskMeasureSpec::Entropic { beta: 1.0 }, 1e-6, 1).unwrap();
        assert_eq!((out.iterations, out.relative_gap), (1, 0.0));
        assert_eq!(out.gap_trace.len(), 2);
    }

    #[test]
    fn rejects_non_additive_and_decreasing_costs() {
        let g = two_link(2.0);
        assert!(matches!(
            frank_wolfe_solve(&g, &RiskMeasureSpec::MeanStdev { gamma: 1.0 }, 1e-6, 10),
            Err(Error::NonAdditiveSpec(_))
        ));
        let bad = Network::new(
            vec!["s".into(), "d".into()],
            vec![family_link("l", "s", "d", LatencyFamily::normal_affine(5.0, 0.0, 0.0, 1.0).unwrap())],
            vec![Demand { origin: "s".into(), dest: "d".into(), rate: 1.0 }],
        )
        .unwrap();
        assert!(matches!(
            frank_wolfe_solve(&bad, &RiskMeasureSpec::Entropic { beta: -1.0 }, 1e-6, 10),
            Err(Error::Monotonicity { .. })
        ));
    }

    #[test]
    fn quadrature_path_matches_closed_form() {
        // mean_stdev is not affine in flow, so the integral is numeric.
        let f = LatencyFamily::normal_affine(1.0, 0.5, 1.0, 2.0).unwrap();
        let g = Network::new(
            vec!["s".into(), "d".into()],
            vec![family_link("l", "s", "d", f)],
            vec![Demand { origin: "s".into(), dest: "d".into(), rate: 3.0 }],
        )
        .unwrap();
        let flows = on_arcs(&g, &[("l", 3.0)]);
        let v = beckmann_objective(&g, &RiskMeasureSpec::MeanStdev { gamma: 1.0 }, &flows).unwrap();
        // int_0^3 (1 + z/2 + sqrt(1 + 2z)) dz = 3 + 9/4 + (7^{3/2} - 1)/3.
        let exact = 3.0 + 2.25 + (7.0_f64.powf(1.5) - 1.0) / 3.0;
        assert!((v - exact).abs() < 1e-10);
    }
}

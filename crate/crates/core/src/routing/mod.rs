//! Risk-minimizing paths on stochastic networks.
//!
//! For additive measures the risk of a path is the sum of its arc risks, so
//! [`shortest_path`] runs an ordinary shortest-path search on arc weights
//! `w_a = rho(tau_a)`. [`optimal_path_bruteforce`] evaluates `rho` on the exact
//! law of every simple path and works for any measure; it is also the oracle
//! the shortest-path search is checked against.
//!
//! Ties are broken by the lexicographic order of node-id sequences, then by
//! arc ids for parallel arcs.

mod network;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::dist::{accurate_sum, convolve, DiscreteDist, Distribution, DEFAULT_NORMAL_ATOMS};
use crate::error::{Error, Result};
use crate::risk::RiskMeasureSpec;

pub use network::{ArcCost, Demand, Link, Network};

/// Enumeration guard for brute-force path search.
pub const MAX_ENUMERATED_PATHS: usize = 100_000;

/// A route given as consecutive arc indices into [`Network::arcs`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    arcs: Vec<usize>,
}

impl Path {
    /// Checks that consecutive arcs chain head to tail and no node repeats.
    pub fn new(g: &Network, arcs: Vec<usize>) -> Result<Self> {
        if arcs.is_empty() {
            return Err(Error::InvalidNetwork("empty path".into()));
        }
        if let Some(&a) = arcs.iter().find(|&&a| a >= g.arcs().len()) {
            return Err(Error::InvalidNetwork(format!("arc index {a} out of range")));
        }
        if arcs.windows(2).any(|w| g.head(w[0]) != g.tail(w[1])) {
            return Err(Error::InvalidNetwork("path arcs do not chain".into()));
        }
        let path = Self { arcs };
        let nodes = path.nodes(g);
        for (i, n) in nodes.iter().enumerate() {
            if nodes[..i].contains(n) {
                return Err(Error::InvalidNetwork(format!("path repeats node `{}`", g.nodes()[*n])));
            }
        }
        Ok(path)
    }

    pub fn from_arc_ids(g: &Network, ids: &[&str]) -> Result<Self> {
        let arcs = ids.iter().map(|id| g.arc_index(id)).collect::<Result<Vec<_>>>()?;
        Self::new(g, arcs)
    }

    pub fn arcs(&self) -> &[usize] {
        &self.arcs
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn contains(&self, arc: usize) -> bool {
        self.arcs.contains(&arc)
    }

    /// Node indices visited, origin first.
    pub fn nodes(&self, g: &Network) -> Vec<usize> {
        let mut nodes = Vec::with_capacity(self.arcs.len() + 1);
        nodes.push(g.tail(self.arcs[0]));
        nodes.extend(self.arcs.iter().map(|&a| g.head(a)));
        nodes
    }

    pub fn node_ids<'g>(&self, g: &'g Network) -> Vec<&'g str> {
        self.nodes(g).into_iter().map(|n| g.nodes()[n].as_str()).collect()
    }

    pub fn arc_ids<'g>(&self, g: &'g Network) -> Vec<&'g str> {
        self.arcs.iter().map(|&a| g.arcs()[a].id.as_str()).collect()
    }

    /// Total order used for tie-breaking: node ids, then arc ids.
    pub fn cmp_lexicographic(&self, other: &Self, g: &Network) -> Ordering {
        self.node_ids(g)
            .cmp(&other.node_ids(g))
            .then_with(|| self.arc_ids(g).cmp(&other.arc_ids(g)))
    }
}

/// `w_a = rho(tau_a)` for every arc, aligned with [`Network::arcs`].
pub fn arc_weights(g: &Network, spec: &RiskMeasureSpec) -> Result<Vec<f64>> {
    (0..g.arcs().len()).map(|a| spec.evaluate(g.static_dist(a)?)).collect()
}

/// Risk-minimizing path for an additive measure, via arc weights.
pub fn shortest_path(g: &Network, from: &str, to: &str, spec: &RiskMeasureSpec) -> Result<(Path, f64)> {
    if !spec.is_additive() {
        return Err(Error::NonAdditiveSpec(spec.to_string()));
    }
    let weights = arc_weights(g, spec)?;
    shortest_path_with_weights(g, &weights, from, to)
}

#[derive(Clone, Copy)]
struct Label {
    dist: f64,
    node: usize,
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Label {}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Label {
    // Reversed so the max-heap pops the smallest distance.
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

fn label_setting(g: &Network, weights: &[f64], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.nodes().len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Label { dist: 0.0, node: source });
    while let Some(Label { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &a in g.outgoing(node) {
            let next = g.head(a);
            let cand = d + weights[a];
            if cand < dist[next] {
                dist[next] = cand;
                heap.push(Label { dist: cand, node: next });
            }
        }
    }
    dist
}

fn label_correcting(g: &Network, weights: &[f64], source: usize) -> Result<Vec<f64>> {
    let n = g.nodes().len();
    let mut dist = vec![f64::INFINITY; n];
    dist[source] = 0.0;
    let relax_round = |dist: &mut Vec<f64>| {
        let mut changed = false;
        for (a, &w) in weights.iter().enumerate() {
            let (u, v) = (g.tail(a), g.head(a));
            if dist[u].is_finite() {
                let cand = dist[u] + w;
                if cand < dist[v] - 1e-12 * (1.0 + dist[v].abs().min(f64::MAX)) {
                    dist[v] = cand;
                    changed = true;
                }
            }
        }
        changed
    };
    for _ in 1..n.max(2) {
        if !relax_round(&mut dist) {
            return Ok(dist);
        }
    }
    if relax_round(&mut dist) {
        return Err(Error::NegativeCycle(g.nodes()[source].clone()));
    }
    Ok(dist)
}

fn tie_tolerance(value: f64) -> f64 {
    1e-9 * (1.0 + value.abs())
}

/// Shortest path for arbitrary arc weights (aligned with [`Network::arcs`]).
///
/// Nonnegative weights use a label-setting search, otherwise a
/// label-correcting one that reports negative cycles. Among optimal paths the
/// lexicographically smallest node sequence is returned.
pub fn shortest_path_with_weights(g: &Network, weights: &[f64], from: &str, to: &str) -> Result<(Path, f64)> {
    let (s, d) = (g.node(from)?, g.node(to)?);
    if weights.len() != g.arcs().len() || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidParameter("arc weights must be finite, one per arc".into()));
    }
    let no_path = || Error::NoPath { from: from.to_string(), to: to.to_string() };
    if s == d {
        return Err(Error::InvalidParameter(format!("origin and destination are both `{from}`")));
    }
    let dist = if weights.iter().all(|&w| w >= 0.0) {
        label_setting(g, weights, s)
    } else {
        label_correcting(g, weights, s)?
    };
    if !dist[d].is_finite() {
        return Err(no_path());
    }

    let tight = |a: usize| {
        let (u, v) = (g.tail(a), g.head(a));
        dist[u].is_finite() && dist[u] + weights[a] <= dist[v] + tie_tolerance(dist[v])
    };
    // Nodes that reach the destination through tight arcs.
    let mut reaches = vec![false; g.nodes().len()];
    reaches[d] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for a in 0..g.arcs().len() {
            if !reaches[g.tail(a)] && reaches[g.head(a)] && tight(a) {
                reaches[g.tail(a)] = true;
                changed = true;
            }
        }
    }

    // Depth-first search over tight arcs in (head id, arc id) order yields
    // optimal paths in lexicographic order; the first one wins.
    let mut on_path = vec![false; g.nodes().len()];
    let mut arcs = Vec::new();
    fn descend(
        g: &Network,
        node: usize,
        target: usize,
        tight: &dyn Fn(usize) -> bool,
        reaches: &[bool],
        on_path: &mut [bool],
        arcs: &mut Vec<usize>,
    ) -> bool {
        if node == target {
            return true;
        }
        on_path[node] = true;
        for &a in g.outgoing(node) {
            let next = g.head(a);
            if on_path[next] || !reaches[next] || !tight(a) {
                continue;
            }
            arcs.push(a);
            if descend(g, next, target, tight, reaches, on_path, arcs) {
                return true;
            }
            arcs.pop();
        }
        on_path[node] = false;
        false
    }
    if !descend(g, s, d, &tight, &reaches, &mut on_path, &mut arcs) {
        return Err(no_path());
    }
    let total = accurate_sum(arcs.iter().map(|&a| weights[a]));
    Ok((Path { arcs }, total))
}

/// Exact law of the path's travel time, `T_p = sum of arc times`. Normal
/// arcs are discretized with the default atom count first.
pub fn path_time_distribution(g: &Network, path: &Path) -> Result<DiscreteDist> {
    let mut acc = DiscreteDist::point(0.0);
    for &a in path.arcs() {
        let law = g.static_dist(a)?.discretized(DEFAULT_NORMAL_ATOMS);
        acc = convolve(&acc, &law);
    }
    Ok(acc)
}

/// Law of the path's travel time, kept in closed form when every arc is
/// normal or constant (sums of independent normals are normal).
pub fn path_time_law(g: &Network, path: &Path) -> Result<Distribution> {
    let laws = path.arcs().iter().map(|&a| g.static_dist(a)).collect::<Result<Vec<_>>>()?;
    if laws.iter().any(|l| l.is_normal()) && laws.iter().all(|l| !matches!(l, Distribution::Discrete(_))) {
        let mean = accurate_sum(laws.iter().map(|l| l.mean()));
        let var = accurate_sum(laws.iter().map(|l| l.variance()));
        return Distribution::normal(mean, var.sqrt());
    }
    Ok(Distribution::Discrete(path_time_distribution(g, path)?))
}

/// All simple paths from `from` to `to`, in lexicographic order.
pub fn enumerate_paths(g: &Network, from: &str, to: &str, max_count: usize) -> Result<Vec<Path>> {
    let (s, d) = (g.node(from)?, g.node(to)?);
    if s == d {
        return Err(Error::InvalidParameter(format!("origin and destination are both `{from}`")));
    }
    let mut paths = Vec::new();
    let mut on_path = vec![false; g.nodes().len()];
    let mut arcs = Vec::new();
    fn walk(
        g: &Network,
        node: usize,
        target: usize,
        limit: usize,
        on_path: &mut [bool],
        arcs: &mut Vec<usize>,
        out: &mut Vec<Path>,
    ) -> Result<()> {
        if node == target {
            if out.len() == limit {
                return Err(Error::Capacity { limit });
            }
            out.push(Path { arcs: arcs.clone() });
            return Ok(());
        }
        on_path[node] = true;
        for &a in g.outgoing(node) {
            let next = g.head(a);
            if on_path[next] {
                continue;
            }
            arcs.push(a);
            walk(g, next, target, limit, on_path, arcs, out)?;
            arcs.pop();
        }
        on_path[node] = false;
        Ok(())
    }
    walk(g, s, d, max_count, &mut on_path, &mut arcs, &mut paths)?;
    Ok(paths)
}

/// Minimizes `rho(T_p)` over all simple paths by direct evaluation.
pub fn optimal_path_bruteforce(g: &Network, from: &str, to: &str, spec: &RiskMeasureSpec) -> Result<(Path, f64)> {
    let paths = enumerate_paths(g, from, to, MAX_ENUMERATED_PATHS)?;
    let mut best: Option<(Path, f64)> = None;
    for path in paths {
        let value = spec.evaluate(&path_time_law(g, &path)?)?;
        match &best {
            Some((_, b)) if value >= b - tie_tolerance(*b) => {}
            _ => best = Some((path, value)),
        }
    }
    best.ok_or_else(|| Error::NoPath { from: from.to_string(), to: to.to_string() })
}

/// An intermediate node where the best way to get there is not the way the
/// overall optimal route gets there.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixFailure {
    pub node: String,
    pub route_prefix: Path,
    pub route_prefix_value: f64,
    pub best_prefix: Path,
    pub best_prefix_value: f64,
}

/// Checks every prefix of the brute-force optimal route against the
/// brute-force optimum to that prefix's end node. Additive measures never
/// produce failures.
pub fn subpath_optimality_failures(
    g: &Network,
    from: &str,
    to: &str,
    spec: &RiskMeasureSpec,
) -> Result<Vec<PrefixFailure>> {
    let (route, _) = optimal_path_bruteforce(g, from, to, spec)?;
    let mut failures = Vec::new();
    for k in 1..route.len() {
        let prefix = Path { arcs: route.arcs()[..k].to_vec() };
        let node = g.nodes()[g.head(route.arcs()[k - 1])].clone();
        let prefix_value = spec.evaluate(&path_time_law(g, &prefix)?)?;
        let (best, best_value) = optimal_path_bruteforce(g, from, &node, spec)?;
        if best_value < prefix_value - tie_tolerance(prefix_value) {
            failures.push(PrefixFailure {
                node,
                route_prefix: prefix,
                route_prefix_value: prefix_value,
                best_prefix: best,
                best_prefix_value: best_value,
            });
        }
    }
    Ok(failures)
}

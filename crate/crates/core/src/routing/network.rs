use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::equilibrium::LatencyFamily;
use crate::error::{Error, Result};

/// Travel-time model of one arc: a fixed law, or a law that depends on the arc's flow.
#[derive(Debug, Clone, PartialEq)]
pub enum ArcCost {
    Static(Distribution),
    Family(LatencyFamily),
}

/// A directed arc. Arc travel times are independent across arcs.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: String,
    pub tail: String,
    pub head: String,
    pub cost: ArcCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub origin: String,
    pub dest: String,
    pub rate: f64,
}

/// A directed multigraph with stochastic arc times and optional OD demands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkFile", into = "NetworkFile")]
pub struct Network {
    nodes: Vec<String>,
    arcs: Vec<Link>,
    demands: Vec<Demand>,
    node_index: HashMap<String, usize>,
    tails: Vec<usize>,
    heads: Vec<usize>,
    /// Outgoing arcs per node, ordered by (head id, arc id).
    outgoing: Vec<Vec<usize>>,
}

impl Network {
    pub fn new(nodes: Vec<String>, arcs: Vec<Link>, demands: Vec<Demand>) -> Result<Self> {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if node_index.insert(n.clone(), i).is_some() {
                return Err(Error::InvalidNetwork(format!("duplicate node `{n}`")));
            }
        }
        let lookup = |n: &str, what: &str| {
            node_index
                .get(n)
                .copied()
                .ok_or_else(|| Error::InvalidNetwork(format!("{what} `{n}` is not a node")))
        };
        let mut tails = Vec::with_capacity(arcs.len());
        let mut heads = Vec::with_capacity(arcs.len());
        let mut seen = HashMap::new();
        for (i, a) in arcs.iter().enumerate() {
            if seen.insert(a.id.as_str(), i).is_some() {
                return Err(Error::InvalidNetwork(format!("duplicate arc id `{}`", a.id)));
            }
            tails.push(lookup(&a.tail, "arc tail")?);
            heads.push(lookup(&a.head, "arc head")?);
        }
        for d in &demands {
            lookup(&d.origin, "demand origin")?;
            lookup(&d.dest, "demand destination")?;
            if !(d.rate.is_finite() && d.rate >= 0.0) {
                return Err(Error::InvalidNetwork(format!(
                    "demand {} -> {} has invalid rate {}",
                    d.origin, d.dest, d.rate
                )));
            }
        }
        let mut outgoing = vec![Vec::new(); nodes.len()];
        for (i, &t) in tails.iter().enumerate() {
            outgoing[t].push(i);
        }
        for out in &mut outgoing {
            out.sort_by(|&a, &b| {
                nodes[heads[a]].cmp(&nodes[heads[b]]).then_with(|| arcs[a].id.cmp(&arcs[b].id))
            });
        }
        Ok(Self { nodes, arcs, demands, node_index, tails, heads, outgoing })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[Link] {
        &self.arcs
    }

    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    pub fn node(&self, id: &str) -> Result<usize> {
        self.node_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::InvalidNetwork(format!("unknown node `{id}`")))
    }

    pub fn arc_index(&self, id: &str) -> Result<usize> {
        self.arcs
            .iter()
            .position(|a| a.id == id)
            .ok_or_else(|| Error::InvalidNetwork(format!("unknown arc `{id}`")))
    }

    pub fn tail(&self, arc: usize) -> usize {
        self.tails[arc]
    }

    pub fn head(&self, arc: usize) -> usize {
        self.heads[arc]
    }

    pub(crate) fn outgoing(&self, node: usize) -> &[usize] {
        &self.outgoing[node]
    }

    /// The fixed law of an arc, or an error for flow-dependent arcs.
    pub fn static_dist(&self, arc: usize) -> Result<&Distribution> {
        match &self.arcs[arc].cost {
            ArcCost::Static(d) => Ok(d),
            ArcCost::Family(_) => Err(Error::InvalidNetwork(format!(
                "arc `{}` has a flow-dependent law; a static distribution is required",
                self.arcs[arc].id
            ))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ArcRecord {
    id: String,
    tail: String,
    head: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dist: Option<Distribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    family: Option<LatencyFamily>,
}

/// On-disk network layout.
#[derive(Serialize, Deserialize)]
struct NetworkFile {
    nodes: Vec<String>,
    arcs: Vec<ArcRecord>,
    #[serde(default)]
    demands: Vec<Demand>,
}

impl TryFrom<NetworkFile> for Network {
    type Error = Error;

    fn try_from(file: NetworkFile) -> Result<Self> {
        let arcs = file
            .arcs
            .into_iter()
            .map(|r| {
                let cost = match (r.dist, r.family) {
                    (Some(d), None) => ArcCost::Static(d),
                    (None, Some(f)) => ArcCost::Family(f),
                    _ => {
                        return Err(Error::InvalidNetwork(format!(
                            "arc `{}` needs exactly one of `dist` or `family`",
                            r.id
                        )))
                    }
                };
                Ok(Link { id: r.id, tail: r.tail, head: r.head, cost })
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(file.nodes, arcs, file.demands)
    }
}

impl From<Network> for NetworkFile {
    fn from(g: Network) -> Self {
        let arcs = g
            .arcs
            .into_iter()
            .map(|a| {
                let (dist, family) = match a.cost {
                    ArcCost::Static(d) => (Some(d), None),
                    ArcCost::Family(f) => (None, Some(f)),
                };
                ArcRecord { id: a.id, tail: a.tail, head: a.head, dist, family }
            })
            .collect();
        NetworkFile { nodes: g.nodes, arcs, demands: g.demands }
    }
}

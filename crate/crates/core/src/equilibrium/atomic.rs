use crate::dist::accurate_sum;
use crate::error::{Error, Result};
use crate::risk::RiskMeasureSpec;
use crate::routing::{enumerate_paths, shortest_path_with_weights, ArcCost, Network, Path, MAX_ENUMERATED_PATHS};

use super::flow::validate_families;

/// A player routing one unit from `origin` to `dest`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Player {
    pub origin: String,
    pub dest: String,
}

/// Atomic congestion game: each player picks one path and arc `a` costs
/// `sigma_a(n_a)` to everyone using it.
#[derive(Debug, Clone)]
pub struct CongestionGame {
    network: Network,
    players: Vec<Player>,
    /// `costs[a][n] = sigma_a(n)` for `n = 0..=players`.
    costs: Vec<Vec<f64>>,
}

impl CongestionGame {
    pub fn new(network: Network, spec: &RiskMeasureSpec, players: Vec<Player>) -> Result<Self> {
        if !spec.is_additive() {
            return Err(Error::NonAdditiveSpec(spec.to_string()));
        }
        for p in &players {
            network.node(&p.origin)?;
            network.node(&p.dest)?;
        }
        let n = players.len();
        validate_families(&network, spec, n as f64)?;
        let costs = network
            .arcs()
            .iter()
            .map(|link| match &link.cost {
                ArcCost::Static(d) => spec.evaluate(d).map(|c| vec![c; n + 1]),
                ArcCost::Family(f) => (0..=n).map(|k| super::link_cost(f, spec, k as f64)).collect(),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { network, players, costs })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn players(&self) -> &[Player] {
        &self.players
    }

    /// `sigma_a(n)`.
    pub fn arc_cost(&self, arc: usize, load: usize) -> f64 {
        self.costs[arc][load]
    }

    /// Profile with every player on its cheapest path when alone on the network.
    pub fn solo_profile(&self) -> Result<AtomicProfile> {
        let weights: Vec<f64> = self.costs.iter().map(|c| c[1.min(c.len() - 1)]).collect();
        let paths = self
            .players
            .iter()
            .map(|p| shortest_path_with_weights(&self.network, &weights, &p.origin, &p.dest).map(|(path, _)| path))
            .collect::<Result<Vec<_>>>()?;
        self.profile(paths)
    }

    /// Validates one path per player.
    pub fn profile(&self, paths: Vec<Path>) -> Result<AtomicProfile> {
        if paths.len() != self.players.len() {
            return Err(Error::InvalidParameter(format!(
                "{} paths for {} players",
                paths.len(),
                self.players.len()
            )));
        }
        for (p, path) in self.players.iter().zip(&paths) {
            let nodes = path.node_ids(&self.network);
            if nodes.first() != Some(&p.origin.as_str()) || nodes.last() != Some(&p.dest.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "path {:?} does not join {} to {}",
                    path.arc_ids(&self.network),
                    p.origin,
                    p.dest
                )));
            }
        }
        Ok(AtomicProfile { paths })
    }

    /// Cost to `player` of switching to `path` while everyone else stays put.
    fn deviation_cost(&self, loads: &[usize], current: &Path, path: &Path) -> f64 {
        accurate_sum(path.arcs().iter().map(|&a| {
            let others = loads[a] - usize::from(current.contains(a));
            self.costs[a][others + 1]
        }))
    }

    fn current_cost(&self, loads: &[usize], path: &Path) -> f64 {
        accurate_sum(path.arcs().iter().map(|&a| self.costs[a][loads[a]]))
    }
}

/// One path per player, indexed like [`CongestionGame::players`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomicProfile {
    paths: Vec<Path>,
}

impl AtomicProfile {
    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    /// `n_a`, the number of players on each arc.
    pub fn loads(&self, g: &Network) -> Vec<usize> {
        let mut loads = vec![0; g.arcs().len()];
        for p in &self.paths {
            for &a in p.arcs() {
                loads[a] += 1;
            }
        }
        loads
    }
}

/// `sum_a sum_{z=0}^{n_a} sigma_a(z)`. The `z = 0` terms add the same
/// constant to every profile.
pub fn rosenthal_potential(game: &CongestionGame, profile: &AtomicProfile) -> f64 {
    let loads = profile.loads(&game.network);
    accurate_sum(loads.iter().enumerate().flat_map(|(a, &n)| game.costs[a][..=n].iter().copied()))
}

/// An accepted improving move.
#[derive(Debug, Clone, PartialEq)]
pub struct Move {
    pub round: usize,
    pub player: usize,
    pub to: Path,
    pub cost_before: f64,
    pub cost_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrdOutcome {
    pub profile: AtomicProfile,
    pub moves: Vec<Move>,
    /// Potential of the start profile followed by its value after each move.
    pub potentials: Vec<f64>,
}

fn improves(after: f64, before: f64) -> bool {
    after < before - 1e-9 * (1.0 + before.abs())
}

/// Round-robin best responses in player order until a full round passes
/// without an improving move.
pub fn best_response_dynamics(game: &CongestionGame, start: AtomicProfile, max_rounds: usize) -> Result<BrdOutcome> {
    let g = &game.network;
    let mut profile = game.profile(start.paths)?;
    let mut loads = profile.loads(g);
    let mut moves = Vec::new();
    let mut potentials = vec![rosenthal_potential(game, &profile)];
    for round in 1..=max_rounds {
        let mut moved = false;
        for (i, player) in game.players.iter().enumerate() {
            let current = &profile.paths[i];
            let weights: Vec<f64> = (0..g.arcs().len())
                .map(|a| game.costs[a][loads[a] - usize::from(current.contains(a)) + 1])
                .collect();
            let (best, best_cost) = shortest_path_with_weights(g, &weights, &player.origin, &player.dest)?;
            let cost_before = game.current_cost(&loads, current);
            if best != *current && improves(best_cost, cost_before) {
                for &a in current.arcs() {
                    loads[a] -= 1;
                }
                for &a in best.arcs() {
                    loads[a] += 1;
                }
                profile.paths[i] = best.clone();
                potentials.push(rosenthal_potential(game, &profile));
                moves.push(Move { round, player: i, to: best, cost_before, cost_after: best_cost });
                moved = true;
            }
        }
        if !moved {
            return Ok(BrdOutcome { profile, moves, potentials });
        }
    }
    Err(Error::DynamicsNonConvergence { rounds: max_rounds })
}

/// A unilateral switch that would lower a player's cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub player: usize,
    pub to: Path,
    pub current_cost: f64,
    pub deviation_cost: f64,
}

/// Tries every simple path for every player; empty iff the profile is a
/// pure Nash equilibrium.
pub fn exhaustive_deviation_check(game: &CongestionGame, profile: &AtomicProfile) -> Result<Vec<Deviation>> {
    let g = &game.network;
    let loads = profile.loads(g);
    let mut found = Vec::new();
    for (i, player) in game.players.iter().enumerate() {
        let current = &profile.paths()[i];
        let current_cost = game.current_cost(&loads, current);
        for path in enumerate_paths(g, &player.origin, &player.dest, MAX_ENUMERATED_PATHS)? {
            let cost = game.deviation_cost(&loads, current, &path);
            if improves(cost, current_cost) {
                found.push(Deviation { player: i, to: path, current_cost, deviation_cost: cost });
            }
        }
    }
    Ok(found)
}

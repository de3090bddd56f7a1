use serde::{Deserialize, Serialize};

use super::DurpError;
use crate::sim::{EdgeNode, NodeId, Position};

/// Undirected waypoint graph. Each vertex sits above one RSU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingGraph {
    positions: Vec<Position>,
    nodes: Vec<NodeId>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl RoutingGraph {
    pub fn new(positions: Vec<Position>, nodes: Vec<NodeId>) -> Self {
        assert_eq!(positions.len(), nodes.len());
        let adj = vec![Vec::new(); positions.len()];
        Self { positions, nodes, adj }
    }

    /// Waypoints at `altitude` above every RSU, joined when their horizontal
    /// spacing is at most `max_edge`. Weights are `move_energy_per_meter * length`.
    pub fn over_rsus(rsus: &[EdgeNode], altitude: f64, max_edge: f64, move_energy_per_meter: f64) -> Self {
        let rsus: Vec<&EdgeNode> = rsus.iter().filter(|n| n.is_rsu()).collect();
        let positions = rsus.iter().map(|n| Position::new(n.pos.x, n.pos.y, altitude)).collect();
        let ids = rsus.iter().map(|n| n.id).collect();
        let mut g = Self::new(positions, ids);
        let tol = max_edge * 1e-9;
        for a in 0..g.len() {
            for b in a + 1..g.len() {
                let d = g.positions[a].distance_to(&g.positions[b]);
                if d <= max_edge + tol {
                    g.add_edge(a, b, move_energy_per_meter * d).expect("weights are nonnegative");
                }
            }
        }
        g
    }

    pub fn add_edge(&mut self, a: usize, b: usize, weight: f64) -> Result<(), DurpError> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(DurpError::NegativeWeight(weight));
        }
        for v in [a, b] {
            if v >= self.len() {
                return Err(DurpError::UnknownVertex(v));
            }
        }
        self.adj[a].push((b, weight));
        self.adj[b].push((a, weight));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, v: usize) -> Position {
        self.positions[v]
    }

    pub fn node_id(&self, v: usize) -> NodeId {
        self.nodes[v]
    }

    pub fn vertex_of(&self, id: NodeId) -> Option<usize> {
        self.nodes.iter().position(|n| *n == id)
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adj[v]
    }

    pub fn edge_weight(&self, a: usize, b: usize) -> Option<f64> {
        self.adj.get(a)?.iter().find(|(n, _)| *n == b).map(|(_, w)| *w)
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.positions[a].distance_to(&self.positions[b])
    }
}

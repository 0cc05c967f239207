use thiserror::Error;

use super::map::GridMap;
use super::pose::{Action, Pose};

/// Index of a pose in a [`PoseGraph`].
pub type NodeId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("rotation step {0}° does not divide 360")]
    InvalidRotationStep(u16),
}

/// Translation into an occlusion, a candidate or out of the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("action blocked")]
pub struct Blocked;

/// Discrete poses and single-action reachability.
///
/// Nodes are ordered row-major over empty cells, then by heading index, so
/// two graphs built from the same inputs are identical.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoseGraph {
    width: usize,
    height: usize,
    delta_theta: u16,
    headings: usize,
    nodes: Vec<Pose>,
    lookup: Vec<Option<NodeId>>,
    edges: Vec<[Option<NodeId>; 4]>,
    /// `(source, action)` pairs leading into each node, by source id.
    in_edges: Vec<Vec<(NodeId, Action)>>,
}

impl PoseGraph {
    pub fn build(map: &GridMap, delta_theta: u16) -> Result<Self, GraphError> {
        if delta_theta == 0 || delta_theta > 360 || 360 % delta_theta != 0 {
            return Err(GraphError::InvalidRotationStep(delta_theta));
        }
        let headings = usize::from(360 / delta_theta);
        let (width, height) = (map.width(), map.height());
        let mut nodes = Vec::new();
        let mut lookup = vec![None; width * height * headings];
        for (x, y) in map.empty_cells() {
            for h in 0..headings {
                lookup[(y * width + x) * headings + h] = Some(nodes.len());
                nodes.push(Pose::new(x, y, h as u16 * delta_theta));
            }
        }

        let mut graph = PoseGraph {
            width,
            height,
            delta_theta,
            headings,
            nodes,
            lookup,
            edges: Vec::new(),
            in_edges: Vec::new(),
        };
        let edges = graph
            .nodes
            .iter()
            .map(|pose| Action::ALL.map(|a| graph.successor(map, pose, a)))
            .collect();
        graph.edges = edges;
        let mut in_edges = vec![Vec::new(); graph.nodes.len()];
        for u in 0..graph.nodes.len() {
            for (a, v) in graph.out_edges(u) {
                in_edges[v].push((u, a));
            }
        }
        graph.in_edges = in_edges;
        Ok(graph)
    }

    fn successor(&self, map: &GridMap, pose: &Pose, action: Action) -> Option<NodeId> {
        let step = self.delta_theta;
        match action {
            Action::RotateCounterClockwise => self.node_id(&Pose::new(pose.x, pose.y, (pose.theta + step) % 360)),
            Action::RotateClockwise => self.node_id(&Pose::new(pose.x, pose.y, (pose.theta + 360 - step) % 360)),
            Action::MoveForward | Action::MoveBackward => {
                let (dx, dy) = pose.forward_step();
                let sign = if action == Action::MoveForward { 1 } else { -1 };
                let nx = pose.x as i64 + sign * dx;
                let ny = pose.y as i64 + sign * dy;
                if map.is_traversable(nx, ny) {
                    self.node_id(&Pose::new(nx as usize, ny as usize, pose.theta))
                } else {
                    None
                }
            }
        }
    }

    /// Number of nodes, `n`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn delta_theta(&self) -> u16 {
        self.delta_theta
    }

    pub fn headings(&self) -> usize {
        self.headings
    }

    pub fn nodes(&self) -> &[Pose] {
        &self.nodes
    }

    pub fn pose(&self, id: NodeId) -> Pose {
        self.nodes[id]
    }

    pub fn node_id(&self, pose: &Pose) -> Option<NodeId> {
        if pose.x >= self.width || pose.y >= self.height || !pose.theta.is_multiple_of(self.delta_theta) {
            return None;
        }
        let h = usize::from(pose.theta / self.delta_theta);
        if h >= self.headings {
            return None;
        }
        self.lookup[(pose.y * self.width + pose.x) * self.headings + h]
    }

    /// Edge target for `(node, action)`, if the action is legal there.
    #[inline]
    pub fn edge(&self, node: NodeId, action: Action) -> Option<NodeId> {
        self.edges[node][action.ordinal()]
    }

    pub fn out_edges(&self, node: NodeId) -> impl Iterator<Item = (Action, NodeId)> + '_ {
        Action::ALL
            .into_iter()
            .filter_map(move |a| self.edge(node, a).map(|t| (a, t)))
    }

    /// Edges ending at `node`, as `(source, action)`.
    pub fn in_edges(&self, node: NodeId) -> &[(NodeId, Action)] {
        &self.in_edges[node]
    }

    pub fn apply_action(&self, pose: &Pose, action: Action) -> Result<Pose, Blocked> {
        self.node_id(pose)
            .and_then(|id| self.edge(id, action))
            .map(|id| self.nodes[id])
            .ok_or(Blocked)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(text: &str) -> GridMap {
        GridMap::parse(text).unwrap()
    }

    #[test]
    fn single_cell_has_only_rotations() {
        let g = PoseGraph::build(&map(".o"), 90).unwrap();
        assert_eq!(g.len(), 4);
        for id in 0..g.len() {
            let edges: Vec<_> = g.out_edges(id).collect();
            assert_eq!(edges.len(), 2);
            assert!(edges.iter().all(|(a, _)| a.is_rotation()));
        }
    }

    #[test]
    fn two_cell_corridor() {
        let g = PoseGraph::build(&map("..\noo"), 90).unwrap();
        assert_eq!(g.len(), 8);
        let from = g.node_id(&Pose::new(0, 0, 0)).unwrap();
        let to = g.node_id(&Pose::new(1, 0, 0)).unwrap();
        assert_eq!(g.edge(from, Action::MoveForward), Some(to));
        assert_eq!(g.edge(to, Action::MoveBackward), Some(from));
        assert_eq!(g.edge(to, Action::MoveForward), None);
    }

    #[test]
    fn rotation_step_must_divide_circle() {
        assert_eq!(
            PoseGraph::build(&map(".o"), 70),
            Err(GraphError::InvalidRotationStep(70))
        );
        assert!(PoseGraph::build(&map(".o"), 0).is_err());
        assert!(PoseGraph::build(&map(".o"), 45).is_ok());
    }

    #[test]
    fn apply_action_cases() {
        let m = map("...\n.o.\n...");
        let g = PoseGraph::build(&m, 90).unwrap();
        assert_eq!(
            g.apply_action(&Pose::new(0, 0, 0), Action::RotateClockwise),
            Ok(Pose::new(0, 0, 270))
        );
        assert_eq!(
            g.apply_action(&Pose::new(0, 0, 0), Action::MoveForward),
            Ok(Pose::new(1, 0, 0))
        );
        // facing the map edge
        assert_eq!(g.apply_action(&Pose::new(0, 0, 90), Action::MoveForward), Err(Blocked));
        // candidates are not traversable
        assert_eq!(g.apply_action(&Pose::new(1, 0, 270), Action::MoveForward), Err(Blocked));
    }

    #[test]
    fn diagonal_headings_move_diagonally() {
        let m = map("...\n...\n..o");
        let g = PoseGraph::build(&m, 45).unwrap();
        assert_eq!(g.len(), 8 * 8);
        assert_eq!(
            g.apply_action(&Pose::new(0, 2, 45), Action::MoveForward),
            Ok(Pose::new(1, 1, 45))
        );
    }
}

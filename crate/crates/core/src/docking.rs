//! Final approach once exploration has committed to a location: pick the
//! pose that best faces it and drive there on a shortest path, detector off.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::environment::{Action, GridMap, NodeId, Pose, PoseGraph, VisibilityMatrix};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DockingError {
    #[error("no pose observes candidate {0}")]
    UnobservableTarget(usize),
    #[error("pose {dst:?} is unreachable from {src:?}")]
    Unreachable { src: Pose, dst: Pose },
    #[error("pose {0:?} is not a node of the pose graph")]
    UnknownPose(Pose),
    #[error("docking needs {needed} steps but only {remaining} remain")]
    CapExceeded { needed: usize, remaining: usize },
    #[error("plan step {index} does not follow a graph edge")]
    InvalidPlan { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DockingPlan {
    pub destination: Pose,
    /// Each action with the pose it leads to; empty when already there.
    pub path: Vec<(Action, Pose)>,
}

impl DockingPlan {
    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        self.path.iter().map(|(a, _)| *a)
    }
}

/// Angular offsets closer than this count as equal.
const ANGLE_EPS: f64 = 1e-9;

fn squared_distance(pose: &Pose, cell: (usize, usize)) -> usize {
    let dx = pose.x.abs_diff(cell.0);
    let dy = pose.y.abs_diff(cell.1);
    dx * dx + dy * dy
}

/// Orders observers of `cell`: nearer first, then smaller heading offset,
/// then lower node id.
pub fn compare_destinations(graph: &PoseGraph, cell: (usize, usize), a: NodeId, b: NodeId) -> Ordering {
    let (pa, pb) = (graph.pose(a), graph.pose(b));
    squared_distance(&pa, cell)
        .cmp(&squared_distance(&pb, cell))
        .then_with(|| {
            let (oa, ob) = (pa.angular_offset(cell), pb.angular_offset(cell));
            if (oa - ob).abs() <= ANGLE_EPS {
                Ordering::Equal
            } else {
                oa.total_cmp(&ob)
            }
        })
        .then(a.cmp(&b))
}

/// The observer of `target` that is closest to it and best faces it.
pub fn destination_pose(
    target: usize,
    graph: &PoseGraph,
    visibility: &VisibilityMatrix,
    map: &GridMap,
) -> Result<Pose, DockingError> {
    let cell = map.candidate_cell(target);
    visibility
        .observers(target)
        .iter()
        .copied()
        .min_by(|&a, &b| compare_destinations(graph, cell, a, b))
        .map(|id| graph.pose(id))
        .ok_or(DockingError::UnobservableTarget(target))
}

/// Shortest path with unit action costs.
pub fn shortest_path(graph: &PoseGraph, src: Pose, dst: Pose) -> Result<DockingPlan, DockingError> {
    shortest_path_weighted(graph, src, dst, |_, _| 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cost(f64);

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Dijkstra under `weight(node, action)`, which must be positive. Among
/// minimal-cost paths the lexicographically smallest action sequence wins.
pub fn shortest_path_weighted<W>(
    graph: &PoseGraph,
    src: Pose,
    dst: Pose,
    weight: W,
) -> Result<DockingPlan, DockingError>
where
    W: Fn(NodeId, Action) -> f64,
{
    let s = graph.node_id(&src).ok_or(DockingError::UnknownPose(src))?;
    let t = graph.node_id(&dst).ok_or(DockingError::UnknownPose(dst))?;
    if s == t {
        return Ok(DockingPlan {
            destination: dst,
            path: Vec::new(),
        });
    }

    let n = graph.len();
    // cost-to-go towards t
    let mut to_go = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    to_go[t] = 0.0;
    heap.push(Reverse((Cost(0.0), t)));
    while let Some(Reverse((Cost(d), v))) = heap.pop() {
        if d > to_go[v] {
            continue;
        }
        if v == s {
            break;
        }
        for &(u, a) in graph.in_edges(v) {
            let nd = d + weight(u, a);
            if nd < to_go[u] {
                to_go[u] = nd;
                heap.push(Reverse((Cost(nd), u)));
            }
        }
    }
    if !to_go[s].is_finite() {
        return Err(DockingError::Unreachable { src, dst });
    }

    // Settled nodes on a shortest path have exact cost-to-go; the greedy walk
    // takes the smallest action that stays on one.
    let tol = 1e-9 * to_go[s].max(1.0);
    let mut path = Vec::new();
    let mut u = s;
    while u != t {
        let (a, v) = graph
            .out_edges(u)
            .find(|&(a, v)| (weight(u, a) + to_go[v] - to_go[u]).abs() <= tol)
            .expect("some edge realises the cost-to-go");
        path.push((a, graph.pose(v)));
        u = v;
    }
    Ok(DockingPlan { destination: dst, path })
}

/// Replays `plan` from `start` within `remaining` steps. Returns the poses
/// visited after `start`. Touches neither detector nor belief.
pub fn execute_docking(
    plan: &DockingPlan,
    graph: &PoseGraph,
    start: Pose,
    remaining: usize,
) -> Result<Vec<Pose>, DockingError> {
    if plan.len() > remaining {
        return Err(DockingError::CapExceeded {
            needed: plan.len(),
            remaining,
        });
    }
    let mut node = graph.node_id(&start).ok_or(DockingError::UnknownPose(start))?;
    let mut trajectory = Vec::with_capacity(plan.len());
    for (index, &(action, pose)) in plan.path.iter().enumerate() {
        match graph.edge(node, action) {
            Some(next) if graph.pose(next) == pose => {
                node = next;
                trajectory.push(pose);
            }
            _ => return Err(DockingError::InvalidPlan { index }),
        }
    }
    Ok(trajectory)
}

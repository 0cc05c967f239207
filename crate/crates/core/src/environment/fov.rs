//! Field of view and the pose-by-location observability matrix.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::graph::{NodeId, PoseGraph};
use super::map::{Cell, GridMap};
use super::pose::Pose;

const ANGLE_EPS_DEG: f64 = 1e-9;
const RANGE_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum FovError {
    #[error("half angle {0}° outside (0, 180]")]
    HalfAngle(f64),
    #[error("max range {0} below one cell")]
    Range(f64),
}

/// Sensor cone: half opening angle in degrees and range in cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FovParams {
    pub half_angle: f64,
    pub max_range: f64,
}

impl Default for FovParams {
    fn default() -> Self {
        FovParams {
            half_angle: 45.0,
            max_range: 5.0,
        }
    }
}

impl FovParams {
    pub fn new(half_angle: f64, max_range: f64) -> Result<Self, FovError> {
        let fov = FovParams { half_angle, max_range };
        fov.validate()?;
        Ok(fov)
    }

    pub fn validate(&self) -> Result<(), FovError> {
        if !(self.half_angle > 0.0 && self.half_angle <= 180.0) {
            return Err(FovError::HalfAngle(self.half_angle));
        }
        if !(self.max_range >= 1.0) {
            return Err(FovError::Range(self.max_range));
        }
        Ok(())
    }
}

/// Every cell touched by the segment joining two cell centers, endpoints
/// included. Where the segment passes exactly through a grid corner both
/// cells sharing that corner are emitted.
pub fn supercover_line(from: (i64, i64), to: (i64, i64)) -> Vec<(i64, i64)> {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let (nx, ny) = (dx.abs(), dy.abs());
    let (sx, sy) = (dx.signum(), dy.signum());
    let (mut x, mut y) = from;
    let mut cells = Vec::with_capacity((nx + ny + 1) as usize);
    cells.push((x, y));
    let (mut ix, mut iy) = (0, 0);
    while ix < nx || iy < ny {
        let decision = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx;
        if decision == 0 {
            cells.push((x + sx, y));
            cells.push((x, y + sy));
            x += sx;
            y += sy;
            ix += 1;
            iy += 1;
        } else if decision < 0 {
            x += sx;
            ix += 1;
        } else {
            y += sy;
            iy += 1;
        }
        cells.push((x, y));
    }
    cells
}

/// True when no occlusion lies strictly between the two cells.
pub fn line_of_sight(map: &GridMap, from: (usize, usize), to: (usize, usize)) -> bool {
    let from = (from.0 as i64, from.1 as i64);
    let to = (to.0 as i64, to.1 as i64);
    supercover_line(from, to)
        .into_iter()
        .filter(|c| *c != from && *c != to)
        .all(|(x, y)| map.get(x, y) != Some(Cell::Occlusion))
}

fn in_cone(pose: &Pose, cell: (usize, usize), fov: &FovParams) -> bool {
    let vx = cell.0 as f64 - pose.x as f64;
    let vy = pose.y as f64 - cell.1 as f64;
    let dist = vx.hypot(vy);
    if dist == 0.0 || dist > fov.max_range + RANGE_EPS {
        return false;
    }
    let (hx, hy) = pose.heading();
    let cos = ((hx * vx + hy * vy) / dist).clamp(-1.0, 1.0);
    cos.acos().to_degrees() <= fov.half_angle + ANGLE_EPS_DEG
}

/// Candidate locations visible from `pose`, ascending.
pub fn visible_locations(map: &GridMap, pose: &Pose, fov: &FovParams) -> Vec<usize> {
    map.candidate_cells()
        .iter()
        .enumerate()
        .filter(|(_, cell)| in_cone(pose, **cell, fov) && line_of_sight(map, (pose.x, pose.y), **cell))
        .map(|(j, _)| j)
        .collect()
}

/// Boolean `n x k` matrix, entry `(i, j)` set when pose `i` sees location `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibilityMatrix {
    poses: usize,
    locations: usize,
    entries: Vec<bool>,
    rows: Vec<Vec<usize>>,
    columns: Vec<Vec<NodeId>>,
}

impl VisibilityMatrix {
    pub fn compute(map: &GridMap, graph: &PoseGraph, fov: &FovParams) -> Self {
        let k = map.num_candidates();
        let rows: Vec<Vec<usize>> = graph
            .nodes()
            .iter()
            .map(|pose| visible_locations(map, pose, fov))
            .collect();
        let mut entries = vec![false; graph.len() * k];
        let mut columns = vec![Vec::new(); k];
        for (i, row) in rows.iter().enumerate() {
            for &j in row {
                entries[i * k + j] = true;
                columns[j].push(i);
            }
        }
        VisibilityMatrix {
            poses: graph.len(),
            locations: k,
            entries,
            rows,
            columns,
        }
    }

    pub fn num_poses(&self) -> usize {
        self.poses
    }

    pub fn num_locations(&self) -> usize {
        self.locations
    }

    #[inline]
    pub fn get(&self, pose: NodeId, location: usize) -> bool {
        self.entries[pose * self.locations + location]
    }

    /// Dense row for `pose`, one flag per location.
    pub fn row(&self, pose: NodeId) -> &[bool] {
        &self.entries[pose * self.locations..(pose + 1) * self.locations]
    }

    /// Locations visible from `pose`, ascending.
    pub fn visible_from(&self, pose: NodeId) -> &[usize] {
        &self.rows[pose]
    }

    /// Poses that see `location`, ascending.
    pub fn observers(&self, location: usize) -> &[NodeId] {
        &self.columns[location]
    }

    pub fn is_observable(&self, location: usize) -> bool {
        !self.columns[location].is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fov(half: f64, range: f64) -> FovParams {
        FovParams::new(half, range).unwrap()
    }

    #[test]
    fn supercover_straight_and_diagonal() {
        assert_eq!(supercover_line((0, 0), (3, 0)), vec![(0, 0), (1, 0), (2, 0), (3, 0)]);
        assert_eq!(supercover_line((0, 0), (1, 1)), vec![(0, 0), (1, 0), (0, 1), (1, 1)]);
        let shallow = supercover_line((0, 0), (2, 1));
        assert_eq!(shallow, vec![(0, 0), (1, 0), (1, 1), (2, 1)]);
    }

    #[test]
    fn adjacent_candidate_ahead_is_visible() {
        let map = GridMap::parse("...\n.o.\n...\n").unwrap();
        // pose at (1,2) facing north, candidate at (1,1)
        let pose = Pose::new(1, 2, 90);
        assert_eq!(visible_locations(&map, &pose, &fov(45.0, 3.0)), vec![0]);
        // facing east it is outside the cone
        let pose = Pose::new(1, 2, 0);
        assert!(visible_locations(&map, &pose, &fov(45.0, 3.0)).is_empty());
    }

    #[test]
    fn occlusion_between_blocks() {
        let clear = GridMap::parse("...o").unwrap();
        let blocked = GridMap::parse(".#.o").unwrap();
        let pose = Pose::new(0, 0, 0);
        assert_eq!(visible_locations(&clear, &pose, &fov(45.0, 3.0)), vec![0]);
        assert!(visible_locations(&blocked, &pose, &fov(45.0, 3.0)).is_empty());
    }

    #[test]
    fn candidates_do_not_occlude() {
        let map = GridMap::parse(".oo").unwrap();
        let pose = Pose::new(0, 0, 0);
        assert_eq!(visible_locations(&map, &pose, &fov(45.0, 3.0)), vec![0, 1]);
    }

    #[test]
    fn range_is_euclidean() {
        let map = GridMap::parse("....o").unwrap();
        let pose = Pose::new(0, 0, 0);
        assert!(visible_locations(&map, &pose, &fov(45.0, 3.0)).is_empty());
        assert_eq!(visible_locations(&map, &pose, &fov(45.0, 4.0)), vec![0]);
    }

    #[test]
    fn walled_candidates_give_zero_matrix() {
        let map = GridMap::parse("..#o\n..##\n").unwrap();
        let g = PoseGraph::build(&map, 90).unwrap();
        let vis = VisibilityMatrix::compute(&map, &g, &FovParams::default());
        assert_eq!(vis.count_ones(), 0);
        assert!(!vis.is_observable(0));
    }

    #[test]
    fn one_by_two_map_row() {
        let map = GridMap::parse(".o").unwrap();
        let g = PoseGraph::build(&map, 90).unwrap();
        let vis = VisibilityMatrix::compute(&map, &g, &fov(45.0, 1.0));
        let facing = g.node_id(&Pose::new(0, 0, 0)).unwrap();
        assert_eq!(vis.row(facing), &[true]);
        assert_eq!(vis.count_ones(), 1);
    }

    #[test]
    fn fov_params_validated() {
        assert!(FovParams::new(0.0, 3.0).is_err());
        assert!(FovParams::new(181.0, 3.0).is_err());
        assert!(FovParams::new(180.0, 0.5).is_err());
        assert!(FovParams::new(180.0, 1.0).is_ok());
    }
}

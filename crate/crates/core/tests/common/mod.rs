//! Independent reference implementations used by the integration and
//! acceptance tests. None of these call the code paths they check.

#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};

use avs_core::environment::{Cell, FovParams, GridMap, Pose};

/// Fixture maps of increasing size. Each has at least one candidate.
pub const MAP_5X5: &str = "\
#####
#o..#
#.#.#
#..o#
#####";

pub const MAP_6X6: &str = "\
o....o
.#..#.
......
..##..
.o....
....#o";

pub const MAP_7X7: &str = "\
#######
#o...o#
#.#.#.#
#.....#
#.##.o#
#o....#
#######";

pub const MAP_8X8: &str = "\
########
#o.....#
#..#...#
#..#.o.#
#......#
#.o##..#
#....o.#
########";

/// A 10x10 room pair with a doorway.
pub const MAP_10X10: &str = "\
##########
#o...#..o#
#....#...#
#..o.....#
#....#...#
######.###
#o.......#
#...##..o#
#..o.....#
##########";

pub fn parse(text: &str) -> GridMap {
    GridMap::parse(text).expect("fixture parses")
}

/// Occlusion lookup treating out-of-bounds as free.
fn occluded(map: &GridMap, x: i64, y: i64) -> bool {
    map.get(x, y) == Some(Cell::Occlusion)
}

/// Closed segment / closed unit box intersection by separating axes, in
/// doubled integer coordinates so the test is exact.
pub fn segment_touches_box(a: (i64, i64), b: (i64, i64), cell: (i64, i64)) -> bool {
    let (ax, ay) = (2 * a.0, 2 * a.1);
    let (bx, by) = (2 * b.0, 2 * b.1);
    let (lx, hx) = (2 * cell.0 - 1, 2 * cell.0 + 1);
    let (ly, hy) = (2 * cell.1 - 1, 2 * cell.1 + 1);
    if ax.max(bx) < lx || ax.min(bx) > hx || ay.max(by) < ly || ay.min(by) > hy {
        return false;
    }
    let (nx, ny) = (-(by - ay), bx - ax);
    let proj = |x: i64, y: i64| nx * (x - ax) + ny * (y - ay);
    let corners = [proj(lx, ly), proj(lx, hy), proj(hx, ly), proj(hx, hy)];
    corners.iter().min().unwrap() <= &0 && corners.iter().max().unwrap() >= &0
}

/// Degrees between heading `theta` and the direction to `cell`, via atan2.
pub fn bearing_offset(pose: &Pose, cell: (usize, usize)) -> f64 {
    let vx = cell.0 as f64 - pose.x as f64;
    let vy = pose.y as f64 - cell.1 as f64;
    let bearing = vy.atan2(vx).to_degrees();
    let diff = (bearing - f64::from(pose.theta)).rem_euclid(360.0);
    diff.min(360.0 - diff)
}

/// Brute-force visibility: range and cone by direct geometry, occlusion by
/// testing every Occlusion cell against the sight segment.
pub fn oracle_visible(map: &GridMap, pose: &Pose, fov: &FovParams) -> Vec<usize> {
    let from = (pose.x as i64, pose.y as i64);
    let walls: Vec<(i64, i64)> = (0..map.height() as i64)
        .flat_map(|y| (0..map.width() as i64).map(move |x| (x, y)))
        .filter(|&(x, y)| occluded(map, x, y))
        .collect();
    let mut out = Vec::new();
    for (j, &(cx, cy)) in map.candidate_cells().iter().enumerate() {
        let to = (cx as i64, cy as i64);
        let d2 = (to.0 - from.0).pow(2) + (to.1 - from.1).pow(2);
        if d2 == 0 || (d2 as f64).sqrt() > fov.max_range + 1e-9 {
            continue;
        }
        if bearing_offset(pose, (cx, cy)) > fov.half_angle + 1e-9 {
            continue;
        }
        if walls
            .iter()
            .any(|&w| w != from && w != to && segment_touches_box(from, to, w))
        {
            continue;
        }
        out.push(j);
    }
    out
}

/// Cell step for an axis-aligned or diagonal heading.
pub fn heading_step(theta: u16) -> (i64, i64) {
    match theta {
        0 => (1, 0),
        45 => (1, -1),
        90 => (0, -1),
        135 => (-1, -1),
        180 => (-1, 0),
        225 => (-1, 1),
        270 => (0, 1),
        315 => (1, 1),
        _ => panic!("oracle supports multiples of 45 degrees only"),
    }
}

/// Pose successors rebuilt from the map: forward, backward, clockwise,
/// counter-clockwise, in that order, `None` where blocked.
pub fn oracle_successors(map: &GridMap, pose: &Pose, delta: u16) -> [Option<Pose>; 4] {
    let (sx, sy) = heading_step(pose.theta);
    let free = |x: i64, y: i64| map.get(x, y) == Some(Cell::Empty);
    let mv = |k: i64| {
        let (x, y) = (pose.x as i64 + k * sx, pose.y as i64 + k * sy);
        free(x, y).then(|| Pose::new(x as usize, y as usize, pose.theta))
    };
    [
        mv(1),
        mv(-1),
        Some(Pose::new(pose.x, pose.y, (pose.theta + 360 - delta) % 360)),
        Some(Pose::new(pose.x, pose.y, (pose.theta + delta) % 360)),
    ]
}

pub fn oracle_poses(map: &GridMap, delta: u16) -> Vec<Pose> {
    let mut poses = Vec::new();
    for y in 0..map.height() {
        for x in 0..map.width() {
            if map.cell(x, y) == Cell::Empty {
                for t in (0..360).step_by(delta as usize) {
                    poses.push(Pose::new(x, y, t as u16));
                }
            }
        }
    }
    poses
}

/// Breadth-first action count between poses, on the map-derived graph.
pub fn oracle_bfs(map: &GridMap, delta: u16, src: Pose) -> HashMap<Pose, usize> {
    let mut dist = HashMap::from([(src, 0)]);
    let mut queue = VecDeque::from([src]);
    while let Some(p) = queue.pop_front() {
        let d = dist[&p];
        for q in oracle_successors(map, &p, delta).into_iter().flatten() {
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(q) {
                e.insert(d + 1);
                queue.push_back(q);
            }
        }
    }
    dist
}

/// One-shot Bayesian filter: sum the log-likelihoods into the log prior,
/// then normalise once. `None` when every location has zero mass.
pub fn one_shot_posterior(prior: &[f64], likelihoods: &[Vec<f64>]) -> Option<Vec<f64>> {
    let mut log_p: Vec<f64> = prior.iter().map(|p| p.ln()).collect();
    for d in likelihoods {
        for (lp, dj) in log_p.iter_mut().zip(d) {
            *lp += dj.ln();
        }
    }
    let peak = log_p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return None;
    }
    let w: Vec<f64> = log_p.iter().map(|lp| (lp - peak).exp()).collect();
    let total: f64 = w.iter().sum();
    Some(w.iter().map(|v| v / total).collect())
}

/// Finite-horizon expectimax for the search POMDP with a frozen memory.
///
/// The belief is uniform over `targets` at a known pose. Observations are
/// deterministic in the state, so each branch keeps only the targets
/// consistent with it.
pub struct Expectimax<'a> {
    pub map: &'a GridMap,
    pub delta: u16,
    pub fov: FovParams,
    pub visited: Vec<Pose>,
    pub gamma: f64,
    /// (found, step, revisit)
    pub rewards: (f64, f64, f64),
    pub horizon: usize,
}

impl Expectimax<'_> {
    fn q(&self, targets: &[usize], next: &Pose, depth: usize) -> f64 {
        let (r_found, r_step, r_revisit) = self.rewards;
        let view = oracle_visible(self.map, next, &self.fov);
        let (seen, unseen): (Vec<usize>, Vec<usize>) = targets.iter().partition(|t| view.contains(t));
        let n = targets.len() as f64;
        let mut total = seen.len() as f64 / n * r_found;
        if !unseen.is_empty() {
            let miss = if self.visited.contains(next) { r_revisit } else { r_step };
            total += unseen.len() as f64 / n * (miss + self.gamma * self.value(next, &unseen, depth + 1));
        }
        total
    }

    pub fn value(&self, pose: &Pose, targets: &[usize], depth: usize) -> f64 {
        if depth >= self.horizon {
            return 0.0;
        }
        oracle_successors(self.map, pose, self.delta)
            .into_iter()
            .flatten()
            .map(|next| self.q(targets, &next, depth))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Values of forward, backward, clockwise, counter-clockwise from the
    /// root, `None` for blocked moves.
    pub fn root_values(&self, pose: &Pose, targets: &[usize]) -> [Option<f64>; 4] {
        oracle_successors(self.map, pose, self.delta).map(|next| next.map(|n| self.q(targets, &n, 0)))
    }
}

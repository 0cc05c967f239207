use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{Cell, GridMap};

#[derive(Debug, Error, PartialEq)]
pub enum MapGenError {
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("no connected layout found after {attempts} attempts")]
    GenerationFailed { attempts: usize },
}

/// Difficulty tiers of generated maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Easy,
    Medium,
    Hard,
}

impl Preset {
    /// `(width, height, rooms, candidate density)`.
    pub fn params(self) -> (usize, usize, usize, f64) {
        match self {
            Preset::Easy => (12, 12, 1, 0.25),
            Preset::Medium => (20, 20, 2, 0.2),
            Preset::Hard => (30, 30, 3, 0.15),
        }
    }

    pub fn generate(self, seed: u64) -> Result<GridMap, MapGenError> {
        let (w, h, rooms, density) = self.params();
        generate_map(w, h, rooms, density, seed)
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Easy => "easy",
            Preset::Medium => "medium",
            Preset::Hard => "hard",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Preset {
    type Err = MapGenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(Preset::Easy),
            "medium" => Ok(Preset::Medium),
            "hard" => Ok(Preset::Hard),
            other => Err(MapGenError::InvalidParams(format!("unknown preset `{other}`"))),
        }
    }
}

const ATTEMPTS: usize = 32;
/// Rooms narrower than this along the split axis are not split again.
const MIN_ROOM: usize = 3;

/// Inclusive interior rectangle.
#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
}

impl Rect {
    fn width(&self) -> usize {
        self.x1 + 1 - self.x0
    }
    fn height(&self) -> usize {
        self.y1 + 1 - self.y0
    }
    fn area(&self) -> usize {
        self.width() * self.height()
    }
}

struct Canvas {
    w: usize,
    h: usize,
    cells: Vec<Cell>,
    doors: Vec<(usize, usize)>,
}

impl Canvas {
    fn at(&self, x: usize, y: usize) -> Cell {
        self.cells[y * self.w + x]
    }

    fn set(&mut self, x: usize, y: usize, c: Cell) {
        self.cells[y * self.w + x] = c;
    }

    fn near_door(&self, x: usize, y: usize) -> bool {
        self.doors
            .iter()
            .any(|&(dx, dy)| dx.abs_diff(x) <= 1 && dy.abs_diff(y) <= 1)
    }

    fn neighbours(&self, x: usize, y: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        [(0i64, -1i64), (1, 0), (0, 1), (-1, 0)]
            .into_iter()
            .filter_map(move |(dx, dy)| {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                (nx >= 0 && ny >= 0 && (nx as usize) < self.w && (ny as usize) < self.h)
                    .then_some((nx as usize, ny as usize))
            })
    }

    /// Every Empty cell reachable from every other through Empty cells.
    fn connected(&self) -> bool {
        let total = self.cells.iter().filter(|&&c| c == Cell::Empty).count();
        let Some(first) = self.cells.iter().position(|&c| c == Cell::Empty) else {
            return false;
        };
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::from([first]);
        seen[first] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % self.w, i / self.w);
            for (nx, ny) in self.neighbours(x, y) {
                let j = ny * self.w + nx;
                if !seen[j] && self.cells[j] == Cell::Empty {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == total
    }

    fn wall_adjacent(&self, x: usize, y: usize) -> bool {
        self.neighbours(x, y).any(|(nx, ny)| self.at(nx, ny) == Cell::Occlusion)
    }
}

/// Random indoor layout: `room_count` rooms split by walls with doors,
/// furniture blobs, and candidates on wall- or furniture-adjacent cells at
/// `candidate_density`. Deterministic in `seed`.
pub fn generate_map(
    width: usize,
    height: usize,
    room_count: usize,
    candidate_density: f64,
    seed: u64,
) -> Result<GridMap, MapGenError> {
    if width < 4 || height < 4 {
        return Err(MapGenError::InvalidParams(format!(
            "{width}x{height} is smaller than 4x4"
        )));
    }
    if !(candidate_density > 0.0 && candidate_density < 1.0) {
        return Err(MapGenError::InvalidParams(format!(
            "density {candidate_density} outside (0, 1)"
        )));
    }
    if room_count == 0 {
        return Err(MapGenError::InvalidParams("room_count must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..ATTEMPTS {
        if let Some(canvas) = attempt(width, height, room_count, candidate_density, &mut rng) {
            return GridMap::new(width, height, canvas.cells).map_err(|e| MapGenError::InvalidParams(e.to_string()));
        }
    }
    Err(MapGenError::GenerationFailed { attempts: ATTEMPTS })
}

fn attempt<R: Rng>(w: usize, h: usize, room_count: usize, density: f64, rng: &mut R) -> Option<Canvas> {
    let mut canvas = Canvas {
        w,
        h,
        cells: vec![Cell::Empty; w * h],
        doors: Vec::new(),
    };
    for x in 0..w {
        canvas.set(x, 0, Cell::Occlusion);
        canvas.set(x, h - 1, Cell::Occlusion);
    }
    for y in 0..h {
        canvas.set(0, y, Cell::Occlusion);
        canvas.set(w - 1, y, Cell::Occlusion);
    }

    let mut rooms = vec![Rect {
        x0: 1,
        y0: 1,
        x1: w - 2,
        y1: h - 2,
    }];
    while rooms.len() < room_count {
        rooms.sort_by_key(|r| std::cmp::Reverse(r.area()));
        let idx = rooms.iter().position(|r| r.width().max(r.height()) > 2 * MIN_ROOM)?;
        let r = rooms.remove(idx);
        let (a, b) = split(&mut canvas, r, rng)?;
        rooms.push(a);
        rooms.push(b);
    }

    for r in &rooms {
        let blobs = r.area() / 30;
        for _ in 0..blobs {
            place_blob(&mut canvas, r, rng);
        }
    }
    if !canvas.connected() {
        return None;
    }

    let mut sites: Vec<(usize, usize)> = (1..h - 1)
        .flat_map(|y| (1..w - 1).map(move |x| (x, y)))
        .filter(|&(x, y)| canvas.at(x, y) == Cell::Empty && canvas.wall_adjacent(x, y))
        .collect();
    let wanted = ((density * sites.len() as f64).round() as usize).max(1);
    sites.shuffle(rng);
    let mut placed = 0;
    for (x, y) in sites {
        if placed == wanted {
            break;
        }
        if canvas.near_door(x, y) {
            continue;
        }
        canvas.set(x, y, Cell::Candidate);
        if canvas.connected() {
            placed += 1;
        } else {
            canvas.set(x, y, Cell::Empty);
        }
    }
    (placed > 0).then_some(canvas)
}

/// Splits `r` with a wall across its longer side and opens a door in it.
fn split<R: Rng>(canvas: &mut Canvas, r: Rect, rng: &mut R) -> Option<(Rect, Rect)> {
    let vertical = r.width() >= r.height();
    let (lo, hi) = if vertical { (r.x0, r.x1) } else { (r.y0, r.y1) };
    // Wall position leaves at least MIN_ROOM cells on each side and does not
    // butt onto an existing door.
    let mut pos = None;
    for _ in 0..16 {
        let p = rng.random_range(lo + MIN_ROOM..=hi - MIN_ROOM);
        let blocked = if vertical {
            canvas.near_door(p, r.y0 - 1) || canvas.near_door(p, r.y1 + 1)
        } else {
            canvas.near_door(r.x0 - 1, p) || canvas.near_door(r.x1 + 1, p)
        };
        if !blocked {
            pos = Some(p);
            break;
        }
    }
    let p = pos?;
    let (span_lo, span_hi) = if vertical { (r.y0, r.y1) } else { (r.x0, r.x1) };
    for s in span_lo..=span_hi {
        if vertical {
            canvas.set(p, s, Cell::Occlusion);
        } else {
            canvas.set(s, p, Cell::Occlusion);
        }
    }
    let door_width = if span_hi - span_lo >= 6 { 2 } else { 1 };
    let d = rng.random_range(span_lo..=span_hi + 1 - door_width);
    for s in d..d + door_width {
        let cell = if vertical { (p, s) } else { (s, p) };
        canvas.set(cell.0, cell.1, Cell::Empty);
        canvas.doors.push(cell);
    }
    Some(if vertical {
        (Rect { x1: p - 1, ..r }, Rect { x0: p + 1, ..r })
    } else {
        (Rect { y1: p - 1, ..r }, Rect { y0: p + 1, ..r })
    })
}

/// Drops a 1x1 to 2x3 obstacle inside `r`; undone if it disconnects the
/// free space or crowds a door.
fn place_blob<R: Rng>(canvas: &mut Canvas, r: &Rect, rng: &mut R) {
    let bw = rng.random_range(1..=2usize).min(r.width());
    let bh = rng.random_range(1..=3usize).min(r.height());
    let (bw, bh) = if rng.random_bool(0.5) {
        (bw, bh)
    } else {
        (bh.min(r.width()), bw.min(r.height()))
    };
    let x = rng.random_range(r.x0..=r.x1 + 1 - bw);
    let y = rng.random_range(r.y0..=r.y1 + 1 - bh);
    let cells: Vec<(usize, usize)> = (y..y + bh).flat_map(|yy| (x..x + bw).map(move |xx| (xx, yy))).collect();
    if cells
        .iter()
        .any(|&(cx, cy)| canvas.at(cx, cy) != Cell::Empty || canvas.near_door(cx, cy))
    {
        return;
    }
    for &(cx, cy) in &cells {
        canvas.set(cx, cy, Cell::Occlusion);
    }
    if !canvas.connected() {
        for &(cx, cy) in &cells {
            canvas.set(cx, cy, Cell::Empty);
        }
    }
}

use std::fmt;

use serde::{Deserialize, Serialize};

/// The four agent actions. Declaration order is the ordinal used for every
/// tie-break in planning and path search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    MoveForward,
    MoveBackward,
    RotateClockwise,
    RotateCounterClockwise,
}

impl Action {
    pub const ALL: [Action; 4] = [
        Action::MoveForward,
        Action::MoveBackward,
        Action::RotateClockwise,
        Action::RotateCounterClockwise,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, Action::RotateClockwise | Action::RotateCounterClockwise)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Action::MoveForward => "move_forward",
            Action::MoveBackward => "move_backward",
            Action::RotateClockwise => "rotate_clockwise",
            Action::RotateCounterClockwise => "rotate_counter_clockwise",
        };
        f.write_str(name)
    }
}

/// Agent pose on the grid. `theta` is in degrees, counter-clockwise from the
/// +x (east) axis; rows grow southwards so 90° faces row 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pose {
    pub x: usize,
    pub y: usize,
    pub theta: u16,
}

impl Pose {
    pub fn new(x: usize, y: usize, theta: u16) -> Self {
        Pose { x, y, theta }
    }

    /// Unit heading in math coordinates (y up).
    pub fn heading(&self) -> (f64, f64) {
        let rad = f64::from(self.theta).to_radians();
        (rad.cos(), rad.sin())
    }

    /// One-cell grid displacement along the heading, in (column, row) deltas.
    pub fn forward_step(&self) -> (i64, i64) {
        let (c, s) = self.heading();
        (c.round() as i64, -(s.round() as i64))
    }

    /// Euclidean distance from this pose's cell to another cell, in cells.
    pub fn distance_to(&self, cell: (usize, usize)) -> f64 {
        let dx = cell.0 as f64 - self.x as f64;
        let dy = cell.1 as f64 - self.y as f64;
        dx.hypot(dy)
    }

    /// Absolute angle in degrees between the heading and the bearing to `cell`.
    pub fn angular_offset(&self, cell: (usize, usize)) -> f64 {
        let vx = cell.0 as f64 - self.x as f64;
        let vy = self.y as f64 - cell.1 as f64;
        let norm = vx.hypot(vy);
        if norm == 0.0 {
            return 0.0;
        }
        let (hx, hy) = self.heading();
        ((hx * vx + hy * vy) / norm).clamp(-1.0, 1.0).acos().to_degrees()
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}°)", self.x, self.y, self.theta)
    }
}

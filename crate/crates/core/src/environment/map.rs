//! Occupancy grid with the three-way cell taxonomy and the text map format.
//!
//! Map files are UTF-8, one row per line. `#` is a visual occlusion, `.` an
//! empty (traversable) cell and `o` a candidate target location. An optional
//! first line `size <w> <h>` is validated against the rows that follow.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    /// Blocks both motion and sight.
    Occlusion,
    /// Traversable, never holds the target.
    Empty,
    /// Possible target location. Not traversable, does not block sight.
    Candidate,
}

impl Cell {
    pub fn from_glyph(glyph: char) -> Option<Cell> {
        match glyph {
            '#' => Some(Cell::Occlusion),
            '.' => Some(Cell::Empty),
            'o' => Some(Cell::Candidate),
            _ => None,
        }
    }

    pub fn glyph(self) -> char {
        match self {
            Cell::Occlusion => '#',
            Cell::Empty => '.',
            Cell::Candidate => 'o',
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}, column {column}: unknown glyph {glyph:?}")]
    UnknownGlyph { line: usize, column: usize, glyph: char },
    #[error("line {line}: row has {found} cells, expected {expected}")]
    RaggedRows { line: usize, expected: usize, found: usize },
    #[error("malformed size header: {0:?}")]
    BadHeader(String),
    #[error("size header says {header_w}x{header_h} but rows are {rows_w}x{rows_h}")]
    SizeMismatch {
        header_w: usize,
        header_h: usize,
        rows_w: usize,
        rows_h: usize,
    },
    #[error("map has no rows")]
    EmptyMap,
    #[error("map has no candidate cells")]
    NoCandidates,
}

/// Grid world with candidate locations indexed `0..k` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    width: usize,
    height: usize,
    cell_size: f64,
    cells: Vec<Cell>,
    candidates: Vec<(usize, usize)>,
    candidate_lookup: Vec<Option<usize>>,
}

impl GridMap {
    /// Builds a map from row-major cells. Fails when no cell is a candidate.
    pub fn new(width: usize, height: usize, cells: Vec<Cell>) -> Result<Self, ParseError> {
        if width == 0 || height == 0 {
            return Err(ParseError::EmptyMap);
        }
        assert_eq!(cells.len(), width * height, "cell count must equal width*height");
        let mut candidates = Vec::new();
        let mut candidate_lookup = vec![None; cells.len()];
        for (idx, cell) in cells.iter().enumerate() {
            if *cell == Cell::Candidate {
                candidate_lookup[idx] = Some(candidates.len());
                candidates.push((idx % width, idx / width));
            }
        }
        if candidates.is_empty() {
            return Err(ParseError::NoCandidates);
        }
        Ok(GridMap {
            width,
            height,
            cell_size: 1.0,
            cells,
            candidates,
            candidate_lookup,
        })
    }

    /// Parses the text map format.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .filter(|(_, l)| !l.trim().is_empty())
            .peekable();

        let mut header = None;
        if let Some((_, first)) = lines.peek() {
            if first.trim_start().starts_with("size") {
                let parts: Vec<&str> = first.split_whitespace().collect();
                let parsed = match parts.as_slice() {
                    ["size", w, h] => w.parse::<usize>().ok().zip(h.parse::<usize>().ok()),
                    _ => None,
                };
                match parsed {
                    Some(wh) => header = Some(wh),
                    None => return Err(ParseError::BadHeader(first.to_string())),
                }
                lines.next();
            }
        }

        let mut width = None;
        let mut height = 0;
        let mut cells = Vec::new();
        for (line_no, line) in lines {
            let mut count = 0;
            for (col, glyph) in line.chars().enumerate() {
                let cell = Cell::from_glyph(glyph).ok_or(ParseError::UnknownGlyph {
                    line: line_no,
                    column: col + 1,
                    glyph,
                })?;
                cells.push(cell);
                count += 1;
            }
            match width {
                None => width = Some(count),
                Some(w) if w != count => {
                    return Err(ParseError::RaggedRows {
                        line: line_no,
                        expected: w,
                        found: count,
                    })
                }
                Some(_) => {}
            }
            height += 1;
        }
        let width = width.ok_or(ParseError::EmptyMap)?;
        if let Some((hw, hh)) = header {
            if hw != width || hh != height {
                return Err(ParseError::SizeMismatch {
                    header_w: hw,
                    header_h: hh,
                    rows_w: width,
                    rows_h: height,
                });
            }
        }
        GridMap::new(width, height, cells)
    }

    /// Serializes to the text map format, with a size header.
    pub fn to_text(&self) -> String {
        let mut out = format!("size {} {}\n", self.width, self.height);
        for row in self.cells.chunks(self.width) {
            out.extend(row.iter().map(|c| c.glyph()));
            out.push('\n');
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Meters per cell. Metadata only, geometry is in cell units.
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn with_cell_size(mut self, meters: f64) -> Self {
        self.cell_size = meters;
        self
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, x: usize, y: usize) -> Cell {
        self.cells[y * self.width + x]
    }

    /// Cell at signed coordinates, `None` when out of bounds.
    pub fn get(&self, x: i64, y: i64) -> Option<Cell> {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            None
        } else {
            Some(self.cell(x as usize, y as usize))
        }
    }

    pub fn is_traversable(&self, x: i64, y: i64) -> bool {
        self.get(x, y) == Some(Cell::Empty)
    }

    /// Number of candidate locations, `k`.
    pub fn num_candidates(&self) -> usize {
        self.candidates.len()
    }

    pub fn candidate_cell(&self, location: usize) -> (usize, usize) {
        self.candidates[location]
    }

    pub fn candidate_cells(&self) -> &[(usize, usize)] {
        &self.candidates
    }

    pub fn candidate_at(&self, x: usize, y: usize) -> Option<usize> {
        self.candidate_lookup[y * self.width + x]
    }

    pub fn empty_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == Cell::Empty)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }

    /// Copy of this map with one cell replaced. Candidate indices are recomputed.
    pub fn with_cell(&self, x: usize, y: usize, cell: Cell) -> Result<GridMap, ParseError> {
        let mut cells = self.cells.clone();
        cells[y * self.width + x] = cell;
        GridMap::new(self.width, self.height, cells).map(|m| m.with_cell_size(self.cell_size))
    }
}

impl fmt::Display for GridMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

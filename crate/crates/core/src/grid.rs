//! The template surface: a regular quad grid with subdivision connectivity,
//! and the discrete umbrella / double-umbrella operators driving the
//! smoothing energy.

use alloc::vec::Vec;

use crate::geom::Vec3;

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum GridError {
    #[error("grid {rows}x{cols} does not have subdivision connectivity for {levels} levels")]
    BadGridDimensions {
        rows: usize,
        cols: usize,
        levels: usize,
    },
    #[error("expected {expected} positions, got {got}")]
    WrongPositionCount { expected: usize, got: usize },
    #[error("non-finite position at vertex {0}")]
    NonFinitePosition(usize),
}

/// Checks `len = a * 2^levels + 1` for some integer `a >= 1` and returns `a`.
pub(crate) fn base_segments(len: usize, levels: usize) -> Option<usize> {
    if levels >= usize::BITS as usize {
        return None;
    }
    let step = 1usize << levels;
    let total = len.checked_sub(1)?;
    if total == 0 || total % step != 0 {
        return None;
    }
    Some(total / step)
}

/// A 3D surface sampled on a regular `rows x cols` quad grid, stored
/// row-major, with subdivision connectivity for `levels` refinement levels
/// (`rows = a * 2^levels + 1`, `cols = b * 2^levels + 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct QuadGridShape {
    rows: usize,
    cols: usize,
    levels: usize,
    positions: Vec<Vec3>,
}

impl QuadGridShape {
    pub fn new(
        rows: usize,
        cols: usize,
        levels: usize,
        positions: Vec<Vec3>,
    ) -> Result<Self, GridError> {
        if levels == 0
            || base_segments(rows, levels).is_none()
            || base_segments(cols, levels).is_none()
        {
            return Err(GridError::BadGridDimensions { rows, cols, levels });
        }
        if positions.len() != rows * cols {
            return Err(GridError::WrongPositionCount {
                expected: rows * cols,
                got: positions.len(),
            });
        }
        if let Some(bad) = positions.iter().position(|p| !p.is_finite()) {
            return Err(GridError::NonFinitePosition(bad));
        }
        Ok(Self {
            rows,
            cols,
            levels,
            positions,
        })
    }

    /// Constant shape, mostly useful as a starting buffer.
    pub fn constant(
        rows: usize,
        cols: usize,
        levels: usize,
        value: Vec3,
    ) -> Result<Self, GridError> {
        Self::new(rows, cols, levels, alloc::vec![value; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.rows && col < self.cols);
        row * self.cols + col
    }

    #[inline]
    pub fn row_col(&self, vertex: usize) -> (usize, usize) {
        (vertex / self.cols, vertex % self.cols)
    }

    #[inline]
    pub fn position(&self, vertex: usize) -> Vec3 {
        self.positions[vertex]
    }

    /// 4-connected neighborhood; corners get 2 and edges 3 neighbors
    /// (truncated stencil, no reflection).
    pub fn neighbors4(&self, vertex: usize) -> Neighbors {
        let (r, c) = self.row_col(vertex);
        let mut out = Neighbors {
            items: [0; 4],
            len: 0,
        };
        if r > 0 {
            out.push(vertex - self.cols);
        }
        if r + 1 < self.rows {
            out.push(vertex + self.cols);
        }
        if c > 0 {
            out.push(vertex - 1);
        }
        if c + 1 < self.cols {
            out.push(vertex + 1);
        }
        out
    }

    /// Umbrella operator: mean of the 4-neighborhood minus the vertex.
    pub fn umbrella(&self, vertex: usize) -> Vec3 {
        umbrella_of(self.rows, self.cols, &self.positions, vertex)
    }

    /// Double umbrella: the umbrella operator applied to the field of
    /// umbrella vectors, a discrete bi-Laplacian.
    pub fn bi_umbrella(&self, vertex: usize) -> Vec3 {
        bi_umbrella_of(self.rows, self.cols, &self.positions, vertex)
    }

    pub fn into_positions(self) -> Vec<Vec3> {
        self.positions
    }
}

/// Fixed-capacity neighbor list for the 4-connected stencil.
#[derive(Clone, Copy, Debug)]
pub struct Neighbors {
    items: [usize; 4],
    len: usize,
}

impl Neighbors {
    fn push(&mut self, v: usize) {
        self.items[self.len] = v;
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.items[..self.len]
    }
}

impl<'a> IntoIterator for &'a Neighbors {
    type Item = usize;
    type IntoIter = core::iter::Copied<core::slice::Iter<'a, usize>>;
    fn into_iter(self) -> Self::IntoIter {
        self.as_slice().iter().copied()
    }
}

pub(crate) fn neighbors4_of(rows: usize, cols: usize, vertex: usize) -> Neighbors {
    let (r, c) = (vertex / cols, vertex % cols);
    let mut out = Neighbors {
        items: [0; 4],
        len: 0,
    };
    if r > 0 {
        out.push(vertex - cols);
    }
    if r + 1 < rows {
        out.push(vertex + cols);
    }
    if c > 0 {
        out.push(vertex - 1);
    }
    if c + 1 < cols {
        out.push(vertex + 1);
    }
    out
}

pub(crate) fn umbrella_of(rows: usize, cols: usize, positions: &[Vec3], vertex: usize) -> Vec3 {
    let nb = neighbors4_of(rows, cols, vertex);
    let mut acc = Vec3::ZERO;
    for j in &nb {
        acc += positions[j];
    }
    acc * (1.0 / nb.len() as f64) - positions[vertex]
}

pub(crate) fn bi_umbrella_of(rows: usize, cols: usize, positions: &[Vec3], vertex: usize) -> Vec3 {
    let nb = neighbors4_of(rows, cols, vertex);
    let mut acc = Vec3::ZERO;
    for j in &nb {
        acc += umbrella_of(rows, cols, positions, j);
    }
    acc * (1.0 / nb.len() as f64) - umbrella_of(rows, cols, positions, vertex)
}

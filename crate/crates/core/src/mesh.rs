//! Uniform meshes of the unit interval and the unit square.
//!
//! Square nodes are numbered lexicographically, `k = j (n + 1) + i` for the
//! node at `(i h, j h)`. Each square cell is split into two right triangles
//! along the diagonal from `(i, j)` to `(i + 1, j + 1)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mesh {
    Interval { cells: usize },
    Square { cells: usize },
}

impl Mesh {
    pub fn interval(cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(Error::Parameter(format!("interval mesh needs at least 2 cells, got {cells}")));
        }
        Ok(Mesh::Interval { cells })
    }

    pub fn square(cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(Error::Parameter(format!("square mesh needs at least 2 cells, got {cells}")));
        }
        Ok(Mesh::Square { cells })
    }

    pub fn dim(&self) -> usize {
        match self {
            Mesh::Interval { .. } => 1,
            Mesh::Square { .. } => 2,
        }
    }

    /// Cells per coordinate direction.
    pub fn cells(&self) -> usize {
        match *self {
            Mesh::Interval { cells } | Mesh::Square { cells } => cells,
        }
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells() as f64
    }

    pub fn n_nodes(&self) -> usize {
        let n = self.cells() + 1;
        match self {
            Mesh::Interval { .. } => n,
            Mesh::Square { .. } => n * n,
        }
    }

    pub fn n_interior(&self) -> usize {
        let n = self.cells() - 1;
        match self {
            Mesh::Interval { .. } => n,
            Mesh::Square { .. } => n * n,
        }
    }

    /// Coordinates of node `k`; `y = 0` on the interval.
    pub fn coords(&self, k: usize) -> (f64, f64) {
        let h = self.h();
        match *self {
            Mesh::Interval { .. } => (k as f64 * h, 0.0),
            Mesh::Square { cells } => {
                let (i, j) = (k % (cells + 1), k / (cells + 1));
                (i as f64 * h, j as f64 * h)
            }
        }
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        match *self {
            Mesh::Interval { cells } => k == 0 || k == cells,
            Mesh::Square { cells } => {
                let (i, j) = (k % (cells + 1), k / (cells + 1));
                i == 0 || j == 0 || i == cells || j == cells
            }
        }
    }

    /// Node indices of the interior nodes, in interior numbering order.
    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&k| !self.is_boundary(k)).collect()
    }

    /// Interior index of node `k`, `None` on the boundary.
    pub fn interior_index(&self, k: usize) -> Option<usize> {
        if self.is_boundary(k) {
            return None;
        }
        match *self {
            Mesh::Interval { .. } => Some(k - 1),
            Mesh::Square { cells } => {
                let (i, j) = (k % (cells + 1), k / (cells + 1));
                Some((j - 1) * (cells - 1) + i - 1)
            }
        }
    }

    /// Half-bandwidth of the P1 matrices over all nodes.
    pub fn bandwidth(&self) -> usize {
        match *self {
            Mesh::Interval { .. } => 1,
            Mesh::Square { cells } => cells + 2,
        }
    }

    /// Half-bandwidth of the P1 matrices restricted to interior nodes.
    pub fn interior_bandwidth(&self) -> usize {
        match *self {
            Mesh::Interval { .. } => 1,
            Mesh::Square { cells } => cells,
        }
    }

    /// Elements as node lists: segments `[a, b]` on the interval (third entry
    /// unused) and counter-clockwise triangles on the square.
    pub fn elements(&self) -> Vec<[usize; 3]> {
        match *self {
            Mesh::Interval { cells } => (0..cells).map(|i| [i, i + 1, usize::MAX]).collect(),
            Mesh::Square { cells } => {
                let n1 = cells + 1;
                let mut out = Vec::with_capacity(2 * cells * cells);
                for j in 0..cells {
                    for i in 0..cells {
                        let a = j * n1 + i;
                        let b = a + 1;
                        let c = a + n1 + 1;
                        let d = a + n1;
                        out.push([a, b, c]);
                        out.push([a, c, d]);
                    }
                }
                out
            }
        }
    }

    /// Element measure (length or area).
    pub fn element_measure(&self) -> f64 {
        let h = self.h();
        match self {
            Mesh::Interval { .. } => h,
            Mesh::Square { .. } => 0.5 * h * h,
        }
    }

    /// Locates the element containing `(x, y)` and returns its nodes with the
    /// barycentric weights of the point.
    pub fn locate(&self, x: f64, y: f64) -> ([usize; 3], [f64; 3]) {
        let n = self.cells();
        let h = self.h();
        let cell = |s: f64| ((s / h).floor().max(0.0) as usize).min(n - 1);
        match *self {
            Mesh::Interval { .. } => {
                let i = cell(x);
                let t = (x - i as f64 * h) / h;
                ([i, i + 1, i + 1], [1.0 - t, t, 0.0])
            }
            Mesh::Square { cells } => {
                let (i, j) = (cell(x), cell(y));
                let s = (x - i as f64 * h) / h;
                let t = (y - j as f64 * h) / h;
                let n1 = cells + 1;
                let a = j * n1 + i;
                if s >= t {
                    ([a, a + 1, a + n1 + 1], [1.0 - s, s - t, t])
                } else {
                    ([a, a + n1 + 1, a + n1], [1.0 - t, s, t - s])
                }
            }
        }
    }
}

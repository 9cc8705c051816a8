use serde::{Deserialize, Serialize};

use super::reduction::{BoundaryMatrix, Filtration};
use crate::error::{Error, Result};

/// A row-major 2D grid of real values (a grayscale image).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Grid {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || cols == 0 {
            return Err(Error::InvalidInput("image grid is empty".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::InvalidInput(format!(
                    "row {r} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "row {r} has a non-finite value"
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }
}

/// A cell of the full cubical complex on an image.
///
/// Cells are addressed in doubled coordinates on a `(2 rows + 1) x (2 cols + 1)`
/// lattice: a coordinate is odd when the cell spans that axis. Pixels are the
/// cells with both coordinates odd.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicalCell {
    pub id: usize,
    pub dim: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct CubicalFiltration {
    rows: usize,
    cols: usize,
    cells: Vec<CubicalCell>,
    /// position[id] = filtration index of cell `id`.
    position: Vec<u32>,
}

impl CubicalFiltration {
    pub fn grid_dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn cells(&self) -> &[CubicalCell] {
        &self.cells
    }

    fn width(&self) -> usize {
        2 * self.cols + 1
    }

    /// Doubled (row, col) coordinates of a cell id.
    pub fn coordinates(&self, id: usize) -> (usize, usize) {
        (id / self.width(), id % self.width())
    }

    pub fn cell_at(&self, r: usize, c: usize) -> &CubicalCell {
        &self.cells[self.position[r * self.width() + c] as usize]
    }

    fn faces(&self, id: usize, out: &mut Vec<usize>) {
        let (r, c) = self.coordinates(id);
        let w = self.width();
        out.clear();
        if r % 2 == 1 {
            out.push((r - 1) * w + c);
            out.push((r + 1) * w + c);
        }
        if c % 2 == 1 {
            out.push(r * w + c - 1);
            out.push(r * w + c + 1);
        }
    }
}

/// Full cubical complex of the image, pixels as top cells; each lower cell
/// takes the minimum value of the pixels it bounds.
pub fn build_cubical_filtration(image: &Grid) -> CubicalFiltration {
    let (rows, cols) = (image.rows, image.cols);
    let (h, w) = (2 * rows + 1, 2 * cols + 1);
    let mut cells = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let dim = r % 2 + c % 2;
            // Pixels touching this cell: odd doubled coordinates within +-1.
            let pr = if r % 2 == 1 {
                r / 2..r / 2 + 1
            } else {
                r.saturating_sub(1) / 2..(r / 2).min(rows - 1) + 1
            };
            let pc = if c % 2 == 1 {
                c / 2..c / 2 + 1
            } else {
                c.saturating_sub(1) / 2..(c / 2).min(cols - 1) + 1
            };
            let mut value = f64::INFINITY;
            for i in pr {
                for j in pc.clone() {
                    value = value.min(image.get(i, j));
                }
            }
            cells.push(CubicalCell {
                id: r * w + c,
                dim,
                value,
            });
        }
    }
    cells.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.dim.cmp(&b.dim))
            .then(a.id.cmp(&b.id))
    });
    let mut position = vec![0u32; h * w];
    for (i, cell) in cells.iter().enumerate() {
        position[cell.id] = i as u32;
    }
    CubicalFiltration {
        rows,
        cols,
        cells,
        position,
    }
}

impl Filtration for CubicalFiltration {
    fn len(&self) -> usize {
        self.cells.len()
    }

    fn dim(&self, i: usize) -> usize {
        self.cells[i].dim
    }

    fn value(&self, i: usize) -> f64 {
        self.cells[i].value
    }

    fn boundary_matrix(&self) -> BoundaryMatrix {
        let mut matrix = BoundaryMatrix::with_capacity(self.len(), 4 * self.len());
        let mut faces = Vec::with_capacity(4);
        let mut column = Vec::with_capacity(4);
        for cell in &self.cells {
            self.faces(cell.id, &mut faces);
            column.clear();
            column.extend(faces.iter().map(|&f| self.position[f]));
            column.sort_unstable();
            matrix.push_column(&column);
        }
        matrix
    }
}

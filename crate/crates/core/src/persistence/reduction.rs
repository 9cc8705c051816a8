use super::diagram::BirthDeathDiagram;

const NONE: u32 = u32::MAX;

/// Sparse Z/2 boundary matrix in compressed-column form. Row indices in each
/// column are ascending filtration indices.
#[derive(Debug, Clone, Default)]
pub struct BoundaryMatrix {
    starts: Vec<usize>,
    rows: Vec<u32>,
}

impl BoundaryMatrix {
    pub fn with_capacity(columns: usize, entries: usize) -> Self {
        let mut starts = Vec::with_capacity(columns + 1);
        starts.push(0);
        Self {
            starts,
            rows: Vec::with_capacity(entries),
        }
    }

    pub fn push_column(&mut self, rows: &[u32]) {
        debug_assert!(rows.windows(2).all(|w| w[0] < w[1]));
        self.rows.extend_from_slice(rows);
        self.starts.push(self.rows.len());
    }

    pub fn column(&self, j: usize) -> &[u32] {
        &self.rows[self.starts[j]..self.starts[j + 1]]
    }

    pub fn columns(&self) -> usize {
        self.starts.len() - 1
    }
}

/// A filtered cell complex: cells in filtration order, faces before cofaces.
pub trait Filtration {
    fn len(&self) -> usize;
    fn dim(&self, i: usize) -> usize;
    fn value(&self, i: usize) -> f64;
    fn boundary_matrix(&self) -> BoundaryMatrix;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn max_dim(&self) -> Option<usize> {
        (0..self.len()).map(|i| self.dim(i)).max()
    }
}

/// Index-level persistence pairing in one homology dimension.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PersistencePairs {
    pub dim: usize,
    /// (birth cell, death cell) filtration indices.
    pub pairs: Vec<(usize, usize)>,
    /// Cells creating classes that never die.
    pub essential: Vec<usize>,
}

/// Standard left-to-right column reduction over Z/2, one dimension at a time
/// from the bottom up.
///
/// Rows of negative cells are dropped from the columns one dimension higher
/// (they can never be pivots there). Columns above the highest requested
/// dimension are only reduced until every positive cell below has been paired.
pub fn reduce<F: Filtration + ?Sized>(filtration: &F, dims: &[usize]) -> Vec<PersistencePairs> {
    let n = filtration.len();
    let mut out: Vec<PersistencePairs> = dims
        .iter()
        .map(|&dim| PersistencePairs {
            dim,
            ..Default::default()
        })
        .collect();
    let Some(max_dim) = filtration.max_dim() else {
        return out;
    };
    let Some(&highest) = dims.iter().max() else {
        return out;
    };
    let top = (highest + 1).min(max_dim);

    let boundary = filtration.boundary_matrix();
    let mut by_dim: Vec<Vec<u32>> = vec![Vec::new(); max_dim + 1];
    for i in 0..n {
        by_dim[filtration.dim(i)].push(i as u32);
    }

    // pivot_owner[row] -> slot in `reduced` holding the column with that low.
    let mut pivot_owner = vec![NONE; n];
    let mut reduced: Vec<Vec<u32>> = Vec::new();
    let mut death_of = vec![NONE; n];
    let mut negative = vec![false; n];
    let mut scratch = Vec::new();

    for d in 1..=top {
        let unpaired = by_dim[d - 1]
            .iter()
            .filter(|&&i| !negative[i as usize])
            .count();
        let mut paired = 0;
        for &j in &by_dim[d] {
            if d > highest && paired == unpaired {
                break;
            }
            let j = j as usize;
            let mut col: Vec<u32> = boundary
                .column(j)
                .iter()
                .copied()
                .filter(|&r| !negative[r as usize])
                .collect();
            while let Some(&low) = col.last() {
                let owner = pivot_owner[low as usize];
                if owner == NONE {
                    break;
                }
                add_columns(&col, &reduced[owner as usize], &mut scratch);
                std::mem::swap(&mut col, &mut scratch);
            }
            if let Some(&low) = col.last() {
                pivot_owner[low as usize] = reduced.len() as u32;
                death_of[low as usize] = j as u32;
                negative[j] = true;
                paired += 1;
                reduced.push(col);
            }
        }
    }

    for result in &mut out {
        let d = result.dim;
        if d > max_dim {
            continue;
        }
        for &i in &by_dim[d] {
            let i = i as usize;
            if death_of[i] != NONE {
                result.pairs.push((i, death_of[i] as usize));
            } else if !negative[i] {
                result.essential.push(i);
            }
        }
    }
    out
}

/// Coface lists of every cell, i.e. the transpose of the boundary matrix.
fn coboundary(boundary: &BoundaryMatrix, n: usize) -> BoundaryMatrix {
    let mut counts = vec![0usize; n + 1];
    for j in 0..boundary.columns() {
        for &r in boundary.column(j) {
            counts[r as usize + 1] += 1;
        }
    }
    for i in 0..n {
        counts[i + 1] += counts[i];
    }
    let mut fill = counts.clone();
    let mut rows = vec![0u32; counts[n]];
    // Columns are visited in ascending order, so each coface list comes out sorted.
    for j in 0..boundary.columns() {
        for &r in boundary.column(j) {
            rows[fill[r as usize]] = j as u32;
            fill[r as usize] += 1;
        }
    }
    BoundaryMatrix {
        starts: counts,
        rows,
    }
}

/// The same pairing as [`reduce`], computed by reducing coboundary columns
/// in reverse filtration order.
///
/// Cells already known to kill a class one dimension lower are skipped, so
/// in a Vietoris-Rips complex only the cycle-creating edges need reducing.
pub fn reduce_cohomology<F: Filtration + ?Sized>(
    filtration: &F,
    dims: &[usize],
) -> Vec<PersistencePairs> {
    let n = filtration.len();
    let mut out: Vec<PersistencePairs> = dims
        .iter()
        .map(|&dim| PersistencePairs {
            dim,
            ..Default::default()
        })
        .collect();
    let Some(max_dim) = filtration.max_dim() else {
        return out;
    };
    let Some(&highest) = dims.iter().max() else {
        return out;
    };
    let highest = highest.min(max_dim);

    let cob = coboundary(&filtration.boundary_matrix(), n);
    let mut by_dim: Vec<Vec<u32>> = vec![Vec::new(); max_dim + 1];
    for i in 0..n {
        by_dim[filtration.dim(i)].push(i as u32);
    }

    let mut death_of = vec![NONE; n];
    let mut negative = vec![false; n];
    let mut pivot_owner = vec![NONE; n];
    let mut reduced: Vec<Vec<u32>> = Vec::new();
    let mut stack = Vec::new();
    let mut scratch = Vec::new();

    for cells in by_dim.iter().take(highest + 1) {
        // Reverse order; pivots are the earliest cofaces.
        for &i in cells.iter().rev() {
            let i = i as usize;
            if negative[i] {
                continue;
            }
            // Columns are kept descending so the pivot sits at the end.
            stack.clear();
            stack.extend(cob.column(i).iter().rev().copied());
            while let Some(&low) = stack.last() {
                let owner = pivot_owner[low as usize];
                if owner == NONE {
                    break;
                }
                add_columns_desc(&stack, &reduced[owner as usize], &mut scratch);
                std::mem::swap(&mut stack, &mut scratch);
            }
            if let Some(&low) = stack.last() {
                pivot_owner[low as usize] = reduced.len() as u32;
                death_of[i] = low;
                negative[low as usize] = true;
                reduced.push(stack.clone());
            }
        }
    }

    for result in &mut out {
        let d = result.dim;
        if d > max_dim {
            continue;
        }
        for &i in &by_dim[d] {
            let i = i as usize;
            if death_of[i] != NONE {
                result.pairs.push((i, death_of[i] as usize));
            } else if !negative[i] {
                result.essential.push(i);
            }
        }
    }
    out
}

/// Symmetric difference of two descending index lists.
fn add_columns_desc(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Greater => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Less => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

/// Symmetric difference of two ascending index lists (column addition over Z/2).
fn add_columns(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

/// Persistence diagrams (birth, death) for each requested dimension, in the
/// order requested. Dimensions above the complex's top dimension yield empty
/// diagrams.
pub fn compute_persistence<F: Filtration + ?Sized>(
    filtration: &F,
    dims: &[usize],
) -> Vec<BirthDeathDiagram> {
    reduce_cohomology(filtration, dims)
        .into_iter()
        .map(|p| {
            let mut pairs: Vec<(f64, f64)> = p
                .pairs
                .iter()
                .map(|&(b, d)| (filtration.value(b), filtration.value(d)))
                .collect();
            pairs.extend(
                p.essential
                    .iter()
                    .map(|&b| (filtration.value(b), f64::INFINITY)),
            );
            BirthDeathDiagram::new(p.dim, pairs)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persistence::{build_rips_filtration, PointCloud, SimplicialFiltration};

    fn sorted(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        v
    }

    fn triangle_filtration() -> SimplicialFiltration {
        let h = 3f64.sqrt() / 2.0;
        let cloud = PointCloud::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]]).unwrap();
        build_rips_filtration(&cloud, 2.0, 2).unwrap()
    }

    #[test]
    fn column_addition() {
        let mut out = Vec::new();
        add_columns(&[1, 3, 5], &[3, 4], &mut out);
        assert_eq!(out, vec![1, 4, 5]);
        add_columns(&[2, 7], &[2, 7], &mut out);
        assert!(out.is_empty());
    }

    #[test]
    fn triangle_dim0() {
        let f = triangle_filtration();
        let d = &compute_persistence(&f, &[0])[0];
        let pairs = sorted(
            d.pairs
                .iter()
                .map(|&(b, d)| {
                    (
                        b,
                        if d.is_finite() {
                            (d * 1e9).round() / 1e9
                        } else {
                            d
                        },
                    )
                })
                .collect(),
        );
        assert_eq!(pairs, vec![(0.0, 1.0), (0.0, 1.0), (0.0, f64::INFINITY)]);
    }

    #[test]
    fn triangle_dim1_zero_length_cycle() {
        let f = triangle_filtration();
        let d = &compute_persistence(&f, &[1])[0];
        assert_eq!(d.pairs.len(), 1);
        let (b, de) = d.pairs[0];
        assert_eq!(b, de);
        assert!((b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_square_cycle() {
        let cloud = PointCloud::new(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let f = build_rips_filtration(&cloud, 2.0, 2).unwrap();
        let d = &compute_persistence(&f, &[1])[0];
        let nonzero: Vec<_> = d.pairs.iter().filter(|(b, d)| d > b).collect();
        assert_eq!(nonzero, vec![&(1.0, 2f64.sqrt())]);
    }

    #[test]
    fn dim_above_complex_is_empty() {
        let f = triangle_filtration();
        let d = compute_persistence(&f, &[5]);
        assert!(d[0].pairs.is_empty());
    }

    #[test]
    fn graph_cycles_are_essential_without_triangles() {
        let f = SimplicialFiltration::new(vec![
            (vec![0], 0.0),
            (vec![1], 0.0),
            (vec![2], 0.0),
            (vec![0, 1], 1.0),
            (vec![1, 2], 1.0),
            (vec![0, 2], 2.0),
        ])
        .unwrap();
        let d = compute_persistence(&f, &[0, 1]);
        assert_eq!(d[0].essential_count(), 1);
        assert_eq!(d[1].pairs, vec![(2.0, f64::INFINITY)]);
    }
}

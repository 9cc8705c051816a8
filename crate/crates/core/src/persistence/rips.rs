use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::reduction::{BoundaryMatrix, Filtration};
use crate::error::{Error, Result};

/// A finite cloud of points in R^d, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidInput("point cloud is empty".into()))?;
        if dim == 0 {
            return Err(Error::InvalidInput("points have zero dimension".into()));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "point {i} has a non-finite coordinate"
                )));
            }
            coords.extend_from_slice(p);
        }
        Ok(Self { dim, coords })
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "{} coordinates cannot form points of dimension {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        Ok(Self { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Largest Euclidean distance between two points of the cloud.
pub fn max_pairwise_distance(cloud: &PointCloud) -> f64 {
    let n = cloud.len();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            best = best.max(cloud.distance(i, j));
        }
    }
    best
}

/// Simplices ordered by filtration value, then dimension, then vertex indices.
///
/// Vertex lists are kept in one flat buffer so that large Rips complexes do
/// not allocate per simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialFiltration {
    vertices: Vec<u32>,
    starts: Vec<usize>,
    values: Vec<f64>,
}

impl SimplicialFiltration {
    /// Sorts the given simplices into filtration order and checks the
    /// filtration invariants. Vertex lists are sorted; duplicates are rejected.
    pub fn new(simplices: Vec<(Vec<u32>, f64)>) -> Result<Self> {
        let mut simplices: Vec<(Vec<u32>, f64)> = simplices
            .into_iter()
            .map(|(mut v, f)| {
                v.sort_unstable();
                (v, f)
            })
            .collect();
        for (v, f) in &simplices {
            if v.is_empty() {
                return Err(Error::InvalidFiltration("empty simplex".into()));
            }
            if v.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidFiltration(format!(
                    "repeated vertex in {v:?}"
                )));
            }
            if !f.is_finite() {
                return Err(Error::InvalidFiltration(format!(
                    "non-finite value for {v:?}"
                )));
            }
        }
        simplices.sort_by(|a, b| simplex_order(&a.0, a.1, &b.0, b.1));
        let mut filtration = Self::with_capacity(simplices.len(), 0);
        for (v, f) in &simplices {
            filtration.push(v, *f);
        }
        filtration.validate()?;
        Ok(filtration)
    }

    fn with_capacity(n: usize, verts: usize) -> Self {
        Self {
            vertices: Vec::with_capacity(verts),
            starts: {
                let mut s = Vec::with_capacity(n + 1);
                s.push(0);
                s
            },
            values: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, vertices: &[u32], value: f64) {
        self.vertices.extend_from_slice(vertices);
        self.starts.push(self.vertices.len());
        self.values.push(value);
    }

    pub fn simplex(&self, i: usize) -> &[u32] {
        &self.vertices[self.starts[i]..self.starts[i + 1]]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u32], f64)> {
        (0..self.len()).map(move |i| (self.simplex(i), self.values[i]))
    }

    pub fn count_dim(&self, dim: usize) -> usize {
        (0..self.len())
            .filter(|&i| Filtration::dim(self, i) == dim)
            .count()
    }

    fn face_index(&self) -> FaceIndex<'_> {
        FaceIndex::new(self)
    }

    /// Checks ordering, monotonicity, and face-before-coface.
    pub fn validate(&self) -> Result<()> {
        let index = self.face_index();
        let mut face = Vec::new();
        for i in 0..self.len() {
            let s = self.simplex(i);
            if i > 0 {
                let prev = self.simplex(i - 1);
                if simplex_order(prev, self.values[i - 1], s, self.values[i]) != Ordering::Less {
                    return Err(Error::InvalidFiltration(format!(
                        "simplex {i} ({s:?}) is out of order or duplicated"
                    )));
                }
            }
            if s.len() < 2 {
                continue;
            }
            for skip in 0..s.len() {
                face.clear();
                face.extend(
                    s.iter()
                        .enumerate()
                        .filter(|&(k, _)| k != skip)
                        .map(|(_, &v)| v),
                );
                match index.get(&face) {
                    Some(j) if (j as usize) < i => {}
                    _ => {
                        return Err(Error::InvalidFiltration(format!(
                            "face {face:?} of {s:?} missing or not earlier"
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

/// Lookup from vertex lists of non-top simplices to filtration indices.
/// Vertices and edges use dense tables when the vertex range allows it.
struct FaceIndex<'a> {
    vertices: Vec<u32>,
    edges: Option<(usize, Vec<u32>)>,
    other: HashMap<&'a [u32], u32>,
}

const DENSE_EDGE_LIMIT: usize = 1 << 24;

impl<'a> FaceIndex<'a> {
    fn new(f: &'a SimplicialFiltration) -> Self {
        let top = f.max_dim().unwrap_or(0);
        let range = f.vertices.iter().max().map_or(0, |&v| v as usize + 1);
        let mut vertices = vec![NONE; range];
        let mut edges =
            (range * range <= DENSE_EDGE_LIMIT).then(|| (range, vec![NONE; range * range]));
        let mut other = HashMap::new();
        for i in 0..f.len() {
            let s = f.simplex(i);
            if s.len() > top {
                continue;
            }
            match (s, edges.as_mut()) {
                ([v], _) => vertices[*v as usize] = i as u32,
                ([u, v], Some((r, table))) => table[*u as usize * *r + *v as usize] = i as u32,
                _ => {
                    other.insert(s, i as u32);
                }
            }
        }
        Self {
            vertices,
            edges,
            other,
        }
    }

    fn get(&self, s: &[u32]) -> Option<u32> {
        let found = match (s, &self.edges) {
            ([v], _) => self.vertices.get(*v as usize).copied(),
            ([u, v], Some((r, table))) => table.get(*u as usize * r + *v as usize).copied(),
            _ => self.other.get(s).copied(),
        };
        found.filter(|&i| i != NONE)
    }
}

const NONE: u32 = u32::MAX;

/// Filtration value, then dimension, then lexicographic vertices.
fn simplex_order(a: &[u32], fa: f64, b: &[u32], fb: f64) -> Ordering {
    fa.total_cmp(&fb)
        .then(a.len().cmp(&b.len()))
        .then_with(|| a.cmp(b))
}

impl Filtration for SimplicialFiltration {
    fn len(&self) -> usize {
        self.values.len()
    }

    fn dim(&self, i: usize) -> usize {
        self.starts[i + 1] - self.starts[i] - 1
    }

    fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    fn boundary_matrix(&self) -> BoundaryMatrix {
        let index = self.face_index();
        let mut matrix = BoundaryMatrix::with_capacity(self.len(), self.vertices.len());
        let mut face = Vec::new();
        let mut column = Vec::new();
        for i in 0..self.len() {
            let s = self.simplex(i);
            column.clear();
            if s.len() > 1 {
                for skip in 0..s.len() {
                    face.clear();
                    face.extend(
                        s.iter()
                            .enumerate()
                            .filter(|&(k, _)| k != skip)
                            .map(|(_, &v)| v),
                    );
                    column.push(index.get(&face).expect("faces precede cofaces"));
                }
                column.sort_unstable();
            }
            matrix.push_column(&column);
        }
        matrix
    }
}

/// Vietoris-Rips filtration of `cloud` up to simplices of dimension
/// `max_dim` and diameter `max_radius`.
pub fn build_rips_filtration(
    cloud: &PointCloud,
    max_radius: f64,
    max_dim: usize,
) -> Result<SimplicialFiltration> {
    if cloud.is_empty() {
        return Err(Error::InvalidInput("point cloud is empty".into()));
    }
    if !(1..=2).contains(&max_dim) {
        return Err(Error::InvalidInput(format!(
            "max_dim must be 1 or 2, got {max_dim}"
        )));
    }
    if !(max_radius > 0.0) {
        return Err(Error::InvalidInput(format!(
            "max_radius must be positive, got {max_radius}"
        )));
    }
    let n = cloud.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = cloud.distance(i, j);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let within = |i: usize, j: usize| dist[i * n + j] <= max_radius;

    // (value, dim, vertices) records, sorted afterwards.
    let mut records: Vec<(f64, [u32; 3], u8)> =
        (0..n as u32).map(|v| (0.0, [v, 0, 0], 0)).collect();
    for i in 0..n {
        for j in i + 1..n {
            if within(i, j) {
                records.push((dist[i * n + j], [i as u32, j as u32, 0], 1));
            }
        }
    }
    if max_dim >= 2 {
        for i in 0..n {
            for j in i + 1..n {
                if !within(i, j) {
                    continue;
                }
                let dij = dist[i * n + j];
                for k in j + 1..n {
                    if within(i, k) && within(j, k) {
                        let value = dij.max(dist[i * n + k]).max(dist[j * n + k]);
                        records.push((value, [i as u32, j as u32, k as u32], 2));
                    }
                }
            }
        }
    }
    records.sort_unstable_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.2.cmp(&b.2))
            .then_with(|| a.1[..=a.2 as usize].cmp(&b.1[..=b.2 as usize]))
    });

    let total_vertices = records.iter().map(|r| r.2 as usize + 1).sum();
    let mut filtration = SimplicialFiltration::with_capacity(records.len(), total_vertices);
    for (value, verts, dim) in &records {
        filtration.push(&verts[..=*dim as usize], *value);
    }
    Ok(filtration)
}

//! Fixed-length encodings of diagrams against a codebook.
//!
//! [`encode_pbow`] counts hard nearest-center assignments, [`encode_spbow`]
//! sums mixture-weighted densities. Both feed the same signed square root and
//! L2 normalization.

mod kdtree;
mod stability;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use kdtree::KdTree;
pub use stability::{
    lipschitz_constant, lipschitz_grid, stability_certificate, StabilityCertificate,
};

use crate::codebook::{Codebook, CodebookModel, GmmCodebook, GmmComponent, KmeansCodebook};
use crate::error::{Error, Result};
use crate::gaussian::{Gaussian2, Matrix2};
use crate::persistence::{Diagram, Point};

#[inline]
pub fn squared_distance(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Nearest center by exhaustive scan, returning `(index, squared distance)`.
/// The lowest index wins ties. Panics on an empty center list.
pub fn nearest_center_linear(x: &Point, centers: &[Point]) -> (usize, f64) {
    assert!(!centers.is_empty(), "nearest center of an empty codebook");
    let mut best = (0, squared_distance(x, &centers[0]));
    for (i, c) in centers.iter().enumerate().skip(1) {
        let d2 = squared_distance(x, c);
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    best
}

/// Index of the Euclidean-nearest codebook center.
pub fn nearest_center(x: &Point, cb: &KmeansCodebook) -> usize {
    nearest_center_linear(x, &cb.centers).0
}

/// An encoded diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// Id of the codebook that produced the vector; empty when unknown.
    #[serde(default)]
    pub codebook_id: String,
    pub normalized: bool,
}

impl FeatureVector {
    pub fn raw(values: Vec<f64>) -> Self {
        Self {
            values,
            codebook_id: String::new(),
            normalized: false,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_codebook_id(mut self, id: impl Into<String>) -> Self {
        self.codebook_id = id.into();
        self
    }
}

fn counts_with(b: &Diagram, n: usize, nearest: impl Fn(&Point) -> usize) -> Vec<f64> {
    let mut counts = vec![0.0; n];
    for p in &b.points {
        counts[nearest(p)] += 1.0;
    }
    counts
}

/// Raw nearest-center counts; they sum to `|B|`.
pub fn encode_pbow(b: &Diagram, cb: &KmeansCodebook) -> FeatureVector {
    let tree = KdTree::new(&cb.centers);
    encode_pbow_with(b, &tree)
}

/// [`encode_pbow`] against a prebuilt tree.
pub fn encode_pbow_with(b: &Diagram, tree: &KdTree) -> FeatureVector {
    FeatureVector::raw(counts_with(b, tree.len(), |p| {
        tree.nearest(p).expect("non-empty codebook").0
    }))
}

/// [`encode_pbow`] by linear scan.
pub fn encode_pbow_linear(b: &Diagram, cb: &KmeansCodebook) -> FeatureVector {
    FeatureVector::raw(counts_with(b, cb.centers.len(), |p| nearest_center(p, cb)))
}

/// Signed square root of every component followed by L2 normalization.
/// The zero vector is returned unchanged.
pub fn normalize(v: &FeatureVector) -> FeatureVector {
    let mut values: Vec<f64> = v
        .values
        .iter()
        .map(|&c| c.signum() * c.abs().sqrt())
        .collect();
    for x in values.iter_mut() {
        if *x == 0.0 {
            *x = 0.0;
        }
    }
    let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in values.iter_mut() {
            *x /= norm;
        }
    }
    FeatureVector {
        values,
        codebook_id: v.codebook_id.clone(),
        normalized: true,
    }
}

/// Bivariate normal density `exp(-½ dᵀΣ⁻¹d) / (2π |Σ|^{1/2})`.
pub fn gaussian_pdf(x: &Point, mean: &Point, cov: &Matrix2) -> Result<f64> {
    Ok(Gaussian2::new(*mean, *cov)?.pdf(x))
}

/// Raw soft-assignment vector: `w_i Σ_x p_i(x)`.
pub fn encode_spbow(b: &Diagram, cb: &GmmCodebook) -> Result<FeatureVector> {
    let gaussians = cb.gaussians()?;
    Ok(encode_spbow_with(b, &cb.components, &gaussians))
}

fn encode_spbow_with(
    b: &Diagram,
    comps: &[GmmComponent],
    gaussians: &[Gaussian2],
) -> FeatureVector {
    let values = comps
        .iter()
        .zip(gaussians)
        .map(|(c, g)| c.weight * b.points.iter().map(|x| g.pdf(x)).sum::<f64>())
        .collect();
    FeatureVector::raw(values)
}

/// A codebook prepared for repeated encoding.
#[derive(Debug, Clone)]
pub enum Encoder {
    Pbow {
        tree: KdTree,
        id: String,
    },
    Spbow {
        components: Vec<GmmComponent>,
        gaussians: Vec<Gaussian2>,
        id: String,
    },
}

impl Encoder {
    pub fn new(cb: &Codebook) -> Result<Self> {
        let id = cb.id();
        match &cb.model {
            CodebookModel::Kmeans { centers, .. } => {
                if centers.is_empty() {
                    return Err(Error::InvalidInput("empty codebook".into()));
                }
                Ok(Self::Pbow {
                    tree: KdTree::new(centers),
                    id,
                })
            }
            CodebookModel::Gmm { components, .. } => {
                let gaussians = components
                    .iter()
                    .map(GmmComponent::gaussian)
                    .collect::<Result<_>>()?;
                Ok(Self::Spbow {
                    components: components.clone(),
                    gaussians,
                    id,
                })
            }
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Self::Pbow { tree, .. } => tree.len(),
            Self::Spbow { components, .. } => components.len(),
        }
    }

    pub fn id(&self) -> &str {
        match self {
            Self::Pbow { id, .. } | Self::Spbow { id, .. } => id,
        }
    }

    /// Raw (unnormalized) encoding.
    pub fn encode_raw(&self, b: &Diagram) -> FeatureVector {
        let v = match self {
            Self::Pbow { tree, .. } => encode_pbow_with(b, tree),
            Self::Spbow {
                components,
                gaussians,
                ..
            } => encode_spbow_with(b, components, gaussians),
        };
        v.with_codebook_id(self.id())
    }

    /// Raw encoding followed by [`normalize`].
    pub fn encode(&self, b: &Diagram) -> FeatureVector {
        normalize(&self.encode_raw(b))
    }

    /// Normalized encodings of many diagrams, in input order.
    pub fn encode_all(&self, diagrams: &[Diagram]) -> Vec<FeatureVector> {
        diagrams.par_iter().map(|d| self.encode(d)).collect()
    }
}

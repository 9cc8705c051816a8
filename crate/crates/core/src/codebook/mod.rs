//! Codebook learning: consolidation of training diagrams, persistence-weighted
//! subsampling, and hard (k-means) or soft (GMM) clustering.

mod gmm;
mod kmeans;
mod sampling;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use gmm::{default_regularization, fit_gmm, GmmCodebook, GmmComponent, GmmOptions};
pub use kmeans::{fit_kmeans, KmeansCodebook};
pub use sampling::{
    quantile, quantile_bounds, subsample, weight_value, SamplingConfig, WeightBounds,
};

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::persistence::Diagram;

/// Multiset union of diagrams sharing one homology dimension.
pub fn consolidate<'a, I>(diagrams: I) -> Result<Diagram>
where
    I: IntoIterator<Item = &'a Diagram>,
{
    let mut iter = diagrams.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::InvalidInput("no diagrams to consolidate".into()))?;
    let mut out = first.clone();
    for d in iter {
        if d.dim != out.dim {
            return Err(Error::InvalidInput(format!(
                "cannot consolidate dimension {} with dimension {}",
                d.dim, out.dim
            )));
        }
        out.points.extend_from_slice(&d.points);
    }
    Ok(out)
}

/// The fitted clustering model behind a codebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CodebookModel {
    Kmeans {
        #[serde(rename = "N")]
        n: usize,
        centers: Vec<[f64; 2]>,
    },
    Gmm {
        #[serde(rename = "N")]
        n: usize,
        components: Vec<GmmComponent>,
    },
}

/// Sampling parameters as recorded alongside a codebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingRecord {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "S")]
    pub sample_size: usize,
    pub weighted: bool,
}

impl From<&SamplingConfig> for SamplingRecord {
    fn from(cfg: &SamplingConfig) -> Self {
        Self {
            a: cfg.a,
            b: cfg.b,
            sample_size: cfg.sample_size,
            weighted: cfg.weighted,
        }
    }
}

/// A codebook with the provenance needed to reproduce it; this is the JSON
/// interchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    #[serde(flatten)]
    pub model: CodebookModel,
    pub seed: u64,
    pub sampling: SamplingRecord,
}

impl Codebook {
    pub fn from_kmeans(cb: &KmeansCodebook, seed: u64, sampling: &SamplingConfig) -> Self {
        Self {
            model: CodebookModel::Kmeans {
                n: cb.centers.len(),
                centers: cb.centers.clone(),
            },
            seed,
            sampling: sampling.into(),
        }
    }

    pub fn from_gmm(cb: &GmmCodebook, seed: u64, sampling: &SamplingConfig) -> Self {
        Self {
            model: CodebookModel::Gmm {
                n: cb.components.len(),
                components: cb.components.clone(),
            },
            seed,
            sampling: sampling.into(),
        }
    }

    pub fn size(&self) -> usize {
        match &self.model {
            CodebookModel::Kmeans { centers, .. } => centers.len(),
            CodebookModel::Gmm { components, .. } => components.len(),
        }
    }

    /// Short content hash identifying this codebook.
    pub fn id(&self) -> String {
        let json = serde_json::to_vec(self).expect("codebook serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cb: Self = serde_json::from_str(s)?;
        let declared = match &cb.model {
            CodebookModel::Kmeans { n, .. } | CodebookModel::Gmm { n, .. } => *n,
        };
        if declared != cb.size() || declared == 0 {
            return Err(Error::InvalidInput(format!(
                "codebook declares N = {declared} but has {} entries",
                cb.size()
            )));
        }
        Ok(cb)
    }
}

/// Which clustering model a codebook uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodebookKind {
    Kmeans,
    Gmm,
}

impl fmt::Display for CodebookKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodebookKind::Kmeans => "kmeans",
            CodebookKind::Gmm => "gmm",
        })
    }
}

impl FromStr for CodebookKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" | "pbow" => Ok(Self::Kmeans),
            "gmm" | "spbow" => Ok(Self::Gmm),
            _ => Err(Error::InvalidInput(format!("unknown codebook type '{s}'"))),
        }
    }
}

/// Everything needed to learn a codebook from training diagrams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CodebookSpec {
    pub kind: CodebookKind,
    #[serde(rename = "N")]
    pub n: usize,
    /// Target subsample size `S`.
    pub sample_size: usize,
    pub weighted: bool,
    pub kmeans_max_iter: usize,
    pub gmm_tol: f64,
    pub gmm_max_iter: usize,
    /// Covariance eigenvalue floor; derived from the data when absent.
    pub gmm_reg: Option<f64>,
}

impl Default for CodebookSpec {
    fn default() -> Self {
        Self {
            kind: CodebookKind::Kmeans,
            n: 20,
            sample_size: 10_000,
            weighted: true,
            kmeans_max_iter: 300,
            gmm_tol: 1e-4,
            gmm_max_iter: 200,
            gmm_reg: None,
        }
    }
}

impl CodebookSpec {
    /// Consolidates `diagrams`, subsamples the union and clusters the sample.
    pub fn fit<'a, I>(&self, diagrams: I, seed: u64) -> Result<Codebook>
    where
        I: IntoIterator<Item = &'a Diagram>,
    {
        let consolidated = consolidate(diagrams)?;
        let sampling = SamplingConfig::for_diagram(
            &consolidated,
            self.sample_size,
            self.weighted,
            derive_seed(seed, 0),
        )?;
        let sample = subsample(&consolidated, &sampling)?;
        let fit_seed = derive_seed(seed, 1);
        match self.kind {
            CodebookKind::Kmeans => {
                let km = fit_kmeans(&sample, self.n, self.kmeans_max_iter, fit_seed)?;
                Ok(Codebook::from_kmeans(&km, seed, &sampling))
            }
            CodebookKind::Gmm => {
                let mut opts = GmmOptions::for_points(&sample);
                opts.tol = self.gmm_tol;
                opts.max_iter = self.gmm_max_iter;
                opts.kmeans_iter = self.kmeans_max_iter;
                if let Some(reg) = self.gmm_reg {
                    opts.reg = reg;
                }
                let gmm = fit_gmm(&sample, self.n, fit_seed, &opts)?;
                Ok(Codebook::from_gmm(&gmm, seed, &sampling))
            }
        }
    }
}

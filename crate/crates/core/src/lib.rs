//! Persistence bag-of-words: fixed-length vectorizations of persistence
//! diagrams for standard machine learning.
//!
//! The building blocks are
//! - [`persistence`]: Vietoris-Rips and cubical filtrations and their diagrams,
//! - [`metrics`]: exact Wasserstein and bottleneck distances,
//! - [`codebook`]: weighted subsampling and k-means / GMM codebooks,
//! - [`encoding`]: PBoW and stable PBoW (sPBoW) vectors,
//! - [`classify`]: linear and nearest-neighbour classifiers and the
//!   codebook-size sweep,
//! - [`datasets`] and [`io`]: synthetic shapes and file formats.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons reject NaN

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod classify;
pub mod codebook;
pub mod datasets;
pub mod encoding;
pub mod error;
pub mod gaussian;
pub mod io;
pub mod metrics;
pub mod persistence;

pub use codebook::{
    Codebook, CodebookKind, CodebookSpec, GmmCodebook, KmeansCodebook, SamplingConfig,
};
pub use encoding::{Encoder, FeatureVector, StabilityCertificate};
pub use error::{Error, Result};
pub use persistence::{BirthDeathDiagram, Diagram, PointCloud};

/// An independent seed for item `index` of a collection drawn from `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index + 1);
    rng.next_u64()
}

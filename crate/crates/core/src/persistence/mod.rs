//! Filtrations of point clouds and images, and their persistence diagrams.
//!
//! The pipeline is: build a [`SimplicialFiltration`] (Vietoris-Rips) or a
//! [`CubicalFiltration`] (grayscale image), reduce its boundary matrix over
//! Z/2 with [`compute_persistence`], then move each [`BirthDeathDiagram`] into
//! birth-persistence coordinates with [`to_birth_persistence`].

mod cubical;
mod diagram;
mod reduction;
mod rips;

pub use cubical::{build_cubical_filtration, CubicalCell, CubicalFiltration, Grid};
pub use diagram::{to_birth_persistence, BirthDeathDiagram, Diagram, InfinitePolicy, Point};
pub use reduction::{
    compute_persistence, reduce, reduce_cohomology, BoundaryMatrix, Filtration, PersistencePairs,
};
pub use rips::{build_rips_filtration, max_pairwise_distance, PointCloud, SimplicialFiltration};

use crate::error::Result;

/// Birth-persistence diagram of dimension `dim` for the Vietoris-Rips
/// filtration of `cloud`. The radius defaults to the largest pairwise
/// distance, so the complex is complete up to dimension `dim + 1`.
pub fn rips_diagram(cloud: &PointCloud, dim: usize, max_radius: Option<f64>) -> Result<Diagram> {
    let radius = match max_radius {
        Some(r) => r,
        None => max_pairwise_distance(cloud).max(f64::MIN_POSITIVE),
    };
    let filtration = build_rips_filtration(cloud, radius, (dim + 1).clamp(1, 2))?;
    let bd = compute_persistence(&filtration, &[dim]).remove(0);
    Ok(to_birth_persistence(&bd, InfinitePolicy::Ignore))
}

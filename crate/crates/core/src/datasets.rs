//! The six-class synthetic shape dataset and labeled diagram collections.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::persistence::{Diagram, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeClass {
    Cube,
    Circle,
    Sphere,
    Clusters,
    ClustersInClusters,
    Torus,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 6] = [
        ShapeClass::Cube,
        ShapeClass::Circle,
        ShapeClass::Sphere,
        ShapeClass::Clusters,
        ShapeClass::ClustersInClusters,
        ShapeClass::Torus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeClass::Cube => "cube",
            ShapeClass::Circle => "circle",
            ShapeClass::Sphere => "sphere",
            ShapeClass::Clusters => "clusters",
            ShapeClass::ClustersInClusters => "clusters-in-clusters",
            ShapeClass::Torus => "torus",
        }
    }

    pub fn label(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).expect("listed")
    }

    pub fn from_label(label: usize) -> Option<Self> {
        Self::ALL.get(label).copied()
    }
}

impl fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown shape class '{s}'")))
    }
}

/// Geometry of the base shapes. All shapes live at the scale of the unit cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    pub circle_radius: f64,
    pub sphere_radius: f64,
    pub torus_major_radius: f64,
    pub torus_minor_radius: f64,
    pub clusters: usize,
    /// Spread of the minor cluster centers around their major center.
    pub minor_center_sigma: f64,
}

impl Default for ShapeParams {
    fn default() -> Self {
        Self {
            circle_radius: 0.5,
            sphere_radius: 0.5,
            torus_major_radius: 0.5,
            torus_minor_radius: 0.25,
            clusters: 3,
            minor_center_sigma: 0.05,
        }
    }
}

fn uniform_cube(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.random(), rng.random(), rng.random()]
}

fn base_points(
    class: ShapeClass,
    n: usize,
    params: &ShapeParams,
    rng: &mut ChaCha8Rng,
) -> Vec<[f64; 3]> {
    match class {
        ShapeClass::Cube => (0..n).map(|_| uniform_cube(rng)).collect(),
        ShapeClass::Circle => (0..n)
            .map(|_| {
                let t = rng.random::<f64>() * TAU;
                [
                    params.circle_radius * t.cos(),
                    params.circle_radius * t.sin(),
                    0.0,
                ]
            })
            .collect(),
        ShapeClass::Sphere => (0..n)
            .map(|_| loop {
                let v: [f64; 3] = [
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                ];
                let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if norm > 1e-12 {
                    let s = params.sphere_radius / norm;
                    break [v[0] * s, v[1] * s, v[2] * s];
                }
            })
            .collect(),
        ShapeClass::Clusters => {
            let centers: Vec<[f64; 3]> = (0..params.clusters).map(|_| uniform_cube(rng)).collect();
            (0..n).map(|i| centers[i % centers.len()]).collect()
        }
        ShapeClass::ClustersInClusters => {
            let spread = Normal::new(0.0, params.minor_center_sigma).expect("finite sigma");
            let majors: Vec<[f64; 3]> = (0..params.clusters).map(|_| uniform_cube(rng)).collect();
            let minors: Vec<[f64; 3]> = majors
                .iter()
                .flat_map(|m| {
                    (0..params.clusters)
                        .map(|_| {
                            [
                                m[0] + spread.sample(rng),
                                m[1] + spread.sample(rng),
                                m[2] + spread.sample(rng),
                            ]
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            (0..n).map(|i| minors[i % minors.len()]).collect()
        }
        ShapeClass::Torus => {
            let (big_r, r) = (params.torus_major_radius, params.torus_minor_radius);
            (0..n)
                .map(|_| loop {
                    let u = rng.random::<f64>() * TAU;
                    let v = rng.random::<f64>() * TAU;
                    // Accept with probability proportional to the area element.
                    if rng.random::<f64>() * (big_r + r) <= big_r + r * v.cos() {
                        let ring = big_r + r * v.cos();
                        break [ring * u.cos(), ring * u.sin(), r * v.sin()];
                    }
                })
                .collect()
        }
    }
}

/// One cloud of `n_points` 3-d points: a base sample of `class` with every
/// point displaced by isotropic Gaussian noise of standard deviation
/// `noise_sigma`.
pub fn generate_shape(
    class: ShapeClass,
    n_points: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<PointCloud> {
    generate_shape_with(class, n_points, noise_sigma, seed, &ShapeParams::default())
}

pub fn generate_shape_with(
    class: ShapeClass,
    n_points: usize,
    noise_sigma: f64,
    seed: u64,
    params: &ShapeParams,
) -> Result<PointCloud> {
    if n_points == 0 {
        return Err(Error::InvalidInput(
            "a shape needs at least one point".into(),
        ));
    }
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::InvalidInput(format!(
            "noise sigma must be finite and >= 0, got {noise_sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = base_points(class, n_points, params, &mut rng);
    let mut coords = Vec::with_capacity(3 * n_points);
    for p in base {
        for c in p {
            let z: f64 = if noise_sigma > 0.0 {
                StandardNormal.sample(&mut rng)
            } else {
                0.0
            };
            coords.push(c + noise_sigma * z);
        }
    }
    PointCloud::from_flat(3, coords)
}

/// A labeled point cloud of the synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCloud {
    pub cloud: PointCloud,
    pub class: ShapeClass,
    pub seed: u64,
}

impl LabeledCloud {
    pub fn label(&self) -> usize {
        self.class.label()
    }
}

/// `clouds_per_class` clouds of every class, grouped by class in
/// [`ShapeClass::ALL`] order, each with its own derived seed.
pub fn generate_dataset(
    clouds_per_class: usize,
    points_per_cloud: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<LabeledCloud>> {
    generate_dataset_with(
        clouds_per_class,
        points_per_cloud,
        noise_sigma,
        seed,
        &ShapeParams::default(),
    )
}

pub fn generate_dataset_with(
    clouds_per_class: usize,
    points_per_cloud: usize,
    noise_sigma: f64,
    seed: u64,
    params: &ShapeParams,
) -> Result<Vec<LabeledCloud>> {
    if clouds_per_class == 0 || points_per_cloud == 0 {
        return Err(Error::InvalidInput("dataset sizes must be positive".into()));
    }
    let jobs: Vec<(ShapeClass, u64)> = ShapeClass::ALL
        .iter()
        .flat_map(|&class| {
            (0..clouds_per_class)
                .map(move |k| (class, (class.label() * clouds_per_class + k) as u64))
        })
        .collect();
    jobs.into_par_iter()
        .map(|(class, index)| {
            let s = derive_seed(seed, index);
            let cloud = generate_shape_with(class, points_per_cloud, noise_sigma, s, params)?;
            Ok(LabeledCloud {
                cloud,
                class,
                seed: s,
            })
        })
        .collect()
}

/// Diagrams with integer class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDiagramSet {
    pub entries: Vec<(Diagram, usize)>,
    pub class_names: Vec<String>,
}

impl LabeledDiagramSet {
    pub fn new(entries: Vec<(Diagram, usize)>, class_names: Vec<String>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("labeled diagram set is empty".into()));
        }
        if let Some((_, l)) = entries.iter().find(|(_, l)| *l >= class_names.len()) {
            return Err(Error::InvalidInput(format!(
                "label {l} out of range for {} classes",
                class_names.len()
            )));
        }
        Ok(Self {
            entries,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|(_, l)| *l).collect()
    }

    pub fn diagrams(&self) -> Vec<&Diagram> {
        self.entries.iter().map(|(d, _)| d).collect()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }
}

/// One cloud listed in a dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub label: usize,
    pub class: String,
    pub seed: u64,
}

/// On-disk description of a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub class_names: Vec<String>,
    pub clouds_per_class: usize,
    pub points_per_cloud: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub shape_params: ShapeParams,
    pub clouds: Vec<ManifestEntry>,
}

pub fn class_names() -> Vec<String> {
    ShapeClass::ALL
        .iter()
        .map(|c| c.name().to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm3(p: &[f64]) -> f64 {
        (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
    }

    #[test]
    fn noiseless_circle_and_sphere() {
        let c = generate_shape(ShapeClass::Circle, 200, 0.0, 4).unwrap();
        assert!(c
            .points()
            .all(|p| (norm3(p) - 0.5).abs() < 1e-12 && p[2] == 0.0));
        let s = generate_shape(ShapeClass::Sphere, 200, 0.0, 4).unwrap();
        assert!(s.points().all(|p| (norm3(p) - 0.5).abs() < 1e-12));
    }

    #[test]
    fn noiseless_torus_equation() {
        let t = generate_shape(ShapeClass::Torus, 300, 0.0, 1).unwrap();
        for p in t.points() {
            let ring = (p[0] * p[0] + p[1] * p[1]).sqrt() - 0.5;
            assert!((ring * ring + p[2] * p[2] - 0.0625).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_clusters_collapse() {
        let c = generate_shape(ShapeClass::Clusters, 30, 0.0, 2).unwrap();
        let mut pts: Vec<Vec<f64>> = c.points().map(|p| p.to_vec()).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        assert_eq!(pts.len(), 3);
        let h = generate_shape(ShapeClass::ClustersInClusters, 90, 0.0, 2).unwrap();
        let mut pts: Vec<Vec<f64>> = h.points().map(|p| p.to_vec()).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        assert_eq!(pts.len(), 9);
    }

    #[test]
    fn seeds_control_output() {
        for class in ShapeClass::ALL {
            let a = generate_shape(class, 50, 0.1, 7).unwrap();
            assert_eq!(a, generate_shape(class, 50, 0.1, 7).unwrap());
            assert_ne!(a, generate_shape(class, 50, 0.1, 8).unwrap());
        }
    }

    #[test]
    fn dataset_is_balanced() {
        let ds = generate_dataset(2, 10, 0.1, 3).unwrap();
        assert_eq!(ds.len(), 12);
        for class in ShapeClass::ALL {
            assert_eq!(ds.iter().filter(|c| c.class == class).count(), 2);
        }
        let mut seeds: Vec<u64> = ds.iter().map(|c| c.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 12);
    }

    #[test]
    fn class_names_round_trip() {
        for class in ShapeClass::ALL {
            assert_eq!(class.name().parse::<ShapeClass>().unwrap(), class);
            assert_eq!(ShapeClass::from_label(class.label()), Some(class));
        }
        assert!("cone".parse::<ShapeClass>().is_err());
    }

    #[test]
    fn labeled_set_validates() {
        assert!(LabeledDiagramSet::new(vec![], vec!["a".into()]).is_err());
        assert!(
            LabeledDiagramSet::new(vec![(Diagram::empty(1), 2)], vec!["a".into(), "b".into()])
                .is_err()
        );
        assert!(
            LabeledDiagramSet::new(vec![(Diagram::empty(1), 1)], vec!["a".into(), "b".into()])
                .is_ok()
        );
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{nearest_center_linear, squared_distance};
use crate::error::{Error, Result};
use crate::persistence::Point;

/// Hard-assignment codebook: k-means centers in the birth-persistence plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansCodebook {
    pub centers: Vec<Point>,
    pub iterations_run: usize,
    /// Inertia (sum of squared distances to the assigned center) after each
    /// assignment step.
    pub inertia_history: Vec<f64>,
}

impl KmeansCodebook {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }
}

pub(crate) fn distinct_count(points: &[Point]) -> usize {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    sorted.dedup();
    sorted.len()
}

fn kmeans_plus_plus(points: &[Point], n: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let mut centers = Vec::with_capacity(n);
    centers.push(points[rng.random_range(0..points.len())]);
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centers[0]))
        .collect();
    while centers.len() < n {
        let total: f64 = d2.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        // Fall back to the last positive-weight point if rounding overshoots.
        let mut pick = d2
            .iter()
            .rposition(|&w| w > 0.0)
            .expect("distinct points remain");
        for (i, &w) in d2.iter().enumerate() {
            acc += w;
            if w > 0.0 && acc > target {
                pick = i;
                break;
            }
        }
        let c = points[pick];
        centers.push(c);
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(squared_distance(p, &c));
        }
    }
    centers
}

fn assign(points: &[Point], centers: &[Point]) -> Vec<(usize, f64)> {
    points
        .par_iter()
        .with_min_len(512)
        .map(|p| nearest_center_linear(p, centers))
        .collect()
}

/// Lloyd's algorithm from a k-means++ seeding. Stops at an assignment fixpoint
/// or after `max_iter` assignment steps. Empty clusters are re-seeded at the
/// point farthest from its center.
pub fn fit_kmeans(
    points: &[Point],
    n: usize,
    max_iter: usize,
    seed: u64,
) -> Result<KmeansCodebook> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "number of clusters must be >= 1".into(),
        ));
    }
    if n > points.len() {
        return Err(Error::TooFewPoints {
            requested: n,
            available: points.len(),
        });
    }
    let distinct = distinct_count(points);
    if n > distinct {
        return Err(Error::TooFewPoints {
            requested: n,
            available: distinct,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_plus_plus(points, n, &mut rng);
    let mut labels: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iter.max(1) {
        let assigned = assign(points, &centers);
        iterations += 1;
        history.push(assigned.iter().map(|&(_, d)| d).sum());
        let new_labels: Vec<usize> = assigned.iter().map(|&(c, _)| c).collect();
        if new_labels == labels {
            break;
        }
        labels = new_labels;

        let mut sums = vec![[0.0f64; 2]; n];
        let mut counts = vec![0usize; n];
        for (p, &c) in points.iter().zip(&labels) {
            sums[c][0] += p[0];
            sums[c][1] += p[1];
            counts[c] += 1;
        }
        for c in 0..n {
            if counts[c] > 0 {
                centers[c] = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            }
        }
        if counts.contains(&0) {
            let mut dists: Vec<f64> = points
                .iter()
                .zip(&labels)
                .map(|(p, &c)| squared_distance(p, &centers[c]))
                .collect();
            for c in 0..n {
                if counts[c] > 0 {
                    continue;
                }
                let far = (0..points.len())
                    .fold(0, |best, i| if dists[i] > dists[best] { i } else { best });
                let p = points[far];
                centers[c] = p;
                counts[labels[far]] -= 1;
                labels[far] = c;
                counts[c] = 1;
                // Duplicates of the new center must not seed another cluster.
                for (d, q) in dists.iter_mut().zip(points) {
                    if *q == p {
                        *d = 0.0;
                    }
                }
            }
        }
    }
    Ok(KmeansCodebook {
        centers,
        iterations_run: iterations,
        inertia_history: history,
    })
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kmeans::fit_kmeans;
use crate::encoding::nearest_center_linear;
use crate::error::{Error, Result};
use crate::gaussian::{clip_eigenvalues, Gaussian2, Matrix2};
use crate::persistence::Point;

/// One Gaussian of a soft codebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Point,
    pub covariance: Matrix2,
}

impl GmmComponent {
    pub fn gaussian(&self) -> Result<Gaussian2> {
        Gaussian2::new(self.mean, self.covariance)
    }
}

/// Soft-assignment codebook: a Gaussian mixture fitted by EM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmCodebook {
    pub components: Vec<GmmComponent>,
    pub iterations_run: usize,
    /// Total log-likelihood of the training points after each E-step.
    pub log_likelihood_history: Vec<f64>,
}

impl GmmCodebook {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn gaussians(&self) -> Result<Vec<Gaussian2>> {
        self.components.iter().map(GmmComponent::gaussian).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmOptions {
    /// Floor for covariance eigenvalues.
    pub reg: f64,
    /// EM stops once the mean per-point log-likelihood improves by less
    /// than this.
    pub tol: f64,
    pub max_iter: usize,
    /// Lloyd iterations for the k-means initialization.
    pub kmeans_iter: usize,
}

impl GmmOptions {
    pub fn for_points(points: &[Point]) -> Self {
        Self {
            reg: default_regularization(points),
            tol: 1e-4,
            max_iter: 200,
            kmeans_iter: 100,
        }
    }
}

/// `1e-6` times the mean per-coordinate variance of the data.
pub fn default_regularization(points: &[Point]) -> f64 {
    if points.is_empty() {
        return 1e-12;
    }
    let n = points.len() as f64;
    let mut var = 0.0;
    for k in 0..2 {
        let mean = points.iter().map(|p| p[k]).sum::<f64>() / n;
        var += points
            .iter()
            .map(|p| (p[k] - mean) * (p[k] - mean))
            .sum::<f64>()
            / n;
    }
    let reg = 1e-6 * var / 2.0;
    if reg > 0.0 {
        reg
    } else {
        1e-12
    }
}

/// Below this responsibility mass a component keeps its previous parameters.
const MIN_MASS: f64 = 1e-10;

fn weighted_moments(points: &[Point], resp: impl Fn(usize) -> f64) -> (f64, Point, Matrix2) {
    let mut all = mixture_moments(points, 1, |i, _| resp(i));
    all.pop().expect("one component")
}

/// Mass, mean and covariance of each of `k` components under the weights
/// `resp(i, j)`, accumulated over points in order.
fn mixture_moments(
    points: &[Point],
    k: usize,
    resp: impl Fn(usize, usize) -> f64,
) -> Vec<(f64, Point, Matrix2)> {
    let mut mass = vec![0.0; k];
    let mut sum = vec![[0.0; 2]; k];
    for (i, p) in points.iter().enumerate() {
        for j in 0..k {
            let r = resp(i, j);
            mass[j] += r;
            sum[j][0] += r * p[0];
            sum[j][1] += r * p[1];
        }
    }
    let mean: Vec<Point> = (0..k)
        .map(|j| {
            if mass[j] > 0.0 {
                [sum[j][0] / mass[j], sum[j][1] / mass[j]]
            } else {
                [0.0; 2]
            }
        })
        .collect();
    let mut cov = vec![[[0.0; 2]; 2]; k];
    for (i, p) in points.iter().enumerate() {
        for j in 0..k {
            let r = resp(i, j);
            let d = [p[0] - mean[j][0], p[1] - mean[j][1]];
            cov[j][0][0] += r * d[0] * d[0];
            cov[j][0][1] += r * d[0] * d[1];
            cov[j][1][1] += r * d[1] * d[1];
        }
    }
    (0..k)
        .map(|j| {
            if mass[j] <= 0.0 {
                return (0.0, [0.0; 2], [[0.0; 2]; 2]);
            }
            let c = cov[j];
            let (xx, xy, yy) = (c[0][0] / mass[j], c[0][1] / mass[j], c[1][1] / mass[j]);
            (mass[j], mean[j], [[xx, xy], [xy, yy]])
        })
        .collect()
}

/// Normalized responsibilities (row per point) and total log-likelihood.
fn e_step(points: &[Point], comps: &[GmmComponent], resp: &mut [f64]) -> Result<f64> {
    let k = comps.len();
    let gaussians: Vec<Gaussian2> = comps
        .iter()
        .map(GmmComponent::gaussian)
        .collect::<Result<_>>()?;
    let log_c: Vec<f64> = comps
        .iter()
        .zip(&gaussians)
        .map(|(c, g)| c.weight.ln() + g.log_normalizer())
        .collect();
    let per_point: Vec<f64> = resp
        .par_chunks_mut(k)
        .zip(points.par_iter())
        .with_min_len(256)
        .map(|(row, p)| {
            let mut max = f64::NEG_INFINITY;
            for j in 0..k {
                row[j] = log_c[j] - 0.5 * gaussians[j].mahalanobis2(p);
                max = max.max(row[j]);
            }
            let mut s = 0.0;
            for r in row.iter_mut() {
                *r = (*r - max).exp();
                s += *r;
            }
            for r in row.iter_mut() {
                *r /= s;
            }
            max + s.ln()
        })
        .collect();
    // Sequential sum keeps the result independent of the thread schedule.
    Ok(per_point.iter().sum())
}

/// EM for a full-covariance Gaussian mixture, initialized from k-means.
///
/// Covariance eigenvalues are clipped from below at `reg` in every M-step,
/// which is the exact constrained maximizer, so the log-likelihood sequence is
/// non-decreasing.
pub fn fit_gmm(points: &[Point], n: usize, seed: u64, opts: &GmmOptions) -> Result<GmmCodebook> {
    if !(opts.reg > 0.0) {
        return Err(Error::InvalidInput(format!(
            "regularization must be positive, got {}",
            opts.reg
        )));
    }
    if n > points.len() {
        return Err(Error::TooFewPoints {
            requested: n,
            available: points.len(),
        });
    }
    let km = fit_kmeans(points, n, opts.kmeans_iter, seed)?;
    let labels: Vec<usize> = points
        .iter()
        .map(|p| nearest_center_linear(p, &km.centers).0)
        .collect();
    let total = points.len() as f64;
    let mut comps: Vec<GmmComponent> = (0..n)
        .map(|c| {
            let (mass, mean, cov) =
                weighted_moments(points, |i| if labels[i] == c { 1.0 } else { 0.0 });
            let mean = if mass > 0.0 { mean } else { km.centers[c] };
            GmmComponent {
                weight: mass.max(1.0) / total,
                mean,
                covariance: clip_eigenvalues(&cov, opts.reg),
            }
        })
        .collect();
    normalize_weights(&mut comps);

    let mut resp = vec![0.0; points.len() * n];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let ll = e_step(points, &comps, &mut resp)?;
        let converged = history
            .last()
            .is_some_and(|&prev: &f64| (ll - prev) / total < opts.tol);
        history.push(ll);
        if converged || iterations >= opts.max_iter {
            break;
        }
        iterations += 1;
        let moments = mixture_moments(points, n, |i, j| resp[i * n + j]);
        for (comp, (mass, mean, cov)) in comps.iter_mut().zip(moments) {
            if mass < MIN_MASS {
                comp.weight = MIN_MASS / total;
                continue;
            }
            comp.weight = mass / total;
            comp.mean = mean;
            comp.covariance = clip_eigenvalues(&cov, opts.reg);
        }
        normalize_weights(&mut comps);
    }
    Ok(GmmCodebook {
        components: comps,
        iterations_run: iterations,
        log_likelihood_history: history,
    })
}

fn normalize_weights(comps: &mut [GmmComponent]) {
    let s: f64 = comps.iter().map(|c| c.weight).sum();
    for c in comps.iter_mut() {
        c.weight /= s;
    }
}

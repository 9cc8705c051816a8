//! Bivariate Gaussian densities and 2x2 symmetric matrix helpers.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::persistence::Point;

pub type Matrix2 = [[f64; 2]; 2];

/// A 2-d normal density with cached inverse and determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian2 {
    mean: Point,
    cov: Matrix2,
    inv: Matrix2,
    det: f64,
}

impl Gaussian2 {
    pub fn new(mean: Point, cov: Matrix2) -> Result<Self> {
        let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
        let symmetric =
            (cov[0][1] - cov[1][0]).abs() <= 1e-12 * (cov[0][0].abs() + cov[1][1].abs());
        if !(det > 0.0) || !(cov[0][0] > 0.0) || !symmetric || !det.is_finite() {
            return Err(Error::SingularCovariance);
        }
        let inv = [
            [cov[1][1] / det, -cov[0][1] / det],
            [-cov[1][0] / det, cov[0][0] / det],
        ];
        Ok(Self {
            mean,
            cov,
            inv,
            det,
        })
    }

    pub fn mean(&self) -> Point {
        self.mean
    }

    pub fn covariance(&self) -> Matrix2 {
        self.cov
    }

    /// Squared Mahalanobis distance of `x` from the mean.
    pub fn mahalanobis2(&self, x: &Point) -> f64 {
        let dx = x[0] - self.mean[0];
        let dy = x[1] - self.mean[1];
        dx * (self.inv[0][0] * dx + self.inv[0][1] * dy)
            + dy * (self.inv[1][0] * dx + self.inv[1][1] * dy)
    }

    pub fn normalizer(&self) -> f64 {
        1.0 / (2.0 * PI * self.det.sqrt())
    }

    pub fn pdf(&self, x: &Point) -> f64 {
        (-0.5 * self.mahalanobis2(x)).exp() * self.normalizer()
    }

    /// `ln` of [`Self::normalizer`].
    pub fn log_normalizer(&self) -> f64 {
        -(2.0 * PI).ln() - 0.5 * self.det.ln()
    }

    pub fn log_pdf(&self, x: &Point) -> f64 {
        -0.5 * self.mahalanobis2(x) + self.log_normalizer()
    }

    /// Gradient of the density: `-p(x) * inv(cov) * (x - mean)`.
    pub fn gradient(&self, x: &Point) -> [f64; 2] {
        let dx = x[0] - self.mean[0];
        let dy = x[1] - self.mean[1];
        let p = self.pdf(x);
        [
            -p * (self.inv[0][0] * dx + self.inv[0][1] * dy),
            -p * (self.inv[1][0] * dx + self.inv[1][1] * dy),
        ]
    }

    /// Square root of the largest covariance eigenvalue.
    pub fn max_std(&self) -> f64 {
        symmetric_eigen(&self.cov).0[0].sqrt()
    }
}

/// Eigenvalues (descending) and unit eigenvectors of a symmetric 2x2 matrix.
pub fn symmetric_eigen(m: &Matrix2) -> ([f64; 2], [[f64; 2]; 2]) {
    let (a, b, c) = (m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]);
    let mid = 0.5 * (a + c);
    let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (l1, l2) = (mid + radius, mid - radius);
    if b == 0.0 {
        return if a >= c {
            ([a, c], [[1.0, 0.0], [0.0, 1.0]])
        } else {
            ([c, a], [[0.0, 1.0], [1.0, 0.0]])
        };
    }
    // Pick the better-conditioned of the two equivalent forms.
    let v = if (l1 - a).abs() > (l1 - c).abs() {
        [b, l1 - a]
    } else {
        [l1 - c, b]
    };
    let norm = v[0].hypot(v[1]);
    let v1 = [v[0] / norm, v[1] / norm];
    ([l1, l2], [v1, [-v1[1], v1[0]]])
}

/// Raises every eigenvalue of a symmetric matrix to at least `floor`.
/// Matrices already above the floor are returned unchanged.
pub fn clip_eigenvalues(m: &Matrix2, floor: f64) -> Matrix2 {
    let sym = [
        [m[0][0], 0.5 * (m[0][1] + m[1][0])],
        [0.5 * (m[0][1] + m[1][0]), m[1][1]],
    ];
    let (vals, vecs) = symmetric_eigen(&sym);
    if vals[1] >= floor {
        return sym;
    }
    let mut out = [[0.0; 2]; 2];
    for k in 0..2 {
        let l = vals[k].max(floor);
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] += l * vecs[k][i] * vecs[k][j];
            }
        }
    }
    out[0][1] = 0.5 * (out[0][1] + out[1][0]);
    out[1][0] = out[0][1];
    out
}

use serde::{Deserialize, Serialize};

use crate::codebook::GmmCodebook;
use crate::error::Result;
use crate::gaussian::Gaussian2;

/// Lipschitz constants of the mixture densities with respect to the L∞ norm,
/// and the resulting bound `C = max |w_i L_i|` on raw sPBoW differences per
/// unit of 1-Wasserstein distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub lipschitz: Vec<f64>,
    #[serde(rename = "C")]
    pub c: f64,
}

/// Exact `sup_x ‖∇p(x)‖₁` for a bivariate normal density.
///
/// With `y = Σ^{-1/2}(x - μ)` the directional derivative along `u` is
/// `-p(x) (Σ^{-1/2}u)·y`, which peaks at `|y| = 1` with value
/// `e^{-1/2} sqrt(uᵀΣ⁻¹u) / (2π sqrt|Σ|)`. The L1 norm of the gradient is the
/// largest such derivative over `u ∈ {(1,1), (1,-1)}`.
pub fn lipschitz_constant(g: &Gaussian2) -> f64 {
    let cov = g.covariance();
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    // uᵀΣ⁻¹u for u = (1, ±1), using Σ⁻¹ = adj(Σ) / det.
    let q_plus = (cov[1][1] + cov[0][0] - 2.0 * cov[0][1]) / det;
    let q_minus = (cov[1][1] + cov[0][0] + 2.0 * cov[0][1]) / det;
    (-0.5f64).exp() * q_plus.max(q_minus).sqrt() * g.normalizer()
}

/// Grid estimate of `sup_x ‖∇p(x)‖₁` over a box extending `6σ` past the mean.
///
/// A `steps × steps` grid is scanned, then the best cell is repeatedly
/// re-gridded at a smaller scale until the estimate changes by less than
/// `tol` relative.
pub fn lipschitz_grid(g: &Gaussian2, steps: usize, tol: f64) -> f64 {
    let steps = steps.max(3);
    let l1 = |x: [f64; 2]| {
        let d = g.gradient(&x);
        d[0].abs() + d[1].abs()
    };
    let scan = |center: [f64; 2], half: f64| {
        let h = 2.0 * half / (steps - 1) as f64;
        let mut best = (f64::NEG_INFINITY, center);
        for i in 0..steps {
            for j in 0..steps {
                let x = [
                    center[0] - half + i as f64 * h,
                    center[1] - half + j as f64 * h,
                ];
                let v = l1(x);
                if v > best.0 {
                    best = (v, x);
                }
            }
        }
        (best, h)
    };
    let ((mut value, mut at), mut h) = scan(g.mean(), 6.0 * g.max_std());
    loop {
        let ((v, x), h_next) = scan(at, h);
        let change = (v - value).abs() / value.max(f64::MIN_POSITIVE);
        value = value.max(v);
        at = x;
        h = h_next;
        if change < tol || h < 1e-15 * g.max_std() {
            return value;
        }
    }
}

/// Per-component Lipschitz constants and the bound constant `C`.
pub fn stability_certificate(cb: &GmmCodebook) -> Result<StabilityCertificate> {
    let mut lipschitz = Vec::with_capacity(cb.components.len());
    let mut c = 0.0f64;
    for comp in &cb.components {
        let l = lipschitz_constant(&comp.gaussian()?);
        c = c.max((comp.weight * l).abs());
        lipschitz.push(l);
    }
    Ok(StabilityCertificate { lipschitz, c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ray_search(g: &Gaussian2) -> f64 {
        // Dense 1-d search along the diagonal directions out of the mean.
        let mut best = 0.0f64;
        let s = g.max_std();
        for dir in [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]] {
            for k in 0..=600_000 {
                let t = k as f64 * 6.0 * s / 600_000.0;
                let x = [g.mean()[0] + dir[0] * t, g.mean()[1] + dir[1] * t];
                let d = g.gradient(&x);
                best = best.max(d[0].abs() + d[1].abs());
            }
        }
        best
    }

    #[test]
    fn isotropic_matches_ray_search() {
        let sigma: f64 = 0.3;
        let g = Gaussian2::new([0.2, 0.7], [[sigma * sigma, 0.0], [0.0, sigma * sigma]]).unwrap();
        let exact = lipschitz_constant(&g);
        let expected = (-0.5f64).exp() * 2f64.sqrt() / (2.0 * PI * sigma.powi(3));
        assert!((exact - expected).abs() <= 1e-12 * expected);
        let rays = ray_search(&g);
        assert!((rays - exact).abs() <= 1e-9 * exact, "{rays} vs {exact}");
        assert!(rays <= exact * (1.0 + 1e-12));
    }

    #[test]
    fn grid_converges_to_closed_form() {
        let covs = [
            [[0.5, 0.1], [0.1, 0.2]],
            [[0.04, -0.03], [-0.03, 0.09]],
            [[1.0, 0.0], [0.0, 1.0]],
        ];
        for cov in covs {
            let g = Gaussian2::new([1.0, -2.0], cov).unwrap();
            let exact = lipschitz_constant(&g);
            let grid = lipschitz_grid(&g, 101, 1e-6);
            assert!(grid <= exact * (1.0 + 1e-12));
            assert!((exact - grid) / exact < 1e-6, "{grid} vs {exact}");
        }
    }

    #[test]
    fn doubling_sigma_divides_by_eight() {
        let a = Gaussian2::new([0.0, 0.0], [[0.01, 0.0], [0.0, 0.01]]).unwrap();
        let b = Gaussian2::new([0.0, 0.0], [[0.04, 0.0], [0.0, 0.04]]).unwrap();
        let ratio = lipschitz_constant(&a) / lipschitz_constant(&b);
        assert!((ratio - 8.0).abs() < 1e-12);
        let grid_ratio = lipschitz_grid(&a, 101, 1e-8) / lipschitz_grid(&b, 101, 1e-8);
        assert!((grid_ratio - 8.0).abs() < 1e-5);
    }

    #[test]
    fn weights_enter_only_through_c() {
        use crate::codebook::GmmComponent;
        let comp = |w: f64, s: f64| GmmComponent {
            weight: w,
            mean: [0.0, 1.0],
            covariance: [[s, 0.0], [0.0, s]],
        };
        let a = GmmCodebook {
            components: vec![comp(0.5, 0.1), comp(0.5, 0.2)],
            iterations_run: 0,
            log_likelihood_history: vec![],
        };
        let b = GmmCodebook {
            components: vec![comp(0.9, 0.1), comp(0.1, 0.2)],
            iterations_run: 0,
            log_likelihood_history: vec![],
        };
        let ca = stability_certificate(&a).unwrap();
        let cb = stability_certificate(&b).unwrap();
        assert_eq!(ca.lipschitz, cb.lipschitz);
        assert!((ca.c - 0.5 * ca.lipschitz[0]).abs() < 1e-15);
        assert!((cb.c - 0.9 * cb.lipschitz[0]).abs() < 1e-15);
    }
}

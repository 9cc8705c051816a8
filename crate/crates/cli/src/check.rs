//! Empirical check of the sPBoW stability certificate.

use pbow_core::codebook::{GmmCodebook, GmmComponent};
use pbow_core::encoding::{encode_spbow, stability_certificate};
use pbow_core::metrics::wasserstein;
use pbow_core::{Diagram, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Outcome of `trials` perturbation pairs against one codebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    #[serde(rename = "C")]
    pub c: f64,
    pub lipschitz: Vec<f64>,
    pub trials: usize,
    /// Pairs with `‖Δraw‖∞ > C·W₁ + 1e-9`.
    pub violations: usize,
    /// Largest observed `‖Δraw‖∞ / W₁`.
    pub max_ratio: f64,
}

impl StabilityReport {
    pub fn holds(&self) -> bool {
        self.violations == 0 && self.max_ratio <= self.c * (1.0 + 1e-9)
    }
}

/// A random mixture of `n` components with means in the unit square and
/// covariance eigenvalues in `[1e-3, 5e-2]`.
pub fn random_mixture(rng: &mut ChaCha8Rng, n: usize) -> GmmCodebook {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let components = raw
        .iter()
        .map(|w| {
            let (l1, l2) = (rng.random_range(1e-3..5e-2), rng.random_range(1e-3..5e-2));
            let t: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let (c, s) = (t.cos(), t.sin());
            let off = (l1 - l2) * c * s;
            GmmComponent {
                weight: w / total,
                mean: [rng.random(), rng.random::<f64>() + 0.05],
                covariance: [
                    [l1 * c * c + l2 * s * s, off],
                    [off, l1 * s * s + l2 * c * c],
                ],
            }
        })
        .collect();
    GmmCodebook {
        components,
        iterations_run: 0,
        log_likelihood_history: vec![],
    }
}

/// Where perturbation pairs are drawn: births in `birth`, persistences in
/// `persistence` (whose lower end must be positive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub birth: (f64, f64),
    pub persistence: (f64, f64),
}

impl Region {
    /// Three standard deviations around every component, with persistence
    /// kept above a small positive floor.
    pub fn around(cb: &GmmCodebook) -> Self {
        let mut birth = (f64::INFINITY, f64::NEG_INFINITY);
        let mut pers = (f64::INFINITY, f64::NEG_INFINITY);
        for c in &cb.components {
            let (sb, sp) = (
                3.0 * c.covariance[0][0].sqrt(),
                3.0 * c.covariance[1][1].sqrt(),
            );
            birth = (birth.0.min(c.mean[0] - sb), birth.1.max(c.mean[0] + sb));
            pers = (pers.0.min(c.mean[1] - sp), pers.1.max(c.mean[1] + sp));
        }
        let floor = 0.02 * (pers.1 - pers.0).abs().max(1e-6);
        Self {
            birth,
            persistence: (pers.0.max(floor), pers.1.max(2.0 * floor)),
        }
    }
}

/// A diagram and a jittered copy of equal size. The summed L∞ jitter stays
/// below twice the smallest persistence, so every optimal 1-Wasserstein
/// matching is a bijection between the two diagrams.
pub fn perturbation_pair(
    rng: &mut ChaCha8Rng,
    region: &Region,
    max_len: usize,
) -> (Diagram, Diagram) {
    let len = rng.random_range(1..=max_len.max(1));
    let min_pers = region.persistence.0;
    let budget = 2.0 * min_pers * rng.random_range(0.01..0.99);
    let r = rng.random_range(0.0..1.0f64).powi(3) * budget / len as f64;
    let mut a = Vec::with_capacity(len);
    let mut b = Vec::with_capacity(len);
    for _ in 0..len {
        let p = [
            rng.random_range(region.birth.0..=region.birth.1),
            rng.random_range(region.persistence.0..=region.persistence.1),
        ];
        let q = [
            p[0] + rng.random_range(-r..=r),
            (p[1] + rng.random_range(-r..=r)).max(min_pers),
        ];
        a.push(p);
        b.push(q);
    }
    (Diagram::new(1, a), Diagram::new(1, b))
}

/// Compares raw sPBoW differences with the certificate on `trials` random
/// perturbation pairs.
pub fn check_stability(cb: &GmmCodebook, trials: usize, seed: u64) -> Result<StabilityReport> {
    let cert = stability_certificate(cb)?;
    let region = Region::around(cb);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = StabilityReport {
        c: cert.c,
        lipschitz: cert.lipschitz,
        trials,
        violations: 0,
        max_ratio: 0.0,
    };
    for _ in 0..trials {
        let (a, b) = perturbation_pair(&mut rng, &region, 6);
        let va = encode_spbow(&a, cb)?.values;
        let vb = encode_spbow(&b, cb)?.values;
        let delta = va
            .iter()
            .zip(&vb)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let w1 = wasserstein(&a, &b, 1.0)?;
        if delta > report.c * w1 + 1e-9 {
            report.violations += 1;
        }
        if w1 > 0.0 {
            report.max_ratio = report.max_ratio.max(delta / w1);
        }
    }
    Ok(report)
}

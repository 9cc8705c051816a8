use rand::seq::{index, IndexedRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persistence::{Diagram, Point};

/// Piecewise-linear ramp: 0 below `a`, 1 from `b` on, linear in between.
pub fn weight_value(t: f64, a: f64, b: f64) -> f64 {
    debug_assert!(a < b);
    if t < a {
        0.0
    } else if t < b {
        (t - a) / (b - a)
    } else {
        1.0
    }
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n - 1) p`). `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Ramp thresholds taken from the persistence distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightBounds {
    pub a: f64,
    pub b: f64,
    /// The 0.05 and 0.95 quantiles coincided; `a` was nudged below `b`.
    pub degenerate: bool,
}

pub const LOWER_QUANTILE: f64 = 0.05;
pub const UPPER_QUANTILE: f64 = 0.95;

/// 0.05 and 0.95 quantiles of the persistence coordinate.
pub fn quantile_bounds(d: &Diagram) -> Result<WeightBounds> {
    if d.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "quantile bounds need at least 2 points, got {}",
            d.len()
        )));
    }
    let mut pers: Vec<f64> = d.persistences().collect();
    pers.sort_by(f64::total_cmp);
    let a = quantile(&pers, LOWER_QUANTILE);
    let b = quantile(&pers, UPPER_QUANTILE);
    if a < b {
        return Ok(WeightBounds {
            a,
            b,
            degenerate: false,
        });
    }
    log::warn!("persistence quantiles coincide at {b}; weighting is undefined, sampling will be unweighted");
    let eps = 1e-9 * b.abs().max(1.0);
    Ok(WeightBounds {
        a: b - eps,
        b,
        degenerate: true,
    })
}

/// Parameters of the subsampling step that precedes clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub a: f64,
    pub b: f64,
    pub sample_size: usize,
    pub weighted: bool,
    pub seed: u64,
}

impl SamplingConfig {
    pub fn unweighted(sample_size: usize, seed: u64) -> Self {
        Self {
            a: 0.0,
            b: 1.0,
            sample_size,
            weighted: false,
            seed,
        }
    }

    pub fn weighted(a: f64, b: f64, sample_size: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            a,
            b,
            sample_size,
            weighted: true,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Derives the ramp from the quantiles of `consolidated`. Falls back to
    /// unweighted sampling when the quantiles are degenerate.
    pub fn for_diagram(
        consolidated: &Diagram,
        sample_size: usize,
        weighted: bool,
        seed: u64,
    ) -> Result<Self> {
        if !weighted || consolidated.len() < 2 {
            return Ok(Self::unweighted(sample_size, seed));
        }
        let bounds = quantile_bounds(consolidated)?;
        let cfg = Self {
            a: bounds.a,
            b: bounds.b,
            sample_size,
            weighted: !bounds.degenerate,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_size == 0 {
            return Err(Error::InvalidInput("sample size must be >= 1".into()));
        }
        if self.weighted && !(self.a < self.b) {
            return Err(Error::InvalidInput(format!(
                "weighting needs a < b, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        Ok(())
    }
}

/// Draws up to `sample_size` points without replacement, either uniformly or
/// with probability proportional to the persistence weight. The returned
/// points keep their order in `d`.
pub fn subsample(d: &Diagram, cfg: &SamplingConfig) -> Result<Vec<Point>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut chosen: Vec<usize> = if cfg.weighted {
        let pool: Vec<(usize, f64)> = d
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, weight_value(p[1], cfg.a, cfg.b)))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        if pool.is_empty() {
            return Err(Error::EmptyPool);
        }
        if cfg.sample_size >= pool.len() {
            pool.iter().map(|&(i, _)| i).collect()
        } else {
            pool.choose_multiple_weighted(&mut rng, cfg.sample_size, |&(_, w)| w)
                .map_err(|e| Error::InvalidInput(format!("weighted sampling failed: {e}")))?
                .map(|&(i, _)| i)
                .collect()
        }
    } else {
        if d.is_empty() {
            return Err(Error::EmptyPool);
        }
        if cfg.sample_size >= d.len() {
            (0..d.len()).collect()
        } else {
            index::sample(&mut rng, d.len(), cfg.sample_size).into_vec()
        }
    };
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| d.points[i]).collect())
}

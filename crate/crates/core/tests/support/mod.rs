//! Reference oracles and random instance generators shared by the
//! integration suites.
#![allow(dead_code)]

use pbow_core::codebook::{GmmCodebook, GmmComponent};
use pbow_core::persistence::{
    compute_persistence, BirthDeathDiagram, Filtration, PointCloud, SimplicialFiltration,
};
use pbow_core::Diagram;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Rank over Z/2 of a set of columns given as bitsets.
pub fn rank_z2(mut columns: Vec<Vec<u64>>) -> usize {
    let mut rank = 0;
    let words = columns.first().map_or(0, Vec::len);
    let mut row = 0;
    while row < words * 64 && rank < columns.len() {
        let (w, bit) = (row / 64, 1u64 << (row % 64));
        if let Some(p) = (rank..columns.len()).find(|&j| columns[j][w] & bit != 0) {
            columns.swap(rank, p);
            let pivot = columns[rank].clone();
            for col in columns.iter_mut().skip(rank + 1) {
                if col[w] & bit != 0 {
                    for (a, b) in col.iter_mut().zip(&pivot) {
                        *a ^= b;
                    }
                }
            }
            rank += 1;
        }
        row += 1;
    }
    rank
}

/// Betti numbers of every prefix `K_v = {cells with value ≤ v}` at each
/// distinct value `v`, computed as `n_k - rank ∂_k - rank ∂_{k+1}` on the
/// boundary submatrix of the prefix.
pub fn betti_by_value<F: Filtration>(f: &F, max_dim: usize) -> Vec<(f64, Vec<i64>)> {
    let n = f.len();
    let words = n.div_ceil(64).max(1);
    let matrix = f.boundary_matrix();
    let mut out = Vec::new();
    let mut end = 0;
    while end < n {
        let v = f.value(end);
        while end < n && f.value(end) == v {
            end += 1;
        }
        let mut by_dim: Vec<Vec<Vec<u64>>> = vec![Vec::new(); max_dim + 2];
        let mut counts = vec![0i64; max_dim + 2];
        for j in 0..end {
            let d = f.dim(j);
            if d > max_dim + 1 {
                continue;
            }
            counts[d] += 1;
            let mut bits = vec![0u64; words];
            for &r in matrix.column(j) {
                bits[r as usize / 64] |= 1 << (r % 64);
            }
            by_dim[d].push(bits);
        }
        let ranks: Vec<i64> = by_dim.into_iter().map(|c| rank_z2(c) as i64).collect();
        let betti = (0..=max_dim)
            .map(|k| counts[k] - if k > 0 { ranks[k] } else { 0 } - ranks[k + 1])
            .collect();
        out.push((v, betti));
    }
    out
}

/// Classes alive at `v` according to a diagram: born at or before `v`, dying
/// strictly after.
pub fn alive_at(d: &BirthDeathDiagram, v: f64) -> i64 {
    d.pairs.iter().filter(|&&(b, e)| b <= v && v < e).count() as i64
}

/// Checks the reduction against the rank oracle in dimensions `0..=max_dim`.
pub fn check_against_rank_oracle<F: Filtration>(f: &F, max_dim: usize) -> Result<(), String> {
    let dims: Vec<usize> = (0..=max_dim).collect();
    let diagrams = compute_persistence(f, &dims);
    for (v, betti) in betti_by_value(f, max_dim) {
        for (k, &b) in betti.iter().enumerate() {
            let got = alive_at(&diagrams[k], v);
            if got != b {
                return Err(format!(
                    "dim {k} at value {v}: diagram gives {got}, rank oracle gives {b}"
                ));
            }
        }
    }
    Ok(())
}

/// A random simplicial filtration on at most `max_vertices` vertices with
/// small integer values, so that ties are common. Simplices go up to
/// dimension 3.
pub fn random_filtration(rng: &mut ChaCha8Rng, max_vertices: usize) -> SimplicialFiltration {
    let n = rng.random_range(1..=max_vertices) as u32;
    let mut simplices: Vec<(Vec<u32>, f64)> = Vec::new();
    let mut value = std::collections::HashMap::new();
    for v in 0..n {
        let f = rng.random_range(0..4) as f64;
        value.insert(vec![v], f);
        simplices.push((vec![v], f));
    }
    let edge_p = rng.random_range(0.3..1.0);
    let fill_p = rng.random_range(0.2..0.9);
    for size in 2..=4usize {
        for s in subsets(n, size) {
            let p = if size == 2 { edge_p } else { fill_p };
            let faces: Option<Vec<f64>> = (0..size)
                .map(|skip| {
                    let face: Vec<u32> = s
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != skip)
                        .map(|(_, &v)| v)
                        .collect();
                    value.get(&face).copied()
                })
                .collect();
            if let Some(faces) = faces {
                if rng.random_bool(p) {
                    let f =
                        faces.iter().copied().fold(0.0, f64::max) + rng.random_range(0..3) as f64;
                    value.insert(s.clone(), f);
                    simplices.push((s, f));
                }
            }
        }
    }
    SimplicialFiltration::new(simplices).expect("faces are added before cofaces")
}

fn subsets(n: u32, size: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == size {
            out.push((0..n).filter(|&v| mask & (1 << v) != 0).collect());
        }
    }
    out
}

/// A random cloud of `n` points in `dim` dimensions. With `lattice` set the
/// coordinates are small integers, producing many equal distances.
pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize, lattice: bool) -> PointCloud {
    let points = (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    if lattice {
                        rng.random_range(0..3) as f64
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect()
        })
        .collect();
    PointCloud::new(points).unwrap()
}

/// A random birth-persistence diagram with at most `max_len` points.
/// Coordinates are drawn on a coarse grid half of the time to create ties.
pub fn random_diagram(rng: &mut ChaCha8Rng, max_len: usize) -> Diagram {
    let len = rng.random_range(0..=max_len);
    let coarse = rng.random_bool(0.5);
    let points = (0..len)
        .map(|_| {
            if coarse {
                [
                    rng.random_range(0..4) as f64 * 0.5,
                    rng.random_range(1..4) as f64 * 0.5,
                ]
            } else {
                [rng.random_range(0.0..2.0), rng.random_range(0.01..2.0)]
            }
        })
        .collect();
    Diagram::new(1, points)
}

/// Two diagrams with at most 7 points between them, small enough for the
/// exhaustive matching oracle.
pub fn small_pair(rng: &mut ChaCha8Rng) -> (Diagram, Diagram) {
    let total = rng.random_range(0..=7);
    let left = rng.random_range(0..=total);
    let mut a = random_diagram(rng, 7);
    let mut b = random_diagram(rng, 7);
    a.points.truncate(left);
    b.points.truncate(total - left);
    (a, b)
}

/// Sorted multiset of finite pairs, for order-insensitive comparison.
pub fn sorted_pairs(d: &BirthDeathDiagram) -> Vec<(f64, f64)> {
    let mut p = d.pairs.clone();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    p
}

/// A random mixture with `n` components: means in the unit square,
/// covariances with eigenvalues in `[1e-3, 5e-2]` and a random rotation.
pub fn random_gmm(rng: &mut ChaCha8Rng, n: usize) -> GmmCodebook {
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
                mean: [rng.random(), rng.random()],
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

/// A diagram and a jittered copy of equal size. Every point has persistence
/// at least `min_pers` and the jitters sum (in L∞) to less than
/// `2 * min_pers`, so no matching that sends a point to the axis can beat the
/// identity bijection and the optimal matching is a bijection.
pub fn perturbation_pair(rng: &mut ChaCha8Rng, max_len: usize) -> (Diagram, Diagram) {
    let len = rng.random_range(1..=max_len);
    let min_pers = 0.05;
    let budget = 2.0 * min_pers * rng.random_range(0.01..0.99);
    let scale = rng.random_range(0.0..1.0f64).powi(3);
    let mut a = Vec::with_capacity(len);
    let mut b = Vec::with_capacity(len);
    for _ in 0..len {
        let p = [rng.random_range(-0.2..1.2), rng.random_range(min_pers..1.2)];
        let r = scale * budget / len as f64;
        let mut q = [
            p[0] + rng.random_range(-r..=r),
            p[1] + rng.random_range(-r..=r),
        ];
        q[1] = q[1].max(min_pers);
        a.push(p);
        b.push(q);
    }
    (Diagram::new(1, a), Diagram::new(1, b))
}

/// Outcome of a batch of stability checks.
#[derive(Debug, Default, Clone, Copy)]
pub struct StabilityReport {
    pub pairs: usize,
    pub violations: usize,
    /// Largest `‖Δraw‖∞ / (C·W₁)` seen.
    pub worst_ratio: f64,
}

/// Draws a random mixture with at most `max_components` components and
/// checks `‖raw(B) - raw(B')‖∞ ≤ C·W₁(B, B') + 1e-9` on `pairs` perturbation
/// pairs.
pub fn stability_batch(seed: u64, max_components: usize, pairs: usize) -> StabilityReport {
    use pbow_core::encoding::{encode_spbow, stability_certificate};
    use pbow_core::metrics::wasserstein;
    use rand::SeedableRng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_components);
    let cb = random_gmm(&mut rng, n);
    let c = stability_certificate(&cb).unwrap().c;
    let mut report = StabilityReport {
        pairs,
        ..Default::default()
    };
    for _ in 0..pairs {
        let (a, b) = perturbation_pair(&mut rng, 6);
        let va = encode_spbow(&a, &cb).unwrap().values;
        let vb = encode_spbow(&b, &cb).unwrap().values;
        let delta = va
            .iter()
            .zip(&vb)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let w1 = wasserstein(&a, &b, 1.0).unwrap();
        if delta > c * w1 + 1e-9 {
            report.violations += 1;
        }
        if w1 > 0.0 {
            report.worst_ratio = report.worst_ratio.max(delta / (c * w1));
        }
    }
    report
}

/// The two-center construction: one point just either side of the
/// bisector. Returns `(L1 count difference, W₁, ratio)`.
pub fn pbow_witness(eps: f64) -> (f64, f64, f64) {
    use pbow_core::encoding::encode_pbow;
    use pbow_core::metrics::wasserstein;

    let cb = pbow_core::KmeansCodebook {
        centers: vec![[0.0, 1.0], [1.0, 1.0]],
        iterations_run: 0,
        inertia_history: vec![],
    };
    let a = Diagram::new(1, vec![[0.5 - eps, 1.0]]);
    let b = Diagram::new(1, vec![[0.5 + eps, 1.0]]);
    let va = encode_pbow(&a, &cb).values;
    let vb = encode_pbow(&b, &cb).values;
    let l1: f64 = va.iter().zip(&vb).map(|(x, y)| (x - y).abs()).sum();
    let w1 = wasserstein(&a, &b, 1.0).unwrap();
    (l1, w1, l1 / w1)
}

/// Points from a random number of anisotropic blobs, rounded to a coarse grid
/// every third draw so that duplicates occur.
pub fn random_blobs(rng: &mut ChaCha8Rng, len: usize) -> Vec<[f64; 2]> {
    use rand_distr::{Distribution, StandardNormal};

    let k = rng.random_range(1..=5);
    let centers: Vec<[f64; 2]> = (0..k)
        .map(|_| [rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)])
        .collect();
    let spread: Vec<[f64; 2]> = (0..k)
        .map(|_| [rng.random_range(0.02..0.3), rng.random_range(0.02..0.3)])
        .collect();
    let coarse = rng.random_range(0..3) == 0;
    (0..len)
        .map(|i| {
            let c = i % k;
            let (zx, zy): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
            let p = [
                centers[c][0] + spread[c][0] * zx,
                centers[c][1] + spread[c][1] * zy,
            ];
            if coarse {
                [(p[0] * 10.0).round() / 10.0, (p[1] * 10.0).round() / 10.0]
            } else {
                p
            }
        })
        .collect()
}

pub fn distinct_points(points: &[[f64; 2]]) -> usize {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    p.len()
}

/// Counts k-means fits whose inertia history ever increases.
pub fn kmeans_monotonicity_violations(fits: u64) -> usize {
    use pbow_core::codebook::fit_kmeans;
    use rand::SeedableRng;

    (0..fits)
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let len = rng.random_range(20..400);
            let points = random_blobs(&mut rng, len);
            let n = rng.random_range(1..=12).min(distinct_points(&points));
            let cb = fit_kmeans(&points, n, 300, seed).unwrap();
            cb.inertia_history.windows(2).any(|w| w[1] > w[0])
        })
        .count()
}

/// Counts GMM fits whose log-likelihood history ever decreases by more than
/// rounding (`1e-12 |ℓ|`; at a fixed point the recomputed sum of log-densities
/// can differ in the last bits). The tolerance is pinned to zero so that fits
/// run until the likelihood stops improving.
pub fn gmm_monotonicity_violations(fits: u64) -> usize {
    use pbow_core::codebook::{fit_gmm, GmmOptions};
    use rand::SeedableRng;

    (0..fits)
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
            let len = rng.random_range(30..400);
            let points = random_blobs(&mut rng, len);
            let n = rng.random_range(1..=8).min(distinct_points(&points));
            let opts = GmmOptions {
                tol: 0.0,
                max_iter: 60,
                ..GmmOptions::for_points(&points)
            };
            let cb = fit_gmm(&points, n, seed, &opts).unwrap();
            let weights: f64 = cb.components.iter().map(|c| c.weight).sum();
            assert!((weights - 1.0).abs() <= 1e-12);
            cb.log_likelihood_history
                .windows(2)
                .any(|w| w[1] < w[0] - 1e-12 * w[0].abs())
        })
        .count()
}

//! Exact q-Wasserstein and bottleneck distances between birth-persistence
//! diagrams under the L-infinity ground metric.
//!
//! In birth-persistence coordinates the diagonal is the `persistence = 0`
//! axis, so the axis partner of `(b, p)` is `(b, 0)` at cost `p`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persistence::{Diagram, Point};

/// One side of a matched pair: a point index or the persistence-0 axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    Point(usize),
    Axis,
}

/// A partial bijection between two diagrams, unmatched points going to the axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub assignment: Vec<(Slot, Slot)>,
    pub cost: f64,
}

impl Matching {
    pub fn uses_axis(&self) -> bool {
        self.assignment
            .iter()
            .any(|(a, b)| matches!(a, Slot::Axis) || matches!(b, Slot::Axis))
    }
}

pub fn linf(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}

/// Cost of an augmented-square assignment: rows are the points of `a` followed
/// by axis slots for `b`; columns are the points of `b` followed by axis slots
/// for `a`.
struct Augmented<'d> {
    a: &'d [Point],
    b: &'d [Point],
}

impl Augmented<'_> {
    fn size(&self) -> usize {
        self.a.len() + self.b.len()
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        let (n, m) = (self.a.len(), self.b.len());
        match (i < n, j < m) {
            (true, true) => linf(&self.a[i], &self.b[j]),
            (true, false) => self.a[i][1],
            (false, true) => self.b[j][1],
            (false, false) => 0.0,
        }
    }

    fn slots(&self, i: usize, j: usize) -> Option<(Slot, Slot)> {
        let (n, m) = (self.a.len(), self.b.len());
        match (i < n, j < m) {
            (true, true) => Some((Slot::Point(i), Slot::Point(j))),
            (true, false) => Some((Slot::Point(i), Slot::Axis)),
            (false, true) => Some((Slot::Axis, Slot::Point(j))),
            (false, false) => None,
        }
    }
}

/// Minimum-cost perfect assignment on a square cost matrix (row-major),
/// Hungarian algorithm with potentials, O(n^3). Returns `col_of_row`.
pub fn hungarian(n: usize, cost: &[f64]) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut min_to = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        min_to.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0usize; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    col_of
}

/// Optimal matching for the q-Wasserstein distance. `cost` is the q-th root of
/// the summed q-th powers.
pub fn wasserstein_matching(a: &Diagram, b: &Diagram, q: f64) -> Result<Matching> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::InvalidExponent(q));
    }
    let aug = Augmented {
        a: &a.points,
        b: &b.points,
    };
    let n = aug.size();
    let mut cost = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            cost.push(aug.distance(i, j).powf(q));
        }
    }
    let col_of = hungarian(n, &cost);
    let mut assignment = Vec::with_capacity(n);
    // Sum in a fixed order for reproducibility.
    let mut total = 0.0;
    for (i, &j) in col_of.iter().enumerate() {
        if let Some(pair) = aug.slots(i, j) {
            assignment.push(pair);
            total += cost[i * n + j];
        }
    }
    Ok(Matching {
        assignment,
        cost: total.powf(1.0 / q),
    })
}

/// q-Wasserstein distance, exact via the Hungarian algorithm.
pub fn wasserstein(a: &Diagram, b: &Diagram, q: f64) -> Result<f64> {
    wasserstein_matching(a, b, q).map(|m| m.cost)
}

/// Largest total size accepted by [`wasserstein_oracle`].
pub const ORACLE_MAX_POINTS: usize = 7;

/// Exhaustive minimum over all matchings; only for tiny diagrams.
pub fn wasserstein_oracle(a: &Diagram, b: &Diagram, q: f64) -> Result<f64> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::InvalidExponent(q));
    }
    let total = a.len() + b.len();
    if total > ORACLE_MAX_POINTS {
        return Err(Error::OracleTooLarge(total, ORACLE_MAX_POINTS));
    }
    fn search(
        i: usize,
        a: &[Point],
        b: &[Point],
        taken: &mut Vec<bool>,
        acc: f64,
        q: f64,
        best: &mut f64,
    ) {
        if i == a.len() {
            let rest: f64 = b
                .iter()
                .zip(taken.iter())
                .filter(|(_, &t)| !t)
                .map(|(p, _)| p[1].powf(q))
                .sum();
            *best = best.min(acc + rest);
            return;
        }
        search(i + 1, a, b, taken, acc + a[i][1].powf(q), q, best);
        for j in 0..b.len() {
            if !taken[j] {
                taken[j] = true;
                search(
                    i + 1,
                    a,
                    b,
                    taken,
                    acc + linf(&a[i], &b[j]).powf(q),
                    q,
                    best,
                );
                taken[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    search(
        0,
        &a.points,
        &b.points,
        &mut vec![false; b.len()],
        0.0,
        q,
        &mut best,
    );
    Ok(best.powf(1.0 / q))
}

/// Bottleneck distance: the smallest threshold admitting a perfect matching
/// of the augmented bipartite graph, found by binary search over the sorted
/// candidate distances.
pub fn bottleneck(a: &Diagram, b: &Diagram) -> f64 {
    let aug = Augmented {
        a: &a.points,
        b: &b.points,
    };
    let n = aug.size();
    if n == 0 {
        return 0.0;
    }
    let mut candidates: Vec<f64> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            candidates.push(aug.distance(i, j));
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    // The largest candidate is always feasible (complete graph).
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if perfect_matching_within(&aug, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

fn perfect_matching_within(aug: &Augmented, threshold: f64) -> bool {
    let n = aug.size();
    let adjacency: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| aug.distance(i, j) <= threshold)
                .collect()
        })
        .collect();
    hopcroft_karp(n, n, &adjacency) == n
}

/// Maximum bipartite matching size (Hopcroft-Karp).
fn hopcroft_karp(left: usize, right: usize, adj: &[Vec<usize>]) -> usize {
    const FREE: usize = usize::MAX;
    let mut match_l = vec![FREE; left];
    let mut match_r = vec![FREE; right];
    let mut dist = vec![0usize; left];
    let mut matched = 0;
    loop {
        let mut queue = VecDeque::new();
        for u in 0..left {
            if match_l[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == FREE {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            return matched;
        }
        fn augment(
            u: usize,
            adj: &[Vec<usize>],
            ml: &mut [usize],
            mr: &mut [usize],
            dist: &mut [usize],
        ) -> bool {
            for &v in &adj[u] {
                let w = mr[v];
                if w == usize::MAX || (dist[w] == dist[u] + 1 && augment(w, adj, ml, mr, dist)) {
                    ml[u] = v;
                    mr[v] = u;
                    return true;
                }
            }
            dist[u] = usize::MAX;
            false
        }
        for u in 0..left {
            if match_l[u] == FREE && augment(u, adj, &mut match_l, &mut match_r, &mut dist) {
                matched += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(points: &[[f64; 2]]) -> Diagram {
        Diagram::new(1, points.to_vec())
    }

    #[test]
    fn identity_is_zero() {
        let a = d(&[[0.0, 1.0], [2.0, 3.0], [0.5, 0.25]]);
        assert_eq!(wasserstein(&a, &a, 1.0).unwrap(), 0.0);
        assert_eq!(bottleneck(&a, &a), 0.0);
    }

    #[test]
    fn single_point_to_axis() {
        let a = d(&[[3.0, 2.0]]);
        let e = d(&[]);
        assert_eq!(wasserstein(&a, &e, 1.0).unwrap(), 2.0);
        assert_eq!(bottleneck(&a, &e), 2.0);
        let m = wasserstein_matching(&a, &e, 1.0).unwrap();
        assert_eq!(m.assignment, vec![(Slot::Point(0), Slot::Axis)]);
    }

    #[test]
    fn point_to_point_beats_axis() {
        let a = d(&[[0.0, 2.0]]);
        let b = d(&[[0.0, 1.0]]);
        assert_eq!(wasserstein(&a, &b, 1.0).unwrap(), 1.0);
        assert_eq!(wasserstein_oracle(&a, &b, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn bottleneck_extra_point() {
        let a = d(&[[0.0, 2.0], [5.0, 2.0]]);
        let b = d(&[[0.0, 2.0]]);
        assert_eq!(bottleneck(&a, &b), 2.0);
    }

    #[test]
    fn empty_diagrams() {
        let e = d(&[]);
        assert_eq!(wasserstein(&e, &e, 2.0).unwrap(), 0.0);
        assert_eq!(wasserstein_oracle(&e, &e, 1.0).unwrap(), 0.0);
        assert_eq!(bottleneck(&e, &e), 0.0);
        let one = d(&[[1.0, 1.0]]);
        assert_eq!(wasserstein_oracle(&one, &one, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_small_exponent() {
        let e = d(&[]);
        assert!(matches!(
            wasserstein(&e, &e, 0.5),
            Err(Error::InvalidExponent(_))
        ));
        assert!(wasserstein_oracle(&e, &e, f64::NAN).is_err());
    }

    #[test]
    fn oracle_size_bound() {
        let a = d(&[[0.0, 1.0]; 4]);
        assert!(matches!(
            wasserstein_oracle(&a, &a, 1.0),
            Err(Error::OracleTooLarge(8, 7))
        ));
    }

    #[test]
    fn hungarian_small() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let col = hungarian(3, &cost);
        let total: f64 = col.iter().enumerate().map(|(i, &j)| cost[i * 3 + j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn q2_uses_powers() {
        let a = d(&[[0.0, 3.0], [0.0, 4.0]]);
        let e = d(&[]);
        assert!((wasserstein(&a, &e, 2.0).unwrap() - 5.0).abs() < 1e-12);
    }
}

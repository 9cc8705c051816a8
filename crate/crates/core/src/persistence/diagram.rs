use serde::{Deserialize, Serialize};

/// A point in the birth-persistence plane: `[birth, persistence]`.
pub type Point = [f64; 2];

/// Persistence pairs in (birth, death) form. Essential classes have
/// `death == f64::INFINITY`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthDeathDiagram {
    pub dim: usize,
    pub pairs: Vec<(f64, f64)>,
}

impl BirthDeathDiagram {
    pub fn new(dim: usize, pairs: Vec<(f64, f64)>) -> Self {
        debug_assert!(pairs.iter().all(|&(b, d)| d >= b));
        Self { dim, pairs }
    }

    pub fn essential_count(&self) -> usize {
        self.pairs.iter().filter(|(_, d)| d.is_infinite()).count()
    }
}

/// A finite multiset of birth-persistence points with strictly positive
/// persistence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagram {
    pub dim: usize,
    pub points: Vec<Point>,
}

impl Diagram {
    pub fn new(dim: usize, points: Vec<Point>) -> Self {
        Self { dim, points }
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            points: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn persistences(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p[1])
    }

    /// Points sorted lexicographically; a canonical form for multiset
    /// comparisons.
    pub fn sorted_points(&self) -> Vec<Point> {
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        pts
    }
}

/// How essential (infinite) intervals are handled when leaving birth-death
/// coordinates. Only dropping them is supported.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfinitePolicy {
    #[default]
    Ignore,
}

impl std::fmt::Display for InfinitePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InfinitePolicy::Ignore => f.write_str("ignore"),
        }
    }
}

/// Maps `(b, d)` to `(b, d - b)`, dropping infinite and zero-persistence pairs.
pub fn to_birth_persistence(bd: &BirthDeathDiagram, policy: InfinitePolicy) -> Diagram {
    let points = bd
        .pairs
        .iter()
        .filter(|(_, d)| match policy {
            InfinitePolicy::Ignore => d.is_finite(),
        })
        .map(|&(b, d)| [b, d - b])
        .filter(|p| p[1] > 0.0)
        .collect();
    Diagram::new(bd.dim, points)
}

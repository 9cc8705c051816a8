use super::squared_distance;
use crate::persistence::Point;

#[derive(Debug, Clone)]
struct Node {
    /// Index into the original center list.
    center: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

/// Static 2-d tree over codebook centers for exact nearest-center queries.
///
/// Ties are resolved towards the lowest center index, so queries agree with
/// [`nearest_center_linear`](super::nearest_center_linear) on every input.
#[derive(Debug, Clone)]
pub struct KdTree {
    centers: Vec<Point>,
    nodes: Vec<Node>,
    root: Option<usize>,
}

impl KdTree {
    pub fn new(centers: &[Point]) -> Self {
        let mut tree = Self {
            centers: centers.to_vec(),
            nodes: Vec::with_capacity(centers.len()),
            root: None,
        };
        let mut idx: Vec<usize> = (0..centers.len()).collect();
        tree.root = tree.build(&mut idx, 0);
        tree
    }

    fn build(&mut self, idx: &mut [usize], depth: usize) -> Option<usize> {
        if idx.is_empty() {
            return None;
        }
        let axis = depth % 2;
        let centers = &self.centers;
        idx.sort_by(|&a, &b| {
            centers[a][axis]
                .total_cmp(&centers[b][axis])
                .then(a.cmp(&b))
        });
        let mid = idx.len() / 2;
        let center = idx[mid];
        let (lo, hi) = idx.split_at_mut(mid);
        let left = self.build(lo, depth + 1);
        let right = self.build(&mut hi[1..], depth + 1);
        self.nodes.push(Node {
            center,
            axis,
            left,
            right,
        });
        Some(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    /// Index and squared distance of the nearest center, or `None` for an
    /// empty tree.
    pub fn nearest(&self, x: &Point) -> Option<(usize, f64)> {
        let root = self.root?;
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(root, x, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, x: &Point, best: &mut (usize, f64)) {
        let n = &self.nodes[node];
        let c = &self.centers[n.center];
        let d2 = squared_distance(x, c);
        if d2 < best.1 || (d2 == best.1 && n.center < best.0) {
            *best = (n.center, d2);
        }
        let diff = x[n.axis] - c[n.axis];
        let (near, far) = if diff < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        if let Some(near) = near {
            self.search(near, x, best);
        }
        // Equal distance to the splitting plane may still hide a lower-index tie.
        if let Some(far) = far {
            if diff * diff <= best.1 {
                self.search(far, x, best);
            }
        }
    }
}

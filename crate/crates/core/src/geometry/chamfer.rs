//! Nearest-neighbour queries and bi-directional Chamfer distance.

use crate::error::{PinError, Result};
use rayon::prelude::*;

use super::vec3::dist2;
use super::Point3;

const LEAF: usize = 8;

#[derive(Debug, Clone)]
enum KdNode {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static 3D kd-tree for nearest-neighbour queries.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    nodes: Vec<KdNode>,
}

impl KdTree {
    pub fn build(points: &[Point3]) -> KdTree {
        let mut tree = KdTree { points: points.to_vec(), nodes: Vec::new() };
        if !points.is_empty() {
            tree.build_range(0, points.len(), 0);
        }
        tree
    }

    fn build_range(&mut self, start: usize, end: usize, depth: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF {
            self.nodes.push(KdNode::Leaf { start, end });
            return id;
        }
        // Split along the widest axis of this range.
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.points[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(depth % 3);
        let mid = start + (end - start) / 2;
        self.points[start..end].select_nth_unstable_by(mid - start, |p, q| p[axis].total_cmp(&q[axis]));
        let value = self.points[mid][axis];
        self.nodes.push(KdNode::Leaf { start, end });
        let left = self.build_range(start, mid, depth + 1);
        let right = self.build_range(mid, end, depth + 1);
        self.nodes[id] = KdNode::Split { axis, value, left, right };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared distance to, and coordinates of, the
    /// nearest point.
    pub fn nearest(&self, q: Point3) -> Option<(f64, Point3)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, [0.0; 3]);
        self.search(0, q, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: Point3, best: &mut (f64, Point3)) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for p in &self.points[start..end] {
                    let d = dist2(*p, q);
                    if d < best.0 {
                        *best = (d, *p);
                    }
                }
            }
            KdNode::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff <= best.0 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

/// Mean distance from each point of `from` to its nearest neighbour in `to`.
pub fn directed_mean_distance(from: &[Point3], to: &KdTree) -> Result<f64> {
    if from.is_empty() || to.is_empty() {
        return Err(PinError::param("Chamfer distance needs non-empty point sets"));
    }
    // Collect before summing so the result does not depend on how rayon
    // splits the work.
    let d: Vec<f64> = from
        .par_iter()
        .map(|&p| to.nearest(p).map_or(f64::INFINITY, |(d2, _)| d2.sqrt()))
        .collect();
    Ok(d.iter().sum::<f64>() / from.len() as f64)
}

/// Unsquared bi-directional Chamfer distance: the sum of both directed mean
/// nearest-neighbour distances.
pub fn chamfer_distance(a: &[Point3], b: &[Point3]) -> Result<f64> {
    let (ta, tb) = (KdTree::build(a), KdTree::build(b));
    Ok(directed_mean_distance(a, &tb)? + directed_mean_distance(b, &ta)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn cloud(n: usize, seed: u64) -> Vec<Point3> {
        let mut rng = seeded(seed);
        (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect()
    }

    #[test]
    fn kd_tree_matches_linear_scan() {
        let pts = cloud(500, 1);
        let tree = KdTree::build(&pts);
        for q in cloud(200, 2) {
            let brute = pts.iter().map(|p| dist2(*p, q)).fold(f64::INFINITY, f64::min);
            assert_eq!(tree.nearest(q).unwrap().0, brute);
        }
    }

    #[test]
    fn chamfer_is_symmetric_and_zero_on_self() {
        let (a, b) = (cloud(100, 3), cloud(80, 4));
        assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
        let (ab, ba) = (chamfer_distance(&a, &b).unwrap(), chamfer_distance(&b, &a).unwrap());
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn translated_copy() {
        let a = vec![[0.0, 0.0, 0.0]];
        let b = vec![[0.3, 0.4, 0.0]];
        assert!((chamfer_distance(&a, &b).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_sets_are_rejected() {
        assert!(chamfer_distance(&[], &cloud(3, 0)).is_err());
        assert!(chamfer_distance(&cloud(3, 0), &[]).is_err());
    }
}

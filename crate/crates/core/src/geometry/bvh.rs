//! Bounding volume hierarchy over mesh triangles for closest-point queries.

use super::vec3::{add, dot, scale, sub};
use super::{Point3, TriMesh};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Point3,
    hi: Point3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb { lo: [f64::INFINITY; 3], hi: [f64::NEG_INFINITY; 3] }
    }

    fn grow(&mut self, p: Point3) {
        for d in 0..3 {
            self.lo[d] = self.lo[d].min(p[d]);
            self.hi[d] = self.hi[d].max(p[d]);
        }
    }

    fn merge(&mut self, o: &Aabb) {
        self.grow(o.lo);
        self.grow(o.hi);
    }

    fn dist2(&self, p: Point3) -> f64 {
        let mut s = 0.0;
        for d in 0..3 {
            let v = (self.lo[d] - p[d]).max(0.0).max(p[d] - self.hi[d]);
            s += v * v;
        }
        s
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Median-split BVH. Triangle order is permuted into `order`.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl Bvh {
    pub fn build(mesh: &TriMesh) -> Bvh {
        let n = mesh.triangles.len();
        let mut boxes = Vec::with_capacity(n);
        let mut centroids = Vec::with_capacity(n);
        for i in 0..n {
            let [a, b, c] = mesh.triangle(i);
            let mut bb = Aabb::empty();
            bb.grow(a);
            bb.grow(b);
            bb.grow(c);
            boxes.push(bb);
            centroids.push(scale(add(add(a, b), c), 1.0 / 3.0));
        }
        let mut bvh = Bvh { nodes: Vec::new(), order: (0..n).collect() };
        if n > 0 {
            bvh.build_range(0, n, &boxes, &centroids);
        }
        bvh
    }

    fn build_range(&mut self, start: usize, end: usize, boxes: &[Aabb], centroids: &[Point3]) -> usize {
        let mut bounds = Aabb::empty();
        for &i in &self.order[start..end] {
            bounds.merge(&boxes[i]);
        }
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return id;
        }
        self.nodes.push(Node::Leaf { bounds, start, end });
        let mut cb = Aabb::empty();
        for &i in &self.order[start..end] {
            cb.grow(centroids[i]);
        }
        let axis = (0..3)
            .max_by(|&a, &b| (cb.hi[a] - cb.lo[a]).total_cmp(&(cb.hi[b] - cb.lo[b])))
            .unwrap_or(0);
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis])
        });
        let left = self.build_range(start, mid, boxes, centroids);
        let right = self.build_range(mid, end, boxes, centroids);
        self.nodes[id] = Node::Inner { bounds, left, right };
        id
    }

    /// Closest point on the mesh: `(squared distance, point, triangle index)`.
    pub fn closest(&self, mesh: &TriMesh, p: Point3) -> Option<(f64, Point3, usize)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, [0.0; 3], usize::MAX);
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.bounds().dist2(p) >= best.0 {
                continue;
            }
            match *node {
                Node::Leaf { start, end, .. } => {
                    for &t in &self.order[start..end] {
                        let [a, b, c] = mesh.triangle(t);
                        let q = closest_point_on_triangle(p, a, b, c);
                        let d = sub(q, p);
                        let d2 = dot(d, d);
                        if d2 < best.0 {
                            best = (d2, q, t);
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[left].bounds().dist2(p);
                    let dr = self.nodes[right].bounds().dist2(p);
                    // Visit the nearer child first.
                    if dl < dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        Some(best)
    }
}

/// Closest point to `p` on triangle `abc` (Ericson, Real-Time Collision Detection 5.1.5).
pub fn closest_point_on_triangle(p: Point3, a: Point3, b: Point3, c: Point3) -> Point3 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return add(a, scale(ab, v));
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return add(a, scale(ac, w));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return add(b, scale(sub(c, b), w));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    add(a, add(scale(ab, v), scale(ac, w)))
}

//! Static 3-d tree for fixed-radius range queries and nearest-neighbour
//! lookups over a point set that never changes after construction.

use crate::Point;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Balanced k-d tree built by median splits along the widest axis.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point>,
    /// Original index of each point in `points` order.
    index: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn new(points: &[Point]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        if !points.is_empty() {
            build(points, &mut order, 0, &mut nodes);
        }
        KdTree {
            points: order.iter().map(|&i| points[i]).collect(),
            index: order,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Calls `visit(index, distance)` for every point with `|p - q| < radius`.
    pub fn for_each_within(&self, q: &Point, radius: f64, mut visit: impl FnMut(usize, f64)) {
        if self.nodes.is_empty() {
            return;
        }
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            match self.nodes[id] {
                Node::Leaf { start, end } => {
                    for k in start..end {
                        let d2 = (self.points[k] - q).norm_squared();
                        if d2 < r2 {
                            visit(self.index[k], d2.sqrt());
                        }
                    }
                }
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    let delta = q[axis] - value;
                    if delta <= 0.0 {
                        stack.push(left);
                        if delta * delta < r2 {
                            stack.push(right);
                        }
                    } else {
                        stack.push(right);
                        if delta * delta <= r2 {
                            stack.push(left);
                        }
                    }
                }
            }
        }
    }

    /// Indices of all points strictly within `radius` of `q`, in ascending order.
    pub fn within(&self, q: &Point, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(q, radius, |i, _| out.push(i));
        out.sort_unstable();
        out
    }

    /// Nearest point as `(index, distance)`; ties go to the lower index.
    pub fn nearest(&self, q: &Point) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(0, q, &mut best);
        Some((best.0, best.1.sqrt()))
    }

    fn nearest_rec(&self, id: usize, q: &Point, best: &mut (usize, f64)) {
        match self.nodes[id] {
            Node::Leaf { start, end } => {
                for k in start..end {
                    let d2 = (self.points[k] - q).norm_squared();
                    let i = self.index[k];
                    if d2 < best.1 || (d2 == best.1 && i < best.0) {
                        *best = (i, d2);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = q[axis] - value;
                let (near, far) = if delta <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.nearest_rec(near, q, best);
                if delta * delta <= best.1 {
                    self.nearest_rec(far, q, best);
                }
            }
        }
    }
}

fn build(points: &[Point], order: &mut [usize], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + order.len(),
        });
        return id;
    }
    let mut lo = points[order[0]];
    let mut hi = lo;
    for &i in order.iter() {
        lo = lo.inf(&points[i]);
        hi = hi.sup(&points[i]);
    }
    let axis = (hi - lo).imax();
    if hi[axis] == lo[axis] {
        // all coincident
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + order.len(),
        });
        return id;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let value = points[order[mid]][axis];
    // placeholder, patched after children are built
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (l, r) = order.split_at_mut(mid);
    let left = build(points, l, offset, nodes);
    let right = build(points, r, offset + mid, nodes);
    nodes[id] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    id
}

//! Static kd-tree over vertex positions for fingertip picking.
//!
//! One point per node, split at the median of the axis with the widest spread. Queries are
//! exact; equal distances resolve to the smaller [`VertexId`].

use std::cell::Cell;

use crate::geom::Vec3;
use crate::graph::VertexId;

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq)]
struct Node {
    point: Vec3,
    id: VertexId,
    axis: u8,
    left: u32,
    right: u32,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KdTree {
    nodes: Vec<Node>,
    root: u32,
}

/// Result of a nearest-neighbour query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub id: VertexId,
    pub distance: f64,
}

impl KdTree {
    pub fn build(points: &[(Vec3, VertexId)]) -> Self {
        let mut items: Vec<(Vec3, VertexId)> = points.to_vec();
        let mut tree = KdTree {
            nodes: Vec::with_capacity(items.len()),
            root: NONE,
        };
        tree.root = tree.build_rec(&mut items);
        tree
    }

    /// Tree over `positions[i]` labelled `VertexId(i)`.
    pub fn from_positions(positions: &[Vec3]) -> Self {
        let pts: Vec<_> = positions
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, VertexId::from(i)))
            .collect();
        Self::build(&pts)
    }

    fn build_rec(&mut self, items: &mut [(Vec3, VertexId)]) -> u32 {
        if items.is_empty() {
            return NONE;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for (p, _) in items.iter() {
            for a in 0..3 {
                lo[a] = lo[a].min(p.axis(a));
                hi[a] = hi[a].max(p.axis(a));
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
            .unwrap();
        let mid = items.len() / 2;
        items.select_nth_unstable_by(mid, |x, y| {
            x.0.axis(axis).total_cmp(&y.0.axis(axis)).then(x.1.cmp(&y.1))
        });
        let (point, id) = items[mid];
        let idx = self.nodes.len() as u32;
        self.nodes.push(Node {
            point,
            id,
            axis: axis as u8,
            left: NONE,
            right: NONE,
        });
        let (left, rest) = items.split_at_mut(mid);
        let left = self.build_rec(left);
        let right = self.build_rec(&mut rest[1..]);
        let node = &mut self.nodes[idx as usize];
        node.left = left;
        node.right = right;
        idx
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of levels on the longest root-to-leaf path.
    pub fn height(&self) -> usize {
        fn rec(t: &KdTree, i: u32) -> usize {
            if i == NONE {
                return 0;
            }
            let n = &t.nodes[i as usize];
            1 + rec(t, n.left).max(rec(t, n.right))
        }
        rec(self, self.root)
    }

    pub fn nearest(&self, q: Vec3) -> Option<Hit> {
        self.nearest_counted(q).0
    }

    /// Nearest neighbour plus the number of tree nodes examined.
    pub fn nearest_counted(&self, q: Vec3) -> (Option<Hit>, usize) {
        if self.root == NONE {
            return (None, 0);
        }
        let visited = Cell::new(0usize);
        let mut best: Option<(f64, VertexId)> = None;
        self.search(self.root, q, &mut best, &visited);
        let hit = best.map(|(d2, id)| Hit {
            id,
            distance: d2.sqrt(),
        });
        (hit, visited.get())
    }

    fn search(&self, i: u32, q: Vec3, best: &mut Option<(f64, VertexId)>, visited: &Cell<usize>) {
        if i == NONE {
            return;
        }
        visited.set(visited.get() + 1);
        let node = &self.nodes[i as usize];
        let d2 = q.distance_squared(node.point);
        let better = match *best {
            None => true,
            Some((bd, bid)) => d2 < bd || (d2 == bd && node.id < bid),
        };
        if better {
            *best = Some((d2, node.id));
        }
        let diff = q.axis(node.axis as usize) - node.point.axis(node.axis as usize);
        let (near, far) = if diff < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.search(near, q, best, visited);
        // Equality still descends so that an equidistant smaller id can win.
        if best.is_none_or(|(bd, _)| diff * diff <= bd) {
            self.search(far, q, best, visited);
        }
    }

    /// Nearest neighbour if it lies in the closed ball of radius `r` around `q`.
    pub fn nearest_within(&self, q: Vec3, r: f64) -> Option<Hit> {
        self.nearest(q).filter(|h| h.distance <= r)
    }
}

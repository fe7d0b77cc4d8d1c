//! Static kd-tree over scan points for nearest-neighbor queries during
//! fitting and error measurement. Built once per scan, queried read-only.

use alloc::vec::Vec;

use crate::geom::Vec3;

const LEAF_SIZE: usize = 12;

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        value: f64,
        left: u32,
        right: u32,
    },
}

/// Median-split kd-tree; stores point indices into the original slice.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<u32>,
    nodes: Vec<Node>,
    root: u32,
}

impl KdTree {
    /// Builds the tree; `points` must be non-empty.
    pub fn build(points: &[Vec3]) -> KdTree {
        assert!(!points.is_empty(), "kd-tree needs at least one point");
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::new();
        let root = build_node(points, &mut order, 0, points.len(), &mut nodes);
        KdTree {
            points: points.to_vec(),
            order,
            nodes,
            root,
        }
    }

    /// Index of the nearest stored point and the squared distance to it.
    pub fn nearest(&self, query: Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(self.root, query, &mut best);
        best
    }

    fn search(&self, node: u32, query: Vec3, best: &mut (usize, f64)) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &idx in &self.order[*start as usize..*end as usize] {
                    let d2 = (self.points[idx as usize] - query).norm_squared();
                    if d2 < best.1 {
                        *best = (idx as usize, d2);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let q = query.component(*axis as usize);
                let (near, far) = if q <= *value {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.search(near, query, best);
                let plane = q - value;
                if plane * plane < best.1 {
                    self.search(far, query, best);
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn build_node(
    points: &[Vec3],
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: start as u32,
            end: end as u32,
        });
        return (nodes.len() - 1) as u32;
    }
    // split on the widest axis at the median
    let slice = &order[start..end];
    let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &i in slice.iter() {
        let p = points[i as usize];
        lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
        hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
    }
    let extent = hi - lo;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0u8
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        points[a as usize]
            .component(axis as usize)
            .total_cmp(&points[b as usize].component(axis as usize))
    });
    let value = points[order[mid] as usize].component(axis as usize);
    let left = build_node(points, order, start, mid, nodes);
    let right = build_node(points, order, mid, end, nodes);
    nodes.push(Node::Split {
        axis,
        value,
        left,
        right,
    });
    (nodes.len() - 1) as u32
}

/// Brute-force nearest neighbor, the oracle the tree is tested against.
pub fn nearest_brute_force(points: &[Vec3], query: Vec3) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, &p) in points.iter().enumerate() {
        let d2 = (p - query).norm_squared();
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    best
}

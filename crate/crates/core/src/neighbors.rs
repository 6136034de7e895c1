//! Exact Euclidean k-nearest-neighbor queries from query points into a fixed
//! reference set.
//!
//! Two routes are provided: [`knn_brute_force`], a plain scan that serves as
//! the correctness oracle, and [`NeighborIndex`], a kd-tree. Both order
//! results by `(squared distance, reference id)` ascending and share the same
//! distance accumulation, so their outputs are identical element for element,
//! ties included.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::point::{dataset_dim, Point};
use crate::{Error, Result};

const LEAF_SIZE: usize = 16;

/// Squared Euclidean distance with a fixed accumulation order. Both query
/// routes go through this function so results match bit for bit.
#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Euclidean distance between two points of equal dimension.
pub fn euclidean_distance(a: &Point, b: &Point) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(squared_distance(a.coords(), b.coords()).sqrt())
}

/// One query answer: a reference id and the Euclidean distance to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub distance: f64,
}

fn check_query(dim: usize, len: usize, query: &Point, k: usize) -> Result<()> {
    if query.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: query.dim(),
        });
    }
    if k == 0 || k > len {
        return Err(Error::KOutOfRange { k, max: len });
    }
    Ok(())
}

/// Reference scan oracle: computes every distance, sorts by
/// `(squared distance, id)`, and keeps the first `k`.
pub fn knn_brute_force(points: &[Point], query: &Point, k: usize) -> Result<Vec<Neighbor>> {
    let dim = dataset_dim(points)?;
    check_query(dim, points.len(), query, k)?;
    let mut all: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(id, p)| (squared_distance(p.coords(), query.coords()), id))
        .collect();
    all.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    all.truncate(k);
    Ok(all
        .into_iter()
        .map(|(d2, id)| Neighbor {
            id,
            distance: d2.sqrt(),
        })
        .collect())
}

#[derive(Debug)]
enum KdNode {
    Leaf {
        ids: Vec<usize>,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<KdNode>,
        right: Box<KdNode>,
    },
}

fn build_node(points: &[Point], ids: &mut [usize]) -> KdNode {
    if ids.len() <= LEAF_SIZE {
        return KdNode::Leaf { ids: ids.to_vec() };
    }
    // Split on the widest-spread axis; zero spread everywhere means all
    // remaining points are identical and further splitting is pointless.
    let dim = points[ids[0]].dim();
    let mut axis = 0;
    let mut best_spread = -1.0;
    for a in 0..dim {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &id in ids.iter() {
            let c = points[id].coords()[a];
            lo = lo.min(c);
            hi = hi.max(c);
        }
        if hi - lo > best_spread {
            best_spread = hi - lo;
            axis = a;
        }
    }
    if best_spread == 0.0 {
        return KdNode::Leaf { ids: ids.to_vec() };
    }
    let mid = ids.len() / 2;
    ids.select_nth_unstable_by(mid, |&a, &b| {
        (points[a].coords()[axis], a)
            .partial_cmp(&(points[b].coords()[axis], b))
            .unwrap()
    });
    let value = points[ids[mid]].coords()[axis];
    let (left_ids, right_ids) = ids.split_at_mut(mid);
    KdNode::Split {
        axis,
        value,
        left: Box::new(build_node(points, left_ids)),
        right: Box::new(build_node(points, right_ids)),
    }
}

/// Worst-candidate-on-top heap entry, ordered by `(squared distance, id)`.
struct HeapEntry {
    d2: f64,
    id: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.d2 == other.d2 && self.id == other.id
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.d2, self.id).partial_cmp(&(other.d2, other.id)).unwrap()
    }
}

struct KnnSearch<'a> {
    points: &'a [Point],
    query: &'a [f64],
    k: usize,
    heap: BinaryHeap<HeapEntry>,
}

impl KnnSearch<'_> {
    fn offer(&mut self, id: usize) {
        let d2 = squared_distance(self.points[id].coords(), self.query);
        if self.heap.len() < self.k {
            self.heap.push(HeapEntry { d2, id });
        } else {
            let worst = self.heap.peek().unwrap();
            if (d2, id) < (worst.d2, worst.id) {
                self.heap.pop();
                self.heap.push(HeapEntry { d2, id });
            }
        }
    }

    fn visit(&mut self, node: &KdNode) {
        match node {
            KdNode::Leaf { ids } => {
                for &id in ids {
                    self.offer(id);
                }
            }
            KdNode::Split {
                axis,
                value,
                left,
                right,
            } => {
                let qa = self.query[*axis];
                let (near, far) = if qa < *value {
                    (left, right)
                } else {
                    (right, left)
                };
                self.visit(near);
                let plane = qa - *value;
                // Descend the far side on equality too: a point at exactly the
                // current worst distance can still win on a smaller id.
                if self.heap.len() < self.k || plane * plane <= self.heap.peek().unwrap().d2 {
                    self.visit(far);
                }
            }
        }
    }
}

/// kd-tree over a fixed reference set. Immutable after construction, so
/// concurrent read-only queries are safe.
#[derive(Debug)]
pub struct NeighborIndex {
    points: Vec<Point>,
    dim: usize,
    root: KdNode,
}

impl NeighborIndex {
    /// Builds the index over exactly the given points. Construction is
    /// deterministic: the same points always produce the same tree.
    pub fn build(points: Vec<Point>) -> Result<Self> {
        let dim = dataset_dim(&points)?;
        let mut ids: Vec<usize> = (0..points.len()).collect();
        let root = build_node(&points, &mut ids);
        Ok(Self { points, dim, root })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// The `k` nearest reference points to `query`, ordered by
    /// `(squared distance, id)` ascending. The query may coincide with a
    /// reference point; distance 0 is a legal answer.
    pub fn knn(&self, query: &Point, k: usize) -> Result<Vec<Neighbor>> {
        check_query(self.dim, self.points.len(), query, k)?;
        let mut search = KnnSearch {
            points: &self.points,
            query: query.coords(),
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        };
        search.visit(&self.root);
        let mut found: Vec<(f64, usize)> =
            search.heap.into_iter().map(|e| (e.d2, e.id)).collect();
        found.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(found
            .into_iter()
            .map(|(d2, id)| Neighbor {
                id,
                distance: d2.sqrt(),
            })
            .collect())
    }
}

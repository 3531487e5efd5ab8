//! Exact nearest-neighbor search over a static point set.

use crate::points::PointSet;

const LEAF_SIZE: usize = 8;

/// Static k-d tree. The index permutation itself stores the tree: each
/// slice keeps its splitting point at the middle, smaller coordinates to the
/// left and larger ones to the right.
pub struct KdTree<'a> {
    points: &'a PointSet,
    order: Vec<usize>,
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a PointSet) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build(points, &mut order, 0);
        Self { points, order }
    }

    /// Index of the nearest point and its squared distance. Ties go to the
    /// lowest index.
    pub fn nearest(&self, query: &[f64]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(&self.order, 0, query, &mut best);
        best
    }

    fn consider(&self, i: usize, query: &[f64], best: &mut (usize, f64)) {
        let d = sq_dist(self.points.point(i), query);
        if d < best.1 || (d == best.1 && i < best.0) {
            *best = (i, d);
        }
    }

    fn search(&self, slice: &[usize], depth: usize, query: &[f64], best: &mut (usize, f64)) {
        if slice.len() <= LEAF_SIZE {
            for &i in slice {
                self.consider(i, query, best);
            }
            return;
        }
        let axis = depth % self.points.dim();
        let mid = slice.len() / 2;
        let pivot = slice[mid];
        self.consider(pivot, query, best);
        let diff = query[axis] - self.points.point(pivot)[axis];
        let (near, far) = if diff < 0.0 {
            (&slice[..mid], &slice[mid + 1..])
        } else {
            (&slice[mid + 1..], &slice[..mid])
        };
        self.search(near, depth + 1, query, best);
        // Equality still descends so that lower-index ties are found.
        if diff * diff <= best.1 {
            self.search(far, depth + 1, query, best);
        }
    }
}

fn build(points: &PointSet, slice: &mut [usize], depth: usize) {
    if slice.len() <= LEAF_SIZE {
        return;
    }
    let axis = depth % points.dim();
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        points.point(a)[axis].total_cmp(&points.point(b)[axis]).then(a.cmp(&b))
    });
    let (left, right) = slice.split_at_mut(mid);
    build(points, left, depth + 1);
    build(points, &mut right[1..], depth + 1);
}

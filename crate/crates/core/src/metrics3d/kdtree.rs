//! Exact nearest-neighbor queries over a static 3D point set.

use crate::depth::Point3;
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 8;

#[inline]
pub(crate) fn squared_distance(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Balanced k-d tree stored implicitly: for a range `[lo, hi)` the splitting
/// point sits at `(lo + hi) / 2`, points left of it are `<=` on the split
/// axis and points right of it are `>=`.
///
/// Queries return the same squared distances a brute-force scan computes,
/// bit for bit. Pruning only discards a subtree when the distance to the
/// splitting plane is already no better than the current best, and that
/// bound is monotone under floating-point rounding.
#[derive(Debug, Clone)]
pub struct NearestNeighborIndex {
    points: Vec<Point3>,
    /// Original index of each stored point.
    order: Vec<usize>,
    /// Split axis of the node at each position (unused inside leaves).
    axes: Vec<u8>,
}

impl NearestNeighborIndex {
    pub fn build(points: &[Point3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Degenerate(
                "cannot index an empty point cloud".into(),
            ));
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut axes = vec![0u8; points.len()];
        build_range(points, &mut order, &mut axes, 0);
        Ok(NearestNeighborIndex {
            points: order.iter().map(|&i| points[i]).collect(),
            order,
            axes,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared distance to, and original index of, the nearest indexed
    /// point. Ties resolve to whichever point is visited first.
    pub fn nearest(&self, query: &Point3) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        self.search(0, self.points.len(), query, &mut best);
        (best.0, self.order[best.1])
    }

    /// Squared distance to the nearest indexed point.
    pub fn nearest_squared_distance(&self, query: &Point3) -> f64 {
        self.nearest(query).0
    }

    fn search(&self, lo: usize, hi: usize, q: &Point3, best: &mut (f64, usize)) {
        if hi - lo <= LEAF_SIZE {
            for i in lo..hi {
                let d = squared_distance(q, &self.points[i]);
                if d < best.0 {
                    *best = (d, i);
                }
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let split = &self.points[mid];
        let d = squared_distance(q, split);
        if d < best.0 {
            *best = (d, mid);
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - split[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, q, best);
        if diff * diff < best.0 {
            self.search(far.0, far.1, q, best);
        }
    }
}

fn build_range(points: &[Point3], order: &mut [usize], axes: &mut [u8], offset: usize) {
    let n = order.len();
    if n <= LEAF_SIZE {
        return;
    }
    let axis = widest_axis(points, order);
    let mid = n / 2;
    order.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    axes[offset + mid] = axis as u8;
    let (left, rest) = order.split_at_mut(mid);
    build_range(points, left, axes, offset);
    build_range(points, &mut rest[1..], axes, offset + mid + 1);
}

fn widest_axis(points: &[Point3], order: &[usize]) -> usize {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order {
        for k in 0..3 {
            lo[k] = lo[k].min(points[i][k]);
            hi[k] = hi[k].max(points[i][k]);
        }
    }
    (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0)
}

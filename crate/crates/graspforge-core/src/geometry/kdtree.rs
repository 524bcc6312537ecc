use nalgebra::Point3;

/// A basic kd-tree over points for nearest-neighbor and radius queries.
///
/// Build is O(n log n) (median splits); queries prune with the current best.
/// Duplicated points are allowed.
pub struct KdTree {
    points: Vec<Point3<f64>>,
    /// Node layout: implicit binary tree over `order`.
    order: Vec<u32>,
    split_axes: Vec<u8>,
}

impl KdTree {
    pub fn build(points: Vec<Point3<f64>>) -> Self {
        let n = points.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut split_axes = vec![0u8; n];
        if n > 0 {
            build_rec(&points, &mut order, &mut split_axes, 0, n);
        }
        KdTree {
            points,
            order,
            split_axes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Point by original index.
    pub fn point(&self, idx: usize) -> Point3<f64> {
        self.points[idx]
    }

    /// Index (into the original point list) and distance of the nearest
    /// point to `q`. Ties resolve to the point encountered first in tree
    /// order, which is deterministic for a fixed build.
    pub fn nearest(&self, q: &Point3<f64>) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(q, 0, self.points.len(), &mut best);
        Some((best.0, best.1.sqrt()))
    }

    fn nearest_rec(&self, q: &Point3<f64>, start: usize, count: usize, best: &mut (usize, f64)) {
        if count == 0 {
            return;
        }
        let mid = start + count / 2;
        let idx = self.order[mid] as usize;
        let d_sq = (self.points[idx] - q).norm_squared();
        if d_sq < best.1 {
            *best = (idx, d_sq);
        }
        if count == 1 {
            return;
        }
        let axis = self.split_axes[mid] as usize;
        let delta = q[axis] - self.points[idx][axis];
        let (near_start, near_count, far_start, far_count) = if delta < 0.0 {
            (start, count / 2, mid + 1, count - count / 2 - 1)
        } else {
            (mid + 1, count - count / 2 - 1, start, count / 2)
        };
        self.nearest_rec(q, near_start, near_count, best);
        if delta * delta < best.1 {
            self.nearest_rec(q, far_start, far_count, best);
        }
    }

    /// All indices within `radius` of `q` (inclusive), in ascending index order.
    pub fn within_radius(&self, q: &Point3<f64>, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.radius_rec(q, radius * radius, 0, self.points.len(), &mut out);
            out.sort_unstable();
        }
        out
    }

    fn radius_rec(
        &self,
        q: &Point3<f64>,
        radius_sq: f64,
        start: usize,
        count: usize,
        out: &mut Vec<usize>,
    ) {
        if count == 0 {
            return;
        }
        let mid = start + count / 2;
        let idx = self.order[mid] as usize;
        if (self.points[idx] - q).norm_squared() <= radius_sq {
            out.push(idx);
        }
        if count == 1 {
            return;
        }
        let axis = self.split_axes[mid] as usize;
        let delta = q[axis] - self.points[idx][axis];
        let (near_start, near_count, far_start, far_count) = if delta < 0.0 {
            (start, count / 2, mid + 1, count - count / 2 - 1)
        } else {
            (mid + 1, count - count / 2 - 1, start, count / 2)
        };
        self.radius_rec(q, radius_sq, near_start, near_count, out);
        if delta * delta <= radius_sq {
            self.radius_rec(q, radius_sq, far_start, far_count, out);
        }
    }
}

fn build_rec(
    points: &[Point3<f64>],
    order: &mut [u32],
    split_axes: &mut [u8],
    start: usize,
    count: usize,
) {
    if count <= 1 {
        return;
    }
    // Widest axis of this slab.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in &order[start..start + count] {
        let p = points[i as usize];
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let mut axis = 0;
    for k in 1..3 {
        if hi[k] - lo[k] > hi[axis] - lo[axis] {
            axis = k;
        }
    }
    let mid = count / 2;
    order[start..start + count].select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .partial_cmp(&points[b as usize][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    split_axes[start + mid] = axis as u8;
    build_rec(points, order, split_axes, start, mid);
    build_rec(points, order, split_axes, start + mid + 1, count - mid - 1);
}

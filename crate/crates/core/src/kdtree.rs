//! Static 2-D k-d tree for exact nearest-neighbour distance queries.

const LEAF_SIZE: usize = 8;

/// Points are stored in an implicit balanced layout: the median of every range
/// `[lo, hi)` sits at `(lo + hi) / 2` and splits on axis `depth % 2`.
#[derive(Debug, Clone)]
pub struct KdTree2 {
    points: Vec<[f64; 2]>,
}

#[inline]
fn sq_dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

impl KdTree2 {
    pub fn new(points: &[[f64; 2]]) -> Self {
        let mut points = points.to_vec();
        let n = points.len();
        build(&mut points, 0, n, 0);
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared distance from `q` to its nearest stored point, `None` when empty.
    pub fn nearest_sq_dist(&self, q: &[f64; 2]) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = f64::INFINITY;
        self.search(q, 0, self.points.len(), 0, &mut best);
        Some(best)
    }

    fn search(&self, q: &[f64; 2], lo: usize, hi: usize, depth: usize, best: &mut f64) {
        if hi - lo <= LEAF_SIZE {
            for p in &self.points[lo..hi] {
                let d = sq_dist(q, p);
                if d < *best {
                    *best = d;
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = depth % 2;
        let pivot = &self.points[mid];
        let d = sq_dist(q, pivot);
        if d < *best {
            *best = d;
        }
        let diff = q[axis] - pivot[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, depth + 1, best);
        if diff * diff < *best {
            self.search(q, far.0, far.1, depth + 1, best);
        }
    }
}

fn build(points: &mut [[f64; 2]], lo: usize, hi: usize, depth: usize) {
    if hi - lo <= LEAF_SIZE {
        return;
    }
    let axis = depth % 2;
    let mid = (lo + hi) / 2;
    points[lo..hi].select_nth_unstable_by(mid - lo, |a, b| a[axis].total_cmp(&b[axis]));
    build(points, lo, mid, depth + 1);
    build(points, mid + 1, hi, depth + 1);
}

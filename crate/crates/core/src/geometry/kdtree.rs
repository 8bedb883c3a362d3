use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{dist2, Point3};

/// Static 3-d tree laid out as an implicit balanced tree over a permutation
/// of the input: the node of a range `[lo, hi)` is its midpoint.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    order: Vec<usize>,
    axis: Vec<u8>,
}

#[derive(PartialEq)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.index.cmp(&other.index))
    }
}

impl KdTree {
    pub fn new(points: &[Point3]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            axis: vec![0; points.len()],
        };
        tree.build(0, points.len());
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, lo: usize, hi: usize) {
        if hi - lo <= 1 {
            return;
        }
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for &i in &self.order[lo..hi] {
            for k in 0..3 {
                min[k] = min[k].min(self.points[i][k]);
                max[k] = max[k].max(self.points[i][k]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (max[a] - min[a]).total_cmp(&(max[b] - min[b])))
            .unwrap_or(0);
        let mid = lo + (hi - lo) / 2;
        let pts = &self.points;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b))
        });
        self.axis[mid] = axis as u8;
        self.build(lo, mid);
        self.build(mid + 1, hi);
    }

    /// Closest point as `(index, squared distance)`; ties go to the lower index.
    pub fn nearest(&self, q: &Point3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = Candidate {
            d2: f64::INFINITY,
            index: usize::MAX,
        };
        self.nearest_in(q, 0, self.points.len(), &mut best);
        Some((best.index, best.d2))
    }

    fn nearest_in(&self, q: &Point3, lo: usize, hi: usize, best: &mut Candidate) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let cand = Candidate {
            d2: dist2(q, &self.points[idx]),
            index: idx,
        };
        if cand < *best {
            *best = cand;
        }
        if hi - lo == 1 {
            return;
        }
        let axis = self.axis[mid] as usize;
        let diff = q[axis] - self.points[idx][axis];
        let (near, far) = if diff <= 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_in(q, near.0, near.1, best);
        if diff * diff <= best.d2 {
            self.nearest_in(q, far.0, far.1, best);
        }
    }

    /// The `k` nearest points sorted by `(distance, index)`.
    pub fn knn(&self, q: &Point3, k: usize) -> Vec<(usize, f64)> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_in(q, k, 0, self.points.len(), &mut heap);
        let mut out: Vec<(usize, f64)> = heap.into_iter().map(|c| (c.index, c.d2)).collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    fn knn_in(&self, q: &Point3, k: usize, lo: usize, hi: usize, heap: &mut BinaryHeap<Candidate>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let cand = Candidate {
            d2: dist2(q, &self.points[idx]),
            index: idx,
        };
        if heap.len() < k {
            heap.push(cand);
        } else if heap.peek().is_some_and(|worst| cand < *worst) {
            heap.pop();
            heap.push(cand);
        }
        if hi - lo == 1 {
            return;
        }
        let axis = self.axis[mid] as usize;
        let diff = q[axis] - self.points[idx][axis];
        let (near, far) = if diff <= 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn_in(q, k, near.0, near.1, heap);
        let bound = if heap.len() < k {
            f64::INFINITY
        } else {
            heap.peek().map_or(f64::INFINITY, |c| c.d2)
        };
        if diff * diff <= bound {
            self.knn_in(q, k, far.0, far.1, heap);
        }
    }

    /// Indices of all points within `radius` (inclusive), ascending.
    pub fn within(&self, q: &Point3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.within_in(q, radius * radius, 0, self.points.len(), &mut out);
        }
        out.sort_unstable();
        out
    }

    fn within_in(&self, q: &Point3, r2: f64, lo: usize, hi: usize, out: &mut Vec<usize>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        if dist2(q, &self.points[idx]) <= r2 {
            out.push(idx);
        }
        if hi - lo == 1 {
            return;
        }
        let axis = self.axis[mid] as usize;
        let diff = q[axis] - self.points[idx][axis];
        if diff <= 0.0 || diff * diff <= r2 {
            self.within_in(q, r2, lo, mid, out);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.within_in(q, r2, mid + 1, hi, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
        (0..n)
            .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
            .collect()
    }

    #[test]
    fn nearest_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = random_points(&mut rng, 500);
        let tree = KdTree::new(&pts);
        for _ in 0..200 {
            let q = Point3::new(rng.random(), rng.random(), rng.random());
            let (i, d2) = tree.nearest(&q).unwrap();
            let brute = pts
                .iter()
                .enumerate()
                .map(|(j, p)| (j, dist2(&q, p)))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .unwrap();
            assert_eq!((i, d2), brute);
        }
    }

    #[test]
    fn knn_and_within_match_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = random_points(&mut rng, 300);
        let tree = KdTree::new(&pts);
        for _ in 0..50 {
            let q = Point3::new(rng.random(), rng.random(), rng.random());
            let mut all: Vec<(usize, f64)> =
                pts.iter().enumerate().map(|(j, p)| (j, dist2(&q, p))).collect();
            all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            assert_eq!(tree.knn(&q, 7), all[..7].to_vec());
            let r = 0.2;
            let mut inside: Vec<usize> =
                all.iter().filter(|(_, d)| *d <= r * r).map(|(j, _)| *j).collect();
            inside.sort_unstable();
            assert_eq!(tree.within(&q, r), inside);
        }
    }

    #[test]
    fn duplicate_points_tie_break_low_index() {
        let pts = vec![Point3::new(1., 1., 1.); 10];
        let tree = KdTree::new(&pts);
        assert_eq!(tree.nearest(&Point3::origin()).unwrap().0, 0);
        let knn: Vec<usize> = tree.knn(&Point3::origin(), 3).into_iter().map(|x| x.0).collect();
        assert_eq!(knn, vec![0, 1, 2]);
    }
}

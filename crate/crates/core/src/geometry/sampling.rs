use super::{dist2, Point3};

/// Greedy farthest-point sampling of `k` indices starting at `seed`.
/// Ties resolve to the lowest index, so the result is deterministic.
pub fn farthest_point_sampling(points: &[Point3], k: usize, seed: usize) -> Vec<usize> {
    let n = points.len();
    if n == 0 || k == 0 {
        return Vec::new();
    }
    let k = k.min(n);
    let seed = seed.min(n - 1);
    let mut chosen = Vec::with_capacity(k);
    let mut nearest = vec![f64::INFINITY; n];
    let mut taken = vec![false; n];
    let mut current = seed;
    loop {
        chosen.push(current);
        taken[current] = true;
        if chosen.len() == k {
            break;
        }
        let anchor = points[current];
        let mut next = usize::MAX;
        let mut far = -1.0;
        for (i, p) in points.iter().enumerate() {
            let d = dist2(p, &anchor);
            if d < nearest[i] {
                nearest[i] = d;
            }
            if !taken[i] && nearest[i] > far {
                far = nearest[i];
                next = i;
            }
        }
        current = next;
    }
    chosen
}

use super::ProjectedPoint;
use crate::geometry::dist;

/// Corner non-maximum suppression.
///
/// Candidates are merged by complete-linkage agglomeration until any further
/// merge would put two members more than `delta` apart; each cluster keeps
/// its highest-probability member (ties to the lowest point index). Output
/// is ordered by point index.
pub fn corner_nms(candidates: &[ProjectedPoint], delta: f64) -> Vec<ProjectedPoint> {
    let n = candidates.len();
    if n == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    // Complete-linkage clusters never straddle connected components of the
    // `dist <= delta` graph, so each component is clustered on its own.
    for component in components(candidates, delta) {
        for cluster in complete_linkage(candidates, &component, delta) {
            let best = cluster
                .iter()
                .copied()
                .max_by(|&a, &b| {
                    let (pa, pb) = (&candidates[a], &candidates[b]);
                    pa.prob
                        .total_cmp(&pb.prob)
                        .then(pb.index.cmp(&pa.index))
                })
                .expect("clusters are non-empty");
            out.push(candidates[best]);
        }
    }
    out.sort_by_key(|p| p.index);
    out
}

fn components(candidates: &[ProjectedPoint], delta: f64) -> Vec<Vec<usize>> {
    let n = candidates.len();
    let mut label = vec![usize::MAX; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        label[start] = id;
        let mut members = vec![start];
        let mut head = 0;
        while head < members.len() {
            let i = members[head];
            head += 1;
            for j in 0..n {
                if label[j] == usize::MAX
                    && dist(&candidates[i].position, &candidates[j].position) <= delta
                {
                    label[j] = id;
                    members.push(j);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    comps
}

fn complete_linkage(candidates: &[ProjectedPoint], items: &[usize], delta: f64) -> Vec<Vec<usize>> {
    let m = items.len();
    let mut clusters: Vec<Option<Vec<usize>>> = items.iter().map(|&i| Some(vec![i])).collect();
    let mut d = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in (a + 1)..m {
            let v = dist(&candidates[items[a]].position, &candidates[items[b]].position);
            d[a][b] = v;
            d[b][a] = v;
        }
    }
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..m {
            if clusters[a].is_none() {
                continue;
            }
            for b in (a + 1)..m {
                if clusters[b].is_none() {
                    continue;
                }
                if best.is_none_or(|(_, _, v)| d[a][b] < v) {
                    best = Some((a, b, d[a][b]));
                }
            }
        }
        let Some((a, b, v)) = best else { break };
        if v > delta {
            break;
        }
        let moved = clusters[b].take().unwrap_or_default();
        if let Some(c) = clusters[a].as_mut() {
            c.extend(moved);
        }
        for k in 0..m {
            let merged = d[a][k].max(d[b][k]);
            d[a][k] = merged;
            d[k][a] = merged;
        }
    }
    clusters.into_iter().flatten().collect()
}

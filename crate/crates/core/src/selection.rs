//! Pruning of redundant open and low-confidence or duplicate closed
//! proposals into the final curve set.

use serde::{Deserialize, Serialize};

use crate::closed_proposals::{iou_sorted, ClosedProposal};
use crate::error::{Error, Result};
use crate::geometry::{chamfer_distance, ParametricCurve, Point3};
use crate::open_proposals::OpenProposal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub tau_o: f64,
    pub tau_gamma: f64,
    pub tau_iou: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            tau_o: 0.8,
            tau_gamma: 0.6,
            tau_iou: 0.6,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau_o", self.tau_o),
            ("tau_gamma", self.tau_gamma),
            ("tau_iou", self.tau_iou),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Final curves with their provenance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub open: Vec<OpenProposal>,
    pub closed: Vec<ClosedProposal>,
}

impl CurveSet {
    pub fn curves(&self) -> Vec<&ParametricCurve> {
        self.open
            .iter()
            .map(|p| &p.curve)
            .chain(self.closed.iter().map(|p| &p.curve))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.open.len() + self.closed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

fn sorted_unique(a: &[usize]) -> Vec<usize> {
    let mut v = a.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// `max(|A∩B| / |A|, |A∩B| / |B|)`.
pub fn overlap(a: &[usize], b: &[usize]) -> Result<f64> {
    let (a, b) = (sorted_unique(a), sorted_unique(b));
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let i = intersection(&a, &b) as f64;
    Ok((i / a.len() as f64).max(i / b.len() as f64))
}

/// `|A∩B| / |A∪B|`; 0 when both are empty.
pub fn iou(a: &[usize], b: &[usize]) -> f64 {
    iou_sorted(&sorted_unique(a), &sorted_unique(b))
}

/// Greedy pass by descending member count (ties: smaller residual, then
/// pair indices); a proposal survives when its overlap with every kept one
/// is at most `tau_o`. Kept proposals stay in input order.
pub fn select_open(proposals: &[OpenProposal], cfg: &SelectionConfig) -> Vec<OpenProposal> {
    let mut order: Vec<usize> = (0..proposals.len())
        .filter(|&i| !proposals[i].members.is_empty())
        .collect();
    order.sort_by(|&x, &y| {
        let (a, b) = (&proposals[x], &proposals[y]);
        b.members
            .len()
            .cmp(&a.members.len())
            .then(a.fit_residual.total_cmp(&b.fit_residual))
            .then(a.pair.ids.cmp(&b.pair.ids))
            .then(x.cmp(&y))
    });
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let ok = kept.iter().all(|&k| {
            overlap(&proposals[i].members, &proposals[k].members).is_ok_and(|o| o <= cfg.tau_o)
        });
        if ok {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept.into_iter().map(|i| proposals[i].clone()).collect()
}

const MATCH_SAMPLES: usize = 64;

/// Drops proposals below `tau_gamma`, clusters the rest by single linkage
/// on `IoU > tau_iou`, keeps the most confident proposal of each cluster
/// (ties: more members, then smaller seed), and gives it the circle of the
/// cluster candidate closest in Chamfer distance to its member points.
pub fn select_closed(
    proposals: &[ClosedProposal],
    edges: &[Point3],
    cfg: &SelectionConfig,
) -> Vec<ClosedProposal> {
    let live: Vec<usize> = (0..proposals.len())
        .filter(|&i| proposals[i].confidence >= cfg.tau_gamma)
        .collect();
    let n = live.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for a in 0..n {
        for b in a + 1..n {
            if iou_sorted(&proposals[live[a]].members, &proposals[live[b]].members) > cfg.tau_iou {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; n];
    for a in 0..n {
        let r = find(&mut parent, a);
        if root_slot[r] == usize::MAX {
            root_slot[r] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[root_slot[r]].push(live[a]);
    }
    let mut out = Vec::with_capacity(clusters.len());
    for cluster in clusters {
        let best = cluster
            .iter()
            .copied()
            .max_by(|&x, &y| {
                let (a, b) = (&proposals[x], &proposals[y]);
                a.confidence
                    .total_cmp(&b.confidence)
                    .then(a.members.len().cmp(&b.members.len()))
                    .then(b.seed.cmp(&a.seed))
            })
            .expect("clusters are non-empty");
        let mut kept = proposals[best].clone();
        let segment: Vec<Point3> = kept.members.iter().filter_map(|&i| edges.get(i).copied()).collect();
        if cluster.len() > 1 && !segment.is_empty() {
            let score = |k: usize| {
                chamfer_distance(&proposals[k].curve.sample(MATCH_SAMPLES), &segment)
                    .unwrap_or(f64::INFINITY)
            };
            let mut choice = best;
            let mut choice_cd = score(best);
            for &k in &cluster {
                let cd = score(k);
                if cd < choice_cd {
                    choice = k;
                    choice_cd = cd;
                }
            }
            if choice != best {
                let src = &proposals[choice];
                kept.curve = src.curve.clone();
                kept.anchors = src.anchors;
                kept.offsets = src.offsets;
            }
        }
        out.push(kept);
    }
    out.sort_by_key(|p| p.seed);
    out
}

/// Runs both selections.
pub fn select(
    open: &[OpenProposal],
    closed: &[ClosedProposal],
    edges: &[Point3],
    cfg: &SelectionConfig,
) -> CurveSet {
    CurveSet {
        open: select_open(open, cfg),
        closed: select_closed(closed, edges, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_examples() {
        assert_eq!(overlap(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(overlap(&[1, 2, 3], &[2, 3, 4, 5]).unwrap(), 2.0 / 3.0);
        assert_eq!(overlap(&[1], &[2]).unwrap(), 0.0);
        assert!(matches!(overlap(&[], &[2]), Err(Error::EmptySet)));
    }

    #[test]
    fn iou_examples() {
        assert_eq!(iou(&[4, 5], &[5, 4]), 1.0);
        assert_eq!(iou(&[1, 2], &[2, 3]), 1.0 / 3.0);
        assert_eq!(iou(&[1, 2], &[3]), 0.0);
    }
}

//! Random proposal sets and independent checks of the selection rules.

use std::collections::{BTreeSet, HashSet};

use proptest::prelude::*;

use edgecurve::closed_proposals::ClosedProposal;
use edgecurve::detection::ProjectedPoint;
use edgecurve::geometry::{Circle, CurveKind, LineSegment, ParametricCurve, Point3, Vec3};
use edgecurve::open_proposals::{CornerPair, OpenProposal};
use edgecurve::selection::{select_closed, select_open, SelectionConfig};

pub const UNIVERSE: usize = 48;

pub fn edges() -> Vec<Point3> {
    (0..UNIVERSE)
        .map(|i| {
            let t = i as f64 / UNIVERSE as f64 * std::f64::consts::TAU;
            Point3::new(t.cos(), t.sin(), 0.1 * (i % 5) as f64)
        })
        .collect()
}

fn members() -> impl Strategy<Value = Vec<usize>> {
    // Contiguous runs make heavy overlaps common.
    prop_oneof![
        (0..UNIVERSE, 1..24usize).prop_map(|(s, n)| (s..(s + n).min(UNIVERSE)).collect()),
        proptest::collection::btree_set(0..UNIVERSE, 0..20).prop_map(|s| s.into_iter().collect()),
    ]
}

fn corner(index: usize, x: f64) -> ProjectedPoint {
    ProjectedPoint {
        index,
        position: Point3::new(x, 0.0, 0.0),
        prob: 1.0,
    }
}

fn open(i: usize, members: Vec<usize>, residual: f64) -> OpenProposal {
    let pair = CornerPair::new([i, i + 1], corner(i, 0.0), corner(i + 1, 1.0 + i as f64)).unwrap();
    let curve = ParametricCurve::Line(LineSegment::new(pair.c1.position, pair.c2.position));
    OpenProposal {
        pair,
        candidates: members.clone(),
        members,
        kind: CurveKind::Line,
        curve,
        fit_residual: residual,
        objective: residual,
        coverage: 1.0,
        proposal_loss: None,
    }
}

fn closed(seed: usize, members: Vec<usize>, radius: f64, confidence: f64) -> ClosedProposal {
    let c = Circle::full(Point3::origin(), Vec3::z(), radius).unwrap();
    ClosedProposal {
        seed,
        members,
        anchors: [Point3::origin(); 3],
        offsets: [Vec3::zeros(); 3],
        curve: ParametricCurve::Circle(c),
        fit_residual: 0.0,
        coverage: 1.0,
        confidence,
    }
}

pub fn open_set() -> impl Strategy<Value = Vec<OpenProposal>> {
    proptest::collection::vec((members(), 0.0..1.0f64), 0..16).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (m, r))| open(2 * i, m, (r * 4.0).round() / 4.0))
            .collect()
    })
}

pub fn closed_set() -> impl Strategy<Value = Vec<ClosedProposal>> {
    proptest::collection::vec((members(), 0.5..1.5f64, 0.0..1.0f64), 0..16).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (m, r, c))| closed(i, m, r, c))
            .collect()
    })
}

pub fn config() -> impl Strategy<Value = SelectionConfig> {
    (0.05..0.95f64, 0.05..0.95f64, 0.05..0.95f64).prop_map(|(tau_o, tau_gamma, tau_iou)| SelectionConfig {
        tau_o,
        tau_gamma,
        tau_iou,
    })
}

fn set(m: &[usize]) -> HashSet<usize> {
    m.iter().copied().collect()
}

fn overlap(a: &[usize], b: &[usize]) -> f64 {
    let (a, b) = (set(a), set(b));
    let i = a.intersection(&b).count() as f64;
    (i / a.len() as f64).max(i / b.len() as f64)
}

fn iou(a: &[usize], b: &[usize]) -> f64 {
    let (a, b) = (set(a), set(b));
    let u = a.union(&b).count();
    if u == 0 {
        0.0
    } else {
        a.intersection(&b).count() as f64 / u as f64
    }
}

/// Selection of open proposals: kept curves are a subsequence of the input,
/// pairwise overlap stays within `tau_o`, every dropped proposal collides
/// with a kept one, and reselecting changes nothing.
pub fn check_open(props: &[OpenProposal], cfg: &SelectionConfig) -> Result<(), String> {
    let kept = select_open(props, cfg);
    let mut cursor = 0;
    for k in &kept {
        let at = props[cursor..].iter().position(|p| p == k).ok_or("kept proposal is not an input in order")?;
        cursor += at + 1;
    }
    for (i, a) in kept.iter().enumerate() {
        if a.members.is_empty() {
            return Err("kept an empty proposal".into());
        }
        for b in &kept[i + 1..] {
            let o = overlap(&a.members, &b.members);
            if o > cfg.tau_o {
                return Err(format!("kept pair overlaps {o} > {}", cfg.tau_o));
            }
        }
    }
    for p in props.iter().filter(|p| !p.members.is_empty() && !kept.contains(p)) {
        if !kept.iter().any(|k| overlap(&p.members, &k.members) > cfg.tau_o) {
            return Err("dropped a proposal that collides with nothing kept".into());
        }
    }
    if select_open(&kept, cfg) != kept {
        return Err("open selection is not idempotent".into());
    }
    Ok(())
}

/// Selection of closed proposals: survivors clear `tau_gamma`, pairwise
/// IoU stays within `tau_iou`, one survivor per single-linkage cluster,
/// and reselecting changes nothing.
pub fn check_closed(props: &[ClosedProposal], edges: &[Point3], cfg: &SelectionConfig) -> Result<(), String> {
    let kept = select_closed(props, edges, cfg);
    let live: Vec<&ClosedProposal> = props.iter().filter(|p| p.confidence >= cfg.tau_gamma).collect();
    if kept.iter().any(|k| k.confidence < cfg.tau_gamma) {
        return Err("kept a proposal below tau_gamma".into());
    }
    for (i, a) in kept.iter().enumerate() {
        for b in &kept[i + 1..] {
            let v = iou(&a.members, &b.members);
            if v > cfg.tau_iou {
                return Err(format!("kept pair has IoU {v} > {}", cfg.tau_iou));
            }
        }
    }
    // Components of the "IoU above tau_iou" graph by flood fill.
    let mut comp = vec![usize::MAX; live.len()];
    let mut n_comp = 0;
    for s in 0..live.len() {
        if comp[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        comp[s] = n_comp;
        while let Some(x) = stack.pop() {
            for y in 0..live.len() {
                if comp[y] == usize::MAX && iou(&live[x].members, &live[y].members) > cfg.tau_iou {
                    comp[y] = n_comp;
                    stack.push(y);
                }
            }
        }
        n_comp += 1;
    }
    if kept.len() != n_comp {
        return Err(format!("{} survivors for {n_comp} clusters", kept.len()));
    }
    let seeds: BTreeSet<usize> = kept.iter().map(|k| k.seed).collect();
    if seeds.len() != kept.len() {
        return Err("two survivors share a seed".into());
    }
    if select_closed(&kept, edges, cfg) != kept {
        return Err("closed selection is not idempotent".into());
    }
    Ok(())
}

//! Closed (circle) proposals from feature-space clusters of edge points.
//!
//! Every edge point gets a feature vector; row `m` of the pairwise distance
//! matrix selects the points closer than `s_bar` as the cluster of seed `m`.
//! Each cluster is fitted with a circle through three farthest-point anchors
//! whose offsets are refined by pattern search, and scored by angular
//! coverage and residual.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    chamfer_distance, circle_from_three_points, farthest_point_sampling, Circle, KdTree,
    ParametricCurve, Point3, Vec3,
};
use crate::optimize::PatternSearch;
use crate::truth::GroundTruth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Oracle,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClosedConfig {
    /// Row threshold; `None` means `0.5 · k_margin`.
    pub s_bar: Option<f64>,
    pub k_margin: f64,
    pub min_members: usize,
    pub feature_kind: FeatureKind,
    /// Neighbourhood size for geometric features.
    pub feature_k: usize,
    /// Members used by the circle refinement, chosen by farthest-point
    /// sampling from the seed.
    pub fit_members: usize,
    /// Residual decay scale of the confidence, as a fraction of the radius.
    pub residual_scale: f64,
    /// Rows used as seeds, spread by farthest-point sampling when the edge
    /// set is larger.
    pub max_seeds: usize,
}

impl Default for ClosedConfig {
    fn default() -> Self {
        Self {
            s_bar: None,
            k_margin: 100.0,
            min_members: 8,
            feature_kind: FeatureKind::Geometric,
            feature_k: 16,
            fit_members: 64,
            residual_scale: 0.05,
            max_seeds: 128,
        }
    }
}

impl ClosedConfig {
    pub fn threshold(&self) -> f64 {
        self.s_bar.unwrap_or(0.5 * self.k_margin)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.threshold() > 0.0) || !self.threshold().is_finite() {
            return bad("s_bar must be positive");
        }
        if !(self.k_margin >= 0.0) || !self.k_margin.is_finite() {
            return bad("k_margin must be non-negative");
        }
        if self.min_members < 3 {
            return bad("min_members must be at least 3");
        }
        if self.feature_k < 4 || self.fit_members < 3 {
            return bad("feature_k >= 4 and fit_members >= 3 required");
        }
        if self.max_seeds < 1 {
            return bad("max_seeds must be at least 1");
        }
        if !(self.residual_scale > 0.0) {
            return bad("residual_scale must be positive");
        }
        Ok(())
    }
}

/// Row-major per-point features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEmbedding {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl FeatureEmbedding {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::InvalidInput("feature data is not a multiple of dim".into()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// One-hot curve id scaled by `k_margin`; unlabelled points share slot 0.
pub fn oracle_features(curve_ids: &[Option<u32>], k_margin: f64) -> FeatureEmbedding {
    let mut ids: Vec<u32> = curve_ids.iter().flatten().copied().collect();
    ids.sort_unstable();
    ids.dedup();
    let dim = (ids.len() + 1).max(8);
    let mut data = vec![0.0; curve_ids.len() * dim];
    for (i, id) in curve_ids.iter().enumerate() {
        let slot = id.map_or(0, |id| ids.binary_search(&id).map_or(0, |k| k + 1));
        data[i * dim + slot] = k_margin;
    }
    FeatureEmbedding { dim, data }
}

pub const GEOMETRIC_DIM: usize = 8;

/// Plane normal (smallest principal axis) and centroid of `pts`.
fn fit_plane(pts: &[Point3]) -> (Point3, Vec3, [f64; 3]) {
    let n = pts.len() as f64;
    let mean = pts.iter().map(|p| p.coords).sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov / n);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let normal = eig.eigenvectors.column(order[2]).into_owned();
    let ev = order.map(|k| eig.eigenvalues[k].max(0.0));
    (Point3::from(mean), normal, ev)
}

/// Algebraic (Kasa) circle fit in the best-fit plane.
pub fn fit_circle_least_squares(pts: &[Point3]) -> Option<Circle> {
    if pts.len() < 3 {
        return None;
    }
    let (origin, normal, ev) = fit_plane(pts);
    if !(ev[1] > 1e-18 * ev[0].max(f64::MIN_POSITIVE)) {
        return None;
    }
    let u = crate::geometry::any_perpendicular(&normal);
    let v = normal.cross(&u);
    let mut ata = Matrix3::zeros();
    let mut atb = Vec3::zeros();
    for p in pts {
        let d = p - origin;
        let (x, y) = (d.dot(&u), d.dot(&v));
        let row = Vec3::new(x, y, 1.0);
        ata += row * row.transpose();
        atb += row * -(x * x + y * y);
    }
    let sol = ata.lu().solve(&atb)?;
    let (cx, cy) = (-0.5 * sol.x, -0.5 * sol.y);
    let r2 = cx * cx + cy * cy - sol.z;
    if !(r2 > 0.0) || !r2.is_finite() {
        return None;
    }
    Circle::full(origin + u * cx + v * cy, normal, r2.sqrt()).ok()
}

/// Sign-canonical unit normal: the largest-magnitude component is positive.
fn canonical_normal(n: &Vec3) -> Vec3 {
    let k = n.iamax();
    if n[k] < 0.0 {
        -n
    } else {
        *n
    }
}

/// Local circle-of-curvature features: centre, plane normal and radius of a
/// circle fitted to each point's `k` nearest edge neighbours, scaled so that
/// a shift of `0.05 · scale` in centre or radius costs `k_margin`. Points
/// whose neighbourhood is straight get features far from everything else.
pub fn geometric_features(
    edges: &[Point3],
    k: usize,
    scale: f64,
    k_margin: f64,
) -> Result<FeatureEmbedding> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidInput("feature scale must be positive".into()));
    }
    let tree = KdTree::new(edges);
    let s = k_margin / (0.05 * scale);
    let far = 1e4 * s;
    let rows: Vec<[f64; GEOMETRIC_DIM]> = edges
        .par_iter()
        .map(|p| {
            let nb: Vec<Point3> = tree.knn(p, k).into_iter().map(|(j, _)| edges[j]).collect();
            match fit_circle_least_squares(&nb).filter(|c| c.radius <= scale) {
                Some(c) => {
                    let n = canonical_normal(&c.normal);
                    [
                        s * c.center.x,
                        s * c.center.y,
                        s * c.center.z,
                        k_margin * n.x,
                        k_margin * n.y,
                        k_margin * n.z,
                        s * c.radius,
                        0.0,
                    ]
                }
                None => [far * p.x, far * p.y, far * p.z, 0.0, 0.0, 0.0, 0.0, far],
            }
        })
        .collect();
    FeatureEmbedding::new(GEOMETRIC_DIM, rows.into_iter().flatten().collect())
}

/// Dense symmetric matrix of pairwise feature distances.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub m: usize,
    pub data: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&x| x as f32).collect()
    }
}

fn feature_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn build_similarity(f: &FeatureEmbedding) -> SimilarityMatrix {
    let m = f.len();
    let data: Vec<f64> = (0..m)
        .into_par_iter()
        .flat_map_iter(|i| {
            (0..m).map(move |j| match i.cmp(&j) {
                std::cmp::Ordering::Equal => 0.0,
                // Evaluate each unordered pair in a fixed order so S is
                // exactly symmetric.
                std::cmp::Ordering::Less => feature_distance(f.row(i), f.row(j)),
                std::cmp::Ordering::Greater => feature_distance(f.row(j), f.row(i)),
            })
        })
        .collect();
    SimilarityMatrix { m, data }
}

/// Sum over ordered pairs `i ≠ j`: `S_ij` for same-curve pairs, the hinge
/// `max(0, K − S_ij)` for pairs on different curves. Pairs involving an
/// unlabelled point are ignored.
pub fn similarity_loss(s: &SimilarityMatrix, membership: &[Option<u32>], k_margin: f64) -> Result<f64> {
    if membership.len() != s.m {
        return Err(Error::LengthMismatch {
            expected: s.m,
            actual: membership.len(),
        });
    }
    let total = (0..s.m)
        .into_par_iter()
        .map(|i| {
            let Some(a) = membership[i] else { return 0.0 };
            let mut acc = 0.0;
            for j in 0..s.m {
                let Some(b) = membership[j] else { continue };
                if i == j {
                    continue;
                }
                let d = s.get(i, j);
                acc += if a == b { d } else { (k_margin - d).max(0.0) };
            }
            acc
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum();
    Ok(total)
}

/// One candidate per row: seed `m` and `{j : S_mj < s_bar}`, both drawn from
/// points that are not excluded. Candidates below `min_members` are dropped.
pub fn extract_clusters(
    s: &SimilarityMatrix,
    cfg: &ClosedConfig,
    excluded: Option<&[bool]>,
) -> Vec<(usize, Vec<usize>)> {
    let thr = cfg.threshold();
    let skip = |j: usize| excluded.is_some_and(|e| e.get(j).copied().unwrap_or(false));
    (0..s.m)
        .filter(|&m| !skip(m))
        .filter_map(|m| {
            let members: Vec<usize> = s
                .row(m)
                .iter()
                .enumerate()
                .filter(|&(j, &d)| d < thr && !skip(j))
                .map(|(j, _)| j)
                .collect();
            (members.len() >= cfg.min_members).then_some((m, members))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedProposal {
    pub seed: usize,
    /// Indices into the edge list, sorted.
    pub members: Vec<usize>,
    pub anchors: [Point3; 3],
    pub offsets: [Vec3; 3],
    /// Always a full circle.
    pub curve: ParametricCurve,
    /// Mean member-to-circle distance.
    pub fit_residual: f64,
    pub coverage: f64,
    pub confidence: f64,
}

impl ClosedProposal {
    pub fn circle(&self) -> &Circle {
        match &self.curve {
            ParametricCurve::Circle(c) => c,
            _ => unreachable!("closed proposals always hold a circle"),
        }
    }
}

fn mean_distance(c: &Circle, pts: &[Point3]) -> f64 {
    pts.iter().map(|p| c.distance_to(p)).sum::<f64>() / pts.len() as f64
}

/// One minus the largest angular gap between members, as a fraction of
/// the full turn.
pub fn angular_coverage(c: &Circle, pts: &[Point3]) -> f64 {
    if pts.is_empty() {
        return 0.0;
    }
    let mut a: Vec<f64> = pts.iter().map(|p| c.angle_of(p)).collect();
    a.sort_by(f64::total_cmp);
    let wrap = a[0] + TAU - a[a.len() - 1];
    let gap = a.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max);
    (1.0 - gap / TAU).clamp(0.0, 1.0)
}

/// `γ = coverage · exp(−residual / (scale · r))`.
pub fn confidence(coverage: f64, fit_residual: f64, radius: f64, residual_scale: f64) -> f64 {
    (coverage * (-fit_residual / (residual_scale * radius)).exp()).clamp(0.0, 1.0)
}

/// Fits a circle to `members` (indices into `edges`) through three
/// farthest-point anchors starting at `seed`, refining the anchor offsets to
/// minimise the mean member-to-circle distance.
pub fn fit_closed_circle(
    members: &[usize],
    seed: usize,
    edges: &[Point3],
    cfg: &ClosedConfig,
) -> Result<ClosedProposal> {
    let mut members = members.to_vec();
    members.sort_unstable();
    members.dedup();
    let pts: Vec<Point3> = members.iter().map(|&i| edges[i]).collect();
    let seed_pos = members
        .iter()
        .position(|&i| i == seed)
        .ok_or_else(|| Error::InvalidInput("seed is not a member".into()))?;
    let mut distinct = pts.clone();
    distinct.sort_by(|a, b| a.coords.as_slice().partial_cmp(b.coords.as_slice()).unwrap_or(std::cmp::Ordering::Equal));
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::TooFewMembers(distinct.len()));
    }
    let fit_idx = farthest_point_sampling(&pts, cfg.fit_members, seed_pos);
    let fit_pts: Vec<Point3> = fit_idx.iter().map(|&k| pts[k]).collect();
    let anchors = [fit_pts[0], fit_pts[1], fit_pts[2]];
    let start = circle_from_three_points(anchors[0], anchors[1], anchors[2]).map_err(|e| match e {
        Error::DuplicatePoints => Error::TooFewMembers(distinct.len()),
        _ => Error::CollinearCluster,
    })?;
    let build = |x: &[f64]| {
        let q = |k: usize| anchors[k] + Vec3::new(x[3 * k], x[3 * k + 1], x[3 * k + 2]);
        circle_from_three_points(q(0), q(1), q(2)).ok()
    };
    let search = PatternSearch {
        initial_step: 0.05 * start.radius,
        min_step: 1e-10 * start.radius,
        max_evals: 6000,
    };
    let res = search.minimize(
        |x| build(x).map_or(f64::INFINITY, |c| mean_distance(&c, &fit_pts)),
        vec![0.0; 9],
    );
    let circle = build(&res.x).ok_or(Error::CollinearCluster)?;
    let offsets = [0, 1, 2].map(|k| Vec3::new(res.x[3 * k], res.x[3 * k + 1], res.x[3 * k + 2]));
    let fit_residual = mean_distance(&circle, &pts);
    let coverage = angular_coverage(&circle, &pts);
    let confidence = confidence(coverage, fit_residual, circle.radius, cfg.residual_scale);
    Ok(ClosedProposal {
        seed,
        members,
        anchors,
        offsets,
        curve: ParametricCurve::Circle(circle),
        fit_residual,
        coverage,
        confidence,
    })
}

/// Features for `edges` according to `cfg.feature_kind`. Oracle features
/// need the ground-truth curve id of every edge point.
pub fn features_for(
    edges: &[Point3],
    curve_ids: Option<&[Option<u32>]>,
    scale: f64,
    cfg: &ClosedConfig,
) -> Result<FeatureEmbedding> {
    match cfg.feature_kind {
        FeatureKind::Oracle => {
            let ids = curve_ids.ok_or_else(|| {
                Error::Config("oracle features need ground-truth curve ids".into())
            })?;
            if ids.len() != edges.len() {
                return Err(Error::LengthMismatch {
                    expected: edges.len(),
                    actual: ids.len(),
                });
            }
            Ok(oracle_features(ids, cfg.k_margin))
        }
        FeatureKind::Geometric => {
            if edges.len() < cfg.feature_k {
                return FeatureEmbedding::new(GEOMETRIC_DIM, Vec::new());
            }
            geometric_features(edges, cfg.feature_k, scale, cfg.k_margin)
        }
    }
}

/// Fits every extracted cluster; clusters that cannot hold a circle yield
/// nothing. Output is in seed order.
pub fn generate_closed_proposals(
    edges: &[Point3],
    s: &SimilarityMatrix,
    cfg: &ClosedConfig,
    excluded: Option<&[bool]>,
) -> Result<Vec<ClosedProposal>> {
    cfg.validate()?;
    if s.m != edges.len() {
        return Err(Error::LengthMismatch {
            expected: edges.len(),
            actual: s.m,
        });
    }
    let mut clusters = extract_clusters(s, cfg, excluded);
    if clusters.len() > cfg.max_seeds {
        let seeds: Vec<Point3> = clusters.iter().map(|(m, _)| edges[*m]).collect();
        let mut keep = farthest_point_sampling(&seeds, cfg.max_seeds, 0);
        keep.sort_unstable();
        clusters = keep.into_iter().map(|k| std::mem::take(&mut clusters[k])).collect();
    }
    // Rows with identical member sets give the same circle up to the anchor
    // choice; only the smallest seed of each set is fitted.
    let mut seen = std::collections::HashSet::new();
    clusters.retain(|(_, members)| seen.insert(members.clone()));
    let out: Vec<Option<ClosedProposal>> = clusters
        .par_iter()
        .map(|(seed, members)| fit_closed_circle(members, *seed, edges, cfg).ok())
        .collect();
    Ok(out.into_iter().flatten().collect())
}

pub fn iou_sorted(a: &[usize], b: &[usize]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Training-style confidence label: 1 when the members overlap the
/// best-matching ground-truth segment with IoU above 0.5.
pub fn confidence_label(members: &[usize], edge_curve_ids: &[Option<u32>]) -> f64 {
    match best_gt_segment(members, edge_curve_ids) {
        Some((_, iou)) if iou > 0.5 => 1.0,
        _ => 0.0,
    }
}

/// Ground-truth curve whose edge-point segment has the highest IoU with
/// `members`; ties go to the smaller id.
pub fn best_gt_segment(members: &[usize], edge_curve_ids: &[Option<u32>]) -> Option<(u32, f64)> {
    let mut ids: Vec<u32> = members
        .iter()
        .filter_map(|&i| edge_curve_ids.get(i).copied().flatten())
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids.into_iter()
        .map(|id| {
            let seg: Vec<usize> = (0..edge_curve_ids.len())
                .filter(|&i| edge_curve_ids[i] == Some(id))
                .collect();
            (id, iou_sorted(members, &seg))
        })
        .fold(None, |best: Option<(u32, f64)>, cur| match best {
            Some(b) if b.1 >= cur.1 => Some(b),
            _ => Some(cur),
        })
}

const LOSS_SAMPLES: usize = 256;

/// Similarity loss plus summed squared confidence error plus, for proposals
/// whose best-matching ground-truth curve is a full circle, the Chamfer
/// distance between fitted and true circle samples.
pub fn closed_loss(
    s: &SimilarityMatrix,
    proposals: &[ClosedProposal],
    edge_curve_ids: &[Option<u32>],
    gt: &GroundTruth,
    k_margin: f64,
) -> Result<f64> {
    let l_sim = similarity_loss(s, edge_curve_ids, k_margin)?;
    let mut l_score = 0.0;
    let mut l_para = 0.0;
    for p in proposals {
        let target = confidence_label(&p.members, edge_curve_ids);
        l_score += (p.confidence - target).powi(2);
        let gt_curve = best_gt_segment(&p.members, edge_curve_ids).and_then(|(id, _)| gt.curve(id));
        if let Some(g) = gt_curve.filter(|g| g.curve.is_closed()) {
            l_para += chamfer_distance(
                &p.curve.sample(LOSS_SAMPLES),
                &g.curve.sample(LOSS_SAMPLES),
            )?;
        }
    }
    Ok(l_sim + l_score + l_para)
}

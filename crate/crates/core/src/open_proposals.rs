//! Open curve proposals between corner pairs.
//!
//! Each pair of corners defines a sphere; edge points inside it are
//! subsampled and an open curve with its endpoints pinned to the corners is
//! fitted for each curve type by alternating fit and re-segmentation. The
//! type with the smallest Chamfer residual wins, preferring simpler types
//! when residuals are close.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::ProjectedPoint;
use crate::error::{Error, Result};
use crate::geometry::{
    chamfer_distance, circle_from_three_points, dist2, farthest_point_sampling, CubicBSpline,
    CurveKind, LineSegment, ParametricCurve, Point3, Vec3,
};
use crate::optimize::PatternSearch;
use crate::truth::GroundTruth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsetSampling {
    Fps,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProposalConfig {
    /// Sphere radius multiplier `R' = radius_scale · R`.
    pub radius_scale: f64,
    pub sample_k: usize,
    /// Re-segmentation tolerance as a fraction of `R`.
    pub segment_tol: f64,
    pub em_iters: usize,
    pub w_m: f64,
    pub w_c: f64,
    pub w_p: f64,
    pub sampling: SubsetSampling,
    /// Seed for uniform subset sampling.
    pub seed: u64,
    /// Curve samples used by the fitting objective.
    pub curve_samples: usize,
    /// A simpler type wins when its residual is within this relative margin
    /// of the best one.
    pub type_margin: f64,
    /// Minimum coverage (one minus the largest parameter gap between
    /// members) for a proposal to be kept.
    pub min_coverage: f64,
    /// Maximum mean member-to-curve distance as a fraction of `R`.
    pub max_residual: f64,
    /// Maximum symmetric fitting objective as a fraction of `R`, on top of
    /// `objective_floor` point spacings.
    pub max_objective: f64,
    /// Spacings of slack for the sampling floor of the objective, which
    /// dominates on short, sparsely sampled curves.
    pub objective_floor: f64,
    pub min_members: usize,
    /// A proposal is dropped when its curve passes within this distance,
    /// as a fraction of `R`, of a corner other than its own two.
    pub corner_clearance: f64,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self {
            radius_scale: 1.0,
            sample_k: 64,
            segment_tol: 0.03,
            em_iters: 3,
            w_m: 1.0,
            w_c: 1.0,
            w_p: 10.0,
            sampling: SubsetSampling::Fps,
            seed: 0,
            curve_samples: 64,
            type_margin: 0.05,
            min_coverage: 0.65,
            max_residual: 0.05,
            max_objective: 0.1,
            objective_floor: 0.5,
            min_members: 3,
            corner_clearance: 0.1,
        }
    }
}

impl ProposalConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.radius_scale >= 1.0) || !self.radius_scale.is_finite() {
            return bad("radius_scale must be finite and at least 1");
        }
        if self.sample_k < 8 {
            return bad("sample_k must be at least 8");
        }
        if self.em_iters < 1 {
            return bad("em_iters must be at least 1");
        }
        if !(self.segment_tol > 0.0) || !self.segment_tol.is_finite() {
            return bad("segment_tol must be positive");
        }
        if !(self.w_m >= 0.0 && self.w_c >= 0.0 && self.w_p >= 0.0) {
            return bad("proposal loss weights must be non-negative");
        }
        if self.curve_samples < 8 {
            return bad("curve_samples must be at least 8");
        }
        if !(0.0..=1.0).contains(&self.min_coverage) {
            return bad("min_coverage must lie in [0, 1]");
        }
        if !(self.corner_clearance >= 0.0) {
            return bad("corner_clearance must be non-negative");
        }
        if !(self.type_margin >= 0.0) || !(self.max_residual > 0.0) || !(self.max_objective > 0.0) || !(self.objective_floor >= 0.0) {
            return bad("type_margin must be non-negative, max_residual and max_objective positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerPair {
    /// Positions of the two corners in the corner list.
    pub ids: [usize; 2],
    pub c1: ProjectedPoint,
    pub c2: ProjectedPoint,
    #[serde(with = "crate::io::point_serde")]
    pub center: Point3,
    pub radius: f64,
}

impl CornerPair {
    pub fn new(ids: [usize; 2], c1: ProjectedPoint, c2: ProjectedPoint) -> Result<Self> {
        let radius = 0.5 * (c2.position - c1.position).norm();
        if !(radius > 0.0) {
            return Err(Error::DuplicatePoints);
        }
        Ok(Self {
            ids,
            c1,
            c2,
            center: Point3::from(0.5 * (c1.position.coords + c2.position.coords)),
            radius,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenProposal {
    pub pair: CornerPair,
    /// Sphere subsample `E^o`, indices into the edge list.
    pub candidates: Vec<usize>,
    /// Segmentation mask, indices into the edge list, sorted.
    pub members: Vec<usize>,
    pub kind: CurveKind,
    pub curve: ParametricCurve,
    /// Mean member-to-curve distance.
    pub fit_residual: f64,
    /// Symmetric fitting objective on the final members.
    pub objective: f64,
    /// One minus the largest parameter gap between members.
    pub coverage: f64,
    pub proposal_loss: Option<f64>,
}

/// All unordered corner pairs in lexicographic index order. Pairs of
/// coincident corners are skipped.
pub fn enumerate_pairs(corners: &[ProjectedPoint]) -> Result<Vec<CornerPair>> {
    if corners.len() < 2 {
        return Err(Error::TooFewCorners(corners.len()));
    }
    let mut out = Vec::with_capacity(corners.len() * (corners.len() - 1) / 2);
    for i in 0..corners.len() {
        for j in i + 1..corners.len() {
            if let Ok(p) = CornerPair::new([i, j], corners[i], corners[j]) {
                out.push(p);
            }
        }
    }
    Ok(out)
}

/// Edge points within `radius_scale · R` of the pair center, reduced to
/// `sample_k` points when there are more. Sorted ascending.
pub fn sphere_subsample(edges: &[Point3], pair: &CornerPair, cfg: &ProposalConfig) -> Vec<usize> {
    let r = cfg.radius_scale * pair.radius;
    let r2 = r * r;
    let inside: Vec<usize> = (0..edges.len())
        .filter(|&i| dist2(&edges[i], &pair.center) <= r2)
        .collect();
    if inside.len() <= cfg.sample_k {
        return inside;
    }
    let mut picked: Vec<usize> = match cfg.sampling {
        SubsetSampling::Fps => {
            let pts: Vec<Point3> = inside.iter().map(|&i| edges[i]).collect();
            let c1 = pair.c1.position;
            let seed = (0..pts.len())
                .min_by(|&a, &b| dist2(&pts[a], &c1).total_cmp(&dist2(&pts[b], &c1)))
                .unwrap_or(0);
            farthest_point_sampling(&pts, cfg.sample_k, seed)
                .into_iter()
                .map(|k| inside[k])
                .collect()
        }
        SubsetSampling::Uniform => {
            let stream = (pair.ids[0] as u64) << 32 | pair.ids[1] as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            rand::seq::index::sample(&mut rng, inside.len(), cfg.sample_k)
                .into_iter()
                .map(|k| inside[k])
                .collect()
        }
    };
    picked.sort_unstable();
    picked
}

/// Mean member-to-curve distance.
pub fn member_residual(curve: &ParametricCurve, members: &[Point3]) -> f64 {
    if members.is_empty() {
        return f64::INFINITY;
    }
    members.iter().map(|p| curve.distance_to(p)).sum::<f64>() / members.len() as f64
}

const COARSE_SEGMENTS: usize = 32;
const FINE_SPLIT: usize = 8;

/// Mean member distance to a B-spline through a piecewise-linear proxy: the
/// nearest vertex of a coarse polyline picks a window of two coarse spans,
/// which is then searched at a finer subdivision. The proxy is off by at
/// most the chord sag of one fine segment.
fn spline_member_residual(s: &CubicBSpline, members: &[Point3]) -> f64 {
    let n = COARSE_SEGMENTS;
    let coarse: Vec<Point3> = (0..=n).map(|j| s.point_at(j as f64 / n as f64)).collect();
    let fine_n = n * FINE_SPLIT;
    let fine: Vec<Point3> = (0..=fine_n)
        .map(|j| {
            if j % FINE_SPLIT == 0 {
                coarse[j / FINE_SPLIT]
            } else {
                s.point_at(j as f64 / fine_n as f64)
            }
        })
        .collect();
    let total: f64 = members
        .iter()
        .map(|p| {
            let j = (0..=n)
                .min_by(|&a, &b| dist2(&coarse[a], p).total_cmp(&dist2(&coarse[b], p)))
                .unwrap_or(0);
            let lo = j.saturating_sub(1) * FINE_SPLIT;
            let hi = (j + 1).min(n) * FINE_SPLIT;
            (lo..hi)
                .map(|k| LineSegment::new(fine[k], fine[k + 1]).distance_to(p))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / members.len() as f64
}

/// Fitting objective: mean member-to-curve distance plus mean distance from
/// arc-length-uniform curve samples to the nearest member. B-spline
/// distances use a fine polyline proxy.
pub fn curve_member_chamfer(curve: &ParametricCurve, members: &[Point3], samples: usize) -> f64 {
    if members.is_empty() {
        return f64::INFINITY;
    }
    let forward = match curve {
        ParametricCurve::BSpline(s) => spline_member_residual(s, members),
        _ => member_residual(curve, members),
    };
    let s = curve.sample_by_length(samples);
    let backward = s
        .iter()
        .map(|q| {
            members
                .iter()
                .map(|p| dist2(p, q))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .sum::<f64>()
        / s.len() as f64;
    forward + backward
}

/// One minus the largest gap between consecutive member parameters, the
/// curve ends included. Robust to the sparse, uneven spacing of sampled
/// edges where binned occupancy is not.
pub fn parameter_coverage(curve: &ParametricCurve, points: &[Point3]) -> f64 {
    let mut ts: Vec<f64> = points.iter().map(|p| curve.parameter_of(p).clamp(0.0, 1.0)).collect();
    ts.sort_by(f64::total_cmp);
    let mut prev = 0.0;
    let mut gap: f64 = 0.0;
    for t in ts.into_iter().chain(std::iter::once(1.0)) {
        gap = gap.max(t - prev);
        prev = t;
    }
    1.0 - gap
}

/// Orthonormal frame `(d, e1, e2)` with `d` along the chord.
fn chord_frame(pair: &CornerPair) -> (Vec3, Vec3, Vec3) {
    let d = (pair.c2.position - pair.c1.position).normalize();
    let e1 = crate::geometry::any_perpendicular(&d);
    let e2 = d.cross(&e1);
    (d, e1, e2)
}

fn arc_through(pair: &CornerPair, q: &Point3) -> Option<ParametricCurve> {
    let (a, b) = (pair.c1.position, pair.c2.position);
    let circle = circle_from_three_points(a, *q, b).ok()?;
    Some(ParametricCurve::Circle(circle.arc_between(&a, &b, std::slice::from_ref(q))))
}

fn fit_arc(pair: &CornerPair, pts: &[Point3], samples: usize) -> Option<ParametricCurve> {
    let (d, e1, e2) = chord_frame(pair);
    let r = pair.radius;
    let center = pair.center;
    // Start from the member closest to the bisector plane that is clearly
    // off the chord.
    let start = pts
        .iter()
        .filter(|p| {
            let q = *p - center;
            (q - d * q.dot(&d)).norm() > 1e-3 * r
        })
        .min_by(|p, q| {
            let a = (*p - center).dot(&d).abs();
            let b = (*q - center).dot(&d).abs();
            a.total_cmp(&b)
        })?;
    let q = start - center;
    let x0 = vec![q.dot(&e1), q.dot(&e2)];
    let build = |x: &[f64]| arc_through(pair, &(center + e1 * x[0] + e2 * x[1]));
    let search = PatternSearch {
        initial_step: 0.1 * r,
        min_step: 1e-7 * r,
        max_evals: 600,
    };
    let res = search.minimize(
        |x| build(x).map_or(f64::INFINITY, |c| curve_member_chamfer(&c, pts, samples)),
        x0,
    );
    if !res.value.is_finite() {
        return None;
    }
    // Orient the arc by the members rather than by the free point.
    let free = center + e1 * res.x[0] + e2 * res.x[1];
    let circle = circle_from_three_points(pair.c1.position, free, pair.c2.position).ok()?;
    Some(ParametricCurve::Circle(circle.arc_between(
        &pair.c1.position,
        &pair.c2.position,
        pts,
    )))
}

/// Least-squares interior control points for fixed parameters `ts`.
fn bezier_interior(p0: &Point3, p3: &Point3, pts: &[Point3], ts: &[f64]) -> Option<(Point3, Point3)> {
    let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
    let (mut r1, mut r2) = (Vec3::zeros(), Vec3::zeros());
    for (p, &t) in pts.iter().zip(ts) {
        let w = CubicBSpline::basis(t);
        let rhs = p.coords - p0.coords * w[0] - p3.coords * w[3];
        a11 += w[1] * w[1];
        a12 += w[1] * w[2];
        a22 += w[2] * w[2];
        r1 += rhs * w[1];
        r2 += rhs * w[2];
    }
    let det = a11 * a22 - a12 * a12;
    if !(det.abs() > 1e-12 * (a11 * a22).max(1e-300)) {
        return None;
    }
    let p1 = (r1 * a22 - r2 * a12) / det;
    let p2 = (r2 * a11 - r1 * a12) / det;
    Some((Point3::from(p1), Point3::from(p2)))
}

fn fit_bspline(pair: &CornerPair, pts: &[Point3], samples: usize) -> ParametricCurve {
    let (p0, p3) = (pair.c1.position, pair.c2.position);
    let chord = p3 - p0;
    let mut spline = CubicBSpline::new([p0, p0 + chord / 3.0, p0 + chord * (2.0 / 3.0), p3]);
    let mut ts: Vec<f64> = pts
        .iter()
        .map(|p| ((p - p0).dot(&chord) / chord.norm_squared()).clamp(0.0, 1.0))
        .collect();
    for _ in 0..6 {
        let Some((p1, p2)) = bezier_interior(&p0, &p3, pts, &ts) else {
            break;
        };
        spline = CubicBSpline::new([p0, p1, p2, p3]);
        ts = pts.iter().map(|p| spline.closest_parameter(p)).collect();
    }
    let c = spline.control;
    let x0 = vec![c[1].x, c[1].y, c[1].z, c[2].x, c[2].y, c[2].z];
    let build = |x: &[f64]| {
        ParametricCurve::BSpline(CubicBSpline::new([
            p0,
            Point3::new(x[0], x[1], x[2]),
            Point3::new(x[3], x[4], x[5]),
            p3,
        ]))
    };
    let search = PatternSearch {
        initial_step: 0.02 * pair.radius,
        min_step: 1e-5 * pair.radius,
        max_evals: 600,
    };
    let res = search.minimize(|x| curve_member_chamfer(&build(x), pts, samples), x0);
    build(&res.x)
}

fn fit_kind(kind: CurveKind, pair: &CornerPair, pts: &[Point3], samples: usize) -> Option<ParametricCurve> {
    match kind {
        CurveKind::Line => Some(ParametricCurve::Line(LineSegment::new(
            pair.c1.position,
            pair.c2.position,
        ))),
        CurveKind::Circle => fit_arc(pair, pts, samples),
        CurveKind::BSpline => Some(fit_bspline(pair, pts, samples)),
    }
}

/// Result of the alternating fit for one curve type.
#[derive(Debug, Clone)]
pub struct TypeFit {
    pub curve: ParametricCurve,
    pub members: Vec<usize>,
    pub residual: f64,
    pub objective: f64,
    /// Objective after each accepted iteration.
    pub history: Vec<f64>,
}

/// Alternates fitting and re-segmentation for one type. An iteration whose
/// objective exceeds the previous one is discarded and the loop stops.
pub fn fit_type(
    kind: CurveKind,
    pair: &CornerPair,
    edges: &[Point3],
    candidates: &[usize],
    cfg: &ProposalConfig,
) -> Option<TypeFit> {
    let tol = cfg.segment_tol * pair.radius;
    let mut members: Vec<usize> = candidates.to_vec();
    let mut best: Option<TypeFit> = None;
    for _ in 0..cfg.em_iters {
        let pts: Vec<Point3> = members.iter().map(|&i| edges[i]).collect();
        let Some(curve) = fit_kind(kind, pair, &pts, cfg.curve_samples) else {
            break;
        };
        let reseg: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&i| curve.distance_to(&edges[i]) < tol)
            .collect();
        if reseg.is_empty() {
            break;
        }
        let rpts: Vec<Point3> = reseg.iter().map(|&i| edges[i]).collect();
        let objective = curve_member_chamfer(&curve, &rpts, cfg.curve_samples);
        let residual = member_residual(&curve, &rpts);
        match &mut best {
            Some(b) if objective > b.objective => break,
            Some(b) => {
                b.history.push(objective);
                b.curve = curve;
                b.residual = residual;
                b.objective = objective;
                b.members = reseg.clone();
            }
            None => {
                best = Some(TypeFit {
                    curve,
                    members: reseg.clone(),
                    residual,
                    objective,
                    history: vec![objective],
                })
            }
        }
        if reseg == members {
            break;
        }
        members = reseg;
    }
    best
}

/// Fits all types and keeps the one with the lowest objective, preferring
/// Line over Circle over BSpline when objectives are within `type_margin`.
pub fn fit_open_curve(
    pair: &CornerPair,
    edges: &[Point3],
    candidates: &[usize],
    cfg: &ProposalConfig,
) -> Result<OpenProposal> {
    if candidates.is_empty() {
        return Err(Error::EmptyMembers);
    }
    let fits: Vec<(CurveKind, TypeFit)> = CurveKind::ALL
        .iter()
        .filter_map(|&k| fit_type(k, pair, edges, candidates, cfg).map(|f| (k, f)))
        .collect();
    let best = fits
        .iter()
        .map(|(_, f)| f.objective)
        .fold(f64::INFINITY, f64::min);
    let slack = best * (1.0 + cfg.type_margin) + 1e-9 * pair.radius;
    let (kind, fit) = fits
        .into_iter()
        .find(|(_, f)| f.objective <= slack)
        .ok_or(Error::EmptyMembers)?;
    let pts: Vec<Point3> = fit.members.iter().map(|&i| edges[i]).collect();
    let coverage = parameter_coverage(&fit.curve, &pts);
    Ok(OpenProposal {
        pair: pair.clone(),
        candidates: candidates.to_vec(),
        members: fit.members,
        kind,
        curve: fit.curve,
        fit_residual: fit.residual,
        objective: fit.objective,
        coverage,
        proposal_loss: None,
    })
}

impl OpenProposal {
    /// Whether the proposal passes the coverage, size, residual and objective
    /// filters; `spacing` is the typical point spacing of the cloud.
    pub fn is_plausible(&self, cfg: &ProposalConfig, spacing: f64) -> bool {
        self.members.len() >= cfg.min_members
            && self.coverage >= cfg.min_coverage
            && self.fit_residual <= cfg.max_residual * self.pair.radius
            && self.objective <= cfg.max_objective * self.pair.radius + cfg.objective_floor * spacing
    }

    /// Whether the curve keeps clear of every corner except its own.
    pub fn clears_corners(&self, corners: &[ProjectedPoint], cfg: &ProposalConfig) -> bool {
        let clearance = cfg.corner_clearance * self.pair.radius;
        corners.iter().enumerate().all(|(k, c)| {
            self.pair.ids.contains(&k) || self.curve.distance_to(&c.position) >= clearance
        })
    }
}

/// Endpoint tolerance, relative to `R`, for matching a pair to a
/// ground-truth curve.
pub const GT_MATCH_TOL: f64 = 0.1;
const LOSS_SAMPLES: usize = 256;

/// Composite proposal loss with indicator surrogates: mean per-candidate
/// mask disagreement, 0/1 type disagreement, and the Chamfer distance
/// between fitted and ground-truth curves. `edge_curve_ids` gives the
/// ground-truth curve of every edge point.
pub fn proposal_loss_eval(
    proposal: &OpenProposal,
    edge_curve_ids: &[Option<u32>],
    gt: &GroundTruth,
    cfg: &ProposalConfig,
) -> Result<f64> {
    let pair = &proposal.pair;
    let matched = gt
        .match_open_curve(&pair.c1.position, &pair.c2.position, GT_MATCH_TOL * pair.radius)
        .ok_or(Error::NoMatchingGtCurve)?;
    let mut wrong = 0usize;
    for &i in &proposal.candidates {
        let truth = *edge_curve_ids.get(i).ok_or(Error::LengthMismatch {
            expected: i + 1,
            actual: edge_curve_ids.len(),
        })? == Some(matched.id);
        let predicted = proposal.members.binary_search(&i).is_ok();
        wrong += usize::from(truth != predicted);
    }
    let l_mask = if proposal.candidates.is_empty() {
        0.0
    } else {
        wrong as f64 / proposal.candidates.len() as f64
    };
    let l_cls = if proposal.kind == matched.curve.kind() { 0.0 } else { 1.0 };
    let l_para = chamfer_distance(
        &proposal.curve.sample_by_length(LOSS_SAMPLES),
        &matched.curve.sample_by_length(LOSS_SAMPLES),
    )?;
    Ok(cfg.w_m * l_mask + cfg.w_c * l_cls + cfg.w_p * l_para)
}

/// Proposals for every pair, in pair order. Pairs whose fit fails, that fail
/// the plausibility filters, or whose curve runs through another corner
/// yield nothing. `spacing` is the typical point spacing of the cloud.
pub fn generate_open_proposals(
    edges: &[Point3],
    corners: &[ProjectedPoint],
    cfg: &ProposalConfig,
    spacing: f64,
) -> Result<Vec<OpenProposal>> {
    cfg.validate()?;
    let pairs = enumerate_pairs(corners)?;
    let out: Vec<Option<OpenProposal>> = pairs
        .par_iter()
        .map(|pair| {
            let cand = sphere_subsample(edges, pair, cfg);
            fit_open_curve(pair, edges, &cand, cfg)
                .ok()
                .filter(|p| p.is_plausible(cfg, spacing) && p.clears_corners(corners, cfg))
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

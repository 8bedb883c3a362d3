//! Procedural labelled scenes: disjoint boxes, cylinders or free-standing
//! wireframes, with optional decal curves on planar faces.
//!
//! Points are sampled uniformly by area (or by length for wireframes), then
//! labelled against the analytic curves: points within the edge band get
//! the exact offset to their nearest curve, points near a curve endpoint
//! get the exact offset to that corner.

mod persist;

pub use crate::geometry::median_knn_distance;
pub use persist::{read_ground_truth, read_scene, write_scene, SceneFiles, SceneMeta};

use std::f64::consts::{PI, TAU};

use nalgebra::{Quaternion, UnitQuaternion};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::detection::GroundTruthLabels;
use crate::error::{Error, Result};
use crate::geometry::{
    farthest_point_sampling, Circle, CubicBSpline, KdTree, LineSegment, ParametricCurve,
    PointCloud, Point3, Vec3,
};
use crate::truth::{GroundTruth, GtCurve};

pub const DEFAULT_POINTS: usize = 8096;
/// Edge band as a multiple of the median nearest-neighbour spacing.
pub const EDGE_BAND: f64 = 1.5;
/// Corner band as a multiple of the median nearest-neighbour spacing.
pub const CORNER_BAND: f64 = 3.0;
/// Neighbour rank whose median distance is the noise length scale.
pub const NOISE_NEIGHBOR: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolidKind {
    BoxUnion,
    CylinderUnion,
    WireframeOnly,
}

impl std::str::FromStr for SolidKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box_union" | "box" => Ok(Self::BoxUnion),
            "cylinder_union" | "cylinder" => Ok(Self::CylinderUnion),
            "wireframe_only" | "wireframe" => Ok(Self::WireframeOnly),
            _ => Err(Error::Config(format!("unknown solid kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveBudget {
    pub lines: usize,
    pub arcs: usize,
    pub circles: usize,
    pub bsplines: usize,
}

impl CurveBudget {
    pub fn total(&self) -> usize {
        self.lines + self.arcs + self.circles + self.bsplines
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    pub n_points: usize,
    pub budget: CurveBudget,
    pub solid_kind: SolidKind,
    pub noise_x: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_points: DEFAULT_POINTS,
            budget: CurveBudget {
                lines: 12,
                ..Default::default()
            },
            solid_kind: SolidKind::BoxUnion,
            noise_x: 0.0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 256 {
            return Err(Error::InfeasibleSpec("n_points must be at least 256".into()));
        }
        if self.budget.total() == 0 {
            return Err(Error::InfeasibleSpec("the curve budget is empty".into()));
        }
        if !(self.noise_x >= 0.0) || !self.noise_x.is_finite() {
            return Err(Error::InfeasibleSpec("noise_x must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub cloud: PointCloud,
    /// Unit surface normal per point (a curve-perpendicular direction for
    /// wireframe points).
    pub normals: Vec<Vec3>,
    pub truth: GroundTruth,
    /// Median nearest-neighbour spacing at generation time.
    pub spacing: f64,
}

impl SyntheticScene {
    pub fn labels(&self) -> &GroundTruthLabels {
        &self.truth.labels
    }
}

/// A planar rectangle or disc that can host one decal curve.
#[derive(Debug, Clone, Copy)]
struct DecalSite {
    center: Point3,
    a: Vec3,
    b: Vec3,
    /// Radius of the disc around `center` the decal must stay inside.
    room: f64,
}

/// Surface patch with area-uniform sampling.
#[derive(Debug, Clone, Copy)]
enum Patch {
    Rect {
        center: Point3,
        a: Vec3,
        b: Vec3,
        ha: f64,
        hb: f64,
        normal: Vec3,
    },
    Disc {
        center: Point3,
        a: Vec3,
        b: Vec3,
        r: f64,
        normal: Vec3,
    },
    Tube {
        center: Point3,
        axis: Vec3,
        a: Vec3,
        b: Vec3,
        r: f64,
        hh: f64,
    },
}

impl Patch {
    fn area(&self) -> f64 {
        match *self {
            Patch::Rect { ha, hb, .. } => 4.0 * ha * hb,
            Patch::Disc { r, .. } => PI * r * r,
            Patch::Tube { r, hh, .. } => TAU * r * 2.0 * hh,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> (Point3, Vec3) {
        match *self {
            Patch::Rect {
                center,
                a,
                b,
                ha,
                hb,
                normal,
            } => {
                let u: f64 = rng.random_range(-1.0..1.0);
                let v: f64 = rng.random_range(-1.0..1.0);
                (center + a * (u * ha) + b * (v * hb), normal)
            }
            Patch::Disc { center, a, b, r, normal } => {
                let rho = r * rng.random::<f64>().sqrt();
                let t = rng.random_range(0.0..TAU);
                (center + a * (rho * t.cos()) + b * (rho * t.sin()), normal)
            }
            Patch::Tube {
                center,
                axis,
                a,
                b,
                r,
                hh,
            } => {
                let t = rng.random_range(0.0..TAU);
                let h = rng.random_range(-hh..hh);
                let radial = a * t.cos() + b * t.sin();
                (center + axis * h + radial * r, radial)
            }
        }
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    let q = Quaternion::new(
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
    );
    if q.norm() < 1e-9 {
        UnitQuaternion::identity()
    } else {
        UnitQuaternion::from_quaternion(q)
    }
}

/// Centres of `k` lattice cells one unit apart, filled row by row.
fn lattice(k: usize) -> Vec<Point3> {
    let side = (1..).find(|s| s * s * s >= k).unwrap_or(1);
    (0..k)
        .map(|i| {
            Point3::new(
                (i % side) as f64,
                ((i / side) % side) as f64,
                (i / (side * side)) as f64,
            )
        })
        .collect()
}

struct Builder {
    patches: Vec<Patch>,
    curves: Vec<ParametricCurve>,
    corners: Vec<Point3>,
    sites: Vec<DecalSite>,
}

impl Builder {
    fn new() -> Self {
        Self {
            patches: Vec::new(),
            curves: Vec::new(),
            corners: Vec::new(),
            sites: Vec::new(),
        }
    }

    fn add_open(&mut self, c: ParametricCurve) {
        if let Some((a, b)) = c.endpoints() {
            self.corners.push(a);
            self.corners.push(b);
        }
        self.curves.push(c);
    }

    fn add_box(&mut self, center: Point3, rot: &UnitQuaternion<f64>, half: Vec3) {
        let axes = [rot * Vec3::x(), rot * Vec3::y(), rot * Vec3::z()];
        let mut corners = Vec::with_capacity(8);
        for s in 0..8 {
            let sign = |bit: usize| if s >> bit & 1 == 1 { 1.0 } else { -1.0 };
            corners.push(center + axes[0] * (sign(0) * half[0]) + axes[1] * (sign(1) * half[1]) + axes[2] * (sign(2) * half[2]));
        }
        for s in 0..8usize {
            for bit in 0..3 {
                if s >> bit & 1 == 0 {
                    self.curves.push(ParametricCurve::Line(LineSegment::new(
                        corners[s],
                        corners[s | 1 << bit],
                    )));
                }
            }
        }
        self.corners.extend(corners);
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            for sign in [1.0, -1.0] {
                let normal = axes[k] * sign;
                let fc = center + normal * half[k];
                self.patches.push(Patch::Rect {
                    center: fc,
                    a: axes[i],
                    b: axes[j],
                    ha: half[i],
                    hb: half[j],
                    normal,
                });
                self.sites.push(DecalSite {
                    center: fc,
                    a: axes[i],
                    b: axes[j],
                    room: 0.5 * half[i].min(half[j]),
                });
            }
        }
    }

    fn add_cylinder(&mut self, center: Point3, rot: &UnitQuaternion<f64>, r: f64, hh: f64) {
        let axis = rot * Vec3::z();
        let (a, b) = (rot * Vec3::x(), rot * Vec3::y());
        self.patches.push(Patch::Tube {
            center,
            axis,
            a,
            b,
            r,
            hh,
        });
        for sign in [1.0, -1.0] {
            let normal = axis * sign;
            let cc = center + normal * hh;
            self.patches.push(Patch::Disc {
                center: cc,
                a,
                b,
                r,
                normal,
            });
            self.sites.push(DecalSite {
                center: cc,
                a,
                b,
                room: 0.5 * r,
            });
            let rim = Circle::full(cc, axis, r).expect("positive radius");
            self.curves.push(ParametricCurve::Circle(rim));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Construct {
    Line,
    Arc,
    Circle,
    BSpline,
}

fn constructs(budget: &CurveBudget) -> Vec<Construct> {
    let mut out = Vec::new();
    out.extend(std::iter::repeat_n(Construct::Line, budget.lines));
    out.extend(std::iter::repeat_n(Construct::Arc, budget.arcs));
    out.extend(std::iter::repeat_n(Construct::Circle, budget.circles));
    out.extend(std::iter::repeat_n(Construct::BSpline, budget.bsplines));
    out
}

/// A curve of the given construct inside the disc of radius `room` around
/// `center` in the plane spanned by `a`, `b`. Open curves stay inside the
/// ball on their chord, so a pair sphere sees all of their points.
fn planar_curve(kind: Construct, center: Point3, a: Vec3, b: Vec3, room: f64, rng: &mut ChaCha8Rng) -> ParametricCurve {
    let t = rng.random_range(0.0..TAU);
    let dir = a * t.cos() + b * t.sin();
    let perp = a * (-t.sin()) + b * t.cos();
    let normal = a.cross(&b).normalize();
    match kind {
        Construct::Line => {
            let s = room * rng.random_range(0.7..1.0);
            ParametricCurve::Line(LineSegment::new(center - dir * s, center + dir * s))
        }
        Construct::Circle => {
            let r = room * rng.random_range(0.6..0.9);
            ParametricCurve::Circle(Circle::full(center, normal, r).expect("positive radius"))
        }
        Construct::Arc => {
            let r = room * rng.random_range(0.7..0.95);
            let span = rng.random_range(PI / 3.0..5.0 * PI / 6.0);
            // Centre the arc's chord on the site so it stays inside the room.
            let sag = r * (0.5 * span).cos();
            let c = center - perp * sag;
            let circle = Circle::full(c, normal, r).expect("positive radius");
            let start = c + (perp * (0.5 * span).cos() - dir * (0.5 * span).sin()) * r;
            ParametricCurve::Circle(circle.with_arc_from(&start, span))
        }
        Construct::BSpline => {
            let s = room * rng.random_range(0.7..1.0);
            let (p0, p3) = (center - dir * s, center + dir * s);
            let off1 = rng.random_range(0.35..0.7) * s;
            let off2 = -rng.random_range(0.35..0.7) * s;
            let p1 = center - dir * (0.35 * s) + perp * off1;
            let p2 = center + dir * (0.35 * s) + perp * off2;
            ParametricCurve::BSpline(CubicBSpline::new([p0, p1, p2, p3]))
        }
    }
}

/// A free-standing curve with random orientation in a cell of radius 0.35.
fn wire_curve(kind: Construct, center: Point3, rng: &mut ChaCha8Rng) -> ParametricCurve {
    let rot = random_rotation(rng);
    let (a, b) = (rot * Vec3::x(), rot * Vec3::y());
    let c = match kind {
        Construct::BSpline => {
            // Non-planar: lift the interior control points off the plane.
            let base = planar_curve(kind, center, a, b, 0.35, rng);
            let ParametricCurve::BSpline(s) = base else { unreachable!() };
            let n = rot * Vec3::z();
            let lift = rng.random_range(-0.08..0.08);
            let mut ctrl = s.control;
            ctrl[1] += n * lift;
            ctrl[2] -= n * lift;
            ParametricCurve::BSpline(CubicBSpline::new(ctrl))
        }
        _ => planar_curve(kind, center, a, b, 0.35, rng),
    };
    c
}

/// Arc-length lookup for sampling a curve uniformly by length.
struct LengthTable {
    ts: Vec<f64>,
    cum: Vec<f64>,
}

impl LengthTable {
    const N: usize = 512;

    fn new(c: &ParametricCurve) -> Self {
        let ts: Vec<f64> = (0..=Self::N).map(|j| j as f64 / Self::N as f64).collect();
        let pts: Vec<Point3> = ts.iter().map(|&t| c.point_at(t)).collect();
        let mut cum = vec![0.0; Self::N + 1];
        for j in 1..=Self::N {
            cum[j] = cum[j - 1] + (pts[j] - pts[j - 1]).norm();
        }
        Self { ts, cum }
    }

    fn total(&self) -> f64 {
        self.cum[Self::N]
    }

    fn parameter(&self, f: f64) -> f64 {
        let target = f * self.total();
        let k = self.cum.partition_point(|&c| c < target).clamp(1, Self::N);
        let span = self.cum[k] - self.cum[k - 1];
        let frac = if span > 0.0 { (target - self.cum[k - 1]) / span } else { 0.0 };
        self.ts[k - 1] + frac * (self.ts[k] - self.ts[k - 1])
    }
}

fn tangent(c: &ParametricCurve, t: f64) -> Vec3 {
    let h = 1e-6;
    let d = c.point_at((t + h).min(1.0)) - c.point_at((t - h).max(0.0));
    if d.norm() > 0.0 {
        d.normalize()
    } else {
        Vec3::x()
    }
}


/// Labels every point against the curves and corners.
pub fn label_points(
    points: &[Point3],
    curves: &[GtCurve],
    corners: &[Point3],
    edge_band: f64,
    corner_band: f64,
) -> GroundTruthLabels {
    let n = points.len();
    let mut gt = GroundTruthLabels {
        edge: vec![false; n],
        corner: vec![false; n],
        edge_offset: vec![Vec3::zeros(); n],
        corner_offset: vec![Vec3::zeros(); n],
        curve_id: vec![None; n],
    };
    for (i, p) in points.iter().enumerate() {
        let nearest = curves
            .iter()
            .map(|c| (c.curve.distance_to(p), c))
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.id.cmp(&y.1.id)));
        if let Some((d, c)) = nearest {
            if d <= edge_band {
                gt.edge[i] = true;
                gt.curve_id[i] = Some(c.id);
                let foot = c.curve.point_at(c.curve.parameter_of(p));
                gt.edge_offset[i] = foot - p;
            }
        }
    }
    if corners.is_empty() || points.is_empty() {
        return gt;
    }
    let ctree = KdTree::new(corners);
    let mut covered = vec![false; corners.len()];
    for (i, p) in points.iter().enumerate() {
        if let Some((k, d2)) = ctree.nearest(p) {
            if d2.sqrt() <= corner_band {
                gt.corner[i] = true;
                gt.corner_offset[i] = corners[k] - p;
                covered[k] = true;
            }
        }
    }
    // Nearest-neighbour transfer: a corner without a point in its band
    // still labels its closest free point.
    let ptree = KdTree::new(points);
    for (k, c) in corners.iter().enumerate() {
        if covered[k] {
            continue;
        }
        if let Some(i) = ptree.knn(c, 8).into_iter().map(|(i, _)| i).find(|&i| !gt.corner[i]) {
            gt.corner[i] = true;
            gt.corner_offset[i] = c - points[i];
        }
    }
    gt
}

fn dedup_corners(corners: Vec<Point3>) -> Vec<Point3> {
    let mut out: Vec<Point3> = Vec::with_capacity(corners.len());
    for c in corners {
        if !out.iter().any(|o| (o - c).norm() <= 1e-9) {
            out.push(c);
        }
    }
    out
}

fn finish(
    points: Vec<Point3>,
    normals: Vec<Vec3>,
    curves: Vec<ParametricCurve>,
    corners: Vec<Point3>,
) -> Result<SyntheticScene> {
    let curves: Vec<GtCurve> = curves
        .into_iter()
        .enumerate()
        .map(|(i, curve)| GtCurve { id: i as u32, curve })
        .collect();
    let corners = dedup_corners(corners);
    let spacing = median_knn_distance(&points, 1);
    let labels = label_points(&points, &curves, &corners, EDGE_BAND * spacing, CORNER_BAND * spacing);
    Ok(SyntheticScene {
        cloud: PointCloud::new(points)?,
        normals,
        truth: GroundTruth {
            labels,
            curves,
            corners,
        },
        spacing,
    })
}

fn sample_patches(patches: &[Patch], n: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<Point3>, Vec<Vec3>)> {
    let dist = WeightedIndex::new(patches.iter().map(Patch::area))
        .map_err(|e| Error::InfeasibleSpec(format!("no sampleable surface: {e}")))?;
    let mut pts = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let (p, nrm) = patches[dist.sample(rng)].sample(rng);
        pts.push(p);
        normals.push(nrm);
    }
    Ok((pts, normals))
}

fn jitter(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(
        rng.random_range(-0.05..0.05),
        rng.random_range(-0.05..0.05),
        rng.random_range(-0.05..0.05),
    )
}

fn place_decals(b: &mut Builder, decals: &[Construct], rng: &mut ChaCha8Rng) -> Result<()> {
    if decals.len() > b.sites.len() {
        return Err(Error::InfeasibleSpec(format!(
            "{} decal curves but only {} planar faces",
            decals.len(),
            b.sites.len()
        )));
    }
    // Spread decals over distinct faces in a seed-dependent order.
    let mut order: Vec<usize> = (0..b.sites.len()).collect();
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    for (&kind, &s) in decals.iter().zip(&order) {
        let site = b.sites[s];
        let c = planar_curve(kind, site.center, site.a, site.b, site.room, rng);
        if kind == Construct::Circle {
            b.curves.push(c);
        } else {
            b.add_open(c);
        }
    }
    Ok(())
}

/// Builds a scene from `spec`. Deterministic in the spec.
pub fn generate(spec: &SceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let budget = spec.budget;
    let mut b = Builder::new();
    match spec.solid_kind {
        SolidKind::BoxUnion => {
            if budget.lines == 0 || budget.lines % 12 != 0 {
                return Err(Error::InfeasibleSpec(
                    "box scenes need a positive multiple of 12 lines".into(),
                ));
            }
            let boxes = budget.lines / 12;
            for c in lattice(boxes) {
                let rot = random_rotation(&mut rng);
                let half = Vec3::new(
                    rng.random_range(0.2..0.33),
                    rng.random_range(0.2..0.33),
                    rng.random_range(0.2..0.33),
                );
                b.add_box(c + jitter(&mut rng), &rot, half);
            }
            let decals = constructs(&CurveBudget { lines: 0, ..budget });
            place_decals(&mut b, &decals, &mut rng)?;
        }
        SolidKind::CylinderUnion => {
            if budget.circles < 2 {
                return Err(Error::InfeasibleSpec("cylinder scenes need at least 2 circles".into()));
            }
            let cylinders = budget.circles / 2;
            for c in lattice(cylinders) {
                let rot = random_rotation(&mut rng);
                let r = rng.random_range(0.18..0.3);
                let hh = rng.random_range(0.15..0.3);
                b.add_cylinder(c + jitter(&mut rng), &rot, r, hh);
            }
            let decals = constructs(&CurveBudget {
                circles: budget.circles % 2,
                ..budget
            });
            place_decals(&mut b, &decals, &mut rng)?;
        }
        SolidKind::WireframeOnly => {
            let kinds = constructs(&budget);
            let cells = lattice(kinds.len());
            for (kind, c) in kinds.into_iter().zip(cells) {
                let curve = wire_curve(kind, c + jitter(&mut rng), &mut rng);
                if kind == Construct::Circle {
                    b.curves.push(curve);
                } else {
                    b.add_open(curve);
                }
            }
            let tables: Vec<LengthTable> = b.curves.iter().map(LengthTable::new).collect();
            let dist = WeightedIndex::new(tables.iter().map(LengthTable::total))
                .map_err(|e| Error::InfeasibleSpec(format!("degenerate wireframe: {e}")))?;
            let mut pts = Vec::with_capacity(spec.n_points);
            let mut normals = Vec::with_capacity(spec.n_points);
            for _ in 0..spec.n_points {
                let k = dist.sample(&mut rng);
                let t = tables[k].parameter(rng.random::<f64>());
                let c = &b.curves[k];
                pts.push(c.point_at(t));
                let tan = tangent(c, t);
                let side = crate::geometry::any_perpendicular(&tan);
                let turn = rng.random_range(0.0..TAU);
                normals.push(side * turn.cos() + tan.cross(&side) * turn.sin());
            }
            let scene = finish(pts, normals, b.curves, b.corners)?;
            return add_noise(&scene, spec.noise_x, spec.seed);
        }
    }
    let (pts, normals) = sample_patches(&b.patches, spec.n_points, &mut rng)?;
    let scene = finish(pts, normals, b.curves, b.corners)?;
    add_noise(&scene, spec.noise_x, spec.seed)
}

/// Two rectangles folded along a shared crease at `angle` radians; the
/// crease is the only feature curve.
pub fn dihedral_fixture(n_points: usize, angle: f64, seed: u64) -> Result<SyntheticScene> {
    if n_points < 256 {
        return Err(Error::InfeasibleSpec("n_points must be at least 256".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (half_len, width) = (0.5, 0.5);
    let axis = Vec3::x();
    let d1 = Vec3::y();
    let d2 = Vec3::new(0.0, angle.cos(), angle.sin());
    let mut patches = Vec::new();
    for d in [d1, d2] {
        let normal = axis.cross(&d).normalize();
        patches.push(Patch::Rect {
            center: Point3::origin() + d * (0.5 * width),
            a: axis,
            b: d,
            ha: half_len,
            hb: 0.5 * width,
            normal,
        });
    }
    // Orient the second normal outward, consistently with the first.
    if let Patch::Rect { normal, .. } = &mut patches[1] {
        *normal = -*normal;
    }
    let (pts, normals) = sample_patches(&patches, n_points, &mut rng)?;
    let a = Point3::new(-half_len, 0.0, 0.0);
    let b = Point3::new(half_len, 0.0, 0.0);
    finish(
        pts,
        normals,
        vec![ParametricCurve::Line(LineSegment::new(a, b))],
        vec![a, b],
    )
}

/// Displaces every point along its normal by `s · h`, `s ~ U[−x, x]`, where
/// `h` is the median distance to the 16th nearest neighbour. Labels are kept
/// and offsets re-derived so they still land on the curves and corners.
pub fn add_noise(scene: &SyntheticScene, x: f64, seed: u64) -> Result<SyntheticScene> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidInput("noise scale must be non-negative".into()));
    }
    if x == 0.0 {
        return Ok(scene.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6E6F_6973_6500_0000);
    let h = median_knn_distance(scene.cloud.points(), NOISE_NEIGHBOR);
    let moved: Vec<Point3> = scene
        .cloud
        .points()
        .iter()
        .zip(&scene.normals)
        .map(|(p, n)| p + n * (rng.random_range(-x..=x) * h))
        .collect();
    let mut labels = scene.truth.labels.clone();
    for (i, (old, new)) in scene.cloud.points().iter().zip(&moved).enumerate() {
        let shift = old - new;
        if labels.edge[i] {
            let id = labels.curve_id[i].expect("edge points carry a curve id");
            let curve = &scene.truth.curve(id).expect("curve ids are valid").curve;
            labels.edge_offset[i] = curve.point_at(curve.parameter_of(new)) - new;
        }
        if labels.corner[i] {
            labels.corner_offset[i] += shift;
        }
    }
    Ok(SyntheticScene {
        cloud: PointCloud::new(moved)?,
        normals: scene.normals.clone(),
        truth: GroundTruth {
            labels,
            ..scene.truth.clone()
        },
        spacing: scene.spacing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsampleMode {
    #[default]
    Uniform,
    Fps,
}

/// Keeps `p` points, carrying labels over. Uniform mode draws a seeded
/// random subset; FPS mode starts at point 0. Kept points stay in their
/// original order.
pub fn subsample(scene: &SyntheticScene, p: usize, mode: SubsampleMode, seed: u64) -> Result<SyntheticScene> {
    let n = scene.cloud.len();
    if p > n {
        return Err(Error::PTooLarge {
            requested: p,
            available: n,
        });
    }
    if p == 0 {
        return Err(Error::InvalidInput("cannot subsample to zero points".into()));
    }
    let mut keep: Vec<usize> = match mode {
        SubsampleMode::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::index::sample(&mut rng, n, p).into_vec()
        }
        SubsampleMode::Fps => farthest_point_sampling(scene.cloud.points(), p, 0),
    };
    keep.sort_unstable();
    let pts: Vec<Point3> = keep.iter().map(|&i| scene.cloud.points()[i]).collect();
    Ok(SyntheticScene {
        cloud: PointCloud::new(pts)?,
        normals: keep.iter().map(|&i| scene.normals[i]).collect(),
        truth: GroundTruth {
            labels: scene.truth.labels.select(&keep),
            ..scene.truth.clone()
        },
        spacing: scene.spacing,
    })
}

/// The 20 seed-pinned noiseless scenes used by the end-to-end checks:
/// boxes (some with decals), cylinders, and wireframes mixing all four
/// curve constructs.
pub fn fixture_suite() -> Vec<(String, SceneSpec)> {
    let spec = |seed: u64, kind: SolidKind, lines, arcs, circles, bsplines| SceneSpec {
        seed,
        n_points: DEFAULT_POINTS,
        budget: CurveBudget {
            lines,
            arcs,
            circles,
            bsplines,
        },
        solid_kind: kind,
        noise_x: 0.0,
    };
    use SolidKind::*;
    let mut out = Vec::new();
    for (i, s) in [
        spec(101, BoxUnion, 12, 0, 0, 0),
        spec(102, BoxUnion, 12, 0, 0, 0),
        spec(103, BoxUnion, 24, 0, 0, 0),
        spec(104, BoxUnion, 12, 1, 0, 1),
        spec(105, BoxUnion, 12, 0, 1, 1),
        spec(106, BoxUnion, 24, 1, 1, 0),
        spec(201, CylinderUnion, 0, 0, 2, 0),
        spec(202, CylinderUnion, 0, 0, 2, 0),
        spec(203, CylinderUnion, 0, 0, 4, 0),
        spec(204, CylinderUnion, 1, 0, 2, 0),
        spec(205, CylinderUnion, 0, 1, 2, 1),
        spec(206, CylinderUnion, 0, 0, 4, 1),
        spec(301, WireframeOnly, 1, 1, 1, 1),
        spec(302, WireframeOnly, 2, 1, 1, 1),
        spec(303, WireframeOnly, 1, 2, 1, 1),
        spec(304, WireframeOnly, 1, 1, 2, 1),
        spec(305, WireframeOnly, 1, 1, 1, 2),
        spec(306, WireframeOnly, 2, 2, 1, 2),
        spec(307, WireframeOnly, 3, 1, 2, 1),
        spec(308, WireframeOnly, 1, 3, 1, 2),
    ]
    .into_iter()
    .enumerate()
    {
        let kind = match s.solid_kind {
            BoxUnion => "box",
            CylinderUnion => "cyl",
            WireframeOnly => "wire",
        };
        out.push((format!("{kind}_{i:02}"), s));
    }
    out
}

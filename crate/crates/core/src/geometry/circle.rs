use std::f64::consts::TAU;

use super::{any_perpendicular, dist, Point3, Vec3};
use crate::error::{Error, Result};

/// Angular interval `[lo, hi]` measured from the circle's `u` axis towards `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcRange {
    pub lo: f64,
    pub hi: f64,
}

impl ArcRange {
    pub const FULL: ArcRange = ArcRange { lo: 0.0, hi: TAU };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi > TAU + 1e-12 || lo >= hi {
            return Err(Error::InvalidInput(format!("bad arc range [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi: hi.min(TAU) })
    }

    pub fn span(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_full(&self) -> bool {
        self.span() >= TAU - 1e-12
    }

    pub fn contains(&self, alpha: f64) -> bool {
        if self.is_full() {
            return true;
        }
        let t = (alpha - self.lo).rem_euclid(TAU);
        t <= self.span()
    }
}

/// Circle or circular arc in canonical `(n, c, r)` form with an in-plane
/// frame `(u, v)`, `v = u × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Circle {
    pub normal: Vec3,
    pub center: Point3,
    pub radius: f64,
    pub u: Vec3,
    pub v: Vec3,
    pub arc: ArcRange,
    /// The three defining points when the circle was built from them.
    pub anchors: Option<[Point3; 3]>,
}

/// Circle through three points. `u` points from the centre to `p1`.
pub fn circle_from_three_points(p1: Point3, p2: Point3, p3: Point3) -> Result<Circle> {
    if p1 == p2 || p2 == p3 || p1 == p3 {
        return Err(Error::DuplicatePoints);
    }
    let max_d = dist(&p1, &p2).max(dist(&p2, &p3)).max(dist(&p1, &p3));
    let a = p2 - p1;
    let b = p3 - p1;
    let w = a.cross(&b);
    let w2 = w.norm_squared();
    let area = 0.5 * w2.sqrt();
    let threshold = 1e-9 * max_d * max_d;
    if area <= threshold {
        return Err(Error::CollinearPoints { area, threshold });
    }
    let offset = (b.cross(&w) * a.norm_squared() + w.cross(&a) * b.norm_squared()) / (2.0 * w2);
    let center = p1 + offset;
    let radius = (p1 - center).norm();
    let normal = w / w2.sqrt();
    let u = (p1 - center) / radius;
    let v = u.cross(&normal);
    Ok(Circle {
        normal,
        center,
        radius,
        u,
        v,
        arc: ArcRange::FULL,
        anchors: Some([p1, p2, p3]),
    })
}

impl Circle {
    /// Full circle with an arbitrary (deterministic) in-plane frame.
    pub fn full(center: Point3, normal: Vec3, radius: f64) -> Result<Self> {
        let n_len = normal.norm();
        if !(radius.is_finite() && radius > 0.0) || !(n_len.is_finite() && n_len > 0.0) {
            return Err(Error::InvalidInput("degenerate circle".into()));
        }
        let normal = normal / n_len;
        let u = any_perpendicular(&normal);
        let v = u.cross(&normal);
        Ok(Self {
            normal,
            center,
            radius,
            u,
            v,
            arc: ArcRange::FULL,
            anchors: None,
        })
    }

    /// Checks the frame invariants; used when a circle arrives from outside.
    pub fn validate(&self) -> Result<()> {
        let tol = 1e-9;
        let finite = super::is_finite_point(&self.center)
            && self.normal.iter().chain(self.u.iter()).chain(self.v.iter()).all(|x| x.is_finite());
        if !finite || !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidInput("circle has non-finite or non-positive fields".into()));
        }
        let unit = |x: &Vec3| (x.norm() - 1.0).abs() <= tol;
        if !(unit(&self.normal) && unit(&self.u) && unit(&self.v)) {
            return Err(Error::InvalidInput("circle frame vectors must be unit length".into()));
        }
        if self.u.dot(&self.normal).abs() > tol
            || self.v.dot(&self.normal).abs() > tol
            || self.u.dot(&self.v).abs() > tol
        {
            return Err(Error::InvalidInput("circle frame is not orthonormal".into()));
        }
        ArcRange::new(self.arc.lo, self.arc.hi)?;
        Ok(())
    }

    pub fn is_full(&self) -> bool {
        self.arc.is_full()
    }

    pub fn point_at_angle(&self, alpha: f64) -> Point3 {
        self.center + (self.u * alpha.cos() + self.v * alpha.sin()) * self.radius
    }

    /// Angle of the in-plane projection of `p`, in `[0, 2π)`.
    pub fn angle_of(&self, p: &Point3) -> f64 {
        let q = p - self.center;
        q.dot(&self.v).atan2(q.dot(&self.u)).rem_euclid(TAU)
    }

    /// `m` samples uniformly spaced over the arc range. Arcs include both
    /// endpoints; full circles omit the duplicate endpoint at 2π.
    pub fn sample(&self, m: usize) -> Vec<Point3> {
        if m == 0 {
            return Vec::new();
        }
        let (lo, span) = (self.arc.lo, self.arc.span());
        let step = if self.is_full() {
            span / m as f64
        } else if m == 1 {
            0.0
        } else {
            span / (m - 1) as f64
        };
        (0..m).map(|j| self.point_at_angle(lo + step * j as f64)).collect()
    }

    pub fn length(&self) -> f64 {
        self.radius * self.arc.span()
    }

    /// Exact Euclidean distance from `p` to the circle or arc.
    pub fn distance_to(&self, p: &Point3) -> f64 {
        let q = p - self.center;
        let h = q.dot(&self.normal);
        let in_plane = q - self.normal * h;
        let rho = in_plane.norm();
        if self.is_full() || self.arc.contains(self.angle_of(p)) {
            return (h * h + (rho - self.radius).powi(2)).sqrt();
        }
        let a = self.point_at_angle(self.arc.lo);
        let b = self.point_at_angle(self.arc.hi);
        dist(p, &a).min(dist(p, &b))
    }

    /// Normalised arc parameter of the closest point, in `[0, 1]`.
    pub fn parameter_of(&self, p: &Point3) -> f64 {
        let t = (self.angle_of(p) - self.arc.lo).rem_euclid(TAU);
        if self.is_full() {
            return t / TAU;
        }
        let span = self.arc.span();
        if t <= span {
            t / span
        } else {
            // Outside the arc: snap to whichever end is angularly closer.
            let past_end = t - span;
            let before_start = TAU - t;
            if past_end < before_start {
                1.0
            } else {
                0.0
            }
        }
    }

    /// Re-bases the frame so `u` points at `start` and the arc runs
    /// `[0, span]` from there.
    pub fn with_arc_from(&self, start: &Point3, span: f64) -> Circle {
        let q = start - self.center;
        let in_plane = q - self.normal * q.dot(&self.normal);
        let u = if in_plane.norm() > 0.0 {
            in_plane.normalize()
        } else {
            self.u
        };
        let v = u.cross(&self.normal);
        Circle {
            normal: self.normal,
            center: self.center,
            radius: self.radius,
            u,
            v,
            arc: ArcRange {
                lo: 0.0,
                hi: span.clamp(f64::MIN_POSITIVE, TAU),
            },
            anchors: self.anchors,
        }
    }

    /// Open arc from `c1` to `c2`, both lying on this circle. Of the two arcs
    /// joining them, picks the one containing the angular median of
    /// `members` (angles measured from `c1`); with no members, the one
    /// through the circle's first anchor, else the shorter one.
    pub fn arc_between(&self, c1: &Point3, c2: &Point3, members: &[Point3]) -> Circle {
        let a1 = self.angle_of(c1);
        let forward = (self.angle_of(c2) - a1).rem_euclid(TAU);
        let probe = if !members.is_empty() {
            let mut ts: Vec<f64> = members
                .iter()
                .map(|p| (self.angle_of(p) - a1).rem_euclid(TAU))
                .collect();
            ts.sort_by(f64::total_cmp);
            Some(ts[ts.len() / 2])
        } else {
            self.anchors
                .map(|a| (self.angle_of(&a[1]) - a1).rem_euclid(TAU))
        };
        let use_forward = match probe {
            Some(t) => t <= forward,
            None => forward <= TAU - forward,
        };
        if use_forward {
            self.with_arc_from(c1, forward)
        } else {
            // Reverse orientation so the arc still runs from c1 to c2.
            let flipped = Circle {
                normal: -self.normal,
                ..self.clone()
            };
            flipped.with_arc_from(c1, TAU - forward)
        }
    }
}

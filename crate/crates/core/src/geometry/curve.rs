use serde::{Deserialize, Serialize};

use super::{is_finite_point, ArcRange, Circle, CubicBSpline, LineSegment, Point3, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Line,
    Circle,
    #[serde(rename = "bspline")]
    BSpline,
}

impl CurveKind {
    pub const ALL: [CurveKind; 3] = [CurveKind::Line, CurveKind::Circle, CurveKind::BSpline];

    pub fn as_str(self) -> &'static str {
        match self {
            CurveKind::Line => "line",
            CurveKind::Circle => "circle",
            CurveKind::BSpline => "bspline",
        }
    }
}

/// A feature curve: the unit the pipeline outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveJson", into = "CurveJson")]
pub enum ParametricCurve {
    Line(LineSegment),
    Circle(Circle),
    BSpline(CubicBSpline),
}

impl ParametricCurve {
    pub fn kind(&self) -> CurveKind {
        match self {
            ParametricCurve::Line(_) => CurveKind::Line,
            ParametricCurve::Circle(_) => CurveKind::Circle,
            ParametricCurve::BSpline(_) => CurveKind::BSpline,
        }
    }

    /// Only full circles are closed.
    pub fn is_closed(&self) -> bool {
        matches!(self, ParametricCurve::Circle(c) if c.is_full())
    }

    pub fn sample(&self, m: usize) -> Vec<Point3> {
        match self {
            ParametricCurve::Line(l) => l.sample(m.max(2)),
            ParametricCurve::Circle(c) => c.sample(m),
            ParametricCurve::BSpline(s) => s.sample(m.max(2)),
        }
    }

    /// `m` samples spaced uniformly by arc length. Lines and circles already
    /// sample this way; B-splines are re-timed through a dense polyline.
    pub fn sample_by_length(&self, m: usize) -> Vec<Point3> {
        let ParametricCurve::BSpline(s) = self else {
            return self.sample(m);
        };
        if m < 2 {
            return s.sample(m);
        }
        const DENSE: usize = 128;
        let ts: Vec<f64> = (0..=DENSE).map(|j| j as f64 / DENSE as f64).collect();
        let pts: Vec<Point3> = ts.iter().map(|&t| s.point_at(t)).collect();
        let mut cum = vec![0.0; DENSE + 1];
        for j in 1..=DENSE {
            cum[j] = cum[j - 1] + (pts[j] - pts[j - 1]).norm();
        }
        let total = cum[DENSE];
        if total <= 0.0 {
            return s.sample(m);
        }
        let mut out = Vec::with_capacity(m);
        let mut seg = 0;
        for k in 0..m {
            if k == 0 {
                out.push(s.control[0]);
                continue;
            }
            if k == m - 1 {
                out.push(s.control[3]);
                continue;
            }
            let target = total * k as f64 / (m - 1) as f64;
            while seg + 1 < DENSE && cum[seg + 1] < target {
                seg += 1;
            }
            let span = cum[seg + 1] - cum[seg];
            let frac = if span > 0.0 { (target - cum[seg]) / span } else { 0.0 };
            out.push(s.point_at(ts[seg] + frac * (ts[seg + 1] - ts[seg])));
        }
        out
    }

    /// Point at normalised parameter `t ∈ [0, 1]`.
    pub fn point_at(&self, t: f64) -> Point3 {
        match self {
            ParametricCurve::Line(l) => l.point_at(t),
            ParametricCurve::Circle(c) => c.point_at_angle(c.arc.lo + t * c.arc.span()),
            ParametricCurve::BSpline(s) => s.point_at(t),
        }
    }

    /// Normalised parameter of the closest curve point.
    pub fn parameter_of(&self, p: &Point3) -> f64 {
        match self {
            ParametricCurve::Line(l) => l.parameter_of(p),
            ParametricCurve::Circle(c) => c.parameter_of(p),
            ParametricCurve::BSpline(s) => s.closest_parameter(p),
        }
    }

    pub fn distance_to(&self, p: &Point3) -> f64 {
        match self {
            ParametricCurve::Line(l) => l.distance_to(p),
            ParametricCurve::Circle(c) => c.distance_to(p),
            ParametricCurve::BSpline(s) => s.distance_to(p),
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            ParametricCurve::Line(l) => l.length(),
            ParametricCurve::Circle(c) => c.length(),
            ParametricCurve::BSpline(s) => s.length(),
        }
    }

    /// Start and end point for open curves.
    pub fn endpoints(&self) -> Option<(Point3, Point3)> {
        if self.is_closed() {
            return None;
        }
        Some((self.point_at(0.0), self.point_at(1.0)))
    }

    /// Applies `f` to every defining point and re-derives the frame; used
    /// for rigid transforms in tests and scene generation.
    pub fn map_points(&self, f: impl Fn(&Point3) -> Point3, rotate: impl Fn(&Vec3) -> Vec3) -> Self {
        match self {
            ParametricCurve::Line(l) => ParametricCurve::Line(LineSegment::new(f(&l.a), f(&l.b))),
            ParametricCurve::BSpline(s) => {
                ParametricCurve::BSpline(CubicBSpline::new(s.control.map(|p| f(&p))))
            }
            ParametricCurve::Circle(c) => ParametricCurve::Circle(Circle {
                normal: rotate(&c.normal),
                center: f(&c.center),
                radius: c.radius,
                u: rotate(&c.u),
                v: rotate(&c.v),
                arc: c.arc,
                anchors: c.anchors.map(|a| a.map(|p| f(&p))),
            }),
        }
    }
}

type Xyz = [f64; 3];

fn xyz(p: &Point3) -> Xyz {
    [p.x, p.y, p.z]
}

fn vxyz(v: &Vec3) -> Xyz {
    [v.x, v.y, v.z]
}

fn pt(a: Xyz) -> Point3 {
    Point3::new(a[0], a[1], a[2])
}

fn vec(a: Xyz) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// On-disk form of a curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum CurveJson {
    Line {
        a: Xyz,
        b: Xyz,
        closed: bool,
    },
    Circle {
        normal: Xyz,
        center: Xyz,
        radius: f64,
        u: Xyz,
        v: Xyz,
        arc_range: [f64; 2],
        #[serde(default)]
        three_points: Option<[Xyz; 3]>,
        closed: bool,
    },
    #[serde(rename = "bspline")]
    BSpline {
        control: [Xyz; 4],
        closed: bool,
    },
}

impl From<ParametricCurve> for CurveJson {
    fn from(c: ParametricCurve) -> Self {
        let closed = c.is_closed();
        match c {
            ParametricCurve::Line(l) => CurveJson::Line {
                a: xyz(&l.a),
                b: xyz(&l.b),
                closed,
            },
            ParametricCurve::Circle(c) => CurveJson::Circle {
                normal: vxyz(&c.normal),
                center: xyz(&c.center),
                radius: c.radius,
                u: vxyz(&c.u),
                v: vxyz(&c.v),
                arc_range: [c.arc.lo, c.arc.hi],
                three_points: c.anchors.map(|a| a.map(|p| xyz(&p))),
                closed,
            },
            ParametricCurve::BSpline(s) => CurveJson::BSpline {
                control: s.control.map(|p| xyz(&p)),
                closed,
            },
        }
    }
}

impl TryFrom<CurveJson> for ParametricCurve {
    type Error = Error;

    fn try_from(j: CurveJson) -> Result<Self> {
        let check = |pts: &[Point3]| {
            if pts.iter().all(is_finite_point) {
                Ok(())
            } else {
                Err(Error::Parse("curve contains non-finite coordinates".into()))
            }
        };
        let curve = match j {
            CurveJson::Line { a, b, closed } => {
                let (a, b) = (pt(a), pt(b));
                check(&[a, b])?;
                if a == b || closed {
                    return Err(Error::Parse("line must be open with distinct endpoints".into()));
                }
                ParametricCurve::Line(LineSegment::new(a, b))
            }
            CurveJson::Circle {
                normal,
                center,
                radius,
                u,
                v,
                arc_range,
                three_points,
                closed,
            } => {
                let anchors = three_points.map(|a| a.map(pt));
                if let Some(a) = &anchors {
                    check(a)?;
                }
                let circle = Circle {
                    normal: vec(normal),
                    center: pt(center),
                    radius,
                    u: vec(u),
                    v: vec(v),
                    arc: ArcRange {
                        lo: arc_range[0],
                        hi: arc_range[1],
                    },
                    anchors,
                };
                circle.validate().map_err(|e| Error::Parse(e.to_string()))?;
                if closed != circle.is_full() {
                    return Err(Error::Parse("closed flag disagrees with arc range".into()));
                }
                ParametricCurve::Circle(circle)
            }
            CurveJson::BSpline { control, closed } => {
                let control = control.map(pt);
                check(&control)?;
                if closed {
                    return Err(Error::Parse("b-splines are always open".into()));
                }
                ParametricCurve::BSpline(CubicBSpline::new(control))
            }
        };
        Ok(curve)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::circle_from_three_points;

    #[test]
    fn json_round_trip_is_exact() {
        let circle = circle_from_three_points(
            Point3::new(0.1, 0.2, 0.3),
            Point3::new(1.0, -0.7, 0.25),
            Point3::new(-0.4, 0.9, 1.0 / 3.0),
        )
        .unwrap();
        let curves = vec![
            ParametricCurve::Line(LineSegment::new(Point3::origin(), Point3::new(1.0 / 3.0, 2.0, 0.0))),
            ParametricCurve::Circle(circle.clone()),
            ParametricCurve::Circle(circle.with_arc_from(&Point3::new(0.1, 0.2, 0.3), 1.234)),
            ParametricCurve::BSpline(CubicBSpline::new([
                Point3::origin(),
                Point3::new(0.1, 0.7, 0.0),
                Point3::new(0.6, -0.3, 0.2),
                Point3::new(1.0, 0.0, 0.0),
            ])),
        ];
        let text = serde_json::to_string(&curves).unwrap();
        let back: Vec<ParametricCurve> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, curves);
        assert!(text.contains("\"kind\":\"circle\""));
        assert!(text.contains("\"closed\":true"));
    }

    #[test]
    fn json_rejects_inconsistent_closed_flag() {
        let text = r#"{"kind":"line","a":[0,0,0],"b":[1,0,0],"closed":true}"#;
        assert!(serde_json::from_str::<ParametricCurve>(text).is_err());
        let text = r#"{"kind":"circle","normal":[0,0,1],"center":[0,0,0],"radius":1,
            "u":[1,0,0],"v":[0,-1,0],"arc_range":[0,1],"closed":true}"#;
        assert!(serde_json::from_str::<ParametricCurve>(text).is_err());
    }

    #[test]
    fn only_full_circles_are_closed() {
        let c = Circle::full(Point3::origin(), Vec3::z(), 1.0).unwrap();
        assert!(ParametricCurve::Circle(c.clone()).is_closed());
        let arc = c.with_arc_from(&Point3::new(1.0, 0.0, 0.0), 2.0);
        assert!(!ParametricCurve::Circle(arc).is_closed());
    }
}

use std::io::Write;

use crate::error::Result;
use crate::geometry::ParametricCurve;

pub const OBJ_SAMPLES_PER_CURVE: usize = 64;

/// Writes each curve as an OBJ polyline (`l`) of `samples` vertices; closed
/// curves repeat their first vertex.
pub fn write_obj_polylines(mut w: impl Write, curves: &[ParametricCurve], samples: usize) -> Result<()> {
    let mut out = String::new();
    let mut next = 1usize;
    for curve in curves {
        let pts = curve.sample(samples);
        let first = next;
        for p in &pts {
            out.push_str(&format!("v {} {} {}\n", p.x, p.y, p.z));
        }
        out.push('l');
        for k in 0..pts.len() {
            out.push_str(&format!(" {}", first + k));
        }
        if curve.is_closed() {
            out.push_str(&format!(" {first}"));
        }
        out.push('\n');
        next += pts.len();
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Circle, LineSegment, Point3, Vec3};

    #[test]
    fn polylines_index_correctly() {
        let curves = vec![
            ParametricCurve::Line(LineSegment::new(Point3::origin(), Point3::new(1., 0., 0.))),
            ParametricCurve::Circle(Circle::full(Point3::origin(), Vec3::z(), 1.0).unwrap()),
        ];
        let mut buf = Vec::new();
        write_obj_polylines(&mut buf, &curves, 4).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 8);
        let lines: Vec<&str> = text.lines().filter(|l| l.starts_with('l')).collect();
        assert_eq!(lines, vec!["l 1 2 3 4", "l 5 6 7 8 5"]);
    }
}

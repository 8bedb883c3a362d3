//! Curve primitives, sampling, nearest-neighbour search and the Chamfer
//! distance used as the fitting objective everywhere else in the crate.

mod bspline;
mod chamfer;
mod circle;
mod curve;
mod kdtree;
mod line;
mod sampling;

pub use bspline::{bspline_basis, CubicBSpline, CLAMPED_CUBIC_KNOTS};
pub use chamfer::{chamfer_distance, chamfer_distance_brute, directed_mean_distance};
pub use circle::{circle_from_three_points, ArcRange, Circle};
pub use curve::{CurveKind, ParametricCurve};
pub use kdtree::KdTree;
pub use line::LineSegment;
pub use sampling::farthest_point_sampling;

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

/// Squared Euclidean distance. Every nearest-neighbour routine in the crate
/// goes through this so accelerated and brute-force paths agree bit-for-bit.
#[inline]
pub fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub fn dist(a: &Point3, b: &Point3) -> f64 {
    dist2(a, b).sqrt()
}

pub fn is_finite_point(p: &Point3) -> bool {
    p.x.is_finite() && p.y.is_finite() && p.z.is_finite()
}

/// Axis-aligned bounding box diagonal of a point set (0 for an empty set).
pub fn bbox_diagonal(points: &[Point3]) -> f64 {
    let Some(first) = points.first() else {
        return 0.0;
    };
    let mut lo = *first;
    let mut hi = *first;
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (hi - lo).norm()
}

/// An ordered, non-empty set of finite points with its bounding-box diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
    diagonal: f64,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        if let Some(i) = points.iter().position(|p| !is_finite_point(p)) {
            return Err(Error::InvalidInput(format!("point {i} is not finite")));
        }
        let diagonal = bbox_diagonal(&points);
        Ok(Self { points, diagonal })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Bounding-box diagonal ℓ. Zero only for a cloud of coincident points.
    pub fn diagonal(&self) -> f64 {
        self.diagonal
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }
}

/// Any unit vector perpendicular to `n`.
pub(crate) fn any_perpendicular(n: &Vec3) -> Vec3 {
    let axis = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
        Vec3::x()
    } else if n.y.abs() <= n.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    n.cross(&axis).normalize()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cloud_rejects_empty_and_nan() {
        assert!(matches!(PointCloud::new(vec![]), Err(Error::EmptySet)));
        let bad = vec![Point3::new(0.0, f64::NAN, 0.0)];
        assert!(PointCloud::new(bad).is_err());
    }

    #[test]
    fn cloud_diagonal_is_bbox_diagonal() {
        let cloud = PointCloud::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 2.0, 0.5),
            Point3::new(0.5, -1.0, 2.0),
        ])
        .unwrap();
        let expected = (1.0f64 + 9.0 + 4.0).sqrt();
        assert!((cloud.diagonal() - expected).abs() < 1e-15);
    }

    #[test]
    fn perpendicular_is_unit_and_orthogonal() {
        for n in [Vec3::x(), Vec3::new(0.3, -0.4, 0.866).normalize(), -Vec3::z()] {
            let p = any_perpendicular(&n);
            assert!((p.norm() - 1.0).abs() < 1e-12);
            assert!(p.dot(&n).abs() < 1e-12);
        }
    }
}

/// Median distance to the `k`-th nearest other point; 0 for clouds of at
/// most `k` points.
pub fn median_knn_distance(points: &[Point3], k: usize) -> f64 {
    if points.len() <= k {
        return 0.0;
    }
    let tree = KdTree::new(points);
    let mut d: Vec<f64> = points
        .iter()
        .map(|p| tree.knn(p, k + 1).last().map_or(0.0, |&(_, d2)| d2.sqrt()))
        .collect();
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

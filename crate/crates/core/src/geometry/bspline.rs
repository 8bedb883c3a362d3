use super::{dist2, Point3, Vec3};

/// Clamped knot vector of a cubic (order 4) B-spline with four control
/// points. The end knots repeat with multiplicity equal to the order, which
/// pins `p(0) = P0` and `p(1) = P3`.
pub const CLAMPED_CUBIC_KNOTS: [f64; 8] = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];

const DEGREE: usize = 3;

/// Non-zero basis functions `B_{span-3..=span, 4}(t)` via the Cox–de Boor
/// triangular recursion.
pub fn bspline_basis(knots: &[f64], span: usize, t: f64) -> [f64; DEGREE + 1] {
    let mut n = [0.0; DEGREE + 1];
    let mut left = [0.0; DEGREE + 1];
    let mut right = [0.0; DEGREE + 1];
    n[0] = 1.0;
    for j in 1..=DEGREE {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

/// Cubic quasi-uniform B-spline with four control points.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicBSpline {
    pub control: [Point3; 4],
}

impl CubicBSpline {
    pub fn new(control: [Point3; 4]) -> Self {
        Self { control }
    }

    /// Basis weights at `t`, clamped to `[0, 1]`.
    pub fn basis(t: f64) -> [f64; 4] {
        let t = t.clamp(0.0, 1.0);
        // The only non-degenerate knot span of the clamped vector is [t_3, t_4).
        bspline_basis(&CLAMPED_CUBIC_KNOTS, DEGREE, t)
    }

    pub fn point_at(&self, t: f64) -> Point3 {
        let w = Self::basis(t);
        let mut acc = Vec3::zeros();
        for (p, wi) in self.control.iter().zip(w) {
            acc += p.coords * wi;
        }
        Point3::from(acc)
    }

    /// `m ≥ 2` samples at uniformly spaced parameters; first is `P0`, last `P3`.
    pub fn sample(&self, m: usize) -> Vec<Point3> {
        match m {
            0 => Vec::new(),
            1 => vec![self.control[0]],
            _ => (0..m)
                .map(|j| self.point_at(j as f64 / (m - 1) as f64))
                .collect(),
        }
    }

    pub fn length(&self) -> f64 {
        let s = self.sample(257);
        s.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Parameter of the closest curve point: coarse scan then golden-section
    /// refinement in the bracketing interval.
    pub fn closest_parameter(&self, p: &Point3) -> f64 {
        const COARSE: usize = 32;
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for j in 0..=COARSE {
            let d = dist2(p, &self.point_at(j as f64 / COARSE as f64));
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        let h = 1.0 / COARSE as f64;
        let mut a = (best as f64 - 1.0).max(0.0) * h;
        let mut b = (best as f64 + 1.0).min(COARSE as f64) * h;
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let f = |t: f64| dist2(p, &self.point_at(t));
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let mut f1 = f(x1);
        let mut f2 = f(x2);
        for _ in 0..48 {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = f(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = f(x2);
            }
        }
        let mid = 0.5 * (a + b);
        // Endpoints are candidates too when the minimum sits on the boundary.
        [mid, 0.0, 1.0, best as f64 * h]
            .into_iter()
            .min_by(|x, y| f(*x).total_cmp(&f(*y)))
            .unwrap_or(mid)
    }

    pub fn distance_to(&self, p: &Point3) -> f64 {
        dist2(p, &self.point_at(self.closest_parameter(p))).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;

    /// Bernstein polynomials; the clamped 4-point cubic reduces to them.
    fn bernstein(t: f64) -> [f64; 4] {
        let s = 1.0 - t;
        [s * s * s, 3.0 * t * s * s, 3.0 * t * t * s, t * t * t]
    }

    #[test]
    fn basis_at_half_matches_hand_values() {
        let w = CubicBSpline::basis(0.5);
        let expected = [0.125, 0.375, 0.375, 0.125];
        for k in 0..4 {
            assert!((w[k] - expected[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn basis_matches_bernstein_oracle() {
        for j in 0..=100 {
            let t = j as f64 / 100.0;
            let w = CubicBSpline::basis(t);
            let b = bernstein(t);
            for k in 0..4 {
                assert!((w[k] - b[k]).abs() < 1e-14, "t={t} k={k}");
            }
        }
    }

    #[test]
    fn midpoint_of_example_spline() {
        let s = CubicBSpline::new([
            Point3::new(0., 0., 0.),
            Point3::new(1., 1., 0.),
            Point3::new(2., -1., 0.),
            Point3::new(3., 0., 0.),
        ]);
        let m = s.point_at(0.5);
        assert!((m - Point3::new(1.5, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn endpoints_are_exact() {
        let s = CubicBSpline::new([
            Point3::new(0.1, -0.3, 7.0),
            Point3::new(1., 1., 0.),
            Point3::new(2., -1., 0.),
            Point3::new(3.3, 0.7, -0.2),
        ]);
        let samples = s.sample(17);
        assert_eq!(samples[0], s.control[0]);
        assert_eq!(samples[16], s.control[3]);
    }

    #[test]
    fn constant_control_polygon() {
        let q = Point3::new(0.3, 0.2, -4.0);
        let s = CubicBSpline::new([q; 4]);
        for p in s.sample(9) {
            assert!((p - q).norm() < 1e-15);
        }
    }

    #[test]
    fn collinear_equispaced_two_samples() {
        let a = Point3::new(0., 0., 0.);
        let b = Point3::new(3., 0., 0.);
        let s = CubicBSpline::new([a, Point3::new(1., 0., 0.), Point3::new(2., 0., 0.), b]);
        assert_eq!(s.sample(2), vec![a, b]);
    }

    #[test]
    fn closest_parameter_recovers_sample_parameter() {
        let s = CubicBSpline::new([
            Point3::new(0., 0., 0.),
            Point3::new(1., 2., 0.),
            Point3::new(2., -1., 0.5),
            Point3::new(3., 0., 0.),
        ]);
        for j in 0..=20 {
            let t = j as f64 / 20.0;
            let q = s.point_at(t);
            assert!(s.distance_to(&q) < 1e-9, "t={t}");
        }
    }
}

use super::Point3;

#[derive(Debug, Clone, PartialEq)]
pub struct LineSegment {
    pub a: Point3,
    pub b: Point3,
}

impl LineSegment {
    pub fn new(a: Point3, b: Point3) -> Self {
        Self { a, b }
    }

    pub fn point_at(&self, t: f64) -> Point3 {
        self.a + (self.b - self.a) * t
    }

    /// `m` uniformly spaced points from `a` to `b` inclusive.
    pub fn sample(&self, m: usize) -> Vec<Point3> {
        match m {
            0 => Vec::new(),
            1 => vec![self.a],
            _ => (0..m)
                .map(|j| {
                    if j == m - 1 {
                        self.b
                    } else {
                        self.point_at(j as f64 / (m - 1) as f64)
                    }
                })
                .collect(),
        }
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    pub fn parameter_of(&self, p: &Point3) -> f64 {
        let d = self.b - self.a;
        let len2 = d.norm_squared();
        if len2 == 0.0 {
            return 0.0;
        }
        ((p - self.a).dot(&d) / len2).clamp(0.0, 1.0)
    }

    pub fn distance_to(&self, p: &Point3) -> f64 {
        (p - self.point_at(self.parameter_of(p))).norm()
    }
}

//! Ground truth for a scene: point labels plus the analytic feature curves
//! and corners they were derived from.

use serde::{Deserialize, Serialize};

use crate::detection::GroundTruthLabels;
use crate::geometry::{ParametricCurve, Point3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtCurve {
    pub id: u32,
    pub curve: ParametricCurve,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub labels: GroundTruthLabels,
    pub curves: Vec<GtCurve>,
    pub corners: Vec<Point3>,
}

impl GroundTruth {
    pub fn curve(&self, id: u32) -> Option<&GtCurve> {
        self.curves.iter().find(|c| c.id == id)
    }

    /// Open curve whose endpoints best match `{a, b}` (either order), if both
    /// endpoints lie within `tol`.
    pub fn match_open_curve(&self, a: &Point3, b: &Point3, tol: f64) -> Option<&GtCurve> {
        self.curves
            .iter()
            .filter_map(|c| {
                let (s, e) = c.curve.endpoints()?;
                let fwd = (s - a).norm().max((e - b).norm());
                let rev = (s - b).norm().max((e - a).norm());
                let err = fwd.min(rev);
                (err <= tol).then_some((err, c))
            })
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.id.cmp(&y.1.id)))
            .map(|(_, c)| c)
    }
}

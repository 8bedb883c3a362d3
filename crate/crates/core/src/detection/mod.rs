//! Per-point edge/corner scoring, thresholding and corner non-maximum
//! suppression. Scorers are pluggable: ground-truth oracle, a classical
//! covariance-based scorer, or scores injected from a sidecar file.

mod covariance;
mod loss;
mod nms;

pub use covariance::{covariance_scorer, CovarianceScorer};
pub use loss::{binary_cross_entropy, detection_loss, focal_loss, smooth_l1};
pub use nms::corner_nms;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Point3, Vec3};

/// Predicted per-point edge/corner probabilities and projection offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct PointScores {
    pub edge_prob: Vec<f64>,
    pub corner_prob: Vec<f64>,
    pub edge_offset: Vec<Vec3>,
    pub corner_offset: Vec<Vec3>,
}

impl PointScores {
    pub fn zeros(n: usize) -> Self {
        Self {
            edge_prob: vec![0.0; n],
            corner_prob: vec![0.0; n],
            edge_offset: vec![Vec3::zeros(); n],
            corner_offset: vec![Vec3::zeros(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.edge_prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_prob.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        for len in [self.corner_prob.len(), self.edge_offset.len(), self.corner_offset.len()] {
            if len != n {
                return Err(Error::LengthMismatch { expected: n, actual: len });
            }
        }
        let bad_prob = |p: &f64| !(0.0..=1.0).contains(p);
        if self.edge_prob.iter().chain(&self.corner_prob).any(bad_prob) {
            return Err(Error::InvalidInput("probability outside [0, 1]".into()));
        }
        if self
            .edge_offset
            .iter()
            .chain(&self.corner_offset)
            .any(|v| !v.iter().all(|x| x.is_finite()))
        {
            return Err(Error::InvalidInput("non-finite offset".into()));
        }
        Ok(())
    }
}

/// Ground-truth point labels, offsets and curve membership.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthLabels {
    pub edge: Vec<bool>,
    pub corner: Vec<bool>,
    pub edge_offset: Vec<Vec3>,
    pub corner_offset: Vec<Vec3>,
    pub curve_id: Vec<Option<u32>>,
}

impl GroundTruthLabels {
    pub fn len(&self) -> usize {
        self.edge.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        for len in [
            self.corner.len(),
            self.edge_offset.len(),
            self.corner_offset.len(),
            self.curve_id.len(),
        ] {
            if len != n {
                return Err(Error::LengthMismatch { expected: n, actual: len });
            }
        }
        Ok(())
    }

    pub fn edge_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.edge[i]).collect()
    }

    /// Keeps the listed points, in the listed order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            edge: indices.iter().map(|&i| self.edge[i]).collect(),
            corner: indices.iter().map(|&i| self.corner[i]).collect(),
            edge_offset: indices.iter().map(|&i| self.edge_offset[i]).collect(),
            corner_offset: indices.iter().map(|&i| self.corner_offset[i]).collect(),
            curve_id: indices.iter().map(|&i| self.curve_id[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    pub tau_e: f64,
    pub tau_c: f64,
    /// NMS merge radius as a fraction of the bounding-box diagonal.
    pub delta_factor: f64,
    pub lambda_e: f64,
    pub lambda_c: f64,
    pub focal_gamma: f64,
    pub focal_alpha: f64,
    /// Move edge points by their predicted offset before proposal generation.
    pub apply_edge_offsets: bool,
    /// Move corner candidates by their predicted offset before NMS.
    pub apply_corner_offsets: bool,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            tau_e: 0.7,
            tau_c: 0.9,
            delta_factor: 0.05,
            lambda_e: 100.0,
            lambda_c: 100.0,
            focal_gamma: 2.0,
            focal_alpha: 0.25,
            apply_edge_offsets: true,
            apply_corner_offsets: true,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.tau_e) || !unit(self.tau_c) {
            return Err(Error::Config("tau_e and tau_c must lie in (0, 1)".into()));
        }
        if !(self.delta_factor > 0.0) {
            return Err(Error::Config("delta_factor must be positive".into()));
        }
        if !(self.lambda_e >= 0.0 && self.lambda_c >= 0.0 && self.focal_gamma >= 0.0) {
            return Err(Error::Config("loss weights and focal gamma must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.focal_alpha) {
            return Err(Error::Config("focal_alpha must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// A thresholded point moved by its predicted offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub index: usize,
    #[serde(with = "crate::io::point_serde")]
    pub position: Point3,
    pub prob: f64,
}

/// Edge points `E` and raw corner candidates prior to NMS.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Thresholded {
    pub edges: Vec<ProjectedPoint>,
    pub corners_raw: Vec<ProjectedPoint>,
}

pub fn threshold_points(
    cloud: &PointCloud,
    scores: &PointScores,
    cfg: &DetectionConfig,
) -> Result<Thresholded> {
    if scores.len() != cloud.len() {
        return Err(Error::LengthMismatch {
            expected: cloud.len(),
            actual: scores.len(),
        });
    }
    scores.validate()?;
    let pts = cloud.points();
    let mut out = Thresholded::default();
    for (i, p) in pts.iter().enumerate() {
        if scores.edge_prob[i] > cfg.tau_e {
            let position = if cfg.apply_edge_offsets {
                p + scores.edge_offset[i]
            } else {
                *p
            };
            out.edges.push(ProjectedPoint {
                index: i,
                position,
                prob: scores.edge_prob[i],
            });
        }
        if scores.corner_prob[i] > cfg.tau_c {
            let position = if cfg.apply_corner_offsets {
                p + scores.corner_offset[i]
            } else {
                *p
            };
            out.corners_raw.push(ProjectedPoint {
                index: i,
                position,
                prob: scores.corner_prob[i],
            });
        }
    }
    Ok(out)
}

/// Scores equal to the labels, offsets equal to the ground-truth offsets.
pub fn oracle_scorer(gt: &GroundTruthLabels) -> PointScores {
    let as_prob = |b: &bool| if *b { 1.0 } else { 0.0 };
    PointScores {
        edge_prob: gt.edge.iter().map(as_prob).collect(),
        corner_prob: gt.corner.iter().map(as_prob).collect(),
        edge_offset: gt.edge_offset.clone(),
        corner_offset: gt.corner_offset.clone(),
    }
}

/// Anything that can assign per-point scores to a cloud.
pub trait PointScorer {
    fn score(&self, cloud: &PointCloud) -> Result<PointScores>;
}

/// Returns precomputed scores, e.g. read from a sidecar file.
#[derive(Debug, Clone)]
pub struct FixedScores(pub PointScores);

impl PointScorer for FixedScores {
    fn score(&self, cloud: &PointCloud) -> Result<PointScores> {
        if self.0.len() != cloud.len() {
            return Err(Error::LengthMismatch {
                expected: cloud.len(),
                actual: self.0.len(),
            });
        }
        Ok(self.0.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(edge: &[bool], corner: &[bool]) -> GroundTruthLabels {
        let n = edge.len();
        GroundTruthLabels {
            edge: edge.to_vec(),
            corner: corner.to_vec(),
            edge_offset: (0..n).map(|i| Vec3::new(0.01 * i as f64, 0.0, 0.0)).collect(),
            corner_offset: (0..n).map(|i| Vec3::new(0.0, -0.02 * i as f64, 0.0)).collect(),
            curve_id: vec![None; n],
        }
    }

    fn cloud(n: usize) -> PointCloud {
        PointCloud::new((0..n).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect()).unwrap()
    }

    #[test]
    fn zero_scores_give_empty_sets() {
        let t = threshold_points(&cloud(5), &PointScores::zeros(5), &DetectionConfig::default())
            .unwrap();
        assert!(t.edges.is_empty());
        assert!(t.corners_raw.is_empty());
    }

    #[test]
    fn oracle_scores_reproduce_labels() {
        let gt = labels(&[true, false, true, true, false], &[false, false, true, false, false]);
        let c = cloud(5);
        let t = threshold_points(&c, &oracle_scorer(&gt), &DetectionConfig::default()).unwrap();
        let e: Vec<usize> = t.edges.iter().map(|p| p.index).collect();
        assert_eq!(e, vec![0, 2, 3]);
        assert_eq!(t.corners_raw.len(), 1);
        assert_eq!(t.corners_raw[0].index, 2);
        assert_eq!(t.corners_raw[0].position, Point3::new(2.0, -0.04, 0.0));
        assert_eq!(t.edges[1].position, Point3::new(2.02, 0.0, 0.0));
    }

    #[test]
    fn empty_corner_labels_give_no_candidates() {
        let gt = labels(&[true, true], &[false, false]);
        let t = threshold_points(&cloud(2), &oracle_scorer(&gt), &DetectionConfig::default())
            .unwrap();
        assert!(t.corners_raw.is_empty());
    }

    #[test]
    fn raising_threshold_shrinks_edge_set() {
        let mut s = PointScores::zeros(6);
        s.edge_prob = vec![0.1, 0.65, 0.7, 0.75, 0.85, 0.95];
        let c = cloud(6);
        let low = DetectionConfig { tau_e: 0.6, ..Default::default() };
        let high = DetectionConfig { tau_e: 0.8, ..Default::default() };
        let e_low: Vec<usize> = threshold_points(&c, &s, &low).unwrap().edges.iter().map(|p| p.index).collect();
        let e_high: Vec<usize> = threshold_points(&c, &s, &high).unwrap().edges.iter().map(|p| p.index).collect();
        assert!(e_high.iter().all(|i| e_low.contains(i)));
        assert_eq!(e_high, vec![4, 5]);
    }

    #[test]
    fn mismatched_scores_are_rejected() {
        let r = threshold_points(&cloud(3), &PointScores::zeros(2), &DetectionConfig::default());
        assert!(matches!(r, Err(Error::LengthMismatch { .. })));
    }
}

//! Edge classification scores and the edge Chamfer distance.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{chamfer_distance, ParametricCurve, Point3};

/// Samples per unit of diagonal-normalised curve length.
pub const DEFAULT_SAMPLE_DENSITY: f64 = 2048.0;
pub const MIN_SAMPLES_PER_CURVE: usize = 16;
/// Normalised Chamfer distance under which a predicted curve recovers a
/// ground-truth curve.
pub const RECOVERY_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
    pub counts: Counts,
}

fn ratio(num: usize, den: usize, both_empty: bool) -> f64 {
    if den > 0 {
        num as f64 / den as f64
    } else if both_empty {
        1.0
    } else {
        0.0
    }
}

/// Set-based IoU, precision and recall. An empty denominator gives 1 when
/// both sets are empty and 0 otherwise.
pub fn edge_classification_metrics(predicted: &[usize], gt: &[usize]) -> Classification {
    let mut p = predicted.to_vec();
    p.sort_unstable();
    p.dedup();
    let mut g = gt.to_vec();
    g.sort_unstable();
    g.dedup();
    let tp = p.iter().filter(|i| g.binary_search(i).is_ok()).count();
    let fp = p.len() - tp;
    let fn_ = g.len() - tp;
    let both = p.is_empty() && g.is_empty();
    Classification {
        iou: ratio(tp, tp + fp + fn_, both),
        precision: ratio(tp, tp + fp, both),
        recall: ratio(tp, tp + fn_, both),
        counts: Counts { tp, fp, fn_ },
    }
}

/// Samples of one curve at `density` samples per unit of length divided by
/// `scale`, scaled by `1 / scale`.
pub fn sample_normalized(curve: &ParametricCurve, scale: f64, density: f64) -> Vec<Point3> {
    let n = ((density * curve.length() / scale).ceil() as usize).max(MIN_SAMPLES_PER_CURVE);
    curve
        .sample_by_length(n)
        .into_iter()
        .map(|p| Point3::from(p.coords / scale))
        .collect()
}

fn sample_set(curves: &[&ParametricCurve], scale: f64, density: f64) -> Vec<Point3> {
    curves
        .iter()
        .flat_map(|c| sample_normalized(c, scale, density))
        .collect()
}

/// Chamfer distance between length-proportional samplings of two curve
/// sets after dividing all coordinates by `scale` (the scene's bounding-box
/// diagonal).
pub fn edge_chamfer_distance(
    predicted: &[&ParametricCurve],
    gt: &[&ParametricCurve],
    scale: f64,
    density: f64,
) -> Result<f64> {
    if predicted.is_empty() || gt.is_empty() {
        return Err(Error::EmptyCurveSet);
    }
    if !(scale > 0.0) || !(density > 0.0) {
        return Err(Error::InvalidInput("scale and density must be positive".into()));
    }
    chamfer_distance(&sample_set(predicted, scale, density), &sample_set(gt, scale, density))
}

/// Number of ground-truth curves with some predicted curve within
/// normalised Chamfer distance `RECOVERY_THRESHOLD`.
pub fn recovered_curves(
    predicted: &[&ParametricCurve],
    gt: &[&ParametricCurve],
    scale: f64,
    density: f64,
) -> usize {
    let pred: Vec<Vec<Point3>> = predicted.iter().map(|c| sample_normalized(c, scale, density)).collect();
    gt.iter()
        .filter(|g| {
            let gs = sample_normalized(g, scale, density);
            pred.iter()
                .any(|p| chamfer_distance(p, &gs).is_ok_and(|d| d < RECOVERY_THRESHOLD))
        })
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scene: String,
    /// `None` when either curve set is empty.
    pub ecd: Option<f64>,
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
    pub counts: Counts,
    pub gt_curves: usize,
    pub predicted_curves: usize,
    pub recovered_curves: usize,
    /// Mean fraction of proposal members that belong to the proposal's
    /// ground-truth curve, when proposals were evaluated.
    pub segmentation_precision: Option<f64>,
}

impl EvalReport {
    pub fn recovery_rate(&self) -> f64 {
        ratio(self.recovered_curves, self.gt_curves, self.predicted_curves == 0)
    }
}

pub fn evaluate(
    scene: &str,
    predicted_edges: &[usize],
    gt_edges: &[usize],
    predicted: &[&ParametricCurve],
    gt: &[&ParametricCurve],
    scale: f64,
    density: f64,
) -> Result<EvalReport> {
    let cls = edge_classification_metrics(predicted_edges, gt_edges);
    let ecd = match edge_chamfer_distance(predicted, gt, scale, density) {
        Ok(d) => Some(d),
        Err(Error::EmptyCurveSet) => None,
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        scene: scene.to_string(),
        ecd,
        iou: cls.iou,
        precision: cls.precision,
        recall: cls.recall,
        counts: cls.counts,
        gt_curves: gt.len(),
        predicted_curves: predicted.len(),
        recovered_curves: recovered_curves(predicted, gt, scale, density),
        segmentation_precision: None,
    })
}

pub const CSV_HEADER: &str = "scene,ecd,iou,precision,recall";

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), |v| format!("{v}"))
}

pub fn write_csv(mut w: impl Write, reports: &[EvalReport]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.scene,
            fmt_opt(r.ecd),
            r.iou,
            r.precision,
            r.recall
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenes: usize,
    /// Mean over scenes with a defined ECD.
    pub mean_ecd: Option<f64>,
    pub mean_iou: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub gt_curves: usize,
    pub recovered_curves: usize,
    pub mean_segmentation_precision: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

pub fn summarize(reports: &[EvalReport]) -> Summary {
    Summary {
        scenes: reports.len(),
        mean_ecd: mean(reports.iter().filter_map(|r| r.ecd)),
        mean_iou: mean(reports.iter().map(|r| r.iou)).unwrap_or(0.0),
        mean_precision: mean(reports.iter().map(|r| r.precision)).unwrap_or(0.0),
        mean_recall: mean(reports.iter().map(|r| r.recall)).unwrap_or(0.0),
        gt_curves: reports.iter().map(|r| r.gt_curves).sum(),
        recovered_curves: reports.iter().map(|r| r.recovered_curves).sum(),
        mean_segmentation_precision: mean(reports.iter().filter_map(|r| r.segmentation_precision)),
    }
}

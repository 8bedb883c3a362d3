//! End-to-end orchestration: score, threshold, corner NMS, open proposals,
//! closed proposals on the remaining edge points, selection and metrics.

mod artifacts;
mod config;

pub use artifacts::{
    read_curve_file, read_proposals, write_artifacts, write_proposals, CurveFile, CurveRecord,
    CurveSource, DetectionDump, ProposalRecord, ProposalsDump,
};
pub use config::{Mode, PipelineConfig, ScorerKind};

use std::fs;

use crate::closed_proposals::{
    build_similarity, features_for, generate_closed_proposals, ClosedProposal, SimilarityMatrix,
};
use crate::detection::{
    corner_nms, covariance_scorer, oracle_scorer, threshold_points, PointScores, ProjectedPoint,
};
use crate::error::{Error, Result};
use crate::geometry::{farthest_point_sampling, median_knn_distance, PointCloud, Point3};
use crate::io::sidecar::read_sidecar;
use crate::metrics::{evaluate, EvalReport};
use crate::open_proposals::{generate_open_proposals, OpenProposal, GT_MATCH_TOL};
use crate::selection::{select_closed, select_open, CurveSet};
use crate::truth::GroundTruth;

/// Intermediate results of one run.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub scores: Option<PointScores>,
    pub edges: Vec<ProjectedPoint>,
    pub corners_raw: Vec<ProjectedPoint>,
    pub corners: Vec<ProjectedPoint>,
    pub open_proposals: Vec<OpenProposal>,
    /// Indices into `edges` of the points given to the closed stage.
    pub closed_points: Vec<usize>,
    pub similarity: Option<SimilarityMatrix>,
    /// Member and seed indices refer to `edges`.
    pub closed_proposals: Vec<ClosedProposal>,
    /// Set when the open stage was skipped for lack of corners.
    pub open_skipped: bool,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub curves: CurveSet,
    pub report: Option<EvalReport>,
    pub artifacts: Artifacts,
}

/// Per-point scores according to `cfg.scorer`.
pub fn score_cloud(cloud: &PointCloud, gt: Option<&GroundTruth>, cfg: &PipelineConfig) -> Result<PointScores> {
    match cfg.scorer {
        ScorerKind::Oracle => {
            let gt = gt.ok_or_else(|| Error::Config("the oracle scorer needs ground truth".into()))?;
            gt.labels.validate()?;
            if gt.labels.len() != cloud.len() {
                return Err(Error::LengthMismatch {
                    expected: cloud.len(),
                    actual: gt.labels.len(),
                });
            }
            Ok(oracle_scorer(&gt.labels))
        }
        ScorerKind::Covariance => covariance_scorer(cloud, cfg.covariance_k),
        ScorerKind::Sidecar => {
            let path = cfg
                .sidecar
                .as_ref()
                .ok_or_else(|| Error::Config("the sidecar scorer needs a sidecar path".into()))?;
            read_sidecar(&fs::read(path)?, cloud.len())
        }
    }
}

/// Edge points, raw corner candidates and NMS survivors.
pub fn detect(
    cloud: &PointCloud,
    scores: &PointScores,
    cfg: &PipelineConfig,
) -> Result<(Vec<ProjectedPoint>, Vec<ProjectedPoint>, Vec<ProjectedPoint>)> {
    let t = threshold_points(cloud, scores, &cfg.detection).map_err(|e| e.in_stage("threshold"))?;
    let delta = cfg.detection.delta_factor * cloud.diagonal();
    let corners = corner_nms(&t.corners_raw, delta);
    Ok((t.edges, t.corners_raw, corners))
}

/// Open proposals for all corner pairs; `None` when there are fewer than
/// two corners. `spacing` is the cloud's median nearest-neighbour distance.
pub fn propose_open(
    edges: &[ProjectedPoint],
    corners: &[ProjectedPoint],
    spacing: f64,
    cfg: &PipelineConfig,
) -> Result<Option<Vec<OpenProposal>>> {
    if corners.len() < 2 {
        return Ok(None);
    }
    let pos: Vec<Point3> = edges.iter().map(|e| e.position).collect();
    generate_open_proposals(&pos, corners, &cfg.proposals, spacing)
        .map(Some)
        .map_err(|e| e.in_stage("open proposals"))
}

/// Indices of edge points lying within `segment_tol · R` of a kept open
/// curve.
pub fn claimed_points(edges: &[ProjectedPoint], open: &[OpenProposal], cfg: &PipelineConfig) -> Vec<bool> {
    edges
        .iter()
        .map(|e| {
            open.iter().any(|p| {
                p.curve.distance_to(&e.position) <= cfg.proposals.segment_tol * p.pair.radius
            })
        })
        .collect()
}

/// Closed proposals over the unclaimed edge points. Returns the points used
/// (indices into `edges`), their similarity matrix and the proposals with
/// indices mapped back to `edges`.
pub fn propose_closed(
    edges: &[ProjectedPoint],
    claimed: &[bool],
    gt: Option<&GroundTruth>,
    scale: f64,
    cfg: &PipelineConfig,
) -> Result<(Vec<usize>, Option<SimilarityMatrix>, Vec<ClosedProposal>)> {
    let mut used: Vec<usize> = (0..edges.len()).filter(|&i| !claimed[i]).collect();
    if used.len() > cfg.closed_max_points {
        let pts: Vec<Point3> = used.iter().map(|&i| edges[i].position).collect();
        let mut keep = farthest_point_sampling(&pts, cfg.closed_max_points, 0);
        keep.sort_unstable();
        used = keep.into_iter().map(|k| used[k]).collect();
    }
    if used.len() < cfg.closed.min_members {
        return Ok((used, None, Vec::new()));
    }
    let pts: Vec<Point3> = used.iter().map(|&i| edges[i].position).collect();
    let ids: Option<Vec<Option<u32>>> =
        gt.map(|g| used.iter().map(|&i| g.labels.curve_id.get(edges[i].index).copied().flatten()).collect());
    let features = features_for(&pts, ids.as_deref(), scale, &cfg.closed)?;
    if features.is_empty() {
        return Ok((used, None, Vec::new()));
    }
    let s = build_similarity(&features);
    let mut proposals = generate_closed_proposals(&pts, &s, &cfg.closed, None)?;
    for p in &mut proposals {
        p.seed = used[p.seed];
        for m in &mut p.members {
            *m = used[*m];
        }
    }
    Ok((used, Some(s), proposals))
}

/// Mean over proposals of the fraction of members on the proposal's
/// ground-truth curve: the curve matched by endpoints, else the most common
/// member curve.
pub fn segmentation_precision(
    proposals: &[OpenProposal],
    edges: &[ProjectedPoint],
    gt: &GroundTruth,
) -> Option<f64> {
    let id_of = |i: usize| gt.labels.curve_id.get(edges[i].index).copied().flatten();
    let per: Vec<f64> = proposals
        .iter()
        .filter(|p| !p.members.is_empty())
        .map(|p| {
            let pair = &p.pair;
            let target = gt
                .match_open_curve(&pair.c1.position, &pair.c2.position, GT_MATCH_TOL * pair.radius)
                .map(|c| c.id)
                .or_else(|| majority(p.members.iter().filter_map(|&i| id_of(i))));
            let hits = p.members.iter().filter(|&&i| target.is_some() && id_of(i) == target).count();
            hits as f64 / p.members.len() as f64
        })
        .collect();
    (!per.is_empty()).then(|| per.iter().sum::<f64>() / per.len() as f64)
}

fn majority(ids: impl Iterator<Item = u32>) -> Option<u32> {
    let mut v: Vec<u32> = ids.collect();
    v.sort_unstable();
    let mut best: Option<(usize, u32)> = None;
    for chunk in v.chunk_by(|a, b| a == b) {
        if best.is_none_or(|(n, _)| chunk.len() > n) {
            best = Some((chunk.len(), chunk[0]));
        }
    }
    best.map(|(_, id)| id)
}

/// Runs every stage on one cloud. Metrics are computed when ground truth is
/// given.
pub fn run_pipeline(
    scene: &str,
    cloud: &PointCloud,
    gt: Option<&GroundTruth>,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput> {
    let (curves, art) = run_stages(cloud, gt, cfg)?;
    let report = match gt {
        Some(g) => Some(report_for(scene, &art, &curves, g, cloud.diagonal(), cfg).map_err(|e| e.in_stage("metrics"))?),
        None => None,
    };
    Ok(PipelineOutput {
        curves,
        report,
        artifacts: art,
    })
}

/// Scoring through selection, without metrics. `gt` feeds the oracle scorer
/// and oracle closed features only.
pub fn run_stages(cloud: &PointCloud, gt: Option<&GroundTruth>, cfg: &PipelineConfig) -> Result<(CurveSet, Artifacts)> {
    cfg.validate()?;
    let scale = cloud.diagonal();
    let scores = score_cloud(cloud, gt, cfg).map_err(|e| e.in_stage("score"))?;
    let (edges, corners_raw, corners) = detect(cloud, &scores, cfg)?;
    let mut art = Artifacts {
        edges,
        corners_raw,
        corners,
        ..Default::default()
    };

    let mut open_kept = Vec::new();
    if cfg.mode.runs_open() {
        let spacing = median_knn_distance(cloud.points(), 1);
        match propose_open(&art.edges, &art.corners, spacing, cfg)? {
            Some(props) => {
                open_kept = select_open(&props, &cfg.selection);
                art.open_proposals = props;
            }
            None => art.open_skipped = true,
        }
    }

    let mut closed_kept = Vec::new();
    if cfg.mode.runs_closed() {
        let claimed = claimed_points(&art.edges, &open_kept, cfg);
        let (used, s, props) =
            propose_closed(&art.edges, &claimed, gt, scale, cfg).map_err(|e| e.in_stage("closed proposals"))?;
        let pos: Vec<Point3> = art.edges.iter().map(|e| e.position).collect();
        closed_kept = select_closed(&props, &pos, &cfg.selection);
        art.closed_points = used;
        art.similarity = s;
        art.closed_proposals = props;
    }

    let curves = CurveSet {
        open: open_kept,
        closed: closed_kept,
    };
    art.scores = Some(scores);
    Ok((curves, art))
}

/// Reruns selection on dumped proposals.
pub fn select_dump(dump: &ProposalsDump, cfg: &PipelineConfig) -> CurveSet {
    let pos: Vec<Point3> = dump.edges.iter().map(|e| e.position).collect();
    CurveSet {
        open: select_open(&dump.open, &cfg.selection),
        closed: select_closed(&dump.closed, &pos, &cfg.selection),
    }
}

/// Metrics of a curve file against ground truth for `cloud`.
pub fn evaluate_curve_file(
    scene: &str,
    file: &CurveFile,
    cloud: &PointCloud,
    gt: &GroundTruth,
    density: f64,
) -> Result<EvalReport> {
    if let Some(&bad) = file.edge_points.iter().find(|&&i| i >= cloud.len()) {
        return Err(Error::InvalidInput(format!("edge point {bad} outside the cloud")));
    }
    let pred = file.parametric();
    let pred: Vec<_> = pred.iter().collect();
    let gt_curves: Vec<_> = gt.curves.iter().map(|c| &c.curve).collect();
    evaluate(
        scene,
        &file.edge_points,
        &gt.labels.edge_indices(),
        &pred,
        &gt_curves,
        cloud.diagonal(),
        density,
    )
}

fn report_for(
    scene: &str,
    art: &Artifacts,
    curves: &CurveSet,
    gt: &GroundTruth,
    scale: f64,
    cfg: &PipelineConfig,
) -> Result<EvalReport> {
    let predicted: Vec<usize> = art.edges.iter().map(|e| e.index).collect();
    let gt_curves: Vec<_> = gt.curves.iter().map(|c| &c.curve).collect();
    let mut r = evaluate(
        scene,
        &predicted,
        &gt.labels.edge_indices(),
        &curves.curves(),
        &gt_curves,
        scale,
        cfg.ecd_density,
    )?;
    r.segmentation_precision = segmentation_precision(&art.open_proposals, &art.edges, gt);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_ties_to_smaller_id() {
        assert_eq!(majority([3, 1, 3, 1].into_iter()), Some(1));
        assert_eq!(majority([3, 1, 3].into_iter()), Some(3));
        assert_eq!(majority(std::iter::empty()), None);
    }
}

//! On-disk scenes: `<stem>.ply` (points plus a label byte), `<stem>.gt.json`
//! (curves, corners, per-point curve ids and normals) and `<stem>.gt.ecsc`
//! (ground-truth scores and offsets as a score sidecar).

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SyntheticScene;
use crate::detection::{oracle_scorer, GroundTruthLabels};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Point3, Vec3};
use crate::io::ply::{read_ply, write_ply, LABEL_CORNER, LABEL_EDGE};
use crate::io::sidecar::{read_sidecar, write_sidecar};
use crate::truth::{GroundTruth, GtCurve};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneMeta {
    pub curves: Vec<GtCurve>,
    #[serde(with = "crate::io::points_serde")]
    pub corners: Vec<Point3>,
    pub curve_ids: Vec<Option<u32>>,
    #[serde(default)]
    pub normals: Option<Vec<[f64; 3]>>,
    /// Sidecar file name, relative to the JSON file.
    pub sidecar: String,
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneFiles {
    pub ply: PathBuf,
    pub gt_json: PathBuf,
    pub sidecar: PathBuf,
}

impl SceneFiles {
    pub fn for_stem(dir: &Path, stem: &str) -> Self {
        Self {
            ply: dir.join(format!("{stem}.ply")),
            gt_json: dir.join(format!("{stem}.gt.json")),
            sidecar: dir.join(format!("{stem}.gt.ecsc")),
        }
    }

    /// Companion files of a PLY path `<dir>/<stem>.ply`.
    pub fn for_ply(ply: &Path) -> Self {
        let dir = ply.parent().unwrap_or(Path::new("."));
        let stem = ply.file_stem().and_then(|s| s.to_str()).unwrap_or("scene");
        Self::for_stem(dir, stem)
    }
}

fn label_bytes(l: &GroundTruthLabels) -> Vec<u8> {
    (0..l.len())
        .map(|i| {
            let mut b = 0;
            if l.edge[i] {
                b |= LABEL_EDGE;
            }
            if l.corner[i] {
                b |= LABEL_CORNER;
            }
            b
        })
        .collect()
}

pub fn write_scene(scene: &SyntheticScene, dir: &Path, stem: &str) -> Result<SceneFiles> {
    fs::create_dir_all(dir)?;
    let files = SceneFiles::for_stem(dir, stem);
    let labels = &scene.truth.labels;
    write_ply(
        BufWriter::new(fs::File::create(&files.ply)?),
        scene.cloud.points(),
        Some(&label_bytes(labels)),
    )?;
    write_sidecar(
        BufWriter::new(fs::File::create(&files.sidecar)?),
        &oracle_scorer(labels),
    )?;
    let meta = SceneMeta {
        curves: scene.truth.curves.clone(),
        corners: scene.truth.corners.clone(),
        curve_ids: labels.curve_id.clone(),
        normals: Some(scene.normals.iter().map(|n| [n.x, n.y, n.z]).collect()),
        sidecar: files
            .sidecar
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string(),
        spacing: scene.spacing,
    };
    fs::write(&files.gt_json, serde_json::to_vec(&meta)?)?;
    Ok(files)
}

/// Reads a PLY cloud and, when `<stem>.gt.json` exists next to it, its
/// ground truth and normals.
pub fn read_scene(ply: &Path) -> Result<(PointCloud, Option<GroundTruth>, Option<Vec<Vec3>>)> {
    let raw = read_ply(&fs::read(ply)?)?;
    let cloud = PointCloud::new(raw.points)?;
    let files = SceneFiles::for_ply(ply);
    if !files.gt_json.exists() {
        return Ok((cloud, None, None));
    }
    let (gt, normals) = read_ground_truth(&files.gt_json, cloud.len(), raw.labels.as_deref())?;
    Ok((cloud, Some(gt), normals))
}

/// Reads a ground-truth JSON file for a cloud of `n` points. Labels come
/// from the score sidecar it names, or from `ply_labels` when the sidecar
/// is absent.
pub fn read_ground_truth(
    gt_json: &Path,
    n: usize,
    ply_labels: Option<&[u8]>,
) -> Result<(GroundTruth, Option<Vec<Vec3>>)> {
    let meta: SceneMeta = serde_json::from_slice(&fs::read(gt_json)?)?;
    if meta.curve_ids.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: meta.curve_ids.len(),
        });
    }
    let side = gt_json.with_file_name(&meta.sidecar);
    let labels = if !meta.sidecar.is_empty() && side.is_file() {
        let s = read_sidecar(&fs::read(&side)?, n)?;
        GroundTruthLabels {
            edge: s.edge_prob.iter().map(|&p| p > 0.5).collect(),
            corner: s.corner_prob.iter().map(|&p| p > 0.5).collect(),
            edge_offset: s.edge_offset,
            corner_offset: s.corner_offset,
            curve_id: meta.curve_ids,
        }
    } else {
        let bytes = ply_labels
            .ok_or_else(|| Error::Parse("ground truth has neither a sidecar nor PLY labels".into()))?;
        if bytes.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: bytes.len(),
            });
        }
        GroundTruthLabels {
            edge: bytes.iter().map(|b| b & LABEL_EDGE != 0).collect(),
            corner: bytes.iter().map(|b| b & LABEL_CORNER != 0).collect(),
            edge_offset: vec![Vec3::zeros(); n],
            corner_offset: vec![Vec3::zeros(); n],
            curve_id: meta.curve_ids,
        }
    };
    let normals = match meta.normals {
        Some(v) if v.len() == n => Some(v.into_iter().map(|[x, y, z]| Vec3::new(x, y, z)).collect()),
        Some(v) => {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: v.len(),
            })
        }
        None => None,
    };
    let gt = GroundTruth {
        labels,
        curves: meta.curves,
        corners: meta.corners,
    };
    let ids_ok = gt.labels.curve_id.iter().flatten().all(|&id| gt.curve(id).is_some());
    if !ids_ok {
        return Err(Error::Parse("curve id without a matching curve".into()));
    }
    Ok((gt, normals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::{generate, SceneSpec};

    #[test]
    fn scene_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let scene = generate(&SceneSpec {
            n_points: 512,
            ..Default::default()
        })
        .unwrap();
        let files = write_scene(&scene, dir.path(), "box").unwrap();
        let (cloud, gt, normals) = read_scene(&files.ply).unwrap();
        let gt = gt.unwrap();
        assert_eq!(cloud.len(), 512);
        assert_eq!(gt.curves, scene.truth.curves);
        assert_eq!(gt.corners, scene.truth.corners);
        assert_eq!(gt.labels.edge, scene.truth.labels.edge);
        assert_eq!(gt.labels.corner, scene.truth.labels.corner);
        assert_eq!(normals.unwrap().len(), 512);
        for (a, b) in cloud.points().iter().zip(scene.cloud.points()) {
            assert!((a - b).norm() < 1e-6);
        }
    }
}

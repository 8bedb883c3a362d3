//! Stage files: detection JSON, proposals JSONL, similarity dump, scores
//! sidecar and the final curve JSON.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Artifacts;
use crate::closed_proposals::ClosedProposal;
use crate::detection::ProjectedPoint;
use crate::error::{Error, Result};
use crate::geometry::{CurveKind, ParametricCurve};
use crate::io::sidecar::write_sidecar;
use crate::io::simmat::write_simmat;
use crate::open_proposals::OpenProposal;
use crate::selection::CurveSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionDump {
    pub edges: Vec<ProjectedPoint>,
    pub corners_raw: Vec<ProjectedPoint>,
    pub corners: Vec<ProjectedPoint>,
}

/// One line of a proposals file. The first line holds the edge points that
/// member indices refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
pub enum ProposalRecord {
    Edges { edges: Vec<ProjectedPoint> },
    Open(OpenProposal),
    Closed(ClosedProposal),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProposalsDump {
    pub edges: Vec<ProjectedPoint>,
    pub open: Vec<OpenProposal>,
    pub closed: Vec<ClosedProposal>,
}

pub fn write_proposals(mut w: impl Write, dump: &ProposalsDump) -> Result<()> {
    let line = |w: &mut dyn Write, r: &ProposalRecord| -> Result<()> {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
        Ok(())
    };
    line(&mut w, &ProposalRecord::Edges { edges: dump.edges.clone() })?;
    for p in &dump.open {
        line(&mut w, &ProposalRecord::Open(p.clone()))?;
    }
    for p in &dump.closed {
        line(&mut w, &ProposalRecord::Closed(p.clone()))?;
    }
    Ok(())
}

/// Parses a proposals file, checking that every member index refers to an
/// edge point.
pub fn read_proposals(text: &str) -> Result<ProposalsDump> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let perr = |n: usize, m: String| Error::Parse(format!("proposals line {}: {m}", n + 1));
    let mut dump = match lines.next() {
        Some((n, l)) => match serde_json::from_str(l).map_err(|e| perr(n, e.to_string()))? {
            ProposalRecord::Edges { edges } => ProposalsDump {
                edges,
                ..Default::default()
            },
            _ => return Err(perr(n, "first record must hold the edges".into())),
        },
        None => return Err(Error::Parse("proposals file is empty".into())),
    };
    let m = dump.edges.len();
    for (n, l) in lines {
        match serde_json::from_str(l).map_err(|e| perr(n, e.to_string()))? {
            ProposalRecord::Edges { .. } => return Err(perr(n, "repeated edges record".into())),
            ProposalRecord::Open(p) => {
                if p.members.iter().chain(&p.candidates).any(|&i| i >= m) {
                    return Err(perr(n, "member index out of range".into()));
                }
                dump.open.push(p);
            }
            ProposalRecord::Closed(p) => {
                if p.seed >= m || p.members.iter().any(|&i| i >= m) {
                    return Err(perr(n, "member index out of range".into()));
                }
                dump.closed.push(p);
            }
        }
    }
    Ok(dump)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveSource {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveRecord {
    pub source: CurveSource,
    pub kind: CurveKind,
    pub curve: ParametricCurve,
    /// Cloud indices of the two corners of an open curve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corners: Option<[usize; 2]>,
    /// Cloud index of the seed point of a closed curve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<usize>,
    pub members: usize,
    pub fit_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveFile {
    pub curves: Vec<CurveRecord>,
    /// Cloud indices of the thresholded edge points, for edge metrics.
    #[serde(default)]
    pub edge_points: Vec<usize>,
}

impl CurveFile {
    /// `edges` maps closed-proposal seeds back to cloud indices.
    pub fn from_set(set: &CurveSet, edges: &[ProjectedPoint]) -> Self {
        let open = set.open.iter().map(|p| CurveRecord {
            source: CurveSource::Open,
            kind: p.curve.kind(),
            curve: p.curve.clone(),
            corners: Some([p.pair.c1.index, p.pair.c2.index]),
            seed: None,
            members: p.members.len(),
            fit_residual: p.fit_residual,
            confidence: None,
        });
        let closed = set.closed.iter().map(|p| CurveRecord {
            source: CurveSource::Closed,
            kind: p.curve.kind(),
            curve: p.curve.clone(),
            corners: None,
            seed: edges.get(p.seed).map(|e| e.index),
            members: p.members.len(),
            fit_residual: p.fit_residual,
            confidence: Some(p.confidence),
        });
        Self {
            curves: open.chain(closed).collect(),
            edge_points: edges.iter().map(|e| e.index).collect(),
        }
    }

    pub fn parametric(&self) -> Vec<ParametricCurve> {
        self.curves.iter().map(|c| c.curve.clone()).collect()
    }
}

/// Parses a curve file; `kind` must agree with the curve it labels.
pub fn read_curve_file(text: &str) -> Result<CurveFile> {
    let f: CurveFile = serde_json::from_str(text)?;
    if let Some(bad) = f.curves.iter().find(|c| c.kind != c.curve.kind()) {
        return Err(Error::Parse(format!("curve labelled {:?} is a {:?}", bad.kind, bad.curve.kind())));
    }
    Ok(f)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

/// Writes `scores.ecsc`, `detection.json`, `proposals.jsonl` and, when the
/// closed stage ran, `similarity.simmat` into `dir`.
pub fn write_artifacts(dir: &Path, art: &Artifacts) -> Result<()> {
    fs::create_dir_all(dir)?;
    if let Some(s) = &art.scores {
        let mut w = create(dir, "scores.ecsc")?;
        write_sidecar(&mut w, s)?;
        w.flush()?;
    }
    let det = DetectionDump {
        edges: art.edges.clone(),
        corners_raw: art.corners_raw.clone(),
        corners: art.corners.clone(),
    };
    let mut w = create(dir, "detection.json")?;
    serde_json::to_writer(&mut w, &det)?;
    w.flush()?;
    let mut w = create(dir, "proposals.jsonl")?;
    write_proposals(
        &mut w,
        &ProposalsDump {
            edges: art.edges.clone(),
            open: art.open_proposals.clone(),
            closed: art.closed_proposals.clone(),
        },
    )?;
    w.flush()?;
    if let Some(s) = &art.similarity {
        let mut w = create(dir, "similarity.simmat")?;
        write_simmat(&mut w, s.m, &s.data)?;
        w.flush()?;
    }
    Ok(())
}

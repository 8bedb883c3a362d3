//! `edgecurve`: feature-curve extraction from point clouds.

mod output;

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use edgecurve::io::obj::{write_obj_polylines, OBJ_SAMPLES_PER_CURVE};
use edgecurve::io::ply::read_ply;
use edgecurve::io::sidecar::write_sidecar;
use edgecurve::metrics::{summarize, write_csv, EvalReport};
use edgecurve::pipeline::{
    detect, evaluate_curve_file, read_curve_file, read_proposals, run_pipeline, run_stages, score_cloud,
    select_dump, write_artifacts, write_proposals, CurveFile, DetectionDump, PipelineConfig, ProposalsDump,
};
use edgecurve::geometry::PointCloud;
use edgecurve::synthdata::{
    fixture_suite, generate, read_ground_truth, write_scene, CurveBudget, SceneSpec, SolidKind, DEFAULT_POINTS,
};
use edgecurve::truth::GroundTruth;
use edgecurve::{Error, Result};

use output::{json_bytes, Outputs};

#[derive(Parser)]
#[command(name = "edgecurve", version, about = "Parametric feature-curve extraction from point clouds")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate labelled synthetic scenes.
    Synth(SynthArgs),
    /// Score points, threshold and suppress corners.
    Detect(DetectArgs),
    /// Generate open and closed curve proposals.
    Propose(ProposeArgs),
    /// Select final curves from a proposals file.
    Select(SelectArgs),
    /// Run every stage end to end.
    Pipeline(PipelineArgs),
    /// Score a curve file against ground truth.
    Eval(EvalArgs),
    /// Sweep one configuration knob over a scene suite.
    Ablate(AblateArgs),
}

/// Configuration shared by the stage commands. Flags override `--config`.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// Flat `key=value` configuration file with dotted keys.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
    /// Seed for proposal subset sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Point scorer: oracle, covariance or sidecar.
    #[arg(long)]
    scorer: Option<String>,
    /// Score file read by the sidecar scorer.
    #[arg(long, value_name = "FILE")]
    sidecar: Option<PathBuf>,
    /// open_only, closed_only or combined.
    #[arg(long)]
    mode: Option<String>,
    /// Edge probability threshold.
    #[arg(long)]
    tau_e: Option<f64>,
    /// Corner probability threshold.
    #[arg(long)]
    tau_c: Option<f64>,
    /// Corner NMS radius as a fraction of the cloud diagonal.
    #[arg(long)]
    delta_factor: Option<f64>,
    /// Weight of the edge offset loss.
    #[arg(long)]
    lambda_e: Option<f64>,
    /// Weight of the corner offset loss.
    #[arg(long)]
    lambda_c: Option<f64>,
    #[arg(long)]
    focal_gamma: Option<f64>,
    #[arg(long)]
    focal_alpha: Option<f64>,
    /// Sphere radius of a corner pair as a multiple of half their distance.
    #[arg(long)]
    radius_scale: Option<f64>,
    /// Points sampled inside each corner-pair sphere.
    #[arg(long)]
    sample_k: Option<usize>,
    /// Proposal loss weight of the member term.
    #[arg(long)]
    w_m: Option<f64>,
    /// Proposal loss weight of the curve type term.
    #[arg(long)]
    w_c: Option<f64>,
    /// Proposal loss weight of the parameter term.
    #[arg(long)]
    w_p: Option<f64>,
    /// Similarity margin K.
    #[arg(long)]
    k_margin: Option<f64>,
    /// Similarity row threshold.
    #[arg(long)]
    s_bar: Option<f64>,
    /// Open-curve overlap bound.
    #[arg(long)]
    tau_o: Option<f64>,
    /// Closed-curve confidence bound.
    #[arg(long)]
    tau_gamma: Option<f64>,
    /// Closed-curve IoU bound.
    #[arg(long)]
    tau_iou: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_text(&fs::read_to_string(path)?)?;
        }
        let mut set = |key: &str, v: Option<String>| v.map_or(Ok(()), |v| cfg.set(key, &v));
        let num = |v: Option<f64>| v.map(|x| x.to_string());
        set("proposals.seed", self.seed.map(|s| s.to_string()))?;
        set("scorer", self.scorer.clone())?;
        set("sidecar", self.sidecar.as_ref().map(|p| p.display().to_string()))?;
        set("mode", self.mode.clone())?;
        set("detection.tau_e", num(self.tau_e))?;
        set("detection.tau_c", num(self.tau_c))?;
        set("detection.delta_factor", num(self.delta_factor))?;
        set("detection.lambda_e", num(self.lambda_e))?;
        set("detection.lambda_c", num(self.lambda_c))?;
        set("detection.focal_gamma", num(self.focal_gamma))?;
        set("detection.focal_alpha", num(self.focal_alpha))?;
        set("proposals.radius_scale", num(self.radius_scale))?;
        set("proposals.sample_k", self.sample_k.map(|k| k.to_string()))?;
        set("proposals.w_m", num(self.w_m))?;
        set("proposals.w_c", num(self.w_c))?;
        set("proposals.w_p", num(self.w_p))?;
        set("closed.k_margin", num(self.k_margin))?;
        set("closed.s_bar", num(self.s_bar))?;
        set("selection.tau_o", num(self.tau_o))?;
        set("selection.tau_gamma", num(self.tau_gamma))?;
        set("selection.tau_iou", num(self.tau_iou))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Resolves the configuration; `None` after printing it for
    /// `--print-config`.
    fn load(&self) -> Result<Option<PipelineConfig>> {
        let cfg = self.resolve()?;
        if self.print_config {
            print!("{}", cfg.to_text());
            return Ok(None);
        }
        Ok(Some(cfg))
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Write the 20-scene fixture suite instead of a single scene.
    #[arg(long)]
    suite: bool,
    /// File stem of a single scene.
    #[arg(long, default_value = "scene")]
    stem: String,
    /// box_union, cylinder_union or wireframe_only.
    #[arg(long, default_value = "box_union")]
    kind: String,
    /// Points per scene.
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, default_value_t = 12)]
    lines: usize,
    #[arg(long, default_value_t = 0)]
    arcs: usize,
    #[arg(long, default_value_t = 0)]
    circles: usize,
    #[arg(long, default_value_t = 0)]
    bsplines: usize,
    /// Normal-direction noise scale X.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Scene seed; added to the pinned seeds of the suite.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SceneInput {
    /// Input PLY cloud.
    #[arg(long = "in", value_name = "PLY")]
    input: PathBuf,
    /// Ground-truth JSON written by `synth`.
    #[arg(long, value_name = "JSON")]
    gt: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    scene: SceneInput,
    /// Detection JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the per-point scores as a sidecar file.
    #[arg(long, value_name = "FILE")]
    scores_out: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args)]
struct ProposeArgs {
    #[command(flatten)]
    scene: SceneInput,
    /// Proposals JSONL output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args)]
struct SelectArgs {
    /// Proposals JSONL written by `propose`.
    #[arg(long)]
    proposals: Option<PathBuf>,
    /// Curve JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// OBJ polyline export of the selected curves.
    #[arg(long, value_name = "FILE")]
    export_obj: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args)]
struct PipelineArgs {
    /// Input PLY cloud.
    #[arg(long = "in", value_name = "PLY", conflicts_with = "suite")]
    input: Option<PathBuf>,
    /// Ground-truth JSON for the input cloud.
    #[arg(long, value_name = "JSON", requires = "input")]
    gt: Option<PathBuf>,
    /// Curve JSON output.
    #[arg(long, requires = "input")]
    out: Option<PathBuf>,
    /// Metrics JSON output; needs `--gt`.
    #[arg(long, requires = "gt")]
    report: Option<PathBuf>,
    /// OBJ polyline export of the final curves.
    #[arg(long, value_name = "FILE", requires = "input")]
    export_obj: Option<PathBuf>,
    /// Directory for stage artifacts.
    #[arg(long, value_name = "DIR", requires = "input")]
    dump_dir: Option<PathBuf>,
    /// Run every `*.ply` scene in a directory instead of one cloud.
    #[arg(long, value_name = "DIR")]
    suite: Option<PathBuf>,
    /// Output directory of a suite run.
    #[arg(long, value_name = "DIR", requires = "suite")]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Curve JSON to evaluate.
    #[arg(long)]
    pred: PathBuf,
    /// Cloud the curves were extracted from.
    #[arg(long = "in", value_name = "PLY")]
    input: PathBuf,
    /// Ground-truth JSON.
    #[arg(long, value_name = "JSON")]
    gt: PathBuf,
    /// Report JSON output; printed when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args)]
struct AblateArgs {
    /// Dotted configuration key, or a leaf name that is unique.
    #[arg(long)]
    knob: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    /// Directory of scenes with ground truth.
    #[arg(long, value_name = "DIR")]
    suite: PathBuf,
    /// CSV output; printed when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
            eprintln!("edgecurve: cannot start worker pool: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("edgecurve: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Detect(a) => detect_cmd(a),
        Command::Propose(a) => propose(a),
        Command::Select(a) => select(a),
        Command::Pipeline(a) => pipeline(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => ablate(a),
    }
}

fn usage(msg: impl Display) -> Error {
    Error::InvalidInput(msg.to_string())
}

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| usage(format!("missing {flag}")))
}

/// Reads a cloud and, when given, its ground truth.
fn load_scene(ply: &Path, gt: Option<&Path>) -> Result<(PointCloud, Option<GroundTruth>)> {
    let raw = read_ply(&fs::read(ply).map_err(|e| usage(format!("{}: {e}", ply.display())))?)?;
    let cloud = PointCloud::new(raw.points)?;
    let gt = match gt {
        Some(p) => {
            if !p.is_file() {
                return Err(usage(format!("{}: no such file", p.display())));
            }
            Some(read_ground_truth(p, cloud.len(), raw.labels.as_deref())?.0)
        }
        None => None,
    };
    Ok((cloud, gt))
}

fn scene_name(ply: &Path) -> String {
    ply.file_stem().and_then(|s| s.to_str()).unwrap_or("scene").to_string()
}

fn synth(a: SynthArgs) -> Result<()> {
    let n_points = a.points.unwrap_or(DEFAULT_POINTS);
    let specs: Vec<(String, SceneSpec)> = if a.suite {
        fixture_suite()
            .into_iter()
            .map(|(name, mut s)| {
                s.seed = s.seed.wrapping_add(a.seed);
                s.n_points = n_points;
                s.noise_x = a.noise;
                (name, s)
            })
            .collect()
    } else {
        let spec = SceneSpec {
            seed: a.seed,
            n_points,
            budget: CurveBudget {
                lines: a.lines,
                arcs: a.arcs,
                circles: a.circles,
                bsplines: a.bsplines,
            },
            solid_kind: a.kind.parse::<SolidKind>()?,
            noise_x: a.noise,
        };
        vec![(a.stem.clone(), spec)]
    };
    for (_, s) in &specs {
        s.validate()?;
    }
    let scenes = specs
        .par_iter()
        .map(|(name, s)| generate(s).map(|scene| (name, scene)))
        .collect::<Result<Vec<_>>>()?;
    for (name, scene) in &scenes {
        write_scene(scene, &a.out, name)?;
    }
    eprintln!("wrote {} scene(s) to {}", scenes.len(), a.out.display());
    Ok(())
}

fn detect_cmd(a: DetectArgs) -> Result<()> {
    let Some(cfg) = a.cfg.load()? else { return Ok(()) };
    let out = required(&a.out, "--out")?;
    let (cloud, gt) = load_scene(&a.scene.input, a.scene.gt.as_deref())?;
    let scores = score_cloud(&cloud, gt.as_ref(), &cfg).map_err(|e| e.in_stage("score"))?;
    let (edges, corners_raw, corners) = detect(&cloud, &scores, &cfg)?;
    let mut outs = Outputs::default();
    outs.add(
        out,
        json_bytes(&DetectionDump {
            edges,
            corners_raw,
            corners,
        })?,
    );
    if let Some(p) = &a.scores_out {
        let mut b = Vec::new();
        write_sidecar(&mut b, &scores)?;
        outs.add(p, b);
    }
    outs.commit()
}

fn propose(a: ProposeArgs) -> Result<()> {
    let Some(cfg) = a.cfg.load()? else { return Ok(()) };
    let out = required(&a.out, "--out")?;
    let (cloud, gt) = load_scene(&a.scene.input, a.scene.gt.as_deref())?;
    let (_, art) = run_stages(&cloud, gt.as_ref(), &cfg)?;
    let mut b = Vec::new();
    write_proposals(
        &mut b,
        &ProposalsDump {
            edges: art.edges,
            open: art.open_proposals,
            closed: art.closed_proposals,
        },
    )?;
    let mut outs = Outputs::default();
    outs.add(out, b);
    outs.commit()
}

fn obj_bytes(file: &CurveFile) -> Result<Vec<u8>> {
    let mut b = Vec::new();
    write_obj_polylines(&mut b, &file.parametric(), OBJ_SAMPLES_PER_CURVE)?;
    Ok(b)
}

fn select(a: SelectArgs) -> Result<()> {
    let Some(cfg) = a.cfg.load()? else { return Ok(()) };
    let path = required(&a.proposals, "--proposals")?;
    let out = required(&a.out, "--out")?;
    let dump = read_proposals(&fs::read_to_string(path)?)?;
    let file = CurveFile::from_set(&select_dump(&dump, &cfg), &dump.edges);
    let mut outs = Outputs::default();
    outs.add(out, json_bytes(&file)?);
    if let Some(p) = &a.export_obj {
        outs.add(p, obj_bytes(&file)?);
    }
    outs.commit()
}

/// `(name, ply, gt)` for every `*.ply` in `dir`, sorted by name. The ground
/// truth is `<stem>.gt.json` when present.
fn suite_scenes(dir: &Path) -> Result<Vec<(String, PathBuf, Option<PathBuf>)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("ply") {
            continue;
        }
        let name = scene_name(&path);
        let gt = path.with_file_name(format!("{name}.gt.json"));
        out.push((name, path, gt.is_file().then_some(gt)));
    }
    if out.is_empty() {
        return Err(usage(format!("{}: no .ply scenes", dir.display())));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

fn pipeline(a: PipelineArgs) -> Result<()> {
    let Some(cfg) = a.cfg.load()? else { return Ok(()) };
    if let Some(dir) = &a.suite {
        return pipeline_suite(dir, a.out_dir.as_deref(), &cfg);
    }
    let input = required(&a.input, "--in or --suite")?;
    let out = required(&a.out, "--out")?;
    let (cloud, gt) = load_scene(input, a.gt.as_deref())?;
    let res = run_pipeline(&scene_name(input), &cloud, gt.as_ref(), &cfg)?;
    let file = CurveFile::from_set(&res.curves, &res.artifacts.edges);
    let mut outs = Outputs::default();
    outs.add(out, json_bytes(&file)?);
    if let Some(p) = &a.report {
        outs.add(p, json_bytes(&res.report)?);
    }
    if let Some(p) = &a.export_obj {
        outs.add(p, obj_bytes(&file)?);
    }
    outs.commit()?;
    if let Some(dir) = &a.dump_dir {
        write_artifacts(dir, &res.artifacts)?;
    }
    if res.artifacts.open_skipped {
        eprintln!("fewer than two corners: open stage skipped");
    }
    Ok(())
}

/// Runs every scene of `dir`, writing `<name>.curves.json` per scene plus
/// `report.csv` and `summary.json` for scenes with ground truth.
fn pipeline_suite(dir: &Path, out_dir: Option<&Path>, cfg: &PipelineConfig) -> Result<()> {
    let out_dir = out_dir.ok_or_else(|| usage("missing --out-dir"))?;
    let scenes = suite_scenes(dir)?;
    let results = scenes
        .par_iter()
        .map(|(name, ply, gt)| {
            let (cloud, gt) = load_scene(ply, gt.as_deref())?;
            let res = run_pipeline(name, &cloud, gt.as_ref(), cfg).map_err(|e| scene_error(name, e))?;
            let file = CurveFile::from_set(&res.curves, &res.artifacts.edges);
            Ok((json_bytes(&file)?, res.report))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut outs = Outputs::default();
    let mut reports: Vec<EvalReport> = Vec::new();
    for ((name, _, _), (bytes, report)) in scenes.iter().zip(results) {
        outs.add(out_dir.join(format!("{name}.curves.json")), bytes);
        reports.extend(report);
    }
    if !reports.is_empty() {
        let mut csv = Vec::new();
        write_csv(&mut csv, &reports)?;
        outs.add(out_dir.join("report.csv"), csv);
        outs.add(out_dir.join("summary.json"), json_bytes(&summarize(&reports))?);
    }
    outs.commit()
}

/// Names the failing scene on stderr; the error keeps its exit class.
fn scene_error(name: &str, e: Error) -> Error {
    eprintln!("edgecurve: scene {name} failed");
    e
}

fn eval(a: EvalArgs) -> Result<()> {
    let Some(cfg) = a.cfg.load()? else { return Ok(()) };
    if !a.pred.is_file() {
        return Err(usage(format!("{}: no such file", a.pred.display())));
    }
    let (cloud, gt) = load_scene(&a.input, Some(&a.gt))?;
    let gt = gt.expect("ground truth was requested");
    let file = read_curve_file(&fs::read_to_string(&a.pred)?)?;
    let report = evaluate_curve_file(&scene_name(&a.input), &file, &cloud, &gt, cfg.ecd_density)?;
    let bytes = json_bytes(&report)?;
    match &a.out {
        Some(p) => {
            let mut outs = Outputs::default();
            outs.add(p, bytes);
            outs.commit()
        }
        None => Ok(std::io::stdout().write_all(&bytes)?),
    }
}

/// The dotted key named by `knob`: either a key itself or a leaf name
/// that occurs exactly once.
fn resolve_knob(cfg: &PipelineConfig, knob: &str) -> Result<String> {
    let text = cfg.to_text();
    let keys: Vec<&str> = text.lines().filter_map(|l| l.split_once('=').map(|(k, _)| k)).collect();
    if keys.contains(&knob) {
        return Ok(knob.to_string());
    }
    let hits: Vec<&&str> = keys.iter().filter(|k| k.rsplit('.').next() == Some(knob)).collect();
    match hits.as_slice() {
        [one] => Ok(one.to_string()),
        [] => Err(Error::Config(format!("unknown knob `{knob}`"))),
        _ => Err(Error::Config(format!("knob `{knob}` is ambiguous; use a dotted key"))),
    }
}

const ABLATE_HEADER: &str =
    "scene,knob,value,ecd,iou,precision,recall,segmentation_precision,gt_curves,recovered_curves";

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), |v| v.to_string())
}

fn ablate(a: AblateArgs) -> Result<()> {
    let Some(base) = a.cfg.load()? else { return Ok(()) };
    let key = resolve_knob(&base, &a.knob)?;
    let mut cfgs = Vec::new();
    for v in &a.values {
        let mut c = base.clone();
        c.set(&key, v.trim())?;
        c.validate()?;
        cfgs.push((v.trim().to_string(), c));
    }
    let scenes = suite_scenes(&a.suite)?;
    let loaded = scenes
        .par_iter()
        .map(|(name, ply, gt)| {
            let gt = gt.as_deref().ok_or_else(|| usage(format!("{name}: no ground truth")))?;
            load_scene(ply, Some(gt)).map(|(c, g)| (name.clone(), c, g.expect("ground truth was requested")))
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..cfgs.len()).flat_map(|v| (0..loaded.len()).map(move |s| (v, s))).collect();
    let reports = jobs
        .par_iter()
        .map(|&(v, s)| {
            let (name, cloud, gt) = &loaded[s];
            let res = run_pipeline(name, cloud, Some(gt), &cfgs[v].1).map_err(|e| scene_error(name, e))?;
            Ok(res.report.expect("ground truth was given"))
        })
        .collect::<Result<Vec<EvalReport>>>()?;
    let mut csv = format!("{ABLATE_HEADER}\n");
    for (&(v, _), r) in jobs.iter().zip(&reports) {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.scene,
            key,
            cfgs[v].0,
            opt(r.ecd),
            r.iou,
            r.precision,
            r.recall,
            opt(r.segmentation_precision),
            r.gt_curves,
            r.recovered_curves
        ));
    }
    match &a.out {
        Some(p) => {
            let mut outs = Outputs::default();
            outs.add(p, csv.into_bytes());
            outs.commit()
        }
        None => Ok(std::io::stdout().write_all(csv.as_bytes())?),
    }
}

use edgecurve::geometry::{CurveKind, ParametricCurve};
use edgecurve::io::simmat::read_simmat;
use edgecurve::pipeline::{
    evaluate_curve_file, read_curve_file, read_proposals, run_pipeline, select_dump, write_artifacts,
    write_proposals, CurveFile, Mode, PipelineConfig, ProposalsDump, ScorerKind,
};
use edgecurve::synthdata::{generate, CurveBudget, SceneSpec, SolidKind, SyntheticScene};
use edgecurve::Error;

fn oracle() -> PipelineConfig {
    PipelineConfig {
        scorer: ScorerKind::Oracle,
        ..Default::default()
    }
}

fn scene(kind: SolidKind, budget: CurveBudget, seed: u64) -> SyntheticScene {
    generate(&SceneSpec {
        seed,
        budget,
        solid_kind: kind,
        ..Default::default()
    })
    .unwrap()
}

fn unit_box() -> SyntheticScene {
    generate(&SceneSpec::default()).unwrap()
}

fn cylinder() -> SyntheticScene {
    let budget = CurveBudget {
        circles: 2,
        ..Default::default()
    };
    scene(SolidKind::CylinderUnion, budget, 11)
}

fn circle(c: &ParametricCurve) -> &edgecurve::geometry::Circle {
    match c {
        ParametricCurve::Circle(c) => c,
        other => panic!("expected a circle, got {:?}", other.kind()),
    }
}

#[test]
fn unit_box_gives_twelve_lines() {
    let s = unit_box();
    let out = run_pipeline("box", &s.cloud, Some(&s.truth), &oracle()).unwrap();
    assert_eq!(out.curves.open.len(), 12);
    assert!(out.curves.open.iter().all(|p| p.kind == CurveKind::Line));
    assert!(out.curves.closed.is_empty());
    let r = out.report.unwrap();
    assert!(r.ecd.unwrap() < 1e-3, "ecd {:?}", r.ecd);
    assert_eq!(r.recovered_curves, 12);
    assert!(!out.artifacts.open_skipped);
}

#[test]
fn cylinder_gives_two_circles_with_exact_radii() {
    let s = cylinder();
    let out = run_pipeline("cyl", &s.cloud, Some(&s.truth), &oracle()).unwrap();
    assert!(out.curves.open.is_empty());
    assert_eq!(out.curves.closed.len(), 2);
    for g in &s.truth.curves {
        let g = circle(&g.curve);
        let p = out
            .curves
            .closed
            .iter()
            .map(|p| circle(&p.curve))
            .min_by(|a, b| (a.center - g.center).norm().total_cmp(&(b.center - g.center).norm()))
            .unwrap();
        assert!((p.radius - g.radius).abs() <= 1e-3 * g.radius, "{} vs {}", p.radius, g.radius);
    }
}

#[test]
fn no_corners_skips_open_stage_but_finds_circles() {
    let wire = CurveBudget {
        circles: 2,
        ..Default::default()
    };
    for s in [cylinder(), scene(SolidKind::WireframeOnly, wire, 5)] {
        assert!(s.truth.corners.is_empty());
        let out = run_pipeline("c", &s.cloud, Some(&s.truth), &oracle()).unwrap();
        assert!(out.artifacts.open_skipped);
        assert!(out.artifacts.open_proposals.is_empty());
        let r = out.report.unwrap();
        assert_eq!(r.gt_curves, 2);
        assert_eq!(r.recovered_curves, 2);
    }
}

#[test]
fn modes_restrict_stages() {
    let s = unit_box();
    let cfg = PipelineConfig {
        mode: Mode::ClosedOnly,
        ..oracle()
    };
    let out = run_pipeline("box", &s.cloud, Some(&s.truth), &cfg).unwrap();
    assert!(out.curves.open.is_empty() && out.artifacts.open_proposals.is_empty());

    let s = cylinder();
    let cfg = PipelineConfig {
        mode: Mode::OpenOnly,
        ..oracle()
    };
    let out = run_pipeline("cyl", &s.cloud, Some(&s.truth), &cfg).unwrap();
    assert!(out.curves.closed.is_empty() && out.artifacts.closed_proposals.is_empty());
    assert!(out.artifacts.similarity.is_none());
}

#[test]
fn dumped_proposals_reselect_to_the_same_curves() {
    let spec = CurveBudget {
        lines: 12,
        circles: 1,
        ..Default::default()
    };
    let s = scene(SolidKind::BoxUnion, spec, 105);
    let cfg = oracle();
    let out = run_pipeline("decal", &s.cloud, Some(&s.truth), &cfg).unwrap();
    let art = &out.artifacts;
    let mut buf = Vec::new();
    write_proposals(
        &mut buf,
        &ProposalsDump {
            edges: art.edges.clone(),
            open: art.open_proposals.clone(),
            closed: art.closed_proposals.clone(),
        },
    )
    .unwrap();
    let dump = read_proposals(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(dump.open, art.open_proposals);
    assert_eq!(dump.closed, art.closed_proposals);
    let again = select_dump(&dump, &cfg);
    assert_eq!(
        CurveFile::from_set(&again, &dump.edges),
        CurveFile::from_set(&out.curves, &art.edges)
    );
}

#[test]
fn artifacts_are_written_and_readable() {
    let s = cylinder();
    let out = run_pipeline("cyl", &s.cloud, Some(&s.truth), &oracle()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_artifacts(dir.path(), &out.artifacts).unwrap();
    let (m, vals) = read_simmat(&std::fs::read(dir.path().join("similarity.simmat")).unwrap()).unwrap();
    assert_eq!(m, out.artifacts.closed_points.len());
    assert_eq!(vals.len(), m * m);
    let text = std::fs::read_to_string(dir.path().join("proposals.jsonl")).unwrap();
    assert_eq!(read_proposals(&text).unwrap().closed.len(), out.artifacts.closed_proposals.len());
}

#[test]
fn curve_file_round_trips_and_evaluates_like_the_pipeline() {
    let s = unit_box();
    let cfg = oracle();
    let out = run_pipeline("box", &s.cloud, Some(&s.truth), &cfg).unwrap();
    let file = CurveFile::from_set(&out.curves, &out.artifacts.edges);
    let text = serde_json::to_string(&file).unwrap();
    let back = read_curve_file(&text).unwrap();
    assert_eq!(back, file);
    let r = evaluate_curve_file("box", &back, &s.cloud, &s.truth, cfg.ecd_density).unwrap();
    let p = out.report.unwrap();
    assert_eq!((r.ecd, r.iou, r.recovered_curves), (p.ecd, p.iou, p.recovered_curves));

    let lying = text.replacen("\"kind\":\"line\"", "\"kind\":\"circle\"", 1);
    assert!(matches!(read_curve_file(&lying), Err(Error::Parse(_))));
}

#[test]
fn input_errors_carry_their_class() {
    let s = unit_box();
    let err = run_pipeline("box", &s.cloud, None, &oracle()).unwrap_err();
    assert!(err.is_input_error(), "{err}");
    let cfg = PipelineConfig {
        scorer: ScorerKind::Sidecar,
        sidecar: Some("/nonexistent/scores.ecsc".into()),
        ..Default::default()
    };
    let err = run_pipeline("box", &s.cloud, None, &cfg).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "score", .. }), "{err}");
    assert!(err.is_input_error());
}

#[test]
fn same_seed_gives_identical_output() {
    let s = scene(
        SolidKind::WireframeOnly,
        CurveBudget {
            lines: 1,
            arcs: 1,
            circles: 1,
            bsplines: 1,
        },
        301,
    );
    let run = || {
        let out = run_pipeline("w", &s.cloud, Some(&s.truth), &oracle()).unwrap();
        serde_json::to_string(&CurveFile::from_set(&out.curves, &out.artifacts.edges)).unwrap()
    };
    assert_eq!(run(), run());
}

//! Replays the checked-in fuzz corpus through the parsers with the same
//! invariants the fuzz targets assert. Every seed is a valid input.

use std::fs;
use std::path::PathBuf;

use edgecurve::io::ply::{read_ply, write_ply};
use edgecurve::io::sidecar::read_sidecar;
use edgecurve::io::simmat::read_simmat;
use edgecurve::pipeline::{read_curve_file, read_proposals, write_proposals, PipelineConfig};
use edgecurve::synthdata::SceneMeta;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

#[test]
fn ply_seeds() {
    for (name, data) in seeds("ply") {
        let cloud = read_ply(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
        let mut out = Vec::new();
        write_ply(&mut out, &cloud.points, cloud.labels.as_deref()).unwrap();
        let once = read_ply(&out).unwrap();
        let mut again = Vec::new();
        write_ply(&mut again, &once.points, once.labels.as_deref()).unwrap();
        assert_eq!(read_ply(&again).unwrap(), once, "{name}");
    }
}

#[test]
fn sidecar_seeds() {
    for (name, data) in seeds("sidecar") {
        let (&n, rest) = data.split_first().unwrap();
        let s = read_sidecar(rest, n as usize * 4).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(s.len(), n as usize * 4);
    }
}

#[test]
fn simmat_seeds() {
    for (name, data) in seeds("simmat") {
        let (m, v) = read_simmat(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(v.len(), m * m);
    }
}

#[test]
fn curve_json_seeds() {
    for (name, data) in seeds("curve_json") {
        let file = read_curve_file(text(&data)).unwrap_or_else(|e| panic!("{name}: {e}"));
        let back = serde_json::to_string(&file).unwrap();
        assert_eq!(read_curve_file(&back).unwrap(), file, "{name}");
    }
}

#[test]
fn config_seeds() {
    for (name, data) in seeds("config_kv") {
        let cfg = PipelineConfig::from_text(text(&data)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(PipelineConfig::from_text(&cfg.to_text()).unwrap(), cfg, "{name}");
    }
}

#[test]
fn proposals_seeds() {
    for (name, data) in seeds("proposals_jsonl") {
        let dump = read_proposals(text(&data)).unwrap_or_else(|e| panic!("{name}: {e}"));
        let mut out = Vec::new();
        write_proposals(&mut out, &dump).unwrap();
        assert_eq!(read_proposals(text(&out)).unwrap(), dump, "{name}");
    }
}

#[test]
fn scene_meta_seeds() {
    for (name, data) in seeds("scene_meta") {
        serde_json::from_slice::<SceneMeta>(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn truncated_seeds_are_rejected_not_panicking() {
    for target in ["ply", "simmat", "proposals_jsonl", "curve_json"] {
        for (_, data) in seeds(target) {
            for cut in [0, 1, data.len() / 3, data.len() / 2, data.len().saturating_sub(1)] {
                let d = &data[..cut];
                match target {
                    "ply" => drop(read_ply(d)),
                    "simmat" => drop(read_simmat(d)),
                    _ => {
                        if let Ok(t) = std::str::from_utf8(d) {
                            drop(read_proposals(t));
                            drop(read_curve_file(t));
                        }
                    }
                }
            }
        }
    }
}

mod mutated {
    use super::*;
    use proptest::prelude::*;

    /// A seed with a handful of bytes overwritten and an optional cut.
    fn mutate(target: &'static str) -> impl Strategy<Value = Vec<u8>> {
        let all = seeds(target);
        (0..all.len(), proptest::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..8), any::<prop::sample::Index>())
            .prop_map(move |(k, edits, cut)| {
                let mut d = all[k].1.clone();
                for (at, b) in edits {
                    if !d.is_empty() {
                        let i = at.index(d.len());
                        d[i] = b;
                    }
                }
                if cut.index(4) == 0 && !d.is_empty() {
                    d.truncate(cut.index(d.len()));
                }
                d
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 2000, failure_persistence: None, ..ProptestConfig::default() })]

        #[test]
        fn ply(d in mutate("ply")) {
            if let Ok(cloud) = read_ply(&d) {
                // Coordinates beyond the f32 range are refused, not written as inf.
                let mut out = Vec::new();
                if write_ply(&mut out, &cloud.points, cloud.labels.as_deref()).is_ok() {
                    prop_assert_eq!(read_ply(&out).unwrap().points.len(), cloud.points.len());
                }
            }
        }

        #[test]
        fn sidecar(d in mutate("sidecar")) {
            if let Some((&n, rest)) = d.split_first() {
                if let Ok(s) = read_sidecar(rest, n as usize * 4) {
                    prop_assert_eq!(s.len(), n as usize * 4);
                }
            }
        }

        #[test]
        fn simmat(d in mutate("simmat")) {
            if let Ok((m, v)) = read_simmat(&d) {
                prop_assert_eq!(v.len(), m * m);
            }
        }

        #[test]
        fn text_formats(d in mutate("proposals_jsonl"), c in mutate("config_kv"), j in mutate("curve_json")) {
            if let Ok(t) = std::str::from_utf8(&d) {
                if let Ok(dump) = read_proposals(t) {
                    let mut out = Vec::new();
                    write_proposals(&mut out, &dump).unwrap();
                    prop_assert_eq!(read_proposals(text(&out)).unwrap(), dump);
                }
            }
            if let Ok(t) = std::str::from_utf8(&c) {
                if let Ok(cfg) = PipelineConfig::from_text(t) {
                    prop_assert_eq!(PipelineConfig::from_text(&cfg.to_text()).unwrap(), cfg);
                }
            }
            if let Ok(t) = std::str::from_utf8(&j) {
                if let Ok(f) = read_curve_file(t) {
                    prop_assert_eq!(read_curve_file(&serde_json::to_string(&f).unwrap()).unwrap(), f);
                }
            }
        }
    }
}

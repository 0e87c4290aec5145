use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use pcc_core::corruption::{add_count, apply, drop_count, CorruptionKind, CorruptionSpec, SeverityLevel};
use pcc_core::harness::{self, GtVariant, Manifest, OutputFormat, RunConfig, MANIFEST_FILE};
use pcc_core::io::{load_annotations, load_detections, load_report_csv, load_report_json, load_scene, save_detections, save_report_csv};
use pcc_core::metrics::DetectionSet;
use pcc_core::scene::validate_scene;
use pcc_core::synth::SyntheticSceneSpec;

fn pcc() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pcc"));
    c.env_remove("PCC_SEED").env("RUST_LOG", "error").stderr(Stdio::null());
    c
}

fn small_spec(scenes: usize) -> SyntheticSceneSpec {
    SyntheticSceneSpec {
        scene_count: scenes,
        object_count: 4,
        points_per_object: 250,
        floor_points: 600,
        wall_points: 120,
        ..Default::default()
    }
}

fn dataset(root: &Path, scenes: usize) -> PathBuf {
    let data = root.join("data");
    harness::gen_synthetic(&small_spec(scenes), &data, OutputFormat::Binary).unwrap();
    data
}

fn write_config(root: &Path, body: &str) -> PathBuf {
    let p = root.join("config.json");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn manifest_counts_match_recount_and_schedules() {
    let tmp = tempfile::tempdir().unwrap();
    let data = dataset(tmp.path(), 3);
    let mut cfg = RunConfig::new(&data, tmp.path().join("out"));
    cfg.global_seed = 11;
    let manifest = harness::run_corrupt(&cfg).unwrap();
    assert!(manifest.skipped.is_empty(), "{:?}", manifest.skipped);
    assert_eq!(manifest.entries.len(), 3 * (10 * 5 + 3));

    for e in &manifest.entries {
        let scene = load_scene(&data.join(format!("{}.ply", e.scene_id))).unwrap();
        let ann = load_annotations(&data.join(format!("{}.json", e.scene_id))).unwrap();
        let level = SeverityLevel::new(e.level).unwrap();
        let spec = CorruptionSpec::new(e.kind, level, e.child_seed).unwrap();
        let outcome = apply(&spec, &scene, Some(&ann), &cfg.params).unwrap();
        assert_eq!(outcome.dropped_count(), e.dropped, "{:?} {}", e.kind, e.level);
        assert_eq!(outcome.added_count(), e.added);
        let n = scene.len();
        match e.kind {
            CorruptionKind::DropGlobal | CorruptionKind::DropLocal => assert_eq!(e.dropped, drop_count(level, n)),
            CorruptionKind::AddGlobal | CorruptionKind::AddLocal | CorruptionKind::SceneExpansion => {
                assert_eq!(e.added, add_count(level, n));
                assert_eq!(e.removed_original, e.added);
            }
            _ => {}
        }
        assert_eq!(e.point_count, n);

        // stored output equals the recomputed scene at file precision
        let dir = tmp.path().join("out").join(e.kind.name()).join(e.level.to_string());
        let stored = load_scene(&dir.join(format!("{}.ply", e.scene_id))).unwrap();
        let mut expected = outcome.scene().clone();
        expected.quantize_to_f32();
        assert_eq!(stored, expected);
    }
}

#[test]
fn every_corrupted_scene_revalidates() {
    let tmp = tempfile::tempdir().unwrap();
    let data = dataset(tmp.path(), 2);
    let out = tmp.path().join("out");
    let manifest = harness::run_corrupt(&RunConfig::new(&data, &out)).unwrap();
    for e in &manifest.entries {
        let dir = out.join(e.kind.name()).join(e.level.to_string());
        let scene = load_scene(&dir.join(format!("{}.ply", e.scene_id))).unwrap();
        let updated = dir.join(format!("{}.updated.json", e.scene_id));
        let ann = updated.is_file().then(|| load_annotations(&updated).unwrap());
        assert!(validate_scene(&scene, ann.as_ref()).is_empty(), "{:?} {}", e.kind, e.level);
        assert_eq!(ann.is_some(), e.kind == CorruptionKind::DropObjectParts);
    }
}

#[test]
fn worker_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let data = dataset(tmp.path(), 4);
    let mut one = RunConfig::new(&data, tmp.path().join("one"));
    one.worker_count = 1;
    one.restrict(Some(&[CorruptionKind::DropLocal, CorruptionKind::AddLocal]), Some(&[3])).unwrap();
    let mut many = one.clone();
    many.output_dir = tmp.path().join("many");
    many.worker_count = 4;
    harness::run_corrupt(&one).unwrap();
    harness::run_corrupt(&many).unwrap();
    for rel in ["manifest.json", "drop_local/3/synth_0003.ply", "add_local/3/synth_0001.ply"] {
        assert_eq!(fs::read(one.output_dir.join(rel)).unwrap(), fs::read(many.output_dir.join(rel)).unwrap());
    }
}

#[test]
fn cli_seed_precedence_and_filters() {
    let tmp = tempfile::tempdir().unwrap();
    dataset(tmp.path(), 1);
    let cfg = write_config(tmp.path(), r#"{"dataset_dir":"data","output_dir":"out","global_seed":5}"#);
    let run = |env: Option<&str>, seed: Option<&str>| {
        let mut c = pcc();
        c.args(["corrupt", "--config"]).arg(&cfg).args(["--kinds", "drop_global,drop_floor", "--levels", "2-3"]);
        if let Some(s) = seed {
            c.args(["--seed", s]);
        }
        if let Some(v) = env {
            c.env("PCC_SEED", v);
        }
        let status = c.status().unwrap();
        assert_eq!(status.code(), Some(0));
        Manifest::load(&tmp.path().join("out").join(MANIFEST_FILE)).unwrap()
    };
    let m = run(None, None);
    assert_eq!(m.global_seed, 5);
    let kinds: Vec<(CorruptionKind, u8)> = m.entries.iter().map(|e| (e.kind, e.level)).collect();
    assert_eq!(
        kinds,
        vec![(CorruptionKind::DropGlobal, 2), (CorruptionKind::DropGlobal, 3), (CorruptionKind::DropFloor, 1)]
    );
    assert_eq!(run(Some("77"), None).global_seed, 77);
    assert_eq!(run(Some("77"), Some("9")).global_seed, 9);
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = pcc().args(["corrupt", "--config"]).arg(tmp.path().join("nope.json")).status().unwrap();
    assert_eq!(missing.code(), Some(1));

    let data = dataset(tmp.path(), 2);
    // second scene gets a PLY without instance labels
    let bad = data.join("synth_0001.ply");
    fs::write(
        &bad,
        "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nproperty int semantic_label\nend_header\n0 0 0 1\n",
    )
    .unwrap();
    let cfg = write_config(tmp.path(), r#"{"dataset_dir":"data","output_dir":"out"}"#);
    let status = pcc().args(["corrupt", "--config"]).arg(&cfg).args(["--kinds", "jitter"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let m = Manifest::load(&tmp.path().join("out").join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.scenes, vec!["synth_0000"]);
    assert_eq!(m.skipped.len(), 1);
    assert!(m.skipped[0].reason.contains("missing property instance_label"));

    let bad_level = pcc().args(["corrupt", "--config"]).arg(&cfg).args(["--levels", "6"]).status().unwrap();
    assert_eq!(bad_level.code(), Some(1));
}

#[test]
fn cli_evaluate_echo_empty_and_shrunk() {
    let tmp = tempfile::tempdir().unwrap();
    let data = dataset(tmp.path(), 3);
    let echo = tmp.path().join("echo");
    harness::write_echo_detections(&data, &echo, GtVariant::Amodal).unwrap();
    let shrunk = tmp.path().join("shrunk");
    fs::create_dir_all(&shrunk).unwrap();
    for entry in fs::read_dir(&echo).unwrap() {
        let p = entry.unwrap().path();
        let mut d: DetectionSet = load_detections(&p).unwrap();
        for det in &mut d.detections {
            det.bbox = det.bbox.scaled(0.6);
        }
        save_detections(&d, &shrunk.join(p.file_name().unwrap())).unwrap();
    }
    let empty = tmp.path().join("empty");
    fs::create_dir_all(&empty).unwrap();

    let eval = |det: &Path| -> f64 {
        let out = tmp.path().join("eval.json");
        let status = pcc().args(["evaluate", "--gt"]).arg(&data).arg("--det").arg(det).arg("--out").arg(&out).status().unwrap();
        assert_eq!(status.code(), Some(0));
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        v["clean"]["map"].as_f64().unwrap()
    };
    assert_eq!(eval(&echo), 1.0);
    assert_eq!(eval(&empty), 0.0);
    assert_eq!(eval(&shrunk), 0.0);
}

#[test]
fn cli_report_baseline_only_and_csv_reload() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = tmp.path().join("base.json");
    fs::write(
        &grid,
        r#"{"method":"base","clean_map":0.6,"maps":{"jitter":{"1":0.5,"2":0.4},"drop_floor":{"1":0.55}}}"#,
    )
    .unwrap();
    let out = tmp.path().join("rep");
    let status = pcc()
        .args(["report", "--grids"])
        .arg(&grid)
        .args(["--baseline", "base", "--csv", "--svg", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report = load_report_json(&out.join("report.json")).unwrap();
    report.verify().unwrap();
    let m = report.method("base").unwrap();
    assert_eq!(m.mce, 1.0);
    assert!(m.ce.values().all(|&c| c == 1.0));
    assert!(out.join("report.svg").is_file());

    let csv = out.join("report.csv");
    let reloaded = load_report_csv(&csv).unwrap();
    let again = tmp.path().join("again.csv");
    save_report_csv(&reloaded, &again).unwrap();
    assert_eq!(fs::read(&csv).unwrap(), fs::read(&again).unwrap());

    let missing = pcc().args(["report", "--grids"]).arg(&grid).args(["--baseline", "other", "--out"]).arg(&out).status().unwrap();
    assert_eq!(missing.code(), Some(1));
}

#[test]
fn cli_gen_synthetic_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.json");
    fs::write(&spec, r#"{"scene_count":2,"object_count":3,"points_per_object":100,"floor_points":200,"wall_points":50,"seed":4}"#).unwrap();
    let out = tmp.path().join("gen");
    let status = pcc().args(["gen-synthetic", "--spec"]).arg(&spec).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let s = load_scene(&out.join("synth_0001.ply")).unwrap();
    assert_eq!(s.len(), 200 + 4 * 50 + 3 * 100);
    assert_eq!(load_annotations(&out.join("synth_0001.json")).unwrap().instances.len(), 3);
}

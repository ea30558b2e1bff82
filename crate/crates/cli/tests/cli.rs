use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use roboprep_cli::run;
use serde_json::Value;
use tempfile::TempDir;

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roboprep"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixtures(n: usize) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    let n = n.to_string();
    assert_eq!(run(["gen-fixtures", "--out", &s(&fx), "--n", &n]), 0);
    (dir, fx)
}

fn json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = bin(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage:"), "{err}");
    assert!(err.contains("sample-plan"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(run(["qa"]), 2);
    assert_eq!(run(["qa", "--in", "x", "--bogus"]), 2);
    assert_eq!(run(["--jobs", "0", "progress", "--in", "x"]), 2);
    assert_eq!(run(["sample-plan", "--config", "s.json", "--n", "many"]), 2);
}

#[test]
fn help_succeeds() {
    let out = bin(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("pipeline"));
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["validate", "--in", &s(&dir.path().join("nothing"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nothing"));
}

#[test]
fn qa_on_a_clean_pack_writes_an_accepting_report() {
    let (dir, fx) = fixtures(12);
    let pack = fx.join("episodes").join("arm_gripper-003");
    let out = dir.path().join("qa");
    let code = run([
        "qa",
        "--in",
        &s(&pack),
        "--config",
        &s(&fx.join("qa.json")),
        "--filter",
        &s(&fx.join("filter.json")),
        "--out",
        &s(&out),
    ]);
    assert_eq!(code, 0);
    let rep = json(&out.join("qa_report.json"));
    assert_eq!(rep["episode_id"], "arm_gripper-003");
    assert_eq!(rep["accepted"], true);
    assert_eq!(rep["reject_reasons"], Value::Array(vec![]));
    for key in [
        "tremble",
        "sharpness",
        "visual_diversity",
        "state_diversity",
        "motion",
    ] {
        assert!(rep[key].as_f64().unwrap() >= 0.0, "{key}");
    }
    assert!(out.join("dataset_summary.json").is_file());
}

#[test]
fn qa_is_idempotent() {
    let (dir, fx) = fixtures(12);
    let read = |d: &str| {
        let out = dir.path().join(d);
        let code = run([
            "qa",
            "--in",
            &s(&fx.join("episodes")),
            "--config",
            &s(&fx.join("qa.json")),
            "--out",
            &s(&out),
        ]);
        assert_eq!(code, 0);
        std::fs::read(out.join("qa_report.json")).unwrap()
    };
    assert_eq!(read("a"), read("a"));
    assert_eq!(read("a"), read("b"));
}

#[test]
fn sample_plan_prints_table_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let w = [
        0.054, 0.080, 0.210, 0.102, 0.089, 0.025, 0.037, 0.052, 0.124, 0.041, 0.129, 0.056,
    ];
    let ids: Vec<String> = (0..w.len()).map(|i| format!("d{i:02}")).collect();
    let cfg = dir.path().join("sampler.json");
    let body = serde_json::json!({"dataset_ids": ids, "weights": w, "ramp_steps": 100, "seed": 3});
    std::fs::write(&cfg, body.to_string()).unwrap();
    let out = bin(&["sample-plan", "--alpha", "1", "--config", &s(&cfg)]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("dataset_id,probability"));
    let total: f64 = w.iter().sum();
    let probs: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(probs.len(), 12);
    for (p, wi) in probs.iter().zip(w) {
        assert!((p - wi / total).abs() < 1e-12);
    }
}

#[test]
fn sample_plans_are_reproducible_and_seeded() {
    let (dir, fx) = fixtures(9);
    let cfg = s(&fx.join("sampler.json"));
    let plan = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let code = run([
            "sample-plan",
            "--config",
            &cfg,
            "--step",
            "400",
            "--n",
            "200",
            "--seed",
            seed,
            "--out",
            &s(&out),
        ]);
        assert_eq!(code, 0);
        std::fs::read_to_string(out).unwrap()
    };
    let a = plan("a.csv", "1");
    assert_eq!(a, plan("b.csv", "1"));
    assert_ne!(a, plan("c.csv", "2"));
    assert_eq!(a.lines().count(), 201);
    assert!(a.starts_with("draw,dataset_index,dataset_id\n0,"));
}

#[test]
fn outputs_inside_an_input_pack_are_refused() {
    let (_dir, fx) = fixtures(12);
    let pack = fx.join("episodes").join("arm_gripper-003");
    let before = std::fs::read(pack.join("states.f32")).unwrap();
    let out = bin(&["qa", "--in", &s(&pack), "--out", &s(&pack.join("report"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!pack.join("report").exists());
    let out = bin(&[
        "align",
        "--in",
        &s(&pack),
        "--reference-flow",
        "2",
        "--out",
        &s(&pack),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(std::fs::read(pack.join("states.f32")).unwrap(), before);
}

#[test]
fn pipeline_config_errors_name_file_and_field() {
    let (_dir, fx) = fixtures(9);
    std::fs::remove_file(fx.join("qa.json")).unwrap();
    let out = bin(&[
        "pipeline",
        "--config",
        &s(&fx.join("pipeline.json")),
        "--out",
        "unused",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("pipeline.json") && err.contains("`qa`"),
        "{err}"
    );
    assert!(!Path::new("unused").exists());

    let mut cfg = json(&fx.join("pipeline.json"));
    cfg["qa"] = "filter.json".into();
    cfg["reference_flow"] = (-1.0).into();
    std::fs::write(fx.join("bad.json"), cfg.to_string()).unwrap();
    let out = bin(&[
        "pipeline",
        "--config",
        &s(&fx.join("bad.json")),
        "--out",
        "unused",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json") && err.contains("`qa`"), "{err}");

    let mut cfg = json(&fx.join("pipeline.json"));
    cfg["qa_config"] = "qa.json".into();
    std::fs::write(fx.join("typo.json"), cfg.to_string()).unwrap();
    let out = bin(&[
        "pipeline",
        "--config",
        &s(&fx.join("typo.json")),
        "--out",
        "unused",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("qa_config"));
}

#[test]
fn validate_flags_structural_violators() {
    let (dir, fx) = fixtures(12);
    let out = dir.path().join("validation.json");
    let code = run([
        "validate",
        "--in",
        &s(&fx.join("episodes")),
        "--config",
        &s(&fx.join("filter.json")),
        "--out",
        &s(&out),
    ]);
    assert_eq!(code, 0);
    let rep = json(&out);
    let failed: Vec<&str> = rep["episodes"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["passed"] == false)
        .map(|r| r["episode_id"].as_str().unwrap())
        .collect();
    assert_eq!(
        failed,
        [
            "arm_gripper-000",
            "arm_gripper-001",
            "humanoid_dex-000",
            "humanoid_dex-001",
            "mobile_bimanual-000",
            "mobile_bimanual-001"
        ]
    );
    assert_eq!(rep["failed"], 6);
}

#[test]
fn align_and_unify_write_plans_and_slot_streams() {
    let (dir, fx) = fixtures(12);
    let clean = dir.path().join("clean");
    for id in ["arm_gripper-003", "humanoid_dex-003", "mobile_bimanual-003"] {
        let src = fx.join("episodes").join(id);
        let ep = roboprep::load_episode(&src).unwrap();
        roboprep::save_episode(&ep, &clean.join(id)).unwrap();
    }
    let aligned = dir.path().join("aligned");
    let code = run([
        "align",
        "--in",
        &s(&clean),
        "--config",
        &s(&fx.join("align.json")),
        "--descriptors",
        &s(&fx.join("embodiments")),
        "--out",
        &s(&aligned),
    ]);
    assert_eq!(code, 0);
    let plans = json(&aligned.join("align_plan.json"));
    let strides: Vec<f64> = plans
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["stride_f"].as_f64().unwrap())
        .collect();
    assert_eq!(strides.len(), 3);
    assert!((strides[0] - 1.0).abs() < 0.15, "{strides:?}");
    assert!((strides[1] - 2.0).abs() < 0.3, "{strides:?}");
    assert!((strides[2] - 2.0 / 3.0).abs() < 0.1, "{strides:?}");
    let hum = roboprep::load_episode(&aligned.join("episodes").join("humanoid_dex-003")).unwrap();
    let orig = roboprep::load_episode(&clean.join("humanoid_dex-003")).unwrap();
    assert_eq!(hum.len(), (orig.len() - 1) / 2 + 1);

    let unified = dir.path().join("unified");
    let code = run([
        "unify",
        "--in",
        &s(&aligned.join("episodes")),
        "--descriptors",
        &s(&fx.join("embodiments")),
        "--layout",
        &s(&fx.join("layout.json")),
        "--out",
        &s(&unified),
    ]);
    assert_eq!(code, 0);
    let meta = json(&unified.join("arm_gripper-003").join("unified.json"));
    let t = meta["T"].as_u64().unwrap() as usize;
    let bytes = std::fs::read(unified.join("arm_gripper-003").join("unified.f32")).unwrap();
    assert_eq!(bytes.len(), t * 64 * 4);
    assert_eq!(meta["mask"], serde_json::json!([0, 1, 2, 3, 4, 5, 6, 14]));
    assert!(meta["control_prompt"]
        .as_str()
        .unwrap()
        .ends_with("slots=0-6,14"));
}

#[test]
fn augment_writes_variants_and_reports_skips() {
    let (dir, fx) = fixtures(12);
    let out = dir.path().join("aug");
    let code = run([
        "augment",
        "--in",
        &s(&fx.join("episodes")),
        "--descriptors",
        &s(&fx.join("embodiments")),
        "--config",
        &s(&fx.join("augment.json")),
        "--out",
        &s(&out),
    ]);
    assert_eq!(code, 0);
    let rep = json(&out.join("augment_report.json"));
    let mirrored = rep["mirrored"].as_array().unwrap();
    assert!(!mirrored.is_empty());
    assert!(mirrored
        .iter()
        .all(|m| !m.as_str().unwrap().starts_with("arm_gripper")));
    assert!(rep["skipped"]
        .as_array()
        .unwrap()
        .iter()
        .any(|s| s["augmentation"] == "mirror" && s["episode_id"] == "arm_gripper-003"));
    let first = mirrored[0].as_str().unwrap();
    let ep = roboprep::load_episode(&out.join(first)).unwrap();
    let prov = ep.provenance.unwrap();
    assert_eq!(prov.augmentation, "mirror");
    assert_eq!(format!("{}__mirror", prov.source_id), first);
}

#[test]
fn retarget_routes_through_the_unified_layout() {
    let (dir, fx) = fixtures(12);
    let out = dir.path().join("rt");
    let code = run([
        "retarget",
        "--in",
        &s(&fx.join("episodes").join("arm_gripper-003")),
        "--descriptors",
        &s(&fx.join("embodiments")),
        "--target",
        "mobile_bimanual",
        "--out",
        &s(&out),
    ]);
    assert_eq!(code, 0);
    let src = roboprep::load_episode(&fx.join("episodes").join("arm_gripper-003")).unwrap();
    let ep = roboprep::load_episode(&out.join("arm_gripper-003")).unwrap();
    assert_eq!(ep.embodiment_id, "mobile_bimanual");
    assert_eq!(ep.actions.cols(), 19);
    for t in 0..ep.len() {
        assert_eq!(&ep.actions.row(t)[..7], &src.actions.row(t)[..7]);
        // the single gripper lands on the first gripper slot
        assert_eq!(ep.actions.get(t, 14), src.actions.get(t, 7));
        assert!(ep.actions.row(t)[16..].iter().all(|&v| v == 0.0));
    }
    // humanoid hands have no counterpart on the bimanual base
    let out2 = dir.path().join("rt2");
    let code = run([
        "retarget",
        "--in",
        &s(&fx.join("episodes").join("humanoid_dex-003")),
        "--descriptors",
        &s(&fx.join("embodiments")),
        "--target",
        "mobile_bimanual",
        "--out",
        &s(&out2),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn density_model_fit_and_check() {
    let (dir, fx) = fixtures(15);
    let model = dir.path().join("gmm_model.json");
    let code = run([
        "fit-ood",
        "--in",
        &s(&fx.join("episodes")),
        "--embodiment",
        "arm_gripper",
        "--k",
        "2",
        "--seed",
        "5",
        "--out",
        &s(&model),
    ]);
    assert_eq!(code, 0);
    let m = json(&model);
    assert_eq!(m["K"], 2);
    assert_eq!(m["seed"], 5);
    assert_eq!(m["standardization"]["mean"].as_array().unwrap().len(), 8);
    let report = dir.path().join("ood.json");
    let code = run([
        "ood-check",
        "--in",
        &s(&fx.join("episodes").join("arm_gripper-003")),
        "--config",
        &s(&model),
        "--iterate",
        "3",
        "--out",
        &s(&report),
    ]);
    assert_eq!(code, 0);
    let r = json(&report);
    assert_eq!(r[0]["episode_id"], "arm_gripper-003");
    for c in r[0]["corrections"].as_array().unwrap() {
        assert!(c["corrected_density"].as_f64() >= c["density"].as_f64());
    }
    // a model of the wrong width is a data error
    let code = run([
        "ood-check",
        "--in",
        &s(&fx.join("episodes").join("humanoid_dex-003")),
        "--config",
        &s(&model),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn progress_csv_ends_at_one() {
    let (dir, fx) = fixtures(9);
    let out = dir.path().join("p.csv");
    let pack = fx.join("episodes").join("mobile_bimanual-000");
    assert_eq!(run(["progress", "--in", &s(&pack), "--out", &s(&out)]), 0);
    let text = std::fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "episode_id,t,progress,end");
    assert_eq!(lines.len(), 11);
    assert_eq!(lines[1], "mobile_bimanual-000,0,0.1,false");
    assert_eq!(lines[10], "mobile_bimanual-000,9,1,true");
}

#[test]
fn refine_with_a_quadratic_critic() {
    let (dir, fx) = fixtures(12);
    let cfg = dir.path().join("refine.json");
    let body = serde_json::json!({
        "eta": 0.01,
        "n_steps": 3,
        "critic": {"kind": "quadratic", "target": vec![0.0; 8], "scale": 1.0}
    });
    std::fs::write(&cfg, body.to_string()).unwrap();
    let out = dir.path().join("refined");
    let pack = fx.join("episodes").join("arm_gripper-003");
    assert_eq!(
        run([
            "refine",
            "--in",
            &s(&pack),
            "--config",
            &s(&cfg),
            "--out",
            &s(&out)
        ]),
        0
    );
    let rep = json(&out.join("refine_report.json"));
    let steps = rep[0]["steps"].as_array().unwrap();
    let src = roboprep::load_episode(&pack).unwrap();
    assert_eq!(steps.len(), src.len());
    for st in steps {
        assert_eq!(st["steps_taken"], 3);
        assert!(st["q_after"].as_f64() > st["q_before"].as_f64());
        assert!(st["grad_norm"].as_f64().unwrap() > 0.0);
    }
    let refined = roboprep::load_episode(&out.join("episodes").join("arm_gripper-003")).unwrap();
    assert_eq!(refined.states, src.states);
    assert_ne!(refined.actions, src.actions);

    std::fs::write(
        &cfg,
        r#"{"eta": 0.1, "n_steps": 1, "critic": {"kind": "oracle"}}"#,
    )
    .unwrap();
    let out = bin(&[
        "refine",
        "--in",
        &s(&pack),
        "--config",
        &s(&cfg),
        "--out",
        &s(&dir.path().join("x")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("refine.json"));
}

#[test]
fn pipeline_with_more_jobs_matches_single_threaded() {
    let (dir, fx) = fixtures(12);
    let go = |name: &str, jobs: &str| {
        let out = dir.path().join(name);
        let code = run([
            "--jobs",
            jobs,
            "pipeline",
            "--config",
            &s(&fx.join("pipeline.json")),
            "--out",
            &s(&out),
            "--n",
            "50",
        ]);
        assert_eq!(code, 0);
        out
    };
    let (a, b) = (go("one", "1"), go("four", "4"));
    for f in [
        "pipeline_report.json",
        "qa/qa_report.json",
        "qa/dataset_summary.json",
        "align/align_plan.json",
        "augmented/augment_report.json",
        "sample_plan.csv",
        "mixture.csv",
        "validation.json",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let plan = std::fs::read_to_string(a.join("sample_plan.csv")).unwrap();
    assert_eq!(plan.lines().count(), 51);
}

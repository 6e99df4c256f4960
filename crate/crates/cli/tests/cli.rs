//! End-to-end tests of the adr-signal binary: exit codes, output formats,
//! determinism, and agreement with direct library calls.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use adr_core::ingest;
use adr_core::model::DrugId;
use adr_core::signal::{rank_signals, Method, ZeroPolicy};
use adr_core::windowing::{associate_gp, associate_srs, WindowConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adr-signal"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

const SYNTH_CONFIG: &str = r#"{
  "seed": 42,
  "n_patients": 250,
  "n_drugs": 4,
  "n_event_codes": 30,
  "observation_days": 540,
  "background_prescription_rate": 3.0,
  "background_event_rate": 14.0,
  "planted_effects": [
    { "drug": "D002", "event_code": "AB1a•", "rate_multiplier": 5.0, "onset_window_days": 60 }
  ],
  "srs_reporting_prob": 0.4,
  "srs_missingness": { "age": 0.3, "gender": 0.05, "event_date": 0.2 }
}"#;

struct Fixture {
    #[allow(dead_code)]
    dir: tempfile::TempDir,
    config: PathBuf,
    data: PathBuf,
}

fn synth_fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("synth.json");
    fs::write(&config, SYNTH_CONFIG).unwrap();
    let data = dir.path().join("data");
    let out = run(&[
        "synth",
        "--config",
        config.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);
    Fixture { dir, config, data }
}

fn gp_args(data: &Path) -> Vec<String> {
    [
        ("--patients", "patients.csv"),
        ("--prescriptions", "prescriptions.csv"),
        ("--events", "events.csv"),
    ]
    .iter()
    .flat_map(|(flag, file)| {
        [flag.to_string(), data.join(file).to_str().unwrap().to_string()]
    })
    .collect()
}

/// All files of a directory except the manifest, as (name, bytes).
fn outputs_except_manifest(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .filter(|(name, _)| name != "manifest.json")
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    entries
}

#[test]
fn synth_is_deterministic_across_runs() {
    let fx = synth_fixture();
    let second = fx.dir.path().join("data2");
    let out = run(&[
        "synth",
        "--config",
        fx.config.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);
    assert_eq!(
        outputs_except_manifest(&fx.data),
        outputs_except_manifest(&second)
    );
    // the manifest exists and embeds the effective config
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fx.data.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["parameters"]["seed"], 42);
    assert_eq!(manifest["tool"], "adr-signal");
}

#[test]
fn synth_patients_override_applies() {
    let fx = synth_fixture();
    let out_dir = fx.dir.path().join("small");
    let out = run(&[
        "synth",
        "--config",
        fx.config.to_str().unwrap(),
        "--patients",
        "37",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);
    let rows = fs::read_to_string(out_dir.join("patients.csv")).unwrap();
    assert_eq!(rows.lines().count(), 38); // header + 37 rows
}

#[test]
fn synth_missing_or_invalid_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "synth",
        "--config",
        dir.path().join("nope.json").to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_exit(&out, 2);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{ "seed": 1, "n_patients": 0 }"#).unwrap();
    let out = run(&[
        "synth",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("out2").to_str().unwrap(),
    ]);
    assert_exit(&out, 2);
}

#[test]
fn signal_cli_matches_library_output() {
    let fx = synth_fixture();
    let out_dir = fx.dir.path().join("sig");
    let mut args = vec!["signal".to_string(), "--source".into(), "gp".into()];
    args.extend(gp_args(&fx.data));
    args.extend(
        ["--tcrit", "60", "--drug", "D002", "--method", "ror", "--zero-policy", "haldane"]
            .iter()
            .map(|s| s.to_string()),
    );
    args.extend(["--out".to_string(), out_dir.to_str().unwrap().to_string()]);
    let out = bin().args(&args).output().unwrap();
    assert_exit(&out, 0);

    // the same computation straight through the library
    let gp = ingest::load_gp(
        &fx.data.join("patients.csv"),
        &fx.data.join("prescriptions.csv"),
        &fx.data.join("events.csv"),
    )
    .unwrap();
    let assoc = associate_gp(&gp, WindowConfig::finite(60).unwrap());
    let drug = DrugId::new("D002").unwrap();
    let ranking = rank_signals(&assoc, &drug, Method::Ror, ZeroPolicy::Haldane).unwrap();
    let mut expected = Vec::new();
    ranking.write_csv(&mut expected).unwrap();
    let got = fs::read(out_dir.join("signals.csv")).unwrap();
    assert_eq!(got, expected);
}

#[test]
fn signal_infinite_window_matches_library() {
    let fx = synth_fixture();
    let out_dir = fx.dir.path().join("siginf");
    let mut args = vec!["signal".to_string(), "--source".into(), "gp".into()];
    args.extend(gp_args(&fx.data));
    args.extend(
        ["--tcrit", "inf", "--drug", "D002", "--method", "prr", "--zero-policy", "haldane"]
            .iter()
            .map(|s| s.to_string()),
    );
    args.extend(["--out".to_string(), out_dir.to_str().unwrap().to_string()]);
    let out = bin().args(&args).output().unwrap();
    assert_exit(&out, 0);

    let gp = ingest::load_gp(
        &fx.data.join("patients.csv"),
        &fx.data.join("prescriptions.csv"),
        &fx.data.join("events.csv"),
    )
    .unwrap();
    let assoc = associate_gp(&gp, WindowConfig::infinite());
    let drug = DrugId::new("D002").unwrap();
    let ranking = rank_signals(&assoc, &drug, Method::Prr, ZeroPolicy::Haldane).unwrap();
    let mut expected = Vec::new();
    ranking.write_csv(&mut expected).unwrap();
    assert_eq!(fs::read(out_dir.join("signals.csv")).unwrap(), expected);
}

#[test]
fn signal_rerun_is_idempotent_apart_from_manifest() {
    let fx = synth_fixture();
    let out_dir = fx.dir.path().join("sig");
    let mut args = vec!["signal".to_string(), "--source".into(), "gp".into()];
    args.extend(gp_args(&fx.data));
    args.extend(
        ["--tcrit", "60", "--drug", "D002", "--method", "ror", "--zero-policy", "strict"]
            .iter()
            .map(|s| s.to_string()),
    );
    args.extend(["--out".to_string(), out_dir.to_str().unwrap().to_string()]);
    assert_exit(&bin().args(&args).output().unwrap(), 0);
    let first = outputs_except_manifest(&out_dir);
    assert_exit(&bin().args(&args).output().unwrap(), 0);
    assert_eq!(first, outputs_except_manifest(&out_dir));
}

#[test]
fn signal_unknown_drug_suggests_nearest_ids() {
    let fx = synth_fixture();
    let mut args = vec!["signal".to_string(), "--source".into(), "gp".into()];
    args.extend(gp_args(&fx.data));
    args.extend(
        ["--tcrit", "60", "--drug", "D02", "--method", "ror"]
            .iter()
            .map(|s| s.to_string()),
    );
    args.extend(["--out".to_string(), fx.dir.path().join("x").to_str().unwrap().to_string()]);
    let out = bin().args(&args).output().unwrap();
    assert_exit(&out, 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nearest known ids"), "stderr: {stderr}");
    assert!(stderr.contains("d002"), "stderr: {stderr}");
}

#[test]
fn signal_corrupt_gp_file_is_data_error() {
    let fx = synth_fixture();
    let events = fx.data.join("events.csv");
    let mut contents = fs::read_to_string(&events).unwrap();
    contents.push_str("P00001,TOOLONG,2010-05-01\n");
    fs::write(&events, contents).unwrap();
    let mut args = vec!["signal".to_string(), "--source".into(), "gp".into()];
    args.extend(gp_args(&fx.data));
    args.extend(
        ["--tcrit", "60", "--drug", "D002", "--method", "ror"]
            .iter()
            .map(|s| s.to_string()),
    );
    args.extend(["--out".to_string(), fx.dir.path().join("x").to_str().unwrap().to_string()]);
    let out = bin().args(&args).output().unwrap();
    assert_exit(&out, 3);
}

#[test]
fn signal_tcrit_with_srs_source_is_usage_error() {
    let fx = synth_fixture();
    let out = run(&[
        "signal",
        "--source",
        "srs",
        "--reports",
        fx.data.join("srs_reports.csv").to_str().unwrap(),
        "--tcrit",
        "60",
        "--drug",
        "d002",
        "--method",
        "ror",
        "--out",
        fx.dir.path().join("x").to_str().unwrap(),
    ]);
    assert_exit(&out, 2);
}

#[test]
fn signal_missing_required_args_is_usage_error() {
    // --source gp without the gp paths
    let out = run(&["signal", "--source", "gp", "--drug", "d", "--method", "ror", "--out", "x"]);
    assert_exit(&out, 2);
}

/// Hand-built SRS file: drug x is strongly linked to e1 and e2, drug y
/// carries the background for five more events.
fn detection_srs(dir: &Path) -> PathBuf {
    let path = dir.join("reports.csv");
    let mut rows = String::from("report_id,drug,event_name,age,gender,event_date\n");
    let mut n = 0;
    let mut push = |drug: &str, event: &str, count: usize, rows: &mut String| {
        for _ in 0..count {
            n += 1;
            rows.push_str(&format!("r{n},{drug},{event},,,\n"));
        }
    };
    push("x", "e1", 40, &mut rows);
    push("x", "e2", 40, &mut rows);
    push("x", "e3", 1, &mut rows);
    for e in ["e3", "e4", "e5", "e6", "e7"] {
        push("y", e, 40, &mut rows);
    }
    push("y", "e1", 5, &mut rows);
    push("y", "e2", 5, &mut rows);
    fs::write(&path, rows).unwrap();
    path
}

#[test]
fn signal_strict_with_zero_cells_warns_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let reports = detection_srs(dir.path());
    let out_dir = dir.path().join("sig");
    let out = run(&[
        "signal",
        "--source",
        "srs",
        "--reports",
        reports.to_str().unwrap(),
        "--drug",
        "x",
        "--method",
        "ror",
        "--zero-policy",
        "strict",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("undefined"), "stderr: {stderr}");
    let undefined = fs::read_to_string(out_dir.join("undefined.csv")).unwrap();
    // drug x never co-occurs with e4..e7, so their a-cells are zero
    for event in ["e4", "e5", "e6", "e7"] {
        assert!(undefined.contains(event), "undefined.csv:\n{undefined}");
    }
    assert!(undefined.contains("cell a"), "undefined.csv:\n{undefined}");
}

#[test]
fn roc_detection_table_marks_signaled_sets() {
    let dir = tempfile::tempdir().unwrap();
    let reports = detection_srs(dir.path());
    let known = dir.path().join("known.json");
    fs::write(
        &known,
        r#"{ "ade one": ["e1"], "ade two": ["e2"], "ade three": ["e3"], "ade four": ["e4"], "ade five": ["e5"] }"#,
    )
    .unwrap();
    let out_dir = dir.path().join("roc");
    let out = run(&[
        "roc",
        "--source",
        "srs",
        "--reports",
        reports.to_str().unwrap(),
        "--drug",
        "x",
        "--method",
        "ror",
        "--zero-policy",
        "haldane",
        "--known",
        known.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);
    let detection = fs::read_to_string(out_dir.join("detection.csv")).unwrap();
    let true_rows: Vec<&str> = detection.lines().filter(|l| l.ends_with(",true")).collect();
    assert_eq!(true_rows.len(), 2, "detection:\n{detection}");
    assert!(detection.contains("ade one,true"));
    assert!(detection.contains("ade two,true"));
    assert!(detection.contains("ade three,false"));
}

#[test]
fn roc_perfect_scores_give_unit_auc_and_partial_bound() {
    let dir = tempfile::tempdir().unwrap();
    let reports = detection_srs(dir.path());
    let known = dir.path().join("known.json");
    fs::write(&known, r#"{ "ade one": ["e1"], "ade two": ["e2"] }"#).unwrap();
    let out_dir = dir.path().join("roc");
    let out = run(&[
        "roc",
        "--source",
        "srs",
        "--reports",
        reports.to_str().unwrap(),
        "--drug",
        "x",
        "--method",
        "ror",
        "--zero-policy",
        "haldane",
        "--known",
        known.to_str().unwrap(),
        "--fpr-max",
        "0.02",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("auc.json")).unwrap()).unwrap();
    assert_eq!(report["auc"], 1.0);
    let partial = report["partial_auc"].as_f64().unwrap();
    assert!(partial <= 0.02 + 1e-12);
    assert_eq!(report["fpr_max"], 0.02);
}

#[test]
fn roc_known_code_outside_universe_is_data_error_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let reports = detection_srs(dir.path());
    let known = dir.path().join("known.json");
    fs::write(&known, r#"{ "ade one": ["e1", "ghost event"] }"#).unwrap();
    let out = run(&[
        "roc",
        "--source",
        "srs",
        "--reports",
        reports.to_str().unwrap(),
        "--drug",
        "x",
        "--method",
        "ror",
        "--known",
        known.to_str().unwrap(),
        "--out",
        dir.path().join("roc").to_str().unwrap(),
    ]);
    assert_exit(&out, 3);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("ghost event"), "stderr: {stderr}");
}

#[test]
fn roc_cli_matches_library_curve() {
    let dir = tempfile::tempdir().unwrap();
    let reports = detection_srs(dir.path());
    let known = dir.path().join("known.json");
    fs::write(&known, r#"{ "ade one": ["e1"], "ade two": ["e2"] }"#).unwrap();
    let out_dir = dir.path().join("roc");
    let out = run(&[
        "roc",
        "--source",
        "srs",
        "--reports",
        reports.to_str().unwrap(),
        "--drug",
        "x",
        "--method",
        "ror",
        "--zero-policy",
        "haldane",
        "--known",
        known.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);

    let srs = ingest::load_srs(&reports).unwrap();
    let assoc = associate_srs(&srs);
    let drug = DrugId::new("x").unwrap();
    let ranking = rank_signals(&assoc, &drug, Method::Ror, ZeroPolicy::Haldane).unwrap();
    let known_sets = vec![
        adr_core::eval::KnownAdeSet::new(
            "ade one".into(),
            [adr_core::model::EventKey::name("e1").unwrap()].into(),
        )
        .unwrap(),
        adr_core::eval::KnownAdeSet::new(
            "ade two".into(),
            [adr_core::model::EventKey::name("e2").unwrap()].into(),
        )
        .unwrap(),
    ];
    let curve =
        adr_core::eval::roc_curve(&ranking.scores(), &known_sets, assoc.universe_events()).unwrap();
    let mut expected_tsv = Vec::new();
    curve.write_tsv(&mut expected_tsv).unwrap();
    assert_eq!(fs::read(out_dir.join("roc.tsv")).unwrap(), expected_tsv);

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("auc.json")).unwrap()).unwrap();
    let result = adr_core::eval::AucResult::from_curve(&curve).unwrap();
    assert_eq!(report["auc"].as_f64().unwrap(), result.auc);
    assert_eq!(report["se"].as_f64().unwrap(), result.se);
}

fn roc_outputs_for_compare(dir: &Path) -> (PathBuf, PathBuf) {
    let reports = detection_srs(dir);
    let known = dir.join("known.json");
    // e3 ranks low for drug x, so neither curve separates perfectly and
    // both AUC standard errors stay positive
    fs::write(&known, r#"{ "ade one": ["e1"], "ade three": ["e3"] }"#).unwrap();
    let mk = |drug: &str, out: &str| {
        let out_dir = dir.join(out);
        let output = run(&[
            "roc",
            "--source",
            "srs",
            "--reports",
            reports.to_str().unwrap(),
            "--drug",
            drug,
            "--method",
            "ror",
            "--zero-policy",
            "haldane",
            "--known",
            known.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_exit(&output, 0);
        out_dir.join("auc.json")
    };
    (mk("x", "roc_x"), mk("y", "roc_y"))
}

#[test]
fn compare_identical_inputs_give_p_one() {
    let dir = tempfile::tempdir().unwrap();
    let (first, _) = roc_outputs_for_compare(dir.path());
    let out_dir = dir.path().join("cmp");
    let out = run(&[
        "compare",
        first.to_str().unwrap(),
        first.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("comparison.json")).unwrap())
            .unwrap();
    assert_eq!(report["z"], 0.0);
    assert_eq!(report["p"], 1.0);
}

#[test]
fn compare_swapped_inputs_negate_z_and_keep_p() {
    let dir = tempfile::tempdir().unwrap();
    let (first, second) = roc_outputs_for_compare(dir.path());
    let fwd_dir = dir.path().join("fwd");
    let rev_dir = dir.path().join("rev");
    assert_exit(
        &run(&["compare", first.to_str().unwrap(), second.to_str().unwrap(), "--out", fwd_dir.to_str().unwrap()]),
        0,
    );
    assert_exit(
        &run(&["compare", second.to_str().unwrap(), first.to_str().unwrap(), "--out", rev_dir.to_str().unwrap()]),
        0,
    );
    let fwd: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fwd_dir.join("comparison.json")).unwrap())
            .unwrap();
    let rev: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(rev_dir.join("comparison.json")).unwrap())
            .unwrap();
    let (zf, zr) = (fwd["z"].as_f64().unwrap(), rev["z"].as_f64().unwrap());
    assert_eq!(zf, -zr);
    assert_eq!(fwd["p"], rev["p"]);
}

#[test]
fn compare_detects_forced_separation() {
    // Six strong effects planted on one drug rank top of its ROC; for a
    // drug with no effects the same codes sink to the bottom (their
    // background cells are flooded by the planted events). Two
    // background-level known sets keep both curves off the degenerate
    // corners so the z-test has variance to work with, and the gap forces
    // rejection at 5%.
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("synth.json");
    let effects: Vec<String> = ["AA1a•", "BB2b•", "CC3c•", "DD4d•", "EE5e•", "FF6f•"]
        .iter()
        .map(|code| {
            format!(
                r#"{{ "drug": "D002", "event_code": "{code}", "rate_multiplier": 8.0, "onset_window_days": 60 }}"#
            )
        })
        .collect();
    fs::write(
        &config,
        format!(
            r#"{{
  "seed": 7,
  "n_patients": 2000,
  "n_drugs": 4,
  "n_event_codes": 60,
  "observation_days": 730,
  "background_prescription_rate": 3.0,
  "background_event_rate": 18.0,
  "planted_effects": [{}],
  "srs_reporting_prob": 0.0,
  "srs_missingness": {{}}
}}"#,
            effects.join(",")
        ),
    )
    .unwrap();
    let data = dir.path().join("data");
    assert_exit(
        &run(&["synth", "--config", config.to_str().unwrap(), "--out", data.to_str().unwrap()]),
        0,
    );
    let known = dir.path().join("known.json");
    fs::write(
        &known,
        r#"{
  "ade a": ["AA1a•"], "ade b": ["BB2b•"], "ade c": ["CC3c•"],
  "ade d": ["DD4d•"], "ade e": ["EE5e•"], "ade f": ["FF6f•"],
  "bg one": ["A••••"], "bg two": ["B••••"]
}"#,
    )
    .unwrap();
    let roc = |drug: &str, out: &str| {
        let out_dir = dir.path().join(out);
        let mut args = vec!["roc".to_string(), "--source".into(), "gp".into()];
        args.extend(gp_args(&data));
        args.extend(
            ["--tcrit", "60", "--drug", drug, "--method", "ror", "--zero-policy", "haldane"]
                .iter()
                .map(|s| s.to_string()),
        );
        args.extend(["--known".to_string(), known.to_str().unwrap().to_string()]);
        args.extend(["--out".to_string(), out_dir.to_str().unwrap().to_string()]);
        assert_exit(&bin().args(&args).output().unwrap(), 0);
        out_dir.join("auc.json")
    };
    let effect_side = roc("D002", "roc_effect");
    let null_side = roc("D001", "roc_null");
    let cmp_dir = dir.path().join("cmp");
    assert_exit(
        &run(&[
            "compare",
            effect_side.to_str().unwrap(),
            null_side.to_str().unwrap(),
            "--out",
            cmp_dir.to_str().unwrap(),
        ]),
        0,
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(cmp_dir.join("comparison.json")).unwrap())
            .unwrap();
    let (auc1, auc2) = (report["auc1"].as_f64().unwrap(), report["auc2"].as_f64().unwrap());
    let p = report["p"].as_f64().unwrap();
    assert!(auc1 > auc2, "auc1 {auc1} auc2 {auc2}");
    assert!(p < 0.05, "p = {p} (auc {auc1} vs {auc2})");
}

#[test]
fn compare_mismatched_fpr_max_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let reports = detection_srs(dir.path());
    let known = dir.path().join("known.json");
    fs::write(&known, r#"{ "ade one": ["e1"] }"#).unwrap();
    let mk = |fpr: Option<&str>, out: &str| {
        let out_dir = dir.path().join(out);
        let mut args = vec![
            "roc",
            "--source",
            "srs",
            "--reports",
            reports.to_str().unwrap(),
            "--drug",
            "x",
            "--method",
            "ror",
            "--zero-policy",
            "haldane",
            "--known",
            known.to_str().unwrap(),
        ];
        if let Some(f) = fpr {
            args.extend(["--fpr-max", f]);
        }
        let out_s = out_dir.to_str().unwrap().to_string();
        args.extend(["--out", &out_s]);
        assert_exit(&bin().args(&args).output().unwrap(), 0);
        out_dir.join("auc.json")
    };
    let with = mk(Some("0.02"), "a");
    let without = mk(None, "b");
    let out = run(&[
        "compare",
        with.to_str().unwrap(),
        without.to_str().unwrap(),
        "--out",
        dir.path().join("cmp").to_str().unwrap(),
    ]);
    assert_exit(&out, 2);
}

#[test]
fn thread_cap_does_not_change_results() {
    let fx = synth_fixture();
    let mut base = vec!["signal".to_string(), "--source".into(), "gp".into()];
    base.extend(gp_args(&fx.data));
    base.extend(
        ["--tcrit", "60", "--drug", "D002", "--method", "ror", "--zero-policy", "haldane"]
            .iter()
            .map(|s| s.to_string()),
    );
    let one = fx.dir.path().join("one");
    let many = fx.dir.path().join("many");
    let mut args1 = base.clone();
    args1.extend(["--out".to_string(), one.to_str().unwrap().to_string()]);
    let mut args2 = base;
    args2.extend(["--out".to_string(), many.to_str().unwrap().to_string()]);
    assert_exit(
        &bin().args(&args1).env("ADR_SIGNAL_THREADS", "1").output().unwrap(),
        0,
    );
    assert_exit(
        &bin().args(&args2).env("ADR_SIGNAL_THREADS", "0").output().unwrap(),
        0,
    );
    assert_eq!(outputs_except_manifest(&one), outputs_except_manifest(&many));
}

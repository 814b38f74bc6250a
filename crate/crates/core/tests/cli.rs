//! Subprocess tests of the `acp` binary: exit codes, outputs, and schemas.

mod common;

use std::fs;
use std::path::Path;

use common::acp;
use serde_json::Value;

const TRIANGLE: &[&str] = &[
    "simulate", "--classes", "11", "--sharpness", "8", "--noise", "2", "--confuse", "4:5:8",
    "--confuse", "4:10:8", "--confuse", "5:10:8", "--ambiguous-fraction", "0.2",
];
const WIDE_GRID: &str = "0,0.001,0.01,0.02,0.05,0.1,0.2";

fn ok(dir: &Path, args: &[&str]) -> String {
    let (code, out, err) = acp(dir, args);
    assert_eq!(code, 0, "acp {args:?} failed: {err}");
    out
}

fn simulate(dir: &Path, samples: usize, seed: u64, out: &str) {
    let samples = samples.to_string();
    let seed = seed.to_string();
    let mut args = TRIANGLE.to_vec();
    args.extend(["--samples", &samples, "--seed", &seed, "--out", out]);
    ok(dir, &args);
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"));
    jsonschema::validator_for(&read_json(path)).expect("schema compiles")
}

fn assert_valid(name: &str, instance: &Value) {
    let v = schema(name);
    let errors: Vec<String> = v.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

/// Splits a triangle dataset into tune/cal/test under `dir/parts`.
fn prepared() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 2400, 7, "all.csv");
    ok(dir.path(), &["split", "--in", "all.csv", "--fractions", "0.5,0.25,0.25", "--out-dir", "parts"]);
    dir
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = acp(dir.path(), &["split", "--in", "nope.csv"]);
    assert_eq!(code, 1);
    assert!(err.contains("nope.csv"), "{err}");
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = acp(dir.path(), &["simulate", "--samples", "10", "--out", "no/such/dir/x.csv"]);
    assert_eq!(code, 1);
}

#[test]
fn validation_failures_exit_2() {
    let dir = prepared();
    let d = dir.path();
    for args in [
        &["split", "--in", "all.csv", "--fractions", "0.5,0.4,0"][..],
        &["split", "--in", "all.csv", "--fractions", "abc"],
        &["simulate", "--classes", "1"],
        &["simulate", "--confuse", "4-5"],
        &["simulate", "--confuse", "4:99:1"],
        &["tune", "--in", "parts/tune.csv", "--grid", "0.1,0"],
        &["tune", "--in", "parts/tune.csv", "--temp", "fixed:-1"],
        &["tune", "--in", "parts/tune.csv", "--strata", "1-3"],
        &["tune", "--in", "parts/tune.csv", "--alpha", "1.5"],
        &["calibrate", "--in", "parts/cal.csv", "--method", "magic", "--out", "a.json"],
        &["calibrate", "--in", "parts/cal.csv", "--out", "a.json"],
        &["evaluate", "--test", "parts/test.csv", "--all", "--cal", "parts/cal.csv"],
        &["evaluate", "--test", "parts/test.csv", "--artifact", "a.json", "--method", "lac"],
        &["frobnicate"],
        &["tune"],
    ] {
        let (code, _, err) = acp(d, args);
        assert_eq!(code, 2, "{args:?}: {err}");
        assert!(!err.is_empty());
    }
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["--help"]);
    for cmd in ["split", "tune", "calibrate", "evaluate", "attention", "simulate"] {
        assert!(out.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn malformed_csv_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "label,logit_0,logit_1\n0,1.0,nan\n").unwrap();
    fs::write(dir.path().join("k1.csv"), "label,logit_0\n0,1.0\n").unwrap();
    fs::write(dir.path().join("lab.csv"), "label,logit_0,logit_1\n2,1.0,0.0\n").unwrap();
    for f in ["bad.csv", "k1.csv", "lab.csv"] {
        let (code, _, err) = acp(dir.path(), &["split", "--in", f]);
        assert_eq!(code, 2, "{f}: {err}");
    }
}

#[test]
fn thread_env_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let run = |val: &str| {
        std::process::Command::new(env!("CARGO_BIN_EXE_acp"))
            .args(["simulate", "--samples", "5"])
            .env("ACP_THREADS", val)
            .current_dir(dir.path())
            .output()
            .unwrap()
    };
    assert_eq!(run("2").status.code(), Some(0));
    assert_eq!(run("zero").status.code(), Some(2));
    assert_eq!(run("0").status.code(), Some(2));
}

#[test]
fn split_writes_partitions_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, 101, 1, "all.csv");
    let out = ok(d, &["split", "--in", "all.csv", "--fractions", "0.5,0.5,0", "--seed", "0", "--out-dir", "p"]);
    assert!(out.contains("tune: 50 samples"));
    assert!(d.join("p/tune.csv").exists() && d.join("p/cal.csv").exists());
    assert!(!d.join("p/test.csv").exists());
    let manifest = read_json(d.join("p/manifest.json"));
    assert_valid("split_manifest", &manifest);
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["partitions"][1]["n_samples"], 51);
    assert_eq!(manifest["partitions"][2]["file"], Value::Null);

    let tune = adaptive_conformal::load_logit_csv(d.join("p/tune.csv")).unwrap();
    let cal = adaptive_conformal::load_logit_csv(d.join("p/cal.csv")).unwrap();
    assert_eq!(tune.n_samples() + cal.n_samples(), 101);

    // three non-empty fractions on two rows cannot all be filled
    simulate(d, 2, 1, "tiny.csv");
    let (code, _, _) = acp(d, &["split", "--in", "tiny.csv", "--fractions", "0.4,0.3,0.3"]);
    assert_eq!(code, 2);
}

#[test]
fn tune_honours_grid_and_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, 1000, 1, "tune.csv");
    ok(d, &["tune", "--in", "tune.csv", "--grid", "0,0.001,0.01", "--out", "custom.json"]);
    let custom = read_json(d.join("custom.json"));
    assert_valid("tuning_report", &custom);
    let lambdas: Vec<f64> = custom["records"].as_array().unwrap().iter().map(|r| r["lambda"].as_f64().unwrap()).collect();
    assert_eq!(lambdas, vec![0.0, 0.001, 0.01]);

    let mut chosen = Vec::new();
    for criterion in ["size", "adaptive"] {
        let out = format!("{criterion}.json");
        ok(d, &["tune", "--in", "tune.csv", "--criterion", criterion, "--grid", WIDE_GRID, "--force-top1", "--out", &out]);
        let report = read_json(d.join(&out));
        assert_valid("tuning_report", &report);
        let parsed: adaptive_conformal::TuningReport = serde_json::from_value(report.clone()).unwrap();
        assert_eq!(common::reminimize(&parsed), parsed.chosen_lambda);
        chosen.push(report["chosen_lambda"].as_f64().unwrap());
    }
    assert_ne!(chosen[0], chosen[1], "engineered fixture must separate the criteria");

    let stdout = ok(d, &["tune", "--in", "tune.csv", "--temp", "fit", "--k-reg", "auto"]);
    let report: Value = serde_json::from_str(&stdout).unwrap();
    assert_valid("tuning_report", &report);
    assert_ne!(report["temperature"].as_f64().unwrap(), 1.0);
}

#[test]
fn calibrate_and_evaluate_round_trip() {
    let dir = prepared();
    let d = dir.path();
    ok(d, &["calibrate", "--in", "parts/cal.csv", "--method", "aps", "--out", "aps.json"]);
    let artifact = read_json(d.join("aps.json"));
    assert_valid("calibration_artifact", &artifact);

    let table = ok(d, &["evaluate", "--test", "parts/test.csv", "--artifact", "aps.json", "--out", "m.json", "--sets-out", "sets.jsonl"]);
    assert!(table.contains("aps"));
    let metrics = read_json(d.join("m.json"));
    assert_valid("metrics_report", &metrics);
    let lines = fs::read_to_string(d.join("sets.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 600);
    for line in lines.lines() {
        assert_valid("prediction_set", &serde_json::from_str(line).unwrap());
    }

    // inline calibration reproduces the artifact path
    ok(d, &["evaluate", "--test", "parts/test.csv", "--method", "aps", "--cal", "parts/cal.csv", "--out", "m2.json"]);
    assert_eq!(fs::read(d.join("m.json")).unwrap(), fs::read(d.join("m2.json")).unwrap());

    ok(d, &["evaluate", "--test", "parts/test.csv", "--method", "raps", "--lambda", "0", "--k-reg", "1", "--cal", "parts/cal.csv", "--out", "raps.json"]);
    let raps = read_json(d.join("raps.json"));
    assert_eq!(raps["coverage"], metrics["coverage"]);
    assert_eq!(raps["avg_size"], metrics["avg_size"]);

    ok(d, &["calibrate", "--in", "parts/cal.csv", "--method", "naive", "--out", "naive.json"]);
    let naive = read_json(d.join("naive.json"));
    assert_valid("calibration_artifact", &naive);
    assert_eq!(naive["q_hat"], Value::Null);
    ok(d, &["calibrate", "--in", "parts/cal.csv", "--method", "lac_classcond", "--out", "cc.json"]);
    let cc = read_json(d.join("cc.json"));
    assert_valid("calibration_artifact", &cc);
    assert_eq!(cc["class_q_hat"].as_array().unwrap().len(), 11);
}

#[test]
fn tiny_calibration_gives_infinite_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, 5, 0, "cal.csv");
    ok(d, &["calibrate", "--in", "cal.csv", "--method", "lac", "--out", "a.json"]);
    let a = read_json(d.join("a.json"));
    assert_eq!(a["q_hat"], "inf");
    assert_valid("calibration_artifact", &a);
    simulate(d, 20, 1, "test.csv");
    ok(d, &["evaluate", "--test", "test.csv", "--artifact", "a.json", "--out", "m.json"]);
    let m = read_json(d.join("m.json"));
    assert_eq!(m["avg_size"], 11.0);
    assert_eq!(m["coverage"], 1.0);
}

#[test]
fn evaluate_all_and_ablation_tables() {
    let dir = prepared();
    let d = dir.path();
    let table = ok(d, &["evaluate", "--test", "parts/test.csv", "--all", "--tune", "parts/tune.csv", "--cal", "parts/cal.csv", "--out", "all.json"]);
    let header = table.lines().next().unwrap();
    for col in ["Coverage", "Avg Size", "Singleton", "Empty", "Strat. Min."] {
        assert!(header.contains(col), "{col}");
    }
    assert_eq!(table.lines().count(), 6);
    for name in ["Naive", "LAC", "RAPS (Size)", "RAPS (Temp)", "RAPS (Adaptive)"] {
        assert!(table.contains(name), "{name}");
    }
    let all = read_json(d.join("all.json"));
    assert_valid("comparison", &all);
    assert_eq!(all.as_array().unwrap().len(), 5);
    for row in all.as_array().unwrap() {
        if let Some(t) = row.get("tuning") {
            let parsed: adaptive_conformal::TuningReport = serde_json::from_value(t.clone()).unwrap();
            assert_eq!(common::reminimize(&parsed), parsed.chosen_lambda);
        }
    }

    for axis in ["strata", "grid"] {
        let table = ok(d, &["evaluate", "--test", "parts/test.csv", "--ablate", axis, "--tune", "parts/tune.csv", "--cal", "parts/cal.csv", "--out", "ab.json"]);
        assert_eq!(table.lines().count(), 4, "{table}");
        let ab = read_json(d.join("ab.json"));
        assert_valid("ablation", &ab);
        assert_eq!(ab["axis"], axis);
    }
    assert!(fs::read_to_string(d.join("ab.json")).unwrap().contains("Fine (12 pts)"));
}

fn write_sets(path: &Path, sizes: &[usize]) {
    let sets: Vec<_> = sizes
        .iter()
        .enumerate()
        .map(|(i, &s)| adaptive_conformal::PredictionSet::new(i, (0..s).collect(), Some(0)))
        .collect();
    adaptive_conformal::data::write_prediction_sets(&sets, path).unwrap();
}

/// GCAM bytes assembled by hand, as an independent exporter would write them.
fn gcam_bytes(count: u32, h: u32, w: u32, values: &[f32]) -> Vec<u8> {
    let mut b = b"GCAM".to_vec();
    for d in [count, h, w] {
        b.extend_from_slice(&d.to_le_bytes());
    }
    for v in values {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b
}

#[test]
fn attention_command() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // entropies 3, 2, 1 bits paired with sizes 1, 2, 3
    let mut values = Vec::new();
    for bits in [3u32, 2, 1] {
        let on = 1usize << bits;
        values.extend((0..16).map(|i| if i < on { 1.0f32 } else { 0.0 }));
    }
    fs::write(d.join("maps.gcam"), gcam_bytes(3, 4, 4, &values)).unwrap();
    write_sets(&d.join("sets.jsonl"), &[1, 2, 3]);
    let out = ok(d, &["attention", "--heatmaps", "maps.gcam", "--sets", "sets.jsonl"]);
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_valid("attention_report", &report);
    assert_eq!(report["spearman"]["coefficient"], -1.0);
    assert_eq!(report["mean_entropy_singleton"], 3.0);

    write_sets(&d.join("single.jsonl"), &[1, 1, 1]);
    ok(d, &["attention", "--heatmaps", "maps.gcam", "--sets", "single.jsonl", "--out", "r.json"]);
    let r = read_json(d.join("r.json"));
    assert_valid("attention_report", &r);
    assert_eq!(r["point_biserial"], Value::Null);

    write_sets(&d.join("four.jsonl"), &[1, 2, 3, 2]);
    let (code, _, _) = acp(d, &["attention", "--heatmaps", "maps.gcam", "--sets", "four.jsonl"]);
    assert_eq!(code, 2);
    ok(d, &["attention", "--heatmaps", "maps.gcam", "--sets", "four.jsonl", "--sample-seed", "0"]);

    fs::write(d.join("bad.gcam"), b"XXXX\0\0\0\0").unwrap();
    let (code, _, err) = acp(d, &["attention", "--heatmaps", "bad.gcam", "--sets", "sets.jsonl"]);
    assert_eq!(code, 2);
    assert!(err.contains("GCAM"), "{err}");
}

#[test]
fn simulate_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let csv = ok(d, &["simulate", "--classes", "11", "--samples", "5000", "--confuse", "4:5:0.9", "--seed", "7"]);
    assert!(csv.starts_with("label,logit_0,"));
    assert_eq!(csv.lines().count(), 5001);

    let line = ok(d, &["simulate", "--trials", "200", "--method", "lac", "--out", "t.json"]);
    assert!(line.contains("mean coverage"), "{line}");
    let t = read_json(d.join("t.json"));
    assert_valid("trial_summary", &t);
    let mean = t["mean_coverage"].as_f64().unwrap();
    assert!((0.89..=0.912).contains(&mean), "{mean}");
}

#[test]
fn csv_from_an_external_writer_is_accepted() {
    // shortest round-trip float formatting as produced by other languages
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let text = "label,logit_0,logit_1,logit_2\n0,0.1,-3.25e-05,1e+20\n2,-0.0,2.5,7\n1,1E-300,0.30000000000000004,-1.5\n";
    fs::write(d.join("ext.csv"), text).unwrap();
    let data = adaptive_conformal::load_logit_csv(d.join("ext.csv")).unwrap();
    assert_eq!(data.row(0), &[0.1, -3.25e-05, 1e20]);
    assert_eq!(data.row(2)[1], 0.30000000000000004);
    assert_eq!(data.labels(), &[0, 2, 1]);
    ok(d, &["calibrate", "--in", "ext.csv", "--method", "aps", "--out", "a.json"]);
}

#[test]
fn every_schema_compiles() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        let stem = name.strip_suffix(".schema.json").expect("schema file naming");
        schema(stem);
        n += 1;
    }
    assert_eq!(n, 10);
}

#[test]
fn export_manifest_schema() {
    let good: Value = serde_json::json!({
        "dataset": "organamnist", "seed": 0, "epochs_run": 37,
        "accuracy": {"train": 0.99, "val": 0.95, "test": 0.932},
        "macro_f1": 0.91, "gradcam_target": "top1", "sample_seed": 0,
        "dropout": 0.3, "label_smoothing": 0.1
    });
    assert_valid("export_manifest", &good);
    let bad = serde_json::json!({"dataset": "cifar10", "seed": 0, "epochs_run": 1, "accuracy": 0.5, "macro_f1": 0.5});
    assert!(!schema("export_manifest").is_valid(&bad));
}

//! Load a logit CSV, split it, calibrate APS, and write prediction sets.

use adaptive_conformal::conformal::{calibrate, predict_all, CalibrationArtifact, Method, MethodParams};
use adaptive_conformal::data::{
    load_logit_csv, read_prediction_sets, split_dataset, write_logit_csv, write_prediction_sets,
    SplitSpec,
};
use adaptive_conformal::strata::StrataSpec;
use adaptive_conformal::synthetic::{generate, GeneratorConfig};

pub fn run_example() {
    let dir = tempfile::tempdir().expect("temp dir");
    let csv = dir.path().join("logits.csv");
    let data = generate(&GeneratorConfig { n_samples: 2000, seed: 3, ..Default::default() }).unwrap();
    write_logit_csv(&data, &csv).unwrap();

    let data = load_logit_csv(&csv).unwrap();
    let spec = SplitSpec::parse("0.5,0.25,0.25", 0).unwrap();
    let (tune, cal, test) = split_dataset(&data, &spec).unwrap();
    println!(
        "{} rows, K = {}: tune {}, cal {}, test {}",
        data.n_samples(),
        data.n_classes(),
        tune.n_samples(),
        cal.n_samples(),
        test.n_samples()
    );

    let params = MethodParams::new(Method::Aps, 0.1);
    let artifact = calibrate(&cal, &params, &StrataSpec::default()).unwrap();
    let artifact_path = dir.path().join("aps.json");
    artifact.save(&artifact_path).unwrap();
    let artifact = CalibrationArtifact::load(&artifact_path).unwrap();
    println!("q_hat = {:?}", artifact.q_hat);

    let sets = predict_all(&test, &artifact).unwrap();
    let sets_path = dir.path().join("sets.jsonl");
    write_prediction_sets(&sets, &sets_path).unwrap();
    let back = read_prediction_sets(&sets_path).unwrap();
    assert_eq!(back, sets);

    let coverage = sets.iter().filter(|s| s.covered).count() as f64 / sets.len() as f64;
    let size = sets.iter().map(|s| s.size).sum::<usize>() as f64 / sets.len() as f64;
    println!("coverage {coverage:.4}, mean size {size:.3}");
    println!("first set: {}", serde_json::to_string(&sets[0]).unwrap());
}

fn main() {
    run_example();
}

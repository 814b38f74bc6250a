//! Entropy of saliency maps against prediction-set size, via the GCAM file format.

use adaptive_conformal::attention::{attention_report, spatial_entropy, HeatmapBatch};
use adaptive_conformal::data::PredictionSet;

/// Gaussian blob whose width grows with `spread`.
fn blob(h: usize, w: usize, spread: f64) -> Vec<f32> {
    let (cy, cx) = (h as f64 / 2.0, w as f64 / 2.0);
    let mut v = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
            v.push((-d2 / (2.0 * spread * spread)).exp() as f32);
        }
    }
    v
}

pub fn run_example() {
    let (h, w) = (32, 32);
    let mut values = Vec::new();
    let mut sets = Vec::new();
    for i in 0..60 {
        let size = 1 + i % 4;
        let spread = 2.0 + size as f64 + 0.3 * (i % 5) as f64;
        values.extend(blob(h, w, spread));
        sets.push(PredictionSet::new(i, (0..size).collect(), Some(0)));
    }
    let batch = HeatmapBatch::new(sets.len(), h, w, values).unwrap();

    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("maps.gcam");
    batch.save(&path).unwrap();
    let batch = HeatmapBatch::load(&path).unwrap();

    println!("entropy of map 0: {:.4} bits", spatial_entropy(batch.map(0)).unwrap());
    let report = attention_report(&batch, &sets).unwrap();
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}

fn main() {
    run_example();
}

//! Fit a scalar temperature to overconfident logits.

use adaptive_conformal::data::LogitDataset;
use adaptive_conformal::scoring::{fit_temperature, mean_nll};
use adaptive_conformal::synthetic::{generate, GeneratorConfig};

pub fn run_example() {
    let base = generate(&GeneratorConfig {
        n_samples: 3000,
        sharpness: 2.0,
        noise_sd: 1.0,
        seed: 9,
        ..Default::default()
    })
    .unwrap();
    let inflated = LogitDataset::new(
        base.n_classes(),
        base.logits().iter().map(|z| 3.0 * z).collect(),
        base.labels().to_vec(),
    )
    .unwrap();

    for (name, data) in [("original", &base), ("logits x3", &inflated)] {
        let t = fit_temperature(data);
        println!(
            "{name:>10}: T* = {t:.4}, NLL {:.4} at T = 1 -> {:.4} at T*",
            mean_nll(data, 1.0),
            mean_nll(data, t)
        );
    }
}

fn main() {
    run_example();
}

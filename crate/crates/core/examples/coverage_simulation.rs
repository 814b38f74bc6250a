//! Monte Carlo check of split-conformal marginal coverage.

use adaptive_conformal::conformal::{Method, MethodParams};
use adaptive_conformal::synthetic::{coverage_trial, GeneratorConfig};

pub fn run_example() {
    let config = GeneratorConfig { seed: 2024, ..Default::default() };
    let (n_cal, n_test) = (500, 500);
    let upper = 0.9 + 1.0 / (n_cal as f64 + 1.0);
    println!("target band [0.9, {upper:.4}]");
    for params in [
        MethodParams::new(Method::Lac, 0.1),
        MethodParams::new(Method::Aps, 0.1),
        MethodParams::raps(0.1, 0.001, 1),
    ] {
        let s = coverage_trial(&config, &params, n_cal, n_test, 50).unwrap();
        println!(
            "{:<5} mean coverage {:.4} ± {:.4}, mean size {:.3}",
            params.method.as_str(),
            s.mean_coverage,
            s.sd_coverage,
            s.mean_size
        );
    }
}

fn main() {
    run_example();
}

//! Choose λ for RAPS with the size criterion and with the stratified minimax criterion.

use adaptive_conformal::conformal::MethodParams;
use adaptive_conformal::strata::StrataSpec;
use adaptive_conformal::synthetic::{generate, GeneratorConfig};
use adaptive_conformal::tuning::{tune_lambda_adaptive, tune_lambda_size, LambdaGrid, TuningReport};

fn show(report: &TuningReport) {
    println!("criterion {}: chose λ = {}", report.criterion, report.chosen_lambda);
    println!("{:>8} {:>9} {:>9} {:>6} {:>10}", "lambda", "coverage", "avg size", "multi", "max |gap|");
    for r in &report.records {
        println!(
            "{:>8} {:>9.4} {:>9.3} {:>6} {:>10.4}",
            r.lambda, r.coverage, r.avg_size, r.multi_label, r.max_violation
        );
    }
}

pub fn run_example() {
    let tune = generate(&GeneratorConfig::confusion_triangle(1000, 2)).unwrap();
    let grid = LambdaGrid::parse("0,0.001,0.01,0.02,0.05,0.1,0.2").unwrap();
    let params = MethodParams {
        force_top1: true,
        ..MethodParams::raps(0.1, 0.0, 1)
    };

    let size = tune_lambda_size(&tune, &grid, 1, &params, 0).unwrap();
    show(&size);
    let adaptive = tune_lambda_adaptive(&tune, &grid, 1, &params, &StrataSpec::default(), 1, 0).unwrap();
    show(&adaptive);
}

fn main() {
    run_example();
}

//! Naive, LAC, and three RAPS tunings side by side.

use adaptive_conformal::metrics::{compare_methods, comparison_table, CompareConfig};
use adaptive_conformal::synthetic::{generate, GeneratorConfig};
use adaptive_conformal::tuning::LambdaGrid;

pub fn run_example() {
    let data = generate(&GeneratorConfig::confusion_triangle(4000, 1)).unwrap();
    let (tune, cal, test) = (data.slice(0..1000), data.slice(1000..2000), data.slice(2000..4000));
    let config = CompareConfig {
        grid: LambdaGrid::parse("0,0.001,0.01,0.02,0.05,0.1,0.2").unwrap(),
        force_top1: true,
        ..Default::default()
    };
    let rows = compare_methods(&tune, &cal, &test, &config).unwrap();
    let reports: Vec<_> = rows.iter().map(|r| &r.report).collect();
    print!("{}", comparison_table(&reports));
    for r in &rows {
        println!(
            "{:<16} λ = {:<6} k_reg = {} T = {:.3} multi-label sets = {}",
            r.report.method,
            r.params.lambda,
            r.params.k_reg,
            r.params.temperature,
            r.report.multi_label()
        );
    }
}

fn main() {
    run_example();
}

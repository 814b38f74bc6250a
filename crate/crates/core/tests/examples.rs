//! Every runnable example, executed as a test.

#[allow(dead_code)]
#[path = "../examples/split_and_calibrate.rs"]
mod split_and_calibrate;

#[test]
fn split_and_calibrate_runs() {
    split_and_calibrate::run_example();
}

#[allow(dead_code)]
#[path = "../examples/score_functions.rs"]
mod score_functions;

#[test]
fn score_functions_runs() {
    score_functions::run_example();
}

#[allow(dead_code)]
#[path = "../examples/temperature_scaling.rs"]
mod temperature_scaling;

#[test]
fn temperature_scaling_runs() {
    temperature_scaling::run_example();
}

#[allow(dead_code)]
#[path = "../examples/adaptive_lambda.rs"]
mod adaptive_lambda;

#[test]
fn adaptive_lambda_runs() {
    adaptive_lambda::run_example();
}

#[allow(dead_code)]
#[path = "../examples/compare_methods.rs"]
mod compare_methods;

#[test]
fn compare_methods_runs() {
    compare_methods::run_example();
}

#[allow(dead_code)]
#[path = "../examples/ablation.rs"]
mod ablation;

#[test]
fn ablation_runs() {
    ablation::run_example();
}

#[allow(dead_code)]
#[path = "../examples/attention_stats.rs"]
mod attention_stats;

#[test]
fn attention_stats_runs() {
    attention_stats::run_example();
}

#[allow(dead_code)]
#[path = "../examples/coverage_simulation.rs"]
mod coverage_simulation;

#[test]
fn coverage_simulation_runs() {
    coverage_simulation::run_example();
}

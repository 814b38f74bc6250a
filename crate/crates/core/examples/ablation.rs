//! RAPS (Adaptive) under different strata granularities and λ grids.

use adaptive_conformal::metrics::{ablate, ablation_table, AblationVariants, CompareConfig};
use adaptive_conformal::synthetic::{generate, GeneratorConfig};

pub fn run_example() {
    let data = generate(&GeneratorConfig::confusion_triangle(3000, 2)).unwrap();
    let (tune, cal, test) = (data.slice(0..1000), data.slice(1000..2000), data.slice(2000..3000));
    let base = CompareConfig { force_top1: true, ..Default::default() };
    for variants in [AblationVariants::strata_presets(), AblationVariants::grid_presets()] {
        let rows = ablate(&tune, &cal, &test, &base, &variants).unwrap();
        print!("{}", ablation_table(&rows));
    }
}

fn main() {
    run_example();
}

//! Softmax, rank bookkeeping, and the APS, RAPS, and LAC scores.

use adaptive_conformal::conformal::{conformal_quantile, conformal_rank};
use adaptive_conformal::scoring::{rank_sample, score_aps, score_lac, score_raps, softmax};

pub fn run_example() {
    let probs = softmax(&[2.0, 1.3068528194400546, 0.2082405307719452], 1.0);
    println!("probabilities: {:?}", probs.as_slice());

    for label in 0..probs.len() {
        let s = rank_sample(&probs, label);
        println!(
            "label {label}: rank {}, APS {:.4}, RAPS(λ=0.1, k=1) {:.4}, LAC {:.4}",
            s.label_rank,
            score_aps(&s),
            score_raps(&s, 0.1, 1),
            score_lac(&probs, label)
        );
    }

    let scores: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
    println!(
        "n = 20, α = 0.1: q_hat is order statistic {} = {}",
        conformal_rank(scores.len(), 0.1),
        conformal_quantile(&scores, 0.1).unwrap()
    );
    println!(
        "n = 5, α = 0.1: q_hat = {} (every class is included)",
        conformal_quantile(&scores[..5], 0.1).unwrap()
    );
}

fn main() {
    run_example();
}

//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use adaptive_conformal::data::LogitDataset;
use adaptive_conformal::rng;
use adaptive_conformal::tuning::{Criterion, TuningReport};
use rand::Rng;

/// Descending order of `p` by explicit comparison sort, ties by ascending index.
pub fn brute_order(p: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    for i in 0..idx.len() {
        for j in (i + 1)..idx.len() {
            let (a, b) = (idx[i], idx[j]);
            if p[b] > p[a] || (p[b] == p[a] && b < a) {
                idx.swap(i, j);
            }
        }
    }
    idx
}

/// Cumulative sorted mass through the label, plus `lambda * max(0, rank - k_reg)`.
pub fn brute_raps(p: &[f64], label: usize, lambda: f64, k_reg: usize) -> f64 {
    let order = brute_order(p);
    let mut cum = 0.0;
    for (pos, &c) in order.iter().enumerate() {
        cum += p[c];
        if c == label {
            let rank = pos + 1;
            let extra = if rank > k_reg { (rank - k_reg) as f64 } else { 0.0 };
            return cum + lambda * extra;
        }
    }
    unreachable!("label is a class index")
}

pub fn brute_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Random logit dataset with varied scale and occasional exact ties.
pub fn random_dataset(n: usize, k: usize, seed: u64) -> LogitDataset {
    let mut r = rng::seeded(seed);
    let mut logits = Vec::with_capacity(n * k);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let scale = r.random_range(0.1..6.0);
        let tie = r.random_range(0..10) == 0;
        for c in 0..k {
            let v: f64 = r.random_range(-1.0..1.0) * scale;
            logits.push(if tie && c % 2 == 1 { 0.25 } else { v });
        }
        labels.push(r.random_range(0..k));
    }
    LogitDataset::new(k, logits, labels).unwrap()
}

/// Adaptive Simpson quadrature.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, eps: f64, depth: u32) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, eps, depth)
}

/// Integral over [a, b] split into `pieces` panels, each refined adaptively
/// to a tolerance relative to its own crude estimate.
fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: usize) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let crude = (hi - lo) * (f(lo) + 4.0 * f(0.5 * (lo + hi)) + f(hi)).abs() / 6.0;
            simpson(&f, lo, hi, (crude * 1e-12).max(f64::MIN_POSITIVE), 50)
        })
        .sum()
}

/// Two-sided Student-t tail by numerical integration of the unnormalised
/// density `(1 + s^2/df)^(-(df+1)/2)`; the upper tail uses `s = t/u`.
pub fn t_tail_oracle(t: f64, df: f64) -> f64 {
    let t = t.abs();
    // log-density keeps far tails representable
    let g = move |s: f64| (-(df + 1.0) / 2.0 * (s * s / df).ln_1p()).exp();
    let tail_from = |x: f64| {
        integrate(
            |u: f64| if u <= 0.0 { 0.0 } else { g(x / u) * x / (u * u) },
            0.0,
            1.0,
            64,
        )
    };
    let half_mass = integrate(g, 0.0, 1.0, 64) + tail_from(1.0);
    if t == 0.0 {
        return 1.0;
    }
    tail_from(t) / half_mass
}

/// Smallest λ attaining the minimum of the recorded objective, by exhaustive scan.
pub fn reminimize(report: &TuningReport) -> f64 {
    let obj = |i: usize| report.records[i].objective(report.criterion);
    let best = (0..report.records.len())
        .map(obj)
        .fold(f64::INFINITY, f64::min);
    let candidates: Vec<f64> = (0..report.records.len())
        .filter(|&i| obj(i) == best)
        .map(|i| report.records[i].lambda)
        .collect();
    candidates.into_iter().fold(f64::INFINITY, f64::min)
}

pub fn criterion_name(c: Criterion) -> &'static str {
    match c {
        Criterion::Size => "size",
        Criterion::Adaptive => "adaptive",
    }
}

/// Run the `acp` binary in `dir`; returns (exit code, stdout, stderr).
pub fn acp(dir: &std::path::Path, args: &[&str]) -> (i32, String, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_acp"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn acp");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

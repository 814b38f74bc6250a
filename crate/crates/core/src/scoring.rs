//! Probability transforms and nonconformity scores.

use std::cmp::Ordering;

use crate::data::LogitDataset;

/// Softmax output: non-negative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Index of the largest probability, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Temperature-scaled softmax, shifted by the maximum for stability.
pub fn softmax(logits: &[f64], temperature: f64) -> ProbabilityVector {
    debug_assert!(temperature > 0.0);
    let m = logits
        .iter()
        .map(|&z| z / temperature)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z / temperature - m).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    ProbabilityVector(out)
}

/// Probabilities sorted in descending order, with the true label's rank.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSample {
    pub sorted_probs: Vec<f64>,
    pub sort_order: Vec<usize>,
    /// 1-based rank of the true label.
    pub label_rank: usize,
}

/// Class indices in descending probability order; equal probabilities keep
/// ascending class order.
pub fn descending_order(probs: &ProbabilityVector) -> Vec<usize> {
    let p = probs.as_slice();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[b].partial_cmp(&p[a]).unwrap_or(Ordering::Equal));
    order
}

pub fn rank_sample(probs: &ProbabilityVector, label: usize) -> ScoredSample {
    let sort_order = descending_order(probs);
    let sorted_probs = sort_order.iter().map(|&c| probs[c]).collect();
    let label_rank = sort_order
        .iter()
        .position(|&c| c == label)
        .expect("label must be a valid class index")
        + 1;
    ScoredSample {
        sorted_probs,
        sort_order,
        label_rank,
    }
}

/// Cumulative sorted mass through the label's rank.
pub fn score_aps(sample: &ScoredSample) -> f64 {
    sample.sorted_probs[..sample.label_rank].iter().sum()
}

/// Penalty added to the cumulative mass at 1-based rank `rank`.
pub fn rank_penalty(rank: usize, lambda: f64, k_reg: usize) -> f64 {
    lambda * rank.saturating_sub(k_reg) as f64
}

/// APS score plus `lambda * max(0, rank - k_reg)`.
pub fn score_raps(sample: &ScoredSample, lambda: f64, k_reg: usize) -> f64 {
    score_aps(sample) + rank_penalty(sample.label_rank, lambda, k_reg)
}

/// Least-ambiguous score `1 - p_y`.
pub fn score_lac(probs: &ProbabilityVector, label: usize) -> f64 {
    1.0 - probs[label]
}

/// Mean negative log-likelihood of the labels under `softmax(logits / T)`.
pub fn mean_nll(data: &LogitDataset, temperature: f64) -> f64 {
    let mut total = 0.0;
    for (row, &y) in data.rows().zip(data.labels()) {
        let m = row
            .iter()
            .map(|&z| z / temperature)
            .fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|&z| (z / temperature - m).exp()).sum::<f64>().ln();
        total += lse - row[y] / temperature;
    }
    total / data.n_samples() as f64
}

const T_MIN: f64 = 0.05;
const T_MAX: f64 = 20.0;
const T_TOL: f64 = 1e-4;
const FLAT_TOL: f64 = 1e-12;

/// Fit a scalar temperature by golden-section search on `[0.05, 20]`.
///
/// Returns 1.0 when the objective is flat over the bracket, and never returns
/// a temperature whose NLL is worse than at T = 1.
pub fn fit_temperature(cal: &LogitDataset) -> f64 {
    let f = |t: f64| mean_nll(cal, t);

    let probes: Vec<f64> = (0..=8)
        .map(|i| T_MIN * (T_MAX / T_MIN).powf(i as f64 / 8.0))
        .map(f)
        .collect();
    let lo = probes.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = probes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= FLAT_TOL {
        return 1.0;
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (T_MIN, T_MAX);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a >= T_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    if f(t) <= f(1.0) {
        t
    } else {
        1.0
    }
}

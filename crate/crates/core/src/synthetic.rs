//! Seeded Gaussian-logit datasets with controllable class confusion.
//!
//! Each row is drawn independently: a label `y` uniform over the classes, a
//! mean logit vector `sharpness * e_y`, optionally `strength * e_partner`
//! added for a confusable partner of `y`, and Gaussian noise on every
//! coordinate. Rows are i.i.d., hence exchangeable.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{calibrate, predict_all, MethodParams};
use crate::data::LogitDataset;
use crate::error::{Error, Result};
use crate::rng::{self, bounded, unit_f64};
use crate::strata::StrataSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionPair {
    pub a: usize,
    pub b: usize,
    pub strength: f64,
}

impl std::str::FromStr for ConfusionPair {
    type Err = Error;

    /// `a:b:strength`
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("confusion pair `{s}` is not `a:b:strength`"));
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, strength] = parts.as_slice() else {
            return Err(bad());
        };
        Ok(Self {
            a: a.parse().map_err(|_| bad())?,
            b: b.parse().map_err(|_| bad())?,
            strength: strength.parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_classes: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub sharpness: f64,
    pub confusion_pairs: Vec<ConfusionPair>,
    pub noise_sd: f64,
    pub ambiguous_fraction: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_classes: 11,
            n_samples: 1000,
            seed: 0,
            sharpness: 4.0,
            confusion_pairs: Vec::new(),
            noise_sd: 1.0,
            ambiguous_fraction: 0.0,
        }
    }
}

impl GeneratorConfig {
    /// Eleven classes with classes 4, 5, and 10 pairwise confusable at full
    /// strength on a fifth of their rows. Sharp, noisy logits make RAPS sets
    /// shrink quickly as λ grows.
    pub fn confusion_triangle(n_samples: usize, seed: u64) -> Self {
        let pair = |a, b| ConfusionPair { a, b, strength: 8.0 };
        Self {
            n_classes: 11,
            n_samples,
            seed,
            sharpness: 8.0,
            confusion_pairs: vec![pair(4, 5), pair(4, 10), pair(5, 10)],
            noise_sd: 2.0,
            ambiguous_fraction: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::config(format!(
                "at least 2 classes are required, got {}",
                self.n_classes
            )));
        }
        if !(self.sharpness > 0.0 && self.sharpness.is_finite()) {
            return Err(Error::config("sharpness must be a finite value > 0"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::config("noise_sd must be a finite value >= 0"));
        }
        if !(0.0..=1.0).contains(&self.ambiguous_fraction) {
            return Err(Error::config("ambiguous_fraction must lie in [0, 1]"));
        }
        for p in &self.confusion_pairs {
            if p.a >= self.n_classes || p.b >= self.n_classes || p.a == p.b {
                return Err(Error::config(format!(
                    "confusion pair {}:{} must name two distinct classes below {}",
                    p.a, p.b, self.n_classes
                )));
            }
            if !(p.strength >= 0.0 && p.strength.is_finite()) {
                return Err(Error::config("confusion strength must be a finite value >= 0"));
            }
        }
        Ok(())
    }
}

/// Draw `config.n_samples` rows. Per row the generator consumes, in order:
/// one bounded draw for the label, one uniform for the ambiguity coin, one
/// bounded draw for the partner (only if the coin lands and `y` has partners),
/// then `n_classes` standard normals.
pub fn generate(config: &GeneratorConfig) -> Result<LogitDataset> {
    config.validate()?;
    let k = config.n_classes;
    let mut rng = rng::seeded(config.seed);
    let partners: Vec<Vec<(usize, f64)>> = (0..k)
        .map(|c| {
            config
                .confusion_pairs
                .iter()
                .filter_map(|p| {
                    if p.a == c {
                        Some((p.b, p.strength))
                    } else if p.b == c {
                        Some((p.a, p.strength))
                    } else {
                        None
                    }
                })
                .collect()
        })
        .collect();

    let mut logits = Vec::with_capacity(config.n_samples * k);
    let mut labels = Vec::with_capacity(config.n_samples);
    let mut mu = vec![0.0; k];
    for _ in 0..config.n_samples {
        let y = bounded(&mut rng, k as u64) as usize;
        mu.iter_mut().for_each(|m| *m = 0.0);
        mu[y] = config.sharpness;
        let coin = unit_f64(&mut rng);
        if coin < config.ambiguous_fraction && !partners[y].is_empty() {
            let (partner, strength) = partners[y][bounded(&mut rng, partners[y].len() as u64) as usize];
            mu[partner] += strength;
        }
        for &m in &mu {
            let z: f64 = StandardNormal.sample(&mut rng);
            logits.push(m + config.noise_sd * z);
        }
        labels.push(y);
    }
    LogitDataset::new(k, logits, labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub n_trials: usize,
    pub n_cal: usize,
    pub n_test: usize,
    pub mean_coverage: f64,
    pub sd_coverage: f64,
    pub min_coverage: f64,
    pub max_coverage: f64,
    pub mean_size: f64,
    pub coverages: Vec<f64>,
    pub sizes: Vec<f64>,
}

/// Seed of trial `index` under base seed `seed`.
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    rng::derive_seed(seed, index as u64)
}

/// Repeated split-conformal experiments with fresh calibration and test draws.
pub fn coverage_trial(
    config: &GeneratorConfig,
    params: &MethodParams,
    n_cal: usize,
    n_test: usize,
    n_trials: usize,
) -> Result<TrialSummary> {
    if n_cal == 0 || n_test == 0 || n_trials == 0 {
        return Err(Error::config("n_cal, n_test, and n_trials must all be >= 1"));
    }
    params.validate()?;
    let strata = StrataSpec::default();
    let per_trial: Vec<(f64, f64)> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let cfg = GeneratorConfig {
                n_samples: n_cal + n_test,
                seed: trial_seed(config.seed, t),
                ..config.clone()
            };
            let data = generate(&cfg)?;
            let cal = data.slice(0..n_cal);
            let test = data.slice(n_cal..n_cal + n_test);
            let artifact = calibrate(&cal, params, &strata)?;
            let sets = predict_all(&test, &artifact)?;
            let cov = sets.iter().filter(|s| s.covered).count() as f64 / n_test as f64;
            let size = sets.iter().map(|s| s.size as f64).sum::<f64>() / n_test as f64;
            Ok((cov, size))
        })
        .collect::<Result<_>>()?;

    let (coverages, sizes): (Vec<f64>, Vec<f64>) = per_trial.into_iter().unzip();
    let n = n_trials as f64;
    let mean = coverages.iter().sum::<f64>() / n;
    let var = coverages.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
    Ok(TrialSummary {
        n_trials,
        n_cal,
        n_test,
        mean_coverage: mean,
        sd_coverage: var.sqrt(),
        min_coverage: coverages.iter().cloned().fold(f64::INFINITY, f64::min),
        max_coverage: coverages.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        mean_size: sizes.iter().sum::<f64>() / n,
        coverages,
        sizes,
    })
}

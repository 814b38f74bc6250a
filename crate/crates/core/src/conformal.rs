//! Split-conformal calibration and prediction-set construction.
//!
//! A method's calibration scores on held-out data fix a threshold `q_hat`
//! (the ⌈(n+1)(1−α)⌉-th smallest score); at prediction time every class whose
//! hypothetical score is at most `q_hat` enters the set.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{LogitDataset, PredictionSet};
use crate::error::{Error, Result};
use crate::scoring::{self, descending_order, rank_penalty, softmax};
use crate::strata::StrataSpec;
use crate::util::{self, inf_f64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Threshold the softmax at `1 - alpha`; no calibration.
    Naive,
    /// Least-ambiguous score `1 - p_y` with one marginal quantile.
    Lac,
    /// Least-ambiguous score with one quantile per class.
    #[serde(rename = "lac_classcond")]
    LacClassCond,
    /// Cumulative sorted mass.
    Aps,
    /// Cumulative sorted mass plus a rank penalty.
    Raps,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Naive,
        Method::Lac,
        Method::LacClassCond,
        Method::Aps,
        Method::Raps,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::Lac => "lac",
            Method::LacClassCond => "lac_classcond",
            Method::Aps => "aps",
            Method::Raps => "raps",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown method `{s}`")))
    }
}

/// Everything needed to calibrate one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodParams {
    pub method: Method,
    pub alpha: f64,
    pub lambda: f64,
    pub k_reg: usize,
    pub temperature: f64,
    /// Add the argmax class to any set that would otherwise be empty.
    #[serde(default)]
    pub force_top1: bool,
}

impl MethodParams {
    pub fn new(method: Method, alpha: f64) -> Self {
        Self {
            method,
            alpha,
            lambda: 0.0,
            k_reg: 1,
            temperature: 1.0,
            force_top1: false,
        }
    }

    pub fn raps(alpha: f64, lambda: f64, k_reg: usize) -> Self {
        Self {
            lambda,
            k_reg,
            ..Self::new(Method::Raps, alpha)
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("alpha {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("lambda {} must be a finite value >= 0", self.lambda)));
        }
        if self.k_reg < 1 {
            return Err(Error::config("k_reg must be at least 1"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::config(format!(
                "temperature {} must be a finite value > 0",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Frozen parameters that fully determine prediction behaviour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationArtifact {
    pub method: Method,
    pub alpha: f64,
    /// `None` for naive and class-conditional LAC.
    #[serde(with = "inf_f64::option")]
    pub q_hat: Option<f64>,
    pub lambda: f64,
    pub k_reg: usize,
    pub temperature: f64,
    pub n_cal: usize,
    pub strata: StrataSpec,
    pub n_classes: usize,
    /// Per-class thresholds for class-conditional LAC.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "class_thresholds")]
    pub class_q_hat: Option<Vec<f64>>,
    #[serde(default)]
    pub force_top1: bool,
}

mod class_thresholds {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Q(#[serde(with = "crate::util::inf_f64")] f64);

    pub fn serialize<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref()
            .map(|qs| qs.iter().map(|&q| Q(q)).collect::<Vec<_>>())
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
        Ok(Option::<Vec<Q>>::deserialize(d)?.map(|qs| qs.into_iter().map(|q| q.0).collect()))
    }
}

impl CalibrationArtifact {
    pub fn params(&self) -> MethodParams {
        MethodParams {
            method: self.method,
            alpha: self.alpha,
            lambda: self.lambda,
            k_reg: self.k_reg,
            temperature: self.temperature,
            force_top1: self.force_top1,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let a: Self = serde_json::from_str(text)?;
        a.params().validate()?;
        let thresholds_ok = match a.method {
            Method::Naive => true,
            Method::LacClassCond => a.class_q_hat.as_ref().is_some_and(|q| q.len() == a.n_classes),
            _ => a.q_hat.is_some(),
        };
        if !thresholds_ok {
            return Err(Error::Format(format!(
                "artifact for method {} is missing its thresholds",
                a.method
            )));
        }
        Ok(a)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = self.to_json()?;
        util::write_atomic(path.as_ref(), |w| {
            w.write_all(text.as_bytes())?;
            w.write_all(b"\n")
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&util::read_to_string(path.as_ref())?)
    }
}

/// 1-based order statistic used by split conformal: ⌈(n+1)(1−α)⌉.
///
/// A 1e-9 guard absorbs the representation error of α so that, e.g.,
/// `(9+1)(1-0.1)` is treated as exactly 9.
pub fn conformal_rank(n: usize, alpha: f64) -> usize {
    let raw = (n as f64 + 1.0) * (1.0 - alpha);
    ((raw - 1e-9).ceil() as usize).max(1)
}

/// The ⌈(n+1)(1−α)⌉-th smallest score, or `+inf` when that rank exceeds `n`.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Calibration("no calibration scores".into()));
    }
    let rank = conformal_rank(scores.len(), alpha);
    if rank > scores.len() {
        return Ok(f64::INFINITY);
    }
    let mut s = scores.to_vec();
    let (_, q, _) = s.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*q)
}

/// Per-sample calibration scores for `params.method` (empty for naive).
pub fn calibration_scores(cal: &LogitDataset, params: &MethodParams) -> Vec<f64> {
    let lambda = effective_lambda(params.method, params.lambda);
    cal.rows()
        .zip(cal.labels())
        .filter_map(|(row, &y)| {
            let p = softmax(row, params.temperature);
            match params.method {
                Method::Naive => None,
                Method::Lac | Method::LacClassCond => Some(scoring::score_lac(&p, y)),
                Method::Aps => Some(scoring::score_aps(&scoring::rank_sample(&p, y))),
                Method::Raps => Some(scoring::score_raps(
                    &scoring::rank_sample(&p, y),
                    lambda,
                    params.k_reg,
                )),
            }
        })
        .collect()
}

fn effective_lambda(method: Method, lambda: f64) -> f64 {
    if method == Method::Raps {
        lambda
    } else {
        0.0
    }
}

/// Calibrate `params.method` on `cal` and freeze the result.
pub fn calibrate(
    cal: &LogitDataset,
    params: &MethodParams,
    strata: &StrataSpec,
) -> Result<CalibrationArtifact> {
    params.validate()?;
    if cal.is_empty() {
        return Err(Error::Calibration("calibration set is empty".into()));
    }
    if !strata.covers(cal.n_classes()) {
        return Err(Error::config(format!(
            "strata {strata} do not reach set size {}",
            cal.n_classes()
        )));
    }
    let scores = calibration_scores(cal, params);
    let (q_hat, class_q_hat) = match params.method {
        Method::Naive => (None, None),
        Method::LacClassCond => {
            let k = cal.n_classes();
            let mut by_class = vec![Vec::new(); k];
            for (&s, &y) in scores.iter().zip(cal.labels()) {
                by_class[y].push(s);
            }
            let mut qs = Vec::with_capacity(k);
            for (c, class_scores) in by_class.iter().enumerate() {
                if class_scores.is_empty() {
                    return Err(Error::Calibration(format!(
                        "class {c} has no calibration samples"
                    )));
                }
                qs.push(conformal_quantile(class_scores, params.alpha)?);
            }
            (None, Some(qs))
        }
        _ => (Some(conformal_quantile(&scores, params.alpha)?), None),
    };
    Ok(CalibrationArtifact {
        method: params.method,
        alpha: params.alpha,
        q_hat,
        lambda: params.lambda,
        k_reg: params.k_reg,
        temperature: params.temperature,
        n_cal: cal.n_samples(),
        strata: strata.clone(),
        n_classes: cal.n_classes(),
        class_q_hat,
        force_top1: params.force_top1,
    })
}

/// Class indices (unsorted) selected for one logit vector.
fn select_classes(logits: &[f64], a: &CalibrationArtifact) -> Vec<usize> {
    let p = softmax(logits, a.temperature);
    let k = p.len();
    let mut chosen: Vec<usize> = match a.method {
        Method::Naive => (0..k).filter(|&c| p[c] >= 1.0 - a.alpha).collect(),
        Method::Lac => {
            let q = a.q_hat.unwrap_or(f64::INFINITY);
            (0..k).filter(|&c| 1.0 - p[c] <= q).collect()
        }
        Method::LacClassCond => {
            let qs = a.class_q_hat.as_deref().unwrap_or(&[]);
            (0..k)
                .filter(|&c| qs.get(c).is_none_or(|&q| 1.0 - p[c] <= q))
                .collect()
        }
        Method::Aps | Method::Raps => {
            let q = a.q_hat.unwrap_or(f64::INFINITY);
            let lambda = effective_lambda(a.method, a.lambda);
            let order = descending_order(&p);
            let mut cum = 0.0;
            let mut out = Vec::new();
            for (j, &c) in order.iter().enumerate() {
                cum += p[c];
                if cum + rank_penalty(j + 1, lambda, a.k_reg) > q {
                    break;
                }
                out.push(c);
            }
            out
        }
    };
    if chosen.is_empty() && a.force_top1 {
        chosen.push(p.argmax());
    }
    chosen
}

/// Prediction set for a single unlabeled logit vector (`sample_index` 0).
pub fn predict_set(logits: &[f64], artifact: &CalibrationArtifact) -> Result<PredictionSet> {
    if logits.len() != artifact.n_classes {
        return Err(Error::Dimension {
            expected: artifact.n_classes,
            actual: logits.len(),
        });
    }
    Ok(PredictionSet::new(0, select_classes(logits, artifact), None))
}

/// Prediction sets for every row, in row order, with coverage filled in.
pub fn predict_all(data: &LogitDataset, artifact: &CalibrationArtifact) -> Result<Vec<PredictionSet>> {
    if data.n_classes() != artifact.n_classes {
        return Err(Error::Dimension {
            expected: artifact.n_classes,
            actual: data.n_classes(),
        });
    }
    Ok(data
        .rows()
        .zip(data.labels())
        .enumerate()
        .map(|(i, (row, &y))| PredictionSet::new(i, select_classes(row, artifact), Some(y)))
        .collect())
}

//! Saliency-map statistics: spatial entropy per map and its association with
//! prediction-set size.
//!
//! Heatmaps travel in the GCAM binary format: the ASCII magic `GCAM`, then
//! `count`, `height`, `width` as little-endian `u32`, then
//! `count * height * width` little-endian `f32` values, row-major per map,
//! maps concatenated in sample order.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::data::PredictionSet;
use crate::error::{Error, Result};
use crate::rng;
use crate::util::write_atomic;

pub const GCAM_MAGIC: &[u8; 4] = b"GCAM";

/// `count` non-negative maps of `height x width` pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapBatch {
    count: usize,
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl HeatmapBatch {
    pub fn new(count: usize, height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        let pixels = height * width;
        if values.len() != count * pixels {
            return Err(Error::Dimension {
                expected: count * pixels,
                actual: values.len(),
            });
        }
        if pixels == 0 && count > 0 {
            return Err(Error::Format("heatmaps must have at least one pixel".into()));
        }
        for (i, map) in values.chunks_exact(pixels.max(1)).enumerate() {
            if let Some(v) = map.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::Value {
                    row: i,
                    message: format!("heatmap value {v} is negative or non-finite"),
                });
            }
        }
        Ok(Self {
            count,
            height,
            width,
            values,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn map(&self, i: usize) -> &[f32] {
        let px = self.height * self.width;
        &self.values[i * px..(i + 1) * px]
    }

    pub fn maps(&self) -> impl Iterator<Item = &[f32]> + '_ {
        (0..self.count).map(|i| self.map(i))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != GCAM_MAGIC {
            return Err(Error::Format("missing GCAM magic header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let (count, height, width) = (word(0), word(1), word(2));
        let expected = count
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .and_then(|v| v.checked_mul(4))
            .ok_or_else(|| Error::Format("GCAM dimensions overflow".into()))?;
        let body = &bytes[16..];
        if body.len() != expected {
            return Err(Error::Format(format!(
                "GCAM body has {} bytes, header implies {expected}",
                body.len()
            )));
        }
        let values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(count, height, width, values)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write_to(&self, w: &mut dyn Write) -> std::io::Result<()> {
        w.write_all(GCAM_MAGIC)?;
        for d in [self.count, self.height, self.width] {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), |w| self.write_to(w))
    }
}

/// Shannon entropy in bits of the map normalised to sum to one.
pub fn spatial_entropy<T: Copy + Into<f64>>(map: &[T]) -> Result<f64> {
    let mut total = 0.0;
    for &v in map {
        let v: f64 = v.into();
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::EntropyUndefined(format!(
                "map contains negative or non-finite value {v}"
            )));
        }
        total += v;
    }
    if total <= 0.0 {
        return Err(Error::EntropyUndefined("map has zero total mass".into()));
    }
    let h: f64 = map
        .iter()
        .map(|&v| v.into() / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum();
    Ok(h.max(0.0))
}

/// Correlation coefficient with its two-sided p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub coefficient: f64,
    pub p_value: f64,
}

/// Two-sided tail probability P(|T| >= |t|) for Student's t with `df` degrees
/// of freedom, via the regularised incomplete beta function.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// p-value for a sample correlation `r` over `n` points (t with n−2 df).
fn correlation_p_value(r: f64, n: usize) -> f64 {
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    student_t_two_sided(t, df)
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn check_inputs(x: &[f64], n_other: usize) -> Result<()> {
    if x.len() != n_other {
        return Err(Error::Dimension {
            expected: x.len(),
            actual: n_other,
        });
    }
    if x.len() < 3 {
        return Err(Error::CorrelationUndefined(format!(
            "need at least 3 samples, got {}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::CorrelationUndefined("non-finite input".into()));
    }
    Ok(())
}

/// Spearman rank correlation with midrank ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation> {
    check_inputs(x, y.len())?;
    check_inputs(y, x.len())?;
    let rho = pearson(&midranks(x), &midranks(y))
        .ok_or_else(|| Error::CorrelationUndefined("constant input vector".into()))?;
    Ok(Correlation {
        coefficient: rho,
        p_value: correlation_p_value(rho, x.len()),
    })
}

/// Point-biserial correlation between `x` and the indicator `group`.
pub fn point_biserial(x: &[f64], group: &[bool]) -> Result<Correlation> {
    check_inputs(x, group.len())?;
    let n = x.len() as f64;
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0usize, 0.0, 0usize);
    for (&v, &g) in x.iter().zip(group) {
        if g {
            s1 += v;
            n1 += 1;
        } else {
            s0 += v;
            n0 += 1;
        }
    }
    if n1 == 0 || n0 == 0 {
        return Err(Error::CorrelationUndefined("only one group is present".into()));
    }
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd <= 0.0 {
        return Err(Error::CorrelationUndefined("zero variance".into()));
    }
    let (m1, m0) = (s1 / n1 as f64, s0 / n0 as f64);
    let r = ((m1 - m0) / sd * ((n1 * n0) as f64 / (n * n)).sqrt()).clamp(-1.0, 1.0);
    Ok(Correlation {
        coefficient: r,
        p_value: correlation_p_value(r, x.len()),
    })
}

/// Indices of the analysed subset: the first `count` entries of the seeded
/// shuffle of `0..n_total`, in shuffled order.
pub fn analysis_sample_indices(n_total: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut idx = rng::shuffled_indices(n_total, seed);
    idx.truncate(count);
    idx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionReport {
    pub n: usize,
    pub height: usize,
    pub width: usize,
    /// Entropy vs set size; null when either vector is constant.
    pub spearman: Option<Correlation>,
    /// Entropy vs singleton indicator; null when only one group is present.
    pub point_biserial: Option<Correlation>,
    pub n_singleton: usize,
    pub n_multi_label: usize,
    pub n_empty: usize,
    pub mean_entropy_singleton: Option<f64>,
    pub mean_entropy_multi_label: Option<f64>,
    pub mean_entropy_all: f64,
}

fn undefined_as_none(r: Result<Correlation>) -> Result<Option<Correlation>> {
    match r {
        Ok(c) => Ok(Some(c)),
        Err(Error::CorrelationUndefined(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Entropy/set-size statistics for paired maps and sets (paired by position).
pub fn attention_report(maps: &HeatmapBatch, sets: &[PredictionSet]) -> Result<AttentionReport> {
    if maps.count() != sets.len() {
        return Err(Error::Dimension {
            expected: maps.count(),
            actual: sets.len(),
        });
    }
    let entropies = maps.maps().map(spatial_entropy).collect::<Result<Vec<f64>>>()?;
    let sizes: Vec<f64> = sets.iter().map(|s| s.size as f64).collect();
    let singleton: Vec<bool> = sets.iter().map(|s| s.size == 1).collect();

    let mean_where = |pred: &dyn Fn(&PredictionSet) -> bool| {
        let vals: Vec<f64> = entropies
            .iter()
            .zip(sets)
            .filter(|(_, s)| pred(s))
            .map(|(&e, _)| e)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };

    Ok(AttentionReport {
        n: sets.len(),
        height: maps.height(),
        width: maps.width(),
        spearman: undefined_as_none(spearman(&entropies, &sizes))?,
        point_biserial: undefined_as_none(point_biserial(&entropies, &singleton))?,
        n_singleton: sets.iter().filter(|s| s.size == 1).count(),
        n_multi_label: sets.iter().filter(|s| s.size >= 2).count(),
        n_empty: sets.iter().filter(|s| s.size == 0).count(),
        mean_entropy_singleton: mean_where(&|s| s.size == 1),
        mean_entropy_multi_label: mean_where(&|s| s.size >= 2),
        mean_entropy_all: if entropies.is_empty() {
            0.0
        } else {
            entropies.iter().sum::<f64>() / entropies.len() as f64
        },
    })
}

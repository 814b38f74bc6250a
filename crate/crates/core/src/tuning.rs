//! λ selection for RAPS on the tuning split.
//!
//! Both criteria share one protocol: the tuning data is split 50/50 into an
//! inner calibration half and an inner evaluation half; for every grid value
//! RAPS is calibrated on the first half and its sets are scored on the second.
//! The size criterion keeps the λ with the smallest mean set size. The
//! adaptive criterion keeps the λ whose worst populated stratum is closest to
//! the target coverage:
//!
//! ```text
//! λ* = argmin_λ  max_m |Cov(G_m, λ) − (1 − α)|
//! ```
//!
//! Ties always go to the smallest λ.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{calibrate, conformal_rank, predict_all, Method, MethodParams};
use crate::data::{LogitDataset, PredictionSet, SplitSpec};
use crate::error::{Error, Result};
use crate::scoring::{rank_sample, softmax};
use crate::strata::StrataSpec;
use crate::util::inf_f64;

/// Strictly ascending, non-negative λ values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("lambda grid is empty"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config("lambda values must be finite and >= 0"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("lambda grid must be strictly ascending"));
        }
        Ok(Self { values })
    }

    /// {0, 1e-5, 1e-4, 8e-4, 9e-4, 1e-3, 1.5e-3, 2e-3}.
    pub fn default_grid() -> Self {
        Self::new(vec![0.0, 1e-5, 1e-4, 8e-4, 9e-4, 1e-3, 1.5e-3, 2e-3]).unwrap()
    }

    /// Five points on [0, 0.01].
    pub fn coarse() -> Self {
        Self::new(vec![0.0, 1e-4, 1e-3, 5e-3, 1e-2]).unwrap()
    }

    /// Twelve points on [0, 0.01].
    pub fn fine() -> Self {
        Self::new(vec![
            0.0, 1e-5, 1e-4, 5e-4, 8e-4, 9e-4, 1e-3, 1.5e-3, 2e-3, 3e-3, 5e-3, 1e-2,
        ])
        .unwrap()
    }

    /// `default`, `coarse`, `fine`, or a comma-separated list.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(Self::default_grid()),
            "coarse" => Ok(Self::coarse()),
            "fine" => Ok(Self::fine()),
            list => {
                let values = list
                    .split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::config(format!("bad lambda value `{v}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::new(values)
            }
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Default for LambdaGrid {
    fn default() -> Self {
        Self::default_grid()
    }
}

impl TryFrom<Vec<f64>> for LambdaGrid {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LambdaGrid> for Vec<f64> {
    fn from(g: LambdaGrid) -> Self {
        g.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Size,
    Adaptive,
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "size" => Ok(Criterion::Size),
            "adaptive" => Ok(Criterion::Adaptive),
            _ => Err(Error::config(format!("unknown criterion `{s}`"))),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Size => "size",
            Criterion::Adaptive => "adaptive",
        })
    }
}

/// Coverage inside one stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumStat {
    pub lo: usize,
    pub hi: Option<usize>,
    pub n: usize,
    pub covered: usize,
    /// `None` when the stratum is empty.
    pub coverage: Option<f64>,
    pub populated: bool,
}

/// Group sets by stratum of their size. A stratum is populated when it holds
/// at least `min_count` sets (and at least one).
pub fn stratified_coverage(
    sets: &[PredictionSet],
    strata: &StrataSpec,
    min_count: usize,
) -> Vec<StratumStat> {
    let mut n = vec![0usize; strata.len()];
    let mut hit = vec![0usize; strata.len()];
    for s in sets {
        let m = strata.stratum_of(s.size);
        n[m] += 1;
        hit[m] += usize::from(s.covered);
    }
    strata
        .ranges()
        .iter()
        .enumerate()
        .map(|(m, r)| StratumStat {
            lo: r.lo,
            hi: r.hi,
            n: n[m],
            covered: hit[m],
            coverage: (n[m] > 0).then(|| hit[m] as f64 / n[m] as f64),
            populated: n[m] > 0 && n[m] >= min_count,
        })
        .collect()
}

/// max over populated strata of |coverage − target|; `+inf` if none is populated.
pub fn max_violation(strata: &[StratumStat], target: f64) -> f64 {
    strata
        .iter()
        .filter(|s| s.populated)
        .filter_map(|s| s.coverage)
        .map(|c| (c - target).abs())
        .reduce(f64::max)
        .unwrap_or(f64::INFINITY)
}

/// Outcome of one grid point on the inner evaluation half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRecord {
    pub lambda: f64,
    pub avg_size: f64,
    pub coverage: f64,
    pub multi_label: usize,
    pub strata: Vec<StratumStat>,
    /// Adaptive objective; `"inf"` when no stratum is populated.
    #[serde(with = "inf_f64")]
    pub max_violation: f64,
}

impl LambdaRecord {
    pub fn objective(&self, criterion: Criterion) -> f64 {
        match criterion {
            Criterion::Size => self.avg_size,
            Criterion::Adaptive => self.max_violation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub criterion: Criterion,
    pub alpha: f64,
    pub temperature: f64,
    pub min_count: usize,
    pub inner_split_seed: u64,
    pub n_inner_cal: usize,
    pub n_inner_eval: usize,
    pub strata: StrataSpec,
    pub records: Vec<LambdaRecord>,
    pub chosen_lambda: f64,
    pub chosen_k_reg: usize,
}

impl TuningReport {
    pub fn chosen_record(&self) -> &LambdaRecord {
        self.records
            .iter()
            .find(|r| r.lambda == self.chosen_lambda)
            .expect("chosen lambda has a record")
    }
}

/// Evaluate RAPS at every grid value: calibrate on `inner_cal`, score on `inner_eval`.
pub fn evaluate_lambda_grid(
    inner_cal: &LogitDataset,
    inner_eval: &LogitDataset,
    grid: &LambdaGrid,
    k_reg: usize,
    params: &MethodParams,
    strata: &StrataSpec,
    min_count: usize,
) -> Result<Vec<LambdaRecord>> {
    let target = 1.0 - params.alpha;
    grid.values()
        .par_iter()
        .map(|&lambda| {
            let p = MethodParams {
                method: Method::Raps,
                lambda,
                k_reg,
                ..params.clone()
            };
            let artifact = calibrate(inner_cal, &p, strata)?;
            let sets = predict_all(inner_eval, &artifact)?;
            let n = sets.len() as f64;
            let per_stratum = stratified_coverage(&sets, strata, min_count);
            Ok(LambdaRecord {
                lambda,
                avg_size: sets.iter().map(|s| s.size as f64).sum::<f64>() / n,
                coverage: sets.iter().filter(|s| s.covered).count() as f64 / n,
                multi_label: sets.iter().filter(|s| s.size >= 2).count(),
                max_violation: max_violation(&per_stratum, target),
                strata: per_stratum,
            })
        })
        .collect()
}

/// Grid value minimising the criterion's objective; the first (smallest λ)
/// wins ties.
pub fn choose_lambda(records: &[LambdaRecord], criterion: Criterion) -> Option<f64> {
    let mut best: Option<&LambdaRecord> = None;
    for r in records {
        match best {
            Some(b) if r.objective(criterion) >= b.objective(criterion) => {}
            _ => best = Some(r),
        }
    }
    best.map(|r| r.lambda)
}

/// Seeded 50/50 split of the tuning data into inner-cal / inner-eval.
pub fn inner_split(tune: &LogitDataset, seed: u64) -> Result<(LogitDataset, LogitDataset)> {
    let [a, b, _] = SplitSpec::halves(seed).partition(tune.n_samples());
    if a.is_empty() || b.is_empty() {
        return Err(Error::Split(format!(
            "tuning set of {} samples is too small for an inner 50/50 split",
            tune.n_samples()
        )));
    }
    Ok((tune.subset(&a), tune.subset(&b)))
}

#[allow(clippy::too_many_arguments)]
pub fn tune_lambda(
    tune: &LogitDataset,
    grid: &LambdaGrid,
    k_reg: usize,
    params: &MethodParams,
    strata: &StrataSpec,
    min_count: usize,
    inner_split_seed: u64,
    criterion: Criterion,
) -> Result<TuningReport> {
    params.validate()?;
    let (inner_cal, inner_eval) = inner_split(tune, inner_split_seed)?;
    let records = evaluate_lambda_grid(&inner_cal, &inner_eval, grid, k_reg, params, strata, min_count)?;
    let chosen_lambda = choose_lambda(&records, criterion).expect("grid is non-empty");
    Ok(TuningReport {
        criterion,
        alpha: params.alpha,
        temperature: params.temperature,
        min_count,
        inner_split_seed,
        n_inner_cal: inner_cal.n_samples(),
        n_inner_eval: inner_eval.n_samples(),
        strata: strata.clone(),
        records,
        chosen_lambda,
        chosen_k_reg: k_reg,
    })
}

/// Size criterion: smallest mean set size. Records still carry the stratified
/// objective for audit.
pub fn tune_lambda_size(
    tune: &LogitDataset,
    grid: &LambdaGrid,
    k_reg: usize,
    params: &MethodParams,
    inner_split_seed: u64,
) -> Result<TuningReport> {
    tune_lambda(
        tune,
        grid,
        k_reg,
        params,
        &StrataSpec::default(),
        1,
        inner_split_seed,
        Criterion::Size,
    )
}

/// Stratified minimax criterion.
pub fn tune_lambda_adaptive(
    tune: &LogitDataset,
    grid: &LambdaGrid,
    k_reg: usize,
    params: &MethodParams,
    strata: &StrataSpec,
    min_count: usize,
    inner_split_seed: u64,
) -> Result<TuningReport> {
    tune_lambda(
        tune,
        grid,
        k_reg,
        params,
        strata,
        min_count,
        inner_split_seed,
        Criterion::Adaptive,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KRegMode {
    Fixed(usize),
    Auto,
}

impl Default for KRegMode {
    fn default() -> Self {
        KRegMode::Fixed(1)
    }
}

impl FromStr for KRegMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(KRegMode::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(KRegMode::Fixed(k)),
            _ => Err(Error::config(format!("k_reg must be `auto` or an integer >= 1, got `{s}`"))),
        }
    }
}

/// Fixed k, or the ⌈(n+1)(1−α)⌉-th smallest true-label rank clamped to [1, K].
pub fn select_k_reg(tune: &LogitDataset, mode: KRegMode, alpha: f64) -> usize {
    match mode {
        KRegMode::Fixed(k) => k,
        KRegMode::Auto => {
            let k = tune.n_classes();
            let mut ranks: Vec<usize> = tune
                .rows()
                .zip(tune.labels())
                .map(|(row, &y)| rank_sample(&softmax(row, 1.0), y).label_rank)
                .collect();
            if ranks.is_empty() {
                return 1;
            }
            let r = conformal_rank(ranks.len(), alpha);
            if r > ranks.len() {
                return k;
            }
            ranks.sort_unstable();
            ranks[r - 1].clamp(1, k)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(size: usize, covered: bool) -> PredictionSet {
        let classes: Vec<usize> = (0..size).collect();
        let label = if covered { 0 } else { size + 1 };
        PredictionSet::new(0, classes, Some(label))
    }

    fn record(lambda: f64, avg_size: f64, max_violation: f64) -> LambdaRecord {
        LambdaRecord {
            lambda,
            avg_size,
            coverage: 0.9,
            multi_label: 0,
            strata: vec![],
            max_violation,
        }
    }

    #[test]
    fn grid_validation() {
        assert_eq!(LambdaGrid::default_grid().len(), 8);
        assert_eq!(LambdaGrid::coarse().len(), 5);
        assert_eq!(LambdaGrid::fine().len(), 12);
        assert_eq!(LambdaGrid::parse("0,0.001,0.01").unwrap().values(), &[0.0, 0.001, 0.01]);
        assert!(LambdaGrid::parse("").is_err());
        assert!(LambdaGrid::parse("0.1,0.01").is_err());
        assert!(LambdaGrid::parse("0,0").is_err());
        assert!(LambdaGrid::parse("-1,0").is_err());
    }

    #[test]
    fn stratified_single_group() {
        let sets: Vec<_> = (0..100).map(|i| set(1, i < 93)).collect();
        let st = stratified_coverage(&sets, &StrataSpec::default(), 1);
        assert_eq!(st[0].n, 100);
        assert_eq!(st[0].coverage, Some(0.93));
        assert!(st[0].populated);
        assert!(st[1..].iter().all(|s| s.n == 0 && !s.populated && s.coverage.is_none()));
    }

    #[test]
    fn stratified_pairs() {
        let sets: Vec<_> = (0..10).map(|i| set(2, i < 6)).collect();
        let st = stratified_coverage(&sets, &StrataSpec::default(), 1);
        assert_eq!(st[1].coverage, Some(0.6));
    }

    #[test]
    fn stratified_empty_and_min_count() {
        let st = stratified_coverage(&[], &StrataSpec::default(), 1);
        assert!(st.iter().all(|s| s.n == 0 && !s.populated));
        let sets = vec![set(1, true), set(1, true), set(3, false)];
        let st = stratified_coverage(&sets, &StrataSpec::default(), 2);
        assert!(st[0].populated);
        assert!(!st[1].populated);
        assert_eq!(max_violation(&st, 0.9), 0.09999999999999998);
        assert_eq!(max_violation(&stratified_coverage(&[], &StrataSpec::default(), 1), 0.9), f64::INFINITY);
    }

    #[test]
    fn adaptive_prefers_smaller_worst_violation() {
        // λ=0: strata {0.95, 0.94} -> 0.05; λ_big: all singletons at 0.93 -> 0.03.
        let recs = vec![record(0.0, 1.1, 0.05), record(0.01, 1.0, 0.03)];
        assert_eq!(choose_lambda(&recs, Criterion::Adaptive), Some(0.01));
        // Reverse: λ=0's violation is the smaller one.
        let recs = vec![record(0.0, 1.1, 0.02), record(0.01, 1.0, 0.3)];
        assert_eq!(choose_lambda(&recs, Criterion::Adaptive), Some(0.0));
        assert_eq!(choose_lambda(&recs, Criterion::Size), Some(0.01));
    }

    #[test]
    fn ties_go_to_smallest_lambda() {
        let recs = vec![record(0.0, 1.0, 0.05), record(0.001, 1.0, 0.05), record(0.002, 1.0, 0.05)];
        assert_eq!(choose_lambda(&recs, Criterion::Adaptive), Some(0.0));
        assert_eq!(choose_lambda(&recs, Criterion::Size), Some(0.0));
        let inf = vec![record(0.0, 1.0, f64::INFINITY), record(0.1, 1.0, f64::INFINITY)];
        assert_eq!(choose_lambda(&inf, Criterion::Adaptive), Some(0.0));
        let one_finite = vec![record(0.0, 1.0, f64::INFINITY), record(0.1, 1.0, 0.4)];
        assert_eq!(choose_lambda(&one_finite, Criterion::Adaptive), Some(0.1));
        assert_eq!(choose_lambda(&[], Criterion::Size), None);
    }

    /// Logits whose softmax puts the true label at a chosen rank.
    fn ranked_dataset(ranks: &[usize], k: usize) -> LogitDataset {
        let mut rows = Vec::new();
        // class j always sits at rank j+1, so label r-1 has rank r.
        for _ in ranks {
            rows.push((0..k).map(|j| -(j as f64)).collect::<Vec<_>>());
        }
        let labels = ranks.iter().map(|&r| r - 1).collect();
        LogitDataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn k_reg_selection() {
        let d = ranked_dataset(&[1, 1, 1, 1, 1, 1, 1, 1, 2, 3], 4);
        assert_eq!(select_k_reg(&d, KRegMode::Fixed(1), 0.1), 1);
        assert_eq!(select_k_reg(&d, KRegMode::Auto, 0.1), 3);
        let ones = ranked_dataset(&[1; 20], 4);
        assert_eq!(select_k_reg(&ones, KRegMode::Auto, 0.1), 1);
        let tiny = ranked_dataset(&[1], 4);
        assert_eq!(select_k_reg(&tiny, KRegMode::Auto, 0.1), 4);
        assert_eq!("auto".parse::<KRegMode>().unwrap(), KRegMode::Auto);
        assert!("0".parse::<KRegMode>().is_err());
    }

    #[test]
    fn single_point_grid_is_chosen() {
        let d = ranked_dataset(&[1, 2, 1, 1, 3, 1, 1, 2, 1, 1, 1, 1], 4);
        let grid = LambdaGrid::new(vec![0.37]).unwrap();
        let r = tune_lambda_size(&d, &grid, 1, &MethodParams::raps(0.1, 0.0, 1), 0).unwrap();
        assert_eq!(r.chosen_lambda, 0.37);
        assert_eq!(r.records.len(), 1);
    }

    #[test]
    fn tiny_tuning_set_is_a_split_error() {
        let d = ranked_dataset(&[1], 4);
        let err = tune_lambda_size(&d, &LambdaGrid::default(), 1, &MethodParams::raps(0.1, 0.0, 1), 0);
        assert!(matches!(err, Err(Error::Split(_))));
    }
}

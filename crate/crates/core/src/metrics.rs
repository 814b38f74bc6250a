//! Evaluation of prediction sets and the multi-method comparison protocol.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::conformal::{calibrate, predict_all, Method, MethodParams};
use crate::data::{LogitDataset, PredictionSet};
use crate::error::{Error, Result};
use crate::scoring::fit_temperature;
use crate::strata::StrataSpec;
use crate::tuning::{
    select_k_reg, stratified_coverage, tune_lambda, Criterion, KRegMode, LambdaGrid, StratumStat,
    TuningReport,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub n_test: usize,
    pub coverage: f64,
    pub avg_size: f64,
    pub singleton_rate: f64,
    pub empty_rate: f64,
    /// Worst coverage over populated strata; `None` when no stratum is populated.
    pub strat_min: Option<f64>,
    pub per_stratum: Vec<StratumStat>,
    /// Coverage among test samples of each class; `None` for absent classes.
    pub per_class: Vec<Option<f64>>,
}

impl MetricsReport {
    pub fn populated_strata(&self) -> usize {
        self.per_stratum.iter().filter(|s| s.populated).count()
    }

    pub fn multi_label(&self) -> usize {
        self.per_stratum
            .iter()
            .filter(|s| s.lo >= 2)
            .map(|s| s.n)
            .sum::<usize>()
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.method = name.into();
        self
    }
}

/// Aggregate metrics. Coverage is recomputed from `labels`, not from the
/// sets' own `covered` flags.
pub fn evaluate(
    sets: &[PredictionSet],
    labels: &[usize],
    n_classes: usize,
    strata: &StrataSpec,
    min_count: usize,
) -> Result<MetricsReport> {
    if sets.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            actual: sets.len(),
        });
    }
    if sets.is_empty() {
        return Err(Error::config("cannot evaluate an empty set of predictions"));
    }
    let relabeled: Vec<PredictionSet> = sets
        .iter()
        .zip(labels)
        .map(|(s, &y)| PredictionSet::new(s.sample_index, s.classes.clone(), Some(y)))
        .collect();
    let n = relabeled.len() as f64;
    let frac = |pred: &dyn Fn(&PredictionSet) -> bool| {
        relabeled.iter().filter(|s| pred(s)).count() as f64 / n
    };

    let mut class_n = vec![0usize; n_classes];
    let mut class_hit = vec![0usize; n_classes];
    for s in &relabeled {
        let y = s.label.expect("labels attached above");
        if y < n_classes {
            class_n[y] += 1;
            class_hit[y] += usize::from(s.covered);
        }
    }

    let per_stratum = stratified_coverage(&relabeled, strata, min_count);
    let strat_min = per_stratum
        .iter()
        .filter(|s| s.populated)
        .filter_map(|s| s.coverage)
        .reduce(f64::min);

    Ok(MetricsReport {
        method: String::new(),
        n_test: relabeled.len(),
        coverage: frac(&|s| s.covered),
        avg_size: relabeled.iter().map(|s| s.size as f64).sum::<f64>() / n,
        singleton_rate: frac(&|s| s.size == 1),
        empty_rate: frac(&|s| s.size == 0),
        strat_min,
        per_stratum,
        per_class: class_n
            .iter()
            .zip(&class_hit)
            .map(|(&n, &h)| (n > 0).then(|| h as f64 / n as f64))
            .collect(),
    })
}

/// The five compared methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparedMethod {
    Naive,
    Lac,
    RapsSize,
    RapsTemp,
    RapsAdaptive,
}

impl ComparedMethod {
    pub const ALL: [ComparedMethod; 5] = [
        ComparedMethod::Naive,
        ComparedMethod::Lac,
        ComparedMethod::RapsSize,
        ComparedMethod::RapsTemp,
        ComparedMethod::RapsAdaptive,
    ];

    pub fn display_name(&self) -> &'static str {
        match self {
            ComparedMethod::Naive => "Naive",
            ComparedMethod::Lac => "LAC",
            ComparedMethod::RapsSize => "RAPS (Size)",
            ComparedMethod::RapsTemp => "RAPS (Temp)",
            ComparedMethod::RapsAdaptive => "RAPS (Adaptive)",
        }
    }
}

/// Shared configuration for [`compare_methods`] and [`ablate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub alpha: f64,
    pub grid: LambdaGrid,
    pub strata: StrataSpec,
    pub min_count: usize,
    pub k_reg: KRegMode,
    pub inner_split_seed: u64,
    pub force_top1: bool,
    pub methods: Vec<ComparedMethod>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            grid: LambdaGrid::default(),
            strata: StrataSpec::default(),
            min_count: 1,
            k_reg: KRegMode::default(),
            inner_split_seed: 0,
            force_top1: false,
            methods: ComparedMethod::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: ComparedMethod,
    pub params: MethodParams,
    pub report: MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuning: Option<TuningReport>,
}

/// Calibrate on `cal`, build sets on `test`, and evaluate.
pub fn run_method(
    cal: &LogitDataset,
    test: &LogitDataset,
    params: &MethodParams,
    strata: &StrataSpec,
    min_count: usize,
) -> Result<(MetricsReport, Vec<PredictionSet>)> {
    let artifact = calibrate(cal, params, strata)?;
    let sets = predict_all(test, &artifact)?;
    let report = evaluate(&sets, test.labels(), test.n_classes(), strata, min_count)?;
    Ok((report, sets))
}

/// Resolve λ, k_reg, and T for one compared method. Tuning uses `tune`;
/// temperature fitting uses `cal`.
pub fn resolve_params(
    method: ComparedMethod,
    tune: &LogitDataset,
    cal: &LogitDataset,
    config: &CompareConfig,
) -> Result<(MethodParams, Option<TuningReport>)> {
    let base = |m: Method| MethodParams {
        force_top1: config.force_top1,
        ..MethodParams::new(m, config.alpha)
    };
    let tuned = |criterion: Criterion, temperature: f64| -> Result<(MethodParams, Option<TuningReport>)> {
        let k_reg = select_k_reg(tune, config.k_reg, config.alpha);
        let params = base(Method::Raps).with_temperature(temperature);
        let strata = match criterion {
            Criterion::Adaptive => config.strata.clone(),
            Criterion::Size => StrataSpec::default(),
        };
        let report = tune_lambda(
            tune,
            &config.grid,
            k_reg,
            &params,
            &strata,
            config.min_count,
            config.inner_split_seed,
            criterion,
        )?;
        Ok((
            MethodParams {
                lambda: report.chosen_lambda,
                k_reg,
                ..params
            },
            Some(report),
        ))
    };
    match method {
        ComparedMethod::Naive => Ok((base(Method::Naive), None)),
        ComparedMethod::Lac => Ok((base(Method::Lac), None)),
        ComparedMethod::RapsSize => tuned(Criterion::Size, 1.0),
        ComparedMethod::RapsTemp => tuned(Criterion::Size, fit_temperature(cal)),
        ComparedMethod::RapsAdaptive => tuned(Criterion::Adaptive, 1.0),
    }
}

/// Run every configured method: tune on `tune`, calibrate on `cal`, evaluate on `test`.
pub fn compare_methods(
    tune: &LogitDataset,
    cal: &LogitDataset,
    test: &LogitDataset,
    config: &CompareConfig,
) -> Result<Vec<ComparisonRow>> {
    config
        .methods
        .iter()
        .map(|&m| {
            let (params, tuning) = resolve_params(m, tune, cal, config)?;
            let (report, _) = run_method(cal, test, &params, &config.strata, config.min_count)?;
            Ok(ComparisonRow {
                method: m,
                params,
                report: report.named(m.display_name()),
                tuning,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum AblationVariants {
    Strata(Vec<(String, StrataSpec)>),
    Grid(Vec<(String, LambdaGrid)>),
}

impl AblationVariants {
    /// Coarse (3), default (6), and fine (8) strata.
    pub fn strata_presets() -> Self {
        AblationVariants::Strata(vec![
            ("Coarse (3 strata)".into(), StrataSpec::coarse()),
            ("Default (6 strata)".into(), StrataSpec::default_six()),
            ("Fine (8 strata)".into(), StrataSpec::fine()),
        ])
    }

    /// 5-, 8-, and 12-point grids.
    pub fn grid_presets() -> Self {
        AblationVariants::Grid(vec![
            ("Coarse (5 pts)".into(), LambdaGrid::coarse()),
            ("Default (8 pts)".into(), LambdaGrid::default_grid()),
            ("Fine (12 pts)".into(), LambdaGrid::fine()),
        ])
    }

    fn len(&self) -> usize {
        match self {
            AblationVariants::Strata(v) => v.len(),
            AblationVariants::Grid(v) => v.len(),
        }
    }

    fn axis(&self) -> &'static str {
        match self {
            AblationVariants::Strata(_) => "strata",
            AblationVariants::Grid(_) => "grid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub axis: String,
    pub variant: String,
    pub coverage: f64,
    pub avg_size: f64,
    pub strat_min: Option<f64>,
    pub lambda: f64,
    pub k_reg: usize,
}

/// Re-run RAPS (Adaptive) once per variant, holding everything else in `base` fixed.
pub fn ablate(
    tune: &LogitDataset,
    cal: &LogitDataset,
    test: &LogitDataset,
    base: &CompareConfig,
    variants: &AblationVariants,
) -> Result<Vec<AblationRow>> {
    if variants.len() < 2 {
        return Err(Error::config("an ablation needs at least two variants"));
    }
    let configs: Vec<(String, CompareConfig)> = match variants {
        AblationVariants::Strata(v) => v
            .iter()
            .map(|(name, s)| {
                (name.clone(), CompareConfig { strata: s.clone(), ..base.clone() })
            })
            .collect(),
        AblationVariants::Grid(v) => v
            .iter()
            .map(|(name, g)| (name.clone(), CompareConfig { grid: g.clone(), ..base.clone() }))
            .collect(),
    };
    configs
        .into_iter()
        .map(|(variant, config)| {
            let (params, _) = resolve_params(ComparedMethod::RapsAdaptive, tune, cal, &config)?;
            let (report, _) = run_method(cal, test, &params, &config.strata, config.min_count)?;
            Ok(AblationRow {
                axis: variants.axis().to_string(),
                variant,
                coverage: report.coverage,
                avg_size: report.avg_size,
                strat_min: report.strat_min,
                lambda: params.lambda,
                k_reg: params.k_reg,
            })
        })
        .collect()
}

fn fmt_opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.decimals$}"))
}

/// Fixed-width table with Coverage / Avg Size / Singleton / Empty / Strat. Min.
/// A trailing `†` marks reports with a single populated stratum.
pub fn comparison_table(reports: &[&MetricsReport]) -> String {
    let width = reports.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>8}  {:>8}  {:>9}  {:>6}  {:>11}",
        "Method", "Coverage", "Avg Size", "Singleton", "Empty", "Strat. Min."
    );
    for r in reports {
        let dagger = if r.populated_strata() == 1 { "†" } else { " " };
        let _ = writeln!(
            out,
            "{:<width$}  {:>8.4}  {:>8.2}  {:>8.1}%  {:>5.1}%  {:>10}{}",
            r.method,
            r.coverage,
            r.avg_size,
            100.0 * r.singleton_rate,
            100.0 * r.empty_rate,
            fmt_opt(r.strat_min, 3),
            dagger,
        );
    }
    out
}

/// Fixed-width ablation table.
pub fn ablation_table(rows: &[AblationRow]) -> String {
    let width = rows.iter().map(|r| r.variant.len()).max().unwrap_or(13).max(13);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<6}  {:<width$}  {:>8}  {:>8}  {:>11}  {:>8}  {:>5}",
        "Axis", "Configuration", "Coverage", "Avg Size", "Strat. Min.", "lambda", "k_reg"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<6}  {:<width$}  {:>8.4}  {:>8.3}  {:>11}  {:>8}  {:>5}",
            r.axis,
            r.variant,
            r.coverage,
            r.avg_size,
            fmt_opt(r.strat_min, 4),
            r.lambda,
            r.k_reg,
        );
    }
    out
}

//! The `acp` command-line front end.
//!
//! Exit codes: 0 on success, 1 on I/O failure, 2 on any validation failure
//! (including malformed flags). JSON outputs are pretty-printed with a
//! trailing newline and are byte-identical across runs with the same flags.
//! Files are written atomically. `ACP_THREADS` sets the worker thread count.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::attention::{analysis_sample_indices, attention_report, HeatmapBatch};
use crate::conformal::{calibrate, predict_all, CalibrationArtifact, Method, MethodParams};
use crate::data::{
    load_logit_csv, read_prediction_sets, write_logit_csv_to, write_prediction_sets_to,
    LogitDataset, SplitSpec,
};
use crate::error::{Error, Result};
use crate::metrics::{
    ablate, ablation_table, compare_methods, comparison_table, evaluate, AblationVariants,
    CompareConfig, ComparedMethod,
};
use crate::scoring::fit_temperature;
use crate::strata::StrataSpec;
use crate::synthetic::{coverage_trial, generate, ConfusionPair, GeneratorConfig};
use crate::tuning::{select_k_reg, tune_lambda, Criterion, KRegMode, LambdaGrid, TuningReport};
use crate::util::{read_to_string, write_atomic};

/// Environment variable holding the default worker thread count.
pub const THREADS_ENV: &str = "ACP_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "acp", version, about = "Split conformal prediction with stratified lambda tuning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Shuffle a logit CSV and cut it into tune/cal/test files.
    Split(SplitArgs),
    /// Choose λ for RAPS on a tuning set.
    Tune(TuneArgs),
    /// Calibrate one method and write its artifact.
    Calibrate(CalibrateArgs),
    /// Build and score prediction sets on a test set.
    Evaluate(EvaluateArgs),
    /// Correlate saliency-map entropy with prediction-set size.
    Attention(AttentionArgs),
    /// Generate synthetic logits or run Monte Carlo coverage trials.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Comma-separated tune,cal,test fractions; zero-fraction partitions are not written.
    #[arg(long, default_value = "0.5,0.5,0")]
    pub fractions: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Options shared by every command that tunes or calibrates.
#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// `default`, `coarse`, `fine`, or ranges such as `0-1,2-3,4-`.
    #[arg(long, default_value = "default")]
    pub strata: String,
    /// Strata with fewer sets are ignored by the minimax objective.
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
    /// Always include the top-ranked class in APS/RAPS sets.
    #[arg(long)]
    pub force_top1: bool,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = CriterionArg::Adaptive)]
    pub criterion: CriterionArg,
    /// `default`, `coarse`, `fine`, or a comma-separated list.
    #[arg(long, default_value = "default")]
    pub grid: String,
    /// An integer >= 1 or `auto`.
    #[arg(long, default_value = "1")]
    pub k_reg: String,
    /// `fixed:T` or `fit`.
    #[arg(long, default_value = "fixed:1")]
    pub temp: String,
    /// Data for `--temp fit`; the tuning set is used when omitted.
    #[arg(long)]
    pub cal: Option<PathBuf>,
    /// Seed of the inner 50/50 split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CriterionArg {
    Size,
    Adaptive,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Size => Criterion::Size,
            CriterionArg::Adaptive => Criterion::Adaptive,
        }
    }
}

/// Method parameters given directly on the command line.
#[derive(Debug, Args, Clone)]
pub struct MethodArgs {
    /// naive, lac, lac_classcond, aps, or raps.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1)]
    pub k_reg: usize,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Take method raps with λ, k_reg, T, and α from a tuning report.
    #[arg(long)]
    pub tuning: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub method: MethodArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub test: PathBuf,
    /// Calibration artifact from `calibrate`.
    #[arg(long, conflicts_with_all = ["method", "tuning", "all", "ablate"])]
    pub artifact: Option<PathBuf>,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Calibration data for `--method`, `--tuning`, `--all`, and `--ablate`.
    #[arg(long)]
    pub cal: Option<PathBuf>,
    /// Tuning data for `--all` and `--ablate`.
    #[arg(long)]
    pub tune: Option<PathBuf>,
    /// Compare Naive, LAC, RAPS (Size), RAPS (Temp), and RAPS (Adaptive).
    #[arg(long, conflicts_with_all = ["method", "tuning", "ablate"])]
    pub all: bool,
    /// Re-run RAPS (Adaptive) over strata or grid presets.
    #[arg(long, value_enum, conflicts_with_all = ["method", "tuning"])]
    pub ablate: Option<AblateAxis>,
    #[arg(long, default_value = "default")]
    pub grid: String,
    #[arg(long = "tune-k-reg", default_value = "1")]
    pub tune_k_reg: String,
    /// Seed of the inner 50/50 split used when tuning.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON-lines prediction sets (single-method modes only).
    #[arg(long)]
    pub sets_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AblateAxis {
    Strata,
    Grid,
}

#[derive(Debug, Args)]
pub struct AttentionArgs {
    #[arg(long)]
    pub heatmaps: PathBuf,
    #[arg(long)]
    pub sets: PathBuf,
    /// Pair maps with the sets at the seeded analysis sample instead of by position.
    #[arg(long)]
    pub sample_seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 11)]
    pub classes: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 4.0)]
    pub sharpness: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    /// `a:b:strength`; repeatable.
    #[arg(long = "confuse")]
    pub confuse: Vec<String>,
    #[arg(long, default_value_t = 0.0)]
    pub ambiguous_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run this many coverage trials instead of emitting a dataset.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value = "aps")]
    pub method: String,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1)]
    pub k_reg: usize,
    #[arg(long, default_value_t = 500)]
    pub n_cal: usize,
    #[arg(long, default_value_t = 500)]
    pub n_test: usize,
    /// Dataset CSV, or trial summary JSON with `--trials`; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_io() {
        EXIT_IO
    } else {
        EXIT_INVALID
    }
}

/// Parse arguments, run the command, and report errors on standard error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("acp: {e}");
        return exit_code(&e);
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli.command, &mut out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("acp: {e}");
            exit_code(&e)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be an integer >= 1, got `{raw}`")))?;
    // A pool may already exist when called twice in one process; that is harmless.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Run one command, writing human-readable output to `out`.
pub fn run(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Split(a) => cmd_split(a, out),
        Command::Tune(a) => cmd_tune(a, out),
        Command::Calibrate(a) => cmd_calibrate(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Attention(a) => cmd_attention(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
    }
}

fn stdout_io(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |w| w.write_all(text.as_bytes()))
}

/// JSON to `path`, or to `out` when no path is given.
fn emit_json<T: Serialize>(value: &T, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let text = to_json(value)?;
    match path {
        Some(p) => write_text(p, &text),
        None => out.write_all(text.as_bytes()).map_err(stdout_io),
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

#[derive(Debug, Serialize)]
struct SplitManifest {
    input: String,
    n_samples: usize,
    n_classes: usize,
    seed: u64,
    fractions: [String; 3],
    partitions: Vec<PartitionEntry>,
}

#[derive(Debug, Serialize)]
struct PartitionEntry {
    name: &'static str,
    fraction: String,
    n_samples: usize,
    file: Option<String>,
}

pub const SPLIT_NAMES: [&str; 3] = ["tune", "cal", "test"];
pub const MANIFEST_FILE: &str = "manifest.json";

fn cmd_split(a: SplitArgs, out: &mut dyn Write) -> Result<()> {
    let spec = SplitSpec::parse(&a.fractions, a.seed)?;
    let data = load_logit_csv(&a.input)?;
    let parts = spec.partition(data.n_samples());
    let fractions = spec.fraction_strings();
    let ratios = spec.fractions();
    for (i, idx) in parts.iter().enumerate() {
        if ratios[i] > 0.0 && idx.is_empty() {
            return Err(Error::Split(format!(
                "{} partition is empty for {} samples",
                SPLIT_NAMES[i],
                data.n_samples()
            )));
        }
    }
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let mut entries = Vec::new();
    for (i, idx) in parts.iter().enumerate() {
        let file = if ratios[i] > 0.0 {
            let name = format!("{}.csv", SPLIT_NAMES[i]);
            let subset = data.subset(idx);
            write_atomic(&a.out_dir.join(&name), |w| write_logit_csv_to(&subset, w))?;
            writeln!(out, "{}: {} samples -> {}", SPLIT_NAMES[i], idx.len(), a.out_dir.join(&name).display())
                .map_err(stdout_io)?;
            Some(name)
        } else {
            None
        };
        entries.push(PartitionEntry {
            name: SPLIT_NAMES[i],
            fraction: fractions[i].clone(),
            n_samples: idx.len(),
            file,
        });
    }
    let manifest = SplitManifest {
        input: a.input.display().to_string(),
        n_samples: data.n_samples(),
        n_classes: data.n_classes(),
        seed: a.seed,
        fractions,
        partitions: entries,
    };
    write_text(&a.out_dir.join(MANIFEST_FILE), &to_json(&manifest)?)
}

fn parse_temp(spec: &str, fit_data: impl FnOnce() -> Result<LogitDataset>) -> Result<f64> {
    if spec == "fit" {
        return Ok(fit_temperature(&fit_data()?));
    }
    let t = spec
        .strip_prefix("fixed:")
        .and_then(|v| v.parse::<f64>().ok())
        .ok_or_else(|| Error::Config(format!("--temp must be `fixed:T` or `fit`, got `{spec}`")))?;
    if t.is_finite() && t > 0.0 {
        Ok(t)
    } else {
        Err(Error::Config(format!("temperature must be finite and > 0, got {t}")))
    }
}

fn cmd_tune(a: TuneArgs, out: &mut dyn Write) -> Result<()> {
    check_alpha(a.common.alpha)?;
    let grid = LambdaGrid::parse(&a.grid)?;
    let strata = StrataSpec::parse(&a.common.strata)?;
    let k_mode: KRegMode = a.k_reg.parse()?;
    let tune = load_logit_csv(&a.input)?;
    let temperature = parse_temp(&a.temp, || match &a.cal {
        Some(p) => load_logit_csv(p),
        None => Ok(tune.clone()),
    })?;
    let k_reg = select_k_reg(&tune, k_mode, a.common.alpha);
    let params = MethodParams {
        force_top1: a.common.force_top1,
        ..MethodParams::raps(a.common.alpha, 0.0, k_reg).with_temperature(temperature)
    };
    let report = tune_lambda(
        &tune,
        &grid,
        k_reg,
        &params,
        &strata,
        a.common.min_count,
        a.seed,
        a.criterion.into(),
    )?;
    if a.out.is_some() {
        writeln!(
            out,
            "criterion {}: lambda = {}, k_reg = {}, T = {}",
            report.criterion, report.chosen_lambda, report.chosen_k_reg, report.temperature
        )
        .map_err(stdout_io)?;
    }
    emit_json(&report, a.out.as_deref(), out)
}

fn load_tuning_report(path: &Path) -> Result<TuningReport> {
    Ok(serde_json::from_str(&read_to_string(path)?)?)
}

fn method_params(m: &MethodArgs, common: &CommonArgs) -> Result<MethodParams> {
    let params = match (&m.tuning, &m.method) {
        (Some(path), method) => {
            if let Some(name) = method {
                if name.parse::<Method>()? != Method::Raps {
                    return Err(Error::config("--tuning applies only to method raps"));
                }
            }
            let r = load_tuning_report(path)?;
            MethodParams::raps(r.alpha, r.chosen_lambda, r.chosen_k_reg).with_temperature(r.temperature)
        }
        (None, Some(name)) => MethodParams {
            method: name.parse()?,
            alpha: common.alpha,
            lambda: m.lambda,
            k_reg: m.k_reg,
            temperature: m.temperature,
            force_top1: false,
        },
        (None, None) => return Err(Error::config("one of --method or --tuning is required")),
    };
    let params = MethodParams {
        force_top1: common.force_top1,
        ..params
    };
    params.validate()?;
    Ok(params)
}

fn cmd_calibrate(a: CalibrateArgs, out: &mut dyn Write) -> Result<()> {
    let params = method_params(&a.method, &a.common)?;
    let strata = StrataSpec::parse(&a.common.strata)?;
    let cal = load_logit_csv(&a.input)?;
    let artifact = calibrate(&cal, &params, &strata)?;
    artifact.save(&a.out)?;
    let q = artifact.q_hat.map_or_else(|| "n/a".to_string(), |q| q.to_string());
    writeln!(out, "{}: q_hat = {q} on {} samples", artifact.method, artifact.n_cal).map_err(stdout_io)
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str, mode: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("{mode} requires {flag}")))
}

#[derive(Debug, Serialize)]
struct AblationOutput<'a> {
    axis: &'static str,
    rows: &'a [crate::metrics::AblationRow],
}

fn cmd_evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    check_alpha(a.common.alpha)?;
    let strata = StrataSpec::parse(&a.common.strata)?;

    if a.all || a.ablate.is_some() {
        if a.sets_out.is_some() {
            return Err(Error::config("--sets-out applies to single-method evaluation only"));
        }
        let mode = if a.all { "--all" } else { "--ablate" };
        let tune = load_logit_csv(require(&a.tune, "--tune", mode)?)?;
        let cal = load_logit_csv(require(&a.cal, "--cal", mode)?)?;
        let test = load_logit_csv(&a.test)?;
        let config = CompareConfig {
            alpha: a.common.alpha,
            grid: LambdaGrid::parse(&a.grid)?,
            strata,
            min_count: a.common.min_count,
            k_reg: a.tune_k_reg.parse()?,
            inner_split_seed: a.seed,
            force_top1: a.common.force_top1,
            methods: ComparedMethod::ALL.to_vec(),
        };
        if let Some(axis) = a.ablate {
            let variants = match axis {
                AblateAxis::Strata => AblationVariants::strata_presets(),
                AblateAxis::Grid => AblationVariants::grid_presets(),
            };
            let rows = ablate(&tune, &cal, &test, &config, &variants)?;
            out.write_all(ablation_table(&rows).as_bytes()).map_err(stdout_io)?;
            let axis = match axis {
                AblateAxis::Strata => "strata",
                AblateAxis::Grid => "grid",
            };
            if let Some(p) = &a.out {
                write_text(p, &to_json(&AblationOutput { axis, rows: &rows })?)?;
            }
            return Ok(());
        }
        let rows = compare_methods(&tune, &cal, &test, &config)?;
        let reports: Vec<_> = rows.iter().map(|r| &r.report).collect();
        out.write_all(comparison_table(&reports).as_bytes()).map_err(stdout_io)?;
        if let Some(p) = &a.out {
            write_text(p, &to_json(&rows)?)?;
        }
        return Ok(());
    }

    let test = load_logit_csv(&a.test)?;
    let artifact = match &a.artifact {
        Some(path) => CalibrationArtifact::load(path)?,
        None => {
            let params = method_params(&a.method, &a.common)?;
            let cal = load_logit_csv(require(&a.cal, "--cal", "--method")?)?;
            calibrate(&cal, &params, &strata)?
        }
    };
    let sets = predict_all(&test, &artifact)?;
    let report = evaluate(&sets, test.labels(), test.n_classes(), &strata, a.common.min_count)?
        .named(artifact.method.as_str());
    out.write_all(comparison_table(&[&report]).as_bytes()).map_err(stdout_io)?;
    if let Some(p) = &a.sets_out {
        write_atomic(p, |w| write_prediction_sets_to(&sets, w))?;
    }
    if let Some(p) = &a.out {
        write_text(p, &to_json(&report)?)?;
    }
    Ok(())
}

fn cmd_attention(a: AttentionArgs, out: &mut dyn Write) -> Result<()> {
    let maps = HeatmapBatch::load(&a.heatmaps)?;
    let sets = read_prediction_sets(&a.sets)?;
    let sets = match a.sample_seed {
        Some(seed) => {
            if maps.count() > sets.len() {
                return Err(Error::Dimension {
                    expected: maps.count(),
                    actual: sets.len(),
                });
            }
            analysis_sample_indices(sets.len(), maps.count(), seed)
                .into_iter()
                .map(|i| sets[i].clone())
                .collect()
        }
        None => sets,
    };
    let report = attention_report(&maps, &sets)?;
    emit_json(&report, a.out.as_deref(), out)
}

fn cmd_simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let confusion_pairs = a
        .confuse
        .iter()
        .map(|s| s.parse::<ConfusionPair>())
        .collect::<Result<Vec<_>>>()?;
    let config = GeneratorConfig {
        n_classes: a.classes,
        n_samples: a.samples,
        seed: a.seed,
        sharpness: a.sharpness,
        confusion_pairs,
        noise_sd: a.noise,
        ambiguous_fraction: a.ambiguous_fraction,
    };
    config.validate()?;

    let Some(n_trials) = a.trials else {
        let data = generate(&config)?;
        return match &a.out {
            Some(p) => write_atomic(p, |w| write_logit_csv_to(&data, w)),
            None => write_logit_csv_to(&data, out).map_err(stdout_io),
        };
    };

    check_alpha(a.alpha)?;
    let params = MethodParams {
        method: a.method.parse()?,
        alpha: a.alpha,
        lambda: a.lambda,
        k_reg: a.k_reg,
        temperature: 1.0,
        force_top1: false,
    };
    let summary = coverage_trial(&config, &params, a.n_cal, a.n_test, n_trials)?;
    writeln!(
        out,
        "{} trials, {}: mean coverage {:.4} ± {:.4} (min {:.4}, max {:.4}), mean size {:.3}",
        summary.n_trials,
        params.method,
        summary.mean_coverage,
        summary.sd_coverage,
        summary.min_coverage,
        summary.max_coverage,
        summary.mean_size
    )
    .map_err(stdout_io)?;
    if let Some(p) = &a.out {
        write_text(p, &to_json(&summary)?)?;
    }
    Ok(())
}

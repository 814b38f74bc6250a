//! Datasets, splitting, and the on-disk formats for logits and prediction sets.
//!
//! Logit CSV: a header `label,logit_0,...,logit_{K-1}` followed by one row per
//! sample. Prediction sets: JSON lines of the form
//! `{"index":i,"label":y,"set":[...],"size":n,"covered":bool}`.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::util::write_atomic;

/// N×K matrix of raw classifier scores plus integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitDataset {
    n_classes: usize,
    logits: Vec<f64>,
    labels: Vec<usize>,
}

impl LogitDataset {
    /// Build from a row-major logit buffer of length `labels.len() * n_classes`.
    pub fn new(n_classes: usize, logits: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::Format(format!(
                "at least 2 classes are required, got {n_classes}"
            )));
        }
        if logits.len() != labels.len() * n_classes {
            return Err(Error::Dimension {
                expected: labels.len() * n_classes,
                actual: logits.len(),
            });
        }
        for (row, chunk) in logits.chunks_exact(n_classes).enumerate() {
            if let Some(v) = chunk.iter().find(|v| !v.is_finite()) {
                return Err(Error::Value {
                    row,
                    message: format!("non-finite logit {v}"),
                });
            }
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= n_classes) {
            return Err(Error::Label {
                row,
                label: label as i64,
                n_classes,
            });
        }
        Ok(Self {
            n_classes,
            logits,
            labels,
        })
    }

    /// Build from one logit vector per row.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::Dimension {
                expected: k,
                actual: bad.len(),
            });
        }
        if rows.len() != labels.len() {
            return Err(Error::Dimension {
                expected: rows.len(),
                actual: labels.len(),
            });
        }
        Self::new(k, rows.concat(), labels)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.logits[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.logits.chunks_exact(self.n_classes)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    /// Rows at `indices`, in the order given.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut logits = Vec::with_capacity(indices.len() * self.n_classes);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            logits.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self {
            n_classes: self.n_classes,
            logits,
            labels,
        }
    }

    /// Rows `range` as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            n_classes: self.n_classes,
            logits: self.logits[range.start * self.n_classes..range.end * self.n_classes].to_vec(),
            labels: self.labels[range].to_vec(),
        }
    }
}

/// Load a logit CSV. Row indices in errors are 0-based sample indices.
pub fn load_logit_csv(path: impl AsRef<Path>) -> Result<LogitDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_logit_csv(file)
}

/// Parse a logit CSV from any reader.
pub fn read_logit_csv<R: std::io::Read>(reader: R) -> Result<LogitDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Format(format!("unreadable header: {e}")))?
        .clone();
    if header.get(0) != Some("label") {
        return Err(Error::Format(
            "header must start with `label`".to_string(),
        ));
    }
    let k = header.len() - 1;
    for (j, name) in header.iter().skip(1).enumerate() {
        if name != format!("logit_{j}") {
            return Err(Error::Format(format!(
                "header column {} is `{name}`, expected `logit_{j}`",
                j + 1
            )));
        }
    }
    if k < 2 {
        return Err(Error::Format(format!(
            "at least 2 logit columns are required, got {k}"
        )));
    }

    let mut logits = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Format(format!("row {row}: {e}")))?;
        if record.len() != k + 1 {
            return Err(Error::Format(format!(
                "row {row} has {} fields, expected {}",
                record.len(),
                k + 1
            )));
        }
        let raw = &record[0];
        let label: i64 = raw.parse().map_err(|_| Error::Value {
            row,
            message: format!("label `{raw}` is not an integer"),
        })?;
        if label < 0 || label as u64 >= k as u64 {
            return Err(Error::Label {
                row,
                label,
                n_classes: k,
            });
        }
        labels.push(label as usize);
        for field in record.iter().skip(1) {
            let v: f64 = field.parse().map_err(|_| Error::Value {
                row,
                message: format!("logit `{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Value {
                    row,
                    message: format!("non-finite logit `{field}`"),
                });
            }
            logits.push(v);
        }
    }
    LogitDataset::new(k, logits, labels)
}

/// Write a logit CSV with every value printed to 17 significant digits.
pub fn write_logit_csv(data: &LogitDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_atomic(path, |w| write_logit_csv_to(data, w))
}

pub fn write_logit_csv_to(data: &LogitDataset, w: &mut dyn Write) -> std::io::Result<()> {
    write!(w, "label")?;
    for j in 0..data.n_classes() {
        write!(w, ",logit_{j}")?;
    }
    writeln!(w)?;
    for (row, &label) in data.rows().zip(data.labels()) {
        write!(w, "{label}")?;
        for v in row {
            write!(w, ",{v:.16e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Partition fractions (exact rationals) plus the shuffle seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    fractions: [Ratio<u64>; 3],
    seed: u64,
}

impl SplitSpec {
    /// Fractions given as `(numerator, denominator)` pairs for tune, cal, test.
    pub fn from_ratios(fractions: [(u64, u64); 3], seed: u64) -> Result<Self> {
        let mut out = [Ratio::from_integer(0); 3];
        for (slot, (num, den)) in out.iter_mut().zip(fractions) {
            if den == 0 {
                return Err(Error::Split("zero denominator".into()));
            }
            *slot = Ratio::new(num, den);
        }
        Self::checked(out, seed)
    }

    /// Parse a comma-separated list of three decimal fractions such as `0.5,0.3,0.2`.
    pub fn parse(list: &str, seed: u64) -> Result<Self> {
        let parts: Vec<&str> = list.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Split(format!(
                "expected three fractions (tune,cal,test), got {}",
                parts.len()
            )));
        }
        let mut out = [Ratio::from_integer(0); 3];
        for (slot, p) in out.iter_mut().zip(&parts) {
            *slot = parse_decimal(p)?;
        }
        Self::checked(out, seed)
    }

    /// 50/50 tune/cal split with no test partition.
    pub fn halves(seed: u64) -> Self {
        Self {
            fractions: [Ratio::new(1, 2), Ratio::new(1, 2), Ratio::from_integer(0)],
            seed,
        }
    }

    fn checked(fractions: [Ratio<u64>; 3], seed: u64) -> Result<Self> {
        let total = fractions[0] + fractions[1] + fractions[2];
        if total != Ratio::from_integer(1) {
            return Err(Error::Split(format!(
                "fractions must sum to 1, got {total}"
            )));
        }
        Ok(Self { fractions, seed })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fractions(&self) -> [f64; 3] {
        self.fractions
            .map(|r| *r.numer() as f64 / *r.denom() as f64)
    }

    /// Fractions in reduced `num/den` form.
    pub fn fraction_strings(&self) -> [String; 3] {
        self.fractions.map(|r| r.to_string())
    }

    /// Slice boundaries `floor(N*tune)` and `floor(N*(tune+cal))`, computed exactly.
    pub fn cut_points(&self, n: usize) -> (usize, usize) {
        let floor = |r: Ratio<u64>| (n as u128 * *r.numer() as u128 / *r.denom() as u128) as usize;
        (
            floor(self.fractions[0]),
            floor(self.fractions[0] + self.fractions[1]),
        )
    }

    /// Shuffle `0..n` and slice it into the three partitions. Each partition
    /// lists its indices in ascending order, so original row order survives.
    /// Partitions may be empty.
    pub fn partition(&self, n: usize) -> [Vec<usize>; 3] {
        let perm = rng::shuffled_indices(n, self.seed);
        let (a, b) = self.cut_points(n);
        let mut parts = [perm[..a].to_vec(), perm[a..b].to_vec(), perm[b..].to_vec()];
        for p in &mut parts {
            p.sort_unstable();
        }
        parts
    }
}

impl fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.fractions();
        write!(f, "{a},{b},{c} (seed {})", self.seed)
    }
}

fn parse_decimal(s: &str) -> Result<Ratio<u64>> {
    let bad = || Error::Split(format!("`{s}` is not a decimal fraction"));
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 12 {
        return Err(bad());
    }
    let int: u64 = if int.is_empty() { 0 } else { u64::from_str(int).map_err(|_| bad())? };
    let den = 10u64.pow(frac.len() as u32);
    let frac_num: u64 = if frac.is_empty() { 0 } else { u64::from_str(frac).map_err(|_| bad())? };
    let num = int.checked_mul(den).and_then(|v| v.checked_add(frac_num)).ok_or_else(bad)?;
    Ok(Ratio::new(num, den))
}

/// Split into (tune, cal, test). Every partition must be non-empty.
pub fn split_dataset(
    data: &LogitDataset,
    spec: &SplitSpec,
) -> Result<(LogitDataset, LogitDataset, LogitDataset)> {
    let parts = spec.partition(data.n_samples());
    for (name, p) in ["tune", "cal", "test"].iter().zip(&parts) {
        if p.is_empty() {
            return Err(Error::Split(format!(
                "{name} partition is empty for N={} with fractions {spec}",
                data.n_samples()
            )));
        }
    }
    let [a, b, c] = parts;
    Ok((data.subset(&a), data.subset(&b), data.subset(&c)))
}

/// A per-sample subset of class indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet {
    #[serde(rename = "index")]
    pub sample_index: usize,
    pub label: Option<usize>,
    #[serde(rename = "set")]
    pub classes: Vec<usize>,
    pub size: usize,
    pub covered: bool,
}

impl PredictionSet {
    /// `classes` is sorted and deduplicated; `covered` is derived from `label`.
    pub fn new(sample_index: usize, mut classes: Vec<usize>, label: Option<usize>) -> Self {
        classes.sort_unstable();
        classes.dedup();
        let covered = label.is_some_and(|y| classes.binary_search(&y).is_ok());
        Self {
            sample_index,
            label,
            size: classes.len(),
            classes,
            covered,
        }
    }

    pub fn contains(&self, class: usize) -> bool {
        self.classes.binary_search(&class).is_ok()
    }

    pub fn is_singleton(&self) -> bool {
        self.size == 1
    }
}

/// Write prediction sets as JSON lines in the given order.
pub fn write_prediction_sets(sets: &[PredictionSet], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), |w| write_prediction_sets_to(sets, w))
}

pub fn write_prediction_sets_to(sets: &[PredictionSet], w: &mut dyn Write) -> std::io::Result<()> {
    for s in sets {
        serde_json::to_writer(&mut *w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Read a JSON-lines prediction-set file. `size` and `covered` are checked
/// against `set` and `label`.
pub fn read_prediction_sets(path: impl AsRef<Path>) -> Result<Vec<PredictionSet>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (row, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: PredictionSet = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("prediction set line {row}: {e}")))?;
        let check = PredictionSet::new(raw.sample_index, raw.classes.clone(), raw.label);
        if check.classes != raw.classes || check.size != raw.size || check.covered != raw.covered {
            return Err(Error::Value {
                row,
                message: "inconsistent set/size/covered fields".into(),
            });
        }
        out.push(raw);
    }
    Ok(out)
}

//! Partner datasets: CSV ingestion, norm-bounding normalization, synthetic
//! multi-partner generation and stratified splitting.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::sigmoid;
use crate::rng::{child_rng, rng_from_seed};

/// Slack allowed on the unit-norm bound after normalization.
pub const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Period {
    RampedUp,
    ColdStart,
}

impl Period {
    /// Tag used in `<partner>_<tag>.csv` file names.
    pub fn file_tag(self) -> &'static str {
        match self {
            Period::RampedUp => "ramped",
            Period::ColdStart => "cold",
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.file_tag())
    }
}

impl FromStr for Period {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ramped" => Ok(Period::RampedUp),
            "cold" => Ok(Period::ColdStart),
            other => Err(Error::Schema(format!("unknown period tag {other:?}"))),
        }
    }
}

/// One silo's records. `x` has `d` columns while raw and `d + 1` (bias last)
/// once normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct PartnerDataset {
    pub partner_id: String,
    pub period: Period,
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub d: usize,
}

impl PartnerDataset {
    pub fn new(partner_id: impl Into<String>, period: Period, x: Array2<f64>, y: Array1<f64>, d: usize) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Dimension {
                expected: x.nrows(),
                actual: y.len(),
            });
        }
        if x.ncols() != d && x.ncols() != d + 1 {
            return Err(Error::Dimension {
                expected: d,
                actual: x.ncols(),
            });
        }
        if let Some(bad) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidDataset(format!("label {bad} is not in {{0, 1}}")));
        }
        Ok(PartnerDataset {
            partner_id: partner_id.into(),
            period,
            x,
            y,
            d,
        })
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.x.ncols() == self.d + 1
    }

    pub fn positives(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1.0).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let p = self.positives();
        p > 0 && p < self.m()
    }

    /// Fails with a precondition error if any row has norm above `1 + NORM_TOLERANCE`.
    pub fn check_unit_rows(&self) -> Result<()> {
        for (i, row) in self.x.rows().into_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            if norm > 1.0 + NORM_TOLERANCE {
                return Err(Error::Precondition(format!(
                    "record {i} of partner {} has norm {norm} > 1; normalize first",
                    self.partner_id
                )));
            }
        }
        Ok(())
    }

    /// Copies the given rows into a new dataset with the same metadata.
    pub fn select(&self, rows: &[usize]) -> PartnerDataset {
        PartnerDataset {
            partner_id: self.partner_id.clone(),
            period: self.period,
            x: self.x.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
            d: self.d,
        }
    }

    /// Applies [`normalize_records`] and keeps the labels of surviving rows.
    pub fn normalized(&self, cfg: &NormalizationConfig) -> Result<PartnerDataset> {
        let out = normalize_records(self.x.view(), self.d, cfg)?;
        Ok(PartnerDataset {
            partner_id: self.partner_id.clone(),
            period: self.period,
            x: out.x,
            y: self.y.select(Axis(0), &out.kept),
            d: self.d,
        })
    }

    pub fn file_name(&self) -> String {
        format!("{}_{}.csv", self.partner_id, self.period.file_tag())
    }
}

/// Squared-norm outlier threshold `t_norm` and bias value `bias`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationConfig {
    pub t_norm: f64,
    pub bias: f64,
}

impl NormalizationConfig {
    pub fn new(t_norm: f64, bias: f64) -> Result<Self> {
        if !(t_norm > 0.0) || !(bias > 0.0) || !t_norm.is_finite() || !bias.is_finite() {
            return Err(Error::Configuration(format!(
                "normalization needs t_norm > 0 and bias > 0 (got {t_norm}, {bias})"
            )));
        }
        Ok(NormalizationConfig { t_norm, bias })
    }

    fn scale(&self) -> f64 {
        self.t_norm.sqrt() + self.bias
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedRecords {
    pub x: Array2<f64>,
    /// Indices of the input rows that survived the outlier filter, in order.
    pub kept: Vec<usize>,
}

/// Drops rows with `Σx² > t`, appends the bias `v` and divides everything by
/// `√t + v`, which bounds every surviving row's norm by one.
pub fn normalize_records(
    x_raw: ArrayView2<'_, f64>,
    d: usize,
    cfg: &NormalizationConfig,
) -> Result<NormalizedRecords> {
    cfg.validate_inner()?;
    if x_raw.ncols() == d + 1 {
        return Err(Error::Precondition(format!(
            "input already has {} columns (bias present); refusing to normalize twice",
            d + 1
        )));
    }
    if x_raw.ncols() != d {
        return Err(Error::Dimension {
            expected: d,
            actual: x_raw.ncols(),
        });
    }
    let kept: Vec<usize> = x_raw
        .rows()
        .into_iter()
        .enumerate()
        .filter(|(_, row)| row.dot(row) <= cfg.t_norm)
        .map(|(i, _)| i)
        .collect();
    if kept.is_empty() {
        return Err(Error::InvalidDataset(
            "every record exceeded the outlier threshold".into(),
        ));
    }
    let scale = cfg.scale();
    let mut x = Array2::<f64>::zeros((kept.len(), d + 1));
    for (out_row, &i) in x.rows_mut().into_iter().zip(&kept) {
        let mut out_row = out_row;
        for (j, v) in x_raw.row(i).iter().enumerate() {
            out_row[j] = v / scale;
        }
        out_row[d] = cfg.bias / scale;
    }
    Ok(NormalizedRecords { x, kept })
}

impl NormalizationConfig {
    fn validate_inner(&self) -> Result<()> {
        NormalizationConfig::new(self.t_norm, self.bias).map(|_| ())
    }
}

/// Threshold picked as the `quantile` of squared row norms over a public
/// reference sample. Never computed from partner data.
pub fn reference_threshold(reference: ArrayView2<'_, f64>, quantile: f64) -> Result<f64> {
    if reference.nrows() == 0 {
        return Err(Error::InvalidDataset("empty reference sample".into()));
    }
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::Configuration(format!("quantile {quantile} outside [0, 1]")));
    }
    let mut sq: Vec<f64> = reference.rows().into_iter().map(|r| r.dot(&r)).collect();
    sq.sort_by(f64::total_cmp);
    let pos = quantile * (sq.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(sq[lo] + (sq[hi] - sq[lo]) * (pos - lo as f64))
}

// ---------------------------------------------------------------------------
// CSV

fn parse_file_name(path: &Path) -> Result<(String, Period)> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Schema(format!("unusable file name {}", path.display())))?;
    let (partner, tag) = stem.rsplit_once('_').ok_or_else(|| {
        Error::Schema(format!(
            "file name {stem:?} does not follow <partner>_<ramped|cold>.csv"
        ))
    })?;
    if partner.is_empty() {
        return Err(Error::Schema(format!("file name {stem:?} has an empty partner id")));
    }
    Ok((partner.to_string(), tag.parse()?))
}

/// Reads `f1..fd,label` rows. Row numbers in errors count data rows from 1.
pub fn load_partner_csv(path: impl AsRef<Path>, expected_d: usize) -> Result<PartnerDataset> {
    let path = path.as_ref();
    let (partner_id, period) = parse_file_name(path)?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));

    let header = reader
        .headers()
        .map_err(|e| Error::Schema(format!("missing header row: {e}")))?
        .clone();
    if header.len() != expected_d + 1 {
        return Err(Error::Schema(format!(
            "expected {} columns (f1..f{expected_d},label), header has {}",
            expected_d + 1,
            header.len()
        )));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::Schema(format!("row {row}: {e}")))?;
        if record.len() != expected_d + 1 {
            return Err(Error::Schema(format!(
                "row {row} has {} columns, expected {}",
                record.len(),
                expected_d + 1
            )));
        }
        for cell in record.iter().take(expected_d) {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                message: format!("non-numeric cell {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    message: format!("non-finite cell {cell:?}"),
                });
            }
            values.push(v);
        }
        let label_cell = record[expected_d].trim();
        let label = match label_cell.parse::<f64>() {
            Ok(v) if v == 0.0 || v == 1.0 => v,
            _ => {
                return Err(Error::Parse {
                    row,
                    message: format!("label {label_cell:?} is not 0 or 1"),
                })
            }
        };
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::InvalidDataset(format!("{} has no records", path.display())));
    }
    let x = Array2::from_shape_vec((labels.len(), expected_d), values)
        .map_err(|e| Error::Schema(e.to_string()))?;
    PartnerDataset::new(partner_id, period, x, Array1::from(labels), expected_d)
}

/// Writes a raw dataset as `<dir>/<partner>_<period>.csv` and returns the path.
pub fn write_partner_csv(data: &PartnerDataset, dir: impl AsRef<Path>) -> Result<PathBuf> {
    if data.is_normalized() {
        return Err(Error::Precondition(
            "only raw (unnormalized) datasets are written to CSV".into(),
        ));
    }
    let path = dir.as_ref().join(data.file_name());
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| Error::Serialization(e.to_string());

    let mut header: Vec<String> = (1..=data.d).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    writer.write_record(&header).map_err(csv_err)?;
    let mut cells = Vec::with_capacity(data.d + 1);
    for (row, label) in data.x.rows().into_iter().zip(data.y.iter()) {
        cells.clear();
        cells.extend(row.iter().map(|v| v.to_string()));
        cells.push(format!("{}", *label as u8));
        writer.write_record(&cells).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// Splitting

#[derive(Debug, Clone)]
pub struct TrainTestSplit {
    pub train: PartnerDataset,
    pub test: PartnerDataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    /// False when a class had fewer than two members and the split fell back
    /// to plain shuffling.
    pub stratified: bool,
}

/// Label-stratified split; test size is `round(test_fraction · m)` clamped to `[1, m-1]`.
pub fn train_test_split(data: &PartnerDataset, test_fraction: f64, seed: u64) -> Result<TrainTestSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Configuration(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let m = data.m();
    if m < 2 {
        return Err(Error::InvalidDataset(format!("cannot split {m} record(s)")));
    }
    let n_test = ((test_fraction * m as f64).round() as usize).clamp(1, m - 1);
    let mut rng = rng_from_seed(seed);

    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = (0..m).partition(|&i| data.y[i] == 1.0);
    let stratified = pos.len() >= 2 && neg.len() >= 2;

    let mut test_indices = if stratified {
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        let take_pos = ((n_test as f64 * pos.len() as f64 / m as f64).round() as usize)
            .clamp(1, pos.len() - 1);
        let take_neg = n_test.saturating_sub(take_pos).clamp(1, neg.len() - 1);
        let mut t: Vec<usize> = pos[..take_pos].to_vec();
        t.extend_from_slice(&neg[..take_neg]);
        t
    } else {
        let mut all: Vec<usize> = (0..m).collect();
        all.shuffle(&mut rng);
        all.truncate(n_test);
        all
    };
    test_indices.sort_unstable();
    let mut is_test = vec![false; m];
    for &i in &test_indices {
        is_test[i] = true;
    }
    let train_indices: Vec<usize> = (0..m).filter(|&i| !is_test[i]).collect();
    Ok(TrainTestSplit {
        train: data.select(&train_indices),
        test: data.select(&test_indices),
        train_indices,
        test_indices,
        stratified,
    })
}

// ---------------------------------------------------------------------------
// Synthetic partners

/// Settings for the synthetic stand-in for real partner data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_partners: usize,
    pub d: usize,
    /// Inclusive range for ramped-up sizes, sampled log-uniformly.
    pub size_range: (usize, usize),
    /// Cold-start size as a fraction of the ramped-up size.
    pub cold_fraction: f64,
    pub min_cold_size: usize,
    /// Per-partner deviation of the labelling weights, relative to the shared weights' scale.
    pub shift_scale: f64,
    /// Norm of the shared raw-space weight vector.
    pub signal: f64,
    /// Standard deviation of partner feature means.
    pub mean_scale: f64,
    /// Log-standard-deviation of partner feature scales.
    pub scale_spread: f64,
    /// Positive rate at the population centre (sets the shared intercept).
    pub base_rate: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_partners: 38,
            d: 19,
            size_range: (10_000, 1_000_000),
            cold_fraction: 1.0 / 12.0,
            min_cold_size: 40,
            shift_scale: 0.3,
            signal: 2.0,
            mean_scale: 0.3,
            scale_spread: 0.2,
            base_rate: 0.3,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Configuration(msg));
        if self.n_partners < 2 {
            return bad(format!("need at least 2 partners, got {}", self.n_partners));
        }
        if self.d == 0 {
            return bad("feature count must be positive".into());
        }
        let (lo, hi) = self.size_range;
        if lo < 2 || hi < lo {
            return bad(format!("invalid size range ({lo}, {hi})"));
        }
        if !(self.cold_fraction > 0.0 && self.cold_fraction <= 1.0) {
            return bad(format!("cold fraction {} outside (0, 1]", self.cold_fraction));
        }
        if self.min_cold_size < 2 || self.min_cold_size > lo {
            return bad(format!(
                "min cold size {} must lie in [2, {lo}]",
                self.min_cold_size
            ));
        }
        for (name, v) in [
            ("shift_scale", self.shift_scale),
            ("signal", self.signal),
            ("mean_scale", self.mean_scale),
            ("scale_spread", self.scale_spread),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be a finite non-negative number, got {v}"));
            }
        }
        if !(self.base_rate > 0.0 && self.base_rate < 1.0) {
            return bad(format!("base rate {} outside (0, 1)", self.base_rate));
        }
        Ok(())
    }
}

/// A partner's full-year pool and the cold-start subsample drawn from it.
#[derive(Debug, Clone)]
pub struct PartnerPair {
    pub ramped: PartnerDataset,
    pub cold: PartnerDataset,
}

/// Deterministic generator that can produce partners one at a time, so large
/// pools never need to be resident together.
#[derive(Debug, Clone)]
pub struct SyntheticGenerator {
    cfg: SyntheticConfig,
    seed: u64,
    shared_weights: Array1<f64>,
    shared_intercept: f64,
}

pub fn partner_id(index: usize) -> String {
    format!("p{index:02}")
}

fn gaussian_vec<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> Array1<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

impl SyntheticGenerator {
    pub fn new(cfg: SyntheticConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = child_rng(seed, "shared", "generator", 0);
        let raw = gaussian_vec(cfg.d, 1.0, &mut rng);
        let norm = raw.dot(&raw).sqrt().max(f64::MIN_POSITIVE);
        let shared_weights = raw * (cfg.signal / norm);
        let shared_intercept = (cfg.base_rate / (1.0 - cfg.base_rate)).ln();
        Ok(SyntheticGenerator {
            cfg,
            seed,
            shared_weights,
            shared_intercept,
        })
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.cfg
    }

    pub fn n_partners(&self) -> usize {
        self.cfg.n_partners
    }

    pub fn shared_weights(&self) -> &Array1<f64> {
        &self.shared_weights
    }

    /// Public reference sample from the population centre (zero mean, unit
    /// scale), used only to choose the normalization threshold.
    pub fn reference_sample(&self, n: usize) -> Array2<f64> {
        let mut rng = child_rng(self.seed, "reference", "generator", 0);
        Array2::from_shape_fn((n, self.cfg.d), |_| rng.sample::<f64, _>(StandardNormal))
    }

    /// Ramped-up size of partner `index` without generating its records.
    pub fn ramped_size(&self, index: usize) -> usize {
        let mut rng = child_rng(self.seed, &partner_id(index), "size", 0);
        let (lo, hi) = self.cfg.size_range;
        let u: f64 = rng.random();
        let size = ((lo as f64).ln() + u * ((hi as f64).ln() - (lo as f64).ln())).exp();
        (size.round() as usize).clamp(lo, hi)
    }

    pub fn cold_size(&self, index: usize) -> usize {
        let m = self.ramped_size(index);
        ((self.cfg.cold_fraction * m as f64).round() as usize)
            .max(self.cfg.min_cold_size)
            .min(m)
    }

    pub fn partner(&self, index: usize) -> Result<PartnerPair> {
        if index >= self.cfg.n_partners {
            return Err(Error::Configuration(format!(
                "partner index {index} out of range (n = {})",
                self.cfg.n_partners
            )));
        }
        let id = partner_id(index);
        let d = self.cfg.d;
        let mut rng = child_rng(self.seed, &id, "population", 0);
        let shift_unit = self.cfg.signal / (d as f64).sqrt();
        let weights = &self.shared_weights + &gaussian_vec(d, self.cfg.shift_scale * shift_unit, &mut rng);
        let intercept =
            self.shared_intercept + self.cfg.shift_scale * shift_unit * rng.sample::<f64, _>(StandardNormal);
        let means = gaussian_vec(d, self.cfg.mean_scale, &mut rng);
        let scales = gaussian_vec(d, self.cfg.scale_spread, &mut rng).mapv(f64::exp);
        // The mean shift alone would move the positive rate; recentre so that
        // a partner's average margin matches the shared intercept.
        let intercept = intercept - weights.dot(&means);

        let m = self.ramped_size(index);
        let mut rng = child_rng(self.seed, &id, "records", 0);
        let mut x = Array2::<f64>::zeros((m, d));
        let mut y = Array1::<f64>::zeros(m);
        for (mut row, label) in x.rows_mut().into_iter().zip(y.iter_mut()) {
            for j in 0..d {
                row[j] = means[j] + scales[j] * rng.sample::<f64, _>(StandardNormal);
            }
            let p = sigmoid(row.dot(&weights) + intercept);
            let draw = Bernoulli::new(p.clamp(0.0, 1.0)).expect("probability in [0, 1]");
            *label = if draw.sample(&mut rng) { 1.0 } else { 0.0 };
        }
        let ramped = PartnerDataset::new(id.clone(), Period::RampedUp, x, y, d)?;

        let mut rng = child_rng(self.seed, &id, "cold-subsample", 0);
        let mut cold_rows = rand::seq::index::sample(&mut rng, m, self.cold_size(index)).into_vec();
        cold_rows.sort_unstable();
        let mut cold = ramped.select(&cold_rows);
        cold.period = Period::ColdStart;
        Ok(PartnerPair { ramped, cold })
    }
}

/// Generates every partner's (ramped-up, cold-start) pair.
pub fn generate_synthetic_partners(cfg: &SyntheticConfig, seed: u64) -> Result<Vec<PartnerPair>> {
    let generator = SyntheticGenerator::new(cfg.clone(), seed)?;
    (0..generator.n_partners()).map(|k| generator.partner(k)).collect()
}

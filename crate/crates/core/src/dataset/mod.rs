//! Tabular credit data: ingestion, sentinel imputation, scaling and
//! stratified holdout splits.

mod io;
mod synth;

pub use io::{find_fico_csv, load_csv, read_csv, write_csv, FICO_FILE_NAME, TARGET_COLUMN};
pub use synth::{synthesize, FeatureGen, GenerativeSpec, GroundTruth, Synthetic};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::rng_from;
use rand::seq::SliceRandom;

/// The 23 HELOC predictors in canonical column order, paired with their
/// human-readable descriptions.
pub const FICO_FEATURES: [(&str, &str); 23] = [
    ("ExternalRiskEstimate", "Consolidated version of risk markers"),
    ("MSinceOldestTradeOpen", "Since Oldest Trade Open"),
    ("MSinceMostRecentTradeOpen", "Since Most Recent Trade Open"),
    ("AverageMInFile", "Average Months in File"),
    ("NumSatisfactoryTrades", "Number Satisfactory Trades"),
    ("NumTrades60Ever2DerogPubRec", "Number Trades 60+ Ever"),
    ("NumTrades90Ever2DerogPubRec", "Number Trades 90+ Ever"),
    ("PercentTradesNeverDelq", "Percent Trades Never Delinquent"),
    ("MSinceMostRecentDelq", "Months Since Most Recent Delinquency"),
    ("MaxDelq2PublicRecLast12M", "Max Delq/Public Records Last 12 Months"),
    ("MaxDelqEver", "Max Delinquency Ever"),
    (
        "NumTotalTrades",
        "Number of Total Trades (total number of credit accounts)",
    ),
    ("NumTradesOpeninLast12M", "Number of Trades Open in Last 12 Months"),
    ("PercentInstallTrades", "Percent Installment Trades"),
    (
        "MSinceMostRecentInqexcl7days",
        "Months Since Most Recent Inq excl 7days",
    ),
    ("NumInqLast6M", "Number of Inq Last 6 Months"),
    ("NumInqLast6Mexcl7days", "Number of Inq Last 6 Months excl 7days"),
    ("NetFractionRevolvingBurden", "Net Fraction Revolving Burden"),
    ("NetFractionInstallBurden", "Net Fraction Installment Burden"),
    ("NumRevolvingTradesWBalance", "Number Revolving Trades with Balance"),
    ("NumInstallTradesWBalance", "Number Installment Trades with Balance"),
    (
        "NumBank2NatlTradesWHighUtilization",
        "Number Bank/Natl Trades w high utilization ratio",
    ),
    ("PercentTradesWBalance", "Percent Trades with Balance"),
];

/// Description of the target column.
pub const TARGET_DESCRIPTION: &str = "Paid as negotiated flag (12-36 Months)";

/// FICO special values: no record, not applicable, no usable trades.
pub const SENTINELS: [f64; 3] = [-7.0, -8.0, -9.0];

pub fn fico_feature_names() -> Vec<String> {
    FICO_FEATURES.iter().map(|(n, _)| n.to_string()).collect()
}

pub fn feature_description(name: &str) -> Option<&'static str> {
    FICO_FEATURES.iter().find(|(n, _)| *n == name).map(|(_, d)| *d)
}

pub fn is_sentinel(v: f64) -> bool {
    SENTINELS.contains(&v)
}

/// Rectangular feature matrix with a binary target.
///
/// `target` is 1 for a 90-day delinquency ("Bad") and 0 otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    feature_names: Vec<String>,
    values: Vec<f64>,
    target: Vec<u8>,
    special_mask: Vec<bool>,
}

impl FeatureTable {
    pub fn new(feature_names: Vec<String>, values: Vec<f64>, target: Vec<u8>) -> Result<Self> {
        let n_features = feature_names.len();
        if n_features == 0 {
            return Err(Error::Schema("table has no feature columns".into()));
        }
        if values.len() != target.len() * n_features {
            return Err(Error::Schema(format!(
                "value count {} does not match {} rows x {} features",
                values.len(),
                target.len(),
                n_features
            )));
        }
        if let Some(t) = target.iter().find(|&&t| t > 1) {
            return Err(Error::Data(format!("target value {t} is not binary")));
        }
        let special_mask = vec![false; values.len()];
        Ok(Self {
            feature_names,
            values,
            target,
            special_mask,
        })
    }

    /// Builds a table from row vectors.
    pub fn from_rows(feature_names: Vec<String>, rows: &[Vec<f64>], target: Vec<u8>) -> Result<Self> {
        let d = feature_names.len();
        let mut values = Vec::with_capacity(rows.len() * d);
        for row in rows {
            check_dim(d, row.len())?;
            values.extend_from_slice(row);
        }
        Self::new(feature_names, values, target)
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn target(&self) -> &[u8] {
        &self.target
    }

    pub fn special_mask(&self) -> &[bool] {
        &self.special_mask
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_features())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_features() + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows().map(|r| r[col]).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Fraction of rows labelled 1.
    pub fn positive_rate(&self) -> f64 {
        if self.target.is_empty() {
            return 0.0;
        }
        self.target.iter().map(|&t| t as f64).sum::<f64>() / self.n_rows() as f64
    }

    /// Sub-table with the given rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let d = self.n_features();
        let mut values = Vec::with_capacity(idx.len() * d);
        let mut mask = Vec::with_capacity(idx.len() * d);
        let mut target = Vec::with_capacity(idx.len());
        for &i in idx {
            values.extend_from_slice(self.row(i));
            mask.extend_from_slice(&self.special_mask[i * d..(i + 1) * d]);
            target.push(self.target[i]);
        }
        Self {
            feature_names: self.feature_names.clone(),
            values,
            target,
            special_mask: mask,
        }
    }

    /// Per-feature column means.
    pub fn column_means(&self) -> Vec<f64> {
        let d = self.n_features();
        let mut acc = vec![0.0; d];
        for r in self.rows() {
            for (a, v) in acc.iter_mut().zip(r) {
                *a += v;
            }
        }
        let n = self.n_rows().max(1) as f64;
        acc.iter().map(|a| a / n).collect()
    }

    fn check_both_classes(&self) -> Result<()> {
        let pos = self.target.iter().filter(|&&t| t == 1).count();
        if pos == 0 || pos == self.n_rows() {
            return Err(Error::Data("target must contain both classes".into()));
        }
        Ok(())
    }
}

/// Replaces every sentinel cell by the median of the column's regular
/// values and marks it in the special mask.
///
/// Idempotent: a table without sentinels passes through unchanged.
pub fn impute_special(table: &FeatureTable) -> Result<FeatureTable> {
    let mut out = table.clone();
    let d = table.n_features();
    for col in 0..d {
        let column = table.column(col);
        if !column.iter().any(|&v| is_sentinel(v)) {
            continue;
        }
        let mut regular: Vec<f64> = column.iter().copied().filter(|&v| !is_sentinel(v)).collect();
        if regular.is_empty() {
            return Err(Error::Data(format!(
                "feature `{}` holds only special values",
                table.feature_names[col]
            )));
        }
        regular.sort_by(f64::total_cmp);
        let fill = median_non_sentinel(&regular);
        for (row, &v) in column.iter().enumerate() {
            if is_sentinel(v) {
                out.values[row * d + col] = fill;
                out.special_mask[row * d + col] = true;
            }
        }
    }
    Ok(out)
}

// The midpoint of two regular values can itself land on a sentinel
// (e.g. -10 and -6); fall back to the lower middle value then.
fn median_non_sentinel(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        return sorted[n / 2];
    }
    let m = 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    if is_sentinel(m) {
        sorted[n / 2 - 1]
    } else {
        m
    }
}

/// Per-feature affine scaling learned from a raw table.
///
/// Raw min/max are kept for uniform reference sampling in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    /// All input columns, in input order.
    pub input_names: Vec<String>,
    /// Indices into `input_names` of the retained features.
    pub kept: Vec<usize>,
    /// Input columns dropped for being constant.
    pub dropped: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerParams {
    pub fn n_features(&self) -> usize {
        self.kept.len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.kept.iter().map(|&i| self.input_names[i].clone()).collect()
    }

    /// Scales a raw vector over the retained features.
    pub fn to_standard(&self, raw: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_features(), raw.len())?;
        Ok(raw
            .iter()
            .enumerate()
            .map(|(j, v)| (v - self.mean[j]) / self.std[j])
            .collect())
    }

    pub fn to_raw(&self, standard: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_features(), standard.len())?;
        Ok(standard
            .iter()
            .enumerate()
            .map(|(j, z)| z * self.std[j] + self.mean[j])
            .collect())
    }

    /// Applies the scaling to a raw table with the same input columns.
    pub fn apply(&self, raw: &FeatureTable) -> Result<FeatureTable> {
        if raw.feature_names != self.input_names {
            return Err(Error::Schema("table columns differ from the fitted scaler".into()));
        }
        let d_in = raw.n_features();
        let d = self.n_features();
        let mut values = Vec::with_capacity(raw.n_rows() * d);
        let mut mask = Vec::with_capacity(raw.n_rows() * d);
        for (i, r) in raw.rows().enumerate() {
            for (j, &src) in self.kept.iter().enumerate() {
                values.push((r[src] - self.mean[j]) / self.std[j]);
                mask.push(raw.special_mask[i * d_in + src]);
            }
        }
        Ok(FeatureTable {
            feature_names: self.feature_names(),
            values,
            target: raw.target.clone(),
            special_mask: mask,
        })
    }

    /// Maps a standardized table back to raw units (retained columns only).
    pub fn inverse(&self, standard: &FeatureTable) -> Result<FeatureTable> {
        check_dim(self.n_features(), standard.n_features())?;
        let mut out = standard.clone();
        let d = self.n_features();
        for (k, v) in out.values.iter_mut().enumerate() {
            let j = k % d;
            *v = *v * self.std[j] + self.mean[j];
        }
        Ok(out)
    }
}

/// Fits a per-feature scaler (population moments) and applies it.
///
/// Constant columns are dropped with a warning and listed in
/// [`ScalerParams::dropped`].
pub fn standardize(table: &FeatureTable) -> Result<(FeatureTable, ScalerParams)> {
    if table.n_rows() < 2 {
        return Err(Error::Argument("need at least two rows to standardize".into()));
    }
    if table.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("table contains non-finite values".into()));
    }
    let n = table.n_rows() as f64;
    let mut params = ScalerParams {
        input_names: table.feature_names.clone(),
        kept: Vec::new(),
        dropped: Vec::new(),
        mean: Vec::new(),
        std: Vec::new(),
        min: Vec::new(),
        max: Vec::new(),
    };
    for col in 0..table.n_features() {
        let column = table.column(col);
        let mean = column.iter().sum::<f64>() / n;
        let var = column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        let (min, max) = column.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        if min == max || std <= f64::EPSILON * mean.abs().max(1.0) {
            log::warn!("dropping constant feature `{}`", table.feature_names[col]);
            params.dropped.push(table.feature_names[col].clone());
            continue;
        }
        params.kept.push(col);
        params.mean.push(mean);
        params.std.push(std);
        params.min.push(min);
        params.max.push(max);
    }
    if params.kept.is_empty() {
        return Err(Error::Data("every feature is constant".into()));
    }
    let scaled = params.apply(table)?;
    Ok((scaled, params))
}

/// Stratified holdout split. Returns `(train, validation)`.
///
/// The validation side receives `round(holdout_fraction * rows)` rows,
/// allocated across classes by largest remainder. Both sides keep the
/// original row order.
pub fn split(table: &FeatureTable, holdout_fraction: f64, seed: u64) -> Result<(FeatureTable, FeatureTable)> {
    let (train, val) = split_indices(table, holdout_fraction, seed)?;
    Ok((table.select_rows(&train), table.select_rows(&val)))
}

/// Row indices of a stratified split, as `(train, validation)`.
pub fn split_indices(table: &FeatureTable, holdout_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::Argument(format!(
            "holdout fraction must lie in (0, 1), got {holdout_fraction}"
        )));
    }
    let n = table.n_rows();
    let n_val = (holdout_fraction * n as f64).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::Argument(format!(
            "holdout fraction {holdout_fraction} on {n} rows leaves one side empty"
        )));
    }

    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &t) in table.target.iter().enumerate() {
        by_class[t as usize].push(i);
    }
    let exact: Vec<f64> = by_class.iter().map(|c| holdout_fraction * c.len() as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
    let mut short = n_val.saturating_sub(quota.iter().sum());
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    for &c in order.iter().cycle().take(4) {
        if short == 0 {
            break;
        }
        if quota[c] < by_class[c].len() {
            quota[c] += 1;
            short -= 1;
        }
    }

    let mut rng = rng_from(seed);
    let mut val = Vec::with_capacity(n_val);
    let mut train = Vec::with_capacity(n - n_val);
    for (c, idx) in by_class.iter().enumerate() {
        let mut shuffled = idx.clone();
        shuffled.shuffle(&mut rng);
        val.extend_from_slice(&shuffled[..quota[c]]);
        train.extend_from_slice(&shuffled[quota[c]..]);
    }
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

/// Impute + standardize, the preprocessing applied before any training.
pub fn prepare(raw: &FeatureTable) -> Result<(FeatureTable, FeatureTable, ScalerParams)> {
    raw.check_both_classes()?;
    let imputed = impute_special(raw)?;
    let (scaled, params) = standardize(&imputed)?;
    Ok((imputed, scaled, params))
}

//! Steps shared by the subcommands: load, preprocess, split, fit.

use std::fs;
use std::path::Path;

use credattr::dataset::{self, GenerativeSpec, GroundTruth, TARGET_COLUMN};
use credattr::model::{self, default_grid, train_logistic, train_mlp};
use credattr::{Classifier, FeatureTable, LinearModel, MlpModel, ScalerParams};
use serde::Serialize;

use crate::config::{DataSource, RunConfig};
use crate::error::{CliError, CliResult};

pub const LINEAR_MODEL_FILE: &str = "linear_model.json";
pub const MLP_MODEL_FILE: &str = "mlp_model.json";

pub struct Loaded {
    pub raw: FeatureTable,
    pub truth: Option<GroundTruth>,
    pub spec: Option<GenerativeSpec>,
}

pub fn load(cfg: &RunConfig) -> CliResult<Loaded> {
    match &cfg.data {
        DataSource::Csv { path } => {
            log::info!("reading {}", path.display());
            let raw = dataset::load_csv(path, TARGET_COLUMN)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            Ok(Loaded {
                raw,
                truth: None,
                spec: None,
            })
        }
        DataSource::Synthetic {
            rows,
            sentinel_rate,
            seed,
        } => {
            let spec = GenerativeSpec::fico_like().with_sentinel_rate(*sentinel_rate);
            let seed = seed.unwrap_or(cfg.seed);
            log::info!("synthesizing {rows} rows (seed {seed})");
            let s = dataset::synthesize(*rows, &spec, seed)?;
            Ok(Loaded {
                raw: s.table,
                truth: Some(s.truth),
                spec: Some(spec),
            })
        }
    }
}

/// A loaded table after imputation, scaling and the holdout split.
pub struct Prepared {
    pub loaded: Loaded,
    /// Standardized, retained columns only.
    pub scaled: FeatureTable,
    pub scaler: ScalerParams,
    pub validation_rows: Vec<usize>,
    pub train: FeatureTable,
    pub validation: FeatureTable,
}

impl Prepared {
    pub fn feature_names(&self) -> &[String] {
        self.scaled.feature_names()
    }

    pub fn summary(&self) -> DataSummary {
        DataSummary {
            rows: self.scaled.n_rows(),
            features: self.scaled.n_features(),
            dropped: self.scaler.dropped.clone(),
            positive_rate: self.scaled.positive_rate(),
            train_rows: self.train.n_rows(),
            validation_rows: self.validation.n_rows(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSummary {
    pub rows: usize,
    pub features: usize,
    pub dropped: Vec<String>,
    pub positive_rate: f64,
    pub train_rows: usize,
    pub validation_rows: usize,
}

pub fn prepare(cfg: &RunConfig) -> CliResult<Prepared> {
    let loaded = load(cfg)?;
    let (_, scaled, scaler) = dataset::prepare(&loaded.raw)?;
    let (train_rows, validation_rows) =
        dataset::split_indices(&scaled, cfg.holdout_fraction, cfg.seed).map_err(|e| CliError::usage(e.to_string()))?;
    let train = scaled.select_rows(&train_rows);
    let validation = scaled.select_rows(&validation_rows);
    Ok(Prepared {
        loaded,
        scaled,
        scaler,
        validation_rows,
        train,
        validation,
    })
}

pub struct Models {
    pub linear: LinearModel,
    pub mlp: MlpModel,
}

pub fn train_models(cfg: &RunConfig, data: &Prepared) -> CliResult<Models> {
    log::info!("fitting logistic regression over the penalty grid");
    let linear = train_logistic(&data.train, &default_grid(), &data.validation).map_err(CliError::training)?;
    log::info!("training network {:?}", cfg.train.hidden);
    let mlp = train_mlp(&data.train, &cfg.train_config(), &data.validation).map_err(CliError::training)?;
    Ok(Models { linear, mlp })
}

fn read_model<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{} is not a model file: {e}", path.display())))
}

pub fn load_models(dir: &Path, n_features: usize) -> CliResult<Models> {
    let linear: LinearModel = read_model(&dir.join(LINEAR_MODEL_FILE))?;
    let mlp: MlpModel = read_model(&dir.join(MLP_MODEL_FILE))?;
    for (name, d) in [("linear", linear.n_features()), ("network", mlp.n_features())] {
        if d != n_features {
            return Err(CliError::usage(format!(
                "{name} model takes {d} features but the data has {n_features}"
            )));
        }
    }
    Ok(Models { linear, mlp })
}

/// Loads models from `dir` when given, otherwise trains them.
pub fn models(cfg: &RunConfig, data: &Prepared, dir: Option<&Path>) -> CliResult<Models> {
    match dir {
        Some(d) => load_models(d, data.scaled.n_features()),
        None => train_models(cfg, data),
    }
}

pub fn write_models(dir: &Path, m: &Models) -> CliResult<()> {
    write_json(&dir.join(LINEAR_MODEL_FILE), &m.linear)?;
    write_json(&dir.join(MLP_MODEL_FILE), &m.mlp)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelScores {
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
    pub validation_log_loss: f64,
    pub validation_confusion: model::Confusion,
}

pub fn score<M: Classifier>(m: &M, data: &Prepared) -> CliResult<ModelScores> {
    Ok(ModelScores {
        train_accuracy: model::accuracy(m, &data.train)?,
        validation_accuracy: model::accuracy(m, &data.validation)?,
        validation_log_loss: model::mean_log_loss(m, &data.validation)?,
        validation_confusion: model::confusion(m, &data.validation)?,
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))
}

/// `YYYY-mm-ddTHH:MM:SSZ`, for unhashed provenance only.
pub fn timestamp() -> String {
    chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

pub fn hostname() -> Option<String> {
    std::env::var("HOSTNAME")
        .ok()
        .or_else(|| fs::read_to_string("/etc/hostname").ok())
        .map(|h| h.trim().to_string())
        .filter(|h| !h.is_empty())
}

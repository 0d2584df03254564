//! Run configuration. Layers, lowest first: defaults, environment
//! (`ATTRIB_DATA_DIR`, `ATTRIB_SEED`), the `--config` JSON file, flags.

use std::path::{Path, PathBuf};

use credattr::dataset::FICO_FILE_NAME;
use credattr::metrics::Exp2Config;
use credattr::{LimeConfig, OutputTarget, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// HELOC row count, used as the synthetic default.
pub const DEFAULT_SYNTHETIC_ROWS: usize = 10_459;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv {
        path: PathBuf,
    },
    Synthetic {
        #[serde(default = "default_rows")]
        rows: usize,
        #[serde(default = "default_sentinel_rate")]
        sentinel_rate: f64,
        /// Defaults to the run seed.
        #[serde(default)]
        seed: Option<u64>,
    },
}

fn default_rows() -> usize {
    DEFAULT_SYNTHETIC_ROWS
}

fn default_sentinel_rate() -> f64 {
    0.05
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            rows: DEFAULT_SYNTHETIC_ROWS,
            sentinel_rate: default_sentinel_rate(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            hidden: t.hidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimeSettings {
    pub n_perturbations: usize,
    pub kernel_width: Option<f64>,
    pub perturbation_scale: f64,
    pub ridge_strength: f64,
    pub top_k: Option<usize>,
}

impl Default for LimeSettings {
    fn default() -> Self {
        let l = LimeConfig::default();
        Self {
            n_perturbations: l.n_perturbations,
            kernel_width: l.kernel_width,
            perturbation_scale: l.perturbation_scale,
            ridge_strength: l.ridge_strength,
            top_k: l.top_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySizes {
    pub random: usize,
    pub boundary: usize,
    pub tight: usize,
}

impl Default for PolicySizes {
    fn default() -> Self {
        let e = Exp2Config::default();
        Self {
            random: e.k_random,
            boundary: e.k_boundary,
            tight: e.k_tight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Exp1Settings {
    /// Validation rows explained; `None` means all of them.
    pub samples: Option<usize>,
    pub top_k: usize,
    pub mutual_information: bool,
}

impl Default for Exp1Settings {
    fn default() -> Self {
        Self {
            samples: None,
            top_k: 7,
            mutual_information: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Exp2Settings {
    pub candidates: usize,
    pub max_tries: usize,
    pub pool_min_size: usize,
}

impl Default for Exp2Settings {
    fn default() -> Self {
        let e = Exp2Config::default();
        Self {
            candidates: 200,
            max_tries: e.max_tries,
            pool_min_size: e.pool_min_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    pub seed: u64,
    pub holdout_fraction: f64,
    pub train: TrainSettings,
    pub lime: LimeSettings,
    pub ig_steps: usize,
    pub epsilon: f64,
    pub k: PolicySizes,
    pub target: OutputTarget,
    pub exp1: Exp1Settings,
    pub exp2: Exp2Settings,
    pub output_dir: PathBuf,
    /// Worker threads; does not affect results.
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataSource::default(),
            seed: 0,
            holdout_fraction: 0.33,
            train: TrainSettings::default(),
            lime: LimeSettings::default(),
            ig_steps: 100,
            epsilon: 0.01,
            k: PolicySizes::default(),
            target: OutputTarget::Probability,
            exp1: Exp1Settings::default(),
            exp2: Exp2Settings::default(),
            output_dir: PathBuf::from("out"),
            jobs: None,
        }
    }
}

/// Flag values that override the configuration; `None` leaves a field
/// alone.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub synthetic_rows: Option<usize>,
    pub seed: Option<u64>,
    pub holdout_fraction: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub target: Option<OutputTarget>,
    pub ig_steps: Option<usize>,
    pub epsilon: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub hidden: Option<Vec<usize>>,
    pub lime_samples: Option<usize>,
    pub lime_top_k: Option<usize>,
    pub k_random: Option<usize>,
    pub k_boundary: Option<usize>,
    pub k_tight: Option<usize>,
    pub candidates: Option<usize>,
    pub exp1_samples: Option<usize>,
    pub exp1_top_k: Option<usize>,
    pub no_mutual_information: bool,
}

/// Environment consulted while resolving, injectable for tests.
pub trait Env {
    fn var(&self, key: &str) -> Option<String>;
}

pub struct ProcessEnv;

impl Env for ProcessEnv {
    fn var(&self, key: &str) -> Option<String> {
        std::env::var(key).ok()
    }
}

fn merge(base: &mut Value, layer: Value) {
    match (base, layer) {
        (Value::Object(b), Value::Object(l)) => {
            for (key, v) in l {
                // data sources are replaced, not merged
                match b.get_mut(&key) {
                    Some(slot) if key != "data" => merge(slot, v),
                    _ => {
                        b.insert(key, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    pub fn resolve(config_file: Option<&Path>, env: &dyn Env, flags: &Overrides) -> CliResult<Self> {
        let mut value = serde_json::to_value(RunConfig::default())?;

        if let Some(seed) = env.var("ATTRIB_SEED") {
            let seed: u64 = seed
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("ATTRIB_SEED must be an unsigned integer, got `{seed}`")))?;
            value["seed"] = seed.into();
        }
        if let Some(dir) = env.var("ATTRIB_DATA_DIR") {
            let path = Path::new(&dir).join(FICO_FILE_NAME);
            if path.is_file() {
                value["data"] = serde_json::json!({ "kind": "csv", "path": path });
            } else {
                log::warn!("ATTRIB_DATA_DIR is set but holds no {FICO_FILE_NAME}; using synthetic data");
            }
        }

        if let Some(path) = config_file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
            let layer: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("config {} is not valid JSON: {e}", path.display())))?;
            if !layer.is_object() {
                return Err(CliError::usage(format!(
                    "config {} must hold a JSON object",
                    path.display()
                )));
            }
            merge(&mut value, layer);
        }

        let mut cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| CliError::usage(format!("invalid configuration: {e}")))?;
        cfg.apply(flags);
        if let DataSource::Synthetic { seed: seed @ None, .. } = &mut cfg.data {
            *seed = Some(cfg.seed);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, f: &Overrides) {
        if let Some(p) = &f.data {
            self.data = DataSource::Csv { path: p.clone() };
        }
        if let Some(rows) = f.synthetic_rows {
            let sentinel_rate = match &self.data {
                DataSource::Synthetic { sentinel_rate, .. } => *sentinel_rate,
                DataSource::Csv { .. } => default_sentinel_rate(),
            };
            self.data = DataSource::Synthetic {
                rows,
                sentinel_rate,
                seed: None,
            };
        }
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(f.seed => self.seed);
        set!(f.holdout_fraction => self.holdout_fraction);
        set!(f.output_dir => self.output_dir);
        set!(f.target => self.target);
        set!(f.ig_steps => self.ig_steps);
        set!(f.epsilon => self.epsilon);
        set!(f.epochs => self.train.epochs);
        set!(f.batch_size => self.train.batch_size);
        set!(f.learning_rate => self.train.learning_rate);
        set!(f.hidden => self.train.hidden);
        set!(f.lime_samples => self.lime.n_perturbations);
        set!(f.k_random => self.k.random);
        set!(f.k_boundary => self.k.boundary);
        set!(f.k_tight => self.k.tight);
        set!(f.candidates => self.exp2.candidates);
        set!(f.exp1_top_k => self.exp1.top_k);
        if f.jobs.is_some() {
            self.jobs = f.jobs;
        }
        if f.lime_top_k.is_some() {
            self.lime.top_k = f.lime_top_k;
        }
        if f.exp1_samples.is_some() {
            self.exp1.samples = f.exp1_samples;
        }
        if f.no_mutual_information {
            self.exp1.mutual_information = false;
        }
    }

    fn validate(&self) -> CliResult<()> {
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(CliError::usage(format!(
                "holdout fraction must lie in (0, 1), got {}",
                self.holdout_fraction
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(CliError::usage(format!(
                "epsilon must lie in (0, 0.5), got {}",
                self.epsilon
            )));
        }
        if self.jobs == Some(0) {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            hidden: self.train.hidden.clone(),
            seed: self.seed,
        }
    }

    pub fn lime_config(&self) -> LimeConfig {
        LimeConfig {
            n_perturbations: self.lime.n_perturbations,
            kernel_width: self.lime.kernel_width,
            perturbation_scale: self.lime.perturbation_scale,
            ridge_strength: self.lime.ridge_strength,
            top_k: self.lime.top_k,
            seed: self.seed,
        }
    }

    /// The configuration as echoed into hashed report sections: everything
    /// that can change a result, nothing that cannot.
    pub fn echo(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(map) = &mut v {
            map.remove("output_dir");
            map.remove("jobs");
        }
        v
    }

    pub fn output_path(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

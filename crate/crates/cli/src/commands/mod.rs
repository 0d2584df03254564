mod experiments;
mod explain;

pub use experiments::{exp1, exp2};
pub use explain::{explain, ExplainRequest};

use std::fs;

use credattr::dataset::{self, feature_description, is_sentinel, GenerativeSpec, GroundTruth};
use credattr::model::GridPoint;
use credattr::{Penalty, ScalerParams};
use serde::Serialize;

use crate::config::{DataSource, RunConfig};
use crate::error::{CliError, CliResult};
use crate::pipeline::{self, write_json, DataSummary, ModelScores};

#[derive(Serialize)]
struct FeatureInfo {
    name: String,
    description: Option<&'static str>,
    special_values: usize,
    kept: bool,
}

#[derive(Serialize)]
struct ClassBalance {
    bad: usize,
    good: usize,
    bad_rate: f64,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    source: &'a DataSource,
    rows: usize,
    features: Vec<FeatureInfo>,
    class_balance: ClassBalance,
    target_description: &'static str,
    scaler: &'a ScalerParams,
}

pub fn ingest(cfg: &RunConfig) -> CliResult<()> {
    let data = pipeline::prepare(cfg)?;
    let raw = &data.loaded.raw;
    let d = raw.n_features();
    let mut special = vec![0usize; d];
    for row in raw.rows() {
        for (j, &v) in row.iter().enumerate() {
            special[j] += usize::from(is_sentinel(v));
        }
    }
    let features = raw
        .feature_names()
        .iter()
        .enumerate()
        .map(|(j, name)| FeatureInfo {
            name: name.clone(),
            description: feature_description(name),
            special_values: special[j],
            kept: data.scaler.kept.contains(&j),
        })
        .collect();
    let bad = raw.target().iter().filter(|&&t| t == 1).count();
    let balance = ClassBalance {
        bad,
        good: raw.n_rows() - bad,
        bad_rate: raw.positive_rate(),
    };

    let snapshot = cfg.output_path("snapshot.csv");
    let file = fs::File::create(&snapshot).map_err(|e| CliError::internal(format!("{}: {e}", snapshot.display())))?;
    dataset::write_csv(raw, file)?;
    write_json(
        &cfg.output_path("snapshot.json"),
        &Sidecar {
            source: &cfg.data,
            rows: raw.n_rows(),
            features,
            class_balance: balance,
            target_description: dataset::TARGET_DESCRIPTION,
            scaler: &data.scaler,
        },
    )?;

    println!("rows: {}", raw.n_rows());
    println!("features: {} ({} kept after scaling)", d, data.scaler.n_features());
    for name in &data.scaler.dropped {
        println!("  dropped constant column {name}");
    }
    println!(
        "class balance: {} bad ({:.1}%), {} good",
        bad,
        100.0 * raw.positive_rate(),
        raw.n_rows() - bad
    );
    println!("wrote {}", snapshot.display());
    Ok(())
}

#[derive(Serialize)]
struct SynthTruth<'a> {
    rows: usize,
    seed: u64,
    spec: &'a GenerativeSpec,
    truth: &'a GroundTruth,
}

pub fn synth(cfg: &RunConfig) -> CliResult<()> {
    let DataSource::Synthetic { rows, seed, .. } = &cfg.data else {
        return Err(CliError::usage("synth writes synthetic data; drop --data"));
    };
    let loaded = pipeline::load(cfg)?;
    let (Some(spec), Some(truth)) = (&loaded.spec, &loaded.truth) else {
        return Err(CliError::internal("synthetic source returned no ground truth"));
    };
    let path = cfg.output_path("synthetic.csv");
    let file = fs::File::create(&path).map_err(|e| CliError::internal(format!("{}: {e}", path.display())))?;
    dataset::write_csv(&loaded.raw, file)?;
    write_json(
        &cfg.output_path("synthetic_truth.json"),
        &SynthTruth {
            rows: *rows,
            seed: seed.unwrap_or(cfg.seed),
            spec,
            truth,
        },
    )?;
    println!(
        "wrote {} rows to {} ({:.1}% bad)",
        loaded.raw.n_rows(),
        path.display(),
        100.0 * loaded.raw.positive_rate()
    );
    Ok(())
}

#[derive(Serialize)]
struct LinearMetrics<'a> {
    penalty: Penalty,
    strength: f64,
    grid: &'a [GridPoint],
    #[serde(flatten)]
    scores: ModelScores,
}

#[derive(Serialize)]
struct MlpMetrics<'a> {
    layer_sizes: Vec<usize>,
    epoch_losses: &'a [f64],
    #[serde(flatten)]
    scores: ModelScores,
}

#[derive(Serialize)]
struct TrainMetrics<'a> {
    data: DataSummary,
    linear: LinearMetrics<'a>,
    mlp: MlpMetrics<'a>,
}

pub fn train(cfg: &RunConfig) -> CliResult<()> {
    let data = pipeline::prepare(cfg)?;
    let models = pipeline::train_models(cfg, &data)?;
    pipeline::write_models(&cfg.output_dir, &models)?;
    let metrics = TrainMetrics {
        data: data.summary(),
        linear: LinearMetrics {
            penalty: models.linear.penalty,
            strength: models.linear.strength,
            grid: &models.linear.grid,
            scores: pipeline::score(&models.linear, &data)?,
        },
        mlp: MlpMetrics {
            layer_sizes: models.mlp.layer_sizes(),
            epoch_losses: &models.mlp.meta.epoch_losses,
            scores: pipeline::score(&models.mlp, &data)?,
        },
    };
    write_json(&cfg.output_path("train_metrics.json"), &metrics)?;
    println!(
        "logistic regression ({:?}, strength {}): validation accuracy {:.4}",
        models.linear.penalty, models.linear.strength, metrics.linear.scores.validation_accuracy
    );
    println!(
        "network {:?}: validation accuracy {:.4}",
        metrics.mlp.layer_sizes, metrics.mlp.scores.validation_accuracy
    );
    println!("majority class rate: {:.4}", {
        let p = data.validation.positive_rate();
        p.max(1.0 - p)
    });
    Ok(())
}

#[derive(Serialize)]
struct FailureManifest<'a> {
    command: &'a str,
    exit_code: i32,
    message: &'a str,
    /// Files present in the output directory when the run stopped.
    outputs: Vec<String>,
}

/// Runs an experiment; on failure, leaves `<name>_failure.json` next to
/// whatever was already written.
pub fn with_manifest(cfg: &RunConfig, name: &str, f: impl FnOnce(&RunConfig) -> CliResult<()>) -> CliResult<()> {
    let manifest = cfg.output_path(&format!("{name}_failure.json"));
    let _ = fs::remove_file(&manifest);
    let err = match f(cfg) {
        Ok(()) => return Ok(()),
        Err(e) => e,
    };
    let mut outputs: Vec<String> = fs::read_dir(&cfg.output_dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .collect()
        })
        .unwrap_or_default();
    outputs.sort();
    let record = FailureManifest {
        command: name,
        exit_code: err.code,
        message: &err.message,
        outputs,
    };
    if let Err(e) = write_json(&manifest, &record) {
        log::error!("could not write failure manifest: {}", e.message);
    }
    Err(err)
}

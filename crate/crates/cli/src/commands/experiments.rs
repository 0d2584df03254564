use std::fs::File;
use std::path::Path;

use credattr::attribution::BatchFailure;
use credattr::metrics::{
    mutual_information, run_experiment1, run_experiment2, Exp1Input, Exp1Report, Exp2Config, Exp2Report, Exp2Setup,
};
use credattr::reference::{boundary_references, ReferencePolicy};
use credattr::report::{write_histogram_csv, write_table1_csv, BenchReport};
use credattr::{explain_batch, Attribution, Candidate, Explainer, Method, ReferencePlan};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::pipeline::{self, DataSummary, ModelScores, Models, Prepared};

/// Neighbours used by the mutual-information estimator.
const MI_NEIGHBOURS: usize = 3;

#[derive(Serialize)]
struct ModelSummary {
    linear: ModelScores,
    mlp: ModelScores,
}

fn model_summary(m: &Models, data: &Prepared) -> CliResult<ModelSummary> {
    Ok(ModelSummary {
        linear: pipeline::score(&m.linear, data)?,
        mlp: pipeline::score(&m.mlp, data)?,
    })
}

/// Trains or loads the models and writes them next to the report, so a
/// failed run still leaves them behind.
fn setup(cfg: &RunConfig, models_dir: Option<&Path>) -> CliResult<(Prepared, Models)> {
    let data = pipeline::prepare(cfg)?;
    let models = pipeline::models(cfg, &data, models_dir)?;
    pipeline::write_models(&cfg.output_dir, &models)?;
    Ok((data, models))
}

fn create(path: &Path) -> CliResult<File> {
    File::create(path).map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))
}

#[derive(Serialize)]
struct BoundaryInfo {
    id: String,
    p_bad: f64,
    raw: Vec<f64>,
}

#[derive(Serialize)]
struct Exp1Deterministic {
    run_config: Value,
    data: DataSummary,
    models: ModelSummary,
    reference: BoundaryInfo,
    report: Exp1Report,
    failures: Vec<(Method, BatchFailure)>,
}

pub fn exp1(cfg: &RunConfig, models_dir: Option<&Path>) -> CliResult<()> {
    let (data, models) = setup(cfg, models_dir)?;
    let n = cfg
        .exp1
        .samples
        .unwrap_or(data.validation.n_rows())
        .min(data.validation.n_rows());
    if n == 0 {
        return Err(CliError::usage("experiment 1 needs at least one sample"));
    }
    let candidates: Vec<Candidate> = (0..n)
        .map(|i| Candidate {
            id: data.validation_rows[i],
            features: data.validation.row(i).to_vec(),
        })
        .collect();

    let boundary = boundary_references(&models.mlp, &data.scaler, 1, cfg.epsilon, cfg.seed, cfg.exp2.max_tries)?;
    let reference = boundary.to_references().remove(0);
    let info = BoundaryInfo {
        id: reference.id.clone(),
        p_bad: boundary.outputs[0][1],
        raw: boundary.raw[0].clone(),
    };

    let runs = [
        (
            Explainer::IntegratedGradients { steps: cfg.ig_steps },
            ReferencePlan::Shared(reference.clone()),
        ),
        (Explainer::DeepLift, ReferencePlan::Shared(reference)),
        (Explainer::Lime(cfg.lime_config()), ReferencePlan::None),
    ];
    let mut attributions: Vec<(Method, Vec<Attribution>)> = Vec::new();
    let mut failures = Vec::new();
    for (explainer, plan) in &runs {
        log::info!("explaining {n} candidates with {}", explainer.method());
        let out = explain_batch(&models.mlp, &candidates, explainer, plan, cfg.target)?;
        if out.attributions.is_empty() {
            let why = out
                .failures
                .first()
                .map(|f| f.message.as_str())
                .unwrap_or("no candidates");
            return Err(CliError::internal(format!(
                "{} failed on every candidate: {why}",
                explainer.method()
            )));
        }
        failures.extend(out.failures.into_iter().map(|f| (explainer.method(), f)));
        attributions.push((explainer.method(), out.attributions));
    }

    let mutual_information = if cfg.exp1.mutual_information {
        log::info!("estimating mutual information per feature");
        let target = data.train.target();
        let mi = (0..data.train.n_features())
            .into_par_iter()
            .map(|j| mutual_information(&data.train.column(j), target, MI_NEIGHBOURS))
            .collect::<credattr::Result<Vec<f64>>>()?;
        Some(mi)
    } else {
        None
    };

    let input = Exp1Input {
        feature_names: data.feature_names(),
        global_weights: &models.linear.weights,
        methods: attributions.iter().map(|(m, a)| (*m, a.as_slice())).collect(),
        mutual_information,
    };
    let report = run_experiment1(&input, cfg.exp1.top_k)?;

    write_exp1_csvs(cfg, &report)?;
    let det = Exp1Deterministic {
        run_config: cfg.echo(),
        data: data.summary(),
        models: model_summary(&models, &data)?,
        reference: info,
        report,
        failures,
    };
    let bench = BenchReport::new(det, Some(pipeline::timestamp()), pipeline::hostname())?;
    bench.write_json(cfg.output_path("exp1_report.json"))?;

    let r = &bench.deterministic.report;
    println!(
        "experiment 1: {n} candidates, top-{} against logistic regression weights",
        r.k
    );
    println!("{:<10} {:>10} {:>10} {:>12}", "method", "top-k", "mean L2", "rank dist");
    for t in &r.trust {
        println!(
            "{:<10} {:>7}/{:<2} {:>10.4} {:>12.4}",
            t.method.as_str(),
            t.top_k_agreement,
            t.k,
            t.mean_l2,
            t.mean_weighted_rank_dist
        );
    }
    if let Some(mi) = &r.mutual_information {
        println!(
            "mutual information top-{} agreement with weights: {}/{}",
            r.k, mi.top_k_agreement_with_weights, r.k
        );
    }
    if !bench.deterministic.failures.is_empty() {
        println!(
            "{} candidate explanations failed; see the report",
            bench.deterministic.failures.len()
        );
    }
    println!("report sha256 {}", bench.provenance.deterministic_sha256);
    Ok(())
}

fn write_exp1_csvs(cfg: &RunConfig, report: &Exp1Report) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(&cfg.output_path("exp1_trust.csv"))?);
    w.write_record([
        "method",
        "k",
        "n_samples",
        "top_k_agreement",
        "mean_l2",
        "l2_excluded",
        "mean_weighted_rank_dist",
    ])?;
    for t in &report.trust {
        w.write_record([
            t.method.to_string(),
            t.k.to_string(),
            t.n_samples.to_string(),
            t.top_k_agreement.to_string(),
            t.mean_l2.to_string(),
            t.l2_excluded.to_string(),
            t.mean_weighted_rank_dist.to_string(),
        ])?;
    }
    w.flush()?;

    // One ranking per source: each method by top-k frequency, the weights
    // and mutual information by magnitude.
    let mut w = csv::Writer::from_writer(create(&cfg.output_path("exp1_ranking.csv"))?);
    w.write_record(["source", "rank", "feature", "score"])?;
    for t in &report.trust {
        for (rank, f) in t.global_ranking.iter().enumerate() {
            w.write_record([
                t.method.to_string(),
                (rank + 1).to_string(),
                f.name.clone(),
                f.proportion.to_string(),
            ])?;
        }
    }
    let extra = [
        ("weights", Some(&report.weight_ranking)),
        (
            "mutual_information",
            report.mutual_information.as_ref().map(|m| &m.ranking),
        ),
    ];
    for (source, ranking) in extra {
        for (rank, f) in ranking.into_iter().flatten().enumerate() {
            w.write_record([
                source.to_string(),
                (rank + 1).to_string(),
                f.name.clone(),
                f.value.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Exp2Deterministic<'a> {
    run_config: Value,
    data: DataSummary,
    models: ModelSummary,
    report: &'a Exp2Report,
}

pub fn exp2(cfg: &RunConfig, models_dir: Option<&Path>) -> CliResult<()> {
    let (data, models) = setup(cfg, models_dir)?;
    let available = data.validation.n_rows();
    let n = cfg.exp2.candidates;
    if n == 0 || n > available {
        return Err(CliError::usage(format!(
            "experiment 2 takes 1..={available} candidates from the validation rows, got {n}"
        )));
    }
    // Ids index validation rows, which also seed the tight pool.
    let candidates: Vec<Candidate> = (0..n)
        .map(|i| Candidate {
            id: i,
            features: data.validation.row(i).to_vec(),
        })
        .collect();
    let exp_cfg = Exp2Config {
        k_random: cfg.k.random,
        k_boundary: cfg.k.boundary,
        k_tight: cfg.k.tight,
        epsilon: cfg.epsilon,
        ig_steps: cfg.ig_steps,
        methods: vec![Method::IntegratedGradients, Method::DeepLift],
        target: cfg.target,
        seed: cfg.seed,
        max_tries: cfg.exp2.max_tries,
        pool_min_size: cfg.exp2.pool_min_size,
    };
    let setup = Exp2Setup {
        model: &models.mlp,
        scaler: &data.scaler,
        pool_table: &data.validation,
        candidates: &candidates,
    };
    log::info!("experiment 2 on {n} candidates");
    let report = run_experiment2(&setup, &exp_cfg)?;

    write_table1_csv(&report.aggregate, create(&cfg.output_path("exp2_table1.csv"))?)?;
    write_histogram_csv(&report.histogram, create(&cfg.output_path("exp2_histogram.csv"))?)?;
    let det = Exp2Deterministic {
        run_config: cfg.echo(),
        data: data.summary(),
        models: model_summary(&models, &data)?,
        report: &report,
    };
    let bench = BenchReport::new(det, Some(pipeline::timestamp()), pipeline::hostname())?;
    bench.write_json(cfg.output_path("exp2_report.json"))?;

    println!(
        "experiment 2: {n} candidates, K = {}/{}/{} (random/boundary/tight)",
        cfg.k.random, cfg.k.boundary, cfg.k.tight
    );
    println!("{:<18} {:>10} {:>10} {:>10}", "method", "random", "boundary", "tight");
    for method in &exp_cfg.methods {
        for metric in ["entropy", "std"] {
            let cells: Vec<String> = [
                ReferencePolicy::Random,
                ReferencePolicy::Boundary,
                ReferencePolicy::Tight,
            ]
            .iter()
            .map(|&p| format!("{:.4}", report.cell(*method, p, metric).unwrap_or(f64::NAN)))
            .collect();
            println!(
                "{:<18} {:>10} {:>10} {:>10}",
                format!("{method} {metric}"),
                cells[0],
                cells[1],
                cells[2]
            );
        }
    }
    println!(
        "network validation accuracy {:.4}",
        bench.deterministic.models.mlp.validation_accuracy
    );
    println!("report sha256 {}", bench.provenance.deterministic_sha256);
    Ok(())
}

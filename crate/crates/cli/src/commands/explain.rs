use std::path::PathBuf;

use credattr::dataset::feature_description;
use credattr::reference::{
    build_boundary_pool, profile_catalog, random_references, summarize_profile, tight_references, CatalogOptions,
    PoolSource, ProfileSummary, TIGHT_K,
};
use credattr::{Attribution, Classifier, Explainer, Method, Reference};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::pipeline::{self, write_json, Prepared};
use crate::PolicyArg;

pub struct ExplainRequest {
    pub candidate_id: usize,
    pub method: Method,
    pub policy: PolicyArg,
    pub top_k: usize,
    pub models: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ReferenceInfo {
    policy: &'static str,
    name: String,
    id: String,
    p_bad: f64,
    raw: Vec<f64>,
    summary: ProfileSummary,
}

#[derive(Debug, Serialize)]
struct Reason {
    rank: usize,
    feature: String,
    description: Option<&'static str>,
    contribution: f64,
    value: f64,
    reference_value: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Explanation {
    candidate_id: usize,
    in_validation: bool,
    label: u8,
    p_bad: f64,
    reference: Option<ReferenceInfo>,
    reasons: Vec<Reason>,
    attribution: Attribution,
}

fn policy_name(p: PolicyArg) -> &'static str {
    match p {
        PolicyArg::Random => "random",
        PolicyArg::Boundary => "boundary",
        PolicyArg::Tight => "tight",
        PolicyArg::Average => "average",
        PolicyArg::New => "new",
    }
}

fn pick_reference(
    cfg: &RunConfig,
    data: &Prepared,
    mlp: &credattr::MlpModel,
    policy: PolicyArg,
    candidate_id: usize,
) -> CliResult<(String, Reference)> {
    let scaler = &data.scaler;
    match policy {
        PolicyArg::Random => {
            let set = random_references(scaler, 1, cfg.seed)?;
            Ok(("random point".into(), set.to_references().remove(0)))
        }
        PolicyArg::Tight => {
            let mut pool = build_boundary_pool(
                mlp,
                &data.validation,
                scaler,
                cfg.epsilon,
                cfg.exp2.pool_min_size.max(TIGHT_K),
                cfg.seed,
                cfg.exp2.max_tries,
            )?;
            pool.members
                .retain(|m| !matches!(m.source, PoolSource::Dataset(i) if data.validation_rows[i] == candidate_id));
            let set = tight_references(mlp, &pool.members, data.scaled.row(candidate_id), 1, cfg.epsilon)?;
            Ok(("nearest decision-boundary point".into(), set.to_references().remove(0)))
        }
        PolicyArg::Boundary | PolicyArg::Average | PolicyArg::New => {
            let opts = CatalogOptions {
                epsilon: cfg.epsilon,
                seed: cfg.seed,
                max_tries: cfg.exp2.max_tries,
            };
            let catalog = profile_catalog(mlp, &data.train, scaler, opts)?;
            let slot = match policy {
                PolicyArg::Boundary => 0,
                PolicyArg::Average => 1,
                _ => 2,
            };
            let p = &catalog[slot];
            let id = p.name.replace(' ', "-");
            Ok((
                p.name.clone(),
                Reference {
                    id,
                    values: p.standardized.clone(),
                },
            ))
        }
    }
}

pub fn explain(cfg: &RunConfig, req: &ExplainRequest) -> CliResult<()> {
    if req.top_k == 0 {
        return Err(CliError::usage("--top-k must be at least 1"));
    }
    let data = pipeline::prepare(cfg)?;
    let n = data.scaled.n_rows();
    if req.candidate_id >= n {
        return Err(CliError::usage(format!(
            "unknown candidate {}: the table has rows 0..{}",
            req.candidate_id,
            n - 1
        )));
    }
    let models = pipeline::models(cfg, &data, req.models.as_deref())?;
    let mlp = &models.mlp;
    let x = data.scaled.row(req.candidate_id);
    let names = data.feature_names();

    let reference = if req.method.needs_reference() {
        let (name, r) = pick_reference(cfg, &data, mlp, req.policy, req.candidate_id)?;
        let raw = data.scaler.to_raw(&r.values)?;
        let info = ReferenceInfo {
            policy: policy_name(req.policy),
            name,
            id: r.id.clone(),
            p_bad: mlp.p_bad(&r.values)?,
            summary: summarize_profile(names, &raw),
            raw,
        };
        Some((r, info))
    } else {
        None
    };

    let explainer = match req.method {
        Method::IntegratedGradients => Explainer::IntegratedGradients { steps: cfg.ig_steps },
        Method::DeepLift => Explainer::DeepLift,
        Method::Lime => Explainer::Lime(cfg.lime_config()),
    };
    let attribution = explainer.explain(mlp, req.candidate_id, x, reference.as_ref().map(|r| &r.0), cfg.target)?;

    let raw_x = data.scaler.to_raw(x)?;
    let reasons: Vec<Reason> = attribution
        .ranking()
        .into_iter()
        .take(req.top_k)
        .enumerate()
        .map(|(rank, j)| Reason {
            rank: rank + 1,
            feature: names[j].clone(),
            description: feature_description(&names[j]),
            contribution: attribution.values[j],
            value: raw_x[j],
            reference_value: reference.as_ref().map(|r| r.1.raw[j]),
        })
        .collect();

    let out = Explanation {
        candidate_id: req.candidate_id,
        in_validation: data.validation_rows.binary_search(&req.candidate_id).is_ok(),
        label: data.scaled.target()[req.candidate_id],
        p_bad: mlp.p_bad(x)?,
        reference: reference.map(|r| r.1),
        reasons,
        attribution,
    };
    let path = cfg.output_path(&format!("explain_{}_{}.json", req.candidate_id, req.method));
    write_json(&path, &out)?;
    print_reasons(&out, cfg);
    Ok(())
}

fn print_reasons(e: &Explanation, cfg: &RunConfig) {
    println!(
        "candidate {}: predicted probability of a 90-day payment delinquency {:.4}",
        e.candidate_id, e.p_bad
    );
    match &e.reference {
        Some(r) => println!(
            "reference: {} ({} policy, id {}), predicted probability {:.4}",
            r.name, r.policy, r.id, r.p_bad
        ),
        None => {
            println!("reference: none; the surrogate is fit to perturbations around the candidate")
        }
    }
    let unit = match cfg.target {
        credattr::OutputTarget::Probability => "probability",
        credattr::OutputTarget::Logit => "log-odds",
    };
    let lime = e.attribution.method == Method::Lime;
    let what = if lime { "local slopes of" } else { "contributions to" };
    println!(
        "top {} reasons by {} ({what} the delinquency {unit}):",
        e.reasons.len(),
        e.attribution.method
    );
    for r in &e.reasons {
        let direction = match (lime, r.contribution > 0.0) {
            (false, true) => "raises risk",
            (false, false) => "lowers risk",
            (true, true) => "higher values raise risk",
            (true, false) => "higher values lower risk",
        };
        let against = r
            .reference_value
            .map(|v| format!(" vs reference {v:.2}"))
            .unwrap_or_default();
        println!(
            "  {}. {} = {}{}: {:+.4e} ({direction})",
            r.rank, r.feature, r.value, against, r.contribution
        );
        if let Some(d) = r.description {
            println!("     {d}");
        }
    }
}

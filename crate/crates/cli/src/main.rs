mod commands;
mod config;
mod error;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use credattr::{Method, OutputTarget};

use crate::config::{Overrides, ProcessEnv, RunConfig};
use crate::error::{exit, CliError, CliResult};

/// Train credit-risk classifiers, explain their predictions and benchmark
/// the explanations.
#[derive(Debug, Parser)]
#[command(name = "credattr", version)]
struct Cli {
    /// JSON run configuration; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Labelled CSV to use instead of synthetic data.
    #[arg(long, global = true, value_name = "CSV", conflicts_with = "synthetic_rows")]
    data: Option<PathBuf>,
    /// Use a synthetic HELOC-like table with this many rows.
    #[arg(long, global = true, value_name = "N")]
    synthetic_rows: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for attribution batches; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Model output the attributions explain.
    #[arg(long, global = true, value_enum)]
    target: Option<TargetArg>,
    /// Fraction of rows held out for validation.
    #[arg(long, global = true, value_name = "FRACTION")]
    holdout: Option<f64>,
    /// Half-width of the decision-boundary band around p = 0.5.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TargetArg {
    Probability,
    Logit,
}

impl From<TargetArg> for OutputTarget {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Probability => OutputTarget::Probability,
            TargetArg::Logit => OutputTarget::Logit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    /// One uniform random point.
    Random,
    /// The unclassifiable profile: a random point with p near 0.5.
    Boundary,
    /// The nearest decision-boundary point to the candidate.
    Tight,
    /// The column means of the training rows.
    Average,
    /// The average candidate with no credit history.
    New,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', value_name = "N,N")]
    hidden: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
struct ModelsArg {
    /// Load linear_model.json and mlp_model.json from here instead of
    /// training.
    #[arg(long, value_name = "DIR")]
    models: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load, impute and standardize the data; write a snapshot and sidecar.
    Ingest,
    /// Write a synthetic HELOC-like table and its true coefficients.
    Synth,
    /// Fit the logistic regression and the network.
    Train(TrainArgs),
    /// Explain one candidate's predicted risk.
    Explain {
        /// Row index in the loaded table.
        #[arg(long)]
        candidate_id: usize,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long, value_enum, default_value = "boundary")]
        reference_policy: PolicyArg,
        /// Number of reasons printed.
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        #[arg(long)]
        ig_steps: Option<usize>,
        #[arg(long)]
        lime_samples: Option<usize>,
        #[command(flatten)]
        models: ModelsArg,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Agreement of local attributions with the logistic regression weights.
    Exp1 {
        /// Validation rows to explain (default: all).
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        top_k: Option<usize>,
        /// Skip the mutual-information cross-check.
        #[arg(long)]
        no_mi: bool,
        #[arg(long)]
        ig_steps: Option<usize>,
        #[arg(long)]
        lime_samples: Option<usize>,
        #[command(flatten)]
        models: ModelsArg,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Sensitivity of attributions to the choice of reference point.
    Exp2 {
        #[arg(long)]
        candidates: Option<usize>,
        /// References per policy; the per-policy flags take precedence.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        k_random: Option<usize>,
        #[arg(long)]
        k_boundary: Option<usize>,
        #[arg(long)]
        k_tight: Option<usize>,
        #[arg(long)]
        ig_steps: Option<usize>,
        #[command(flatten)]
        models: ModelsArg,
        #[command(flatten)]
        train: TrainArgs,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: credattr::Error| e.to_string())
}

impl TrainArgs {
    fn apply(&self, o: &mut Overrides) {
        o.epochs = self.epochs;
        o.batch_size = self.batch_size;
        o.learning_rate = self.learning_rate;
        o.hidden = self.hidden.clone();
    }
}

impl Cli {
    fn overrides(&self) -> Overrides {
        let mut o = Overrides {
            data: self.data.clone(),
            synthetic_rows: self.synthetic_rows,
            seed: self.seed,
            holdout_fraction: self.holdout,
            output_dir: self.out.clone(),
            jobs: self.jobs,
            target: self.target.map(Into::into),
            epsilon: self.epsilon,
            ..Overrides::default()
        };
        match &self.command {
            Command::Ingest | Command::Synth => {}
            Command::Train(t) => t.apply(&mut o),
            Command::Explain {
                ig_steps,
                lime_samples,
                train,
                ..
            } => {
                train.apply(&mut o);
                o.ig_steps = *ig_steps;
                o.lime_samples = *lime_samples;
            }
            Command::Exp1 {
                samples,
                top_k,
                no_mi,
                ig_steps,
                lime_samples,
                train,
                ..
            } => {
                train.apply(&mut o);
                o.exp1_samples = *samples;
                o.exp1_top_k = *top_k;
                o.no_mutual_information = *no_mi;
                o.ig_steps = *ig_steps;
                o.lime_samples = *lime_samples;
            }
            Command::Exp2 {
                candidates,
                k,
                k_random,
                k_boundary,
                k_tight,
                ig_steps,
                train,
                ..
            } => {
                train.apply(&mut o);
                o.candidates = *candidates;
                o.k_random = k_random.or(*k);
                o.k_boundary = k_boundary.or(*k);
                o.k_tight = k_tight.or(*k);
                o.ig_steps = *ig_steps;
            }
        }
        o
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = RunConfig::resolve(cli.config.as_deref(), &ProcessEnv, &cli.overrides())?;
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", cfg.output_dir.display())))?;
    pipeline::write_json(&cfg.output_path("run_config.json"), &cfg)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.jobs {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::internal(format!("cannot start worker threads: {e}")))?;

    pool.install(|| match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Synth => commands::synth(&cfg),
        Command::Train(_) => commands::train(&cfg),
        Command::Explain {
            candidate_id,
            method,
            reference_policy,
            top_k,
            models,
            ..
        } => commands::explain(
            &cfg,
            &commands::ExplainRequest {
                candidate_id,
                method,
                policy: reference_policy,
                top_k,
                models: models.models,
            },
        ),
        Command::Exp1 { models, .. } => {
            commands::with_manifest(&cfg, "exp1", |c| commands::exp1(c, models.models.as_deref()))
        }
        Command::Exp2 { models, .. } => {
            commands::with_manifest(&cfg, "exp2", |c| commands::exp2(c, models.models.as_deref()))
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}

//! Argument definitions and the verbs behind them.

use std::fs;
use std::io::{self, Read, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use distforest::cohort::{
    describe_cohort, load_cohort, read_patients, synth_cohort, write_cohort, CohortMarginals, CohortSchema, LinkModel,
};
use distforest::evaluation::{
    climatological_crps, evaluate_weights, holdout_evaluate, kfold_cv, CvConfig, EvalOptions, EvaluationReport,
};
use distforest::neighbors::{divergence_analysis, DIVERGENCE_QUANTITIES};
use distforest::{fit_forest, load_model, save_model, Dataset, ForestConfig, Model, Resampling, TreeConfig};
use thiserror::Error;

use crate::render::{crps_listing, metrics_block, observation_table};
use crate::service::{self, DEFAULT_PORT};
use crate::wire::{parse_query, PatientQuery, RequestError, ServedModel};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] distforest::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{0}")]
    Request(RequestError),
    #[error("{0}")]
    Refused(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit code: 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "distforest",
    version,
    about = "Distributional random forests for recurrence-score prediction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a forest on a cohort CSV and write a model file.
    Train(TrainArgs),
    /// Score a model out-of-bag, by K-fold cross validation, or on a holdout cohort.
    Evaluate(EvaluateArgs),
    /// Predictive distribution for new patients, as JSON.
    Predict(QueryArgs),
    /// Most similar training patients, as JSON.
    Neighbors(QueryArgs),
    /// Write a synthetic cohort CSV.
    Synth(SynthArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ResamplingKind {
    Subsample,
    Bootstrap,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub trees: usize,
    #[arg(long, default_value_t = 3)]
    pub mtry: usize,
    #[arg(long, default_value_t = 5)]
    pub min_leaf: usize,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, value_enum, default_value_t = ResamplingKind::Subsample)]
    pub resampling: ResamplingKind,
    /// Subsample fraction (subsample resampling only).
    #[arg(long, default_value_t = 0.5)]
    pub fraction: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, env = "DISTFOREST_MODEL")]
    pub model: PathBuf,
    /// Cohort to score; defaults to the model's own training cohort.
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    /// Run K-fold cross validation with the model's settings instead of
    /// out-of-bag scoring.
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long, default_value_t = 42)]
    pub cv_seed: u64,
    /// Evaluate a cohort the model was not trained on, as a holdout set.
    #[arg(long)]
    pub force: bool,
    /// Write the per-observation table (tab-separated) here.
    #[arg(long)]
    pub observations: Option<PathBuf>,
    /// Rows shown in the CRPS-sorted listing.
    #[arg(long, default_value_t = 20)]
    pub top: usize,
    /// Also report patient-versus-neighborhood divergence (out-of-bag only).
    #[arg(long)]
    pub divergence: bool,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long, env = "DISTFOREST_MODEL")]
    pub model: PathBuf,
    /// JSON request body with the nine features; `-` reads stdin.
    #[arg(long, conflicts_with = "patients", required_unless_present = "patients")]
    pub request: Option<PathBuf>,
    /// CSV of patients (score column optional); one JSON line per patient.
    #[arg(long)]
    pub patients: Option<PathBuf>,
    #[arg(long, default_value_t = distforest::neighbors::DEFAULT_NEIGHBORS)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 333)]
    pub n: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the category-by-score-band description to stderr.
    #[arg(long)]
    pub report: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Model to serve; without one every endpoint answers 503.
    #[arg(long, env = "DISTFOREST_MODEL")]
    pub model: Option<PathBuf>,
    #[arg(long, env = "DISTFOREST_PORT", default_value_t = DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
}

/// Runs one verb. Results go to `out`, diagnostics to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => train(&args, out, err),
        Command::Evaluate(args) => evaluate(&args, out, err),
        Command::Predict(args) => query(&args, out, |m, q| Ok(serde_json::to_value(m.predict(q)?)?)),
        Command::Neighbors(args) => query(&args, out, |m, q| Ok(serde_json::to_value(m.neighbors(q)?)?)),
        Command::Synth(args) => synth(&args, out, err),
        Command::Serve(args) => serve(&args, err),
    }
}

fn read_cohort_file(path: &Path, err: &mut dyn Write) -> Result<Dataset, CliError> {
    let loaded = load_cohort(path, &CohortSchema::default())?;
    for rejection in &loaded.rejected {
        writeln!(err, "warning: skipped {rejection}")?;
    }
    Ok(loaded.dataset)
}

fn train(args: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let resampling = match args.resampling {
        ResamplingKind::Subsample => Resampling::SubsampleWithoutReplacement {
            fraction: args.fraction,
        },
        ResamplingKind::Bootstrap => Resampling::BootstrapWithReplacement,
    };
    let config = ForestConfig {
        num_trees: args.trees,
        resampling,
        tree: TreeConfig {
            min_leaf_size: args.min_leaf,
            max_depth: args.max_depth,
            mtry: args.mtry,
            ..TreeConfig::default()
        },
        seed: args.seed,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let data = read_cohort_file(&args.cohort, err)?;
    if data.len() < 2 * args.min_leaf {
        writeln!(
            err,
            "warning: cohort has {} rows, fewer than 2 x min-leaf ({}); every tree is a single leaf",
            data.len(),
            args.min_leaf
        )?;
    }
    let forest = fit_forest(&data, &config)?;
    let model = Model::new(forest, data)?;
    save_model(&model, &args.out)?;
    writeln!(
        out,
        "trained n={} B={} seed={} fingerprint={} -> {}",
        model.data().len(),
        model.forest().trees().len(),
        args.seed,
        model.forest().dataset_fingerprint(),
        args.out.display()
    )?;
    Ok(())
}

fn evaluate(args: &EvaluateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let options = EvalOptions::default();
    let classes = options.classes;
    let cohort = match &args.cohort {
        Some(path) => read_cohort_file(path, err)?,
        None => model.data().clone(),
    };
    let own = cohort.fingerprint() == model.forest().dataset_fingerprint();
    if !own && !args.force {
        return Err(CliError::Refused(
            "cohort does not match the model's training data; pass --force to score it as a holdout set".into(),
        ));
    }

    let (title, report, oob) = if let Some(k) = args.folds {
        let cv = CvConfig {
            k,
            seed: args.cv_seed,
            stratify_binary: true,
        };
        let cv_report = kfold_cv(&cohort, model.forest().config(), &cv, &options)?;
        let mut title = format!("{k}-fold cross validation (seed {})\n", args.cv_seed);
        for (i, fold) in cv_report.folds.iter().enumerate() {
            title.push_str(&format!(
                "  fold {}: {} rows, mean CRPS {:.4}\n",
                i + 1,
                fold.test_rows.len(),
                fold.report.crps.mean_crps()
            ));
        }
        title.push_str(&format!("  mean of fold CRPS {:.4}", cv_report.mean_fold_crps));
        (title, cv_report.pooled, None)
    } else if own {
        let oob = model.forest().oob_weights_all(&cohort)?;
        let report = evaluate_weights(&cohort, &oob, &options)?;
        ("out-of-bag".to_string(), report, Some(oob))
    } else {
        writeln!(
            err,
            "warning: cohort differs from the training data; scoring it as a holdout set"
        )?;
        let report = holdout_evaluate(model.forest(), model.data(), &cohort, &options)?;
        ("holdout (all trees)".to_string(), report, None)
    };

    writeln!(out, "Evaluation: {title}")?;
    write_summary(&report, &cohort, out)?;
    writeln!(out)?;
    write!(out, "{}", metrics_block(&report.confusion, &report.metrics, &classes))?;
    writeln!(out)?;
    write!(out, "{}", crps_listing(&report, &classes, args.top))?;

    if args.divergence {
        match &oob {
            Some(weights) => {
                let div = divergence_analysis(&report.crps, weights, &cohort);
                writeln!(out)?;
                writeln!(
                    out,
                    "Neighborhood divergence (mean |patient - neighborhood|), {} misclassified / {} correct",
                    div.count(true),
                    div.count(false)
                )?;
                for q in DIVERGENCE_QUANTITIES {
                    let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
                    writeln!(
                        out,
                        "  {:<12} misclassified {:>8}  correct {:>8}",
                        q.name(),
                        show(div.mean_difference(q, true)),
                        show(div.mean_difference(q, false))
                    )?;
                }
            }
            None => writeln!(err, "warning: --divergence needs out-of-bag evaluation; skipped")?,
        }
    }

    if let Some(path) = &args.observations {
        fs::write(path, observation_table(&report, &classes))?;
    }
    Ok(())
}

fn write_summary(report: &EvaluationReport, cohort: &Dataset, out: &mut dyn Write) -> Result<(), CliError> {
    let scored = report.crps.per_observation.len();
    writeln!(out, "{scored} rows scored, {} excluded", report.excluded.len())?;
    if !report.excluded.is_empty() {
        writeln!(out, "excluded (no out-of-bag trees): {}", report.excluded.join(", "))?;
    }
    let climate = climatological_crps(cohort)?;
    let baseline = climate.iter().sum::<f64>() / climate.len() as f64;
    let mean = report.crps.mean_crps();
    writeln!(
        out,
        "mean CRPS {mean:.4}; climatological baseline {baseline:.4} ({:.1}% improvement)",
        100.0 * (1.0 - mean / baseline)
    )?;
    Ok(())
}

fn read_request(path: &Path) -> Result<Vec<u8>, CliError> {
    if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        io::stdin().read_to_end(&mut buf)?;
        Ok(buf)
    } else {
        Ok(fs::read(path)?)
    }
}

fn query<F>(args: &QueryArgs, out: &mut dyn Write, answer: F) -> Result<(), CliError>
where
    F: Fn(&ServedModel, &PatientQuery) -> Result<serde_json::Value, CliError>,
{
    if args.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let served = ServedModel::new(load_model(&args.model)?)?;
    if let Some(path) = &args.request {
        let mut q = parse_query(&read_request(path)?, false).map_err(CliError::Request)?;
        q.k = args.k;
        writeln!(out, "{}", serde_json::to_string_pretty(&answer(&served, &q)?)?)?;
    } else if let Some(path) = &args.patients {
        let loaded = read_patients(fs::File::open(path)?, &CohortSchema::default())?;
        if let Some(rejection) = loaded.rejected.first() {
            return Err(CliError::Refused(format!("invalid patient: {rejection}")));
        }
        for patient in &loaded.patients {
            let q = PatientQuery {
                features: patient.features()?,
                k: args.k,
            };
            let mut value = answer(&served, &q)?;
            value["patient"] = serde_json::Value::String(patient.id.clone());
            writeln!(out, "{}", serde_json::to_string(&value)?)?;
        }
    }
    Ok(())
}

fn synth(args: &SynthArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    if args.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let marginals = CohortMarginals::reference();
    let data = synth_cohort(&marginals, args.n, args.seed, &LinkModel::default())?;
    let schema = CohortSchema::default();
    match &args.out {
        Some(path) => write_cohort(fs::File::create(path)?, &data, &schema)?,
        None => write_cohort(&mut *out, &data, &schema)?,
    }
    if args.report {
        let report = describe_cohort(&data, &marginals, &Default::default());
        write!(err, "{report}")?;
    }
    Ok(())
}

fn serve(args: &ServeArgs, err: &mut dyn Write) -> Result<(), CliError> {
    let model = match &args.model {
        Some(path) => Some(ServedModel::new(load_model(path)?)?),
        None => {
            writeln!(err, "warning: no model given; all endpoints will answer 503")?;
            None
        }
    };
    let addr = SocketAddr::new(args.host, args.port);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(service::serve(model, addr))?;
    Ok(())
}

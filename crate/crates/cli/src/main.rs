//! `enetpath`: fit, cross-validate, predict, assess and draw survival
//! curves from CSV data. Errors are reported on stderr as JSON.

mod commands;
mod ingest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "enetpath", version, about = "Elastic-net regularization paths for GLMs and Cox models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a regularization path and write the model JSON.
    Fit(FitArgs),
    /// Cross-validate over the λ path (and γ when relaxed).
    Cv(CvArgs),
    /// Predict from a saved model.
    Predict(PredictArgs),
    /// Compute every performance measure valid for the family.
    Assess(AssessArgs),
    /// Predicted survival curves from a saved Cox model.
    Survcurve(SurvcurveArgs),
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Response column (GLM families).
    #[arg(long)]
    pub response: Option<String>,
    /// Survival time column; the stop time with `--start`.
    #[arg(long, visible_alias = "stop")]
    pub time: Option<String>,
    /// Failure indicator column (1 = failure, 0 = censored).
    #[arg(long)]
    pub status: Option<String>,
    /// Entry time column for (start, stop] data.
    #[arg(long)]
    pub start: Option<String>,
    /// Stratum column for Cox models.
    #[arg(long)]
    pub strata: Option<String>,
    /// Observation weight column.
    #[arg(long)]
    pub weights: Option<String>,
    /// Comma-separated feature columns; by default every column not named
    /// by another flag.
    #[arg(long, conflicts_with = "ignore")]
    pub features: Option<String>,
    /// Comma-separated columns to leave out of the default feature set.
    #[arg(long)]
    pub ignore: Option<String>,
    /// Store features in compressed sparse column form.
    #[arg(long)]
    pub sparse: bool,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Family, e.g. gaussian, binomial:probit, poisson, tweedie:q=1.5, cox.
    /// Defaults to cox when `--time` is given and gaussian otherwise.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100)]
    pub nlambda: usize,
    #[arg(long)]
    pub lambda_min_ratio: Option<f64>,
    /// Explicit comma-separated, strictly decreasing λ values.
    #[arg(long)]
    pub lambda: Option<String>,
    /// Comma-separated penalty factors, one per feature.
    #[arg(long)]
    pub penalty_factors: Option<String>,
    /// Lower bound: a scalar or one value per feature.
    #[arg(long, allow_hyphen_values = true)]
    pub lower: Option<String>,
    /// Upper bound: a scalar or one value per feature.
    #[arg(long, allow_hyphen_values = true)]
    pub upper: Option<String>,
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long)]
    pub no_intercept: bool,
    /// Worker threads for parallel work; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Also refit each active set without penalty.
    #[arg(long)]
    pub relax: bool,
    /// Model JSON output path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub relax: bool,
    #[arg(long, default_value_t = 10)]
    pub nfolds: usize,
    /// deviance, mse, mae, class, auc or c-index.
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep the pre-validated predictions in the output.
    #[arg(long)]
    pub keep: bool,
    /// Comma-separated γ grid for relaxed cross-validation.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Cross-validation result JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Plot CSV; defaults to the output path with extension `plot.csv`.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Also write the full-data model with the selected tuning values.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictKind {
    Link,
    Response,
    Class,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub sparse: bool,
    /// Comma-separated λ values or lambda.min, lambda.1se, lambda.max.
    /// Defaults to lambda.1se for cross-validated models and the whole
    /// path otherwise.
    #[arg(long)]
    pub s: Option<String>,
    /// Comma-separated blending values in [0, 1] for relaxed models.
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long = "type", value_enum, default_value_t = PredictKind::Link)]
    pub kind: PredictKind,
    /// Predictions CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AssessArgs {
    /// Saved model; predictions are computed on `--data`.
    #[arg(long, conflicts_with = "predictions")]
    pub model: Option<PathBuf>,
    /// CSV of link-scale predictions, one column per fit (a `row` column is
    /// ignored).
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// CSV holding the response; defaults to the predictions file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub response: Option<String>,
    #[arg(long, visible_alias = "stop")]
    pub time: Option<String>,
    #[arg(long)]
    pub status: Option<String>,
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long)]
    pub strata: Option<String>,
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    pub sparse: bool,
    /// Family of a predictions file; gaussian when omitted.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub s: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    /// Print a confusion table per column (binary responses).
    #[arg(long)]
    pub confusion: bool,
    /// ROC curve CSV of the first column (binary responses).
    #[arg(long)]
    pub roc: Option<PathBuf>,
    /// Measures JSON; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SurvcurveArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub strata: Option<String>,
    #[arg(long)]
    pub sparse: bool,
    /// A single λ value or alias; defaults to lambda.1se for
    /// cross-validated models and the smallest λ otherwise.
    #[arg(long)]
    pub s: Option<String>,
    /// Survival curve CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            commands::report("usage", &e.render().to_string());
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Cv(a) => commands::cv(a),
        Command::Predict(a) => commands::predict(a),
        Command::Assess(a) => commands::assess(a),
        Command::Survcurve(a) => commands::survcurve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            commands::report(commands::kind_of(&e), &e.to_string());
            ExitCode::FAILURE
        }
    }
}

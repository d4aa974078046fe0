//! `estimand`: estimand-aware matching, weighting, and effect estimation
//! for observational two-group data.
//!
//! Subcommands:
//! - `analyze`  full run: propensity, design, diagnostics, estimation
//! - `balance`  design stage only; the outcome column is never read
//! - `simulate` bias evaluation of a pipeline against known truths
//! - `oracle`   print the built-in cohort's exact estimand values
//!
//! Exit codes: 0 success, 2 validation failure, 3 estimand/method
//! incompatibility, 4 internal solver failure.

mod config;
mod ingest;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use estimand_core::data::validate;
use estimand_core::estimation::{bootstrap, hajek_contrast, BootstrapSummary};
use estimand_core::pipeline::compatible;
use estimand_core::simulation::{evaluate_bias, oracle_cohort, true_estimands};
use estimand_core::Error as CoreError;

use config::{load_file_config, load_sim_config, FileConfig};

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_INCOMPATIBLE: u8 = 3;
pub const EXIT_SOLVER: u8 = 4;

/// A user-facing failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> CliError {
        CliError {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    pub fn from_core(error: CoreError) -> CliError {
        let code = match &error {
            CoreError::IncompatibleMethod { .. } => EXIT_INCOMPATIBLE,
            CoreError::PipelineFailure { .. } => EXIT_SOLVER,
            _ => EXIT_VALIDATION,
        };
        CliError {
            code,
            message: error.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "estimand",
    version,
    about = "Estimand-aware matching, weighting, and treatment-effect estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write an effect-estimate report
    Analyze(AnalyzeArgs),
    /// Run the design stage only (no outcome is ever read)
    Balance(BalanceArgs),
    /// Evaluate a pipeline's bias on simulated data with known truths
    Simulate(SimulateArgs),
    /// Print the built-in cohort's exact estimand values
    Oracle,
}

#[derive(Args, Default)]
struct AnalyzeArgs {
    /// JSON config file; command-line flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV data file with a header row
    #[arg(long)]
    data: Option<PathBuf>,
    /// Treatment column (values 0/1)
    #[arg(long)]
    treatment: Option<String>,
    /// Outcome column (may have empty cells)
    #[arg(long)]
    outcome: Option<String>,
    /// Comma-separated covariate columns
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    /// Target estimand: att, atu, ate, or ato
    #[arg(long)]
    estimand: Option<String>,
    /// Design method (e.g. smr-weights, full-matching, overlap-weights)
    #[arg(long)]
    method: Option<String>,
    /// Caliper width as a multiple of the SD of the logit scores
    #[arg(long)]
    caliper: Option<f64>,
    /// Controls per treated unit for pair methods
    #[arg(long)]
    ratio: Option<u32>,
    /// Stratum count for fine stratification
    #[arg(long)]
    strata: Option<usize>,
    /// Bins per continuous covariate for coarsened exact matching
    #[arg(long)]
    cem_bins: Option<usize>,
    /// Balance tolerance for cardinality matching
    #[arg(long)]
    delta: Option<f64>,
    /// Score-window trim bounds (both required together)
    #[arg(long)]
    trim_lo: Option<f64>,
    #[arg(long)]
    trim_hi: Option<f64>,
    /// Weight-percentile trim cap in (0, 1]
    #[arg(long)]
    trim_percentile: Option<f64>,
    /// Effect scale: mean-difference, risk-ratio, or odds-ratio
    #[arg(long)]
    measure: Option<String>,
    /// Bootstrap replications for SE and percentile interval
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Seed for the bootstrap
    #[arg(long)]
    seed: Option<u64>,
    /// Report destination (stdout when absent)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BalanceArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    treatment: Option<String>,
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    #[arg(long)]
    estimand: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    caliper: Option<f64>,
    #[arg(long)]
    ratio: Option<u32>,
    #[arg(long)]
    strata: Option<usize>,
    #[arg(long)]
    cem_bins: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    trim_lo: Option<f64>,
    #[arg(long)]
    trim_hi: Option<f64>,
    #[arg(long)]
    trim_percentile: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON config with `dgp`, `estimand`, `method`, `replications`, `seed`
    #[arg(long)]
    config: PathBuf,
    /// Override the config's replication count
    #[arg(long)]
    replications: Option<usize>,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Results destination (stdout when absent)
    #[arg(long)]
    output: Option<PathBuf>,
}

fn trim_from_flags(
    lo: Option<f64>,
    hi: Option<f64>,
    percentile: Option<f64>,
) -> Result<Option<estimand_core::weighting::TrimSpec>, CliError> {
    use estimand_core::weighting::TrimSpec;
    match (lo, hi, percentile) {
        (None, None, None) => Ok(None),
        (Some(lo), Some(hi), None) => Ok(Some(TrimSpec::ScoreWindow { lo, hi })),
        (None, None, Some(p)) => Ok(Some(TrimSpec::WeightPercentile { p })),
        (Some(_), None, None) | (None, Some(_), None) => Err(CliError::validation(
            "parameters `trim-lo` and `trim-hi` must be given together",
        )),
        _ => Err(CliError::validation(
            "give either a trim window (`trim-lo`/`trim-hi`) or `trim-percentile`, not both",
        )),
    }
}

fn flags_to_file_config(args: AnalyzeArgs) -> Result<(Option<PathBuf>, FileConfig), CliError> {
    let trim = trim_from_flags(args.trim_lo, args.trim_hi, args.trim_percentile)?;
    Ok((
        args.config,
        FileConfig {
            data: args.data,
            treatment: args.treatment,
            outcome: args.outcome,
            covariates: args.covariates,
            estimand: args.estimand,
            method: args.method,
            caliper: args.caliper,
            ratio: args.ratio,
            strata_count: args.strata,
            cem_bins: args.cem_bins,
            delta: args.delta,
            trim,
            measure: args.measure,
            bootstrap: args.bootstrap,
            seed: args.seed,
            output: args.output,
        },
    ))
}

fn emit(output: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::validation(format!("cannot write `{}`: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::validation(format!("serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Shared analyze/balance body. `estimate` is false for balance runs, in
/// which case no outcome column is resolved and no outcome value is read.
fn run_analysis(
    config_path: Option<PathBuf>,
    mut flags: FileConfig,
    estimate: bool,
) -> Result<(), CliError> {
    if let Some(path) = &config_path {
        load_file_config(path)?.merge_under(&mut flags);
    }
    let run = flags.resolve(estimate)?;

    // Compatibility is checked before the data file is opened.
    if !compatible(run.pipeline.estimand, run.pipeline.method) {
        return Err(CliError::from_core(CoreError::IncompatibleMethod {
            estimand: run.pipeline.estimand,
            method: run.pipeline.method.label().to_string(),
        }));
    }
    run.pipeline.validate().map_err(CliError::from_core)?;

    let text = std::fs::read_to_string(&run.data).map_err(|e| {
        CliError::validation(format!("cannot read data `{}`: {e}", run.data.display()))
    })?;
    let table = ingest::read_table(&text)?;
    let dataset = ingest::dataset_from_table(
        &table,
        &run.treatment,
        run.outcome.as_deref(),
        &run.covariates,
    )?;
    let findings = validate(&dataset);
    if !findings.is_empty() {
        let lines: Vec<String> = findings
            .iter()
            .map(|f| {
                if f.units.is_empty() {
                    f.message.clone()
                } else {
                    format!("{} (units {:?})", f.message, f.units)
                }
            })
            .collect();
        return Err(CliError::validation(format!(
            "dataset validation failed: {}",
            lines.join("; ")
        )));
    }

    let design = run.pipeline.design(&dataset).map_err(CliError::from_core)?;
    let estimate_section = if estimate {
        let point = hajek_contrast(&dataset, &design.weights, run.measure)
            .map_err(CliError::from_core)?;
        let boot: Option<BootstrapSummary> = match run.bootstrap {
            None => None,
            Some(b) => Some(
                bootstrap(
                    &dataset,
                    |d| Ok(run.pipeline.estimate(d, run.measure)?.point),
                    b,
                    run.seed,
                )
                .map_err(CliError::from_core)?,
            ),
        };
        Some((point, boot))
    } else {
        None
    };

    let report = report::build_report(
        if estimate { "analyze" } else { "balance" },
        &dataset,
        &design,
        run.pipeline.method.label(),
        estimate_section
            .as_ref()
            .map(|(est, boot)| (est, boot.as_ref())),
    )?;
    emit(run.output.as_ref(), &to_json(&report)?)
}

fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mut sim = load_sim_config(&args.config)?;
    if let Some(r) = args.replications {
        sim.replications = r;
    }
    if let Some(s) = args.seed {
        sim.seed = s;
    }
    if args.output.is_some() {
        sim.output = args.output;
    }
    let pipeline = sim.pipeline()?;
    if !compatible(pipeline.estimand, pipeline.method) {
        return Err(CliError::from_core(CoreError::IncompatibleMethod {
            estimand: pipeline.estimand,
            method: pipeline.method.label().to_string(),
        }));
    }
    pipeline.validate().map_err(CliError::from_core)?;
    sim.dgp.validate().map_err(CliError::from_core)?;
    let bias = evaluate_bias(&sim.dgp, &pipeline, sim.replications, sim.seed)
        .map_err(CliError::from_core)?;
    let results = report::SimReport {
        schema_version: report::SCHEMA_VERSION,
        command: "simulate",
        estimand: pipeline.estimand.label().to_lowercase(),
        method: pipeline.method.label().to_string(),
        replications: sim.replications,
        seed: sim.seed,
        mean_bias: bias.mean_bias,
        rmse: bias.rmse,
        infeasible_replicates: bias.infeasible_replicates,
        replicates: bias
            .replicates
            .iter()
            .map(|r| report::SimReplicate {
                seed: r.seed,
                estimate: r.estimate,
                truth: r.truth,
                feasible: r.feasible,
            })
            .collect(),
    };
    emit(sim.output.as_ref(), &to_json(&results)?)
}

fn format_value(v: f64) -> String {
    let text = format!("{v:.6}");
    let trimmed = text.trim_end_matches('0').trim_end_matches('.');
    trimmed.to_string()
}

fn run_oracle() -> Result<(), CliError> {
    let (data, pot, scores) = oracle_cohort();
    let truths =
        true_estimands(&pot, &data.treatments(), Some(&scores)).map_err(CliError::from_core)?;
    println!("built-in cohort: {} patients, 1 binary risk factor", data.len());
    println!("ATE = {}", format_value(truths.ate));
    println!("ATT = {}", format_value(truths.att));
    println!("ATU = {}", format_value(truths.atu));
    println!(
        "ATO = {} (overlap-tilted population, tilting h(x) = e(x)(1 - e(x)))",
        format_value(truths.ato.expect("scores supplied"))
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze(args) => {
            let (config_path, flags) = flags_to_file_config(args)?;
            run_analysis(config_path, flags, true)
        }
        Command::Balance(args) => {
            let trim = trim_from_flags(args.trim_lo, args.trim_hi, args.trim_percentile)?;
            let flags = FileConfig {
                data: args.data,
                treatment: args.treatment,
                outcome: None,
                covariates: args.covariates,
                estimand: args.estimand,
                method: args.method,
                caliper: args.caliper,
                ratio: args.ratio,
                strata_count: args.strata,
                cem_bins: args.cem_bins,
                delta: args.delta,
                trim,
                measure: None,
                bootstrap: None,
                seed: None,
                output: args.output,
            };
            run_analysis(args.config, flags, false)
        }
        Command::Simulate(args) => run_simulate(args),
        Command::Oracle => run_oracle(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

//! Run configuration: command-line flags merged over an optional JSON
//! config file (flags win), resolved into a validated pipeline.

use std::path::PathBuf;

use serde::Deserialize;

use estimand_core::data::Estimand;
use estimand_core::estimation::Measure;
use estimand_core::pipeline::{Method, MethodParams, Pipeline};
use estimand_core::simulation::DgpConfig;
use estimand_core::weighting::TrimSpec;

use crate::CliError;

/// Analysis settings as they may appear in a JSON config file. Every
/// field is optional; flags override file values.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub treatment: Option<String>,
    pub outcome: Option<String>,
    pub covariates: Option<Vec<String>>,
    pub estimand: Option<String>,
    pub method: Option<String>,
    pub caliper: Option<f64>,
    pub ratio: Option<u32>,
    pub strata_count: Option<usize>,
    pub cem_bins: Option<usize>,
    pub delta: Option<f64>,
    pub trim: Option<TrimSpec>,
    pub measure: Option<String>,
    pub bootstrap: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

pub fn load_file_config(path: &PathBuf) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read config `{}`: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("config `{}`: {e}", path.display())))
}

/// A fully resolved analysis run.
pub struct RunConfig {
    pub data: PathBuf,
    pub treatment: String,
    pub outcome: Option<String>,
    pub covariates: Vec<String>,
    pub pipeline: Pipeline,
    pub measure: Measure,
    pub bootstrap: Option<usize>,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

fn require<T>(value: Option<T>, name: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::validation(format!("missing required parameter `{name}`")))
}

pub fn parse_estimand(s: &str) -> Result<Estimand, CliError> {
    Estimand::parse(s)
        .ok_or_else(|| CliError::validation(format!("unknown estimand `{s}` (att, atu, ate, ato)")))
}

pub fn parse_method(s: &str) -> Result<Method, CliError> {
    Method::parse(s).ok_or_else(|| {
        let known: Vec<&str> = Method::ALL.iter().map(|m| m.label()).collect();
        CliError::validation(format!("unknown method `{s}` (one of: {})", known.join(", ")))
    })
}

impl FileConfig {
    /// Fill file values into any flag slot that is still empty.
    pub fn merge_under(self, flags: &mut FileConfig) {
        macro_rules! fill {
            ($($field:ident),*) => {
                $(if flags.$field.is_none() { flags.$field = self.$field; })*
            };
        }
        fill!(
            data, treatment, outcome, covariates, estimand, method, caliper, ratio,
            strata_count, cem_bins, delta, trim, measure, bootstrap, seed, output
        );
    }

    /// Resolve into a runnable configuration. `needs_outcome` is true for
    /// `analyze`; `balance` never resolves (or reads) the outcome column.
    pub fn resolve(self, needs_outcome: bool) -> Result<RunConfig, CliError> {
        let estimand = parse_estimand(&require(self.estimand, "estimand")?)?;
        let method = parse_method(&require(self.method, "method")?)?;
        let measure = match self.measure {
            None => Measure::MeanDifference,
            Some(s) => Measure::parse(&s).ok_or_else(|| {
                CliError::validation(format!(
                    "unknown measure `{s}` (mean-difference, risk-ratio, odds-ratio)"
                ))
            })?,
        };
        let mut params = MethodParams {
            caliper: self.caliper,
            trim: self.trim,
            cem_bins: self.cem_bins,
            delta: self.delta.map(|d| vec![d]),
            ..MethodParams::default()
        };
        if let Some(r) = self.ratio {
            params.ratio = r;
        }
        if let Some(k) = self.strata_count {
            params.strata_count = k;
        }
        let pipeline = Pipeline {
            estimand,
            method,
            params,
        };
        Ok(RunConfig {
            data: require(self.data, "data")?,
            treatment: require(self.treatment, "treatment")?,
            outcome: if needs_outcome {
                Some(require(self.outcome, "outcome")?)
            } else {
                None
            },
            covariates: require(self.covariates, "covariates")?,
            pipeline,
            measure,
            bootstrap: self.bootstrap,
            seed: self.seed.unwrap_or(0),
            output: self.output,
        })
    }
}

/// Simulation run: a data-generating process plus the pipeline to test.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFileConfig {
    pub dgp: DgpConfig,
    pub estimand: String,
    pub method: String,
    #[serde(default)]
    pub caliper: Option<f64>,
    #[serde(default)]
    pub ratio: Option<u32>,
    #[serde(default)]
    pub strata_count: Option<usize>,
    #[serde(default)]
    pub cem_bins: Option<usize>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub trim: Option<TrimSpec>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl SimFileConfig {
    pub fn pipeline(&self) -> Result<Pipeline, CliError> {
        let mut params = MethodParams {
            caliper: self.caliper,
            trim: self.trim,
            cem_bins: self.cem_bins,
            delta: self.delta.map(|d| vec![d]),
            ..MethodParams::default()
        };
        if let Some(r) = self.ratio {
            params.ratio = r;
        }
        if let Some(k) = self.strata_count {
            params.strata_count = k;
        }
        Ok(Pipeline {
            estimand: parse_estimand(&self.estimand)?,
            method: parse_method(&self.method)?,
            params,
        })
    }
}

pub fn load_sim_config(path: &PathBuf) -> Result<SimFileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read config `{}`: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("config `{}`: {e}", path.display())))
}

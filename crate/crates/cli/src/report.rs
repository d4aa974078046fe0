//! Machine-readable run reports. The JSON layout is fixed (struct field
//! order, sorted maps), so identical runs produce byte-identical files.

use std::collections::BTreeMap;

use serde::Serialize;

use estimand_core::data::{Dataset, MatchStructure, WeightVector};
use estimand_core::diagnostics::{
    balance_table, balance_verdict, overlap_report, BalanceTable, OverlapReport,
    DEFAULT_POSITIVITY_WINDOW,
};
use estimand_core::estimation::{BootstrapSummary, EffectEstimate};
use estimand_core::pipeline::Design;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: &'static str,
    pub data: DataSection,
    pub requested: LabelPair,
    pub reported: LabelPair,
    pub warnings: Vec<String>,
    pub design: DesignSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateSection>,
}

#[derive(Serialize)]
pub struct DataSection {
    pub n: usize,
    pub n_treated: usize,
    pub n_untreated: usize,
    pub covariates: Vec<String>,
}

#[derive(Serialize)]
pub struct LabelPair {
    pub estimand: String,
    pub method: String,
}

#[derive(Serialize)]
pub struct DesignSection {
    pub weights_provenance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propensity: Option<PropensitySection>,
    pub balance: BalanceSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap: Option<OverlapSection>,
    pub target_population: TargetPopulation,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub match_structure: Option<MatchSection>,
}

#[derive(Serialize)]
pub struct PropensitySection {
    pub converged: bool,
    pub iterations: usize,
    pub coefficients: Vec<f64>,
}

#[derive(Serialize)]
pub struct BalanceSection {
    pub covariates: Vec<BalanceRowSection>,
    pub n_treated: usize,
    pub n_untreated: usize,
    pub ess_treated: f64,
    pub ess_untreated: f64,
    pub verdict: String,
    pub positivity_flagged_units: Vec<usize>,
}

#[derive(Serialize)]
pub struct BalanceRowSection {
    pub name: String,
    pub smd_unadjusted: f64,
    pub smd_adjusted: Option<f64>,
    pub variance_ratio_unadjusted: f64,
    pub variance_ratio_adjusted: Option<f64>,
}

#[derive(Serialize)]
pub struct OverlapSection {
    /// min, 10th/30th/50th/70th/90th percentiles, max
    pub treated_quantiles: Vec<f64>,
    pub untreated_quantiles: Vec<f64>,
    pub window: (f64, f64),
    pub treated_outside_window: usize,
    pub untreated_outside_window: usize,
    pub tolerance: f64,
    pub feasibility: FeasibilitySection,
}

#[derive(Serialize)]
pub struct FeasibilitySection {
    pub att: bool,
    pub atu: bool,
    pub ate: bool,
    pub ato: bool,
}

#[derive(Serialize)]
pub struct TargetPopulation {
    pub treated_weighted_covariate_means: BTreeMap<String, f64>,
    pub untreated_weighted_covariate_means: BTreeMap<String, f64>,
}

#[derive(Serialize)]
pub struct MatchSection {
    pub method: String,
    pub n_strata: usize,
    pub n_discarded: usize,
    pub discarded_units: Vec<usize>,
}

#[derive(Serialize)]
pub struct EstimateSection {
    pub estimand: String,
    pub measure: String,
    pub point: f64,
    pub se: Option<f64>,
    pub interval: Option<(f64, f64)>,
    pub ess_treated: f64,
    pub ess_untreated: f64,
    pub provenance: String,
}

fn weighted_covariate_means(
    dataset: &Dataset,
    weights: &WeightVector,
    treated: bool,
) -> BTreeMap<String, f64> {
    let mut means = BTreeMap::new();
    for (j, name) in dataset.covariate_names().iter().enumerate() {
        let mut num = 0.0;
        let mut den = 0.0;
        for unit in dataset.units() {
            if unit.treated != treated {
                continue;
            }
            let w = weights.values()[unit.id];
            num += w * unit.covariates[j];
            den += w;
        }
        means.insert(name.clone(), if den > 0.0 { num / den } else { f64::NAN });
    }
    means
}

fn balance_section(table: &BalanceTable) -> BalanceSection {
    BalanceSection {
        covariates: table
            .rows
            .iter()
            .map(|r| BalanceRowSection {
                name: r.name.clone(),
                smd_unadjusted: r.smd_unadjusted,
                smd_adjusted: r.smd_adjusted,
                variance_ratio_unadjusted: r.variance_ratio_unadjusted,
                variance_ratio_adjusted: r.variance_ratio_adjusted,
            })
            .collect(),
        n_treated: table.n_treated,
        n_untreated: table.n_untreated,
        ess_treated: table.ess_treated,
        ess_untreated: table.ess_untreated,
        verdict: balance_verdict(table),
        positivity_flagged_units: table.positivity_flags.clone(),
    }
}

fn overlap_section(report: &OverlapReport) -> OverlapSection {
    OverlapSection {
        treated_quantiles: report.treated_quantiles.to_vec(),
        untreated_quantiles: report.untreated_quantiles.to_vec(),
        window: report.window,
        treated_outside_window: report.treated_outside_window,
        untreated_outside_window: report.untreated_outside_window,
        tolerance: report.tolerance,
        feasibility: FeasibilitySection {
            att: report.feasibility.att,
            atu: report.feasibility.atu,
            ate: report.feasibility.ate,
            ato: report.feasibility.ato,
        },
    }
}

fn match_section(structure: &MatchStructure) -> MatchSection {
    MatchSection {
        method: structure.method.label().to_string(),
        n_strata: structure.strata().len(),
        n_discarded: structure.discarded().len(),
        discarded_units: structure.discarded().to_vec(),
    }
}

/// Assemble the full report for an analyze or balance run.
pub fn build_report(
    command: &'static str,
    dataset: &Dataset,
    design: &Design,
    requested_method_label: &str,
    estimate: Option<(&EffectEstimate, Option<&BootstrapSummary>)>,
) -> Result<Report, CliError> {
    let scores = design.propensity.as_ref().map(|m| m.scores.as_slice());
    let balance = balance_table(
        dataset,
        scores,
        Some(&design.weights),
        DEFAULT_POSITIVITY_WINDOW,
    )
    .map_err(CliError::from_core)?;
    let overlap = scores.map(|s| overlap_report(s, &dataset.treatments(), None));
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        command,
        data: DataSection {
            n: dataset.len(),
            n_treated: dataset.n_treated(),
            n_untreated: dataset.n_untreated(),
            covariates: dataset.covariate_names().to_vec(),
        },
        requested: LabelPair {
            estimand: design.requested_estimand.label().to_lowercase(),
            method: requested_method_label.to_string(),
        },
        reported: LabelPair {
            estimand: design.final_estimand().label().to_lowercase(),
            method: design.effective_method.label().to_string(),
        },
        warnings: design.warnings.clone(),
        design: DesignSection {
            weights_provenance: design.weights.provenance.clone(),
            propensity: design.propensity.as_ref().map(|m| PropensitySection {
                converged: m.converged,
                iterations: m.iterations,
                coefficients: m.coefficients.clone(),
            }),
            balance: balance_section(&balance),
            overlap: overlap.as_ref().map(overlap_section),
            target_population: TargetPopulation {
                treated_weighted_covariate_means: weighted_covariate_means(
                    dataset,
                    &design.weights,
                    true,
                ),
                untreated_weighted_covariate_means: weighted_covariate_means(
                    dataset,
                    &design.weights,
                    false,
                ),
            },
            match_structure: design.match_structure.as_ref().map(match_section),
        },
        estimate: estimate.map(|(est, boot)| EstimateSection {
            estimand: est.estimand.label().to_lowercase(),
            measure: est.measure.label().to_string(),
            point: est.point,
            se: boot.map(|b| b.se),
            interval: boot.map(|b| b.interval),
            ess_treated: est.ess_treated,
            ess_untreated: est.ess_untreated,
            provenance: est.provenance.clone(),
        }),
    })
}

/// Simulation results file.
#[derive(Serialize)]
pub struct SimReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub estimand: String,
    pub method: String,
    pub replications: usize,
    pub seed: u64,
    pub mean_bias: f64,
    pub rmse: f64,
    pub infeasible_replicates: usize,
    pub replicates: Vec<SimReplicate>,
}

#[derive(Serialize)]
pub struct SimReplicate {
    pub seed: u64,
    pub estimate: f64,
    pub truth: f64,
    pub feasible: bool,
}

//! Estimand-labeled effect estimation: Hajek weighted contrasts,
//! stratified estimators, g-computation, ratio measures for binary
//! outcomes, subgroup estimates, and a unit-resampling bootstrap.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{Dataset, Estimand, MatchStructure, Unit, WeightVector};
use crate::rng::Rng;
use crate::weighting::{ess, quantile, Group};
use crate::{float, linalg, Error, Result};

/// Effect scale. Ratio measures require 0/1 outcomes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Measure {
    MeanDifference,
    RiskRatio,
    OddsRatio,
}

impl Measure {
    pub fn label(&self) -> &'static str {
        match self {
            Measure::MeanDifference => "mean-difference",
            Measure::RiskRatio => "risk-ratio",
            Measure::OddsRatio => "odds-ratio",
        }
    }

    pub fn parse(s: &str) -> Option<Measure> {
        match s.to_ascii_lowercase().as_str() {
            "mean-difference" => Some(Measure::MeanDifference),
            "risk-ratio" => Some(Measure::RiskRatio),
            "odds-ratio" => Some(Measure::OddsRatio),
            _ => None,
        }
    }
}

/// A point estimate with its estimand label, effect scale, provenance,
/// effective sample sizes, and (after bootstrapping) uncertainty.
#[derive(Clone, Debug)]
pub struct EffectEstimate {
    pub estimand: Estimand,
    pub measure: Measure,
    pub point: f64,
    pub se: Option<f64>,
    pub interval: Option<(f64, f64)>,
    pub provenance: String,
    pub ess_treated: f64,
    pub ess_untreated: f64,
}

/// Weighted mean outcome of one group; every positively weighted unit
/// must have an observed outcome.
fn weighted_outcome_mean(dataset: &Dataset, weights: &WeightVector, treated: bool) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for unit in dataset.units() {
        if unit.treated != treated {
            continue;
        }
        let w = weights.values()[unit.id];
        if w <= 0.0 {
            continue;
        }
        let y = unit.outcome.ok_or(Error::MissingOutcome { unit: unit.id })?;
        num += w * y;
        den += w;
    }
    if den <= 0.0 {
        return Err(Error::ZeroWeightGroup {
            group: if treated { "treated" } else { "untreated" },
        });
    }
    Ok(num / den)
}

fn check_binary_outcomes(dataset: &Dataset, weights: &WeightVector) -> Result<()> {
    for unit in dataset.units() {
        if weights.values()[unit.id] <= 0.0 {
            continue;
        }
        let y = unit.outcome.ok_or(Error::MissingOutcome { unit: unit.id })?;
        if y != 0.0 && y != 1.0 {
            return Err(Error::NonBinaryOutcome { unit: unit.id });
        }
    }
    Ok(())
}

/// Hajek (normalized) weighted contrast between the groups on the
/// requested scale. The estimand label is copied from the weights.
pub fn hajek_contrast(
    dataset: &Dataset,
    weights: &WeightVector,
    measure: Measure,
) -> Result<EffectEstimate> {
    if weights.len() != dataset.len() {
        return Err(Error::LengthMismatch {
            expected: dataset.len(),
            actual: weights.len(),
        });
    }
    let treatments = dataset.treatments();
    weights.check_both_groups_positive(&treatments)?;
    if measure != Measure::MeanDifference {
        check_binary_outcomes(dataset, weights)?;
    }
    let mt = weighted_outcome_mean(dataset, weights, true)?;
    let mc = weighted_outcome_mean(dataset, weights, false)?;
    let point = match measure {
        Measure::MeanDifference => mt - mc,
        Measure::RiskRatio => {
            if mc == 0.0 {
                return Err(Error::DegenerateDenominator {
                    reason: "untreated weighted proportion is zero".into(),
                });
            }
            mt / mc
        }
        Measure::OddsRatio => {
            if mt <= 0.0 || mt >= 1.0 || mc <= 0.0 || mc >= 1.0 {
                return Err(Error::DegenerateDenominator {
                    reason: format!(
                        "odds ratio needs proportions strictly inside (0, 1); got {mt} and {mc}"
                    ),
                });
            }
            (mt / (1.0 - mt)) / (mc / (1.0 - mc))
        }
    };
    Ok(EffectEstimate {
        estimand: weights.target,
        measure,
        point,
        se: None,
        interval: None,
        provenance: format!("hajek contrast on {}", weights.provenance),
        ess_treated: ess(weights, &treatments, Group::Treated)?,
        ess_untreated: ess(weights, &treatments, Group::Untreated)?,
    })
}

/// Both ratio measures at once: (risk ratio, odds ratio).
pub fn ratio_measures(
    dataset: &Dataset,
    weights: &WeightVector,
) -> Result<(EffectEstimate, EffectEstimate)> {
    Ok((
        hajek_contrast(dataset, weights, Measure::RiskRatio)?,
        hajek_contrast(dataset, weights, Measure::OddsRatio)?,
    ))
}

/// Combine within-stratum mean differences with stratum weights matched
/// to the estimand: stratum size for the ATE, treated count for the ATT,
/// untreated count for the ATU.
pub fn stratified_estimate(
    dataset: &Dataset,
    structure: &MatchStructure,
    target: Estimand,
) -> Result<EffectEstimate> {
    let mut num = 0.0;
    let mut den = 0.0;
    for stratum in structure.strata() {
        let mut ty = 0.0;
        let mut tn = 0.0;
        let mut cy = 0.0;
        let mut cn = 0.0;
        for &id in stratum {
            let unit = &dataset.units()[id];
            let y = unit.outcome.ok_or(Error::MissingOutcome { unit: id })?;
            if unit.treated {
                ty += y;
                tn += 1.0;
            } else {
                cy += y;
                cn += 1.0;
            }
        }
        if tn == 0.0 || cn == 0.0 {
            return Err(Error::EmptyGroup {
                group: if tn == 0.0 { "treated" } else { "untreated" },
            });
        }
        let effect = ty / tn - cy / cn;
        let weight = match target {
            Estimand::Ate => tn + cn,
            Estimand::Att => tn,
            Estimand::Atu => cn,
            Estimand::Ato => {
                return Err(Error::IncompatibleMethod {
                    estimand: Estimand::Ato,
                    method: "stratified estimator".into(),
                })
            }
        };
        num += weight * effect;
        den += weight;
    }
    if den == 0.0 {
        return Err(Error::Infeasible {
            reason: "no retained strata".into(),
        });
    }
    // ESS is reported from the implied per-unit weights; the point
    // estimate above never touches them.
    let implied = crate::matching::match_to_weights(structure, target, &dataset.treatments())?;
    let treatments = dataset.treatments();
    Ok(EffectEstimate {
        estimand: target,
        measure: Measure::MeanDifference,
        point: num / den,
        se: None,
        interval: None,
        provenance: format!("stratified estimator over {}", structure.method.label()),
        ess_treated: ess(&implied, &treatments, Group::Treated)?,
        ess_untreated: ess(&implied, &treatments, Group::Untreated)?,
    })
}

/// G-computation with a fully treatment-interacted linear outcome model:
/// one least-squares fit per treatment group, both potential outcomes
/// predicted for every unit, and the predicted contrasts averaged over
/// the target population (overlap-weighted for the ATO, which requires a
/// weight vector).
pub fn g_computation(
    dataset: &Dataset,
    target: Estimand,
    weights: Option<&WeightVector>,
) -> Result<EffectEstimate> {
    let k = dataset.n_covariates();
    let ncol = k + 1;
    let mut coefs: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (g, treated) in [(0usize, false), (1usize, true)] {
        let members: Vec<&Unit> = dataset
            .units()
            .iter()
            .filter(|u| u.treated == treated)
            .collect();
        if members.is_empty() {
            return Err(Error::EmptyGroup {
                group: if treated { "treated" } else { "untreated" },
            });
        }
        let mut x = Vec::with_capacity(members.len() * ncol);
        let mut y = Vec::with_capacity(members.len());
        for unit in &members {
            x.push(1.0);
            x.extend_from_slice(&unit.covariates);
            y.push(unit.outcome.ok_or(Error::MissingOutcome { unit: unit.id })?);
        }
        coefs[g] = linalg::wls(&x, &y, None, members.len(), ncol, 0.0).map_err(|col| {
            Error::CollinearColumns {
                columns: vec![col.saturating_sub(1)],
            }
        })?;
    }
    let predict = |unit: &Unit, g: usize| -> f64 {
        coefs[g][0]
            + unit
                .covariates
                .iter()
                .zip(&coefs[g][1..])
                .map(|(x, b)| x * b)
                .sum::<f64>()
    };

    let mut num = 0.0;
    let mut den = 0.0;
    for unit in dataset.units() {
        let w = match target {
            Estimand::Ate => 1.0,
            Estimand::Att => {
                if unit.treated {
                    1.0
                } else {
                    0.0
                }
            }
            Estimand::Atu => {
                if unit.treated {
                    0.0
                } else {
                    1.0
                }
            }
            Estimand::Ato => {
                let w = weights.ok_or(Error::InvalidSpec {
                    reason: "g-computation for the ATO needs overlap weights".into(),
                })?;
                w.values()[unit.id]
            }
        };
        if w <= 0.0 {
            continue;
        }
        num += w * (predict(unit, 1) - predict(unit, 0));
        den += w;
    }
    if den <= 0.0 {
        return Err(Error::ZeroWeightGroup { group: "selected" });
    }
    let treatments = dataset.treatments();
    let (ess_treated, ess_untreated) = match (target, weights) {
        (Estimand::Ato, Some(w)) => (
            ess(w, &treatments, Group::Treated)?,
            ess(w, &treatments, Group::Untreated)?,
        ),
        _ => (dataset.n_treated() as f64, dataset.n_untreated() as f64),
    };
    Ok(EffectEstimate {
        estimand: target,
        measure: Measure::MeanDifference,
        point: num / den,
        se: None,
        interval: None,
        provenance: "g-computation (treatment-interacted linear model)".into(),
        ess_treated,
        ess_untreated,
    })
}

/// Re-run a full pipeline inside a covariate-defined subgroup. The
/// pipeline is refit from scratch (propensity model included) because
/// subsetting changes the score model; covariates that are constant
/// within the subgroup are dropped before the refit.
pub fn subgroup_estimate<P, F>(dataset: &Dataset, predicate: P, run: F) -> Result<EffectEstimate>
where
    P: Fn(&Unit) -> bool,
    F: Fn(&Dataset) -> Result<EffectEstimate>,
{
    let sub = dataset.subset(&predicate).drop_constant_covariates();
    if sub.n_treated() == 0 || sub.n_untreated() == 0 {
        return Err(Error::EmptyGroup {
            group: if sub.n_treated() == 0 {
                "treated"
            } else {
                "untreated"
            },
        });
    }
    let mut estimate = run(&sub)?;
    estimate.provenance = format!(
        "{} [subgroup of {} units]",
        estimate.provenance,
        sub.len()
    );
    Ok(estimate)
}

/// Bootstrap summary: standard error and percentile interval of the
/// replicate estimates.
#[derive(Clone, Debug)]
pub struct BootstrapSummary {
    pub se: f64,
    pub interval: (f64, f64),
    pub replicates: usize,
    pub failures: usize,
}

/// Unit-level resampling bootstrap. Each replicate redraws n units with
/// replacement and re-runs the full pipeline (propensity refit included),
/// so design-stage uncertainty propagates. Replicate streams are derived
/// from `(seed, replicate index)`, making parallel and serial execution
/// identical. Aborts when more than 10% of replicates fail.
pub fn bootstrap<F>(
    dataset: &Dataset,
    run: F,
    replications: usize,
    seed: u64,
) -> Result<BootstrapSummary>
where
    F: Fn(&Dataset) -> Result<f64>,
{
    if replications < 2 {
        return Err(Error::InvalidSpec {
            reason: "bootstrap needs at least 2 replications".into(),
        });
    }
    let n = dataset.len();
    let mut estimates = Vec::with_capacity(replications);
    let mut failures = 0usize;
    let mut first_failure: Option<Error> = None;
    for r in 0..replications {
        let mut rng = Rng::derive(seed, r as u64);
        let indices: Vec<usize> = (0..n).map(|_| rng.index(n)).collect();
        let resample = dataset.resample(&indices);
        match run(&resample) {
            Ok(est) => estimates.push(est),
            Err(e) => {
                failures += 1;
                if first_failure.is_none() {
                    first_failure = Some(Error::PipelineFailure {
                        replicate: r,
                        seed,
                        source: alloc::boxed::Box::new(e),
                    });
                }
            }
        }
    }
    if failures * 10 > replications {
        return Err(first_failure.expect("failures imply a recorded failure"));
    }
    if estimates.len() < 2 {
        return Err(Error::Infeasible {
            reason: "fewer than 2 successful bootstrap replicates".into(),
        });
    }
    let m = estimates.iter().sum::<f64>() / estimates.len() as f64;
    let var = estimates.iter().map(|e| (e - m) * (e - m)).sum::<f64>()
        / (estimates.len() - 1) as f64;
    Ok(BootstrapSummary {
        se: float::sqrt(var),
        interval: (quantile(&estimates, 0.025), quantile(&estimates, 0.975)),
        replicates: estimates.len(),
        failures,
    })
}

//! Balance and overlap assessment, computable without outcomes: weighted
//! standardized mean differences, variance ratios, positivity flags, and
//! per-estimand feasibility verdicts.

use alloc::string::String;
use alloc::vec::Vec;

use crate::data::{Dataset, WeightVector};
use crate::weighting::{ess, Group};
use crate::{float, weighting, Error, Result};

/// Default score window used to flag potential positivity problems.
pub const DEFAULT_POSITIVITY_WINDOW: (f64, f64) = (0.1, 0.9);

/// Tolerance on the score scale for the feasibility verdicts. The verdicts
/// are a reporting heuristic: two units are considered comparable when
/// their scores differ by at most this amount.
pub const FEASIBILITY_TOLERANCE: f64 = 0.05;

/// Conventional balance threshold: |SMD| at or below this is "well
/// balanced".
pub const BALANCE_THRESHOLD: f64 = 0.1;

fn group_mean(
    dataset: &Dataset,
    covariate: usize,
    weights: Option<&WeightVector>,
    treated: bool,
) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, unit) in dataset.units().iter().enumerate() {
        if unit.treated != treated {
            continue;
        }
        let w = weights.map_or(1.0, |w| w.values()[i]);
        num += w * unit.covariates[covariate];
        den += w;
    }
    if den <= 0.0 {
        return Err(Error::ZeroWeightGroup {
            group: if treated { "treated" } else { "untreated" },
        });
    }
    Ok(num / den)
}

/// Unweighted sample variance (denominator n-1) of a covariate within one
/// group; 0 for groups of size one.
fn group_sample_variance(dataset: &Dataset, covariate: usize, treated: bool) -> f64 {
    let values: Vec<f64> = dataset
        .units()
        .iter()
        .filter(|u| u.treated == treated)
        .map(|u| u.covariates[covariate])
        .collect();
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (values.len() - 1) as f64
}

fn weighted_variance(
    dataset: &Dataset,
    covariate: usize,
    weights: &WeightVector,
    treated: bool,
) -> Result<f64> {
    let mean = group_mean(dataset, covariate, Some(weights), treated)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, unit) in dataset.units().iter().enumerate() {
        if unit.treated != treated {
            continue;
        }
        let w = weights.values()[i];
        let d = unit.covariates[covariate] - mean;
        num += w * d * d;
        den += w;
    }
    Ok(num / den)
}

/// Pooled standard deviation `sqrt((s_T^2 + s_C^2) / 2)` from the
/// unweighted full sample. The denominator is frozen pre-adjustment so
/// adjusted and unadjusted SMDs share a scale.
pub fn pooled_sd(dataset: &Dataset, covariate: usize) -> f64 {
    let vt = group_sample_variance(dataset, covariate, true);
    let vc = group_sample_variance(dataset, covariate, false);
    float::sqrt((vt + vc) / 2.0)
}

/// Standardized mean difference of a covariate: (weighted treated mean -
/// weighted untreated mean) / pooled unweighted SD.
pub fn smd(dataset: &Dataset, covariate: usize, weights: Option<&WeightVector>) -> Result<f64> {
    let mt = group_mean(dataset, covariate, weights, true)?;
    let mc = group_mean(dataset, covariate, weights, false)?;
    let sd = pooled_sd(dataset, covariate);
    let diff = mt - mc;
    if sd == 0.0 {
        if float::abs(diff) <= 1e-12 {
            return Ok(0.0);
        }
        return Err(Error::DegenerateDenominator {
            reason: alloc::format!(
                "constant covariate `{}` imbalance",
                dataset.covariate_names()[covariate]
            ),
        });
    }
    Ok(diff / sd)
}

/// Treated-over-untreated variance ratio; weighted when weights are given.
/// Non-finite when the untreated variance vanishes.
pub fn variance_ratio(
    dataset: &Dataset,
    covariate: usize,
    weights: Option<&WeightVector>,
) -> Result<f64> {
    let (vt, vc) = match weights {
        None => (
            group_sample_variance(dataset, covariate, true),
            group_sample_variance(dataset, covariate, false),
        ),
        Some(w) => (
            weighted_variance(dataset, covariate, w, true)?,
            weighted_variance(dataset, covariate, w, false)?,
        ),
    };
    Ok(vt / vc)
}

/// Balance of one covariate before and after adjustment.
#[derive(Clone, Debug)]
pub struct BalanceRow {
    pub name: String,
    pub smd_unadjusted: f64,
    pub smd_adjusted: Option<f64>,
    pub variance_ratio_unadjusted: f64,
    pub variance_ratio_adjusted: Option<f64>,
}

/// Full balance assessment: one row per covariate plus group sizes,
/// effective sample sizes, and positivity flags.
#[derive(Clone, Debug)]
pub struct BalanceTable {
    pub rows: Vec<BalanceRow>,
    pub n_treated: usize,
    pub n_untreated: usize,
    pub ess_treated: f64,
    pub ess_untreated: f64,
    /// Unit ids whose score falls outside the positivity window.
    pub positivity_flags: Vec<usize>,
}

pub fn balance_table(
    dataset: &Dataset,
    scores: Option<&[f64]>,
    weights: Option<&WeightVector>,
    window: (f64, f64),
) -> Result<BalanceTable> {
    let mut rows = Vec::with_capacity(dataset.n_covariates());
    for j in 0..dataset.n_covariates() {
        rows.push(BalanceRow {
            name: dataset.covariate_names()[j].clone(),
            smd_unadjusted: smd(dataset, j, None)?,
            smd_adjusted: weights.map(|w| smd(dataset, j, Some(w))).transpose()?,
            variance_ratio_unadjusted: variance_ratio(dataset, j, None)?,
            variance_ratio_adjusted: weights
                .map(|w| variance_ratio(dataset, j, Some(w)))
                .transpose()?,
        });
    }
    let treatments = dataset.treatments();
    let (ess_treated, ess_untreated) = match weights {
        Some(w) => (
            ess(w, &treatments, Group::Treated)?,
            ess(w, &treatments, Group::Untreated)?,
        ),
        None => (dataset.n_treated() as f64, dataset.n_untreated() as f64),
    };
    let positivity_flags = scores.map_or_else(Vec::new, |s| {
        s.iter()
            .enumerate()
            .filter(|(_, &e)| e < window.0 || e > window.1)
            .map(|(i, _)| i)
            .collect()
    });
    Ok(BalanceTable {
        rows,
        n_treated: dataset.n_treated(),
        n_untreated: dataset.n_untreated(),
        ess_treated,
        ess_untreated,
        positivity_flags,
    })
}

/// Which estimands the score distributions support.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeasibilityVerdicts {
    pub att: bool,
    pub atu: bool,
    pub ate: bool,
    pub ato: bool,
}

impl FeasibilityVerdicts {
    pub fn for_estimand(&self, estimand: crate::data::Estimand) -> bool {
        match estimand {
            crate::data::Estimand::Att => self.att,
            crate::data::Estimand::Atu => self.atu,
            crate::data::Estimand::Ate => self.ate,
            crate::data::Estimand::Ato => self.ato,
        }
    }
}

/// Score-distribution summary per group: min, the 10/30/50/70/90th
/// percentiles, and max.
#[derive(Clone, Debug)]
pub struct OverlapReport {
    pub treated_quantiles: [f64; 7],
    pub untreated_quantiles: [f64; 7],
    pub treated_outside_window: usize,
    pub untreated_outside_window: usize,
    pub window: (f64, f64),
    pub tolerance: f64,
    pub feasibility: FeasibilityVerdicts,
}

fn score_quantiles(scores: &[f64]) -> [f64; 7] {
    let mut q = [f64::NAN; 7];
    if scores.is_empty() {
        return q;
    }
    let probs = [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0];
    for (slot, p) in q.iter_mut().zip(probs) {
        *slot = weighting::quantile(scores, p);
    }
    q
}

/// Every score in `a` lies within `tol` of some score in `b`.
fn covered(a: &[f64], b: &[f64], tol: f64) -> bool {
    if a.is_empty() {
        return true;
    }
    if b.is_empty() {
        return false;
    }
    let mut sorted = b.to_vec();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    a.iter().all(|&x| {
        let idx = sorted.partition_point(|&v| v < x);
        let mut nearest = f64::INFINITY;
        if idx < sorted.len() {
            nearest = nearest.min(float::abs(sorted[idx] - x));
        }
        if idx > 0 {
            nearest = nearest.min(float::abs(sorted[idx - 1] - x));
        }
        nearest <= tol
    })
}

/// Summarize score overlap and decide which estimands the data support.
///
/// The verdicts operationalize the estimand-specific positivity
/// requirements on the score scale: the ATT needs every treated score to
/// have an untreated counterpart within the tolerance (treated profiles
/// must be possible to leave untreated), the ATU mirrors that, the ATE
/// needs both directions, and the ATO only needs some region containing
/// units from both groups. Mutual coverage makes the verdicts monotone:
/// ATE feasible implies all four.
///
/// The verdicts speak to overlap only. Exchangeability — no unmeasured
/// confounding, for the ATO required only within the equipoise region —
/// remains an assumption that no data-driven diagnostic can certify.
pub fn overlap_report(
    scores: &[f64],
    treatments: &[bool],
    window: Option<(f64, f64)>,
) -> OverlapReport {
    let window = window.unwrap_or(DEFAULT_POSITIVITY_WINDOW);
    let tol = FEASIBILITY_TOLERANCE;
    let treated: Vec<f64> = scores
        .iter()
        .zip(treatments)
        .filter(|(_, &t)| t)
        .map(|(&e, _)| e)
        .collect();
    let untreated: Vec<f64> = scores
        .iter()
        .zip(treatments)
        .filter(|(_, &t)| !t)
        .map(|(&e, _)| e)
        .collect();
    let att = covered(&treated, &untreated, tol);
    let atu = covered(&untreated, &treated, tol);
    let ato = treated
        .iter()
        .any(|&t| untreated.iter().any(|&c| float::abs(t - c) <= tol));
    OverlapReport {
        treated_quantiles: score_quantiles(&treated),
        untreated_quantiles: score_quantiles(&untreated),
        treated_outside_window: treated
            .iter()
            .filter(|&&e| e < window.0 || e > window.1)
            .count(),
        untreated_outside_window: untreated
            .iter()
            .filter(|&&e| e < window.0 || e > window.1)
            .count(),
        window,
        tolerance: tol,
        feasibility: FeasibilityVerdicts {
            att,
            atu,
            ate: att && atu,
            ato,
        },
    }
}

/// Human-readable balance verdict for reports.
pub fn balance_verdict(table: &BalanceTable) -> String {
    let worst = table
        .rows
        .iter()
        .map(|r| float::abs(r.smd_adjusted.unwrap_or(r.smd_unadjusted)))
        .fold(0.0f64, f64::max);
    if worst <= BALANCE_THRESHOLD {
        alloc::format!("well balanced (max |SMD| = {worst:.4} <= {BALANCE_THRESHOLD})")
    } else {
        alloc::format!("imbalanced (max |SMD| = {worst:.4} > {BALANCE_THRESHOLD})")
    }
}

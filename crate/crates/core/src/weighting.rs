//! Estimand-targeted weighting: inverse-probability weights for the ATE,
//! standardized-mortality-ratio weights for the ATT/ATU, overlap and
//! matching weights for the ATO, plus trimming and effective sample size.
//!
//! All weights are meant for Hajek (normalized) contrasts, so any positive
//! rescaling of a weight vector leaves every downstream estimate unchanged.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::data::{Estimand, WeightVector};
use crate::{Error, Result};

/// How to restrict extreme weights. Trimming changes the target population,
/// so trimmed outputs are always relabeled ATO.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case", tag = "mode"))]
pub enum TrimSpec {
    /// Zero the weight of units whose score falls outside `[lo, hi]`.
    ScoreWindow { lo: f64, hi: f64 },
    /// Cap weights at the `p`-th percentile of the positive weights.
    WeightPercentile { p: f64 },
}

impl TrimSpec {
    /// Common-support convention: scores in [0.1, 0.9].
    pub fn default_window() -> TrimSpec {
        TrimSpec::ScoreWindow { lo: 0.1, hi: 0.9 }
    }

    /// Conventional cap at the 99th percentile.
    pub fn default_percentile() -> TrimSpec {
        TrimSpec::WeightPercentile { p: 0.99 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TrimSpec::ScoreWindow { lo, hi } => {
                if !(lo > 0.0 && hi < 1.0 && lo < hi) {
                    return Err(Error::InvalidSpec {
                        reason: format!("trim window [{lo}, {hi}] must satisfy 0 < lo < hi < 1"),
                    });
                }
            }
            TrimSpec::WeightPercentile { p } => {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Error::InvalidSpec {
                        reason: format!("trim percentile {p} must lie in (0, 1]"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        match *self {
            TrimSpec::ScoreWindow { lo, hi } => format!("score window [{lo}, {hi}]"),
            TrimSpec::WeightPercentile { p } => format!("weight percentile cap {p}"),
        }
    }
}

/// Weight-diagnostic group selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    Treated,
    Untreated,
    All,
}

impl Group {
    fn contains(&self, treated: bool) -> bool {
        match self {
            Group::Treated => treated,
            Group::Untreated => !treated,
            Group::All => true,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Group::Treated => "treated",
            Group::Untreated => "untreated",
            Group::All => "selected",
        }
    }
}

fn check_scores(scores: &[f64], treatments: &[bool]) -> Result<()> {
    if scores.len() != treatments.len() {
        return Err(Error::LengthMismatch {
            expected: treatments.len(),
            actual: scores.len(),
        });
    }
    for (i, &e) in scores.iter().enumerate() {
        if !(e > 0.0 && e < 1.0) || !e.is_finite() {
            return Err(Error::ScoreOutOfRange { unit: i, value: e });
        }
    }
    Ok(())
}

/// Inverse probability weights targeting the ATE: `1/e` for treated units,
/// `1/(1-e)` for untreated units.
pub fn ipw_ate(scores: &[f64], treatments: &[bool]) -> Result<WeightVector> {
    check_scores(scores, treatments)?;
    let w = scores
        .iter()
        .zip(treatments)
        .map(|(&e, &t)| if t { 1.0 / e } else { 1.0 / (1.0 - e) })
        .collect();
    WeightVector::new(w, Estimand::Ate, "inverse probability weights".to_string())
}

/// Standardized-mortality-ratio weights. For the ATT the treated group is
/// left untouched (weight exactly 1) and untreated units get `e/(1-e)`;
/// the ATU mirrors the roles.
pub fn smr(scores: &[f64], treatments: &[bool], target: Estimand) -> Result<WeightVector> {
    check_scores(scores, treatments)?;
    let w: Vec<f64> = match target {
        Estimand::Att => scores
            .iter()
            .zip(treatments)
            .map(|(&e, &t)| if t { 1.0 } else { e / (1.0 - e) })
            .collect(),
        Estimand::Atu => scores
            .iter()
            .zip(treatments)
            .map(|(&e, &t)| if t { (1.0 - e) / e } else { 1.0 })
            .collect(),
        other => {
            return Err(Error::IncompatibleMethod {
                estimand: other,
                method: "smr-weights".to_string(),
            })
        }
    };
    WeightVector::new(
        w,
        target,
        format!("standardized mortality ratio weights ({})", target.label()),
    )
}

/// Overlap weights targeting the ATO: `1-e` for treated, `e` for untreated.
/// At the logistic MLE these balance every model covariate exactly.
pub fn overlap_ato(scores: &[f64], treatments: &[bool]) -> Result<WeightVector> {
    check_scores(scores, treatments)?;
    let w = scores
        .iter()
        .zip(treatments)
        .map(|(&e, &t)| if t { 1.0 - e } else { e })
        .collect();
    WeightVector::new(w, Estimand::Ato, "overlap weights".to_string())
}

/// Matching weights, the weighting analogue of 1:1 pair matching:
/// `min(e, 1-e)` divided by the own-group probability.
pub fn matching_weights(scores: &[f64], treatments: &[bool]) -> Result<WeightVector> {
    check_scores(scores, treatments)?;
    let w = scores
        .iter()
        .zip(treatments)
        .map(|(&e, &t)| {
            let m = e.min(1.0 - e);
            if t {
                m / e
            } else {
                m / (1.0 - e)
            }
        })
        .collect();
    WeightVector::new(w, Estimand::Ato, "matching weights".to_string())
}

/// Type-7 quantile (linear interpolation) of an unsorted sample.
pub(crate) fn quantile(values: &[f64], p: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() - 1) as f64 * p;
    let lo = h as usize;
    let frac = h - lo as f64;
    if lo + 1 < v.len() {
        v[lo] + frac * (v[lo + 1] - v[lo])
    } else {
        v[lo]
    }
}

/// Trim a weight vector. Score-window trimming zeroes units with scores
/// outside the window; percentile trimming caps weights at the requested
/// percentile of the positive weights. Either restriction changes the
/// target population, so the result is relabeled ATO.
pub fn trim(
    weights: &WeightVector,
    scores: &[f64],
    treatments: &[bool],
    spec: &TrimSpec,
) -> Result<WeightVector> {
    spec.validate()?;
    if weights.len() != treatments.len() {
        return Err(Error::LengthMismatch {
            expected: treatments.len(),
            actual: weights.len(),
        });
    }
    let trimmed: Vec<f64> = match *spec {
        TrimSpec::ScoreWindow { lo, hi } => {
            check_scores(scores, treatments)?;
            weights
                .values()
                .iter()
                .zip(scores)
                .map(|(&w, &e)| if e < lo || e > hi { 0.0 } else { w })
                .collect()
        }
        TrimSpec::WeightPercentile { p } => {
            let positive: Vec<f64> = weights.values().iter().copied().filter(|&w| w > 0.0).collect();
            if positive.is_empty() {
                return Err(Error::ZeroWeightGroup { group: "selected" });
            }
            let cap = quantile(&positive, p);
            weights.values().iter().map(|&w| w.min(cap)).collect()
        }
    };
    let result = WeightVector::new(
        trimmed,
        weights.target,
        weights.provenance.clone(),
    )?
    .relabel(
        Estimand::Ato,
        &format!("trimmed: {}; restriction changes the estimand", spec.describe()),
    );
    result.check_both_groups_positive(treatments)?;
    Ok(result)
}

/// Effective sample size `(sum w)^2 / sum w^2` over a group.
pub fn ess(weights: &WeightVector, treatments: &[bool], group: Group) -> Result<f64> {
    if weights.len() != treatments.len() {
        return Err(Error::LengthMismatch {
            expected: treatments.len(),
            actual: weights.len(),
        });
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for (&w, &t) in weights.values().iter().zip(treatments) {
        if group.contains(t) {
            sum += w;
            sum_sq += w * w;
        }
    }
    if sum_sq <= 0.0 {
        return Err(Error::ZeroWeightGroup {
            group: group.label(),
        });
    }
    Ok(sum * sum / sum_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propensity::fit_logistic;
    use crate::simulation::oracle_cohort;
    use alloc::vec;

    fn cohort_scores() -> (Vec<f64>, Vec<bool>) {
        let (data, _, scores) = oracle_cohort();
        (scores, data.treatments())
    }

    #[test]
    fn ipw_matches_stratum_arithmetic() {
        let (scores, treatments) = cohort_scores();
        let w = ipw_ate(&scores, &treatments).unwrap();
        let expected = [
            1.0 / 0.6,
            1.0 / 0.6,
            1.0 / 0.6,
            5.0,
            2.5,
            2.5,
            1.25,
            1.25,
            1.25,
            1.25,
        ];
        for (a, b) in w.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(w.target, Estimand::Ate);
    }

    #[test]
    fn smr_att_leaves_treated_at_one() {
        let (scores, treatments) = cohort_scores();
        let w = smr(&scores, &treatments, Estimand::Att).unwrap();
        for (i, (&wi, &t)) in w.values().iter().zip(&treatments).enumerate() {
            if t {
                assert_eq!(wi, 1.0);
            } else {
                let expected = if scores[i] == 0.6 { 1.5 } else { 0.25 };
                assert!((wi - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn smr_atu_mirrors() {
        let (scores, treatments) = cohort_scores();
        let w = smr(&scores, &treatments, Estimand::Atu).unwrap();
        for (i, (&wi, &t)) in w.values().iter().zip(&treatments).enumerate() {
            if t {
                let expected = if scores[i] == 0.6 { 2.0 / 3.0 } else { 4.0 };
                assert!((wi - expected).abs() < 1e-12);
            } else {
                assert_eq!(wi, 1.0);
            }
        }
    }

    #[test]
    fn smr_rejects_ate_and_ato() {
        let (scores, treatments) = cohort_scores();
        assert!(smr(&scores, &treatments, Estimand::Ate).is_err());
        assert!(smr(&scores, &treatments, Estimand::Ato).is_err());
    }

    #[test]
    fn overlap_weights_match_expected() {
        let (scores, treatments) = cohort_scores();
        let w = overlap_ato(&scores, &treatments).unwrap();
        let expected = [0.4, 0.4, 0.4, 0.8, 0.6, 0.6, 0.2, 0.2, 0.2, 0.2];
        for (a, b) in w.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn overlap_weighted_covariate_means_coincide() {
        let (data, _, _) = oracle_cohort();
        let model = fit_logistic(&data).unwrap();
        let w = overlap_ato(&model.scores, &data.treatments()).unwrap();
        let x = data.covariate_column(0);
        let (mut tw, mut tx, mut cw, mut cx) = (0.0, 0.0, 0.0, 0.0);
        for (i, unit) in data.units().iter().enumerate() {
            if unit.treated {
                tw += w.values()[i];
                tx += w.values()[i] * x[i];
            } else {
                cw += w.values()[i];
                cx += w.values()[i] * x[i];
            }
        }
        assert!((tx / tw - 0.4).abs() < 1e-8);
        assert!((cx / cw - 0.4).abs() < 1e-8);
    }

    #[test]
    fn matching_weights_match_expected() {
        let (scores, treatments) = cohort_scores();
        let w = matching_weights(&scores, &treatments).unwrap();
        let expected = [
            2.0 / 3.0,
            2.0 / 3.0,
            2.0 / 3.0,
            1.0,
            1.0,
            1.0,
            0.25,
            0.25,
            0.25,
            0.25,
        ];
        for (a, b) in w.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn half_scores_are_degenerate() {
        let scores = vec![0.5; 6];
        let treatments = vec![true, true, false, false, true, false];
        assert!(ipw_ate(&scores, &treatments)
            .unwrap()
            .values()
            .iter()
            .all(|&w| (w - 2.0).abs() < 1e-12));
        assert!(smr(&scores, &treatments, Estimand::Att)
            .unwrap()
            .values()
            .iter()
            .all(|&w| (w - 1.0).abs() < 1e-12));
        assert!(overlap_ato(&scores, &treatments)
            .unwrap()
            .values()
            .iter()
            .all(|&w| (w - 0.5).abs() < 1e-12));
        assert!(matching_weights(&scores, &treatments)
            .unwrap()
            .values()
            .iter()
            .all(|&w| (w - 1.0).abs() < 1e-12));
    }

    #[test]
    fn scores_below_half_mimic_att_weighting() {
        let scores = vec![0.1, 0.3, 0.45, 0.2];
        let treatments = vec![true, true, false, false];
        let w = matching_weights(&scores, &treatments).unwrap();
        assert_eq!(w.values()[0], 1.0);
        assert_eq!(w.values()[1], 1.0);
    }

    #[test]
    fn default_window_keeps_cohort_untrimmed() {
        let (scores, treatments) = cohort_scores();
        let base = ipw_ate(&scores, &treatments).unwrap();
        let trimmed = trim(&base, &scores, &treatments, &TrimSpec::default_window()).unwrap();
        assert_eq!(trimmed.values(), base.values());
        assert_eq!(trimmed.target, Estimand::Ato);
        assert!(trimmed.provenance.contains("trimmed"));
    }

    #[test]
    fn narrow_window_zeroes_low_scores_only() {
        let (scores, treatments) = cohort_scores();
        let base = ipw_ate(&scores, &treatments).unwrap();
        let trimmed = trim(
            &base,
            &scores,
            &treatments,
            &TrimSpec::ScoreWindow { lo: 0.5, hi: 0.9 },
        )
        .unwrap();
        for (i, &w) in trimmed.values().iter().enumerate() {
            if scores[i] < 0.5 {
                assert_eq!(w, 0.0, "unit {i}");
            } else {
                assert!(w > 0.0, "unit {i}");
            }
        }
        // Both groups survive inside the X = 0 stratum.
        trimmed.check_both_groups_positive(&treatments).unwrap();
    }

    #[test]
    fn percentile_one_is_identity() {
        let (scores, treatments) = cohort_scores();
        let base = ipw_ate(&scores, &treatments).unwrap();
        let trimmed = trim(
            &base,
            &scores,
            &treatments,
            &TrimSpec::WeightPercentile { p: 1.0 },
        )
        .unwrap();
        assert_eq!(trimmed.values(), base.values());
    }

    #[test]
    fn trimming_everything_in_one_group_fails() {
        let scores = vec![0.05, 0.6, 0.6, 0.6];
        let treatments = vec![true, false, false, false];
        let base = ipw_ate(&scores, &treatments).unwrap();
        assert!(matches!(
            trim(
                &base,
                &scores,
                &treatments,
                &TrimSpec::ScoreWindow { lo: 0.1, hi: 0.9 }
            ),
            Err(Error::ZeroWeightGroup { group: "treated" })
        ));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(TrimSpec::ScoreWindow { lo: 0.9, hi: 0.1 }.validate().is_err());
        assert!(TrimSpec::ScoreWindow { lo: 0.0, hi: 0.9 }.validate().is_err());
        assert!(TrimSpec::WeightPercentile { p: 0.0 }.validate().is_err());
        assert!(TrimSpec::WeightPercentile { p: 1.5 }.validate().is_err());
    }

    #[test]
    fn ess_of_uniform_weights_is_group_size() {
        let w = WeightVector::new(vec![3.0; 5], Estimand::Ate, "uniform".into()).unwrap();
        let treatments = vec![true, true, false, false, false];
        assert!((ess(&w, &treatments, Group::Treated).unwrap() - 2.0).abs() < 1e-12);
        assert!((ess(&w, &treatments, Group::Untreated).unwrap() - 3.0).abs() < 1e-12);
        assert!((ess(&w, &treatments, Group::All).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn ess_of_cohort_untreated_ipw() {
        let (scores, treatments) = cohort_scores();
        let w = ipw_ate(&scores, &treatments).unwrap();
        let value = ess(&w, &treatments, Group::Untreated).unwrap();
        assert!((value - 100.0 / 18.75).abs() < 1e-10);
    }

    #[test]
    fn ess_single_positive_weight_is_one() {
        let w = WeightVector::new(vec![0.0, 4.0], Estimand::Ate, "t".into()).unwrap();
        assert!((ess(&w, &[false, true], Group::Treated).unwrap() - 1.0).abs() < 1e-12);
        assert!(ess(&w, &[false, true], Group::Untreated).is_err());
    }
}

//! End-to-end analysis pipelines: one estimand, one method, and the
//! parameters needed to run design and estimation from a raw dataset.
//!
//! The estimand-method compatibility map encodes which methods can target
//! which estimand. Runs are rejected up front when the pair is not in the
//! map; design-stage restrictions that change the estimand (calipers,
//! trimming) surface as relabeled weights plus a warning instead.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::data::{Dataset, Estimand, MatchStructure, WeightVector};
use crate::estimation::{hajek_contrast, EffectEstimate, Measure};
use crate::matching::{
    cardinality_matching, cem, fine_stratification, full_matching, greedy_nn, match_to_weights,
    optimal_pair, Distance, MatchSpec, DEFAULT_CALIPER,
};
use crate::propensity::{fit_logistic, PropensityModel};
use crate::weighting::{ipw_ate, matching_weights, overlap_ato, smr, trim, TrimSpec};
use crate::{Error, Result};

/// Design method identifiers, one per estimand-method cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Method {
    PairMatching,
    OptimalMatching,
    CaliperMatching,
    FullMatching,
    FineStratification,
    Cem,
    CardinalityMatching,
    SmrWeights,
    IpwWeights,
    OverlapWeights,
    MatchingWeights,
    WeightTrimming,
}

impl Method {
    pub const ALL: [Method; 12] = [
        Method::PairMatching,
        Method::OptimalMatching,
        Method::CaliperMatching,
        Method::FullMatching,
        Method::FineStratification,
        Method::Cem,
        Method::CardinalityMatching,
        Method::SmrWeights,
        Method::IpwWeights,
        Method::OverlapWeights,
        Method::MatchingWeights,
        Method::WeightTrimming,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Method::PairMatching => "pair-matching",
            Method::OptimalMatching => "optimal-matching",
            Method::CaliperMatching => "caliper-matching",
            Method::FullMatching => "full-matching",
            Method::FineStratification => "fine-stratification",
            Method::Cem => "cem",
            Method::CardinalityMatching => "cardinality-matching",
            Method::SmrWeights => "smr-weights",
            Method::IpwWeights => "ipw-weights",
            Method::OverlapWeights => "overlap-weights",
            Method::MatchingWeights => "matching-weights",
            Method::WeightTrimming => "weight-trimming",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.label() == s.to_ascii_lowercase())
    }

    fn is_pair_style(&self) -> bool {
        matches!(
            self,
            Method::PairMatching | Method::OptimalMatching | Method::CaliperMatching
        )
    }

    /// Coarsened exact and cardinality matching work on covariates alone;
    /// everything else needs fitted propensity scores.
    pub fn needs_scores(&self) -> bool {
        !matches!(self, Method::Cem | Method::CardinalityMatching)
    }
}

/// Which methods target which estimand. Pair methods serve the ATT/ATU,
/// full matching and fine stratification additionally serve the ATE, IPW
/// serves the ATE, SMR weights serve the ATT/ATU, and the
/// restriction-based methods (caliper, coarsening, cardinality, overlap,
/// matching weights, trimming) target the ATO.
pub fn compatible(estimand: Estimand, method: Method) -> bool {
    use Method::*;
    match estimand {
        Estimand::Att | Estimand::Atu => matches!(
            method,
            PairMatching | OptimalMatching | FullMatching | FineStratification | SmrWeights
        ),
        Estimand::Ate => matches!(method, FullMatching | FineStratification | IpwWeights),
        Estimand::Ato => matches!(
            method,
            CaliperMatching
                | Cem
                | CardinalityMatching
                | OverlapWeights
                | MatchingWeights
                | WeightTrimming
        ),
    }
}

/// All (estimand, method) pairs in the compatibility map.
pub fn compatibility_map() -> Vec<(Estimand, Method)> {
    let mut pairs = Vec::new();
    for &e in &Estimand::ALL {
        for &m in &Method::ALL {
            if compatible(e, m) {
                pairs.push((e, m));
            }
        }
    }
    pairs
}

/// Method parameters; fields irrelevant to the chosen method are ignored,
/// except the caliper, which is only legal on pair-style methods because
/// it changes the estimand.
#[derive(Clone, Debug)]
pub struct MethodParams {
    pub caliper: Option<f64>,
    pub ratio: u32,
    pub strata_count: usize,
    pub cem_bins: Option<usize>,
    pub delta: Option<Vec<f64>>,
    pub trim: Option<TrimSpec>,
    pub distance: Distance,
}

impl Default for MethodParams {
    fn default() -> Self {
        MethodParams {
            caliper: None,
            ratio: 1,
            strata_count: 5,
            cem_bins: None,
            delta: None,
            trim: None,
            distance: Distance::PropensityLogit,
        }
    }
}

/// A configured run: estimand, method, parameters.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub estimand: Estimand,
    pub method: Method,
    pub params: MethodParams,
}

/// Everything the design stage produces, before any outcome is read.
#[derive(Clone, Debug)]
pub struct Design {
    pub weights: WeightVector,
    pub match_structure: Option<MatchStructure>,
    pub propensity: Option<PropensityModel>,
    pub requested_estimand: Estimand,
    /// The method as it should be reported: pair matching that discarded
    /// focal units through a caliper is caliper matching.
    pub effective_method: Method,
    pub warnings: Vec<String>,
}

impl Design {
    pub fn final_estimand(&self) -> Estimand {
        self.weights.target
    }
}

impl Pipeline {
    pub fn new(estimand: Estimand, method: Method) -> Pipeline {
        Pipeline {
            estimand,
            method,
            params: MethodParams::default(),
        }
    }

    /// Reject incompatible estimand-method pairs and ill-formed
    /// parameters before any data is touched.
    pub fn validate(&self) -> Result<()> {
        if !compatible(self.estimand, self.method) {
            return Err(Error::IncompatibleMethod {
                estimand: self.estimand,
                method: self.method.label().to_string(),
            });
        }
        if self.params.caliper.is_some() && !self.method.is_pair_style() {
            return Err(Error::InvalidSpec {
                reason: format!(
                    "parameter `caliper` is only valid for pair-style methods, not `{}`",
                    self.method.label()
                ),
            });
        }
        if let Some(t) = &self.params.trim {
            t.validate()?;
        }
        self.match_spec().validate()
    }

    fn match_spec(&self) -> MatchSpec {
        let caliper = match self.method {
            Method::CaliperMatching => Some(self.params.caliper.unwrap_or(DEFAULT_CALIPER)),
            _ => self.params.caliper,
        };
        MatchSpec {
            distance: self.params.distance,
            caliper,
            ratio: self.params.ratio,
            strata_count: self.params.strata_count,
            cem_bins: self.params.cem_bins,
            delta: self.params.delta.clone(),
            // The focal group is the one the estimand leaves untouched.
            focal_treated: self.estimand != Estimand::Atu,
        }
    }

    /// Run the design stage: fit scores as needed, build the match
    /// structure or weights, and surface estimand relabeling as warnings.
    /// No outcome value is read.
    pub fn design(&self, dataset: &Dataset) -> Result<Design> {
        self.validate()?;
        let mut warnings = Vec::new();
        let spec = self.match_spec();

        let propensity = if self.method.needs_scores() {
            Some(fit_logistic(dataset)?)
        } else {
            // Fit anyway for diagnostics when possible; covariate-only
            // methods proceed without scores.
            match fit_logistic(dataset) {
                Ok(model) => Some(model),
                Err(e) => {
                    warnings.push(format!("propensity model unavailable for diagnostics: {e}"));
                    None
                }
            }
        };
        if let Some(model) = &propensity {
            if !model.converged {
                warnings.push(format!(
                    "propensity fit did not converge in {} iterations",
                    model.iterations
                ));
            }
        }
        let scores = propensity.as_ref().map(|m| m.scores.as_slice());
        let treatments = dataset.treatments();

        let (weights, match_structure) = match self.method {
            Method::PairMatching | Method::CaliperMatching => {
                let ms = greedy_nn(dataset, scores.expect("scores required"), &spec)?;
                let w = match_to_weights(&ms, self.estimand, &treatments)?;
                (w, Some(ms))
            }
            Method::OptimalMatching => {
                let ms = optimal_pair(dataset, scores.expect("scores required"), &spec)?;
                let w = match_to_weights(&ms, self.estimand, &treatments)?;
                (w, Some(ms))
            }
            Method::FullMatching => {
                let ms = full_matching(dataset, scores.expect("scores required"), &spec)?;
                let w = match_to_weights(&ms, self.estimand, &treatments)?;
                (w, Some(ms))
            }
            Method::FineStratification => {
                let ms = fine_stratification(dataset, scores.expect("scores required"), &spec)?;
                let w = match_to_weights(&ms, self.estimand, &treatments)?;
                (w, Some(ms))
            }
            Method::Cem => {
                let ms = cem(dataset, &spec)?;
                let w = match_to_weights(&ms, self.estimand, &treatments)?;
                (w, Some(ms))
            }
            Method::CardinalityMatching => {
                let ms = cardinality_matching(dataset, &spec)?;
                let w = match_to_weights(&ms, self.estimand, &treatments)?;
                (w, Some(ms))
            }
            Method::SmrWeights => (
                smr(scores.expect("scores required"), &treatments, self.estimand)?,
                None,
            ),
            Method::IpwWeights => (ipw_ate(scores.expect("scores required"), &treatments)?, None),
            Method::OverlapWeights => (
                overlap_ato(scores.expect("scores required"), &treatments)?,
                None,
            ),
            Method::MatchingWeights => (
                matching_weights(scores.expect("scores required"), &treatments)?,
                None,
            ),
            Method::WeightTrimming => {
                let s = scores.expect("scores required");
                let base = ipw_ate(s, &treatments)?;
                let spec = self.params.trim.unwrap_or_else(TrimSpec::default_window);
                (trim(&base, s, &treatments, &spec)?, None)
            }
        };

        let mut effective_method = self.method;
        if weights.target != self.estimand {
            warnings.push(format!(
                "estimand relabeled from {} to {}: {}",
                self.estimand.label(),
                weights.target.label(),
                weights.provenance
            ));
            if matches!(self.method, Method::PairMatching | Method::OptimalMatching)
                && self.params.caliper.is_some()
            {
                effective_method = Method::CaliperMatching;
            }
        }

        Ok(Design {
            weights,
            match_structure,
            propensity,
            requested_estimand: self.estimand,
            effective_method,
            warnings,
        })
    }

    /// Design plus a Hajek contrast on the requested scale.
    pub fn estimate(&self, dataset: &Dataset, measure: Measure) -> Result<EffectEstimate> {
        let design = self.design(dataset)?;
        hajek_contrast(dataset, &design.weights, measure)
    }

    /// Mean-difference point estimate, for resampling and simulation.
    pub fn point_estimate(&self, dataset: &Dataset) -> Result<f64> {
        Ok(self.estimate(dataset, Measure::MeanDifference)?.point)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::oracle_cohort;

    #[test]
    fn map_matches_the_method_table() {
        use Estimand::*;
        use Method::*;
        assert!(compatible(Att, PairMatching));
        assert!(compatible(Att, SmrWeights));
        assert!(compatible(Atu, FullMatching));
        assert!(compatible(Ate, IpwWeights));
        assert!(compatible(Ate, FineStratification));
        assert!(compatible(Ato, OverlapWeights));
        assert!(compatible(Ato, Cem));
        assert!(!compatible(Ate, PairMatching));
        assert!(!compatible(Ate, SmrWeights));
        assert!(!compatible(Att, IpwWeights));
        assert!(!compatible(Att, Cem));
        assert!(!compatible(Ato, IpwWeights));
        assert_eq!(compatibility_map().len(), 19);
    }

    #[test]
    fn incompatible_pair_is_rejected_before_data() {
        let pipeline = Pipeline::new(Estimand::Ate, Method::PairMatching);
        assert!(matches!(
            pipeline.validate(),
            Err(Error::IncompatibleMethod { .. })
        ));
    }

    #[test]
    fn caliper_on_non_pair_method_is_rejected() {
        let mut pipeline = Pipeline::new(Estimand::Ate, Method::FullMatching);
        pipeline.params.caliper = Some(0.2);
        assert!(matches!(pipeline.validate(), Err(Error::InvalidSpec { .. })));
    }

    #[test]
    fn smr_att_pipeline_estimates_the_cohort() {
        let (data, _, _) = oracle_cohort();
        let pipeline = Pipeline::new(Estimand::Att, Method::SmrWeights);
        let est = pipeline.estimate(&data, Measure::MeanDifference).unwrap();
        assert!((est.point - 16.25).abs() < 1e-6);
        assert_eq!(est.estimand, Estimand::Att);
    }

    #[test]
    fn caliper_discard_relabels_and_switches_method() {
        let (data, _, _) = oracle_cohort();
        let mut pipeline = Pipeline::new(Estimand::Att, Method::PairMatching);
        pipeline.params.caliper = Some(0.5);
        let design = pipeline.design(&data).unwrap();
        assert_eq!(design.final_estimand(), Estimand::Ato);
        assert_eq!(design.effective_method, Method::CaliperMatching);
        assert!(design.warnings.iter().any(|w| w.contains("relabeled")));
    }

    #[test]
    fn loose_caliper_keeps_the_requested_estimand() {
        let (data, _, _) = oracle_cohort();
        let mut pipeline = Pipeline::new(Estimand::Att, Method::PairMatching);
        pipeline.params.caliper = Some(10.0);
        let design = pipeline.design(&data).unwrap();
        assert_eq!(design.final_estimand(), Estimand::Att);
        assert_eq!(design.effective_method, Method::PairMatching);
    }

    #[test]
    fn design_never_reads_outcomes() {
        // Interleaved groups of equal size so every cell of the map is
        // feasible, pair methods for the ATU included.
        let n = 20;
        let data = Dataset::from_columns(
            alloc::vec![String::from("x")],
            alloc::vec![(0..n).map(|i| i as f64 * 0.1).collect()],
            (0..n).map(|i| i % 2 == 0).collect(),
            Some((0..n).map(|i| i as f64).collect()),
        )
        .unwrap();
        let stripped = Dataset::new(
            data.units()
                .iter()
                .map(|u| crate::data::Unit {
                    outcome: None,
                    ..u.clone()
                })
                .collect(),
            data.covariate_names().to_vec(),
        );
        for (estimand, method) in compatibility_map() {
            let mut pipeline = Pipeline::new(estimand, method);
            pipeline.params.delta = Some(alloc::vec![0.5]);
            let with = pipeline.design(&data).unwrap();
            let without = pipeline.design(&stripped).unwrap();
            assert_eq!(
                with.weights.values(),
                without.weights.values(),
                "{estimand:?} {method:?}"
            );
            assert_eq!(with.final_estimand(), without.final_estimand());
        }
    }

    #[test]
    fn weight_trimming_pipeline_targets_ato() {
        let (data, _, _) = oracle_cohort();
        let pipeline = Pipeline::new(Estimand::Ato, Method::WeightTrimming);
        let design = pipeline.design(&data).unwrap();
        assert_eq!(design.final_estimand(), Estimand::Ato);
        assert!(design.warnings.is_empty());
    }
}

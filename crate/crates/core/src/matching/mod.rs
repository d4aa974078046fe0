//! Matching methods: greedy and optimal pair matching, full matching via
//! min-cost network flow, fine stratification on score quantiles,
//! coarsened exact matching, and cardinality matching, plus conversion of
//! match structures into estimand-targeted weights.
//!
//! All solvers are deterministic: ties are broken by the lowest unit id
//! and identical inputs produce bit-identical structures.

mod cardinality;
mod flow;
mod full;
mod pair;
mod strat;
mod weights;

pub use cardinality::cardinality_matching;
pub use full::full_matching;
pub use pair::{greedy_nn, optimal_pair};
pub use strat::{cem, fine_stratification};
pub use weights::match_to_weights;

use alloc::format;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::propensity::logits;
use crate::{float, Error, Result};

/// Distance between a treated and an untreated unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Distance {
    /// |logit(e_t) - logit(e_c)| on the fitted propensity scores.
    PropensityLogit,
    /// Euclidean distance on covariates standardized by the full-sample SD.
    EuclideanStandardized,
}

/// Parameters shared by the matching methods. Fields irrelevant to a
/// method are ignored by it.
#[derive(Clone, Debug)]
pub struct MatchSpec {
    pub distance: Distance,
    /// Caliper as a multiple of the SD of the logit scores; the caliper
    /// constraint itself is always evaluated on the logit score scale.
    pub caliper: Option<f64>,
    /// Controls per focal unit for pair methods.
    pub ratio: u32,
    /// Number of quantile strata for fine stratification.
    pub strata_count: usize,
    /// Bins per continuous covariate for coarsened exact matching;
    /// `None` uses Sturges' count.
    pub cem_bins: Option<usize>,
    /// Per-covariate balance tolerance for cardinality matching.
    pub delta: Option<Vec<f64>>,
    /// Pair methods match the focal group into the other group: the
    /// treated group for the ATT (default), the untreated group for the
    /// ATU.
    pub focal_treated: bool,
}

impl Default for MatchSpec {
    fn default() -> Self {
        MatchSpec {
            distance: Distance::PropensityLogit,
            caliper: None,
            ratio: 1,
            strata_count: 5,
            cem_bins: None,
            delta: None,
            focal_treated: true,
        }
    }
}

/// Conventional caliper width when one is requested without a value.
pub const DEFAULT_CALIPER: f64 = 0.2;

impl MatchSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(c) = self.caliper {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::InvalidSpec {
                    reason: format!("caliper {c} must be positive"),
                });
            }
        }
        if self.ratio < 1 {
            return Err(Error::InvalidSpec {
                reason: "ratio must be at least 1".into(),
            });
        }
        if self.strata_count < 1 {
            return Err(Error::InvalidSpec {
                reason: "strata count must be at least 1".into(),
            });
        }
        if let Some(bins) = self.cem_bins {
            if bins < 1 {
                return Err(Error::InvalidSpec {
                    reason: "bin count must be at least 1".into(),
                });
            }
        }
        if let Some(delta) = &self.delta {
            if delta.iter().any(|&d| d.is_nan() || d <= 0.0) {
                return Err(Error::InvalidSpec {
                    reason: "balance tolerances must be positive".into(),
                });
            }
        }
        Ok(())
    }
}

/// Pairwise focal/non-focal distances with the caliper mask resolved.
pub(crate) struct PairDistances {
    pub focal_ids: Vec<usize>,
    pub other_ids: Vec<usize>,
    d: Vec<f64>,
    allowed: Vec<bool>,
}

impl PairDistances {
    pub fn dist(&self, fi: usize, oj: usize) -> f64 {
        self.d[fi * self.other_ids.len() + oj]
    }

    pub fn allowed(&self, fi: usize, oj: usize) -> bool {
        self.allowed[fi * self.other_ids.len() + oj]
    }
}

fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    float::sqrt(ss / (values.len() - 1) as f64)
}

pub(crate) fn build_distances(
    dataset: &Dataset,
    scores: &[f64],
    spec: &MatchSpec,
) -> Result<PairDistances> {
    spec.validate()?;
    if scores.len() != dataset.len() {
        return Err(Error::LengthMismatch {
            expected: dataset.len(),
            actual: scores.len(),
        });
    }
    let logit_scores = logits(scores)?;
    let focal_ids: Vec<usize> = dataset
        .units()
        .iter()
        .filter(|u| u.treated == spec.focal_treated)
        .map(|u| u.id)
        .collect();
    let other_ids: Vec<usize> = dataset
        .units()
        .iter()
        .filter(|u| u.treated != spec.focal_treated)
        .map(|u| u.id)
        .collect();
    if focal_ids.is_empty() || other_ids.is_empty() {
        return Err(Error::EmptyGroup {
            group: if focal_ids.is_empty() {
                "focal"
            } else {
                "non-focal"
            },
        });
    }

    // Covariate scales for the Euclidean option; constant covariates
    // contribute nothing.
    let scales: Vec<f64> = (0..dataset.n_covariates())
        .map(|j| {
            let sd = sample_sd(&dataset.covariate_column(j));
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();

    let caliper_width = spec
        .caliper
        .map(|multiplier| multiplier * sample_sd(&logit_scores));

    let mut d = Vec::with_capacity(focal_ids.len() * other_ids.len());
    let mut allowed = Vec::with_capacity(d.capacity());
    for &f in &focal_ids {
        for &o in &other_ids {
            let dist = match spec.distance {
                Distance::PropensityLogit => float::abs(logit_scores[f] - logit_scores[o]),
                Distance::EuclideanStandardized => {
                    let units = dataset.units();
                    let ss: f64 = units[f]
                        .covariates
                        .iter()
                        .zip(&units[o].covariates)
                        .zip(&scales)
                        .map(|((a, b), s)| {
                            let z = (a - b) / s;
                            z * z
                        })
                        .sum();
                    float::sqrt(ss)
                }
            };
            let ok = caliper_width
                .is_none_or(|w| float::abs(logit_scores[f] - logit_scores[o]) <= w);
            d.push(dist);
            allowed.push(ok);
        }
    }
    Ok(PairDistances {
        focal_ids,
        other_ids,
        d,
        allowed,
    })
}

/// Total within-stratum focal/non-focal distance of a structure, used by
/// tests and optimality comparisons.
pub fn total_pair_distance(
    dataset: &Dataset,
    scores: &[f64],
    spec: &MatchSpec,
    structure: &crate::data::MatchStructure,
) -> Result<f64> {
    let dm = build_distances(dataset, scores, spec)?;
    let focal_pos: alloc::collections::BTreeMap<usize, usize> = dm
        .focal_ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i))
        .collect();
    let other_pos: alloc::collections::BTreeMap<usize, usize> = dm
        .other_ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i))
        .collect();
    let mut total = 0.0;
    for stratum in structure.strata() {
        for &a in stratum {
            for &b in stratum {
                if let (Some(&fi), Some(&oj)) = (focal_pos.get(&a), other_pos.get(&b)) {
                    total += dm.dist(fi, oj);
                }
            }
        }
    }
    Ok(total)
}

//! Convert match structures into estimand-targeted weights.

use alloc::format;
use alloc::vec;

use crate::data::{Estimand, MatchStructure, WeightVector};
use crate::{Error, Result};

/// Weights that make the matched sample estimate `target`.
///
/// Within a stratum holding `t` treated and `c` untreated units:
/// - ATT: treated weight 1, untreated weight `t/c`, untreated weights then
///   rescaled to mean 1 over the retained untreated units;
/// - ATU: the mirror image;
/// - ATE: every unit weighted by stratum size over its group's count, so
///   each group is reweighted to the retained sample's stratum
///   distribution;
/// - ATO: the ATE formula over the retained sample, labeled ATO — the
///   matched (equipoise) sample itself is the target population.
///
/// Discarded units get weight zero. Pair matching cannot target the ATE
/// (the matched sample resembles one group, not the full sample). If a
/// unit of the target population was discarded, the output is relabeled
/// ATO with a provenance warning, because the restriction changed the
/// estimand.
pub fn match_to_weights(
    structure: &MatchStructure,
    target: Estimand,
    treatments: &[bool],
) -> Result<WeightVector> {
    if structure.method.is_pair() && target == Estimand::Ate {
        return Err(Error::IncompatibleMethod {
            estimand: Estimand::Ate,
            method: structure.method.label().into(),
        });
    }
    let n = treatments.len();
    let mut retained_treated = 0usize;
    let mut retained_untreated = 0usize;
    for stratum in structure.strata() {
        for &id in stratum {
            if treatments[id] {
                retained_treated += 1;
            } else {
                retained_untreated += 1;
            }
        }
    }
    if retained_treated == 0 || retained_untreated == 0 {
        return Err(Error::EmptyGroup {
            group: if retained_treated == 0 {
                "treated"
            } else {
                "untreated"
            },
        });
    }

    let mut weights = vec![0.0; n];
    for stratum in structure.strata() {
        let t = stratum.iter().filter(|&&id| treatments[id]).count() as f64;
        let c = stratum.len() as f64 - t;
        let size = stratum.len() as f64;
        for &id in stratum {
            let treated = treatments[id];
            weights[id] = match target {
                Estimand::Att => {
                    if treated {
                        1.0
                    } else {
                        (t / c) * (retained_untreated as f64 / retained_treated as f64)
                    }
                }
                Estimand::Atu => {
                    if treated {
                        (c / t) * (retained_treated as f64 / retained_untreated as f64)
                    } else {
                        1.0
                    }
                }
                Estimand::Ate | Estimand::Ato => {
                    if treated {
                        size / t
                    } else {
                        size / c
                    }
                }
            };
        }
    }

    let provenance = format!("{} -> {} weights", structure.method.label(), target.label());
    let result = WeightVector::new(weights, target, provenance)?;

    let discarded_target_unit = match target {
        Estimand::Att => structure.discards_any(treatments, true),
        Estimand::Atu => structure.discards_any(treatments, false),
        Estimand::Ate => !structure.discarded().is_empty(),
        Estimand::Ato => false,
    };
    if discarded_target_unit {
        return Ok(result.relabel(
            Estimand::Ato,
            &format!(
                "{} units of the {} target population were discarded; the restriction changes the estimand",
                structure.discarded().len(),
                target.label()
            ),
        ));
    }
    Ok(result)
}

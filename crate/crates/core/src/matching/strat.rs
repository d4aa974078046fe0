//! Stratification methods: fine stratification on propensity-score
//! quantiles and coarsened exact matching on binned covariates.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::MatchSpec;
use crate::data::{Dataset, MatchMethod, MatchStructure};
use crate::weighting::quantile;
use crate::{float, Error, Result};

/// Bin all units by score quantiles into `spec.strata_count` strata.
/// Strata lacking either treatment group are discarded wholesale.
pub fn fine_stratification(
    dataset: &Dataset,
    scores: &[f64],
    spec: &MatchSpec,
) -> Result<MatchStructure> {
    spec.validate()?;
    if scores.len() != dataset.len() {
        return Err(Error::LengthMismatch {
            expected: dataset.len(),
            actual: scores.len(),
        });
    }
    let k = spec.strata_count;
    // Quantile breakpoints; duplicates collapse when scores tie heavily.
    let mut breaks: Vec<f64> = (1..k)
        .map(|i| quantile(scores, i as f64 / k as f64))
        .collect();
    breaks.dedup();

    let mut bins: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (id, &e) in scores.iter().enumerate() {
        let bin = breaks.partition_point(|&b| b < e);
        bins.entry(bin).or_default().push(id);
    }
    split_viable(bins.into_values().collect(), dataset, MatchMethod::FineStratification)
}

/// Coarsened exact matching: continuous covariates are cut into equal-width
/// bins (Sturges' count by default), 0/1 covariates are matched exactly,
/// and units sharing the full coarsened signature form a stratum.
pub fn cem(dataset: &Dataset, spec: &MatchSpec) -> Result<MatchStructure> {
    spec.validate()?;
    if dataset.n_covariates() == 0 {
        return Err(Error::InvalidSpec {
            reason: "coarsened exact matching needs at least one covariate".into(),
        });
    }
    let n = dataset.len();
    let sturges = float::ceil(float::ln(n as f64) / float::ln(2.0)) as usize + 1;
    let bins = spec.cem_bins.unwrap_or(sturges).max(1);

    struct Rule {
        exact: bool,
        min: f64,
        width: f64,
        bins: usize,
    }
    let rules: Vec<Rule> = (0..dataset.n_covariates())
        .map(|j| {
            let col = dataset.covariate_column(j);
            let exact = col.iter().all(|&x| x == 0.0 || x == 1.0);
            let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            Rule {
                exact,
                min,
                width: (max - min) / bins as f64,
                bins,
            }
        })
        .collect();

    let mut strata_map: BTreeMap<Vec<u32>, Vec<usize>> = BTreeMap::new();
    for unit in dataset.units() {
        let signature: Vec<u32> = unit
            .covariates
            .iter()
            .zip(&rules)
            .map(|(&x, rule)| {
                if rule.exact {
                    x as u32
                } else if rule.width <= 0.0 {
                    0
                } else {
                    (float::floor((x - rule.min) / rule.width) as usize).min(rule.bins - 1) as u32
                }
            })
            .collect();
        strata_map.entry(signature).or_default().push(unit.id);
    }
    split_viable(strata_map.into_values().collect(), dataset, MatchMethod::CoarsenedExact)
}

fn split_viable(
    candidate_strata: Vec<Vec<usize>>,
    dataset: &Dataset,
    method: MatchMethod,
) -> Result<MatchStructure> {
    let treatments = dataset.treatments();
    let mut strata = Vec::new();
    let mut discarded = Vec::new();
    for stratum in candidate_strata {
        let has_treated = stratum.iter().any(|&id| treatments[id]);
        let has_untreated = stratum.iter().any(|&id| !treatments[id]);
        if has_treated && has_untreated {
            strata.push(stratum);
        } else {
            discarded.extend(stratum);
        }
    }
    if strata.is_empty() {
        return Err(Error::Infeasible {
            reason: "every stratum lacks one treatment group".into(),
        });
    }
    MatchStructure::new(strata, discarded, method, &treatments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::oracle_cohort;
    use alloc::vec;

    #[test]
    fn two_strata_coincide_with_the_covariate_levels() {
        let (data, _, scores) = oracle_cohort();
        let spec = MatchSpec {
            strata_count: 2,
            ..MatchSpec::default()
        };
        let ms = fine_stratification(&data, &scores, &spec).unwrap();
        assert_eq!(ms.strata().to_vec(), vec![
            vec![3, 6, 7, 8, 9],
            vec![0, 1, 2, 4, 5],
        ]);
        assert!(ms.discarded().is_empty());
    }

    #[test]
    fn one_stratum_is_no_adjustment() {
        let (data, _, scores) = oracle_cohort();
        let spec = MatchSpec {
            strata_count: 1,
            ..MatchSpec::default()
        };
        let ms = fine_stratification(&data, &scores, &spec).unwrap();
        assert_eq!(ms.strata().len(), 1);
        assert_eq!(ms.strata()[0].len(), 10);
    }

    #[test]
    fn singleton_strata_all_discarded_is_an_error() {
        let data = Dataset::from_columns(
            vec!["x".into()],
            vec![vec![0.0, 1.0, 2.0, 3.0]],
            vec![true, true, false, false],
            None,
        )
        .unwrap();
        let scores = vec![0.1, 0.2, 0.3, 0.4];
        let spec = MatchSpec {
            strata_count: 4,
            ..MatchSpec::default()
        };
        assert!(matches!(
            fine_stratification(&data, &scores, &spec),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn excess_strata_collapse_to_distinct_scores() {
        let (data, _, scores) = oracle_cohort();
        let spec = MatchSpec {
            strata_count: 5,
            ..MatchSpec::default()
        };
        let ms = fine_stratification(&data, &scores, &spec).unwrap();
        assert_eq!(ms.strata().len(), 2);
    }

    #[test]
    fn cem_on_binary_covariate_is_exact() {
        let (data, _, _) = oracle_cohort();
        let ms = cem(&data, &MatchSpec::default()).unwrap();
        assert_eq!(ms.strata().to_vec(), vec![
            vec![0, 1, 2, 4, 5],
            vec![3, 6, 7, 8, 9],
        ]);
        assert!(ms.discarded().is_empty());
    }

    #[test]
    fn identical_covariates_form_a_single_stratum() {
        let data = Dataset::from_columns(
            vec!["x".into()],
            vec![vec![2.5; 6]],
            vec![true, true, false, false, false, true],
            None,
        )
        .unwrap();
        let ms = cem(&data, &MatchSpec::default()).unwrap();
        assert_eq!(ms.strata().len(), 1);
        assert_eq!(ms.strata()[0].len(), 6);
    }

    #[test]
    fn disjoint_continuous_ranges_leave_nothing() {
        let data = Dataset::from_columns(
            vec!["x".into()],
            vec![vec![0.0, 0.1, 10.0, 10.1]],
            vec![true, true, false, false],
            None,
        )
        .unwrap();
        let spec = MatchSpec {
            cem_bins: Some(8),
            ..MatchSpec::default()
        };
        assert!(matches!(cem(&data, &spec), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn cem_discards_unmixed_signatures() {
        let data = Dataset::from_columns(
            vec!["a".into(), "b".into()],
            vec![
                vec![0.0, 0.0, 1.0, 1.0, 0.0],
                vec![1.0, 1.0, 0.0, 0.0, 0.0],
            ],
            vec![true, false, true, false, true],
            None,
        )
        .unwrap();
        let ms = cem(&data, &MatchSpec::default()).unwrap();
        assert_eq!(ms.strata().len(), 2);
        assert_eq!(ms.discarded(), &[4]);
    }
}

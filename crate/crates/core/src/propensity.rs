//! Propensity-score estimation: maximum-likelihood logistic regression of
//! the treatment indicator on the covariates, fit by iteratively reweighted
//! least squares.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::{float, linalg, Error, Result};

/// Scores are kept strictly inside (0, 1) so logits and inverse-probability
/// weights stay finite.
pub const SCORE_CLAMP: f64 = 1e-12;

const MAX_ITERATIONS: usize = 100;
const COEF_TOLERANCE: f64 = 1e-10;
const RIDGE: f64 = 1e-10;
const SEPARATION_BOUND: f64 = 30.0;

/// A fitted propensity model: P(T = 1 | X = x) per unit.
#[derive(Clone, Debug)]
pub struct PropensityModel {
    /// Intercept first, then one coefficient per covariate.
    pub coefficients: Vec<f64>,
    /// Fitted scores clamped to `[SCORE_CLAMP, 1 - SCORE_CLAMP]`.
    pub scores: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + float::exp(-z))
    } else {
        let e = float::exp(z);
        e / (1.0 + e)
    }
}

fn clamp_score(p: f64) -> f64 {
    p.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP)
}

/// ln(e / (1 - e)) for a score strictly inside (0, 1).
pub fn logit(score: f64) -> Result<f64> {
    if !(score > 0.0 && score < 1.0) {
        return Err(Error::InvalidSpec {
            reason: alloc::format!("logit undefined at score {score}"),
        });
    }
    Ok(float::ln(score / (1.0 - score)))
}

/// Elementwise [`logit`], reporting the offending unit index on failure.
pub fn logits(scores: &[f64]) -> Result<Vec<f64>> {
    scores
        .iter()
        .enumerate()
        .map(|(i, &e)| logit(e).map_err(|_| Error::ScoreOutOfRange { unit: i, value: e }))
        .collect()
}

fn design_matrix(dataset: &Dataset) -> (Vec<f64>, usize) {
    let ncol = dataset.n_covariates() + 1;
    let mut x = Vec::with_capacity(dataset.len() * ncol);
    for unit in dataset.units() {
        x.push(1.0);
        x.extend_from_slice(&unit.covariates);
    }
    (x, ncol)
}

/// Fit the logistic propensity model by IRLS.
///
/// The solver starts from the intercept-only fit (intercept at the logit of
/// the treated fraction), applies a ridge of 1e-10 to the weighted normal
/// equations for numerical stability, and stops when no coefficient moves
/// by more than 1e-10 or after 100 iterations. Any coefficient exceeding 30
/// in magnitude is treated as (quasi-)separation and reported as an error,
/// since the likelihood is diverging; exact stratification on the
/// separating covariate is the usual remedy.
pub fn fit_logistic(dataset: &Dataset) -> Result<PropensityModel> {
    let n = dataset.len();
    if dataset.n_treated() == 0 {
        return Err(Error::EmptyGroup { group: "treated" });
    }
    if dataset.n_untreated() == 0 {
        return Err(Error::EmptyGroup { group: "untreated" });
    }
    let (x, ncol) = design_matrix(dataset);
    let dependent = linalg::dependent_columns(&x, n, ncol);
    if !dependent.is_empty() {
        // Column 0 is the intercept; report covariate positions.
        return Err(Error::CollinearColumns {
            columns: dependent.iter().map(|&c| c.saturating_sub(1)).collect(),
        });
    }

    let y: Vec<f64> = dataset.units().iter().map(|u| u.treatment_indicator()).collect();
    let treated_fraction = dataset.n_treated() as f64 / n as f64;
    let mut beta = vec![0.0; ncol];
    beta[0] = logit(treated_fraction)?;

    let mut converged = false;
    let mut iterations = 0;
    let mut eta = vec![0.0; n];
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        for (r, e) in eta.iter_mut().enumerate() {
            *e = (0..ncol).map(|j| x[r * ncol + j] * beta[j]).sum();
        }
        let mu: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let w: Vec<f64> = mu.iter().map(|&m| (m * (1.0 - m)).max(1e-10)).collect();
        let z: Vec<f64> = (0..n).map(|r| eta[r] + (y[r] - mu[r]) / w[r]).collect();
        let next = linalg::wls(&x, &z, Some(&w), n, ncol, RIDGE).map_err(|col| {
            Error::CollinearColumns {
                columns: vec![col.saturating_sub(1)],
            }
        })?;
        let delta = next
            .iter()
            .zip(&beta)
            .map(|(a, b)| float::abs(a - b))
            .fold(0.0f64, f64::max);
        beta = next;
        if let Some(&worst) = beta
            .iter()
            .max_by(|a, b| float::abs(**a).partial_cmp(&float::abs(**b)).unwrap())
        {
            if float::abs(worst) > SEPARATION_BOUND {
                return Err(Error::PerfectSeparation { coefficient: worst });
            }
        }
        if delta < COEF_TOLERANCE {
            converged = true;
            break;
        }
    }

    let scores = (0..n)
        .map(|r| {
            let e: f64 = (0..ncol).map(|j| x[r * ncol + j] * beta[j]).sum();
            clamp_score(sigmoid(e))
        })
        .collect();
    Ok(PropensityModel {
        coefficients: beta,
        scores,
        converged,
        iterations,
    })
}

impl PropensityModel {
    /// Residuals of the score equations: `sum(t - e)` and
    /// `sum((t - e) x_j)` per covariate, all ~0 at the MLE.
    pub fn score_equation_residuals(&self, dataset: &Dataset) -> Vec<f64> {
        let mut residuals = vec![0.0; dataset.n_covariates() + 1];
        for (unit, &e) in dataset.units().iter().zip(&self.scores) {
            let r = unit.treatment_indicator() - e;
            residuals[0] += r;
            for (j, &xj) in unit.covariates.iter().enumerate() {
                residuals[j + 1] += r * xj;
            }
        }
        residuals
    }

    /// Bernoulli log-likelihood of arbitrary coefficients on this dataset.
    pub fn log_likelihood(dataset: &Dataset, coefficients: &[f64]) -> f64 {
        dataset
            .units()
            .iter()
            .map(|u| {
                let eta: f64 = coefficients[0]
                    + u.covariates
                        .iter()
                        .zip(&coefficients[1..])
                        .map(|(x, b)| x * b)
                        .sum::<f64>();
                // log sigma(eta) = -log(1 + exp(-eta)), computed stably.
                let log_p = if eta >= 0.0 {
                    -float::ln(1.0 + float::exp(-eta))
                } else {
                    eta - float::ln(1.0 + float::exp(eta))
                };
                let log_q = log_p - eta;
                if u.treated {
                    log_p
                } else {
                    log_q
                }
            })
            .sum()
    }

    /// Analytic gradient of [`Self::log_likelihood`] in the coefficients.
    pub fn log_likelihood_gradient(dataset: &Dataset, coefficients: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; coefficients.len()];
        for u in dataset.units() {
            let eta: f64 = coefficients[0]
                + u.covariates
                    .iter()
                    .zip(&coefficients[1..])
                    .map(|(x, b)| x * b)
                    .sum::<f64>();
            let r = u.treatment_indicator() - sigmoid(eta);
            grad[0] += r;
            for (j, &xj) in u.covariates.iter().enumerate() {
                grad[j + 1] += r * xj;
            }
        }
        grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, Unit};
    use crate::simulation::oracle_cohort;
    use alloc::string::String;

    fn binary_dataset(rows: &[(f64, bool)]) -> Dataset {
        Dataset::new(
            rows.iter()
                .enumerate()
                .map(|(i, &(x, t))| Unit {
                    id: i,
                    covariates: vec![x],
                    treated: t,
                    outcome: None,
                })
                .collect(),
            vec![String::from("x")],
        )
    }

    #[test]
    fn saturated_fit_recovers_stratum_proportions() {
        let (data, _, _) = oracle_cohort();
        let model = fit_logistic(&data).unwrap();
        assert!(model.converged);
        for unit in data.units() {
            let expected = if unit.covariates[0] == 0.0 { 0.6 } else { 0.2 };
            assert!(
                (model.scores[unit.id] - expected).abs() < 1e-8,
                "unit {} score {}",
                unit.id,
                model.scores[unit.id]
            );
        }
    }

    #[test]
    fn mean_score_equals_treated_fraction() {
        let (data, _, _) = oracle_cohort();
        let model = fit_logistic(&data).unwrap();
        let mean = model.scores.iter().sum::<f64>() / data.len() as f64;
        assert!((mean - 0.4).abs() < 1e-8);
    }

    #[test]
    fn score_equations_vanish_at_the_mle() {
        let (data, _, _) = oracle_cohort();
        let model = fit_logistic(&data).unwrap();
        for r in model.score_equation_residuals(&data) {
            assert!(r.abs() < 1e-8, "residual {r}");
        }
    }

    #[test]
    fn balanced_independent_treatment_gives_half_scores() {
        let data = binary_dataset(&[
            (0.0, true),
            (0.0, false),
            (1.0, true),
            (1.0, false),
            (0.0, true),
            (0.0, false),
            (1.0, true),
            (1.0, false),
        ]);
        let model = fit_logistic(&data).unwrap();
        for &s in &model.scores {
            assert!((s - 0.5).abs() < 1e-8);
        }
        assert!(model.coefficients[1].abs() < 1e-8, "slope should vanish");
    }

    #[test]
    fn treatment_equal_to_covariate_is_separated() {
        let data = binary_dataset(&[
            (1.0, true),
            (1.0, true),
            (1.0, true),
            (0.0, false),
            (0.0, false),
            (0.0, false),
        ]);
        assert!(matches!(
            fit_logistic(&data),
            Err(Error::PerfectSeparation { .. })
        ));
    }

    #[test]
    fn duplicated_covariate_reports_collinearity() {
        let units = (0..8)
            .map(|i| Unit {
                id: i,
                covariates: vec![i as f64, 2.0 * i as f64],
                treated: i % 2 == 0,
                outcome: None,
            })
            .collect();
        let data = Dataset::new(units, vec![String::from("a"), String::from("b")]);
        match fit_logistic(&data) {
            Err(Error::CollinearColumns { columns }) => assert_eq!(columns, vec![1]),
            other => panic!("expected collinearity error, got {other:?}"),
        }
    }

    #[test]
    fn logit_midpoint_and_example_value() {
        assert_eq!(logit(0.5).unwrap(), 0.0);
        assert!((logit(0.6).unwrap() - 0.405465).abs() < 1e-6);
        assert!(logit(0.0).is_err());
        assert!(logit(1.0).is_err());
    }

    #[test]
    fn logit_is_antisymmetric() {
        for &e in &[0.05, 0.2, 0.37, 0.5, 0.93] {
            let a = logit(e).unwrap();
            let b = logit(1.0 - e).unwrap();
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (data, _, _) = oracle_cohort();
        let model = fit_logistic(&data).unwrap();
        let points = [model.coefficients.clone(), vec![0.3, -0.7]];
        for coefs in &points {
            let analytic = PropensityModel::log_likelihood_gradient(&data, coefs);
            for j in 0..coefs.len() {
                let mut hi = coefs.clone();
                let mut lo = coefs.clone();
                hi[j] += 1e-6;
                lo[j] -= 1e-6;
                let numeric = (PropensityModel::log_likelihood(&data, &hi)
                    - PropensityModel::log_likelihood(&data, &lo))
                    / 2e-6;
                let scale = analytic[j].abs().max(1.0);
                assert!(
                    (analytic[j] - numeric).abs() / scale < 1e-4,
                    "component {j}: analytic {} vs numeric {numeric}",
                    analytic[j]
                );
            }
        }
    }
}

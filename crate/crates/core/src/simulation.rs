//! Ground-truth oracle harness: data-generating processes with known
//! potential outcomes, an embedded worked-example cohort, and bias
//! evaluation of estimation pipelines against true estimands.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{Dataset, Estimand, PotentialOutcomeTable, Unit};
use crate::diagnostics::overlap_report;
use crate::pipeline::Pipeline;
use crate::propensity::sigmoid;
use crate::rng::{derive_seed, Rng};
use crate::{float, Error, Result};

/// The built-in 10-patient surgical cohort with one binary risk factor,
/// both potential outcomes known, and heterogeneous effects: the new
/// procedure helps low-risk patients (who are usually treated) and harms
/// high-risk patients (who are usually not). Its true estimands are
/// ATE = 5, ATT = 20, ATU = -5 exactly, and the true treatment
/// probabilities are 0.6 (risk factor absent) and 0.2 (present).
///
/// Returns the observed dataset, the potential-outcome table, and the
/// true propensity scores.
pub fn oracle_cohort() -> (Dataset, PotentialOutcomeTable, Vec<f64>) {
    // (x, treated, y1, y0)
    const ROWS: [(f64, bool, f64, f64); 10] = [
        (0.0, true, 80.0, 60.0),
        (0.0, true, 80.0, 70.0),
        (0.0, true, 60.0, 10.0),
        (1.0, true, 30.0, 30.0),
        (0.0, false, 50.0, 40.0),
        (0.0, false, 30.0, 40.0),
        (1.0, false, 70.0, 70.0),
        (1.0, false, 60.0, 50.0),
        (1.0, false, 50.0, 80.0),
        (1.0, false, 50.0, 60.0),
    ];
    let units = ROWS
        .iter()
        .enumerate()
        .map(|(id, &(x, treated, y1, y0))| Unit {
            id,
            covariates: vec![x],
            treated,
            outcome: Some(if treated { y1 } else { y0 }),
        })
        .collect();
    let dataset = Dataset::new(units, vec![String::from("x")]);
    let pot = PotentialOutcomeTable::new(
        ROWS.iter().map(|r| r.2).collect(),
        ROWS.iter().map(|r| r.3).collect(),
    )
    .expect("aligned columns");
    let scores = ROWS
        .iter()
        .map(|r| if r.0 == 0.0 { 0.6 } else { 0.2 })
        .collect();
    (dataset, pot, scores)
}

/// Marginal distribution of one covariate.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case", tag = "law"))]
pub enum CovariateLaw {
    Binary { p: f64 },
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

/// A covariate interval on which the treatment probability is forced to
/// exactly 0 or 1, producing a structural positivity violation.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HardRegion {
    pub covariate: usize,
    pub lo: f64,
    pub hi: f64,
    pub score: f64,
}

/// Logistic treatment-assignment model with optional hard regions.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TreatmentModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub hard_regions: Vec<HardRegion>,
}

/// Linear potential-outcome model: `y0 = baseline(x) + noise`,
/// `y1 = y0_core + ice(x) + noise`, with independent noise per arm.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OutcomeModel {
    pub baseline_intercept: f64,
    pub baseline_coefficients: Vec<f64>,
    pub ice_intercept: f64,
    pub ice_coefficients: Vec<f64>,
    pub noise_sd: f64,
}

/// Unmeasured-confounder mechanism active only in the score tails: for
/// units whose pre-frailty score falls outside `[lo, hi]`, a hidden 0/1
/// frailty is drawn with probability `prob`. Frail units are pushed
/// toward the nearest extreme — `logit_shift` is subtracted from the
/// treatment logit below the window and added above it, making them
/// nearly guaranteed to miss or to receive treatment — and `y0_shift` is
/// added to their untreated potential outcome.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrailtySpec {
    pub lo: f64,
    pub hi: f64,
    pub prob: f64,
    pub logit_shift: f64,
    pub y0_shift: f64,
}

/// A complete data-generating process.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DgpConfig {
    pub n: usize,
    pub covariates: Vec<CovariateLaw>,
    pub treatment: TreatmentModel,
    pub outcome: OutcomeModel,
    #[cfg_attr(feature = "serde", serde(default))]
    pub frailty: Option<FrailtySpec>,
    pub seed: u64,
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Err(Error::InvalidSpec { reason });
        if self.n == 0 {
            return invalid("n must be positive".into());
        }
        let k = self.covariates.len();
        for law in &self.covariates {
            match *law {
                CovariateLaw::Binary { p } => {
                    if !(0.0..=1.0).contains(&p) {
                        return invalid(alloc::format!("binary probability {p} outside [0, 1]"));
                    }
                }
                CovariateLaw::Uniform { lo, hi } => {
                    if lo.partial_cmp(&hi) != Some(core::cmp::Ordering::Less) {
                        return invalid(alloc::format!("uniform range [{lo}, {hi}] is empty"));
                    }
                }
                CovariateLaw::Normal { sd, .. } => {
                    if sd < 0.0 {
                        return invalid("normal sd must be nonnegative".into());
                    }
                }
            }
        }
        if self.treatment.coefficients.len() != k
            || self.outcome.baseline_coefficients.len() != k
            || self.outcome.ice_coefficients.len() != k
        {
            return invalid(alloc::format!(
                "model coefficient lengths must equal the {k} covariates"
            ));
        }
        if self.outcome.noise_sd < 0.0 {
            return invalid("noise sd must be nonnegative".into());
        }
        for region in &self.treatment.hard_regions {
            if region.covariate >= k {
                return invalid(alloc::format!(
                    "hard region covariate {} out of range",
                    region.covariate
                ));
            }
            if region.lo.is_nan() || region.hi.is_nan() || region.lo > region.hi {
                return invalid("hard region interval is empty".into());
            }
            if region.score != 0.0 && region.score != 1.0 {
                return invalid("hard region score must be exactly 0 or 1".into());
            }
        }
        for (i, a) in self.treatment.hard_regions.iter().enumerate() {
            for b in &self.treatment.hard_regions[i + 1..] {
                if a.covariate == b.covariate && a.lo <= b.hi && b.lo <= a.hi {
                    return invalid("hard regions overlap".into());
                }
            }
        }
        if let Some(f) = &self.frailty {
            if f.lo.is_nan() || f.hi.is_nan() || f.lo >= f.hi || f.lo <= 0.0 || f.hi >= 1.0 {
                return invalid("frailty window must satisfy 0 < lo < hi < 1".into());
            }
            if !(0.0..=1.0).contains(&f.prob) {
                return invalid("frailty probability outside [0, 1]".into());
            }
        }
        Ok(())
    }

    fn linear(&self, covariates: &[f64], intercept: f64, coefficients: &[f64]) -> f64 {
        intercept
            + covariates
                .iter()
                .zip(coefficients)
                .map(|(x, b)| x * b)
                .sum::<f64>()
    }
}

/// Draw one dataset from the process. Deterministic given the seed; the
/// returned scores are the exact treatment probabilities used for the
/// draws (frailty and hard regions included).
pub fn generate(config: &DgpConfig) -> Result<(Dataset, PotentialOutcomeTable, Vec<f64>)> {
    config.validate()?;
    let mut rng = Rng::from_seed(config.seed);
    let n = config.n;
    let mut units = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    let mut y0 = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    for id in 0..n {
        let covariates: Vec<f64> = config
            .covariates
            .iter()
            .map(|law| match *law {
                CovariateLaw::Binary { p } => {
                    if rng.bernoulli(p) {
                        1.0
                    } else {
                        0.0
                    }
                }
                CovariateLaw::Uniform { lo, hi } => rng.uniform_in(lo, hi),
                CovariateLaw::Normal { mean, sd } => mean + sd * rng.normal(),
            })
            .collect();

        let mut logit =
            config.linear(&covariates, config.treatment.intercept, &config.treatment.coefficients);
        let mut score = sigmoid(logit);
        for region in &config.treatment.hard_regions {
            let x = covariates[region.covariate];
            if x >= region.lo && x <= region.hi {
                score = region.score;
                break;
            }
        }

        let mut frail = false;
        if let Some(spec) = &config.frailty {
            let low_tail = score < spec.lo;
            if (low_tail || score > spec.hi) && rng.bernoulli(spec.prob) {
                frail = true;
                if score > 0.0 && score < 1.0 {
                    let shift = if low_tail {
                        -spec.logit_shift
                    } else {
                        spec.logit_shift
                    };
                    logit = float::ln(score / (1.0 - score)) + shift;
                    score = sigmoid(logit);
                }
            }
        }

        let treated = rng.bernoulli(score);
        let baseline = config.linear(
            &covariates,
            config.outcome.baseline_intercept,
            &config.outcome.baseline_coefficients,
        );
        let ice = config.linear(
            &covariates,
            config.outcome.ice_intercept,
            &config.outcome.ice_coefficients,
        );
        let frail_shift = if frail {
            config.frailty.as_ref().map_or(0.0, |f| f.y0_shift)
        } else {
            0.0
        };
        let yi0 = baseline + frail_shift + config.outcome.noise_sd * rng.normal();
        let yi1 = baseline + ice + config.outcome.noise_sd * rng.normal();
        y0.push(yi0);
        y1.push(yi1);
        scores.push(score);
        units.push(Unit {
            id,
            covariates,
            treated,
            outcome: Some(if treated { yi1 } else { yi0 }),
        });
    }
    let names = (0..config.covariates.len())
        .map(|j| alloc::format!("x{j}"))
        .collect();
    Ok((
        Dataset::new(units, names),
        PotentialOutcomeTable::new(y1, y0)?,
        scores,
    ))
}

/// True estimand values of a known potential-outcome table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrueEstimands {
    pub ate: f64,
    pub att: f64,
    pub atu: f64,
    /// Overlap-tilted average with tilting function `e(1-e)`; present only
    /// when true scores are supplied. Reports must name this tilting
    /// choice, since equipoise populations can be defined many ways.
    pub ato: Option<f64>,
}

impl TrueEstimands {
    pub fn get(&self, estimand: Estimand) -> Option<f64> {
        match estimand {
            Estimand::Ate => Some(self.ate),
            Estimand::Att => Some(self.att),
            Estimand::Atu => Some(self.atu),
            Estimand::Ato => self.ato,
        }
    }
}

/// Compute true estimands from the potential outcomes: the ATE is the
/// mean individual effect, the ATT/ATU condition on the realized
/// treatment, and the ATO (when scores are given) tilts by `e(1-e)`.
pub fn true_estimands(
    pot: &PotentialOutcomeTable,
    treatments: &[bool],
    scores: Option<&[f64]>,
) -> Result<TrueEstimands> {
    if treatments.len() != pot.len() {
        return Err(Error::LengthMismatch {
            expected: pot.len(),
            actual: treatments.len(),
        });
    }
    if pot.is_empty() {
        return Err(Error::EmptyGroup { group: "treated" });
    }
    let n_treated = treatments.iter().filter(|&&t| t).count();
    if n_treated == 0 {
        return Err(Error::EmptyGroup { group: "treated" });
    }
    if n_treated == treatments.len() {
        return Err(Error::EmptyGroup { group: "untreated" });
    }
    let mut sum = 0.0;
    let mut sum_t = 0.0;
    let mut sum_c = 0.0;
    for (i, &t) in treatments.iter().enumerate() {
        let ice = pot.ice(i);
        sum += ice;
        if t {
            sum_t += ice;
        } else {
            sum_c += ice;
        }
    }
    let n = pot.len() as f64;
    let ato = match scores {
        None => None,
        Some(scores) => {
            if scores.len() != pot.len() {
                return Err(Error::LengthMismatch {
                    expected: pot.len(),
                    actual: scores.len(),
                });
            }
            let mut tilt_sum = 0.0;
            let mut tilt_ice = 0.0;
            for (i, &e) in scores.iter().enumerate() {
                let h = e * (1.0 - e);
                tilt_sum += h;
                tilt_ice += h * pot.ice(i);
            }
            if tilt_sum <= 0.0 {
                return Err(Error::DegenerateDenominator {
                    reason: "overlap tilting weights are all zero".into(),
                });
            }
            Some(tilt_ice / tilt_sum)
        }
    };
    Ok(TrueEstimands {
        ate: sum / n,
        att: sum_t / n_treated as f64,
        atu: sum_c / (pot.len() - n_treated) as f64,
        ato,
    })
}

/// One replicate of a bias evaluation.
#[derive(Clone, Debug)]
pub struct ReplicateResult {
    pub seed: u64,
    pub estimate: f64,
    pub truth: f64,
    /// Whether the overlap verdict (on the true scores) supports the
    /// pipeline's estimand in this replicate.
    pub feasible: bool,
}

/// Aggregate bias of a pipeline against the true estimand it claims to
/// target.
#[derive(Clone, Debug)]
pub struct BiasReport {
    pub mean_bias: f64,
    pub rmse: f64,
    pub infeasible_replicates: usize,
    pub replicates: Vec<ReplicateResult>,
}

/// Run `replications` draws of the process, apply the pipeline to the
/// observed data only, and compare each estimate to that replicate's true
/// estimand value. Replicate streams derive from `(seed, index)`.
pub fn evaluate_bias(
    config: &DgpConfig,
    pipeline: &Pipeline,
    replications: usize,
    seed: u64,
) -> Result<BiasReport> {
    if replications == 0 {
        return Err(Error::InvalidSpec {
            reason: "at least one replication is required".into(),
        });
    }
    let mut replicates = Vec::with_capacity(replications);
    let mut sum_bias = 0.0;
    let mut sum_sq = 0.0;
    let mut infeasible = 0usize;
    for r in 0..replications {
        let rep_seed = derive_seed(seed, r as u64);
        let mut rep_config = config.clone();
        rep_config.seed = rep_seed;
        let fail = |e: Error| Error::PipelineFailure {
            replicate: r,
            seed: rep_seed,
            source: alloc::boxed::Box::new(e),
        };
        let (data, pot, scores) = generate(&rep_config).map_err(fail)?;
        let treatments = data.treatments();
        let truth = true_estimands(&pot, &treatments, Some(&scores))
            .map_err(fail)?
            .get(pipeline.estimand)
            .ok_or_else(|| fail(Error::InvalidSpec {
                reason: "true estimand undefined for this configuration".into(),
            }))?;
        let estimate = pipeline.point_estimate(&data).map_err(fail)?;
        let feasible = overlap_report(&scores, &treatments, None)
            .feasibility
            .for_estimand(pipeline.estimand);
        if !feasible {
            infeasible += 1;
        }
        let bias = estimate - truth;
        sum_bias += bias;
        sum_sq += bias * bias;
        replicates.push(ReplicateResult {
            seed: rep_seed,
            estimate,
            truth,
            feasible,
        });
    }
    Ok(BiasReport {
        mean_bias: sum_bias / replications as f64,
        rmse: float::sqrt(sum_sq / replications as f64),
        infeasible_replicates: infeasible,
        replicates,
    })
}

/// Lack-of-overlap scenario A: a prognostic variable selects into
/// treatment such that low-x patients are never treated while high-x
/// patients are treated half the time. Untreated patients span the whole
/// range, treated patients only the top half, so only treated profiles
/// have counterparts: the ATT is estimable, the ATE and ATU are not.
pub fn scenario_a(n: usize, seed: u64) -> DgpConfig {
    DgpConfig {
        n,
        covariates: vec![CovariateLaw::Uniform { lo: 0.0, hi: 1.0 }],
        treatment: TreatmentModel {
            intercept: 0.0,
            coefficients: vec![0.0],
            hard_regions: vec![HardRegion {
                covariate: 0,
                lo: 0.0,
                hi: 0.5,
                score: 0.0,
            }],
        },
        outcome: OutcomeModel {
            baseline_intercept: 50.0,
            baseline_coefficients: vec![-20.0],
            ice_intercept: 10.0,
            ice_coefficients: vec![5.0],
            noise_sd: 5.0,
        },
        frailty: None,
        seed,
    }
}

/// Lack-of-overlap scenario B: low-x patients are never treated, high-x
/// patients always are, and only a middle band is genuinely mixed. Only
/// the ATO is estimable.
pub fn scenario_b(n: usize, seed: u64) -> DgpConfig {
    DgpConfig {
        n,
        covariates: vec![CovariateLaw::Uniform { lo: 0.0, hi: 1.0 }],
        treatment: TreatmentModel {
            intercept: 0.0,
            coefficients: vec![0.0],
            hard_regions: vec![
                HardRegion {
                    covariate: 0,
                    lo: 0.0,
                    hi: 1.0 / 3.0,
                    score: 0.0,
                },
                HardRegion {
                    covariate: 0,
                    lo: 2.0 / 3.0,
                    hi: 1.0,
                    score: 1.0,
                },
            ],
        },
        outcome: OutcomeModel {
            baseline_intercept: 50.0,
            baseline_coefficients: vec![-20.0],
            ice_intercept: 10.0,
            ice_coefficients: vec![5.0],
            noise_sd: 5.0,
        },
        frailty: None,
        seed,
    }
}

/// A saturated process: one binary covariate with the same treatment
/// probabilities and heterogeneous effects as the built-in cohort, plus
/// outcome noise. A saturated logistic fit recovers the true scores, so
/// inverse-probability weighting is consistent here.
pub fn saturated_binary(n: usize, seed: u64) -> DgpConfig {
    DgpConfig {
        n,
        covariates: vec![CovariateLaw::Binary { p: 0.5 }],
        treatment: TreatmentModel {
            // logit(0.6) at x=0, logit(0.2) at x=1
            intercept: 0.405_465_108_108_164_4,
            coefficients: vec![-1.791_759_469_228_055],
            hard_regions: vec![],
        },
        outcome: OutcomeModel {
            baseline_intercept: 50.0,
            baseline_coefficients: vec![10.0],
            ice_intercept: 16.0,
            ice_coefficients: vec![-22.0],
            noise_sd: 10.0,
        },
        frailty: None,
        seed,
    }
}

/// Tail-confounding scenario: continuous severity drives treatment; an
/// unmeasured frailty, present only where the score leaves [0.2, 0.8],
/// pushes its carriers toward treatment and lowers their untreated
/// outcome. Estimators that lean on the tails inherit the confounding;
/// overlap-weighted analyses concentrate where frailty is absent.
pub fn tail_confounding(n: usize, seed: u64) -> DgpConfig {
    DgpConfig {
        n,
        covariates: vec![CovariateLaw::Normal { mean: 0.0, sd: 1.0 }],
        treatment: TreatmentModel {
            intercept: 0.0,
            coefficients: vec![1.8],
            hard_regions: vec![],
        },
        outcome: OutcomeModel {
            baseline_intercept: 50.0,
            baseline_coefficients: vec![8.0],
            ice_intercept: 10.0,
            ice_coefficients: vec![0.0],
            noise_sd: 5.0,
        },
        frailty: Some(FrailtySpec {
            lo: 0.2,
            hi: 0.8,
            prob: 0.7,
            logit_shift: 2.5,
            y0_shift: -35.0,
        }),
        seed,
    }
}

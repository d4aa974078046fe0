//! Acceptance suite: one test per headline guarantee, each printing a
//! PASS/FAIL line. Expected values come from independent oracles computed
//! inside this file (stratified difference in means, brute-force
//! enumeration) or from the built-in cohort's exact truths, never from
//! the code paths under test.

use std::time::Instant;

use estimand_core::data::{Dataset, Estimand, PotentialOutcomeTable};
use estimand_core::diagnostics::{overlap_report, smd};
use estimand_core::estimation::{g_computation, hajek_contrast, stratified_estimate, Measure};
use estimand_core::matching::{
    cardinality_matching, fine_stratification, greedy_nn, match_to_weights, optimal_pair,
    total_pair_distance, MatchSpec,
};
use estimand_core::pipeline::{Method, Pipeline};
use estimand_core::propensity::fit_logistic;
use estimand_core::simulation::{
    evaluate_bias, generate, oracle_cohort, saturated_binary, scenario_a, scenario_b,
    tail_confounding, true_estimands, CovariateLaw, DgpConfig, OutcomeModel, TreatmentModel,
};
use estimand_core::weighting::{ipw_ate, overlap_ato, smr};

/// Deterministic test-local generator, independent of the crate's.
struct TestRng(u64);

impl TestRng {
    fn new(seed: u64) -> Self {
        TestRng(seed.max(1))
    }
    fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }
    fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
    fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() as usize) % (hi - lo + 1)
    }
}

fn report(index: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {index:02} {name}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "acceptance {index:02} {name} failed: {detail}");
}

/// Independent oracle: stratified difference in means over the cohort's
/// risk-factor levels, combined by the estimand's population weights.
/// Works directly on the raw columns.
fn cohort_stratified_oracle(target: Estimand) -> f64 {
    let (data, _, _) = oracle_cohort();
    let mut num = 0.0;
    let mut den = 0.0;
    for level in [0.0, 1.0] {
        let mut ty = 0.0;
        let mut tn = 0.0;
        let mut cy = 0.0;
        let mut cn = 0.0;
        for unit in data.units() {
            if unit.covariates[0] != level {
                continue;
            }
            let y = unit.outcome.unwrap();
            if unit.treated {
                ty += y;
                tn += 1.0;
            } else {
                cy += y;
                cn += 1.0;
            }
        }
        let effect = ty / tn - cy / cn;
        let weight = match target {
            Estimand::Ate => tn + cn,
            Estimand::Att => tn,
            Estimand::Atu => cn,
            Estimand::Ato => unreachable!("oracle covers point estimands only"),
        };
        num += weight * effect;
        den += weight;
    }
    num / den
}

#[test]
fn acceptance_01_cohort_truths_exact() {
    let (data, pot, scores) = oracle_cohort();
    let truths = true_estimands(&pot, &data.treatments(), Some(&scores)).unwrap();
    let pass = truths.ate == 5.0 && truths.att == 20.0 && truths.atu == -5.0;
    report(
        1,
        "built-in cohort truths are exact",
        pass,
        &format!(
            "ATE = {}, ATT = {}, ATU = {} (zero tolerance)",
            truths.ate, truths.att, truths.atu
        ),
    );
}

#[test]
fn acceptance_02_mixture_identity() {
    let (data, pot, _) = oracle_cohort();
    let truths = true_estimands(&pot, &data.treatments(), None).unwrap();
    let p = data.n_treated() as f64 / data.len() as f64;
    let mut worst: f64 = (truths.ate - (p * truths.att + (1.0 - p) * truths.atu)).abs();

    let mut rng = TestRng::new(20_02);
    for _ in 0..100 {
        let n = rng.range(4, 40);
        let y1: Vec<f64> = (0..n).map(|_| 3.0 * rng.uniform()).collect();
        let y0: Vec<f64> = (0..n).map(|_| 3.0 * rng.uniform()).collect();
        let mut treatments: Vec<bool> = (0..n).map(|_| rng.uniform() < 0.5).collect();
        treatments[0] = true;
        treatments[n - 1] = false;
        let pot = PotentialOutcomeTable::new(y1, y0).unwrap();
        let truths = true_estimands(&pot, &treatments, None).unwrap();
        let p = treatments.iter().filter(|&&t| t).count() as f64 / n as f64;
        let gap = (truths.ate - (p * truths.att + (1.0 - p) * truths.atu)).abs();
        worst = worst.max(gap);
    }
    report(
        2,
        "ATE = p ATT + (1-p) ATU",
        worst <= 1e-12,
        &format!("worst gap {worst:.2e} over the cohort and 100 random tables (tol 1e-12)"),
    );
}

#[test]
fn acceptance_03_saturated_triple_agreement() {
    let (data, _, _) = oracle_cohort();
    let model = fit_logistic(&data).unwrap();
    let treatments = data.treatments();
    let strata = fine_stratification(
        &data,
        &model.scores,
        &MatchSpec {
            strata_count: 2,
            ..MatchSpec::default()
        },
    )
    .unwrap();

    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for target in [Estimand::Ate, Estimand::Att, Estimand::Atu] {
        let oracle = cohort_stratified_oracle(target);
        let weighted = match target {
            Estimand::Ate => ipw_ate(&model.scores, &treatments).unwrap(),
            _ => smr(&model.scores, &treatments, target).unwrap(),
        };
        let hajek = hajek_contrast(&data, &weighted, Measure::MeanDifference)
            .unwrap()
            .point;
        let stratified = stratified_estimate(&data, &strata, target).unwrap().point;
        let gcomp = g_computation(&data, target, None).unwrap().point;
        for est in [hajek, stratified, gcomp] {
            worst = worst.max((est - oracle).abs());
        }
        lines.push(format!("{} oracle {oracle:.6}", target.label()));
    }
    let frozen_ok = (cohort_stratified_oracle(Estimand::Ate) - (-5.0 / 6.0)).abs() < 1e-12
        && (cohort_stratified_oracle(Estimand::Att) - 16.25).abs() < 1e-12
        && (cohort_stratified_oracle(Estimand::Atu) - (-110.0 / 9.0)).abs() < 1e-12;
    report(
        3,
        "weighted, stratified, and g-computation estimates agree when saturated",
        worst <= 1e-6 && frozen_ok,
        &format!("max |estimate - oracle| = {worst:.2e}; {}", lines.join(", ")),
    );
}

#[test]
fn acceptance_04_estimand_divergence() {
    let (data, _, _) = oracle_cohort();
    let treatments = data.treatments();
    let model = fit_logistic(&data).unwrap();
    let att = hajek_contrast(
        &data,
        &smr(&model.scores, &treatments, Estimand::Att).unwrap(),
        Measure::MeanDifference,
    )
    .unwrap()
    .point;
    let ato = hajek_contrast(
        &data,
        &overlap_ato(&model.scores, &treatments).unwrap(),
        Measure::MeanDifference,
    )
    .unwrap()
    .point;
    let ate = hajek_contrast(
        &data,
        &ipw_ate(&model.scores, &treatments).unwrap(),
        Measure::MeanDifference,
    )
    .unwrap()
    .point;
    let atu = hajek_contrast(
        &data,
        &smr(&model.scores, &treatments, Estimand::Atu).unwrap(),
        Measure::MeanDifference,
    )
    .unwrap()
    .point;
    let values_ok = (att - 16.25).abs() < 1e-4
        && (ato - 6.0).abs() < 1e-4
        && (ate - (-5.0 / 6.0)).abs() < 1e-4
        && (atu - (-110.0 / 9.0)).abs() < 1e-4;
    let ordered = att > ato && ato > ate && ate > atu;
    report(
        4,
        "methods targeting different estimands diverge in order",
        values_ok && ordered,
        &format!("ATT {att:.4} > ATO {ato:.4} > ATE {ate:.4} > ATU {atu:.4}"),
    );
}

#[test]
fn acceptance_05_overlap_weight_exact_balance() {
    let mut worst: f64 = 0.0;
    let mut fits = 0;
    // The cohort first.
    let (data, _, _) = oracle_cohort();
    let model = fit_logistic(&data).unwrap();
    let w = overlap_ato(&model.scores, &data.treatments()).unwrap();
    worst = worst.max(smd(&data, 0, Some(&w)).unwrap().abs());
    fits += 1;

    let mut rng = TestRng::new(20_05);
    while fits < 201 {
        let seed = rng.next_u64();
        let config = DgpConfig {
            n: rng.range(60, 200),
            covariates: vec![
                CovariateLaw::Normal { mean: 0.0, sd: 1.0 },
                CovariateLaw::Binary { p: 0.4 },
            ],
            treatment: TreatmentModel {
                intercept: 0.2,
                coefficients: vec![0.8, -0.6],
                hard_regions: vec![],
            },
            outcome: OutcomeModel {
                baseline_intercept: 0.0,
                baseline_coefficients: vec![1.0, 1.0],
                ice_intercept: 1.0,
                ice_coefficients: vec![0.5, -0.5],
                noise_sd: 1.0,
            },
            frailty: None,
            seed,
        };
        let (data, _, _) = generate(&config).unwrap();
        let model = fit_logistic(&data).unwrap();
        if !model.converged {
            continue;
        }
        let w = overlap_ato(&model.scores, &data.treatments()).unwrap();
        for j in 0..data.n_covariates() {
            worst = worst.max(smd(&data, j, Some(&w)).unwrap().abs());
        }
        fits += 1;
    }
    report(
        5,
        "overlap weights balance every model covariate exactly",
        worst <= 1e-8,
        &format!("max |weighted SMD| = {worst:.2e} over {fits} converged fits (tol 1e-8)"),
    );
}

#[test]
fn acceptance_06_overlap_scenario_verdicts() {
    let mut pass = true;
    let mut detail = String::new();
    for seed in 0..30 {
        let (data, _, scores) = generate(&scenario_a(250, seed)).unwrap();
        let v = overlap_report(&scores, &data.treatments(), None).feasibility;
        if !(v.att && !v.ate && !v.atu) {
            pass = false;
            detail = format!("scenario A seed {seed}: att={} ate={} atu={}", v.att, v.ate, v.atu);
            break;
        }
        let (data, _, scores) = generate(&scenario_b(250, seed)).unwrap();
        let v = overlap_report(&scores, &data.treatments(), None).feasibility;
        if !(v.ato && !v.att && !v.atu && !v.ate) {
            pass = false;
            detail = format!(
                "scenario B seed {seed}: att={} atu={} ate={} ato={}",
                v.att, v.atu, v.ate, v.ato
            );
            break;
        }
    }
    if pass {
        detail = "A: {ATT yes, ATE no, ATU no}; B: {ATO only} on every one of 30 seeds".into();
    }
    report(6, "lack-of-overlap scenario verdicts", pass, &detail);
}

/// Brute-force optimal 1:1 assignment by permutation search.
fn brute_force_pair_total(
    data: &Dataset,
    scores: &[f64],
    spec: &MatchSpec,
) -> f64 {
    let treated: Vec<usize> = data.units().iter().filter(|u| u.treated).map(|u| u.id).collect();
    let controls: Vec<usize> = data
        .units()
        .iter()
        .filter(|u| !u.treated)
        .map(|u| u.id)
        .collect();
    let logits: Vec<f64> = scores.iter().map(|e| (e / (1.0 - e)).ln()).collect();
    fn recurse(
        t_idx: usize,
        treated: &[usize],
        controls: &[usize],
        used: &mut Vec<bool>,
        logits: &[f64],
        running: f64,
        best: &mut f64,
    ) {
        if t_idx == treated.len() {
            *best = best.min(running);
            return;
        }
        if running >= *best {
            return;
        }
        for (ci, &c) in controls.iter().enumerate() {
            if used[ci] {
                continue;
            }
            used[ci] = true;
            let d = (logits[treated[t_idx]] - logits[c]).abs();
            recurse(t_idx + 1, treated, controls, used, logits, running + d, best);
            used[ci] = false;
        }
    }
    let _ = spec;
    let mut best = f64::INFINITY;
    let mut used = vec![false; controls.len()];
    recurse(0, &treated, &controls, &mut used, &logits, 0.0, &mut best);
    best
}

fn random_instance(rng: &mut TestRng, max_treated: usize, max_extra: usize) -> (Dataset, Vec<f64>) {
    let nt = rng.range(2, max_treated);
    let nc = rng.range(nt, nt + max_extra);
    let n = nt + nc;
    let treatments: Vec<bool> = (0..n).map(|i| i < nt).collect();
    let scores: Vec<f64> = (0..n).map(|_| 0.05 + 0.9 * rng.uniform()).collect();
    let data = Dataset::from_columns(
        vec!["x".into()],
        vec![scores.clone()],
        treatments,
        None,
    )
    .unwrap();
    (data, scores)
}

#[test]
fn acceptance_07_optimal_matching_dominance_and_exactness() {
    let started = Instant::now();
    let spec = MatchSpec::default();
    let mut rng = TestRng::new(20_07);
    let mut worst_regret: f64 = 0.0;
    let mut exact_checked = 0;
    let mut worst_exact_gap: f64 = 0.0;
    for _ in 0..200 {
        let (data, scores) = random_instance(&mut rng, 10, 4);
        let greedy = greedy_nn(&data, &scores, &spec).unwrap();
        let optimal = optimal_pair(&data, &scores, &spec).unwrap();
        let greedy_total = total_pair_distance(&data, &scores, &spec, &greedy).unwrap();
        let optimal_total = total_pair_distance(&data, &scores, &spec, &optimal).unwrap();
        worst_regret = worst_regret.max(optimal_total - greedy_total);
        if data.n_treated() <= 6 && data.n_untreated() <= 6 {
            let brute = brute_force_pair_total(&data, &scores, &spec);
            worst_exact_gap = worst_exact_gap.max((optimal_total - brute).abs());
            exact_checked += 1;
        }
    }
    // Guarantee a healthy sample of brute-force comparisons.
    while exact_checked < 50 {
        let (data, scores) = random_instance(&mut rng, 6, 0);
        let optimal = optimal_pair(&data, &scores, &spec).unwrap();
        let optimal_total = total_pair_distance(&data, &scores, &spec, &optimal).unwrap();
        let brute = brute_force_pair_total(&data, &scores, &spec);
        worst_exact_gap = worst_exact_gap.max((optimal_total - brute).abs());
        exact_checked += 1;
    }
    let elapsed = started.elapsed().as_secs_f64();
    let pass = worst_regret <= 1e-9 && worst_exact_gap <= 1e-9 && elapsed < 10.0;
    report(
        7,
        "optimal matching dominates greedy and equals brute force",
        pass,
        &format!(
            "max(optimal - greedy) = {worst_regret:.2e}; max |optimal - brute| = \
             {worst_exact_gap:.2e} on {exact_checked} small instances; {elapsed:.1} s"
        ),
    );
}

/// Brute-force best (total, treated) over all balanced subsets.
fn brute_force_cardinality(data: &Dataset, delta: f64) -> Option<(usize, usize)> {
    let n = data.len();
    let k = data.n_covariates();
    let thresholds: Vec<f64> = (0..k)
        .map(|j| delta * estimand_core::diagnostics::pooled_sd(data, j))
        .collect();
    let mut best: Option<(usize, usize)> = None;
    for mask in 1u64..(1 << n) {
        let kept: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let nt = kept.iter().filter(|&&i| data.units()[i].treated).count();
        let nc = kept.len() - nt;
        if nt == 0 || nc == 0 {
            continue;
        }
        let ok = (0..k).all(|j| {
            let mt: f64 = kept
                .iter()
                .filter(|&&i| data.units()[i].treated)
                .map(|&i| data.units()[i].covariates[j])
                .sum::<f64>()
                / nt as f64;
            let mc: f64 = kept
                .iter()
                .filter(|&&i| !data.units()[i].treated)
                .map(|&i| data.units()[i].covariates[j])
                .sum::<f64>()
                / nc as f64;
            (mt - mc).abs() <= thresholds[j] + 1e-12
        });
        if ok {
            let candidate = (kept.len(), nt);
            if best.is_none_or(|b| candidate > b) {
                best = Some(candidate);
            }
        }
    }
    best
}

#[test]
fn acceptance_08_cardinality_matching_exactness() {
    let started = Instant::now();
    let mut rng = TestRng::new(20_08);
    let mut checked = 0;
    let mut pass = true;
    let mut detail = String::new();
    while checked < 50 {
        let n = rng.range(4, 12);
        let mut treatments: Vec<bool> = (0..n).map(|_| rng.uniform() < 0.5).collect();
        treatments[0] = true;
        treatments[n - 1] = false;
        let covs: Vec<f64> = (0..n)
            .map(|_| if rng.uniform() < 0.5 { rng.uniform() } else { (rng.uniform() < 0.5) as u8 as f64 })
            .collect();
        let data =
            Dataset::from_columns(vec!["x".into()], vec![covs], treatments, None).unwrap();
        let delta = 0.05 + 0.45 * rng.uniform();
        let spec = MatchSpec {
            delta: Some(vec![delta]),
            ..MatchSpec::default()
        };
        let expected = brute_force_cardinality(&data, delta);
        let actual = cardinality_matching(&data, &spec).ok().map(|ms| {
            let nt = ms.strata()[0]
                .iter()
                .filter(|&&i| data.units()[i].treated)
                .count();
            (ms.n_retained(), nt)
        });
        if expected != actual {
            pass = false;
            detail = format!("instance {checked}: expected {expected:?}, got {actual:?}");
            break;
        }
        checked += 1;
    }
    let elapsed = started.elapsed().as_secs_f64();
    if pass {
        pass = elapsed < 30.0;
        detail = format!("{checked} instances match brute force; {elapsed:.1} s");
    }
    report(8, "cardinality matching equals brute-force enumeration", pass, &detail);
}

#[test]
fn acceptance_09_caliper_relabeling() {
    let mut rng = TestRng::new(20_09);
    let mut trials = 0;
    let mut relabels = 0;
    let mut pass = true;
    let mut detail = String::new();
    while trials < 150 {
        let (data, scores) = random_instance(&mut rng, 8, 5);
        let caliper = 0.02 + 1.5 * rng.uniform();
        let spec = MatchSpec {
            caliper: Some(caliper),
            ..MatchSpec::default()
        };
        let structure = match if trials % 2 == 0 {
            greedy_nn(&data, &scores, &spec)
        } else {
            optimal_pair(&data, &scores, &spec)
        } {
            Ok(ms) => ms,
            Err(_) => continue, // caliper discarded every focal unit
        };
        let treatments = data.treatments();
        let weights = match_to_weights(&structure, Estimand::Att, &treatments).unwrap();
        let discarded_treated = structure.discards_any(&treatments, true);
        if discarded_treated {
            relabels += 1;
            if weights.target != Estimand::Ato || !weights.provenance.contains("discarded") {
                pass = false;
                detail = format!(
                    "caliper {caliper:.3}: treated discarded but target is {}",
                    weights.target
                );
                break;
            }
        } else if weights.target != Estimand::Att {
            pass = false;
            detail = format!("caliper {caliper:.3}: nothing discarded yet target changed");
            break;
        }
        trials += 1;
    }
    if pass {
        pass = relabels > 10;
        detail = format!(
            "{relabels} of {trials} random-caliper runs discarded treated units; every one \
             was relabeled ATO with a warning, none reported ATT"
        );
    }
    report(9, "caliper discards always relabel the ATT to ATO", pass, &detail);
}

#[test]
fn acceptance_10_tail_confounding_robustness() {
    let batches = 50;
    let reps = 200;
    let config = tail_confounding(400, 0);
    let ato = Pipeline::new(Estimand::Ato, Method::OverlapWeights);
    let ate = Pipeline::new(Estimand::Ate, Method::IpwWeights);
    let mut wins = 0;
    for batch in 0..batches {
        let seed = 1_000 + batch as u64;
        let bias_ato = evaluate_bias(&config, &ato, reps, seed).unwrap().mean_bias;
        let bias_ate = evaluate_bias(&config, &ate, reps, seed.wrapping_add(977))
            .unwrap()
            .mean_bias;
        if bias_ato.abs() < bias_ate.abs() {
            wins += 1;
        }
    }
    let pass = wins * 100 >= batches * 80;
    report(
        10,
        "overlap weighting resists tail-only unmeasured confounding",
        pass,
        &format!("|bias(ATO)| < |bias(ATE)| in {wins}/{batches} seed batches (need >= 80%)"),
    );
}

#[test]
fn acceptance_11_saturated_ipw_consistency() {
    let reps = 500;
    let config = saturated_binary(1000, 0);
    let pipeline = Pipeline::new(Estimand::Ate, Method::IpwWeights);
    let bias = evaluate_bias(&config, &pipeline, reps, 4242).unwrap();
    let biases: Vec<f64> = bias
        .replicates
        .iter()
        .map(|r| r.estimate - r.truth)
        .collect();
    let mean = bias.mean_bias;
    let var = biases.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / (reps - 1) as f64;
    let mc_se = (var / reps as f64).sqrt();
    let pass = mean.abs() < 2.0 * mc_se;
    report(
        11,
        "saturated inverse-probability weighting is unbiased at scale",
        pass,
        &format!("mean bias {mean:.5} within 2 x MC SE ({:.5}) over {reps} replicates", 2.0 * mc_se),
    );
}

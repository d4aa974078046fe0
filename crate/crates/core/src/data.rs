//! Shared data model: units, datasets, potential outcomes, estimands,
//! weight vectors, and match structures.
//!
//! All types are immutable after construction and safe to share across
//! threads. Unit ids are the 0-based input order and serve as the universal
//! deterministic tie-breaking key in every downstream solver.
//!
//! Causal interpretation of any estimate additionally assumes stable unit
//! treatment values: no interference between units and no hidden versions
//! of the treatment. That assumption has no computational counterpart;
//! nothing here can check it.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::{Error, Result};

/// The causal quantity targeted by a design: an average treatment effect
/// over a specific population.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Estimand {
    /// Average treatment effect in the treated.
    Att,
    /// Average treatment effect in the untreated.
    Atu,
    /// Average treatment effect in the full population.
    Ate,
    /// Average treatment effect in the overlap (equipoise) population.
    Ato,
}

impl Estimand {
    pub const ALL: [Estimand; 4] = [Estimand::Att, Estimand::Atu, Estimand::Ate, Estimand::Ato];

    pub fn label(&self) -> &'static str {
        match self {
            Estimand::Att => "ATT",
            Estimand::Atu => "ATU",
            Estimand::Ate => "ATE",
            Estimand::Ato => "ATO",
        }
    }

    pub fn parse(s: &str) -> Option<Estimand> {
        match s.to_ascii_lowercase().as_str() {
            "att" => Some(Estimand::Att),
            "atu" => Some(Estimand::Atu),
            "ate" => Some(Estimand::Ate),
            "ato" => Some(Estimand::Ato),
            _ => None,
        }
    }
}

impl core::fmt::Display for Estimand {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.label())
    }
}

/// One observed unit. The outcome may be absent during design-stage
/// operations (matching, weighting, balance); estimation rejects units
/// that carry positive weight but no outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct Unit {
    pub id: usize,
    pub covariates: Vec<f64>,
    pub treated: bool,
    pub outcome: Option<f64>,
}

impl Unit {
    pub fn treatment_indicator(&self) -> f64 {
        if self.treated {
            1.0
        } else {
            0.0
        }
    }
}

/// An ordered collection of units with named covariates.
///
/// Categorical covariates must be pre-encoded as 0/1 indicators by
/// ingestion; everything downstream treats covariates as numeric.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    units: Vec<Unit>,
    covariate_names: Vec<String>,
}

impl Dataset {
    /// Construct without validation; run [`validate`] to collect findings.
    pub fn new(units: Vec<Unit>, covariate_names: Vec<String>) -> Dataset {
        Dataset {
            units,
            covariate_names,
        }
    }

    /// Build from parallel columns, assigning ids in input order.
    pub fn from_columns(
        covariate_names: Vec<String>,
        covariates: Vec<Vec<f64>>,
        treatments: Vec<bool>,
        outcomes: Option<Vec<f64>>,
    ) -> Result<Dataset> {
        let n = treatments.len();
        for col in &covariates {
            if col.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: col.len(),
                });
            }
        }
        if let Some(y) = &outcomes {
            if y.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: y.len(),
                });
            }
        }
        let units = (0..n)
            .map(|i| Unit {
                id: i,
                covariates: covariates.iter().map(|c| c[i]).collect(),
                treated: treatments[i],
                outcome: outcomes.as_ref().map(|y| y[i]),
            })
            .collect();
        Ok(Dataset::new(units, covariate_names))
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn n_treated(&self) -> usize {
        self.units.iter().filter(|u| u.treated).count()
    }

    pub fn n_untreated(&self) -> usize {
        self.len() - self.n_treated()
    }

    pub fn treatments(&self) -> Vec<bool> {
        self.units.iter().map(|u| u.treated).collect()
    }

    pub fn covariate_column(&self, j: usize) -> Vec<f64> {
        self.units.iter().map(|u| u.covariates[j]).collect()
    }

    /// New dataset keeping units matching the predicate; ids are reassigned
    /// to the 0-based order within the subset.
    pub fn subset<P: Fn(&Unit) -> bool>(&self, predicate: P) -> Dataset {
        let units = self
            .units
            .iter()
            .filter(|u| predicate(u))
            .enumerate()
            .map(|(i, u)| Unit {
                id: i,
                covariates: u.covariates.clone(),
                treated: u.treated,
                outcome: u.outcome,
            })
            .collect();
        Dataset::new(units, self.covariate_names.clone())
    }

    /// New dataset without covariates that are constant across all units.
    /// Subgroup refits use this: inside the subgroup a constant covariate
    /// carries no confounding information and would make every design
    /// matrix singular.
    pub fn drop_constant_covariates(&self) -> Dataset {
        let keep: Vec<usize> = (0..self.n_covariates())
            .filter(|&j| {
                let col = self.covariate_column(j);
                col.iter().any(|&x| x != col[0])
            })
            .collect();
        if keep.len() == self.n_covariates() {
            return self.clone();
        }
        let units = self
            .units
            .iter()
            .map(|u| Unit {
                id: u.id,
                covariates: keep.iter().map(|&j| u.covariates[j]).collect(),
                treated: u.treated,
                outcome: u.outcome,
            })
            .collect();
        let names = keep
            .iter()
            .map(|&j| self.covariate_names[j].clone())
            .collect();
        Dataset::new(units, names)
    }

    /// New dataset drawing `indices` (with repetition allowed); ids are
    /// reassigned in draw order.
    pub fn resample(&self, indices: &[usize]) -> Dataset {
        let units = indices
            .iter()
            .enumerate()
            .map(|(i, &k)| Unit {
                id: i,
                covariates: self.units[k].covariates.clone(),
                treated: self.units[k].treated,
                outcome: self.units[k].outcome,
            })
            .collect();
        Dataset::new(units, self.covariate_names.clone())
    }
}

/// A data-quality finding from [`validate`]. Findings are reports, not
/// failures: callers decide whether to proceed.
#[derive(Clone, Debug, PartialEq)]
pub struct Finding {
    pub message: String,
    pub units: Vec<usize>,
}

/// Check every dataset invariant, returning one finding per violation.
/// An empty list means the dataset is well formed.
pub fn validate(dataset: &Dataset) -> Vec<Finding> {
    let mut findings = Vec::new();
    let arity = dataset.n_covariates();
    let bad_arity: Vec<usize> = dataset
        .units()
        .iter()
        .filter(|u| u.covariates.len() != arity)
        .map(|u| u.id)
        .collect();
    if !bad_arity.is_empty() {
        findings.push(Finding {
            message: format!("covariate arity differs from the {arity} declared names"),
            units: bad_arity,
        });
    }
    let non_finite: Vec<usize> = dataset
        .units()
        .iter()
        .filter(|u| u.covariates.iter().any(|x| !x.is_finite()))
        .map(|u| u.id)
        .collect();
    if !non_finite.is_empty() {
        findings.push(Finding {
            message: "non-finite covariate value".to_string(),
            units: non_finite,
        });
    }
    let bad_outcome: Vec<usize> = dataset
        .units()
        .iter()
        .filter(|u| u.outcome.is_some_and(|y| !y.is_finite()))
        .map(|u| u.id)
        .collect();
    if !bad_outcome.is_empty() {
        findings.push(Finding {
            message: "non-finite outcome value".to_string(),
            units: bad_outcome,
        });
    }
    let misordered: Vec<usize> = dataset
        .units()
        .iter()
        .enumerate()
        .filter(|(i, u)| u.id != *i)
        .map(|(i, _)| i)
        .collect();
    if !misordered.is_empty() {
        findings.push(Finding {
            message: "unit ids are not the 0-based input order".to_string(),
            units: misordered,
        });
    }
    if dataset.n_treated() == 0 {
        findings.push(Finding {
            message: "no treated units".to_string(),
            units: Vec::new(),
        });
    }
    if dataset.n_untreated() == 0 {
        findings.push(Finding {
            message: "no untreated units".to_string(),
            units: Vec::new(),
        });
    }
    findings
}

/// Ground-truth potential outcomes, available only in simulations.
/// The individual causal effect of unit `i` is `y1[i] - y0[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialOutcomeTable {
    y1: Vec<f64>,
    y0: Vec<f64>,
}

impl PotentialOutcomeTable {
    pub fn new(y1: Vec<f64>, y0: Vec<f64>) -> Result<PotentialOutcomeTable> {
        if y1.len() != y0.len() {
            return Err(Error::LengthMismatch {
                expected: y1.len(),
                actual: y0.len(),
            });
        }
        Ok(PotentialOutcomeTable { y1, y0 })
    }

    pub fn len(&self) -> usize {
        self.y1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y1.is_empty()
    }

    pub fn y1(&self) -> &[f64] {
        &self.y1
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn ice(&self, i: usize) -> f64 {
        self.y1[i] - self.y0[i]
    }

    pub fn ices(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.ice(i)).collect()
    }
}

/// Reveal the observed outcome of each unit: `y1` under treatment, `y0`
/// otherwise.
pub fn observed_from_potential(
    pot: &PotentialOutcomeTable,
    treatments: &[bool],
) -> Result<Vec<f64>> {
    if treatments.len() != pot.len() {
        return Err(Error::LengthMismatch {
            expected: pot.len(),
            actual: treatments.len(),
        });
    }
    Ok(treatments
        .iter()
        .enumerate()
        .map(|(i, &t)| if t { pot.y1()[i] } else { pot.y0()[i] })
        .collect())
}

/// Per-unit nonnegative weights aligned to dataset order, tagged with the
/// estimand they target and the method that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    pub target: Estimand,
    pub provenance: String,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>, target: Estimand, provenance: String) -> Result<WeightVector> {
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidSpec {
                    reason: format!("weight {w} of unit {i} is not a finite nonnegative number"),
                });
            }
        }
        Ok(WeightVector {
            weights,
            target,
            provenance,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// The estimand changed (trimming, caliper discard); keep the weights
    /// but relabel the target and note why.
    pub fn relabel(self, target: Estimand, note: &str) -> WeightVector {
        WeightVector {
            weights: self.weights,
            target,
            provenance: format!("{} [{note}]", self.provenance),
        }
    }

    /// Both groups must retain positive weight for any contrast to exist.
    pub fn check_both_groups_positive(&self, treatments: &[bool]) -> Result<()> {
        let mut treated = 0.0;
        let mut untreated = 0.0;
        for (w, &t) in self.weights.iter().zip(treatments) {
            if t {
                treated += w;
            } else {
                untreated += w;
            }
        }
        if treated <= 0.0 {
            return Err(Error::ZeroWeightGroup { group: "treated" });
        }
        if untreated <= 0.0 {
            return Err(Error::ZeroWeightGroup { group: "untreated" });
        }
        Ok(())
    }
}

/// Which matching algorithm produced a [`MatchStructure`]. Pair methods
/// may not be converted to ATE weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatchMethod {
    GreedyPair,
    OptimalPair,
    Full,
    FineStratification,
    CoarsenedExact,
    Cardinality,
}

impl MatchMethod {
    pub fn label(&self) -> &'static str {
        match self {
            MatchMethod::GreedyPair => "greedy pair matching",
            MatchMethod::OptimalPair => "optimal pair matching",
            MatchMethod::Full => "full matching",
            MatchMethod::FineStratification => "fine stratification",
            MatchMethod::CoarsenedExact => "coarsened exact matching",
            MatchMethod::Cardinality => "cardinality matching",
        }
    }

    pub fn is_pair(&self) -> bool {
        matches!(self, MatchMethod::GreedyPair | MatchMethod::OptimalPair)
    }
}

/// Stratum/pair assignments produced by a matching method. Every unit id
/// appears exactly once: either in one stratum or in `discarded`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchStructure {
    strata: Vec<Vec<usize>>,
    discarded: Vec<usize>,
    pub method: MatchMethod,
}

impl MatchStructure {
    /// Validates the partition: disjoint strata covering, together with
    /// `discarded`, all of `0..n`, with each stratum mixing both groups.
    pub fn new(
        mut strata: Vec<Vec<usize>>,
        mut discarded: Vec<usize>,
        method: MatchMethod,
        treatments: &[bool],
    ) -> Result<MatchStructure> {
        let n = treatments.len();
        let mut seen = alloc::vec![false; n];
        let mut mark = |id: usize| -> Result<()> {
            if id >= n {
                return Err(Error::InvalidSpec {
                    reason: format!("unit id {id} out of range (n = {n})"),
                });
            }
            if seen[id] {
                return Err(Error::InvalidSpec {
                    reason: format!("unit id {id} assigned twice"),
                });
            }
            seen[id] = true;
            Ok(())
        };
        for stratum in &mut strata {
            stratum.sort_unstable();
            let mut has_treated = false;
            let mut has_untreated = false;
            for &id in stratum.iter() {
                mark(id)?;
                if treatments[id] {
                    has_treated = true;
                } else {
                    has_untreated = true;
                }
            }
            if !(has_treated && has_untreated) {
                return Err(Error::InvalidSpec {
                    reason: "stratum lacks one treatment group".to_string(),
                });
            }
        }
        for &id in &discarded {
            mark(id)?;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            // Units the method never mentioned are discarded by definition.
            for (id, s) in seen.iter().enumerate().skip(missing) {
                if !s {
                    discarded.push(id);
                }
            }
        }
        discarded.sort_unstable();
        Ok(MatchStructure {
            strata,
            discarded,
            method,
        })
    }

    pub fn strata(&self) -> &[Vec<usize>] {
        &self.strata
    }

    pub fn discarded(&self) -> &[usize] {
        &self.discarded
    }

    pub fn n_retained(&self) -> usize {
        self.strata.iter().map(|s| s.len()).sum()
    }

    pub fn discards_any(&self, treatments: &[bool], group_treated: bool) -> bool {
        self.discarded
            .iter()
            .any(|&id| treatments[id] == group_treated)
    }
}

//! Cardinality matching: select the largest subset of units whose
//! per-covariate standardized mean differences all fall within explicit
//! tolerances. Solved exactly by branch and bound up to 30 units per
//! group, and by greedy removal with swap local search beyond that.
//!
//! SMDs are scaled by the full-sample pooled SD (frozen before selection),
//! matching the diagnostics module.

use alloc::vec;
use alloc::vec::Vec;

use super::MatchSpec;
use crate::data::{Dataset, MatchMethod, MatchStructure};
use crate::diagnostics::pooled_sd;
use crate::{float, Error, Result};

const EXACT_LIMIT_PER_GROUP: usize = 30;
const FEAS_EPS: f64 = 1e-12;

struct Problem {
    /// covariate values per unit, row-major
    x: Vec<f64>,
    k: usize,
    treated: Vec<bool>,
    /// absolute mean-difference threshold per covariate
    threshold: Vec<f64>,
}

impl Problem {
    fn feasible(&self, kept: &[usize]) -> bool {
        let mut nt = 0usize;
        let mut nc = 0usize;
        let mut st = vec![0.0; self.k];
        let mut sc = vec![0.0; self.k];
        for &id in kept {
            let row = &self.x[id * self.k..(id + 1) * self.k];
            if self.treated[id] {
                nt += 1;
                for (a, b) in st.iter_mut().zip(row) {
                    *a += b;
                }
            } else {
                nc += 1;
                for (a, b) in sc.iter_mut().zip(row) {
                    *a += b;
                }
            }
        }
        if nt == 0 || nc == 0 {
            return false;
        }
        (0..self.k).all(|j| {
            float::abs(st[j] / nt as f64 - sc[j] / nc as f64) <= self.threshold[j] + FEAS_EPS
        })
    }
}

/// Select the largest balanced subset (total units first, treated count on
/// ties). The result is a single stratum containing every retained unit.
pub fn cardinality_matching(dataset: &Dataset, spec: &MatchSpec) -> Result<MatchStructure> {
    spec.validate()?;
    let k = dataset.n_covariates();
    let delta = match &spec.delta {
        Some(d) if d.len() == k => d.clone(),
        Some(d) if d.len() == 1 => vec![d[0]; k],
        Some(d) => {
            return Err(Error::InvalidSpec {
                reason: alloc::format!(
                    "expected one balance tolerance or {k}, got {}",
                    d.len()
                ),
            })
        }
        None => {
            return Err(Error::InvalidSpec {
                reason: "cardinality matching needs a per-covariate balance tolerance".into(),
            })
        }
    };

    let n = dataset.len();
    let threshold: Vec<f64> = (0..k)
        .map(|j| {
            let sd = pooled_sd(dataset, j);
            delta[j] * sd
        })
        .collect();
    let mut x = Vec::with_capacity(n * k);
    for unit in dataset.units() {
        x.extend_from_slice(&unit.covariates);
    }
    let problem = Problem {
        x,
        k,
        treated: dataset.treatments(),
        threshold,
    };

    let per_group = dataset.n_treated().max(dataset.n_untreated());
    let kept = if per_group <= EXACT_LIMIT_PER_GROUP {
        branch_and_bound(&problem, n)
    } else {
        heuristic(&problem, n)
    };
    let kept = kept.ok_or_else(|| Error::Infeasible {
        reason: "no nonempty balanced subset exists at the requested tolerance".into(),
    })?;

    let kept_set: Vec<bool> = {
        let mut mask = vec![false; n];
        for &id in &kept {
            mask[id] = true;
        }
        mask
    };
    let discarded: Vec<usize> = (0..n).filter(|&id| !kept_set[id]).collect();
    MatchStructure::new(
        vec![kept],
        discarded,
        MatchMethod::Cardinality,
        &dataset.treatments(),
    )
}

/// Exhaustive include/exclude search with two sound prunes: an optimistic
/// count bound, and per-covariate interval reasoning showing that no
/// completion can reach balance.
fn branch_and_bound(problem: &Problem, n: usize) -> Option<Vec<usize>> {
    // Suffix min/max of each covariate per group, for the interval prune.
    let k = problem.k;
    let mut suffix: Vec<[f64; 4]> = vec![[f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY]; (n + 1) * k];
    let mut remaining_t = vec![0usize; n + 1];
    let mut remaining_c = vec![0usize; n + 1];
    for id in (0..n).rev() {
        remaining_t[id] = remaining_t[id + 1] + usize::from(problem.treated[id]);
        remaining_c[id] = remaining_c[id + 1] + usize::from(!problem.treated[id]);
        for j in 0..k {
            let mut cell = suffix[(id + 1) * k + j];
            let v = problem.x[id * k + j];
            if problem.treated[id] {
                cell[0] = cell[0].min(v);
                cell[1] = cell[1].max(v);
            } else {
                cell[2] = cell[2].min(v);
                cell[3] = cell[3].max(v);
            }
            suffix[id * k + j] = cell;
        }
    }

    struct Search<'a> {
        problem: &'a Problem,
        suffix: Vec<[f64; 4]>,
        remaining_t: Vec<usize>,
        remaining_c: Vec<usize>,
        n: usize,
        best: Option<(usize, usize, Vec<usize>)>,
    }

    impl Search<'_> {
        fn viable(&self, idx: usize, nt: usize, nc: usize, st: &[f64], sc: &[f64]) -> bool {
            let k = self.problem.k;
            if nt + self.remaining_t[idx] == 0 || nc + self.remaining_c[idx] == 0 {
                return false;
            }
            for j in 0..k {
                let cell = self.suffix[idx * k + j];
                // Reachable mean interval per group: adding values inside
                // [lo, hi] keeps the mean between min(current, lo) and
                // max(current, hi).
                let (t_lo, t_hi) = if nt > 0 {
                    let m = st[j] / nt as f64;
                    if self.remaining_t[idx] > 0 {
                        (m.min(cell[0]), m.max(cell[1]))
                    } else {
                        (m, m)
                    }
                } else {
                    (cell[0], cell[1])
                };
                let (c_lo, c_hi) = if nc > 0 {
                    let m = sc[j] / nc as f64;
                    if self.remaining_c[idx] > 0 {
                        (m.min(cell[2]), m.max(cell[3]))
                    } else {
                        (m, m)
                    }
                } else {
                    (cell[2], cell[3])
                };
                let gap = if t_lo > c_hi {
                    t_lo - c_hi
                } else if c_lo > t_hi {
                    c_lo - t_hi
                } else {
                    0.0
                };
                if gap > self.problem.threshold[j] + FEAS_EPS {
                    return false;
                }
            }
            true
        }

        fn dfs(
            &mut self,
            idx: usize,
            kept: &mut Vec<usize>,
            nt: usize,
            nc: usize,
            st: &mut Vec<f64>,
            sc: &mut Vec<f64>,
        ) {
            let total = nt + nc;
            let optimistic = total + (self.n - idx);
            if let Some((best_total, _, _)) = &self.best {
                if optimistic < *best_total {
                    return;
                }
            }
            if idx == self.n {
                if nt == 0 || nc == 0 || !self.problem.feasible(kept) {
                    return;
                }
                let candidate = (total, nt);
                let better = match &self.best {
                    None => true,
                    Some((bt, bn, _)) => candidate > (*bt, *bn),
                };
                if better {
                    self.best = Some((total, nt, kept.clone()));
                }
                return;
            }
            if !self.viable(idx, nt, nc, st, sc) {
                return;
            }
            let treated = self.problem.treated[idx];
            let row: Vec<f64> =
                self.problem.x[idx * self.problem.k..(idx + 1) * self.problem.k].to_vec();
            // Include first so the largest candidates are found early.
            kept.push(idx);
            let (mut nt2, mut nc2) = (nt, nc);
            if treated {
                nt2 += 1;
                for (a, b) in st.iter_mut().zip(&row) {
                    *a += b;
                }
            } else {
                nc2 += 1;
                for (a, b) in sc.iter_mut().zip(&row) {
                    *a += b;
                }
            }
            self.dfs(idx + 1, kept, nt2, nc2, st, sc);
            kept.pop();
            if treated {
                for (a, b) in st.iter_mut().zip(&row) {
                    *a -= b;
                }
            } else {
                for (a, b) in sc.iter_mut().zip(&row) {
                    *a -= b;
                }
            }
            self.dfs(idx + 1, kept, nt, nc, st, sc);
        }
    }

    let mut search = Search {
        problem,
        suffix,
        remaining_t,
        remaining_c,
        n,
        best: None,
    };
    let mut kept = Vec::new();
    let mut st = vec![0.0; k];
    let mut sc = vec![0.0; k];
    search.dfs(0, &mut kept, 0, 0, &mut st, &mut sc);
    search.best.map(|(_, _, kept)| kept)
}

/// Greedy removal of the unit whose deletion most reduces the worst SMD,
/// then re-add and pairwise-swap local search until no improving move.
fn heuristic(problem: &Problem, n: usize) -> Option<Vec<usize>> {
    let worst = |kept: &[usize]| -> f64 {
        let mut nt = 0usize;
        let mut nc = 0usize;
        let mut st = vec![0.0; problem.k];
        let mut sc = vec![0.0; problem.k];
        for &id in kept {
            let row = &problem.x[id * problem.k..(id + 1) * problem.k];
            if problem.treated[id] {
                nt += 1;
                for (a, b) in st.iter_mut().zip(row) {
                    *a += b;
                }
            } else {
                nc += 1;
                for (a, b) in sc.iter_mut().zip(row) {
                    *a += b;
                }
            }
        }
        if nt == 0 || nc == 0 {
            return f64::INFINITY;
        }
        (0..problem.k)
            .map(|j| {
                let gap = float::abs(st[j] / nt as f64 - sc[j] / nc as f64);
                let scale = problem.threshold[j].max(FEAS_EPS);
                gap / scale
            })
            .fold(0.0f64, f64::max)
    };

    let mut kept: Vec<usize> = (0..n).collect();
    // Removal phase: drive the worst scaled violation below 1.
    while worst(&kept) > 1.0 {
        if kept.len() <= 2 {
            return None;
        }
        let mut best_choice: Option<(f64, usize)> = None;
        for (pos, _) in kept.iter().enumerate() {
            let mut trial = kept.clone();
            trial.remove(pos);
            let w = worst(&trial);
            if !w.is_finite() {
                continue;
            }
            if best_choice.is_none_or(|(bw, _)| w < bw) {
                best_choice = Some((w, pos));
            }
        }
        let (_, pos) = best_choice?;
        kept.remove(pos);
    }
    if kept.iter().all(|&id| !problem.treated[id]) || kept.iter().all(|&id| problem.treated[id]) {
        return None;
    }

    // Improvement phase: re-add what fits, then try swaps that lower the
    // worst SMD (which may unlock further additions).
    let mut out: Vec<bool> = {
        let mut mask = vec![true; n];
        for &id in &kept {
            mask[id] = false;
        }
        mask
    };
    loop {
        let mut changed = false;
        for (id, slot) in out.iter_mut().enumerate() {
            if !*slot {
                continue;
            }
            kept.push(id);
            kept.sort_unstable();
            if worst(&kept) <= 1.0 {
                *slot = false;
                changed = true;
            } else {
                kept.retain(|&x| x != id);
            }
        }
        if changed {
            continue;
        }
        let current = worst(&kept);
        let mut did_swap = false;
        'swap: for pos in 0..kept.len() {
            let inside = kept[pos];
            for outside in 0..n {
                if !out[outside] || problem.treated[outside] != problem.treated[inside] {
                    continue;
                }
                let mut trial = kept.clone();
                trial[pos] = outside;
                trial.sort_unstable();
                let w = worst(&trial);
                if w <= 1.0 && w < current - FEAS_EPS {
                    out[outside] = false;
                    out[inside] = true;
                    kept = trial;
                    did_swap = true;
                    break 'swap;
                }
            }
        }
        if !did_swap {
            break;
        }
    }
    kept.sort_unstable();
    Some(kept)
}

//! Pair matching without replacement: greedy nearest neighbor and optimal
//! (min-cost assignment) variants.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::flow::MinCostFlow;
use super::{build_distances, MatchSpec, PairDistances};
use crate::data::{Dataset, MatchMethod, MatchStructure};
use crate::{Error, Result};

fn check_supply(dm: &PairDistances, spec: &MatchSpec) -> Result<()> {
    if spec.caliper.is_none() && dm.other_ids.len() < spec.ratio as usize * dm.focal_ids.len() {
        return Err(Error::Infeasible {
            reason: format!(
                "pair matching without replacement needs at least ratio x focal units \
                 ({} x {}) in the reservoir group, found {}",
                spec.ratio,
                dm.focal_ids.len(),
                dm.other_ids.len()
            ),
        });
    }
    Ok(())
}

fn structure_from_assignment(
    assignment: &[Vec<usize>],
    dm: &PairDistances,
    method: MatchMethod,
    treatments: &[bool],
) -> Result<MatchStructure> {
    let mut strata = Vec::new();
    let mut discarded = Vec::new();
    for (fi, partners) in assignment.iter().enumerate() {
        if partners.is_empty() {
            discarded.push(dm.focal_ids[fi]);
        } else {
            let mut stratum = vec![dm.focal_ids[fi]];
            stratum.extend(partners.iter().map(|&oj| dm.other_ids[oj]));
            strata.push(stratum);
        }
    }
    if strata.is_empty() {
        return Err(Error::Infeasible {
            reason: "every focal unit was discarded by the caliper".into(),
        });
    }
    // Unmatched reservoir units are auto-discarded by the constructor.
    MatchStructure::new(strata, discarded, method, treatments)
}

/// Greedy nearest-neighbor matching without replacement.
///
/// Focal units are processed in descending score order (hardest to match
/// first, ties by lowest id); each takes its `ratio` nearest available
/// reservoir units (ties by lowest id). With a caliper, focal units with
/// no admissible reservoir unit are discarded.
pub fn greedy_nn(dataset: &Dataset, scores: &[f64], spec: &MatchSpec) -> Result<MatchStructure> {
    let dm = build_distances(dataset, scores, spec)?;
    check_supply(&dm, spec)?;

    let mut order: Vec<usize> = (0..dm.focal_ids.len()).collect();
    order.sort_by(|&a, &b| {
        let sa = scores[dm.focal_ids[a]];
        let sb = scores[dm.focal_ids[b]];
        sb.partial_cmp(&sa)
            .unwrap()
            .then(dm.focal_ids[a].cmp(&dm.focal_ids[b]))
    });

    let mut taken = vec![false; dm.other_ids.len()];
    let mut assignment = vec![Vec::new(); dm.focal_ids.len()];
    for &fi in &order {
        for _ in 0..spec.ratio {
            let mut best: Option<usize> = None;
            for (oj, &is_taken) in taken.iter().enumerate() {
                if is_taken || !dm.allowed(fi, oj) {
                    continue;
                }
                best = match best {
                    None => Some(oj),
                    Some(cur) if dm.dist(fi, oj) < dm.dist(fi, cur) => Some(oj),
                    Some(cur) => Some(cur), // ties keep the lower id
                };
            }
            match best {
                Some(oj) => {
                    taken[oj] = true;
                    assignment[fi].push(oj);
                }
                None => break,
            }
        }
    }
    structure_from_assignment(&assignment, &dm, MatchMethod::GreedyPair, &dataset.treatments())
}

/// Optimal pair matching: minimizes the total matched distance over all
/// without-replacement 1:ratio assignments, solved as a min-cost flow.
/// With a caliper the solver first maximizes the number of matches, then
/// minimizes cost.
pub fn optimal_pair(dataset: &Dataset, scores: &[f64], spec: &MatchSpec) -> Result<MatchStructure> {
    let dm = build_distances(dataset, scores, spec)?;
    check_supply(&dm, spec)?;

    let nf = dm.focal_ids.len();
    let no = dm.other_ids.len();
    let source = 0;
    let sink = 1 + nf + no;
    let mut net = MinCostFlow::new(2 + nf + no);
    for fi in 0..nf {
        net.add_arc(source, 1 + fi, spec.ratio as i64, 0.0);
    }
    let mut pair_arcs = Vec::new();
    for fi in 0..nf {
        for oj in 0..no {
            if dm.allowed(fi, oj) {
                let arc = net.add_arc(1 + fi, 1 + nf + oj, 1, dm.dist(fi, oj));
                pair_arcs.push((arc, fi, oj));
            }
        }
    }
    for oj in 0..no {
        net.add_arc(1 + nf + oj, sink, 1, 0.0);
    }
    net.solve(source, sink);

    let mut assignment = vec![Vec::new(); nf];
    for &(arc, fi, oj) in &pair_arcs {
        if net.flow_on(arc) > 0 {
            assignment[fi].push(oj);
        }
    }
    structure_from_assignment(&assignment, &dm, MatchMethod::OptimalPair, &dataset.treatments())
}

//! Optimal full matching via network flow.
//!
//! Unrestricted full matching is solved as a minimum-cost bipartite edge
//! cover: every retained unit must be incident to at least one matched
//! edge, and with nonnegative distances an optimal cover decomposes into
//! strata in which at least one side is a single unit. The cover is found
//! by min-cost flow with unit lower bounds handled through the standard
//! super-source/super-sink transformation. Strata whose cross distances
//! are all zero are merged afterwards, so saturated problems reproduce
//! plain stratification.

use alloc::vec;
use alloc::vec::Vec;

use super::flow::MinCostFlow;
use super::{build_distances, MatchSpec};
use crate::data::{Dataset, MatchMethod, MatchStructure};
use crate::{Error, Result};

const ZERO_DISTANCE: f64 = 1e-12;

/// Partition all units (minus caliper-infeasible ones) into strata that
/// each contain at least one unit from both groups, minimizing the total
/// within-stratum cross-group distance.
pub fn full_matching(dataset: &Dataset, scores: &[f64], spec: &MatchSpec) -> Result<MatchStructure> {
    let dm = build_distances(dataset, scores, spec)?;
    let nf = dm.focal_ids.len();
    let no = dm.other_ids.len();

    // Units with no admissible partner can never join a stratum.
    let focal_live: Vec<usize> = (0..nf)
        .filter(|&fi| (0..no).any(|oj| dm.allowed(fi, oj)))
        .collect();
    let other_live: Vec<usize> = (0..no)
        .filter(|&oj| focal_live.iter().any(|&fi| dm.allowed(fi, oj)))
        .collect();
    if focal_live.is_empty() || other_live.is_empty() {
        return Err(Error::Infeasible {
            reason: "caliper leaves one group with no matchable units".into(),
        });
    }
    let t = focal_live.len();
    let c = other_live.len();

    // Node layout: 0 super-source, 1 super-sink, 2 source, 3 sink, then
    // focal and other units. Arcs source->focal and other->sink carry a
    // lower bound of one, shifted onto the super pair.
    let s_star = 0;
    let k_star = 1;
    let s = 2;
    let k = 3;
    let focal_node = |i: usize| 4 + i;
    let other_node = |j: usize| 4 + t + j;
    let mut net = MinCostFlow::new(4 + t + c);
    for i in 0..t {
        net.add_arc(s, focal_node(i), c as i64 - 1, 0.0);
        net.add_arc(s_star, focal_node(i), 1, 0.0);
    }
    for j in 0..c {
        net.add_arc(other_node(j), k, t as i64 - 1, 0.0);
        net.add_arc(other_node(j), k_star, 1, 0.0);
    }
    net.add_arc(s, k_star, t as i64, 0.0);
    net.add_arc(s_star, k, c as i64, 0.0);
    net.add_arc(k, s, (t + c) as i64, 0.0);
    let mut pair_arcs = Vec::new();
    for (i, &fi) in focal_live.iter().enumerate() {
        for (j, &oj) in other_live.iter().enumerate() {
            if dm.allowed(fi, oj) {
                let arc = net.add_arc(focal_node(i), other_node(j), 1, dm.dist(fi, oj));
                pair_arcs.push((arc, fi, oj));
            }
        }
    }
    let (flow, _) = net.solve(s_star, k_star);
    if flow < (t + c) as i64 {
        return Err(Error::Infeasible {
            reason: "no full match covers every unit under the caliper".into(),
        });
    }

    // Connected components of the cover edges are the strata.
    let n = dataset.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut root = x;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = x;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    let mut edges = Vec::new();
    for &(arc, fi, oj) in &pair_arcs {
        if net.flow_on(arc) > 0 {
            let a = dm.focal_ids[fi];
            let b = dm.other_ids[oj];
            edges.push((a, b));
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }

    let mut matched = vec![false; n];
    for &(a, b) in &edges {
        matched[a] = true;
        matched[b] = true;
    }
    let mut strata_map: alloc::collections::BTreeMap<usize, Vec<usize>> =
        alloc::collections::BTreeMap::new();
    for (id, &is_matched) in matched.iter().enumerate() {
        if is_matched {
            strata_map
                .entry(find(&mut parent, id))
                .or_default()
                .push(id);
        }
    }
    let mut strata: Vec<Vec<usize>> = strata_map.into_values().collect();

    // Merge strata whose added cross pairs are all (numerically) zero;
    // the total distance is unchanged and score-saturated problems then
    // coincide with exact stratification.
    merge_zero_distance(&mut strata, &dm, dataset);

    let discarded: Vec<usize> = (0..n).filter(|&id| !matched[id]).collect();
    MatchStructure::new(strata, discarded, MatchMethod::Full, &dataset.treatments())
}

fn merge_zero_distance(
    strata: &mut Vec<Vec<usize>>,
    dm: &super::PairDistances,
    dataset: &Dataset,
) {
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
    let cross_zero = |a: &[usize], b: &[usize]| -> bool {
        for &x in a {
            for &y in b {
                let (f, o) = if dataset.units()[x].treated == dataset.units()[y].treated {
                    continue;
                } else if focal_pos.contains_key(&x) {
                    (focal_pos[&x], other_pos[&y])
                } else {
                    (focal_pos[&y], other_pos[&x])
                };
                if !dm.allowed(f, o) || dm.dist(f, o) > ZERO_DISTANCE {
                    return false;
                }
            }
        }
        true
    };
    let mut merged = true;
    while merged {
        merged = false;
        'outer: for i in 0..strata.len() {
            for j in (i + 1)..strata.len() {
                if cross_zero(&strata[i], &strata[j]) {
                    let absorbed = strata.remove(j);
                    strata[i].extend(absorbed);
                    strata[i].sort_unstable();
                    merged = true;
                    break 'outer;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::total_pair_distance;
    use crate::simulation::oracle_cohort;

    #[test]
    fn cohort_full_match_is_exact_stratification() {
        let (data, _, scores) = oracle_cohort();
        let spec = MatchSpec::default();
        let ms = full_matching(&data, &scores, &spec).unwrap();
        assert_eq!(ms.discarded().len(), 0);
        assert_eq!(ms.strata().to_vec(), vec![
            vec![0, 1, 2, 4, 5],
            vec![3, 6, 7, 8, 9],
        ]);
        let total = total_pair_distance(&data, &scores, &spec, &ms).unwrap();
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn cohort_full_match_ate_weights_reproduce_stratified_ate() {
        let (data, _, scores) = oracle_cohort();
        let ms = full_matching(&data, &scores, &MatchSpec::default()).unwrap();
        let w = crate::matching::match_to_weights(
            &ms,
            crate::data::Estimand::Ate,
            &data.treatments(),
        )
        .unwrap();
        let est = crate::estimation::hajek_contrast(
            &data,
            &w,
            crate::estimation::Measure::MeanDifference,
        )
        .unwrap();
        assert!((est.point - (-5.0 / 6.0)).abs() < 1e-10);
    }

    #[test]
    fn single_treated_forms_one_stratum() {
        let data = Dataset::from_columns(
            vec!["x".into()],
            vec![vec![0.0, 1.0, 2.0, 3.0]],
            vec![true, false, false, false],
            None,
        )
        .unwrap();
        let scores = vec![0.4, 0.3, 0.5, 0.6];
        let ms = full_matching(&data, &scores, &MatchSpec::default()).unwrap();
        assert_eq!(ms.strata().len(), 1);
        assert_eq!(ms.strata()[0], vec![0, 1, 2, 3]);
        assert!(ms.discarded().is_empty());
    }

    #[test]
    fn every_unit_lands_in_a_mixed_stratum() {
        let data = Dataset::from_columns(
            vec!["x".into()],
            vec![vec![0.1, 0.9, 0.4, 0.6, 0.2, 0.8, 0.5]],
            vec![true, true, true, false, false, false, false],
            None,
        )
        .unwrap();
        let scores = vec![0.52, 0.81, 0.63, 0.58, 0.31, 0.74, 0.5];
        let ms = full_matching(&data, &scores, &MatchSpec::default()).unwrap();
        assert_eq!(ms.n_retained(), 7);
        for stratum in ms.strata() {
            assert!(stratum.iter().any(|&id| data.units()[id].treated));
            assert!(stratum.iter().any(|&id| !data.units()[id].treated));
        }
    }

    #[test]
    fn minimizes_total_cover_distance_on_a_hand_checked_instance() {
        // Logits 0 and 10 for the treated, 1, 2, 3 for the controls.
        // The cheapest cover is {t0, c2, c3} + {t1, c4}: 1 + 2 + 7 = 10.
        let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
        let scores = vec![
            sigmoid(0.0),
            sigmoid(10.0),
            sigmoid(1.0),
            sigmoid(2.0),
            sigmoid(3.0),
        ];
        let data = Dataset::from_columns(
            vec!["x".into()],
            vec![vec![0.0, 10.0, 1.0, 2.0, 3.0]],
            vec![true, true, false, false, false],
            None,
        )
        .unwrap();
        let spec = MatchSpec::default();
        let ms = full_matching(&data, &scores, &spec).unwrap();
        let total = total_pair_distance(&data, &scores, &spec, &ms).unwrap();
        assert!((total - 10.0).abs() < 1e-6, "total {total}");
        assert_eq!(ms.strata().to_vec(), vec![vec![0, 2, 3], vec![1, 4]]);
    }

    #[test]
    fn caliper_can_make_full_matching_infeasible() {
        let data = Dataset::from_columns(
            vec!["x".into()],
            vec![vec![0.0, 1.0]],
            vec![true, false],
            None,
        )
        .unwrap();
        let scores = vec![0.05, 0.95];
        let spec = MatchSpec {
            caliper: Some(0.1),
            ..MatchSpec::default()
        };
        assert!(matches!(
            full_matching(&data, &scores, &spec),
            Err(Error::Infeasible { .. })
        ));
    }
}

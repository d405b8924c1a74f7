//! Property-based invariants over random pmfs, laws and mappings.

mod oracles;

use std::collections::BTreeMap;

use num::{One, Zero};
use proptest::prelude::*;

use fairpipe::core::{subsets_of_size, Cohort, CohortDistribution, CohortSet, UniverseSpec};
use fairpipe::distances::{
    conditional, expected_score_distance, max_coupling_within, mmd, tv_distance, unconditional,
    pipeline_distribution, ScorePmf,
};
use fairpipe::policies::{mapping_respects, swapping_mapping, PolicyDistance};
use fairpipe::rational::{q, qabs, qi, Q};
use fairpipe::scoring::ScoringFunction;

/// Strategy: a pmf with rational atoms on the 1/24 grid.
fn pmf_strategy(max_support: usize) -> impl Strategy<Value = ScorePmf> {
    proptest::collection::btree_map(0..=24i64, 1..=12i64, 1..=max_support).prop_map(|atoms| {
        let total: i64 = atoms.values().sum();
        let mut pmf = ScorePmf::new();
        for (value, mass) in atoms {
            pmf.add(q(value, 24), q(mass, total));
        }
        pmf
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mmd_is_a_symmetric_premetric(g1 in pmf_strategy(5), g2 in pmf_strategy(5)) {
        let d12 = mmd(&g1, &g2);
        let d21 = mmd(&g2, &g1);
        prop_assert_eq!(&d12, &d21);
        prop_assert_eq!(mmd(&g1, &g1), Q::zero());
        prop_assert!(d12 >= Q::zero());
    }

    #[test]
    fn mmd_upper_bounds(g1 in pmf_strategy(5), g2 in pmf_strategy(5)) {
        let d = mmd(&g1, &g2);
        // Pure-TV certificate: leave both pmfs in place.
        prop_assert!(d <= qi(2) * tv_distance(&g1, &g2));
        // Full-coupling certificate: the largest support gap.
        let gap = g1
            .mass
            .keys()
            .flat_map(|x| g2.mass.keys().map(move |y| qabs(&(x.clone() - y.clone()))))
            .max()
            .unwrap_or_else(Q::zero);
        prop_assert!(d <= gap.max(Q::zero()).min(Q::one()) || d <= Q::one());
    }

    #[test]
    fn expected_score_gap_is_within_1_5_mmd(g1 in pmf_strategy(5), g2 in pmf_strategy(5)) {
        // Moving both pmfs by at most v/2 shifts each mean by at most v/2,
        // and the residual v/2 of total variation moves mean by at most v/2
        // across the unit range: |ΔE| ≤ 1.5·MMD.
        let d = mmd(&g1, &g2);
        prop_assert!(expected_score_distance(&g1, &g2) <= q(3, 2) * d);
    }

    #[test]
    fn greedy_coupling_matches_max_flow(g1 in pmf_strategy(5), g2 in pmf_strategy(5), cap_num in 0..=24i64) {
        let cap = q(cap_num, 24);
        let greedy = max_coupling_within(&g1, &g2, &cap);
        let flow = oracles::maxflow_coupling(&g1, &g2, &cap);
        prop_assert_eq!(greedy, flow);
    }

    #[test]
    fn conditional_unconditional_consistency(
        masses in proptest::collection::vec(0..=8i64, 3),
        scores in proptest::collection::vec(0..=8i64, 3),
    ) {
        let total: i64 = masses.iter().sum::<i64>() + 1;
        let cohorts = subsets_of_size(3, 2);
        let mut law = BTreeMap::new();
        let mut acc = Q::zero();
        for (c, m) in cohorts.iter().zip(&masses) {
            let p = q(*m, total);
            acc += p.clone();
            if !p.is_zero() {
                law.insert(*c, p);
            }
        }
        let leftover = Q::one() - acc;
        if !leftover.is_zero() {
            *law.entry(Cohort::from_members([0, 1])).or_insert_with(Q::zero) += leftover;
        }
        let dist = CohortDistribution::new(3, CohortSet::AllSizeK { k: 2 }, law).unwrap();
        let f = ScoringFunction::from_fn("grid", &cohorts, |c, u| {
            q(scores[u].min(8), 8) * qi(c.len() as i64) / qi(2)
        });
        for u in 0..3 {
            let d = pipeline_distribution(&dist, &f, u);
            let h = unconditional(&d);
            let selected = Q::one() - d.p_bot.clone();
            if selected.is_zero() {
                prop_assert!(conditional(&d).is_err());
            } else {
                let g = conditional(&d).unwrap();
                prop_assert_eq!(h.expectation(), selected * g.expectation());
                prop_assert!(g.is_probability());
            }
        }
    }

    #[test]
    fn overestimating_delta_preserves_respect(
        quals in proptest::collection::vec(0..=16i64, 4),
        bump in 0..=8i64,
    ) {
        // A mapping respecting δ' ≥ δ pointwise also respects δ.
        let quals: Vec<Q> = quals.into_iter().map(|v| q(v, 16)).collect();
        let spec = UniverseSpec::from_qualifications(
            (0..4).map(|i| format!("u{i}")).collect(),
            quals.clone(),
        );
        let set = CohortSet::AllSizeK { k: 2 };
        let mapping = swapping_mapping(&set, 4, 0, 1).unwrap();
        // δ = family distance of a per-individual function scaled below the
        // qualification gaps; δ' = δ^int, an overestimate on the swapping
        // clusters (both give D(u,v) there, and δ^F may be smaller).
        let shrink = Q::one() / qi(1 + bump);
        let g: Vec<Q> = quals.iter().map(|v| v.clone() * &shrink).collect();
        let family = PolicyDistance::Family(vec![ScoringFunction::per_individual("g", g)]);
        let over = PolicyDistance::Interchangeability;
        let contexts = mapping.contexts();
        for (i, (a, _)) in contexts.iter().enumerate() {
            for (b, _) in &contexts[i + 1..] {
                let lo = family.eval(&spec, *a, *b).unwrap();
                let hi = over.eval(&spec, *a, *b).unwrap();
                prop_assert!(lo <= hi);
            }
        }
        let (ok_over, _) = mapping_respects(&mapping, &over, &spec).unwrap();
        prop_assert!(ok_over);
        let (ok_under, _) = mapping_respects(&mapping, &family, &spec).unwrap();
        prop_assert!(ok_under);
    }

    #[test]
    fn selection_probabilities_are_linear_under_mixing(
        m1 in proptest::collection::vec(1..=8i64, 3),
        m2 in proptest::collection::vec(1..=8i64, 3),
        weight_num in 0..=8i64,
    ) {
        let cohorts = subsets_of_size(3, 2);
        let build = |masses: &[i64]| {
            let total: i64 = masses.iter().sum();
            let mut law = BTreeMap::new();
            for (c, m) in cohorts.iter().zip(masses) {
                law.insert(*c, q(*m, total));
            }
            CohortDistribution::new(3, CohortSet::AllSizeK { k: 2 }, law).unwrap()
        };
        let d1 = build(&m1);
        let d2 = build(&m2);
        let w = q(weight_num, 8);
        let mixed = d1.mix(&d2, &w).unwrap();
        let p1 = d1.selection_probabilities();
        let p2 = d2.selection_probabilities();
        for (u, pm) in mixed.selection_probabilities().into_iter().enumerate() {
            prop_assert_eq!(pm, w.clone() * &p1[u] + (Q::one() - w.clone()) * &p2[u]);
        }
    }
}

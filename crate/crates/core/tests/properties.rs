mod common;

use ktuple_core::{
    build_h, is_unobservable, oracle_sparsest, parse_case, rank_exact, refine_to_critical, solve_mincut,
    solve_security_index, verify_critical, Case, ExactError, ExactOptions, Measurement, MeasurementSet, MinCutOptions,
    MinCutSolver, Network, Provenance, RankEngine, RowIndexSet,
};
use proptest::prelude::*;

use common::{observable, round_trip};

fn network(max_n: usize) -> impl Strategy<Value = Network> {
    (2..=max_n)
        .prop_flat_map(|n| {
            let parents: Vec<_> = (1..n).map(|b| 0..b).collect();
            let extra = prop::collection::vec((0..n, 1..n), 0..=n);
            (Just(n), parents, extra)
        })
        .prop_map(|(n, parents, extra)| {
            let mut lines: Vec<(usize, usize)> = parents.into_iter().enumerate().map(|(i, p)| (p, i + 1)).collect();
            lines.extend(extra.into_iter().map(|(a, d)| (a, (a + d) % n)));
            Network::new("prop", n, lines).unwrap()
        })
}

fn case(max_n: usize, max_m: usize) -> impl Strategy<Value = Case> {
    network(max_n).prop_flat_map(move |net| {
        let n = net.bus_count();
        let l = net.lines().len();
        let meas = prop_oneof![
            3 => (0..l).prop_map(|line| Measurement::Flow { line }),
            2 => (0..n).prop_map(|bus| Measurement::Injection { bus }),
        ];
        prop::collection::vec(meas, 1..=max_m).prop_map(move |entries| {
            let ms = MeasurementSet::new(&net, entries).unwrap();
            Case::new(net.clone(), ms)
        })
    })
}

fn observable_case(max_n: usize, max_m: usize) -> impl Strategy<Value = Case> {
    case(max_n, max_m).prop_filter("observable", |c| observable(&c.jacobian()))
}

fn subset(m: usize, mask: u32) -> RowIndexSet {
    (0..m).filter(|r| mask >> r & 1 == 1).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn json_round_trip(c in case(7, 20)) {
        prop_assert_eq!(parse_case(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn meter_weights_account_for_every_row(c in case(7, 20)) {
        let w = c.weights();
        prop_assert_eq!(w.w.iter().sum::<u64>() + w.v.iter().sum::<u64>(), c.measurements.len() as u64);
        for (k, line) in c.network.lines().iter().enumerate() {
            prop_assert_eq!(w.wtilde[k], w.w[k] + w.v[line.from] + w.v[line.to]);
        }
    }

    #[test]
    fn rank_never_grows_when_rows_are_removed(c in case(6, 12), a in any::<u32>(), b in any::<u32>()) {
        let h = c.jacobian();
        let small = subset(h.rows(), a);
        let large: RowIndexSet = small.iter().chain(subset(h.rows(), b).iter()).collect();
        let engine = RankEngine::new(&h);
        prop_assert!(engine.rank_without(&large) <= engine.rank_without(&small));
        prop_assert_eq!(engine.rank_without(&small), rank_exact(&h, &small, 0));
    }

    #[test]
    fn reference_column_does_not_matter(c in case(6, 12), a in any::<u32>()) {
        let h = c.jacobian();
        let removed = subset(h.rows(), a);
        let r0 = rank_exact(&h, &removed, 0);
        for col in 1..h.cols() {
            prop_assert_eq!(rank_exact(&h, &removed, col), r0);
        }
    }

    #[test]
    fn refinement_yields_minimal_unobservable_sets(c in observable_case(5, 10), a in any::<u32>(), pick in any::<usize>()) {
        let h = c.jacobian();
        let m = h.rows();
        let anchor = pick % m;
        let mut cand = subset(m, a);
        cand.insert(anchor);
        if let Ok(t) = refine_to_critical(&h, &cand, anchor, Provenance::Oracle) {
            let set = t.row_set();
            prop_assert!(set.contains(anchor));
            prop_assert!(set.iter().all(|r| cand.contains(r)));
            prop_assert!(is_unobservable(&h, &set));
            // no proper subset at all is unobservable
            let rows = set.as_slice().to_vec();
            for mask in 0u32..(1 << rows.len()) - 1 {
                let sub: RowIndexSet = rows.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, r)| *r).collect();
                prop_assert!(!is_unobservable(&h, &sub), "proper subset {:?} of {:?} is unobservable", sub, rows);
            }
        }
    }

    #[test]
    fn cut_cost_identity(c in case(7, 20), side_bits in any::<u32>()) {
        let n = c.network.bus_count();
        let mut side: Vec<bool> = (0..n).map(|b| side_bits >> b & 1 == 1).collect();
        side[0] = true;
        if side.iter().all(|&s| s) {
            side[n - 1] = false;
        }
        let h = c.jacobian();
        let solver = MinCutSolver::new(&c, &h);
        let cut = solver.cut_from_side(&side);
        let w = c.weights();
        let mut deg = vec![0u64; n];
        for l in c.network.lines() {
            if side[l.from] != side[l.to] {
                deg[l.from] += 1;
                deg[l.to] += 1;
            }
        }
        let excess: u64 = (0..n).filter(|&b| deg[b] > 0).map(|b| w.v[b] * (deg[b] - 1)).sum();
        prop_assert_eq!(cut.modified_cost - cut.true_cost as u64, excess);
        // removing everything a cut touches splits the network
        if !cut.removed_measurements.is_empty() || observable(&h) {
            prop_assert!(is_unobservable(&h, &cut.removed_measurements));
        }
    }

    #[test]
    fn exact_solutions_round_trip_and_bound_mincut(c in observable_case(6, 14)) {
        let h = c.jacobian();
        for anchor in 0..h.rows() {
            let sol = solve_security_index(&h, anchor, &ExactOptions::default()).unwrap();
            prop_assert!(sol.proved_optimal);
            if let Err(e) = round_trip(&h, anchor, sol.support.as_slice()) {
                return Err(TestCaseError::fail(e));
            }
            let mc = solve_mincut(&c, anchor, &MinCutOptions::default()).unwrap();
            prop_assert!(mc.estimate >= sol.cardinality);
            prop_assert!(mc.tuple.cardinality >= sol.cardinality);
            prop_assert!(verify_critical(&h, &mc.tuple.row_set(), anchor, Provenance::MinCut).is_ok());
        }
    }

    #[test]
    fn exact_optimum_ignores_row_order(c in observable_case(6, 14), seed in any::<u64>()) {
        let h = c.jacobian();
        let m = h.rows();
        let forward: Vec<usize> = (0..m).collect();
        let backward: Vec<usize> = (0..m).rev().collect();
        let mut shuffled = forward.clone();
        let mut s = seed;
        for i in (1..m).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        for anchor in 0..m {
            let k: Vec<usize> = [None, Some(backward.clone()), Some(shuffled.clone())]
                .into_iter()
                .map(|order| solve_security_index(&h, anchor, &ExactOptions { order, ..ExactOptions::default() }).unwrap().cardinality)
                .collect();
            prop_assert!(k.iter().all(|&x| x == k[0]), "anchor {}: {:?}", anchor, k);
        }
    }

    #[test]
    fn protecting_rows_never_helps(c in observable_case(5, 12), a in any::<u32>(), b in any::<u32>()) {
        let h = c.jacobian();
        let m = h.rows();
        let p1 = subset(m, a);
        let p2: RowIndexSet = p1.iter().chain(subset(m, b).iter()).collect();
        for anchor in (0..m).filter(|r| !p2.contains(*r)) {
            let k = |p: &RowIndexSet| match solve_security_index(&h, anchor, &ExactOptions { protected: p.clone(), ..ExactOptions::default() }) {
                Ok(s) => {
                    assert!(s.support.iter().all(|r| !p.contains(r)));
                    Some(s.cardinality)
                }
                Err(ExactError::Infeasible(_)) => None,
                Err(e) => panic!("{e}"),
            };
            match (k(&p1), k(&p2)) {
                (Some(x), Some(y)) => prop_assert!(x <= y),
                (None, Some(_)) => prop_assert!(false, "more protection made anchor {} feasible", anchor),
                _ => {}
            }
        }
    }

    #[test]
    fn mincut_enumeration_matches_brute_force(c in case(7, 20), s in 0usize..7, d in 1usize..7) {
        let n = c.network.bus_count();
        let s = s % n;
        let t = (s + 1 + d % (n - 1)) % n;
        prop_assume!(s != t);
        let h = c.jacobian();
        let e = MinCutSolver::new(&c, &h).enumerate(s, t, usize::MAX).unwrap();
        let (best, want) = common::brute_force_min_cuts(&c, s, t);
        prop_assert_eq!(e.lambda, best);
        let got: std::collections::BTreeSet<Vec<usize>> = e.cuts.iter().map(|c| c.s_side.clone()).collect();
        prop_assert_eq!(got.len(), e.cuts.len());
        prop_assert_eq!(got, want);
    }
}

#[test]
fn oracle_agrees_with_exact_on_small_triangle() {
    let net = Network::new("tri", 3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
    let ms = MeasurementSet::new(&net, (0..3).map(|line| Measurement::Flow { line }).collect()).unwrap();
    let h = build_h(&net, &ms);
    for a in 0..3 {
        assert_eq!(oracle_sparsest(&h, a).unwrap().cardinality, 2);
        assert_eq!(solve_security_index(&h, a, &ExactOptions::default()).unwrap().cardinality, 2);
    }
}

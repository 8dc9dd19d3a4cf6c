//! Shared generators and brute-force references for integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use ktuple_core::{
    is_unobservable, refine_to_critical, Case, IntMatrix, Measurement, MeasurementSet, MinCutSolver, Network, Provenance,
    RankEngine, RowIndexSet,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn observable(h: &IntMatrix) -> bool {
    RankEngine::new(h).rank_without(&RowIndexSet::new()) + 1 == h.cols()
}

/// Connected multigraph on `n` buses: a random tree plus `extra` random lines.
pub fn random_network(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> Network {
    let mut lines = Vec::new();
    for b in 1..n {
        lines.push((rng.gen_range(0..b), b));
    }
    for _ in 0..extra {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        lines.push((a, b));
    }
    Network::new("random", n, lines).expect("valid random network")
}

/// Random measurements (repeats allowed) on `net`, at most `max_m` rows.
pub fn random_measurements(rng: &mut ChaCha8Rng, net: &Network, max_m: usize) -> Vec<Measurement> {
    let m = rng.gen_range(1..=max_m);
    (0..m)
        .map(|_| {
            if rng.gen_bool(0.6) {
                Measurement::Flow {
                    line: rng.gen_range(0..net.lines().len()),
                }
            } else {
                Measurement::Injection {
                    bus: rng.gen_range(0..net.bus_count()),
                }
            }
        })
        .collect()
}

/// Random observable case with `n <= max_n` buses and `m <= max_m` rows.
pub fn random_observable_case(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> Case {
    loop {
        let n = rng.gen_range(2..=max_n);
        let extra = rng.gen_range(0..=n);
        let net = random_network(rng, n, extra);
        let entries = random_measurements(rng, &net, max_m);
        let ms = MeasurementSet::new(&net, entries).expect("valid measurements");
        let case = Case::new(net, ms);
        if observable(&case.jacobian()) {
            return case;
        }
    }
}

/// Source sides of every minimum-modified-weight `s`-`t` bipartition, by
/// trying all `2^(n-2)` of them.
pub fn brute_force_min_cuts(case: &Case, s: usize, t: usize) -> (u64, BTreeSet<Vec<usize>>) {
    let h = case.jacobian();
    let solver = MinCutSolver::new(case, &h);
    let n = case.network.bus_count();
    let free: Vec<usize> = (0..n).filter(|&b| b != s && b != t).collect();
    let mut best = u64::MAX;
    let mut sides = BTreeSet::new();
    for mask in 0u32..(1 << free.len()) {
        let mut side = vec![false; n];
        side[s] = true;
        for (i, &b) in free.iter().enumerate() {
            side[b] = mask >> i & 1 == 1;
        }
        let cut = solver.cut_from_side(&side);
        if cut.modified_cost < best {
            best = cut.modified_cost;
            sides.clear();
        }
        if cut.modified_cost == best {
            sides.insert(cut.s_side);
        }
    }
    (best, sides)
}

/// The support of an exact solution must be unobservable when removed, and
/// refine to a verified tuple of the same size. Returns a description of
/// the first violation.
pub fn round_trip(h: &IntMatrix, anchor: usize, support: &[usize]) -> Result<(), String> {
    let set: RowIndexSet = support.iter().copied().collect();
    if !is_unobservable(h, &set) {
        return Err(format!("anchor {anchor}: removing support {support:?} leaves the network observable"));
    }
    match refine_to_critical(h, &set, anchor, Provenance::Exact) {
        Ok(t) if t.cardinality == support.len() => Ok(()),
        Ok(t) => Err(format!("anchor {anchor}: support {support:?} refined to smaller {:?}", t.rows)),
        Err(e) => Err(format!("anchor {anchor}: support {support:?} does not refine: {e}")),
    }
}

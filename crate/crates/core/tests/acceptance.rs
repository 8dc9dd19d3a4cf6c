//! Acceptance checks 1-9. Runs sequentially and prints one PASS/FAIL line per
//! criterion; the process fails if any criterion fails.

mod common;

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ktuple_core::{
    big_m, builtin, export_milp, load_case, membership_report, oracle_sparsest, removal_sweep, solve_all,
    solve_security_index, verify_critical, ExactOptions, ExactSolver, MilpModel, MinCutOptions, MinCutSolver,
    Provenance, RemovalKind, ScenarioConfig, SolverChoice, DEFAULT_NODE_BUDGET,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_force_min_cuts, data, random_network, random_observable_case, round_trip};

/// Every exact support seen, for the round-trip criterion.
#[derive(Default)]
struct Seen {
    checked: usize,
    failures: Vec<String>,
}

impl Seen {
    fn check(&mut self, h: &ktuple_core::IntMatrix, anchor: usize, support: &[usize]) {
        self.checked += 1;
        if let Err(e) = round_trip(h, anchor, support) {
            self.failures.push(e);
        }
    }
}

type Outcome = Result<String, String>;

fn within(elapsed: Duration, limit_s: f64, what: &str) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit_s {
        Ok(())
    } else {
        Err(format!("{what} took {:.2} s (limit {limit_s} s)", elapsed.as_secs_f64()))
    }
}

fn c1_overcount_example() -> Outcome {
    let t = Instant::now();
    let case = load_case(data("three_bus_overcount.json").to_str().unwrap()).map_err(|e| e.to_string())?;
    let h = case.jacobian();
    let solver = MinCutSolver::new(&case, &h);
    let cut = solver.cut_from_side(&[true, false, false]);
    within(t.elapsed(), 1.0, "example")?;
    if (cut.true_cost, cut.modified_cost) == (4, 5) {
        Ok(format!("true cost {}, modified cost {}", cut.true_cost, cut.modified_cost))
    } else {
        Err(format!("true cost {}, modified cost {} (want 4, 5)", cut.true_cost, cut.modified_cost))
    }
}

fn c2_full_14(seen: &mut Seen) -> Outcome {
    let case = builtin("ieee14").unwrap();
    let h = case.jacobian();
    let t = Instant::now();
    let recs = solve_all(&case, SolverChoice::Both, ktuple_core::mincut::DEFAULT_CUT_CAP, DEFAULT_NODE_BUDGET);
    let elapsed = t.elapsed();
    for r in &recs {
        seen.check(&h, r.anchor, r.exact_support.as_deref().unwrap_or(&[]));
    }
    let mismatched: Vec<usize> = recs
        .iter()
        .filter(|r| r.mincut_k.is_none() || r.mincut_k != r.exact_k || r.exact_proved_optimal != Some(true))
        .map(|r| r.anchor)
        .collect();
    within(elapsed, 120.0, "both solvers")?;
    if mismatched.is_empty() {
        Ok(format!("{} anchors, Min-Cut = exact, {:.2} s", recs.len(), elapsed.as_secs_f64()))
    } else {
        Err(format!("Min-Cut differs from exact on anchors {mismatched:?}"))
    }
}

fn c3_ieee118(seen: &mut Seen) -> Outcome {
    let case = builtin("ieee118-2x").unwrap();
    let h = case.jacobian();
    let mc = MinCutSolver::new(&case, &h);
    let opts = MinCutOptions::default();
    let t = Instant::now();
    let all: Vec<_> = (0..h.rows()).map(|a| mc.solve(a, &opts)).collect();
    let mc_time = t.elapsed();
    let mut rng = ChaCha8Rng::seed_from_u64(118);
    let anchors = sample(&mut rng, h.rows(), 20).into_vec();
    let ex = ExactSolver::new(&h);
    let mut bad = Vec::new();
    for &a in &anchors {
        let sol = ex.solve(a, &ExactOptions::default()).map_err(|e| format!("anchor {a}: {e}"))?;
        seen.check(&h, a, sol.support.as_slice());
        let est = all[a].as_ref().map_err(|e| format!("anchor {a}: {e}"))?.estimate;
        if est != sol.cardinality || !sol.proved_optimal {
            bad.push((a, est, sol.cardinality));
        }
    }
    within(mc_time, 5.0, "all-anchor Min-Cut")?;
    if !bad.is_empty() {
        return Err(format!("(anchor, mincut, exact) mismatches: {bad:?}"));
    }
    Ok(format!(
        "{} sampled anchors match; Min-Cut over {} anchors in {:.3} s",
        anchors.len(),
        h.rows(),
        mc_time.as_secs_f64()
    ))
}

fn c4_oracle(seen: &mut Seen) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut anchors = 0;
    for k in 0..100 {
        let case = random_observable_case(&mut rng, 6, 20);
        let h = case.jacobian();
        for a in 0..h.rows() {
            anchors += 1;
            let sol = solve_security_index(&h, a, &ExactOptions::default()).map_err(|e| format!("case {k} anchor {a}: {e}"))?;
            seen.check(&h, a, sol.support.as_slice());
            let oracle = oracle_sparsest(&h, a).map_err(|e| format!("case {k} anchor {a}: {e}"))?;
            if sol.cardinality != oracle.cardinality {
                return Err(format!(
                    "case {k} anchor {a}: exact {} vs oracle {}",
                    sol.cardinality, oracle.cardinality
                ));
            }
            sol.critical_tuple(&h).map_err(|e| format!("case {k} anchor {a}: exact: {e}"))?;
            verify_critical(&h, &oracle.row_set(), a, Provenance::Oracle).map_err(|e| format!("case {k} anchor {a}: oracle: {e}"))?;
        }
    }
    Ok(format!("100 networks, {anchors} anchors agree"))
}

fn c6_cut_enumeration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut total = 0;
    for k in 0..50 {
        let n = rng.gen_range(2..=8);
        let extra = rng.gen_range(0..=2 * n);
        let net = random_network(&mut rng, n, extra);
        let entries = common::random_measurements(&mut rng, &net, 3 * n);
        let case = ktuple_core::Case::new(net.clone(), ktuple_core::MeasurementSet::new(&net, entries).unwrap());
        let s = rng.gen_range(0..n);
        let t = (s + rng.gen_range(1..n)) % n;
        let h = case.jacobian();
        let e = MinCutSolver::new(&case, &h).enumerate(s, t, usize::MAX).map_err(|e| e.to_string())?;
        let got: std::collections::BTreeSet<Vec<usize>> = e.cuts.iter().map(|c| c.s_side.clone()).collect();
        let (best, want) = brute_force_min_cuts(&case, s, t);
        if e.lambda != best || got != want || got.len() != e.cuts.len() || e.truncated {
            return Err(format!("graph {k}: lambda {} vs {best}, {} cuts vs {}", e.lambda, got.len(), want.len()));
        }
        total += want.len();
    }
    Ok(format!("50 graphs, {total} minimum cuts match brute force"))
}

fn c7_sweeps(seen: &mut Seen) -> Outcome {
    let fractions: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let lines = ScenarioConfig {
        removal_kind: RemovalKind::Lines,
        rng_seed: 2011,
        ..ScenarioConfig::new("builtin:ieee14")
    };
    let a = removal_sweep(&lines, &fractions, 5).map_err(|e| e.to_string())?;
    let inj = ScenarioConfig {
        removal_kind: RemovalKind::Injections,
        rng_seed: 2011,
        ..ScenarioConfig::new("builtin:ieee118")
    };
    let b = removal_sweep(&inj, &[0.0, 1.0], 5).map_err(|e| e.to_string())?;

    let mut problems = Vec::new();
    let mut records = 0;
    for sweep in [&a, &b] {
        let base = load_case(&sweep.case).unwrap();
        for p in &sweep.points {
            for r in &p.reports {
                let gone: std::collections::BTreeSet<usize> = r.removed_rows.iter().copied().collect();
                let case = base.with_measurements(base.measurements.retain_rows(|k, _| !gone.contains(&k))).unwrap();
                let h = case.jacobian();
                for rec in &r.records {
                    records += 1;
                    if let Some(s) = &rec.exact_support {
                        seen.check(&h, rec.anchor, s);
                    }
                    match (rec.mincut_k, rec.mincut_refined_k, rec.exact_k) {
                        (Some(m), Some(rk), Some(x)) if m >= x && rk >= x => {}
                        other => problems.push(format!("{} {} anchor {}: {other:?}", sweep.case, p.fraction, rec.anchor)),
                    }
                }
            }
        }
    }
    let first = &a.points[0];
    let last = &a.points[10];
    if first.ensembles != 5 || last.ensembles != 5 {
        problems.push(format!("14-bus ensembles at 0%/100%: {}/{}", first.ensembles, last.ensembles));
    }
    if first.estimate.avg_relative_overestimation != 0.0 {
        problems.push(format!("14-bus 0%: {:.2}% (want 0)", first.estimate.avg_relative_overestimation));
    }
    if last.estimate.avg_relative_overestimation < 30.0 {
        problems.push(format!("14-bus 100%: {:.2}% (want >= 30)", last.estimate.avg_relative_overestimation));
    }
    for p in &b.points {
        if p.ensembles != 5 || p.estimate.avg_overestimation != 0.0 || p.estimate.overestimated != 0 {
            problems.push(format!("118-bus injections {}: {:?}", p.fraction, p.estimate));
        }
    }
    if !problems.is_empty() {
        return Err(problems.join("; "));
    }
    Ok(format!(
        "14-bus lines 0% -> {:.1}%, 100% -> {:.1}% avg relative overestimation; 118-bus injections 0%/100% -> 0/0; {records} records with mincut >= exact",
        first.estimate.avg_relative_overestimation, last.estimate.avg_relative_overestimation
    ))
}

fn c8_membership() -> Outcome {
    let case = builtin("ieee6").unwrap();
    let t = Instant::now();
    let rep = membership_report(&case, "ieee6", SolverChoice::MinCut, ktuple_core::mincut::DEFAULT_CUT_CAP, DEFAULT_NODE_BUDGET);
    let elapsed = t.elapsed();
    let h = case.jacobian();
    for tuple in &rep.tuples {
        let set = tuple.iter().copied().collect();
        let anchor = tuple[0];
        verify_critical(&h, &set, anchor, Provenance::MinCut).map_err(|e| format!("tuple {tuple:?}: {e}"))?;
    }
    let counts: Vec<usize> = rep.counts.iter().map(|c| c.count).collect();
    let mut sorted = counts.clone();
    sorted.sort_unstable();
    let median = sorted[sorted.len() / 2];
    // rows: injections at buses 1..6 first, then flows; row 11 is line {2,5}
    let line25 = counts[11];
    let detail = format!(
        "{} distinct tuples ({} per-anchor), line 2-5 count {line25}, injection 2/5 counts {}/{} vs median {median}, {:.3} s",
        rep.tuples.len(),
        rep.anchor_tuples.len(),
        counts[1],
        counts[4],
        elapsed.as_secs_f64()
    );
    within(elapsed, 10.0, "membership")?;
    if rep.tuples.len() >= 15 && line25 <= 2 && counts[1] > median && counts[4] > median && rep.rejected == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c9_milp_golden() -> Outcome {
    let case = load_case(data("two_bus.json").to_str().unwrap()).map_err(|e| e.to_string())?;
    let h = case.jacobian();
    let golden = fs::read(data("two_bus.lp")).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("model.lp");
    let model = export_milp(&h, 0, big_m(100), &path).map_err(|e| e.to_string())?;
    let written = fs::read(&path).map_err(|e| e.to_string())?;
    let counts = (model.binary_count(), model.continuous_count(), model.constraint_count());
    if counts != (1, 2, 3) {
        return Err(format!("(binaries, continuous, rows) = {counts:?}"));
    }
    if written != golden || MilpModel::new(&h, 0, big_m(100)).unwrap().to_lp().as_bytes() != golden.as_slice() {
        return Err("exported model differs from golden file".into());
    }
    Ok("1 binary, 2 continuous, 3 rows; byte-identical to golden file".into())
}

fn main() -> ExitCode {
    let mut seen = Seen::default();
    let mut outcomes: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut run = |n: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let out = f();
        let secs = t.elapsed().as_secs_f64();
        let line = match &out {
            Ok(d) => format!("PASS criterion {n} ({name}): {d} [{secs:.2} s]"),
            Err(d) => format!("FAIL criterion {n} ({name}): {d} [{secs:.2} s]"),
        };
        println!("{line}");
        outcomes.push((n, name, out));
    };
    run(1, "three-bus cut costs", &mut c1_overcount_example);
    run(2, "14-bus full metering exactness", &mut || c2_full_14(&mut seen));
    run(3, "118-bus Min-Cut accuracy and speed", &mut || c3_ieee118(&mut seen));
    run(4, "oracle equivalence", &mut || c4_oracle(&mut seen));
    run(6, "minimum cut enumeration", &mut c6_cut_enumeration);
    run(7, "removal sweep trends", &mut || c7_sweeps(&mut seen));
    run(8, "6-bus membership", &mut c8_membership);
    run(9, "LP export golden file", &mut c9_milp_golden);
    let five = if seen.failures.is_empty() && seen.checked > 0 {
        Ok(format!("{} exact supports unobservable when removed and minimal", seen.checked))
    } else {
        Err(format!("{} of {} failed: {:?}", seen.failures.len(), seen.checked, seen.failures.iter().take(3).collect::<Vec<_>>()))
    };
    match &five {
        Ok(d) => println!("PASS criterion 5 (exact solution round trip): {d}"),
        Err(d) => println!("FAIL criterion 5 (exact solution round trip): {d}"),
    }
    outcomes.push((5, "exact solution round trip", five));
    outcomes.sort_by_key(|o| o.0);
    let failed: Vec<u32> = outcomes.iter().filter(|o| o.2.is_err()).map(|o| o.0).collect();
    println!("acceptance: {} passed, {} failed {:?}", outcomes.len() - failed.len(), failed.len(), failed);
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

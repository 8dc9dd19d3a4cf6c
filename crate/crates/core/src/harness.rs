//! Experiment driver: per-anchor sweeps, random measurement removal,
//! membership counts and timing tables.
//!
//! Reports serialize to JSON (canonical) and CSV. Everything except the
//! timing fields is a deterministic function of the configuration.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cases::{load_case, LoadError};
use crate::exact::{ExactOptions, ExactSolver, DEFAULT_NODE_BUDGET};
use crate::jacobian::{IntMatrix, RowIndexSet};
use crate::mincut::{MinCutOptions, MinCutSolver, DEFAULT_CUT_CAP};
use crate::netmodel::{Case, CaseError, Measurement, MeasurementSet};
use crate::observability::{verify_critical, Provenance, RankEngine};

/// Draws that leave the network unobservable are redrawn this many times.
pub const DEFAULT_MAX_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RemovalKind {
    Lines,
    Injections,
    Arbitrary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    MinCut,
    Exact,
    Both,
}

impl SolverChoice {
    pub fn mincut(self) -> bool {
        matches!(self, SolverChoice::MinCut | SolverChoice::Both)
    }

    pub fn exact(self) -> bool {
        matches!(self, SolverChoice::Exact | SolverChoice::Both)
    }
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $name:literal),* $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok($ty::$variant),)*
                    _ => Err(format!("expected one of: {}", [$($name),*].join(", "))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name,)* })
            }
        }
    };
}

keyword_enum!(RemovalKind { Lines => "lines", Injections => "injections", Arbitrary => "arbitrary" });
keyword_enum!(SolverChoice { MinCut => "mincut", Exact => "exact", Both => "both" });

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    /// `builtin:<name>` or a path to a JSON case.
    pub case: String,
    /// Rebuild the metering with this many flow meters per line; `None`
    /// keeps the case's own measurements.
    pub meters_per_line: Option<usize>,
    /// With `meters_per_line`: also meter every bus injection.
    pub include_all_injections: bool,
    pub removal_fraction: f64,
    pub removal_kind: RemovalKind,
    pub rng_seed: u64,
    /// ChaCha stream; sweeps use one stream per (ensemble, fraction).
    pub rng_stream: u64,
    pub solver: SolverChoice,
    pub cut_cap: usize,
    pub node_budget: u64,
    pub max_retries: usize,
}

impl ScenarioConfig {
    pub fn new(case: impl Into<String>) -> Self {
        ScenarioConfig {
            case: case.into(),
            meters_per_line: None,
            include_all_injections: true,
            removal_fraction: 0.0,
            removal_kind: RemovalKind::Lines,
            rng_seed: 0,
            rng_stream: 0,
            solver: SolverChoice::Both,
            cut_cap: DEFAULT_CUT_CAP,
            node_budget: DEFAULT_NODE_BUDGET,
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error("removal fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("meters per line must be at least 1")]
    NoMeters,
    #[error("base measurement set of `{0}` leaves the network unobservable")]
    UnobservableBase(String),
    #[error("every one of {attempts} draws removing {fraction} of the {kind} measurements left the network unobservable")]
    Unobservable {
        fraction: f64,
        kind: RemovalKind,
        attempts: usize,
    },
}

/// One anchor's results. `mincut_k` is the Min-Cut estimate (true cost of
/// the cheapest minimum cut), `mincut_refined_k` the size of the verified
/// tuple it was refined to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorRecord {
    pub anchor: usize,
    pub measurement: String,
    pub mincut_k: Option<usize>,
    pub mincut_refined_k: Option<usize>,
    pub mincut_tuple: Option<Vec<usize>>,
    pub exact_k: Option<usize>,
    pub exact_support: Option<Vec<usize>>,
    pub exact_proved_optimal: Option<bool>,
    pub overestimate: Option<i64>,
    pub refined_overestimate: Option<i64>,
    pub truncated: bool,
    pub error: Option<String>,
    pub mincut_seconds: f64,
    pub exact_seconds: f64,
}

/// Aggregates over the anchors where both solvers produced a value.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Overestimation {
    pub compared: usize,
    pub overestimated: usize,
    pub percent_overestimated: f64,
    /// Mean of `mincut - exact` over all compared anchors.
    pub avg_overestimation: f64,
    /// Mean of `(mincut - exact) / exact`, in percent, over all compared anchors.
    pub avg_relative_overestimation: f64,
    /// Same, over overestimated anchors only (0 when there are none).
    pub avg_relative_overestimation_overestimated_only: f64,
}

impl Overestimation {
    fn from_pairs(pairs: impl Iterator<Item = (usize, usize)>) -> Self {
        let pairs: Vec<(usize, usize)> = pairs.collect();
        if pairs.is_empty() {
            return Overestimation::default();
        }
        let n = pairs.len() as f64;
        let over: Vec<(f64, f64)> = pairs
            .iter()
            .map(|&(mc, ex)| ((mc as f64 - ex as f64), ex as f64))
            .collect();
        let hits: Vec<f64> = over.iter().filter(|(d, _)| *d > 0.0).map(|(d, e)| d / e * 100.0).collect();
        Overestimation {
            compared: pairs.len(),
            overestimated: hits.len(),
            percent_overestimated: hits.len() as f64 / n * 100.0,
            avg_overestimation: over.iter().map(|(d, _)| d).sum::<f64>() / n,
            avg_relative_overestimation: over.iter().map(|(d, e)| d / e * 100.0).sum::<f64>() / n,
            avg_relative_overestimation_overestimated_only: if hits.is_empty() {
                0.0
            } else {
                hits.iter().sum::<f64>() / hits.len() as f64
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub case: String,
    pub measurements: usize,
    pub removal_kind: RemovalKind,
    pub removal_fraction: f64,
    /// Rows of the base measurement set that were removed.
    pub removed_rows: Vec<usize>,
    pub draws: usize,
    pub records: Vec<AnchorRecord>,
    /// Min-Cut estimate against the exact optimum.
    pub estimate: Overestimation,
    /// Refined Min-Cut tuple against the exact optimum.
    pub refined: Overestimation,
    pub solve_time_mincut: f64,
    pub solve_time_exact: f64,
    /// `solve_time_mincut / solve_time_exact`.
    pub time_ratio: Option<f64>,
    pub truncated: bool,
    pub budget_exhausted: bool,
}

impl StatsReport {
    /// Recomputes the aggregates from `records`.
    pub fn aggregate(&mut self) {
        self.estimate = Overestimation::from_pairs(self.records.iter().filter_map(|r| Some((r.mincut_k?, r.exact_k?))));
        self.refined =
            Overestimation::from_pairs(self.records.iter().filter_map(|r| Some((r.mincut_refined_k?, r.exact_k?))));
        self.solve_time_mincut = self.records.iter().map(|r| r.mincut_seconds).sum();
        self.solve_time_exact = self.records.iter().map(|r| r.exact_seconds).sum();
        self.time_ratio = (self.solve_time_exact > 0.0 && self.solve_time_mincut > 0.0)
            .then(|| self.solve_time_mincut / self.solve_time_exact);
        self.truncated = self.records.iter().any(|r| r.truncated);
        self.budget_exhausted = self.records.iter().any(|r| r.exact_proved_optimal == Some(false));
    }

    /// One CSV row per anchor.
    pub fn to_csv(&self) -> String {
        let mut w = csv_writer();
        w.write_record([
            "anchor",
            "measurement",
            "mincut_k",
            "mincut_refined_k",
            "exact_k",
            "overestimate",
            "refined_overestimate",
            "exact_proved_optimal",
            "truncated",
            "mincut_seconds",
            "exact_seconds",
            "error",
        ])
        .expect("in-memory csv");
        for r in &self.records {
            w.write_record([
                r.anchor.to_string(),
                r.measurement.clone(),
                opt(r.mincut_k),
                opt(r.mincut_refined_k),
                opt(r.exact_k),
                opt(r.overestimate),
                opt(r.refined_overestimate),
                opt(r.exact_proved_optimal),
                r.truncated.to_string(),
                format!("{:.6}", r.mincut_seconds),
                format!("{:.6}", r.exact_seconds),
                r.error.clone().unwrap_or_default(),
            ])
            .expect("in-memory csv");
        }
        csv_string(w)
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn seconds(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// The case named by `cfg` with its base metering applied.
pub fn base_case(cfg: &ScenarioConfig) -> Result<Case, HarnessError> {
    let case = load_case(&cfg.case)?;
    match cfg.meters_per_line {
        None => Ok(case),
        Some(0) => Err(HarnessError::NoMeters),
        Some(k) => {
            let ms = MeasurementSet::full(&case.network, k, cfg.include_all_injections);
            Ok(Case::new(case.network, ms))
        }
    }
}

fn observable(h: &IntMatrix) -> bool {
    RankEngine::new(h).rank_without(&RowIndexSet::new()) + 1 == h.cols()
}

fn eligible(kind: RemovalKind, m: &Measurement) -> bool {
    match kind {
        RemovalKind::Lines => matches!(m, Measurement::Flow { .. }),
        RemovalKind::Injections => matches!(m, Measurement::Injection { .. }),
        RemovalKind::Arbitrary => true,
    }
}

/// Samples the removed rows. Returns the removed rows, the reduced case and
/// the number of draws used.
pub fn draw_scenario(base: &Case, cfg: &ScenarioConfig) -> Result<(Vec<usize>, Case, usize), HarnessError> {
    let f = cfg.removal_fraction;
    if !(0.0..=1.0).contains(&f) {
        return Err(HarnessError::BadFraction(f));
    }
    if !observable(&base.jacobian()) {
        return Err(HarnessError::UnobservableBase(cfg.case.clone()));
    }
    let pool: Vec<usize> = (0..base.measurements.len())
        .filter(|&r| eligible(cfg.removal_kind, &base.measurements.entries()[r]))
        .collect();
    let count = (f * pool.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(cfg.rng_stream);
    // a deterministic draw needs only one attempt
    let attempts = if count == 0 || count == pool.len() { 1 } else { cfg.max_retries.max(1) };
    for draw in 1..=attempts {
        let mut removed: Vec<usize> = sample(&mut rng, pool.len(), count).into_iter().map(|i| pool[i]).collect();
        removed.sort_unstable();
        let gone: BTreeSet<usize> = removed.iter().copied().collect();
        let entries = base.measurements.retain_rows(|r, _| !gone.contains(&r));
        if entries.is_empty() {
            continue;
        }
        let case = base.with_measurements(entries)?;
        if observable(&case.jacobian()) {
            return Ok((removed, case, draw));
        }
    }
    Err(HarnessError::Unobservable {
        fraction: f,
        kind: cfg.removal_kind,
        attempts,
    })
}

/// Runs the selected solvers for every anchor of `case`.
pub fn solve_all(case: &Case, solver: SolverChoice, cut_cap: usize, node_budget: u64) -> Vec<AnchorRecord> {
    let h = case.jacobian();
    let mc = MinCutSolver::new(case, &h);
    let ex = ExactSolver::new(&h);
    let mc_opts = MinCutOptions { cut_cap };
    (0..h.rows())
        .into_par_iter()
        .map(|anchor| {
            let mut rec = AnchorRecord {
                anchor,
                measurement: case.measurements.describe(&case.network, anchor),
                mincut_k: None,
                mincut_refined_k: None,
                mincut_tuple: None,
                exact_k: None,
                exact_support: None,
                exact_proved_optimal: None,
                overestimate: None,
                refined_overestimate: None,
                truncated: false,
                error: None,
                mincut_seconds: 0.0,
                exact_seconds: 0.0,
            };
            let mut errors = Vec::new();
            if solver.mincut() {
                let t = Instant::now();
                let res = mc.solve(anchor, &mc_opts);
                rec.mincut_seconds = seconds(t.elapsed());
                match res {
                    Ok(r) => {
                        rec.mincut_k = Some(r.estimate);
                        rec.mincut_refined_k = Some(r.tuple.cardinality);
                        rec.mincut_tuple = Some(r.tuple.rows);
                        rec.truncated = r.truncated;
                    }
                    Err(e) => errors.push(format!("mincut: {e}")),
                }
            }
            if solver.exact() {
                let opts = ExactOptions {
                    node_budget,
                    ..ExactOptions::default()
                };
                let t = Instant::now();
                let res = ex.solve(anchor, &opts);
                rec.exact_seconds = seconds(t.elapsed());
                match res {
                    Ok(sol) => {
                        rec.exact_k = Some(sol.cardinality);
                        rec.exact_support = Some(sol.support.as_slice().to_vec());
                        rec.exact_proved_optimal = Some(sol.proved_optimal);
                    }
                    Err(e) => {
                        rec.exact_proved_optimal = Some(false);
                        errors.push(format!("exact: {e}"));
                    }
                }
            }
            if let Some(ex) = rec.exact_k {
                rec.overestimate = rec.mincut_k.map(|k| k as i64 - ex as i64);
                rec.refined_overestimate = rec.mincut_refined_k.map(|k| k as i64 - ex as i64);
            }
            if !errors.is_empty() {
                rec.error = Some(errors.join("; "));
            }
            rec
        })
        .collect()
}

/// One scenario: draw the removal, then solve every anchor.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<StatsReport, HarnessError> {
    let base = base_case(cfg)?;
    run_on_base(&base, cfg)
}

fn run_on_base(base: &Case, cfg: &ScenarioConfig) -> Result<StatsReport, HarnessError> {
    let (removed_rows, case, draws) = draw_scenario(base, cfg)?;
    Ok(report_for(&case, cfg, removed_rows, draws))
}

fn report_for(case: &Case, cfg: &ScenarioConfig, removed_rows: Vec<usize>, draws: usize) -> StatsReport {
    let records = solve_all(case, cfg.solver, cfg.cut_cap, cfg.node_budget);
    let mut report = StatsReport {
        case: cfg.case.clone(),
        measurements: case.measurements.len(),
        removal_kind: cfg.removal_kind,
        removal_fraction: cfg.removal_fraction,
        removed_rows,
        draws,
        records,
        estimate: Overestimation::default(),
        refined: Overestimation::default(),
        solve_time_mincut: 0.0,
        solve_time_exact: 0.0,
        time_ratio: None,
        truncated: false,
        budget_exhausted: false,
    };
    report.aggregate();
    report
}

/// Ensemble means at one removal fraction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub fraction: f64,
    pub ensembles: usize,
    /// `(ensemble, reason)` for every ensemble member that was aborted.
    pub aborted: Vec<(usize, String)>,
    pub estimate: Overestimation,
    pub refined: Overestimation,
    pub solve_time_mincut: f64,
    pub solve_time_exact: f64,
    pub reports: Vec<StatsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub case: String,
    pub removal_kind: RemovalKind,
    pub rng_seed: u64,
    pub points: Vec<SweepPoint>,
    pub truncated: bool,
    pub budget_exhausted: bool,
}

fn mean_over(items: &[&Overestimation]) -> Overestimation {
    let n = items.len() as f64;
    if items.is_empty() {
        return Overestimation::default();
    }
    let avg = |f: &dyn Fn(&Overestimation) -> f64| items.iter().map(|o| f(o)).sum::<f64>() / n;
    Overestimation {
        compared: items.iter().map(|o| o.compared).sum(),
        overestimated: items.iter().map(|o| o.overestimated).sum(),
        percent_overestimated: avg(&|o| o.percent_overestimated),
        avg_overestimation: avg(&|o| o.avg_overestimation),
        avg_relative_overestimation: avg(&|o| o.avg_relative_overestimation),
        avg_relative_overestimation_overestimated_only: avg(&|o| o.avg_relative_overestimation_overestimated_only),
    }
}

/// Repeats `template` over `fractions` and `ensembles` seeds. Ensemble `e`
/// at fraction index `k` uses ChaCha stream `(e << 32) | k`. Identical
/// removals (for instance every ensemble at 0%) are solved once.
pub fn removal_sweep(template: &ScenarioConfig, fractions: &[f64], ensembles: usize) -> Result<SweepReport, HarnessError> {
    if let Some(&f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(HarnessError::BadFraction(f));
    }
    let base = base_case(template)?;
    if !observable(&base.jacobian()) {
        return Err(HarnessError::UnobservableBase(template.case.clone()));
    }
    let mut cache: HashMap<Vec<usize>, StatsReport> = HashMap::new();
    let mut points = Vec::with_capacity(fractions.len());
    for (k, &fraction) in fractions.iter().enumerate() {
        let mut reports = Vec::new();
        let mut aborted = Vec::new();
        for e in 0..ensembles {
            let cfg = ScenarioConfig {
                removal_fraction: fraction,
                rng_stream: ((e as u64) << 32) | k as u64,
                ..template.clone()
            };
            match draw_scenario(&base, &cfg) {
                Ok((removed, case, draws)) => {
                    let report = match cache.get(&removed) {
                        Some(r) => StatsReport {
                            removal_fraction: fraction,
                            draws,
                            ..r.clone()
                        },
                        None => {
                            let r = report_for(&case, &cfg, removed.clone(), draws);
                            cache.insert(removed, r.clone());
                            r
                        }
                    };
                    reports.push(report);
                }
                Err(e_) => aborted.push((e, e_.to_string())),
            }
        }
        let est: Vec<&Overestimation> = reports.iter().map(|r| &r.estimate).collect();
        let refd: Vec<&Overestimation> = reports.iter().map(|r| &r.refined).collect();
        let n = reports.len().max(1) as f64;
        points.push(SweepPoint {
            fraction,
            ensembles: reports.len(),
            aborted,
            estimate: mean_over(&est),
            refined: mean_over(&refd),
            solve_time_mincut: reports.iter().map(|r| r.solve_time_mincut).sum::<f64>() / n,
            solve_time_exact: reports.iter().map(|r| r.solve_time_exact).sum::<f64>() / n,
            reports,
        });
    }
    let truncated = points.iter().flat_map(|p| &p.reports).any(|r| r.truncated);
    let budget_exhausted = points.iter().flat_map(|p| &p.reports).any(|r| r.budget_exhausted);
    Ok(SweepReport {
        case: template.case.clone(),
        removal_kind: template.removal_kind,
        rng_seed: template.rng_seed,
        points,
        truncated,
        budget_exhausted,
    })
}

impl SweepReport {
    /// One CSV row per fraction with the ensemble means.
    pub fn to_csv(&self) -> String {
        let mut w = csv_writer();
        w.write_record([
            "fraction",
            "ensembles",
            "aborted",
            "percent_overestimated",
            "avg_overestimation",
            "avg_relative_overestimation",
            "avg_relative_overestimation_overestimated_only",
            "refined_percent_overestimated",
            "refined_avg_relative_overestimation",
            "solve_time_mincut",
            "solve_time_exact",
        ])
        .expect("in-memory csv");
        for p in &self.points {
            w.write_record([
                p.fraction.to_string(),
                p.ensembles.to_string(),
                p.aborted.len().to_string(),
                format!("{:.4}", p.estimate.percent_overestimated),
                format!("{:.4}", p.estimate.avg_overestimation),
                format!("{:.4}", p.estimate.avg_relative_overestimation),
                format!("{:.4}", p.estimate.avg_relative_overestimation_overestimated_only),
                format!("{:.4}", p.refined.percent_overestimated),
                format!("{:.4}", p.refined.avg_relative_overestimation),
                format!("{:.6}", p.solve_time_mincut),
                format!("{:.6}", p.solve_time_exact),
            ])
            .expect("in-memory csv");
        }
        csv_string(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipEntry {
    pub row: usize,
    pub measurement: String,
    /// Per-anchor tuples containing this row (one tuple per anchor and solver).
    pub count: usize,
    /// Distinct tuples containing this row.
    pub distinct_count: usize,
}

/// The tuple each anchor's solve produced, and how many of them contain each
/// measurement. Counts are lower bounds on the number of critical tuples
/// through a measurement: only the tuples the solvers return are seen.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    pub case: String,
    pub solver: SolverChoice,
    /// `(anchor, tuple rows)` in anchor order; Min-Cut before exact.
    pub anchor_tuples: Vec<(usize, Vec<usize>)>,
    /// Distinct verified tuples, sorted.
    pub tuples: Vec<Vec<usize>>,
    pub counts: Vec<MembershipEntry>,
    /// Tuples that failed verification (expected empty); not counted.
    pub rejected: usize,
    pub truncated: bool,
    pub budget_exhausted: bool,
}

pub fn membership_report(case: &Case, name: &str, solver: SolverChoice, cut_cap: usize, node_budget: u64) -> MembershipReport {
    let h = case.jacobian();
    let records = solve_all(case, solver, cut_cap, node_budget);
    let mut produced: Vec<(usize, Vec<usize>)> = Vec::new();
    for r in &records {
        produced.extend(r.mincut_tuple.clone().map(|t| (r.anchor, t)));
    }
    for r in &records {
        produced.extend(r.exact_support.clone().map(|t| (r.anchor, t)));
    }
    let mut verdicts: BTreeMap<Vec<usize>, bool> = BTreeMap::new();
    let mut anchor_tuples = Vec::new();
    let mut rejected = 0;
    for (anchor, rows) in produced {
        let ok = *verdicts.entry(rows.clone()).or_insert_with(|| {
            let set: RowIndexSet = rows.iter().copied().collect();
            verify_critical(&h, &set, anchor, Provenance::MinCut).is_ok()
        });
        if ok {
            anchor_tuples.push((anchor, rows));
        } else {
            rejected += 1;
        }
    }
    let tuples: Vec<Vec<usize>> = verdicts.into_iter().filter(|(_, ok)| *ok).map(|(t, _)| t).collect();
    let counts = (0..h.rows())
        .map(|row| MembershipEntry {
            row,
            measurement: case.measurements.describe(&case.network, row),
            count: anchor_tuples.iter().filter(|(_, t)| t.contains(&row)).count(),
            distinct_count: tuples.iter().filter(|t| t.contains(&row)).count(),
        })
        .collect();
    MembershipReport {
        case: name.to_string(),
        solver,
        anchor_tuples,
        tuples,
        counts,
        rejected,
        truncated: records.iter().any(|r| r.truncated),
        budget_exhausted: records.iter().any(|r| r.exact_proved_optimal == Some(false)),
    }
}

impl MembershipReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv_writer();
        w.write_record(["row", "measurement", "count", "distinct_count"]).expect("in-memory csv");
        for e in &self.counts {
            w.write_record([e.row.to_string(), e.measurement.clone(), e.count.to_string(), e.distinct_count.to_string()])
                .expect("in-memory csv");
        }
        csv_string(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub case: String,
    pub anchors: usize,
    pub mincut_seconds: Option<f64>,
    pub exact_seconds: Option<f64>,
    /// Anchors whose exact search ran out of nodes.
    pub budget_exhausted: usize,
    /// Anchors whose cut enumeration hit the cap.
    pub truncated: usize,
}

/// Wall-clock time per solver over all anchors of each case. Solvers run
/// separately so neither benefits from the other.
pub fn timing_report(cases: &[String], solver: SolverChoice, cut_cap: usize, node_budget: u64) -> Result<Vec<TimingRow>, HarnessError> {
    let mut rows = Vec::with_capacity(cases.len());
    for name in cases {
        let case = load_case(name)?;
        let anchors = case.measurements.len();
        let mut row = TimingRow {
            case: name.clone(),
            anchors,
            mincut_seconds: None,
            exact_seconds: None,
            budget_exhausted: 0,
            truncated: 0,
        };
        if solver.mincut() {
            let t = Instant::now();
            let recs = solve_all(&case, SolverChoice::MinCut, cut_cap, node_budget);
            row.mincut_seconds = Some(seconds(t.elapsed()));
            row.truncated = recs.iter().filter(|r| r.truncated).count();
        }
        if solver.exact() {
            let t = Instant::now();
            let recs = solve_all(&case, SolverChoice::Exact, cut_cap, node_budget);
            row.exact_seconds = Some(seconds(t.elapsed()));
            row.budget_exhausted = recs.iter().filter(|r| r.exact_proved_optimal == Some(false)).count();
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut w = csv_writer();
    w.write_record(["case", "anchors", "mincut_seconds", "exact_seconds", "budget_exhausted", "truncated"])
        .expect("in-memory csv");
    for r in rows {
        w.write_record([
            r.case.clone(),
            r.anchors.to_string(),
            r.mincut_seconds.map(|s| format!("{s:.6}")).unwrap_or_default(),
            r.exact_seconds.map(|s| format!("{s:.6}")).unwrap_or_default(),
            r.budget_exhausted.to_string(),
            r.truncated.to_string(),
        ])
        .expect("in-memory csv");
    }
    csv_string(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip_times(mut r: StatsReport) -> StatsReport {
        for rec in &mut r.records {
            rec.mincut_seconds = 0.0;
            rec.exact_seconds = 0.0;
        }
        r.aggregate();
        r
    }

    #[test]
    fn full_14_bus_has_no_overestimation() {
        let r = run_sweep(&ScenarioConfig::new("builtin:ieee14")).unwrap();
        assert_eq!(r.records.len(), 34);
        assert_eq!(r.estimate.compared, 34);
        assert_eq!(r.estimate.percent_overestimated, 0.0);
        assert!(r.records.iter().all(|x| x.overestimate == Some(0)));
    }

    #[test]
    fn draws_are_deterministic() {
        let cfg = ScenarioConfig {
            removal_fraction: 0.5,
            rng_seed: 7,
            rng_stream: 3,
            ..ScenarioConfig::new("builtin:ieee14")
        };
        let a = strip_times(run_sweep(&cfg).unwrap());
        let b = strip_times(run_sweep(&cfg).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.removed_rows.len(), 10);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn impossible_removal_is_reported() {
        let cfg = ScenarioConfig {
            removal_fraction: 1.0,
            removal_kind: RemovalKind::Arbitrary,
            ..ScenarioConfig::new("builtin:ieee6")
        };
        assert!(matches!(run_sweep(&cfg), Err(HarnessError::Unobservable { attempts: 1, .. })));
        let cfg = ScenarioConfig {
            removal_fraction: 1.5,
            ..ScenarioConfig::new("builtin:ieee6")
        };
        assert!(matches!(run_sweep(&cfg), Err(HarnessError::BadFraction(_))));
    }

    #[test]
    fn keywords_round_trip() {
        for k in ["lines", "injections", "arbitrary"] {
            assert_eq!(k.parse::<RemovalKind>().unwrap().to_string(), k);
        }
        for k in ["mincut", "exact", "both"] {
            assert_eq!(k.parse::<SolverChoice>().unwrap().to_string(), k);
        }
        assert!("nope".parse::<SolverChoice>().is_err());
    }

    #[test]
    fn single_line_membership() {
        let case = crate::netmodel::parse_case(
            r#"{"name": "one", "buses": [1, 2], "lines": [[1, 2]], "measurements": [{"type": "flow", "line": 0}]}"#,
        )
        .unwrap();
        let rep = membership_report(&case, "one", SolverChoice::Both, DEFAULT_CUT_CAP, DEFAULT_NODE_BUDGET);
        assert_eq!(rep.tuples, vec![vec![0]]);
        // one tuple from each solver
        assert_eq!(rep.counts[0].count, 2);
        assert_eq!(rep.counts[0].distinct_count, 1);
    }

    #[test]
    fn empty_timing_table() {
        assert!(timing_report(&[], SolverChoice::Both, 10, 10).unwrap().is_empty());
    }
}

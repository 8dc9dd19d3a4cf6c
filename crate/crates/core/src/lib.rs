//! Sparsest critical k-tuples of DC power-flow measurement systems.
//!
//! For a measurement `i`, find the smallest set of measurements containing
//! `i` whose loss makes the network unobservable. Two solvers are provided:
//! a Min-Cut approximation that enumerates every minimum cut of a weighted
//! bus graph ([`mincut`]), and an exact branch-and-bound over the equivalent
//! cardinality-minimization problem `min card(H theta) s.t. H(i,:) theta = 1`
//! ([`exact`]). [`harness`] drives both over measurement-removal scenarios.

pub mod cases;
pub mod exact;
pub mod flow;
pub mod harness;
pub mod jacobian;
pub mod linalg;
pub mod milp;
pub mod mincut;
pub mod netmodel;
pub mod observability;

pub use serde::Serialize;
pub use cases::{builtin, load_case, LoadError};
pub use exact::{
    solve_security_index, ExactError, ExactOptions, ExactSolver, SecurityIndexSolution, SolutionRecord, DEFAULT_NODE_BUDGET,
};
pub use harness::{
    base_case, draw_scenario, membership_report, removal_sweep, run_sweep, solve_all, timing_csv, timing_report,
    AnchorRecord, HarnessError, MembershipEntry, MembershipReport, Overestimation, RemovalKind, ScenarioConfig,
    SolverChoice, StatsReport, SweepPoint, SweepReport, TimingRow,
};
pub use jacobian::{build_h, null_space_basis, rank_exact, IntMatrix, RowIndexSet};
pub use milp::{big_m, big_m_guess, export_milp, protected_set_constraint, MilpError, MilpModel};
pub use mincut::{
    closed_sets, solve_mincut, CutSolution, MinCutEnumeration, MinCutError, MinCutOptions, MinCutResult, MinCutSolver,
};
pub use netmodel::{meter_weights, parse_case, Case, CaseError, Measurement, MeasurementSet, MeterWeights, Network};
pub use observability::{
    is_unobservable, oracle_sparsest, refine_to_critical, verify_critical, CriticalTuple, Provenance, RankEngine,
};

//! Min-cut approximation of sparsest critical tuples.
//!
//! Lines carry the modified weights `wtilde`; parallel lines are merged into
//! one capacity. Every minimum `s`-`t` cut is enumerated from the residual
//! graph, scored by the number of measurements it actually removes, and the
//! cheapest candidates are refined to a verified critical tuple.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::flow::{strongly_connected, FlowGraph};
use crate::jacobian::{IntMatrix, RowIndexSet};
use crate::netmodel::{Case, Measurement, MeterWeights};
use crate::observability::{refine_with, CriticalTuple, Provenance, RankEngine};

/// Default limit on enumerated minimum cuts per `s`-`t` pair.
pub const DEFAULT_CUT_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MinCutError {
    #[error("anchor row {anchor} out of range (m = {m})")]
    BadAnchor { anchor: usize, m: usize },
    #[error("bus {0} out of range")]
    BadBus(usize),
    #[error("source and sink are both bus {0}")]
    SameTerminal(usize),
    #[error("no enumerated cut yields a critical tuple containing row {0}")]
    NoCriticalTuple(usize),
}

/// One bus bipartition and the measurements it severs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CutSolution {
    pub s_side: Vec<usize>,
    pub cut_lines: Vec<usize>,
    pub removed_measurements: RowIndexSet,
    pub true_cost: usize,
    pub modified_cost: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinCutEnumeration {
    /// Minimum modified cut value.
    pub lambda: u64,
    pub cuts: Vec<CutSolution>,
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinCutOptions {
    pub cut_cap: usize,
}

impl Default for MinCutOptions {
    fn default() -> Self {
        MinCutOptions {
            cut_cap: DEFAULT_CUT_CAP,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MinCutResult {
    pub tuple: CriticalTuple,
    /// Smallest true cost among the enumerated minimum cuts, before refinement.
    pub estimate: usize,
    pub lambda: u64,
    /// The cut whose refinement produced `tuple`.
    pub cut: CutSolution,
    pub cuts_enumerated: usize,
    pub truncated: bool,
    /// Cuts tried before one refined to a tuple containing the anchor.
    pub fallbacks: usize,
}

/// Min-cut solver bound to one case and its Jacobian.
pub struct MinCutSolver<'a> {
    case: &'a Case,
    weights: MeterWeights,
    template: FlowGraph,
    flows_on_line: Vec<Vec<usize>>,
    injections_at: Vec<Vec<usize>>,
    engine: RankEngine<'a>,
}

impl<'a> MinCutSolver<'a> {
    pub fn new(case: &'a Case, h: &'a IntMatrix) -> Self {
        let net = &case.network;
        let weights = case.weights();
        let mut merged: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for (k, l) in net.lines().iter().enumerate() {
            *merged.entry((l.from.min(l.to), l.from.max(l.to))).or_insert(0) += weights.wtilde[k];
        }
        let mut template = FlowGraph::new(net.bus_count());
        for (&(u, v), &c) in &merged {
            if c > 0 {
                template.add_edge(u, v, c);
            }
        }
        let mut flows_on_line = vec![Vec::new(); net.lines().len()];
        let mut injections_at = vec![Vec::new(); net.bus_count()];
        for (r, m) in case.measurements.entries().iter().enumerate() {
            match *m {
                Measurement::Flow { line } => flows_on_line[line].push(r),
                Measurement::Injection { bus } => injections_at[bus].push(r),
            }
        }
        MinCutSolver {
            case,
            weights,
            template,
            flows_on_line,
            injections_at,
            engine: RankEngine::new(h),
        }
    }

    pub fn weights(&self) -> &MeterWeights {
        &self.weights
    }

    /// Scores the bipartition with `side[b] == true` on the source side.
    pub fn cut_from_side(&self, side: &[bool]) -> CutSolution {
        let net = &self.case.network;
        let mut removed = RowIndexSet::new();
        let mut cut_lines = Vec::new();
        let mut modified_cost = 0;
        for (k, l) in net.lines().iter().enumerate() {
            if side[l.from] != side[l.to] {
                cut_lines.push(k);
                modified_cost += self.weights.wtilde[k];
                for &r in self.flows_on_line[k].iter().chain(&self.injections_at[l.from]).chain(&self.injections_at[l.to]) {
                    removed.insert(r);
                }
            }
        }
        CutSolution {
            s_side: (0..side.len()).filter(|&b| side[b]).collect(),
            cut_lines,
            true_cost: removed.len(),
            removed_measurements: removed,
            modified_cost,
        }
    }

    fn check_terminals(&self, s: usize, t: usize) -> Result<(), MinCutError> {
        let n = self.case.network.bus_count();
        for b in [s, t] {
            if b >= n {
                return Err(MinCutError::BadBus(b));
            }
        }
        if s == t {
            return Err(MinCutError::SameTerminal(s));
        }
        Ok(())
    }

    /// One minimum cut: the source side is the residual reachability set.
    pub fn min_cut(&self, s: usize, t: usize) -> Result<(u64, CutSolution), MinCutError> {
        self.check_terminals(s, t)?;
        let mut g = self.template.clone();
        let lambda = g.max_flow(s, t);
        Ok((lambda, self.cut_from_side(&g.residual_reachable(s))))
    }

    /// All minimum `s`-`t` cuts, up to `cap`.
    pub fn enumerate(&self, s: usize, t: usize, cap: usize) -> Result<MinCutEnumeration, MinCutError> {
        self.check_terminals(s, t)?;
        let mut g = self.template.clone();
        let lambda = g.max_flow(s, t);
        let (sides, truncated) = closed_sets(&g.residual_adjacency(), s, t, cap);
        Ok(MinCutEnumeration {
            lambda,
            cuts: sides.iter().map(|side| self.cut_from_side(side)).collect(),
            truncated,
        })
    }

    /// Sparsest tuple estimate for `anchor`. A flow anchor cuts its own line;
    /// an injection anchor tries every neighbouring bus and keeps the best.
    pub fn solve(&self, anchor: usize, opts: &MinCutOptions) -> Result<MinCutResult, MinCutError> {
        let m = self.case.measurements.len();
        match self.case.measurements.get(anchor) {
            None => Err(MinCutError::BadAnchor { anchor, m }),
            Some(Measurement::Flow { line }) => {
                let l = self.case.network.line(line);
                self.refine_cuts(anchor, l.from, l.to, opts)
            }
            Some(Measurement::Injection { bus }) => {
                let mut best: Option<MinCutResult> = None;
                let mut estimate = usize::MAX;
                let mut enumerated = 0;
                let mut truncated = false;
                for nb in self.case.network.neighbors(bus) {
                    let res = self.refine_cuts(anchor, bus, nb, opts)?;
                    estimate = estimate.min(res.estimate);
                    enumerated += res.cuts_enumerated;
                    truncated |= res.truncated;
                    let better = best.as_ref().is_none_or(|b| {
                        (res.tuple.cardinality, &res.tuple.rows) < (b.tuple.cardinality, &b.tuple.rows)
                    });
                    if better {
                        best = Some(res);
                    }
                }
                let mut best = best.ok_or(MinCutError::NoCriticalTuple(anchor))?;
                best.estimate = estimate;
                best.cuts_enumerated = enumerated;
                best.truncated = truncated;
                Ok(best)
            }
        }
    }

    fn refine_cuts(&self, anchor: usize, s: usize, t: usize, opts: &MinCutOptions) -> Result<MinCutResult, MinCutError> {
        let MinCutEnumeration {
            lambda,
            mut cuts,
            truncated,
        } = self.enumerate(s, t, opts.cut_cap)?;
        cuts.sort_by(|a, b| {
            (a.true_cost, &a.removed_measurements).cmp(&(b.true_cost, &b.removed_measurements))
        });
        cuts.dedup_by(|a, b| a.removed_measurements == b.removed_measurements);
        let estimate = cuts.first().map_or(usize::MAX, |c| c.true_cost);
        let enumerated = cuts.len();
        for (i, cut) in cuts.into_iter().enumerate() {
            if let Ok(tuple) = refine_with(&self.engine, &cut.removed_measurements, anchor, Provenance::MinCut) {
                return Ok(MinCutResult {
                    tuple,
                    estimate,
                    lambda,
                    cut,
                    cuts_enumerated: enumerated,
                    truncated,
                    fallbacks: i,
                });
            }
        }
        Err(MinCutError::NoCriticalTuple(anchor))
    }
}

/// Convenience wrapper building the Jacobian on the fly.
pub fn solve_mincut(case: &Case, anchor: usize, opts: &MinCutOptions) -> Result<MinCutResult, MinCutError> {
    let h = case.jacobian();
    MinCutSolver::new(case, &h).solve(anchor, opts)
}

/// Every node set containing `s`, excluding `t`, with no residual arc leaving
/// it. After a maximum flow these are exactly the minimum cuts.
///
/// Works on the condensation: a set is closed iff it is a union of strongly
/// connected components closed under successors. Branching on the first
/// undecided component (take it with all descendants, or drop it with all
/// ancestors) never reaches a dead end.
pub fn closed_sets(adj: &[Vec<usize>], s: usize, t: usize, cap: usize) -> (Vec<Vec<bool>>, bool) {
    let (comp, k) = strongly_connected(adj);
    let mut succ = vec![Vec::new(); k];
    let mut pred = vec![Vec::new(); k];
    for (u, out) in adj.iter().enumerate() {
        for &v in out {
            let (cu, cv) = (comp[u], comp[v]);
            if cu != cv {
                succ[cu].push(cv);
                pred[cv].push(cu);
            }
        }
    }
    for l in succ.iter_mut().chain(pred.iter_mut()) {
        l.sort_unstable();
        l.dedup();
    }

    const FREE: u8 = 0;
    const IN: u8 = 1;
    const OUT: u8 = 2;
    fn spread(state: &mut [u8], start: usize, edges: &[Vec<usize>], mark: u8) {
        let mut stack = vec![start];
        state[start] = mark;
        while let Some(c) = stack.pop() {
            for &d in &edges[c] {
                if state[d] == FREE {
                    state[d] = mark;
                    stack.push(d);
                }
            }
        }
    }

    let mut root = vec![FREE; k];
    spread(&mut root, comp[s], &succ, IN);
    if root[comp[t]] == IN {
        // t reachable from s: no flow-saturating cut exists
        return (Vec::new(), false);
    }
    spread(&mut root, comp[t], &pred, OUT);

    let mut found = Vec::new();
    let mut stack = vec![(root, 0usize)];
    while let Some((state, from)) = stack.pop() {
        match (from..k).find(|&c| state[c] == FREE) {
            None => {
                if found.len() == cap {
                    return (found, true);
                }
                found.push(comp.iter().map(|&c| state[c] == IN).collect());
            }
            Some(c) => {
                let mut drop = state.clone();
                spread(&mut drop, c, &pred, OUT);
                stack.push((drop, c + 1));
                let mut take = state;
                spread(&mut take, c, &succ, IN);
                stack.push((take, c + 1));
            }
        }
    }
    (found, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{MeasurementSet, Network};

    fn case(n: usize, lines: Vec<(usize, usize)>, ms: Vec<Measurement>) -> Case {
        let net = Network::new("t", n, lines).unwrap();
        let ms = MeasurementSet::new(&net, ms).unwrap();
        Case::new(net, ms)
    }

    #[test]
    fn four_cycle_min_cuts() {
        use Measurement::Flow;
        let c = case(
            4,
            vec![(0, 1), (1, 2), (2, 3), (3, 0)],
            (0..4).map(|line| Flow { line }).collect(),
        );
        let h = c.jacobian();
        let solver = MinCutSolver::new(&c, &h);
        let e = solver.enumerate(0, 2, 100).unwrap();
        assert_eq!(e.lambda, 2);
        assert_eq!(e.cuts.len(), 4);
        let e = solver.enumerate(0, 1, 100).unwrap();
        assert_eq!(e.lambda, 2);
        // {0}, {0,3}, {0,3,2}: cut {0-1} plus one of the other three lines
        assert_eq!(e.cuts.len(), 3);
        assert!(e.cuts.iter().all(|c| c.true_cost == 2 && c.s_side.contains(&0)));
    }

    #[test]
    fn cap_reports_truncation() {
        use Measurement::Flow;
        let c = case(
            4,
            vec![(0, 1), (1, 2), (2, 3), (3, 0)],
            (0..4).map(|line| Flow { line }).collect(),
        );
        let h = c.jacobian();
        let e = MinCutSolver::new(&c, &h).enumerate(0, 2, 3).unwrap();
        assert!(e.truncated);
        assert_eq!(e.cuts.len(), 3);
    }

    #[test]
    fn parallel_lines_are_merged() {
        use Measurement::*;
        let c = case(
            3,
            vec![(0, 1), (0, 1), (1, 2)],
            vec![Flow { line: 0 }, Flow { line: 1 }, Flow { line: 2 }, Injection { bus: 2 }],
        );
        let h = c.jacobian();
        let solver = MinCutSolver::new(&c, &h);
        let (lambda, cut) = solver.min_cut(0, 1).unwrap();
        assert_eq!(lambda, 2);
        assert_eq!(cut.cut_lines, vec![0, 1]);
        let r = solver.solve(0, &MinCutOptions::default()).unwrap();
        assert_eq!(r.tuple.rows, vec![0, 1]);
    }

    #[test]
    fn bad_inputs() {
        let c = case(2, vec![(0, 1)], vec![Measurement::Flow { line: 0 }]);
        let h = c.jacobian();
        let solver = MinCutSolver::new(&c, &h);
        assert_eq!(solver.min_cut(0, 0).unwrap_err(), MinCutError::SameTerminal(0));
        assert_eq!(solver.min_cut(0, 5).unwrap_err(), MinCutError::BadBus(5));
        assert_eq!(
            solver.solve(3, &MinCutOptions::default()).unwrap_err(),
            MinCutError::BadAnchor { anchor: 3, m: 1 }
        );
    }
}

//! Exact sparsest critical tuple: `min card(H theta)` subject to
//! `H(anchor,:) theta = 1`.
//!
//! An optimal support is a cocircuit of the row matroid of `H` that contains
//! the anchor. Rows that are scalar multiples of each other are merged into
//! weighted classes (they vanish together). The search grows the support `T`
//! from `{anchor}`: while the rows outside `T` still span the anchor there is
//! a circuit through the anchor in them, and every cocircuit extending `T`
//! must contain another element of that circuit. Branching on those elements
//! (earlier siblings become forbidden in later ones) visits every candidate
//! exactly once. A greedy fractional packing of such circuits bounds the
//! remaining weight from below. All linear algebra is exact.

use std::collections::{HashMap, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::jacobian::{IntMatrix, RowIndexSet};
use crate::linalg::{with_fallback, Exact, ExactInt};
use crate::observability::{refine_to_critical, CriticalTuple, Provenance, RankEngine, RefineError};

pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactOptions {
    /// Cardinality of a known feasible support, e.g. from the Min-Cut solver.
    pub incumbent_hint: Option<usize>,
    pub node_budget: u64,
    /// Row priority (a permutation of `0..m`). `None` ranks rows by distance
    /// from the anchor's buses. Affects speed only.
    pub order: Option<Vec<usize>>,
    /// Rows that must stay zero (immune measurements).
    pub protected: RowIndexSet,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            incumbent_hint: None,
            node_budget: DEFAULT_NODE_BUDGET,
            order: None,
            protected: RowIndexSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExactError {
    #[error("anchor row {anchor} out of range (m = {m})")]
    BadAnchor { anchor: usize, m: usize },
    #[error("anchor row {0} is zero; no theta satisfies H(anchor,:) theta = 1")]
    ZeroAnchor(usize),
    #[error("anchor row {0} is protected")]
    ProtectedAnchor(usize),
    #[error("anchor row {0} lies in the span of the protected rows")]
    Infeasible(usize),
    #[error("row order must be a permutation of 0..{0}")]
    BadOrder(usize),
    #[error("node budget exhausted after {nodes} nodes without a feasible support")]
    BudgetExhausted { nodes: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecurityIndexSolution {
    pub anchor: usize,
    pub theta: Vec<BigRational>,
    pub support: RowIndexSet,
    pub cardinality: usize,
    pub proved_optimal: bool,
    pub nodes: u64,
}

/// JSON form of a solution; rationals are written as `p/q` strings.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionRecord {
    pub anchor: usize,
    pub cardinality: usize,
    pub support: Vec<usize>,
    pub theta: Vec<String>,
    pub proved_optimal: bool,
}

impl SecurityIndexSolution {
    pub fn record(&self) -> SolutionRecord {
        SolutionRecord {
            anchor: self.anchor,
            cardinality: self.cardinality,
            support: self.support.as_slice().to_vec(),
            theta: self.theta.iter().map(ToString::to_string).collect(),
            proved_optimal: self.proved_optimal,
        }
    }

    /// The support as a verified critical tuple (unchanged when the base
    /// system is observable).
    pub fn critical_tuple(&self, h: &IntMatrix) -> Result<CriticalTuple, RefineError> {
        refine_to_critical(h, &self.support, self.anchor, Provenance::Exact)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Free,
    Chosen,
    Forbidden,
}

/// Exact solver bound to one Jacobian; reusable across anchors.
pub struct ExactSolver<'a> {
    h: &'a IntMatrix,
    engine: RankEngine<'a>,
    class_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    rep: Vec<Vec<i64>>,
    cols: Vec<Vec<usize>>,
    col_adj: Vec<Vec<usize>>,
}

fn primitive(row: &[i64]) -> Vec<i64> {
    let mut g = 0i64;
    for &v in row {
        g = num_integer::gcd(g, v);
    }
    if g == 0 {
        return row.to_vec();
    }
    let sign = if row.iter().find(|&&v| v != 0).is_some_and(|&v| v < 0) { -1 } else { 1 };
    row.iter().map(|&v| sign * v / g).collect()
}

impl<'a> ExactSolver<'a> {
    pub fn new(h: &'a IntMatrix) -> Self {
        let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
        let mut class_of = Vec::with_capacity(h.rows());
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut rep = Vec::new();
        for r in 0..h.rows() {
            let key = primitive(h.row(r));
            let c = *index.entry(key.clone()).or_insert_with(|| {
                members.push(Vec::new());
                rep.push(key);
                members.len() - 1
            });
            members[c].push(r);
            class_of.push(c);
        }
        let cols: Vec<Vec<usize>> = rep
            .iter()
            .map(|row| (0..row.len()).filter(|&j| row[j] != 0).collect())
            .collect();
        let mut col_adj = vec![Vec::new(); h.cols()];
        for support in &cols {
            for &i in support {
                for &j in support {
                    if i != j {
                        col_adj[i].push(j);
                    }
                }
            }
        }
        for l in &mut col_adj {
            l.sort_unstable();
            l.dedup();
        }
        ExactSolver {
            h,
            engine: RankEngine::new(h),
            class_of,
            members,
            rep,
            cols,
            col_adj,
        }
    }

    pub fn solve(&self, anchor: usize, opts: &ExactOptions) -> Result<SecurityIndexSolution, ExactError> {
        let m = self.h.rows();
        if anchor >= m {
            return Err(ExactError::BadAnchor { anchor, m });
        }
        if self.h.row(anchor).iter().all(|&v| v == 0) {
            return Err(ExactError::ZeroAnchor(anchor));
        }
        if opts.protected.contains(anchor) {
            return Err(ExactError::ProtectedAnchor(anchor));
        }
        if let Some(order) = &opts.order {
            let mut seen = vec![false; m];
            if order.len() != m || order.iter().any(|&r| r >= m || std::mem::replace(&mut seen[r], true)) {
                return Err(ExactError::BadOrder(m));
            }
        }
        let ac = self.class_of[anchor];
        let k = self.members.len();
        let mut status = vec![Status::Free; k];
        for r in &opts.protected {
            if r < m {
                status[self.class_of[r]] = Status::Forbidden;
            }
        }
        if status[ac] == Status::Forbidden {
            return Err(ExactError::Infeasible(anchor));
        }
        status[ac] = Status::Chosen;
        let forbidden_span = |st: &[Status]| self.engine.spans(&|r| st[self.class_of[r]] == Status::Forbidden, &self.rep[ac]);
        if forbidden_span(&status) {
            return Err(ExactError::Infeasible(anchor));
        }

        let mut search = Search {
            solver: self,
            anchor_class: ac,
            ordered: self.priority(ac, opts.order.as_deref()),
            status,
            chosen_weight: self.members[ac].len(),
            best: None,
            hint: opts.incumbent_hint,
            nodes: 0,
            budget: opts.node_budget,
            aborted: false,
        };
        search.node();
        if search.best.is_none() && !search.aborted && search.hint.is_some() {
            // hint below the optimum: nothing was accepted, search again unbounded
            search.hint = None;
            search.node();
        }
        let nodes = search.nodes;
        let aborted = search.aborted;
        let Some((_, classes)) = search.best else {
            return Err(ExactError::BudgetExhausted { nodes });
        };
        let support: RowIndexSet = classes.iter().flat_map(|&c| self.members[c].iter().copied()).collect();
        let theta = self.theta_for(&support, anchor);
        Ok(SecurityIndexSolution {
            anchor,
            cardinality: support.len(),
            support,
            theta,
            proved_optimal: !aborted,
            nodes,
        })
    }

    /// Classes sorted by priority: given order, or distance from the anchor.
    fn priority(&self, ac: usize, order: Option<&[usize]>) -> Vec<usize> {
        let k = self.members.len();
        let key: Vec<(usize, usize)> = match order {
            Some(order) => {
                let mut pos = vec![usize::MAX; k];
                for (i, &r) in order.iter().enumerate() {
                    let c = self.class_of[r];
                    pos[c] = pos[c].min(i);
                }
                pos.into_iter().map(|p| (p, 0)).collect()
            }
            None => {
                let mut dist = vec![usize::MAX; self.h.cols()];
                let mut queue = VecDeque::new();
                for &c in &self.cols[ac] {
                    dist[c] = 0;
                    queue.push_back(c);
                }
                while let Some(u) = queue.pop_front() {
                    for &v in &self.col_adj[u] {
                        if dist[v] == usize::MAX {
                            dist[v] = dist[u] + 1;
                            queue.push_back(v);
                        }
                    }
                }
                (0..k)
                    .map(|c| {
                        let d = self.cols[c].iter().map(|&j| dist[j]).max().unwrap_or(0);
                        (d, self.members[c][0])
                    })
                    .collect()
            }
        };
        let mut ordered: Vec<usize> = (0..k).filter(|&c| c != ac).collect();
        ordered.sort_by_key(|&c| key[c]);
        ordered
    }

    /// A rational vector vanishing outside `support`, with anchor value 1 and
    /// every support row nonzero.
    fn theta_for(&self, support: &RowIndexSet, anchor: usize) -> Vec<BigRational> {
        let basis = self.engine.null_space(&|r| !support.contains(r));
        let eval = |theta: &[BigInt], r: usize| -> BigInt {
            self.h
                .row(r)
                .iter()
                .zip(theta)
                .filter(|(a, _)| **a != 0)
                .map(|(a, v)| v * BigInt::from(*a))
                .sum()
        };
        // points on a moment curve avoid the finitely many degenerate combinations
        for t in 1i64.. {
            let t = BigInt::from(t);
            let mut coef = BigInt::one();
            let mut theta = vec![<BigInt as Zero>::zero(); self.h.cols()];
            for v in &basis {
                for (x, y) in theta.iter_mut().zip(v) {
                    *x += &coef * y;
                }
                coef *= &t;
            }
            let a = eval(&theta, anchor);
            if Zero::is_zero(&a) || support.iter().any(|r| Zero::is_zero(&eval(&theta, r))) {
                continue;
            }
            return theta.into_iter().map(|x| BigRational::new(x, a.clone())).collect();
        }
        unreachable!("finitely many parameters are degenerate")
    }
}

struct Search<'s, 'a> {
    solver: &'s ExactSolver<'a>,
    anchor_class: usize,
    ordered: Vec<usize>,
    status: Vec<Status>,
    chosen_weight: usize,
    best: Option<(usize, Vec<usize>)>,
    hint: Option<usize>,
    nodes: u64,
    budget: u64,
    aborted: bool,
}

impl Search<'_, '_> {
    /// Supports of weight `>= limit` cannot improve on what is known.
    fn limit(&self) -> usize {
        match (&self.best, self.hint) {
            (Some((w, _)), _) => *w,
            (None, Some(h)) => h + 1,
            (None, None) => usize::MAX,
        }
    }

    fn weight(&self, c: usize) -> usize {
        self.solver.members[c].len()
    }

    fn node(&mut self) {
        if self.aborted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            self.aborted = true;
            return;
        }
        let s = self.solver;
        let ac = self.anchor_class;
        let status = &self.status;
        if !s.engine.spans(&|r| status[s.class_of[r]] != Status::Chosen, &s.rep[ac]) {
            self.close_leaf();
            return;
        }
        let limit = self.limit();
        if self.chosen_weight + 1 >= limit {
            return;
        }
        let Some(first) = self.circuit(&|_| true) else {
            return;
        };
        if first.is_empty() {
            return;
        }
        let Some(branch) = self.packing(first, limit) else {
            return;
        };
        let mut touched = Vec::new();
        for &c in &branch {
            self.status[c] = Status::Chosen;
            self.chosen_weight += self.weight(c);
            self.node();
            self.chosen_weight -= self.weight(c);
            self.status[c] = Status::Forbidden;
            touched.push(c);
            if self.aborted || self.chosen_weight + 1 >= self.limit() {
                break;
            }
        }
        for c in touched {
            self.status[c] = Status::Free;
        }
    }

    /// The rows outside the chosen set no longer span the anchor: the chosen
    /// classes not in their span form a cocircuit.
    fn close_leaf(&mut self) {
        let s = self.solver;
        let status = &self.status;
        let keep = |r: usize| status[s.class_of[r]] != Status::Chosen;
        let cocircuit: Vec<usize> = (0..status.len())
            .filter(|&c| status[c] == Status::Chosen && (c == self.anchor_class || !s.engine.spans(&keep, &s.rep[c])))
            .collect();
        let w: usize = cocircuit.iter().map(|&c| self.weight(c)).sum();
        if w < self.limit() {
            self.best = Some((w, cocircuit));
        }
    }

    /// Greedy packing of circuits through the anchor. Every completion must
    /// hit each circuit, so the packed weight bounds the cost from below.
    /// Returns `None` when the bound reaches `limit`, otherwise the first
    /// circuit (to branch on).
    fn packing(&self, first: Vec<usize>, limit: usize) -> Option<Vec<usize>> {
        let s = self.solver;
        let mut residual: Vec<usize> = s.members.iter().map(Vec::len).collect();
        let mut bound = self.chosen_weight;
        let mut circuit = first;
        let mut branch: Option<Vec<usize>> = None;
        loop {
            let y = circuit.iter().map(|&c| residual[c]).min().unwrap_or(0);
            bound += y;
            if bound >= limit {
                return None;
            }
            for &c in &circuit {
                residual[c] -= y;
            }
            if branch.is_none() {
                branch = Some(circuit);
            }
            let status = &self.status;
            let spanned = s.engine.spans(
                &|r| {
                    let c = s.class_of[r];
                    status[c] == Status::Forbidden || (status[c] == Status::Free && residual[c] > 0)
                },
                &s.rep[self.anchor_class],
            );
            if !spanned {
                return branch;
            }
            match self.circuit(&|c| residual[c] > 0) {
                Some(next) if !next.is_empty() => circuit = next,
                _ => return branch,
            }
        }
    }

    /// Free classes of a circuit through the anchor that uses only forbidden
    /// classes and free classes accepted by `usable`.
    fn circuit(&self, usable: &dyn Fn(usize) -> bool) -> Option<Vec<usize>> {
        with_fallback(|| self.circuit_with::<i64>(usable), || self.circuit_with::<BigInt>(usable))
    }

    fn circuit_with<T: ExactInt>(&self, usable: &dyn Fn(usize) -> bool) -> Exact<Option<Vec<usize>>> {
        let s = self.solver;
        let width = s.h.cols();
        let mut basis = TaggedBasis::<T>::new(width);
        let sparse = |c: usize, tag: usize| -> Sparse<T> {
            let row = &s.rep[c];
            let mut v: Sparse<T> = s.cols[c].iter().map(|&j| (j, T::from_i64(row[j]))).collect();
            v.push((tag, T::from_i64(1)));
            v
        };
        let mut owner = vec![self.anchor_class];
        let mut target = sparse(self.anchor_class, basis.tag(0));
        let forbidden = self.ordered.iter().filter(|&&c| self.status[c] == Status::Forbidden);
        let free = self.ordered.iter().filter(|&&c| self.status[c] == Status::Free && usable(c));
        for &c in forbidden.chain(free) {
            let tag = basis.tag(owner.len());
            owner.push(c);
            if basis.push(sparse(c, tag))? {
                basis.reduce_last(&mut target)?;
                if target.first().is_some_and(|(i, _)| *i >= width) {
                    let circuit = target
                        .iter()
                        .map(|(i, _)| owner[i - width])
                        .skip(1)
                        .filter(|&c| self.status[c] == Status::Free)
                        .collect();
                    return Ok(Some(circuit));
                }
            }
        }
        Ok(None)
    }
}

type Sparse<T> = Vec<(usize, T)>;

/// Sparse echelon basis. Coordinates `0..width` hold the vector itself,
/// coordinates from `width` on record its combination of the pushed
/// vectors, so a dependency can be read off directly.
struct TaggedBasis<T> {
    width: usize,
    rows: Vec<Sparse<T>>,
}

fn entry<T: ExactInt>(x: &Sparse<T>, i: usize) -> Option<&T> {
    x.binary_search_by_key(&i, |(j, _)| *j).ok().map(|k| &x[k].1)
}

impl<T: ExactInt> TaggedBasis<T> {
    fn new(width: usize) -> Self {
        TaggedBasis { width, rows: Vec::new() }
    }

    fn tag(&self, k: usize) -> usize {
        self.width + k
    }

    /// `x <- a x - c row` with `a, c` chosen to cancel the pivot of `row`.
    fn eliminate(row: &Sparse<T>, x: &mut Sparse<T>) -> Exact<()> {
        let (p, pv) = &row[0];
        let Some(xv) = entry(x, *p) else {
            return Ok(());
        };
        let g = xv.gcd(pv);
        let a = pv.div_exact(&g);
        let c = xv.div_exact(&g);
        let mut out = Vec::with_capacity(x.len() + row.len());
        let (mut i, mut j) = (0, 0);
        while i < x.len() || j < row.len() {
            let (k, v) = match (x.get(i), row.get(j)) {
                (Some((xi, xv)), Some((rj, rv))) if xi == rj => {
                    i += 1;
                    j += 1;
                    (*xi, xv.mul(&a)?.sub(&c.mul(rv)?)?)
                }
                (Some((xi, xv)), Some((rj, _))) if xi < rj => {
                    i += 1;
                    (*xi, xv.mul(&a)?)
                }
                (Some((xi, xv)), None) => {
                    i += 1;
                    (*xi, xv.mul(&a)?)
                }
                (_, Some((rj, rv))) => {
                    j += 1;
                    (*rj, c.mul(rv)?.neg()?)
                }
                (None, None) => unreachable!(),
            };
            if !v.is_zero() {
                out.push((k, v));
            }
        }
        let mut g = T::zero();
        for (_, v) in &out {
            g = g.gcd(v);
            if g.is_one() {
                break;
            }
        }
        if !g.is_zero() && !g.is_one() {
            for (_, v) in out.iter_mut() {
                *v = v.div_exact(&g);
            }
        }
        *x = out;
        Ok(())
    }

    /// Adds `x` if independent of the basis; returns whether it was added.
    fn push(&mut self, mut x: Sparse<T>) -> Exact<bool> {
        for row in &self.rows {
            Self::eliminate(row, &mut x)?;
        }
        if x.first().is_some_and(|(i, _)| *i < self.width) {
            self.rows.push(x);
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// Eliminates the newest pivot from `x`. Keeping `x` reduced after every
    /// push keeps it reduced against the whole basis.
    fn reduce_last(&self, x: &mut Sparse<T>) -> Exact<()> {
        match self.rows.last() {
            Some(row) => Self::eliminate(row, x),
            None => Ok(()),
        }
    }
}

/// One-shot convenience wrapper.
pub fn solve_security_index(
    h: &IntMatrix,
    anchor: usize,
    opts: &ExactOptions,
) -> Result<SecurityIndexSolution, ExactError> {
    ExactSolver::new(h).solve(anchor, opts)
}

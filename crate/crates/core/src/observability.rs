//! Observability tests, criticality verification, minimality refinement and
//! the brute-force sparsest-tuple oracle.
//!
//! The fast rank path ([`RankEngine`]) splits the rows of `H` into *pair rows*
//! (two nonzeros `c, -c`, i.e. a scaled incidence row) and general rows. Pair
//! rows contract buses; the rank of a row set is then the number of
//! contractions plus the rank of the general rows summed within each
//! contracted component. That quotient is usually tiny, which makes repeated
//! observability checks cheap. [`oracle_sparsest`] deliberately uses the plain
//! Bareiss route ([`rank_exact`]) instead.

use num_bigint::BigInt;
use serde::Serialize;
use thiserror::Error;

use crate::jacobian::{rank_exact, IntMatrix, RowIndexSet, DEFAULT_REFERENCE};
use crate::linalg::{with_fallback, Echelon, Exact, ExactInt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    MinCut,
    Exact,
    Oracle,
}

/// A verified critical tuple containing a specified anchor measurement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CriticalTuple {
    pub rows: Vec<usize>,
    pub cardinality: usize,
    pub anchor: usize,
    pub provenance: Provenance,
}

impl CriticalTuple {
    pub fn row_set(&self) -> RowIndexSet {
        self.rows.iter().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Rejection {
    #[error("anchor row {0} is not part of the candidate")]
    AnchorMissing(usize),
    #[error("removing the candidate leaves the network observable")]
    NotUnobservable,
    #[error("not minimal: the candidate without row {witness} is still unobservable")]
    NotMinimal { witness: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RefineError {
    #[error(transparent)]
    Precondition(#[from] Rejection),
    #[error("every minimal unobservable subset of the candidate excludes anchor row {0}")]
    AnchorExcluded(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("brute-force oracle limited to {limit} measurements, got {m}")]
    TooLarge { m: usize, limit: usize },
    #[error("no critical tuple contains anchor row {0}")]
    NoCriticalTuple(usize),
    #[error("anchor row {anchor} out of range (m = {m})")]
    BadAnchor { anchor: usize, m: usize },
}

/// Subsets larger than this are refined greedily.
pub const EXHAUSTIVE_CAP: usize = 12;
pub const ORACLE_LIMIT: usize = 25;

#[derive(Debug, Clone)]
enum RowKind {
    Zero,
    Pair(usize, usize),
    General(Vec<(usize, i64)>),
}

/// Structural rank evaluator for row subsets of a fixed `H`.
#[derive(Debug, Clone)]
pub struct RankEngine<'a> {
    h: &'a IntMatrix,
    kinds: Vec<RowKind>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Contracted view of a base row set: component map, echelon of projected
/// general rows.
struct Quotient<T> {
    pair_rank: usize,
    comp: Vec<usize>,
    echelon: Echelon<T>,
}

impl<'a> RankEngine<'a> {
    pub fn new(h: &'a IntMatrix) -> Self {
        let kinds = (0..h.rows())
            .map(|r| {
                let nz: Vec<(usize, i64)> = h
                    .row(r)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0)
                    .map(|(c, v)| (c, *v))
                    .collect();
                match nz.as_slice() {
                    [] => RowKind::Zero,
                    [(i, a), (j, b)] if *a == -*b => RowKind::Pair(*i, *j),
                    _ => RowKind::General(nz),
                }
            })
            .collect();
        RankEngine { h, kinds }
    }

    pub fn matrix(&self) -> &IntMatrix {
        self.h
    }

    /// `(i, j)` when row `r` is a scaled incidence row.
    pub fn pair(&self, r: usize) -> Option<(usize, usize)> {
        match self.kinds[r] {
            RowKind::Pair(i, j) => Some((i, j)),
            _ => None,
        }
    }

    fn quotient<T: ExactInt>(&self, rows: impl Iterator<Item = usize> + Clone) -> Exact<Quotient<T>> {
        let n = self.h.cols();
        let mut uf = UnionFind::new(n);
        let mut pair_rank = 0;
        for r in rows.clone() {
            if let RowKind::Pair(i, j) = self.kinds[r] {
                if uf.union(i, j) {
                    pair_rank += 1;
                }
            }
        }
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for b in 0..n {
            let root = uf.find(b);
            if comp[root] == usize::MAX {
                comp[root] = next;
                next += 1;
            }
            comp[b] = comp[root];
        }
        let mut echelon = Echelon::new(next);
        for r in rows {
            if let RowKind::General(nz) = &self.kinds[r] {
                echelon.push(project(nz, &comp, next))?;
            }
        }
        Ok(Quotient {
            pair_rank,
            comp,
            echelon,
        })
    }

    /// Rank of the rows selected by `keep`.
    pub fn rank_of(&self, keep: &dyn Fn(usize) -> bool) -> usize {
        let rows = (0..self.h.rows()).filter(|&r| keep(r));
        with_fallback(
            || self.quotient::<i64>(rows.clone()).map(|q| q.pair_rank + q.echelon.rank()),
            || self.quotient::<BigInt>(rows.clone()).map(|q| q.pair_rank + q.echelon.rank()),
        )
    }

    pub fn rank_without(&self, removed: &RowIndexSet) -> usize {
        self.rank_of(&|r| !removed.contains(r))
    }

    /// Integer basis of `{x : H(r,:) x = 0 for every row r selected by keep}`.
    /// Contracted components share one coordinate, so only the small
    /// projected system is eliminated.
    pub fn null_space(&self, keep: &dyn Fn(usize) -> bool) -> Vec<Vec<BigInt>> {
        let rows = (0..self.h.rows()).filter(|&r| keep(r));
        fn run<T: ExactInt>(
            engine: &RankEngine<'_>,
            rows: impl Iterator<Item = usize> + Clone,
        ) -> Exact<Vec<Vec<BigInt>>> {
            let q = engine.quotient::<T>(rows)?;
            Ok(q.echelon
                .null_space()?
                .iter()
                .map(|y| q.comp.iter().map(|&c| y[c].to_bigint()).collect())
                .collect())
        }
        with_fallback(|| run::<i128>(self, rows.clone()), || run::<BigInt>(self, rows.clone()))
    }

    /// Whether `target` lies in the span of the rows selected by `keep`.
    /// Pair rows span exactly the vectors summing to zero on every
    /// contracted component, so only the projection has to be tested.
    pub fn spans(&self, keep: &dyn Fn(usize) -> bool, target: &[i64]) -> bool {
        let nz: Vec<(usize, i64)> = target.iter().enumerate().filter(|(_, v)| **v != 0).map(|(c, v)| (c, *v)).collect();
        let rows = (0..self.h.rows()).filter(|&r| keep(r));
        fn run<T: ExactInt>(
            engine: &RankEngine<'_>,
            rows: impl Iterator<Item = usize> + Clone,
            nz: &[(usize, i64)],
        ) -> Exact<bool> {
            let q = engine.quotient::<T>(rows)?;
            let width = q.echelon.width();
            q.echelon.contains(&project(nz, &q.comp, width))
        }
        with_fallback(|| run::<i64>(self, rows.clone(), &nz), || run::<BigInt>(self, rows.clone(), &nz))
    }

    pub fn is_unobservable(&self, removed: &RowIndexSet) -> bool {
        self.rank_without(removed) + 1 < self.h.cols()
    }

    /// Precomputes everything outside `candidate` so that subsets of the
    /// candidate can be tested cheaply.
    pub fn restrict(&self, candidate: &RowIndexSet) -> Restricted {
        with_fallback(
            || self.restrict_with::<i128>(candidate).map(Restricted::Small),
            || self.restrict_with::<BigInt>(candidate).map(Restricted::Big),
        )
    }

    fn restrict_with<T: ExactInt>(&self, candidate: &RowIndexSet) -> Exact<RestrictedWith<T>> {
        let base = (0..self.h.rows()).filter(|r| !candidate.contains(*r));
        let q = self.quotient::<T>(base)?;
        let width = q.echelon.width();
        let mut residuals = Vec::with_capacity(candidate.len());
        for r in candidate {
            let mut x = match &self.kinds[r] {
                RowKind::Zero => vec![T::zero(); width],
                RowKind::Pair(i, j) => project(&[(*i, 1), (*j, -1)], &q.comp, width),
                RowKind::General(nz) => project(nz, &q.comp, width),
            };
            q.echelon.reduce(&mut x)?;
            residuals.push((r, x));
        }
        Ok(RestrictedWith {
            base_rank: q.pair_rank + q.echelon.rank(),
            cols: self.h.cols(),
            residuals,
        })
    }
}

fn project<T: ExactInt>(nz: &[(usize, i64)], comp: &[usize], width: usize) -> Vec<T> {
    let mut acc = vec![0i64; width];
    for &(c, v) in nz {
        acc[comp[c]] += v;
    }
    acc.into_iter().map(T::from_i64).collect()
}

#[derive(Debug, Clone)]
pub struct RestrictedWith<T> {
    base_rank: usize,
    cols: usize,
    residuals: Vec<(usize, Vec<T>)>,
}

impl<T: ExactInt> RestrictedWith<T> {
    fn rank_without(&self, removed: &dyn Fn(usize) -> bool) -> Exact<usize> {
        let width = self.residuals.first().map_or(0, |(_, x)| x.len());
        let mut e = Echelon::new(width);
        for (r, x) in &self.residuals {
            if !removed(*r) {
                e.push(x.clone())?;
            }
        }
        Ok(self.base_rank + e.rank())
    }
}

/// Candidate-restricted rank evaluator produced by [`RankEngine::restrict`].
#[derive(Debug, Clone)]
pub enum Restricted {
    Small(RestrictedWith<i128>),
    Big(RestrictedWith<BigInt>),
}

impl Restricted {
    /// Rank of `H` with `removed` (a subset of the candidate) taken out.
    pub fn rank_without(&self, removed: &RowIndexSet) -> usize {
        let f = |r: usize| removed.contains(r);
        match self {
            Restricted::Small(s) => match s.rank_without(&f) {
                Ok(v) => v,
                Err(_) => {
                    let big = RestrictedWith {
                        base_rank: s.base_rank,
                        cols: s.cols,
                        residuals: s
                            .residuals
                            .iter()
                            .map(|(r, x)| (*r, x.iter().map(ExactInt::to_bigint).collect()))
                            .collect(),
                    };
                    big.rank_without(&f).expect("BigInt cannot overflow")
                }
            },
            Restricted::Big(b) => b.rank_without(&f).expect("BigInt cannot overflow"),
        }
    }

    pub fn is_unobservable(&self, removed: &RowIndexSet) -> bool {
        let cols = match self {
            Restricted::Small(s) => s.cols,
            Restricted::Big(b) => b.cols,
        };
        self.rank_without(removed) + 1 < cols
    }
}

/// True iff removing `removed` drops `rank(H(rows, cols != ref))` below `n - 1`.
pub fn is_unobservable(h: &IntMatrix, removed: &RowIndexSet) -> bool {
    RankEngine::new(h).is_unobservable(removed)
}

fn check_candidate(restricted: &Restricted, candidate: &RowIndexSet, anchor: usize) -> Result<(), Rejection> {
    if !candidate.contains(anchor) {
        return Err(Rejection::AnchorMissing(anchor));
    }
    if !restricted.is_unobservable(candidate) {
        return Err(Rejection::NotUnobservable);
    }
    Ok(())
}

fn first_redundant(restricted: &Restricted, set: &RowIndexSet) -> Option<usize> {
    set.iter().find(|&r| restricted.is_unobservable(&set.without(r)))
}

/// Accepts `candidate` iff restoring any single row restores observability.
pub fn verify_critical(
    h: &IntMatrix,
    candidate: &RowIndexSet,
    anchor: usize,
    provenance: Provenance,
) -> Result<CriticalTuple, Rejection> {
    let restricted = RankEngine::new(h).restrict(candidate);
    verify_restricted(&restricted, candidate, anchor, provenance)
}

fn verify_restricted(
    restricted: &Restricted,
    candidate: &RowIndexSet,
    anchor: usize,
    provenance: Provenance,
) -> Result<CriticalTuple, Rejection> {
    check_candidate(restricted, candidate, anchor)?;
    if let Some(witness) = first_redundant(restricted, candidate) {
        return Err(Rejection::NotMinimal { witness });
    }
    Ok(CriticalTuple {
        rows: candidate.as_slice().to_vec(),
        cardinality: candidate.len(),
        anchor,
        provenance,
    })
}

/// Shrinks an unobservable candidate to a critical tuple that keeps `anchor`.
///
/// Up to [`EXHAUSTIVE_CAP`] rows every subset is examined and the
/// lexicographically smallest minimum-cardinality critical subset wins;
/// larger candidates drop rows greedily in descending row order while the
/// anchor stays outside the span of the restored rows.
pub fn refine_to_critical(
    h: &IntMatrix,
    candidate: &RowIndexSet,
    anchor: usize,
    provenance: Provenance,
) -> Result<CriticalTuple, RefineError> {
    let engine = RankEngine::new(h);
    refine_with(&engine, candidate, anchor, provenance)
}

pub(crate) fn refine_with(
    engine: &RankEngine<'_>,
    candidate: &RowIndexSet,
    anchor: usize,
    provenance: Provenance,
) -> Result<CriticalTuple, RefineError> {
    let restricted = engine.restrict(candidate);
    check_candidate(&restricted, candidate, anchor)?;
    if first_redundant(&restricted, candidate).is_none() {
        return Ok(CriticalTuple {
            rows: candidate.as_slice().to_vec(),
            cardinality: candidate.len(),
            anchor,
            provenance,
        });
    }
    let others: Vec<usize> = candidate.iter().filter(|&r| r != anchor).collect();
    if candidate.len() <= EXHAUSTIVE_CAP {
        for size in 0..others.len() {
            let mut best: Option<RowIndexSet> = None;
            for combo in Combinations::new(others.len(), size) {
                let mut set: RowIndexSet = combo.iter().map(|&i| others[i]).collect();
                set.insert(anchor);
                if best.as_ref().is_some_and(|b| *b <= set) {
                    continue;
                }
                if restricted.is_unobservable(&set) && first_redundant(&restricted, &set).is_none() {
                    best = Some(set);
                }
            }
            if let Some(set) = best {
                return Ok(CriticalTuple {
                    cardinality: set.len(),
                    rows: set.as_slice().to_vec(),
                    anchor,
                    provenance,
                });
            }
        }
        return Err(RefineError::AnchorExcluded(anchor));
    }

    // Keep the anchor outside the span of the restored rows: the result is
    // then a hyperplane complement, hence critical.
    if restricted.rank_without(&candidate.without(anchor)) == restricted.rank_without(candidate) {
        return Err(RefineError::AnchorExcluded(anchor));
    }
    let mut set = candidate.clone();
    for &r in others.iter().rev() {
        let trial = set.without(r);
        if restricted.rank_without(&trial.without(anchor)) > restricted.rank_without(&trial) {
            set = trial;
        }
    }
    verify_restricted(&restricted, &set, anchor, provenance).map_err(|_| RefineError::AnchorExcluded(anchor))
}

/// Lexicographic k-subsets of `0..n`.
pub struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Exhaustive search for the sparsest critical tuple containing `anchor`,
/// using only Bareiss ranks. Exponential; guarded at [`ORACLE_LIMIT`] rows.
pub fn oracle_sparsest(h: &IntMatrix, anchor: usize) -> Result<CriticalTuple, OracleError> {
    let m = h.rows();
    if m > ORACLE_LIMIT {
        return Err(OracleError::TooLarge {
            m,
            limit: ORACLE_LIMIT,
        });
    }
    if anchor >= m {
        return Err(OracleError::BadAnchor { anchor, m });
    }
    let target = h.cols() - 1;
    let unobservable = |set: &RowIndexSet| rank_exact(h, set, DEFAULT_REFERENCE) < target;
    let others: Vec<usize> = (0..m).filter(|&r| r != anchor).collect();
    for size in 0..others.len() + 1 {
        for combo in Combinations::new(others.len(), size) {
            let mut set: RowIndexSet = combo.iter().map(|&i| others[i]).collect();
            set.insert(anchor);
            if unobservable(&set) && set.iter().all(|r| !unobservable(&set.without(r))) {
                return Ok(CriticalTuple {
                    cardinality: set.len(),
                    rows: set.as_slice().to_vec(),
                    anchor,
                    provenance: Provenance::Oracle,
                });
            }
        }
    }
    Err(OracleError::NoCriticalTuple(anchor))
}

//! The integer DC measurement Jacobian and exact rank / null-space primitives.
//!
//! Susceptances are taken as one, so every entry is a small integer: a flow
//! row is a signed incidence row and an injection row is the sum of the flow
//! rows of its incident lines, oriented out of the bus.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::linalg::{self, bareiss_rank, with_fallback, Echelon, ExactInt};
use crate::netmodel::{Case, Measurement, MeasurementSet, Network};

/// Dense `m x n` integer matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<i64>>, cols: usize) -> Self {
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        IntMatrix {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[i64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.cols + c]
    }

    fn row_mut(&mut self, r: usize) -> &mut [i64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `H x` for an integer vector.
    pub fn apply(&self, x: &[i64]) -> Vec<i64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `H x` for a rational vector.
    pub fn apply_rational(&self, x: &[BigRational]) -> Vec<BigRational> {
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .filter(|(a, _)| **a != 0)
                    .map(|(a, v)| v * BigRational::from_integer(BigInt::from(*a)))
                    .sum()
            })
            .collect()
    }

    /// CSV dump, one labelled row per measurement.
    pub fn to_csv(&self, labels: &[String]) -> String {
        let mut out = String::from("measurement");
        for c in 0..self.cols {
            let _ = write!(out, ",bus{}", c + 1);
        }
        out.push('\n');
        for r in 0..self.rows {
            let label = labels.get(r).map(String::as_str).unwrap_or("");
            let _ = write!(out, "\"{}\"", label.replace('"', "\"\""));
            for v in self.row(r) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Sorted set of row indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct RowIndexSet(Vec<usize>);

impl RowIndexSet {
    pub fn new() -> Self {
        RowIndexSet(Vec::new())
    }

    pub fn all(m: usize) -> Self {
        RowIndexSet((0..m).collect())
    }

    pub fn contains(&self, r: usize) -> bool {
        self.0.binary_search(&r).is_ok()
    }

    pub fn insert(&mut self, r: usize) -> bool {
        match self.0.binary_search(&r) {
            Ok(_) => false,
            Err(pos) => {
                self.0.insert(pos, r);
                true
            }
        }
    }

    pub fn remove(&mut self, r: usize) -> bool {
        match self.0.binary_search(&r) {
            Ok(pos) => {
                self.0.remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    pub fn without(&self, r: usize) -> Self {
        let mut s = self.clone();
        s.remove(r);
        s
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Rows of `0..m` not in the set.
    pub fn complement(&self, m: usize) -> Self {
        RowIndexSet((0..m).filter(|r| !self.contains(*r)).collect())
    }

    pub fn is_subset_of_range(&self, m: usize) -> bool {
        self.0.last().is_none_or(|&r| r < m)
    }
}

impl FromIterator<usize> for RowIndexSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let set: BTreeSet<usize> = iter.into_iter().collect();
        RowIndexSet(set.into_iter().collect())
    }
}

impl From<Vec<usize>> for RowIndexSet {
    fn from(v: Vec<usize>) -> Self {
        v.into_iter().collect()
    }
}

impl<'a> IntoIterator for &'a RowIndexSet {
    type Item = usize;
    type IntoIter = std::iter::Copied<std::slice::Iter<'a, usize>>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter().copied()
    }
}

/// Reference column used by rank tests unless the caller picks another.
pub const DEFAULT_REFERENCE: usize = 0;

pub fn build_h(net: &Network, ms: &MeasurementSet) -> IntMatrix {
    let n = net.bus_count();
    let mut h = IntMatrix::zeros(ms.len(), n);
    for (r, m) in ms.entries().iter().enumerate() {
        let row = h.row_mut(r);
        match *m {
            Measurement::Flow { line } => {
                let l = net.line(line);
                row[l.from] += 1;
                row[l.to] -= 1;
            }
            Measurement::Injection { bus } => {
                for &k in net.incident_lines(bus).expect("validated bus") {
                    row[bus] += 1;
                    row[net.line(k).other(bus)] -= 1;
                }
            }
        }
    }
    h
}

impl Case {
    pub fn jacobian(&self) -> IntMatrix {
        build_h(&self.network, &self.measurements)
    }
}

/// Exact rank of `H` restricted to the rows outside `drop_rows` and the
/// columns other than `drop_col`, by fraction-free elimination.
pub fn rank_exact(mat: &IntMatrix, drop_rows: &RowIndexSet, drop_col: usize) -> usize {
    assert!(drop_col < mat.cols, "reference column out of range");
    let keep: Vec<usize> = (0..mat.rows).filter(|r| !drop_rows.contains(*r)).collect();
    let sub = |keep: &[usize]| -> Vec<Vec<i64>> {
        keep.iter()
            .map(|&r| {
                mat.row(r)
                    .iter()
                    .enumerate()
                    .filter(|(c, _)| *c != drop_col)
                    .map(|(_, v)| *v)
                    .collect()
            })
            .collect()
    };
    let rows = sub(&keep);
    let cols = mat.cols - 1;
    with_fallback(
        || bareiss_rank(rows.iter().map(|r| linalg::lift::<i64>(r)).collect(), cols),
        || bareiss_rank(rows.iter().map(|r| linalg::lift::<BigInt>(r)).collect(), cols),
    )
}

/// Rational basis of `{x : H(zero_rows, :) x = 0}`.
pub fn null_space_basis(mat: &IntMatrix, zero_rows: &RowIndexSet) -> Vec<Vec<BigRational>> {
    fn run<T: ExactInt>(mat: &IntMatrix, zero_rows: &RowIndexSet) -> linalg::Exact<Vec<Vec<BigRational>>> {
        let mut e = Echelon::<T>::new(mat.cols());
        for r in zero_rows {
            e.push(linalg::lift(mat.row(r)))?;
        }
        Ok(e.null_space()?
            .into_iter()
            .map(|v| {
                v.iter()
                    .map(|x| BigRational::from_integer(x.to_bigint()))
                    .collect()
            })
            .collect())
    }
    with_fallback(|| run::<i128>(mat, zero_rows), || run::<BigInt>(mat, zero_rows))
}

/// True when every row of `H` sums to zero, i.e. `H 1 = 0`.
pub fn rows_sum_to_zero(mat: &IntMatrix) -> bool {
    mat.apply(&vec![1; mat.cols()]).iter().all(|&v| v == 0)
}

/// Checks `H(rows, :) x = 0` exactly.
pub fn annihilates(mat: &IntMatrix, rows: &RowIndexSet, x: &[BigRational]) -> bool {
    rows.iter().all(|r| {
        let s: BigRational = mat
            .row(r)
            .iter()
            .zip(x)
            .map(|(a, v)| v * BigRational::from_integer(BigInt::from(*a)))
            .sum();
        s.is_zero()
    })
}

//! Exact integer linear algebra.
//!
//! Everything here runs over the integers without any tolerance. Routines are
//! generic over [`ExactInt`]; callers first try `i128` with checked arithmetic
//! and redo the computation with `BigInt` if an intermediate overflows (see
//! [`with_fallback`]).

use std::fmt::Debug;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overflow;

pub type Exact<T> = Result<T, Overflow>;

/// Integer arithmetic that reports overflow instead of wrapping.
pub trait ExactInt: Clone + PartialEq + Debug + Send + Sync {
    fn from_i64(v: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn is_negative(&self) -> bool;
    fn mul(&self, rhs: &Self) -> Exact<Self>;
    fn sub(&self, rhs: &Self) -> Exact<Self>;
    fn add(&self, rhs: &Self) -> Exact<Self>;
    fn neg(&self) -> Exact<Self>;
    /// Exact division; `rhs` must divide `self`.
    fn div_exact(&self, rhs: &Self) -> Self;
    /// Non-negative gcd.
    fn gcd(&self, rhs: &Self) -> Self;
    fn is_one(&self) -> bool;
    fn to_bigint(&self) -> BigInt;

    fn zero() -> Self {
        Self::from_i64(0)
    }

    fn abs(&self) -> Exact<Self> {
        if self.is_negative() {
            self.neg()
        } else {
            Ok(self.clone())
        }
    }
}

impl ExactInt for i128 {
    fn from_i64(v: i64) -> Self {
        v as i128
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn is_negative(&self) -> bool {
        *self < 0
    }
    fn mul(&self, rhs: &Self) -> Exact<Self> {
        self.checked_mul(*rhs).ok_or(Overflow)
    }
    fn sub(&self, rhs: &Self) -> Exact<Self> {
        self.checked_sub(*rhs).ok_or(Overflow)
    }
    fn add(&self, rhs: &Self) -> Exact<Self> {
        self.checked_add(*rhs).ok_or(Overflow)
    }
    fn neg(&self) -> Exact<Self> {
        self.checked_neg().ok_or(Overflow)
    }
    fn div_exact(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn gcd(&self, rhs: &Self) -> Self {
        // i128::MIN has no positive counterpart; callers never get there
        // because every product is checked first.
        Integer::gcd(self, rhs)
    }
    fn is_one(&self) -> bool {
        *self == 1
    }
    fn to_bigint(&self) -> BigInt {
        BigInt::from(*self)
    }
}

// i64::MIN is reported as overflow so that gcd and negation stay total.
impl ExactInt for i64 {
    fn from_i64(v: i64) -> Self {
        v
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn is_negative(&self) -> bool {
        *self < 0
    }
    fn mul(&self, rhs: &Self) -> Exact<Self> {
        self.checked_mul(*rhs).filter(|v| *v != i64::MIN).ok_or(Overflow)
    }
    fn sub(&self, rhs: &Self) -> Exact<Self> {
        self.checked_sub(*rhs).filter(|v| *v != i64::MIN).ok_or(Overflow)
    }
    fn add(&self, rhs: &Self) -> Exact<Self> {
        self.checked_add(*rhs).filter(|v| *v != i64::MIN).ok_or(Overflow)
    }
    fn neg(&self) -> Exact<Self> {
        self.checked_neg().ok_or(Overflow)
    }
    fn div_exact(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn gcd(&self, rhs: &Self) -> Self {
        Integer::gcd(self, rhs)
    }
    fn is_one(&self) -> bool {
        *self == 1
    }
    fn to_bigint(&self) -> BigInt {
        BigInt::from(*self)
    }
}

impl ExactInt for BigInt {
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
    fn mul(&self, rhs: &Self) -> Exact<Self> {
        Ok(self * rhs)
    }
    fn sub(&self, rhs: &Self) -> Exact<Self> {
        Ok(self - rhs)
    }
    fn add(&self, rhs: &Self) -> Exact<Self> {
        Ok(self + rhs)
    }
    fn neg(&self) -> Exact<Self> {
        Ok(-self)
    }
    fn div_exact(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn gcd(&self, rhs: &Self) -> Self {
        Integer::gcd(self, rhs)
    }
    fn is_one(&self) -> bool {
        *self == BigInt::from(1)
    }
    fn to_bigint(&self) -> BigInt {
        self.clone()
    }
}

/// Runs `f` with `i128` arithmetic, retrying with `BigInt` on overflow.
pub fn with_fallback<R>(
    small: impl FnOnce() -> Exact<R>,
    big: impl FnOnce() -> Exact<R>,
) -> R {
    match small() {
        Ok(r) => r,
        Err(Overflow) => big().expect("BigInt arithmetic cannot overflow"),
    }
}

/// Divides `x` by the gcd of its entries.
pub fn normalize_content<T: ExactInt>(x: &mut [T]) {
    let mut g = T::zero();
    for v in x.iter() {
        if !v.is_zero() {
            g = g.gcd(v);
            if g.is_one() {
                return;
            }
        }
    }
    if g.is_zero() || g.is_one() {
        return;
    }
    for v in x.iter_mut() {
        if !v.is_zero() {
            *v = v.div_exact(&g);
        }
    }
}

/// Rank by fraction-free (Bareiss) elimination of a dense row-major matrix.
pub fn bareiss_rank<T: ExactInt>(mut a: Vec<Vec<T>>, cols: usize) -> Exact<usize> {
    let rows = a.len();
    let mut rank = 0;
    let mut prev = T::from_i64(1);
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(piv) = (rank..rows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, piv);
        for r in rank + 1..rows {
            for c in col + 1..cols {
                // a[r][c] = (a[r][c] * a[k][k] - a[r][k] * a[k][c]) / prev
                let lhs = a[r][c].mul(&a[rank][col])?;
                let rhs = a[r][col].mul(&a[rank][c])?;
                a[r][c] = lhs.sub(&rhs)?.div_exact(&prev);
            }
            a[r][col] = T::zero();
        }
        prev = a[rank][col].clone();
        rank += 1;
    }
    Ok(rank)
}

/// Row echelon basis with stack discipline: rows can be pushed and popped,
/// which is what a depth-first search needs.
///
/// Invariant: row `k` is zero in the pivot columns of rows `0..k`.
#[derive(Debug, Clone)]
pub struct Echelon<T> {
    width: usize,
    rows: Vec<Vec<T>>,
    support: Vec<Vec<usize>>,
    pivots: Vec<usize>,
}

impl<T: ExactInt> Echelon<T> {
    pub fn new(width: usize) -> Self {
        Echelon {
            width,
            rows: Vec::new(),
            support: Vec::new(),
            pivots: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Reduces `x` against the basis in place. The result is zero iff `x`
    /// lies in the span.
    pub fn reduce(&self, x: &mut [T]) -> Exact<()> {
        for k in 0..self.rows.len() {
            self.reduce_by(k, x)?;
        }
        Ok(())
    }

    /// Eliminates pivot column of basis row `k` from `x`.
    pub fn reduce_by(&self, k: usize, x: &mut [T]) -> Exact<()> {
        let p = self.pivots[k];
        if x[p].is_zero() {
            return Ok(());
        }
        let row = &self.rows[k];
        let g = x[p].gcd(&row[p]);
        let a = row[p].div_exact(&g);
        let c = x[p].div_exact(&g);
        let scaled = !a.is_one();
        if scaled {
            for v in x.iter_mut() {
                if !v.is_zero() {
                    *v = v.mul(&a)?;
                }
            }
        }
        for &j in &self.support[k] {
            x[j] = x[j].sub(&c.mul(&row[j])?)?;
        }
        if scaled {
            normalize_content(x);
        }
        Ok(())
    }

    /// Adds `x` if it is independent of the current rows. Returns whether it
    /// was added.
    pub fn push(&mut self, mut x: Vec<T>) -> Exact<bool> {
        debug_assert_eq!(x.len(), self.width);
        self.reduce(&mut x)?;
        let Some(p) = x.iter().position(|v| !v.is_zero()) else {
            return Ok(false);
        };
        normalize_content(&mut x);
        let support = (0..self.width).filter(|&j| !x[j].is_zero()).collect();
        self.rows.push(x);
        self.support.push(support);
        self.pivots.push(p);
        Ok(true)
    }

    pub fn pop(&mut self) {
        self.rows.pop();
        self.support.pop();
        self.pivots.pop();
    }

    pub fn contains(&self, x: &[T]) -> Exact<bool> {
        let mut y = x.to_vec();
        self.reduce(&mut y)?;
        Ok(y.iter().all(ExactInt::is_zero))
    }

    /// Integer basis of the right null space `{x : row . x = 0 for all rows}`.
    /// Each vector has coprime entries.
    pub fn null_space(&self) -> Exact<Vec<Vec<T>>> {
        let r = self.rows.len();
        let mut rows = self.rows.clone();
        // back-substitute so each pivot column is zero in every other row
        for k in (0..r).rev() {
            let p = self.pivots[k];
            let (head, tail) = rows.split_at_mut(k);
            let pivot_row = &tail[0];
            for row in head.iter_mut() {
                if row[p].is_zero() {
                    continue;
                }
                let g = row[p].gcd(&pivot_row[p]);
                let a = pivot_row[p].div_exact(&g);
                let c = row[p].div_exact(&g);
                for j in 0..self.width {
                    row[j] = row[j].mul(&a)?.sub(&c.mul(&pivot_row[j])?)?;
                }
                normalize_content(row);
            }
        }
        let mut is_pivot = vec![false; self.width];
        for &p in &self.pivots {
            is_pivot[p] = true;
        }
        let mut basis = Vec::new();
        for f in (0..self.width).filter(|&j| !is_pivot[j]) {
            // x_f = L, x_p = -row[f] * L / row[p]
            let mut l = T::from_i64(1);
            for (row, &p) in rows.iter().zip(&self.pivots) {
                if !row[f].is_zero() {
                    let d = row[p].abs()?;
                    let g = l.gcd(&d);
                    l = l.mul(&d.div_exact(&g))?;
                }
            }
            let mut x = vec![T::zero(); self.width];
            x[f] = l.clone();
            for (row, &p) in rows.iter().zip(&self.pivots) {
                if !row[f].is_zero() {
                    x[p] = row[f].mul(&l)?.div_exact(&row[p]).neg()?;
                }
            }
            normalize_content(&mut x);
            basis.push(x);
        }
        Ok(basis)
    }
}

/// Dot product of an integer row with an exact vector.
pub fn dot<T: ExactInt>(row: &[i64], x: &[T]) -> Exact<T> {
    let mut acc = T::zero();
    for (a, v) in row.iter().zip(x) {
        if *a != 0 && !v.is_zero() {
            acc = acc.add(&T::from_i64(*a).mul(v)?)?;
        }
    }
    Ok(acc)
}

pub fn lift<T: ExactInt>(row: &[i64]) -> Vec<T> {
    row.iter().map(|&v| T::from_i64(v)).collect()
}

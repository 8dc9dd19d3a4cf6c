//! Big-M mixed-integer model of the security-index problem, written in CPLEX
//! LP text format for external solvers.
//!
//! ```text
//! minimize   sum_j y_j
//! subject to  H theta - M y <= 0
//!            -H theta - M y <= 0
//!             H(anchor,:) theta = 1
//!             y binary, theta free
//! ```
//!
//! Variables are named `theta_1..theta_n` and `y_1..y_m` (1-based, so row
//! `j` of `H` owns `y_{j+1}`). The exact layout is documented in
//! `docs/lp_template.md`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::jacobian::{IntMatrix, RowIndexSet};

/// Terms per line in long sums (objective).
const TERMS_PER_LINE: usize = 10;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("anchor row {anchor} out of range (H has {rows} rows)")]
    BadAnchor { anchor: usize, rows: usize },
    #[error("big-M must be positive, got {0}")]
    NonPositiveBigM(BigRational),
    #[error("protected row {row} out of range (H has {rows} rows)")]
    BadProtected { row: usize, rows: usize },
    #[error("anchor row {0} cannot be protected")]
    ProtectedAnchor(usize),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    h: IntMatrix,
    anchor: usize,
    big_m: BigRational,
    fixed_zero: RowIndexSet,
}

impl MilpModel {
    pub fn new(h: &IntMatrix, anchor: usize, big_m: BigRational) -> Result<Self, MilpError> {
        if anchor >= h.rows() {
            return Err(MilpError::BadAnchor {
                anchor,
                rows: h.rows(),
            });
        }
        if !big_m.is_positive() {
            return Err(MilpError::NonPositiveBigM(big_m));
        }
        Ok(MilpModel {
            h: h.clone(),
            anchor,
            big_m,
            fixed_zero: RowIndexSet::new(),
        })
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn big_m(&self) -> &BigRational {
        &self.big_m
    }

    /// Rows whose indicator is fixed to 0.
    pub fn fixed_zero(&self) -> &RowIndexSet {
        &self.fixed_zero
    }

    pub fn binary_count(&self) -> usize {
        self.h.rows()
    }

    pub fn continuous_count(&self) -> usize {
        self.h.cols()
    }

    /// Constraint rows: two per measurement plus the anchor normalization.
    pub fn constraint_count(&self) -> usize {
        2 * self.h.rows() + 1
    }

    pub fn to_lp(&self) -> String {
        let (m, n) = (self.h.rows(), self.h.cols());
        let big_m = format_coef(&self.big_m);
        let mut out = String::new();
        let _ = writeln!(out, "\\ security index model: anchor y_{}, M = {}", self.anchor + 1, big_m);
        out.push_str("Minimize\n obj:");
        for j in 0..m {
            if j > 0 && j % TERMS_PER_LINE == 0 {
                out.push_str("\n     ");
            }
            if j > 0 {
                out.push_str(" +");
            }
            let _ = write!(out, " y_{}", j + 1);
        }
        out.push_str("\nSubject To\n");
        for j in 0..m {
            let row = self.h.row(j);
            let _ = writeln!(out, " ub_{}:{} - {} y_{} <= 0", j + 1, theta_terms(row, 1), big_m, j + 1);
            let _ = writeln!(out, " lb_{}:{} - {} y_{} <= 0", j + 1, theta_terms(row, -1), big_m, j + 1);
        }
        let _ = writeln!(out, " anchor:{} = 1", theta_terms(self.h.row(self.anchor), 1));
        out.push_str("Bounds\n");
        for c in 0..n {
            let _ = writeln!(out, " theta_{} free", c + 1);
        }
        for j in self.fixed_zero.iter() {
            let _ = writeln!(out, " y_{} = 0", j + 1);
        }
        out.push_str("Binaries\n");
        for j in 0..m {
            let _ = writeln!(out, " y_{}", j + 1);
        }
        out.push_str("End\n");
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), MilpError> {
        fs::write(path, self.to_lp()).map_err(|source| MilpError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

// " + theta_1 - 2 theta_3"; the leading sign of a positive first term is dropped.
fn theta_terms(row: &[i64], sign: i64) -> String {
    let mut out = String::new();
    for (c, &v) in row.iter().enumerate() {
        let v = v * sign;
        if v == 0 {
            continue;
        }
        let op = if v < 0 { " -" } else if out.is_empty() { "" } else { " +" };
        out.push_str(op);
        if v.abs() != 1 {
            let _ = write!(out, " {}", v.abs());
        }
        let _ = write!(out, " theta_{}", c + 1);
    }
    if out.is_empty() {
        // an all-zero row still needs a left-hand side
        out.push_str(" 0 theta_1");
    }
    out
}

// Integers print exactly; other rationals as the nearest f64.
fn format_coef(q: &BigRational) -> String {
    if q.is_integer() {
        q.to_integer().to_string()
    } else {
        format!("{}", q.to_f64().unwrap_or(f64::MAX))
    }
}

/// Builds the model and writes it to `path`.
pub fn export_milp(h: &IntMatrix, anchor: usize, big_m: BigRational, path: &Path) -> Result<MilpModel, MilpError> {
    let model = MilpModel::new(h, anchor, big_m)?;
    model.write(path)?;
    Ok(model)
}

/// Adds `y_j = 0` for every protected row.
pub fn protected_set_constraint(model: &MilpModel, protected: &RowIndexSet) -> Result<MilpModel, MilpError> {
    let rows = model.h.rows();
    if let Some(row) = protected.iter().find(|&r| r >= rows) {
        return Err(MilpError::BadProtected { row, rows });
    }
    if protected.contains(model.anchor) {
        return Err(MilpError::ProtectedAnchor(model.anchor));
    }
    let mut out = model.clone();
    for r in protected.iter() {
        out.fixed_zero.insert(r);
    }
    Ok(out)
}

/// `alpha * max|H theta0| / min nonzero |H theta0|`, a starting guess for M
/// from a feasible point `theta0`. `None` when `H theta0` is zero.
pub fn big_m_guess(h: &IntMatrix, theta0: &[BigRational], alpha: &BigRational) -> Option<BigRational> {
    let image = h.apply_rational(theta0);
    let mags: Vec<BigRational> = image.into_iter().filter(|v| !v.is_zero()).map(|v| v.abs()).collect();
    let max = mags.iter().max()?;
    let min = mags.iter().min()?;
    Some(alpha * max / min)
}

/// Convenience for integer M.
pub fn big_m(value: i64) -> BigRational {
    BigRational::new(BigInt::from(value), BigInt::one())
}

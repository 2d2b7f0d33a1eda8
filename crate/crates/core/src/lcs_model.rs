//! Finite truncations of a locally convex space.
//!
//! A [`Space`] is `R^m` carrying an ordered chain of weighted-sup seminorms
//!
//! ```text
//! ||y||_p = max_{1 <= i <= min(p, m)} w_i |y_i|,     p = 1..P
//! ```
//!
//! The chain is increasing in `p`, so the index order is the inductive order of
//! the determining system. Coordinates beyond `p` are invisible to `||.||_p`,
//! which makes the `p`-unit ball unbounded in those directions; this is the
//! mechanism that produces infinite operator seminorms and non-trivial normal
//! indices even on a finite truncation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point (or velocity, or variation) of the truncated space.
pub type Vector = DVector<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Space {
    dim: usize,
    weights: Vec<f64>,
    num_seminorms: usize,
}

impl Space {
    /// Builds a space of dimension `dim` with `num_seminorms` seminorms.
    ///
    /// Only the first `dim` weights are used; extra weights are ignored.
    pub fn new(dim: usize, weights: &[f64], num_seminorms: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("space dimension must be positive"));
        }
        if num_seminorms == 0 {
            return Err(Error::validation("at least one seminorm is required"));
        }
        if weights.len() < dim {
            return Err(Error::validation(format!(
                "{} weights supplied for dimension {dim}",
                weights.len()
            )));
        }
        if let Some(w) = weights[..dim].iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::validation(format!("seminorm weight {w} is not strictly positive")));
        }
        Ok(Space {
            dim,
            weights: weights[..dim].to_vec(),
            num_seminorms,
        })
    }

    /// `R^dim` with unit weights and `dim` seminorms; the last one is the sup norm.
    pub fn sup_norm(dim: usize) -> Result<Self> {
        Space::new(dim, &vec![1.0; dim], dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_seminorms(&self) -> usize {
        self.num_seminorms
    }

    pub fn zeros(&self) -> Vector {
        Vector::zeros(self.dim)
    }

    /// Number of coordinates seen by seminorm `p`.
    pub fn support(&self, p: usize) -> usize {
        p.min(self.dim)
    }

    pub fn check_index(&self, p: usize) -> Result<()> {
        if p == 0 || p > self.num_seminorms {
            return Err(Error::IndexOutOfRange {
                what: "seminorm",
                index: p,
                max: self.num_seminorms,
            });
        }
        Ok(())
    }

    pub fn check_vector(&self, y: &Vector) -> Result<()> {
        if y.len() != self.dim {
            return Err(Error::validation(format!(
                "vector of length {} does not belong to a space of dimension {}",
                y.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `||y||_p`.
    pub fn seminorm(&self, p: usize, y: &Vector) -> Result<f64> {
        self.check_index(p)?;
        self.check_vector(y)?;
        Ok(self.seminorm_unchecked(p, y.as_slice()))
    }

    pub(crate) fn seminorm_unchecked(&self, p: usize, y: &[f64]) -> f64 {
        y.iter()
            .zip(&self.weights)
            .take(self.support(p))
            .fold(0.0, |acc, (yi, wi)| acc.max(wi * yi.abs()))
    }

    /// Dual seminorm of a covector: `sup_{||y||_p <= 1} |c . y|`.
    ///
    /// Infinite as soon as `c` charges a coordinate the seminorm does not see.
    pub fn dual_seminorm(&self, p: usize, covector: &Vector) -> Result<Extended> {
        self.check_index(p)?;
        self.check_vector(covector)?;
        let k = self.support(p);
        if covector.iter().skip(k).any(|c| *c != 0.0) {
            return Ok(Extended::Infinite);
        }
        let sum = covector
            .iter()
            .zip(&self.weights)
            .take(k)
            .map(|(c, w)| c.abs() / w)
            .sum();
        Ok(Extended::Finite(sum))
    }
}

/// A nonnegative real or `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(*v),
            Extended::Infinite => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Extended::Finite(v) => *v,
            Extended::Infinite => f64::INFINITY,
        }
    }
}

/// A linear operator between two truncations, stored as a dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    matrix: DMatrix<f64>,
    // per row: 0-based column of the last nonzero entry
    support_profile: Vec<Option<usize>>,
}

impl LinearOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if let Some(x) = matrix.iter().find(|x| !x.is_finite()) {
            return Err(Error::validation(format!("operator entry {x} is not finite")));
        }
        let support_profile = (0..matrix.nrows())
            .map(|i| (0..matrix.ncols()).rev().find(|&j| matrix[(i, j)] != 0.0))
            .collect();
        Ok(LinearOperator {
            matrix,
            support_profile,
        })
    }

    pub fn identity(dim: usize) -> Self {
        LinearOperator::new(DMatrix::identity(dim, dim)).expect("identity is finite")
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn support_profile(&self) -> &[Option<usize>] {
        &self.support_profile
    }

    pub fn apply(&self, y: &Vector) -> Vector {
        &self.matrix * y
    }
}

/// `sup_{||y||_p <= 1} ||A y||^q` from `src` to `dst`.
///
/// The `p`-unit ball is the box `|y_j| <= 1/w_j` for `j <= p` and is
/// unconstrained beyond `p`. The supremum is therefore infinite iff a row seen
/// by `||.||^q` has a nonzero entry past column `p`; otherwise it is the
/// largest weighted l1 row sum.
pub fn operator_seminorm(
    src: &Space,
    dst: &Space,
    op: &LinearOperator,
    p: usize,
    q: usize,
) -> Result<Extended> {
    src.check_index(p)?;
    dst.check_index(q)?;
    check_shape(src, dst, op)?;
    let cols = src.support(p);
    let rows = dst.support(q);
    let mut best = 0.0_f64;
    for i in 0..rows {
        if let Some(last) = op.support_profile[i] {
            if last >= cols {
                return Ok(Extended::Infinite);
            }
        }
        let row_sum: f64 = (0..cols)
            .map(|j| op.matrix[(i, j)].abs() / src.weights[j])
            .sum();
        best = best.max(dst.weights[i] * row_sum);
    }
    Ok(Extended::Finite(best))
}

fn check_shape(src: &Space, dst: &Space, op: &LinearOperator) -> Result<()> {
    if op.matrix.nrows() != dst.dim() || op.matrix.ncols() != src.dim() {
        return Err(Error::validation(format!(
            "operator of shape {}x{} does not map R^{} to R^{}",
            op.matrix.nrows(),
            op.matrix.ncols(),
            src.dim(),
            dst.dim()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalIndexEntry {
    /// Target seminorm index `q`.
    pub q: usize,
    /// `n_A(q)` as ascending source indices with the finite operator seminorm.
    pub finite: Vec<(usize, f64)>,
}

impl NormalIndexEntry {
    pub fn indices(&self) -> Vec<usize> {
        self.finite.iter().map(|(p, _)| *p).collect()
    }

    pub fn contains(&self, p: usize) -> bool {
        self.finite.iter().any(|(pp, _)| *pp == p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalIndexReport {
    pub entries: Vec<NormalIndexEntry>,
}

impl NormalIndexReport {
    /// `n_A(q)`, 1-based `q`.
    pub fn at(&self, q: usize) -> Option<&NormalIndexEntry> {
        self.entries.get(q.checked_sub(1)?)
    }
}

/// Normal index `n_A(q) = { p : ||A||_p^q < inf }` for every target index `q`.
pub fn normal_index(src: &Space, dst: &Space, op: &LinearOperator) -> Result<NormalIndexReport> {
    check_shape(src, dst, op)?;
    let mut entries = Vec::with_capacity(dst.num_seminorms());
    for q in 1..=dst.num_seminorms() {
        let mut finite = Vec::new();
        for p in 1..=src.num_seminorms() {
            if let Extended::Finite(v) = operator_seminorm(src, dst, op, p, q)? {
                finite.push((p, v));
            }
        }
        entries.push(NormalIndexEntry { q, finite });
    }
    Ok(NormalIndexReport { entries })
}

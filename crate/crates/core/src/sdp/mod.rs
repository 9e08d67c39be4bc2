//! First-order splitting solver for penalized affine slices of a matrix
//! variable.
//!
//! Solves
//!
//! ```text
//! minimize   Σₖ φₖ(Aₖ(X) − bₖ)
//! subject to X ∈ K,  fixed entries of X take given values
//! ```
//!
//! where each `φₖ` is one of the [`PenaltyKind`] penalties and `K` is either
//! the PSD cone over symmetric `dim × dim` matrices or all of `R^dim`
//! ([`Cone::Free`]).
//!
//! The method is two-block ADMM on the consensus split `X = V`,
//! `yₖ = Aₖ(V) − bₖ`: block one projects onto `K` and applies the proxes to
//! the slice copies `yₖ`; block two is a least-squares solve for `V` with the
//! fixed entries held at their values. The least-squares system does not
//! depend on the penalty parameter, so it is factored once.

mod admm;
pub mod prox;
pub mod psd;

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use admm::solve;
pub use prox::{prox, PenaltyKind};
pub use psd::{project_psd, symmetric_eigenvalues};

/// One scalar component of a slice: `Σ coeff·X[r, c] − offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceRow {
    pub entries: Vec<(usize, usize, f64)>,
    pub offset: f64,
}

impl SliceRow {
    pub fn entry(r: usize, c: usize, offset: f64) -> Self {
        SliceRow {
            entries: vec![(r, c, 1.0)],
            offset,
        }
    }

    pub fn eval(&self, x: &DMatrix<f64>) -> f64 {
        self.entries
            .iter()
            .map(|&(r, c, a)| a * x[(r, c)])
            .sum::<f64>()
            - self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyTerm {
    pub kind: PenaltyKind,
    pub weight: f64,
    pub rows: Vec<SliceRow>,
}

impl PenaltyTerm {
    pub fn slice_value(&self, x: &DMatrix<f64>) -> Vec<f64> {
        self.rows.iter().map(|r| r.eval(x)).collect()
    }

    pub fn eval(&self, x: &DMatrix<f64>) -> f64 {
        self.kind.eval(self.weight, &self.slice_value(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cone {
    /// Symmetric `dim × dim` PSD matrices.
    Psd,
    /// Unconstrained `dim × 1` vectors.
    Free,
}

/// `X[row.., col..] = value`. For PSD problems the mirrored block is implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedBlock {
    pub row: usize,
    pub col: usize,
    pub value: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProblem {
    pub dim: usize,
    pub cone: Cone,
    pub terms: Vec<PenaltyTerm>,
    pub fixed_blocks: Vec<FixedBlock>,
    /// Entries pinned to zero.
    pub anchor_zeros: Vec<(usize, usize)>,
}

impl ConicProblem {
    pub fn new(dim: usize, cone: Cone) -> Self {
        ConicProblem {
            dim,
            cone,
            terms: Vec::new(),
            fixed_blocks: Vec::new(),
            anchor_zeros: Vec::new(),
        }
    }

    /// Shape of the variable: `dim × dim` or `dim × 1`.
    pub fn shape(&self) -> (usize, usize) {
        match self.cone {
            Cone::Psd => (self.dim, self.dim),
            Cone::Free => (self.dim, 1),
        }
    }

    /// Objective at `x`.
    pub fn objective(&self, x: &DMatrix<f64>) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    /// Writes the fixed blocks and anchored zeros into `x`.
    pub fn apply_constraints(&self, x: &mut DMatrix<f64>) {
        for b in &self.fixed_blocks {
            for i in 0..b.value.nrows() {
                for j in 0..b.value.ncols() {
                    x[(b.row + i, b.col + j)] = b.value[(i, j)];
                    if self.cone == Cone::Psd {
                        x[(b.col + j, b.row + i)] = b.value[(i, j)];
                    }
                }
            }
        }
        for &(r, c) in &self.anchor_zeros {
            x[(r, c)] = 0.0;
            if self.cone == Cone::Psd {
                x[(c, r)] = 0.0;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    /// Initial penalty parameter.
    pub rho: f64,
    /// Residual balancing: scale `rho` by 2 when one normalized residual
    /// exceeds the other by `adapt_ratio`.
    pub adaptive_rho: bool,
    pub adapt_ratio: f64,
    pub adapt_interval: usize,
    /// Over-relaxation factor in `(0, 2)`.
    pub relaxation: f64,
    pub record_history: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            eps_abs: 1e-8,
            eps_rel: 1e-9,
            max_iter: 50_000,
            rho: 1.0,
            adaptive_rho: true,
            adapt_ratio: 10.0,
            adapt_interval: 20,
            relaxation: 1.6,
            record_history: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub objective: f64,
    pub primal_res: f64,
    pub dual_res: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// PSD iterate with fixed entries written back exactly.
    pub x_hat: DMatrix<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Spectrum of `x_hat`, descending (empty for free problems).
    pub eigenvalues: Vec<f64>,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<IterRecord>,
}

impl SolveReport {
    /// Writes `iter,objective,primal_res,dual_res` rows.
    pub fn write_log_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "iter,objective,primal_res,dual_res")?;
        for h in &self.history {
            writeln!(
                out,
                "{},{},{},{}",
                h.iter, h.objective, h.primal_res, h.dual_res
            )?;
        }
        Ok(())
    }
}

//! Rounding of relaxed solutions to poses, and a-posteriori tightness
//! diagnostics.

use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::costs::{eval_cost, eval_rotation_cost, CostKind};
use crate::error::{Error, Result};
use crate::geometry::{project_to_so2, Pose2, Rotation2};
use crate::posegraph::PoseGraph;
use crate::sdp::psd::{sym_eigen, to_faer};
use crate::sdp::symmetric_eigenvalues;

/// Relative eigenvalue cutoff for the numeric rank.
pub const EPS_RANK: f64 = 1e-6;
/// Tolerance on `‖BᵀB − I‖_F` for a raw rotation block.
pub const EPS_SO2: f64 = 1e-4;
/// Gap tolerance factor: the gap must be below `EPS_GAP·(1 + |relaxed|)`.
pub const EPS_GAP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct RankTwoFactor {
    /// `2 × dim`, rows `√λ₁u₁ᵀ` and `√λ₂u₂ᵀ`.
    pub z: DMatrix<f64>,
    /// Set when `λ₂` is zero up to roundoff.
    pub degenerate: bool,
}

/// Best rank-2 PSD approximation `ẐᵀẐ` of a symmetric PSD matrix.
pub fn rank2_factor(x: &DMatrix<f64>) -> RankTwoFactor {
    let dim = x.nrows();
    let eig = sym_eigen(&to_faer(x));
    let mut z = DMatrix::zeros(2, dim);
    let mut degenerate = dim < 2;
    let top = eig.values.last().copied().unwrap_or(0.0);
    for row in 0..2.min(dim) {
        let k = dim - 1 - row;
        let lambda = eig.values[k];
        // roundoff-level eigenvalues count as zero
        if lambda <= 1e-12 * top.max(0.0) || lambda <= 0.0 {
            degenerate = true;
            continue;
        }
        let s = lambda.sqrt();
        for c in 0..dim {
            z[(row, c)] = s * eig.vectors[(c, k)];
        }
    }
    RankTwoFactor { z, degenerate }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundedRotations {
    pub rotations: Vec<Rotation2>,
    /// Raw `2 × 2` blocks of `Ẑ` after the reflection repair.
    pub blocks: Vec<Matrix2<f64>>,
    pub reflected: bool,
}

/// Projects the first `n` blocks of `Ẑ` onto SO(2). If most blocks have
/// negative determinant, `Ẑ` is first flipped by `diag(1, −1)`, which leaves
/// `ẐᵀẐ` unchanged.
pub fn round_rotations(z: &DMatrix<f64>, n: usize) -> Result<RoundedRotations> {
    if z.nrows() != 2 || z.ncols() < 2 * n {
        return Err(Error::LengthMismatch {
            expected: 2 * n,
            got: z.ncols(),
        });
    }
    let mut blocks: Vec<Matrix2<f64>> = (0..n)
        .map(|i| z.fixed_view::<2, 2>(0, 2 * i).into_owned())
        .collect();
    let negative = blocks.iter().filter(|b| b.determinant() < 0.0).count();
    let reflected = 2 * negative > n;
    if reflected {
        for b in &mut blocks {
            b.row_mut(1).neg_mut();
        }
    }
    let rotations = blocks
        .iter()
        .map(|b| project_to_so2(b).map(|p| p.rotation))
        .collect::<Result<_>>()?;
    Ok(RoundedRotations {
        rotations,
        blocks,
        reflected,
    })
}

/// `t̂ⱼ = (1/n) Σᵢ R̂ᵢ [X^{Rt}]ᵢⱼ`, with `x_rt` the `2n × n` block.
pub fn round_translations(
    x_rt: &DMatrix<f64>,
    rotations: &[Rotation2],
) -> Result<Vec<Vector2<f64>>> {
    let n = rotations.len();
    if x_rt.nrows() != 2 * n || x_rt.ncols() != n {
        return Err(Error::LengthMismatch {
            expected: 2 * n,
            got: x_rt.nrows(),
        });
    }
    Ok((0..n)
        .map(|j| {
            let sum: Vector2<f64> = rotations
                .iter()
                .enumerate()
                .map(|(i, r)| r.rotate(&Vector2::new(x_rt[(2 * i, j)], x_rt[(2 * i + 1, j)])))
                .sum();
            sum / n as f64
        })
        .collect())
}

/// `‖M‖_F² / ‖M‖₂²`.
pub fn stable_rank(m: &DMatrix<f64>) -> Result<f64> {
    let sv = m.singular_values();
    let top = sv.max();
    if top == 0.0 || !top.is_finite() {
        return Err(Error::ZeroMatrix);
    }
    Ok(sv.iter().map(|s| s * s).sum::<f64>() / (top * top))
}

/// Count of eigenvalues above `EPS_RANK·λ_max` (eigenvalues descending).
pub fn numeric_rank(eigenvalues: &[f64]) -> usize {
    let Some(&top) = eigenvalues.first() else {
        return 0;
    };
    if top <= 0.0 {
        return 0;
    }
    eigenvalues.iter().filter(|&&l| l > EPS_RANK * top).count()
}

/// Which objective the relaxation bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Full pose cost (1-stage).
    Full,
    /// Rotation cost only (2-stage).
    RotationOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundedSolution {
    pub rotations: Vec<Rotation2>,
    pub translations: Vec<Vector2<f64>>,
    /// Cost of the rounded estimate under the objective the relaxation bounds.
    pub rounded_cost: f64,
    pub relaxed_cost: f64,
    pub subopt_gap_bound: f64,
    pub tight: bool,
    /// Stable rank of the rotation block `X̂^{RR}`.
    pub stable_rank: f64,
    /// Numeric rank of `X̂^{RR}`.
    pub numeric_rank: usize,
    /// Numeric rank of the whole relaxed matrix.
    pub lifted_rank: usize,
    /// Largest `‖BᵀB − I‖_F` over the raw rotation blocks.
    pub max_block_defect: f64,
}

impl RoundedSolution {
    pub fn poses(&self) -> Vec<Pose2> {
        self.rotations
            .iter()
            .zip(&self.translations)
            .map(|(r, t)| Pose2::new(*r, *t))
            .collect()
    }
}

/// Diagnoses a rounded estimate against its relaxation.
///
/// `x_hat` is the relaxed matrix (`3n × 3n` or `2n × 2n`), `blocks` the raw
/// rotation blocks it was rounded from. The gap bound compares the rounded
/// cost with the relaxed objective; the relaxation is tight when `X̂^{RR}`
/// has rank 2, every block is a rotation and the gap vanishes. The rank is
/// taken on `X̂^{RR}` because the translation block of a 1-stage optimum can
/// be replaced by its minimal PSD completion without changing the cost, and
/// that completion has the rank of `X̂^{RR}`.
#[allow(clippy::too_many_arguments)]
pub fn diagnose(
    graph: &PoseGraph,
    cost: CostKind,
    objective: Objective,
    x_hat: &DMatrix<f64>,
    relaxed_cost: f64,
    blocks: &[Matrix2<f64>],
    rotations: Vec<Rotation2>,
    translations: Vec<Vector2<f64>>,
) -> Result<RoundedSolution> {
    let n = graph.n;
    let rounded_cost = match objective {
        Objective::Full => {
            let poses: Vec<Pose2> = rotations
                .iter()
                .zip(&translations)
                .map(|(r, t)| Pose2::new(*r, *t))
                .collect();
            eval_cost(cost, graph, &poses)
        }
        Objective::RotationOnly => eval_rotation_cost(cost, graph, &rotations),
    };
    let rr = x_hat.view((0, 0), (2 * n, 2 * n)).into_owned();
    let rr_eigs = symmetric_eigenvalues(&rr);
    let lifted_rank = if x_hat.nrows() == rr.nrows() {
        numeric_rank(&rr_eigs)
    } else {
        numeric_rank(&symmetric_eigenvalues(x_hat))
    };
    let numeric = numeric_rank(&rr_eigs);
    let max_block_defect = blocks
        .iter()
        .map(|b| (b.transpose() * b - Matrix2::identity()).norm())
        .fold(0.0, f64::max);
    let gap = rounded_cost - relaxed_cost;
    let tight =
        numeric == 2 && max_block_defect <= EPS_SO2 && gap < EPS_GAP * (1.0 + relaxed_cost.abs());
    Ok(RoundedSolution {
        rotations,
        translations,
        rounded_cost,
        relaxed_cost,
        subopt_gap_bound: gap,
        tight,
        stable_rank: stable_rank(&rr)?,
        numeric_rank: numeric,
        lifted_rank,
        max_block_defect,
    })
}

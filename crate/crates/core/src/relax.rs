//! Lifted convex relaxations: the 1-stage problem over the full `3n × 3n`
//! matrix `X = ZᵀZ`, the rotation stage over its `2n × 2n` rotation block,
//! and the translation stage with rotations held fixed.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::costs::CostKind;
use crate::error::{Error, Result};
use crate::geometry::{Pose2, Rotation2};
use crate::posegraph::{MeasurementEdge, PoseGraph};
use crate::sdp::{
    self, Cone, ConicProblem, FixedBlock, PenaltyKind, PenaltyTerm, SliceRow, SolveOptions,
    SolveReport,
};

/// Block layout of the lifted matrix: `X^{RR}` occupies rows and columns
/// `[0, 2n)`, translations `[2n, 3n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LiftedIndex {
    pub n: usize,
}

impl LiftedIndex {
    pub fn new(n: usize) -> Self {
        LiftedIndex { n }
    }

    pub fn dim(&self) -> usize {
        3 * self.n
    }

    /// First row of rotation block `i`.
    pub fn rot(&self, i: usize) -> usize {
        2 * i
    }

    /// Row of translation `j`.
    pub fn trans(&self, j: usize) -> usize {
        2 * self.n + j
    }

    pub fn rr_block(&self, x: &DMatrix<f64>, i: usize, j: usize) -> Matrix2<f64> {
        let (r, c) = (self.rot(i), self.rot(j));
        Matrix2::new(x[(r, c)], x[(r, c + 1)], x[(r + 1, c)], x[(r + 1, c + 1)])
    }

    /// `[X^{Rt}]ᵢⱼ`, equal to `Rᵢᵀtⱼ` on a lifted point.
    pub fn rt_block(&self, x: &DMatrix<f64>, i: usize, j: usize) -> Vector2<f64> {
        let (r, c) = (self.rot(i), self.trans(j));
        Vector2::new(x[(r, c)], x[(r + 1, c)])
    }

    pub fn tt(&self, x: &DMatrix<f64>, i: usize, j: usize) -> f64 {
        x[(self.trans(i), self.trans(j))]
    }

    /// `Z = [R₁ … Rₙ | t₁ … tₙ]`, a `2 × 3n` matrix.
    pub fn lift_factor(&self, poses: &[Pose2]) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(2, self.dim());
        for (i, p) in poses.iter().enumerate() {
            z.fixed_view_mut::<2, 2>(0, self.rot(i))
                .copy_from(p.rotation.matrix());
            z.fixed_view_mut::<2, 1>(0, self.trans(i))
                .copy_from(&p.translation);
        }
        z
    }

    /// `ZᵀZ`.
    pub fn lift(&self, poses: &[Pose2]) -> DMatrix<f64> {
        let z = self.lift_factor(poses);
        z.transpose() * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stages {
    OneStage,
    TwoStage,
}

/// One of the six relaxation-based estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MethodSpec {
    pub stages: Stages,
    pub cost: CostKind,
}

impl MethodSpec {
    pub const ALL: [MethodSpec; 6] = [
        MethodSpec::new(Stages::OneStage, CostKind::L1),
        MethodSpec::new(Stages::TwoStage, CostKind::L1),
        MethodSpec::new(Stages::OneStage, CostKind::L2),
        MethodSpec::new(Stages::TwoStage, CostKind::L2),
        MethodSpec::new(Stages::OneStage, CostKind::Huber),
        MethodSpec::new(Stages::TwoStage, CostKind::Huber),
    ];

    pub const fn new(stages: Stages, cost: CostKind) -> Self {
        MethodSpec { stages, cost }
    }

    pub fn validate(&self) -> Result<()> {
        penalties(self.cost).map(|_| ())
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.stages {
            Stages::OneStage => "1stage",
            Stages::TwoStage => "2stage",
        };
        write!(f, "{}-{}", self.cost, s)
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (cost, stages) = s
            .rsplit_once('-')
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))?;
        let stages = match stages {
            "1stage" => Stages::OneStage,
            "2stage" => Stages::TwoStage,
            _ => return Err(Error::Config(format!("unknown method {s:?}"))),
        };
        let spec = MethodSpec::new(stages, cost.parse()?);
        spec.validate()?;
        Ok(spec)
    }
}

/// Penalty kinds and weight factors `(translation, rotation)` for a cost.
fn penalties(cost: CostKind) -> Result<[(PenaltyKind, f64); 2]> {
    match cost {
        CostKind::L2 => Ok([
            (PenaltyKind::L2Norm, 1.0),
            (PenaltyKind::FrobeniusNorm, 1.0 / SQRT_2),
        ]),
        CostKind::L1 => Ok([(PenaltyKind::L1Norm, 1.0), (PenaltyKind::L1Norm, 0.5)]),
        CostKind::Huber => Ok([
            (PenaltyKind::HuberOfL2, 1.0),
            (PenaltyKind::HuberOfFrobenius, 1.0),
        ]),
        CostKind::Quadratic => Err(Error::Config(
            "the quadratic cost has no robust relaxation; use gauss-newton".into(),
        )),
    }
}

/// Rows of `[X^{RR}]ᵢⱼ − R̄ᵢⱼ`, row-major.
fn rotation_rows(idx: &LiftedIndex, e: &MeasurementEdge) -> Vec<SliceRow> {
    let rbar = e.rel_rotation.matrix();
    let (ri, rj) = (idx.rot(e.from), idx.rot(e.to));
    let mut rows = Vec::with_capacity(4);
    for a in 0..2 {
        for b in 0..2 {
            rows.push(SliceRow::entry(ri + a, rj + b, rbar[(a, b)]));
        }
    }
    rows
}

/// Rows of `[X^{Rt}]ᵢⱼ − [X^{Rt}]ᵢᵢ − t̄ᵢⱼ`.
fn lifted_translation_rows(idx: &LiftedIndex, e: &MeasurementEdge) -> Vec<SliceRow> {
    let ri = idx.rot(e.from);
    (0..2)
        .map(|a| SliceRow {
            entries: vec![
                (ri + a, idx.trans(e.to), 1.0),
                (ri + a, idx.trans(e.from), -1.0),
            ],
            offset: e.rel_translation[a],
        })
        .collect()
}

fn identity_blocks(n: usize) -> Vec<FixedBlock> {
    (0..n)
        .map(|i| FixedBlock {
            row: 2 * i,
            col: 2 * i,
            value: DMatrix::identity(2, 2),
        })
        .collect()
}

/// The 1-stage relaxation over `X ∈ S^{3n}`: PSD, identity rotation diagonal
/// blocks and `[X^{tt}]₀₀ = 0` to fix the translation gauge.
pub fn build_onestage(cost: CostKind, graph: &PoseGraph) -> Result<ConicProblem> {
    let [(tk, tf), (rk, rf)] = penalties(cost)?;
    let idx = LiftedIndex::new(graph.n);
    let mut p = ConicProblem::new(idx.dim(), Cone::Psd);
    for e in &graph.edges {
        p.terms.push(PenaltyTerm {
            kind: tk,
            weight: tf * e.w_t,
            rows: lifted_translation_rows(&idx, e),
        });
        p.terms.push(PenaltyTerm {
            kind: rk,
            weight: rf * e.w_r,
            rows: rotation_rows(&idx, e),
        });
    }
    p.fixed_blocks = identity_blocks(graph.n);
    p.anchor_zeros.push((idx.trans(0), idx.trans(0)));
    Ok(p)
}

/// The rotation-stage relaxation over `X^{RR} ∈ S^{2n}`.
pub fn build_rotation_stage(cost: CostKind, graph: &PoseGraph) -> Result<ConicProblem> {
    let [_, (rk, rf)] = penalties(cost)?;
    let idx = LiftedIndex::new(graph.n);
    let mut p = ConicProblem::new(2 * graph.n, Cone::Psd);
    for e in &graph.edges {
        p.terms.push(PenaltyTerm {
            kind: rk,
            weight: rf * e.w_r,
            rows: rotation_rows(&idx, e),
        });
    }
    p.fixed_blocks = identity_blocks(graph.n);
    Ok(p)
}

/// The translation-stage problem over the stacked translations
/// `[t₀; …; tₙ₋₁] ∈ R^{2n}` with `t₀ = 0`.
pub fn build_translation_stage(
    cost: CostKind,
    graph: &PoseGraph,
    rotations: &[Rotation2],
) -> Result<ConicProblem> {
    if rotations.len() != graph.n {
        return Err(Error::LengthMismatch {
            expected: graph.n,
            got: rotations.len(),
        });
    }
    let [(tk, tf), _] = penalties(cost)?;
    let mut p = ConicProblem::new(2 * graph.n, Cone::Free);
    for e in &graph.edges {
        // Rᵢᵀ(tⱼ − tᵢ) − t̄, component a = Σ_b Rᵢ[b][a] (tⱼ[b] − tᵢ[b]) − t̄[a]
        let r = rotations[e.from].matrix();
        let rows = (0..2)
            .map(|a| {
                let mut entries = Vec::with_capacity(4);
                for b in 0..2 {
                    entries.push((2 * e.to + b, 0, r[(b, a)]));
                    entries.push((2 * e.from + b, 0, -r[(b, a)]));
                }
                SliceRow {
                    entries,
                    offset: e.rel_translation[a],
                }
            })
            .collect();
        p.terms.push(PenaltyTerm {
            kind: tk,
            weight: tf * e.w_t,
            rows,
        });
    }
    p.anchor_zeros = vec![(0, 0), (1, 0)];
    Ok(p)
}

/// Root-mean-square measured translation length, used to bring the
/// translation part of a lifted problem to unit scale. 1 for graphs with no
/// translation content.
pub fn translation_scale(graph: &PoseGraph) -> f64 {
    if graph.edges.is_empty() {
        return 1.0;
    }
    let ms = graph
        .edges
        .iter()
        .map(|e| e.rel_translation.norm_squared())
        .sum::<f64>()
        / graph.edges.len() as f64;
    if ms > 0.0 && ms.is_finite() {
        ms.sqrt()
    } else {
        1.0
    }
}

/// The same graph in units of `scale`: translations divided, translation
/// weights multiplied, so every cost is unchanged.
pub fn rescaled(graph: &PoseGraph, scale: f64) -> PoseGraph {
    let mut g = graph.clone();
    for e in &mut g.edges {
        e.rel_translation /= scale;
        e.w_t *= scale;
    }
    g.ground_truth = None;
    g
}

/// Solves the 1-stage relaxation in rescaled translation units and maps the
/// solution back. The objective is invariant under the rescaling.
pub fn solve_onestage(
    cost: CostKind,
    graph: &PoseGraph,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let s = translation_scale(graph);
    let scaled = build_onestage(cost, &rescaled(graph, s))?;
    let mut report = sdp::solve(&scaled, opts);
    let t0 = 2 * graph.n;
    let dim = report.x_hat.nrows();
    for r in 0..dim {
        for c in 0..dim {
            let k = (r >= t0) as i32 + (c >= t0) as i32;
            report.x_hat[(r, c)] *= s.powi(k);
        }
    }
    report.eigenvalues = sdp::symmetric_eigenvalues(&report.x_hat);
    report.objective = build_onestage(cost, graph)?.objective(&report.x_hat);
    Ok(report)
}

/// Solves the rotation-stage relaxation.
pub fn solve_rotation_stage(
    cost: CostKind,
    graph: &PoseGraph,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    Ok(sdp::solve(&build_rotation_stage(cost, graph)?, opts))
}

#[derive(Debug, Clone)]
pub struct TranslationSolution {
    pub translations: Vec<Vector2<f64>>,
    pub report: SolveReport,
}

/// Solves the translation stage with the rotations fixed.
pub fn solve_translations(
    cost: CostKind,
    graph: &PoseGraph,
    rotations: &[Rotation2],
    opts: &SolveOptions,
) -> Result<TranslationSolution> {
    let s = translation_scale(graph);
    let p = build_translation_stage(cost, &rescaled(graph, s), rotations)?;
    let mut report = sdp::solve(&p, opts);
    report.x_hat *= s;
    report.objective = build_translation_stage(cost, graph, rotations)?.objective(&report.x_hat);
    let translations = (0..graph.n)
        .map(|i| Vector2::new(report.x_hat[(2 * i, 0)], report.x_hat[(2 * i + 1, 0)]))
        .collect();
    Ok(TranslationSolution {
        translations,
        report,
    })
}

//! Pose-domain objectives: the standard quadratic cost and the three robust
//! costs (unsquared ℓ2, ℓ1, Huber).

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{Pose2, Rotation2};
use crate::posegraph::{MeasurementEdge, PoseGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    Quadratic,
    L2,
    L1,
    Huber,
}

impl CostKind {
    pub const ROBUST: [CostKind; 3] = [CostKind::L1, CostKind::L2, CostKind::Huber];

    pub fn name(&self) -> &'static str {
        match self {
            CostKind::Quadratic => "quadratic",
            CostKind::L2 => "l2",
            CostKind::L1 => "l1",
            CostKind::Huber => "huber",
        }
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "quadratic" => Ok(CostKind::Quadratic),
            "l2" => Ok(CostKind::L2),
            "l1" => Ok(CostKind::L1),
            "huber" => Ok(CostKind::Huber),
            _ => Err(Error::Config(format!("unknown cost {s:?}"))),
        }
    }
}

/// Huber loss with unit knee: `x²` for `|x| ≤ 1`, `2|x| − 1` otherwise.
pub fn huber(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        a * a
    } else {
        2.0 * a - 1.0
    }
}

/// Per-edge residuals `r_t = Rᵢᵀ(tⱼ − tᵢ) − t̄ᵢⱼ` and `r_R = RᵢᵀRⱼ − R̄ᵢⱼ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeResidual {
    pub r_t: Vector2<f64>,
    pub r_r: Matrix2<f64>,
}

pub fn edge_residual(edge: &MeasurementEdge, poses: &[Pose2]) -> EdgeResidual {
    let (pi, pj) = (&poses[edge.from], &poses[edge.to]);
    EdgeResidual {
        r_t: translation_residual(edge, &pi.rotation, &pi.translation, &pj.translation),
        r_r: rotation_residual(edge, &pi.rotation, &pj.rotation),
    }
}

pub fn translation_residual(
    edge: &MeasurementEdge,
    ri: &Rotation2,
    ti: &Vector2<f64>,
    tj: &Vector2<f64>,
) -> Vector2<f64> {
    ri.inverse_rotate(&(tj - ti)) - edge.rel_translation
}

pub fn rotation_residual(edge: &MeasurementEdge, ri: &Rotation2, rj: &Rotation2) -> Matrix2<f64> {
    ri.between(rj).matrix() - edge.rel_rotation.matrix()
}

/// Translation part of one edge's cost.
pub fn translation_term(kind: CostKind, w_t: f64, r_t: &Vector2<f64>) -> f64 {
    match kind {
        CostKind::Quadratic => w_t * w_t * r_t.norm_squared(),
        CostKind::L2 => w_t * r_t.norm(),
        CostKind::L1 => w_t * r_t.lp_norm(1),
        CostKind::Huber => huber(w_t * r_t.norm()),
    }
}

/// Rotation part of one edge's cost.
pub fn rotation_term(kind: CostKind, w_r: f64, r_r: &Matrix2<f64>) -> f64 {
    match kind {
        CostKind::Quadratic => 0.5 * w_r * w_r * r_r.norm_squared(),
        CostKind::L2 => w_r / SQRT_2 * r_r.norm(),
        CostKind::L1 => 0.5 * w_r * r_r.lp_norm(1),
        CostKind::Huber => huber(w_r * r_r.norm()),
    }
}

/// Full pose objective `Σ f_t(r_t) + f_R(r_R)`.
pub fn eval_cost(kind: CostKind, graph: &PoseGraph, poses: &[Pose2]) -> f64 {
    graph
        .edges
        .iter()
        .map(|e| {
            let r = edge_residual(e, poses);
            translation_term(kind, e.w_t, &r.r_t) + rotation_term(kind, e.w_r, &r.r_r)
        })
        .sum()
}

/// Rotation-only objective `Σ f_R(RᵢᵀRⱼ − R̄ᵢⱼ)`.
pub fn eval_rotation_cost(kind: CostKind, graph: &PoseGraph, rotations: &[Rotation2]) -> f64 {
    graph
        .edges
        .iter()
        .map(|e| {
            rotation_term(
                kind,
                e.w_r,
                &rotation_residual(e, &rotations[e.from], &rotations[e.to]),
            )
        })
        .sum()
}

/// Translation-only objective with rotations held fixed.
pub fn eval_translation_cost(
    kind: CostKind,
    graph: &PoseGraph,
    rotations: &[Rotation2],
    translations: &[Vector2<f64>],
) -> f64 {
    graph
        .edges
        .iter()
        .map(|e| {
            let r = translation_residual(
                e,
                &rotations[e.from],
                &translations[e.from],
                &translations[e.to],
            );
            translation_term(kind, e.w_t, &r)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, ScenarioConfig};
    use proptest::prelude::*;

    fn single_edge_graph(r_t: Vector2<f64>) -> (PoseGraph, Vec<Pose2>) {
        // poses at identity; measurement chosen so that r_t = −t̄
        let e = MeasurementEdge::new(0, 1, Pose2::new(Rotation2::identity(), -r_t), 1.0, 1.0);
        (PoseGraph::new(2, vec![e]), vec![Pose2::identity(); 2])
    }

    #[test]
    fn huber_branches() {
        assert_eq!(huber(0.5), 0.25);
        assert_eq!(huber(1.0), 1.0);
        assert_eq!(huber(3.0), 5.0);
        assert_eq!(huber(-3.0), 5.0);
    }

    #[test]
    fn huber_is_c1_at_knee() {
        let h = 1e-7;
        let left = (huber(1.0) - huber(1.0 - h)) / h;
        let right = (huber(1.0 + h) - huber(1.0)) / h;
        assert!((left - 2.0).abs() < 1e-5 && (right - 2.0).abs() < 1e-5);
    }

    #[test]
    fn residual_examples() {
        let e = MeasurementEdge::new(0, 1, Pose2::identity(), 1.0, 1.0);
        let r = edge_residual(&e, &[Pose2::identity(); 2]);
        assert_eq!(r.r_t, Vector2::zeros());
        assert_eq!(r.r_r, Matrix2::zeros());

        let e = MeasurementEdge::new(
            0,
            1,
            Pose2::new(Rotation2::identity(), Vector2::new(1.0, 0.0)),
            1.0,
            1.0,
        );
        let poses = [
            Pose2::identity(),
            Pose2::new(Rotation2::identity(), Vector2::new(1.0, 0.0)),
        ];
        assert_eq!(edge_residual(&e, &poses).r_t, Vector2::zeros());
    }

    #[test]
    fn residual_matches_angle_rederivation() {
        // Independent scalar re-derivation with explicit cos/sin.
        let g = generate(
            &ScenarioConfig::erdos_renyi(5, 0.8)
                .with_outliers(0.3)
                .with_seed(4),
        )
        .unwrap();
        let gt = g.ground_truth.clone().unwrap();
        let poses: Vec<Pose2> = gt
            .iter()
            .enumerate()
            .map(|(k, p)| {
                Pose2::from_xy_theta(
                    p.translation.x + 0.1 * k as f64,
                    p.translation.y - 0.05,
                    p.rotation.angle() + 0.02 * k as f64,
                )
                .unwrap()
            })
            .collect();
        for e in &g.edges {
            let r = edge_residual(e, &poses);
            let (ti, tj) = (poses[e.from].translation, poses[e.to].translation);
            let th_i = poses[e.from].rotation.angle();
            let th_j = poses[e.to].rotation.angle();
            let (dx, dy) = (tj.x - ti.x, tj.y - ti.y);
            let ex = th_i.cos() * dx + th_i.sin() * dy - e.rel_translation.x;
            let ey = -th_i.sin() * dx + th_i.cos() * dy - e.rel_translation.y;
            assert!((r.r_t.x - ex).abs() < 1e-12 && (r.r_t.y - ey).abs() < 1e-12);
            let d = th_j - th_i;
            let m = e.rel_rotation.angle();
            let expect = Matrix2::new(
                d.cos() - m.cos(),
                -(d.sin() - m.sin()),
                d.sin() - m.sin(),
                d.cos() - m.cos(),
            );
            assert!((r.r_r - expect).abs().max() < 1e-12);
        }
    }

    #[test]
    fn single_edge_costs() {
        let (g, p) = single_edge_graph(Vector2::new(3.0, 4.0));
        assert!((eval_cost(CostKind::L2, &g, &p) - 5.0).abs() < 1e-12);
        assert!((eval_cost(CostKind::L1, &g, &p) - 7.0).abs() < 1e-12);
        assert!((eval_cost(CostKind::Huber, &g, &p) - 9.0).abs() < 1e-12);
        assert!((eval_cost(CostKind::Quadratic, &g, &p) - 25.0).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_ground_truth_costs_nothing() {
        let g = generate(
            &ScenarioConfig::erdos_renyi(10, 0.5)
                .noiseless()
                .with_seed(1),
        )
        .unwrap();
        let gt = g.ground_truth.clone().unwrap();
        for kind in [
            CostKind::Quadratic,
            CostKind::L2,
            CostKind::L1,
            CostKind::Huber,
        ] {
            assert!(eval_cost(kind, &g, &gt) < 1e-20, "{kind}");
        }
    }

    #[test]
    fn l2_terms_bounded_by_quadratic_terms() {
        // Per term: w‖r‖ ≤ (1 + w²‖r‖²)/2 (AM–GM), and ‖r‖₂ ≤ ‖r‖₁ ≤ √d‖r‖₂.
        let g = generate(
            &ScenarioConfig::erdos_renyi(12, 0.5)
                .with_outliers(0.3)
                .with_seed(8),
        )
        .unwrap();
        let gt = g.ground_truth.clone().unwrap();
        for e in &g.edges {
            let r = edge_residual(e, &gt);
            let l2 = translation_term(CostKind::L2, e.w_t, &r.r_t);
            let q = translation_term(CostKind::Quadratic, e.w_t, &r.r_t);
            assert!(l2 <= 0.5 * (1.0 + q) + 1e-12);
            let l1 = translation_term(CostKind::L1, e.w_t, &r.r_t);
            assert!(l2 <= l1 + 1e-12 && l1 <= SQRT_2 * l2 + 1e-12);
            let rl2 = rotation_term(CostKind::L2, e.w_r, &r.r_r);
            let rq = rotation_term(CostKind::Quadratic, e.w_r, &r.r_r);
            assert!(rl2 <= 0.5 * (1.0 + 2.0 * rq) / SQRT_2 + 1e-9);
        }
    }

    #[test]
    fn huber_equals_quadratic_for_inlier_scale_terms() {
        let w = 2.0;
        let r = Vector2::new(0.2, -0.3);
        assert!(w * r.norm() <= 1.0);
        assert!(
            (translation_term(CostKind::Huber, w, &r)
                - translation_term(CostKind::Quadratic, w, &r))
            .abs()
                < 1e-15
        );
    }

    proptest! {
        #[test]
        fn costs_are_gauge_invariant(seed in 0u64..200, g_angle in -3.1f64..3.1, cx in -20.0f64..20.0, cy in -20.0f64..20.0) {
            let g = generate(&ScenarioConfig::erdos_renyi(8, 0.5).with_outliers(0.25).with_seed(seed)).unwrap();
            let gt = g.ground_truth.clone().unwrap();
            let rot = Rotation2::from_angle(g_angle).unwrap();
            let c = Vector2::new(cx, cy);
            let moved: Vec<Pose2> = gt
                .iter()
                .map(|p| Pose2::new(rot.compose(&p.rotation), rot.rotate(&p.translation) + c))
                .collect();
            for kind in [CostKind::Quadratic, CostKind::L2, CostKind::L1, CostKind::Huber] {
                let a = eval_cost(kind, &g, &gt);
                let b = eval_cost(kind, &g, &moved);
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{} {} {}", kind, a, b);
            }
        }

        #[test]
        fn huber_is_convex(a in -5.0f64..5.0, b in -5.0f64..5.0, s in 0.0f64..1.0) {
            let mid = huber(s * a + (1.0 - s) * b);
            prop_assert!(mid <= s * huber(a) + (1.0 - s) * huber(b) + 1e-12);
        }
    }
}

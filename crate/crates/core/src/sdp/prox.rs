//! Penalty functions and their proximal operators.

use serde::{Deserialize, Serialize};

use crate::costs::huber;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    /// `w‖s‖₂`
    L2Norm,
    /// `w‖s‖₁`
    L1Norm,
    /// `h(w‖s‖₂)`
    HuberOfL2,
    /// `h(w‖S‖_F)`; a 2×2 slice is stored as 4 entries, so this is the same
    /// function as [`PenaltyKind::HuberOfL2`] on the flattened slice.
    HuberOfFrobenius,
    /// `w‖S‖_F`
    FrobeniusNorm,
}

impl PenaltyKind {
    pub fn eval(&self, w: f64, s: &[f64]) -> f64 {
        match self {
            PenaltyKind::L1Norm => w * s.iter().map(|v| v.abs()).sum::<f64>(),
            PenaltyKind::L2Norm | PenaltyKind::FrobeniusNorm => w * norm2(s),
            PenaltyKind::HuberOfL2 | PenaltyKind::HuberOfFrobenius => huber(w * norm2(s)),
        }
    }

    fn is_radial(&self) -> bool {
        !matches!(self, PenaltyKind::L1Norm)
    }
}

pub(crate) fn norm2(s: &[f64]) -> f64 {
    s.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Scalar prox of `x ↦ h(w·x)` on `x ≥ 0` at `a ≥ 0` with step `t`.
///
/// Quadratic branch: `x = a / (1 + 2tw²)`, valid while `w·x ≤ 1`, i.e.
/// `a ≤ (1 + 2tw²)/w`. Beyond that point the linear branch gives
/// `x = a − 2tw`.
fn huber_radial(a: f64, w: f64, t: f64) -> f64 {
    let knee = (1.0 + 2.0 * t * w * w) / w;
    if a <= knee {
        a / (1.0 + 2.0 * t * w * w)
    } else {
        a - 2.0 * t * w
    }
}

/// `argmin_u penalty(u) + ‖u − v‖² / (2t)`, written into `out`.
pub fn prox_into(kind: PenaltyKind, w: f64, t: f64, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(v.len(), out.len());
    if kind.is_radial() {
        let a = norm2(v);
        if a == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let r = match kind {
            PenaltyKind::L2Norm | PenaltyKind::FrobeniusNorm => (a - t * w).max(0.0),
            _ => huber_radial(a, w, t),
        };
        let scale = r / a;
        for (o, x) in out.iter_mut().zip(v) {
            *o = scale * x;
        }
    } else {
        let thr = t * w;
        for (o, &x) in out.iter_mut().zip(v) {
            *o = x.signum() * (x.abs() - thr).max(0.0);
        }
    }
}

pub fn prox(kind: PenaltyKind, w: f64, t: f64, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    prox_into(kind, w, t, v, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn l2_shrinkage_example() {
        let p = prox(PenaltyKind::L2Norm, 1.0, 1.0, &[3.0, 4.0]);
        assert!((p[0] - 2.4).abs() < 1e-15 && (p[1] - 3.2).abs() < 1e-15);
        assert_eq!(
            prox(PenaltyKind::L2Norm, 1.0, 1.0, &[0.3, 0.4]),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn l1_soft_threshold_example() {
        assert_eq!(
            prox(PenaltyKind::L1Norm, 1.0, 0.5, &[0.2, -1.0]),
            vec![0.0, -0.5]
        );
    }

    /// Brute-force oracle: minimize the prox objective along the ray through
    /// `v` (the minimizer of a radial penalty lies on it) over a fine grid,
    /// then refine with a second, narrower grid.
    fn radial_grid_oracle(kind: PenaltyKind, w: f64, t: f64, v: &[f64]) -> f64 {
        let a = norm2(v);
        let obj = |x: f64| {
            let u: Vec<f64> = v.iter().map(|c| c * x / a).collect();
            let d: f64 = u.iter().zip(v).map(|(p, q)| (p - q) * (p - q)).sum();
            kind.eval(w, &u) + d / (2.0 * t)
        };
        let mut best = 0.0;
        let mut lo = 0.0;
        let mut hi = a;
        for _ in 0..3 {
            let steps = 20_000;
            let h = (hi - lo) / steps as f64;
            let mut bv = f64::INFINITY;
            for k in 0..=steps {
                let x = lo + k as f64 * h;
                let f = obj(x);
                if f < bv {
                    bv = f;
                    best = x;
                }
            }
            lo = (best - 2.0 * h).max(0.0);
            hi = (best + 2.0 * h).min(a);
        }
        best
    }

    #[test]
    fn huber_prox_matches_grid_oracle() {
        let cases: [(f64, f64, [f64; 2]); 6] = [
            (1.0, 1.0, [3.0, 4.0]),
            (2.0, 0.1, [0.3, -0.2]),
            (0.5, 2.0, [10.0, 1.0]),
            (5.0, 0.01, [0.1, 0.1]),
            (1.0, 0.25, [1.2, 0.0]),
            (23.0, 0.02, [0.05, -0.4]),
        ];
        for (w, t, v) in cases {
            let p = prox(PenaltyKind::HuberOfL2, w, t, &v);
            let oracle = radial_grid_oracle(PenaltyKind::HuberOfL2, w, t, &v);
            assert!(
                (norm2(&p) - oracle).abs() < 1e-6,
                "w={w} t={t} v={v:?}: {} vs {oracle}",
                norm2(&p)
            );
        }
    }

    #[test]
    fn frobenius_and_huber_frobenius_match_vector_forms() {
        let v = [0.3, -0.1, 0.7, 0.2];
        assert_eq!(
            prox(PenaltyKind::FrobeniusNorm, 1.5, 0.2, &v),
            prox(PenaltyKind::L2Norm, 1.5, 0.2, &v)
        );
        assert_eq!(
            prox(PenaltyKind::HuberOfFrobenius, 1.5, 0.2, &v),
            prox(PenaltyKind::HuberOfL2, 1.5, 0.2, &v)
        );
    }

    fn kinds() -> impl Strategy<Value = PenaltyKind> {
        prop_oneof![
            Just(PenaltyKind::L2Norm),
            Just(PenaltyKind::L1Norm),
            Just(PenaltyKind::HuberOfL2),
            Just(PenaltyKind::HuberOfFrobenius),
            Just(PenaltyKind::FrobeniusNorm),
        ]
    }

    proptest! {
        #[test]
        fn prox_is_firmly_nonexpansive(
            kind in kinds(),
            w in 0.01f64..30.0,
            t in 0.001f64..10.0,
            u in prop::collection::vec(-20.0f64..20.0, 4),
            v in prop::collection::vec(-20.0f64..20.0, 4),
        ) {
            let pu = prox(kind, w, t, &u);
            let pv = prox(kind, w, t, &v);
            let dp: Vec<f64> = pu.iter().zip(&pv).map(|(a, b)| a - b).collect();
            let d: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
            let inner: f64 = dp.iter().zip(&d).map(|(a, b)| a * b).sum();
            prop_assert!(norm2(&dp) <= norm2(&d) + 1e-9);
            prop_assert!(norm2(&dp).powi(2) <= inner + 1e-9);
        }

        #[test]
        fn huber_prox_matches_oracle_random(
            w in 0.1f64..10.0,
            t in 0.01f64..2.0,
            v in prop::collection::vec(-5.0f64..5.0, 2),
        ) {
            prop_assume!(norm2(&v) > 1e-3);
            let p = prox(PenaltyKind::HuberOfL2, w, t, &v);
            let oracle = radial_grid_oracle(PenaltyKind::HuberOfL2, w, t, &v);
            prop_assert!((norm2(&p) - oracle).abs() < 1e-6);
        }
    }
}

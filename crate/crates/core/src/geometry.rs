//! Planar rotation and pose primitives.
//!
//! Angles are normalized to `(-π, π]` everywhere in the crate.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orthogonality/determinant tolerance for [`Rotation2`] construction.
pub const ROTATION_TOL: f64 = 1e-12;

/// A proper planar rotation, stored as a column-major 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[[f64; 2]; 2]", try_from = "[[f64; 2]; 2]")]
pub struct Rotation2(Matrix2<f64>);

impl Rotation2 {
    pub fn identity() -> Self {
        Rotation2(Matrix2::identity())
    }

    /// Wraps a matrix after checking `R·Rᵀ = I` and `det R = +1`.
    pub fn from_matrix(m: Matrix2<f64>) -> Result<Self> {
        Self::from_matrix_tol(m, ROTATION_TOL)
    }

    pub fn from_matrix_tol(m: Matrix2<f64>, tol: f64) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRotation("non-finite entry".into()));
        }
        let orth = (m * m.transpose() - Matrix2::identity()).abs().max();
        let det = m.determinant();
        if orth > tol || (det - 1.0).abs() > tol {
            return Err(Error::InvalidRotation(format!(
                "orthogonality error {orth:.3e}, det {det}"
            )));
        }
        Ok(Rotation2(m))
    }

    /// Rotation by `theta` radians.
    pub fn from_angle(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::NonFinite("rotation angle"));
        }
        Ok(Self::from_angle_unchecked(theta))
    }

    pub(crate) fn from_angle_unchecked(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Rotation2(Matrix2::new(c, -s, s, c))
    }

    /// Angle in `(-π, π]`.
    pub fn angle(&self) -> f64 {
        wrap_angle(self.0[(1, 0)].atan2(self.0[(0, 0)]))
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation2(self.0.transpose())
    }

    /// `Rᵀ·other`, the rotation of `other` expressed in this frame.
    pub fn between(&self, other: &Rotation2) -> Rotation2 {
        Rotation2(self.0.transpose() * other.0)
    }

    pub fn compose(&self, other: &Rotation2) -> Rotation2 {
        Rotation2(self.0 * other.0)
    }

    pub fn rotate(&self, v: &Vector2<f64>) -> Vector2<f64> {
        self.0 * v
    }

    pub fn inverse_rotate(&self, v: &Vector2<f64>) -> Vector2<f64> {
        self.0.tr_mul(v)
    }
}

impl Default for Rotation2 {
    fn default() -> Self {
        Self::identity()
    }
}

impl From<Rotation2> for [[f64; 2]; 2] {
    fn from(r: Rotation2) -> Self {
        let m = r.0;
        [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
    }
}

impl TryFrom<[[f64; 2]; 2]> for Rotation2 {
    type Error = Error;

    fn try_from(rows: [[f64; 2]; 2]) -> Result<Self> {
        // Serialized values round-trip exactly, but hand-written files may
        // carry fewer digits.
        Rotation2::from_matrix_tol(
            Matrix2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1]),
            1e-9,
        )
    }
}

/// A planar pose `(R, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub rotation: Rotation2,
    pub translation: Vector2<f64>,
}

impl Pose2 {
    pub fn new(rotation: Rotation2, translation: Vector2<f64>) -> Self {
        Pose2 {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Pose2::new(Rotation2::identity(), Vector2::zeros())
    }

    pub fn from_xy_theta(x: f64, y: f64, theta: f64) -> Result<Self> {
        Ok(Pose2::new(
            Rotation2::from_angle(theta)?,
            Vector2::new(x, y),
        ))
    }

    /// Relative pose of `other` in this frame: `(Rᵢᵀ Rⱼ, Rᵢᵀ (tⱼ − tᵢ))`.
    pub fn between(&self, other: &Pose2) -> Pose2 {
        Pose2::new(
            self.rotation.between(&other.rotation),
            self.rotation
                .inverse_rotate(&(other.translation - self.translation)),
        )
    }

    /// `(Rᵀ, −Rᵀt)`.
    pub fn inverse(&self) -> Pose2 {
        Pose2::new(
            self.rotation.transpose(),
            -self.rotation.inverse_rotate(&self.translation),
        )
    }

    /// Applies the relative pose `rel` expressed in this frame.
    pub fn compose(&self, rel: &Pose2) -> Pose2 {
        Pose2::new(
            self.rotation.compose(&rel.rotation),
            self.translation + self.rotation.rotate(&rel.translation),
        )
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut a = theta % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

pub fn rot_from_angle(theta: f64) -> Result<Rotation2> {
    Rotation2::from_angle(theta)
}

pub fn angle_from_rot(r: &Rotation2) -> f64 {
    r.angle()
}

/// Result of projecting a matrix onto SO(2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub rotation: Rotation2,
    /// Set when the minimizer is not unique (equal singular values with a
    /// negative determinant).
    pub degenerate: bool,
}

/// Frobenius-nearest rotation to `m`.
///
/// Uses the SVD `M = U Σ Vᵀ` and returns `U diag(1, det(U Vᵀ)) Vᵀ`. In 2D this
/// reduces to normalizing the "rotation part" `(a + d, c − b)` of `M`, which is
/// what is computed here; the two agree whenever the minimizer is unique.
pub fn project_to_so2(m: &Matrix2<f64>) -> Result<Projection> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix to project"));
    }
    // M = [[a, b], [c, d]]; ⟨R(θ), M⟩ = (a + d) cos θ + (c − b) sin θ.
    let p = m[(0, 0)] + m[(1, 1)];
    let q = m[(1, 0)] - m[(0, 1)];
    let norm = p.hypot(q);
    let scale = m.abs().max().max(f64::MIN_POSITIVE);
    if norm <= 1e-14 * scale {
        // M is a scaled reflection (or zero): every rotation is equidistant.
        // Fall back to the SVD candidate.
        let svd = m.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut d = Matrix2::identity();
        d[(1, 1)] = (u * vt).determinant().signum();
        let r = u * d * vt;
        let theta = r[(1, 0)].atan2(r[(0, 0)]);
        return Ok(Projection {
            rotation: Rotation2::from_angle_unchecked(theta),
            degenerate: true,
        });
    }
    Ok(Projection {
        rotation: Rotation2::from_angle_unchecked(q.atan2(p)),
        degenerate: false,
    })
}

/// `‖Ra − Rb‖_F`, equal to `2√2 |sin((α − β)/2)|`.
pub fn frobenius_rot_distance(a: &Rotation2, b: &Rotation2) -> f64 {
    (a.matrix() - b.matrix()).norm()
}

/// Frobenius residual corresponding to an angular error of `eta` radians.
pub fn angle_to_frobenius(eta: f64) -> f64 {
    2.0 * std::f64::consts::SQRT_2 * (eta / 2.0).sin().abs()
}

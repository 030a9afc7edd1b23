//! Planar rigid motions: the group SE(2), its Lie algebra se(2) and the dual
//! space of momenta.
//!
//! Algebra vectors and covectors are stored as `Vector3<f64>` in the order
//! `(x, y, theta)`. A body velocity `xi` satisfies `g_dot = g * xi`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element of se(2): `(vx, vy, vtheta)`.
pub type AlgebraVector = Vector3<f64>;

/// Element of se(2)*: `(px, py, ptheta)`.
pub type Covector = Vector3<f64>;

/// Below this rotation angle `exp`/`log` switch to series expansions.
const SMALL_ANGLE: f64 = 1e-6;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// A planar pose.
///
/// Values built through [`GroupElement::new`] keep `theta` in `(-pi, pi]`.
/// Integration code works with [`GroupElement::raw`] so that headings can
/// accumulate past a full turn; call [`GroupElement::wrapped`] when storing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Default for GroupElement {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl GroupElement {
    pub const IDENTITY: Self = Self { x: 0.0, y: 0.0, theta: 0.0 };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: wrap_angle(theta) }
    }

    /// Pose without angle wrapping.
    pub const fn raw(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn wrapped(self) -> Self {
        Self::new(self.x, self.y, self.theta)
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.theta)
    }

    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        Self::new(m[(0, 2)], m[(1, 2)], m[(1, 0)].atan2(m[(0, 0)]))
    }

    /// Homogeneous 3x3 representation.
    pub fn matrix(self) -> Matrix3<f64> {
        let (s, c) = self.theta.sin_cos();
        Matrix3::new(c, -s, self.x, s, c, self.y, 0.0, 0.0, 1.0)
    }

    /// Group product `self * other`. Headings add without wrapping.
    pub fn compose(self, other: Self) -> Self {
        let (s, c) = self.theta.sin_cos();
        Self::raw(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(self) -> Self {
        let (s, c) = self.theta.sin_cos();
        Self::raw(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.theta)
    }

    /// `Ad_g`: maps a body velocity at `g` to the corresponding spatial velocity.
    pub fn adjoint(self) -> Matrix3<f64> {
        let (s, c) = self.theta.sin_cos();
        Matrix3::new(c, -s, self.y, s, c, -self.x, 0.0, 0.0, 1.0)
    }

    /// `Ad_g^{-1} = Ad_{g^{-1}}`.
    pub fn inverse_adjoint(self) -> Matrix3<f64> {
        self.inverse().adjoint()
    }

    /// Matrix of `Ad*_g = Ad_g^T`, converting spatial momentum to body momentum.
    pub fn dual_adjoint_matrix(self) -> Matrix3<f64> {
        self.adjoint().transpose()
    }

    pub fn dual_adjoint(self, p_spatial: &Covector) -> Covector {
        self.dual_adjoint_matrix() * p_spatial
    }

    /// Inverse of [`dual_adjoint`](Self::dual_adjoint): body momentum back to spatial.
    pub fn spatial_momentum(self, p_body: &Covector) -> Covector {
        self.inverse().adjoint().transpose() * p_body
    }

    /// Element-wise distance after wrapping the heading difference.
    pub fn distance(self, other: Self) -> f64 {
        let d = Vector3::new(self.x - other.x, self.y - other.y, wrap_angle(self.theta - other.theta));
        d.norm()
    }
}

/// Hat map into the 3x3 matrix Lie algebra.
pub fn hat(xi: &AlgebraVector) -> Matrix3<f64> {
    Matrix3::new(0.0, -xi[2], xi[0], xi[2], 0.0, xi[1], 0.0, 0.0, 0.0)
}

/// Matrix commutator `[xi, eta] = xi^ eta^ - eta^ xi^` read back as a vector.
///
/// With this sign the group commutator
/// `exp(e xi) exp(e eta) exp(-e xi) exp(-e eta)` equals `exp(e^2 [xi, eta]) + O(e^3)`.
pub fn lie_bracket(xi: &AlgebraVector, eta: &AlgebraVector) -> AlgebraVector {
    Vector3::new(
        xi[1] * eta[2] - eta[1] * xi[2],
        eta[0] * xi[2] - xi[0] * eta[2],
        0.0,
    )
}

/// Matrix of `ad_eta`, so that `ad(eta) * xi = [eta, xi]`.
pub fn ad_matrix(eta: &AlgebraVector) -> Matrix3<f64> {
    Matrix3::new(0.0, -eta[2], eta[1], eta[2], 0.0, -eta[0], 0.0, 0.0, 0.0)
}

/// Group exponential of `xi * dt`.
pub fn exp(xi: &AlgebraVector, dt: f64) -> GroupElement {
    let w = xi[2] * dt;
    let vx = xi[0] * dt;
    let vy = xi[1] * dt;
    let (a, b) = if w.abs() < SMALL_ANGLE {
        let w2 = w * w;
        (1.0 - w2 / 6.0 + w2 * w2 / 120.0, w / 2.0 - w * w2 / 24.0)
    } else {
        (w.sin() / w, 2.0 * (0.5 * w).sin().powi(2) / w)
    };
    GroupElement::raw(a * vx - b * vy, b * vx + a * vy, w)
}

/// Group logarithm, the inverse of `exp(., 1)` for headings in `(-pi, pi)`.
pub fn log(g: GroupElement) -> Result<AlgebraVector> {
    let w = g.theta;
    if (w.abs() - PI).abs() < 1e-15 || w.abs() > PI {
        return Err(Error::LogBranch(w));
    }
    let a = if w.abs() < SMALL_ANGLE {
        1.0 - w * w / 12.0
    } else {
        0.5 * w * (0.5 * w).cos() / (0.5 * w).sin()
    };
    let hw = 0.5 * w;
    Ok(Vector3::new(a * g.x + hw * g.y, -hw * g.x + a * g.y, w))
}

/// Pairing between a covector and an algebra vector.
pub fn pairing(p: &Covector, xi: &AlgebraVector) -> f64 {
    p.dot(xi)
}

/// Inverse right-trivialized differential of `exp`, truncated for a
/// fourth-order Munthe-Kaas step: solves `Omega_dot` from `xi` when
/// `g = g0 exp(Omega)` and `g_dot = g xi`.
pub(crate) fn dexp_inv(omega: &AlgebraVector, xi: &AlgebraVector) -> AlgebraVector {
    let b1 = lie_bracket(omega, xi);
    let b2 = lie_bracket(omega, &b1);
    xi + 0.5 * b1 + b2 / 12.0
}

/// One fourth-order Runge-Kutta-Munthe-Kaas step of `g_dot = g xi(t, g)`.
///
/// The heading of the result is not wrapped.
pub fn rkmk4_step(
    g: GroupElement,
    t: f64,
    h: f64,
    mut f: impl FnMut(f64, GroupElement) -> AlgebraVector,
) -> GroupElement {
    let k1 = f(t, g);
    let o1 = 0.5 * h * k1;
    let k2 = dexp_inv(&o1, &f(t + 0.5 * h, g.compose(exp(&o1, 1.0))));
    let o2 = 0.5 * h * k2;
    let k3 = dexp_inv(&o2, &f(t + 0.5 * h, g.compose(exp(&o2, 1.0))));
    let o3 = h * k3;
    let k4 = dexp_inv(&o3, &f(t + h, g.compose(exp(&o3, 1.0))));
    let omega = h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    g.compose(exp(&omega, 1.0))
}

//! Lifted connection over (shape, drift time) and its constraint curvature.
//!
//! With conserved momentum the reconstruction equation becomes
//! `xi = -[A1 A2 A3] (a1_dot, a2_dot, 1)` with `A3 = -A_p(r, g) p`, a
//! connection on the lifted base `(alpha1, alpha2, tau)`. Its curvature
//! `D(-A)` has three components, one per coordinate plane of the lifted base.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::connection::ShapeGrid;
use crate::linkage::Shape;
use crate::se2::{ad_matrix, lie_bracket, AlgebraVector, Covector, GroupElement};

/// Point of the lifted base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiftedBase {
    pub alpha1: f64,
    pub alpha2: f64,
    pub tau: f64,
}

impl LiftedBase {
    pub fn shape(&self) -> Shape {
        Shape::new(self.alpha1, self.alpha2)
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.alpha1, self.alpha2, self.tau)
    }
}

/// Columns of the lifted connection at one `(r, g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedConnection {
    pub columns: [AlgebraVector; 3],
}

impl LiftedConnection {
    /// Body velocity for a lifted-base velocity `(a1_dot, a2_dot, tau_dot)`.
    pub fn body_velocity(&self, q_dot: &Vector3<f64>) -> AlgebraVector {
        -(self.columns[0] * q_dot[0] + self.columns[1] * q_dot[1] + self.columns[2] * q_dot[2])
    }
}

/// The three components of `D(-A)` at one `(r, g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcfSample {
    pub d12: AlgebraVector,
    pub d1t: AlgebraVector,
    pub d2t: AlgebraVector,
}

impl CcfSample {
    /// Evaluates the 2-form on a pair of lifted-base vectors.
    pub fn contract(&self, u: &Vector3<f64>, v: &Vector3<f64>) -> AlgebraVector {
        self.d12 * (u[0] * v[1] - u[1] * v[0])
            + self.d1t * (u[0] * v[2] - u[2] * v[0])
            + self.d2t * (u[1] * v[2] - u[2] * v[1])
    }

    /// Component `(i, j)` with `0, 1, 2 = alpha1, alpha2, tau`.
    pub fn component(&self, i: usize, j: usize) -> AlgebraVector {
        let mut u = Vector3::zeros();
        let mut v = Vector3::zeros();
        u[i] = 1.0;
        v[j] = 1.0;
        self.contract(&u, &v)
    }
}

/// `A3 = -Minv(r) Ad*_g p`.
fn drift_column(mgg_inv: &Matrix3<f64>, g: GroupElement, p: &Covector) -> AlgebraVector {
    -(mgg_inv * g.dual_adjoint(p))
}

pub fn lifted_connection(grid: &ShapeGrid, r: Shape, g: GroupElement, p: &Covector) -> LiftedConnection {
    let s = grid.interpolate(r);
    LiftedConnection {
        columns: [s.a.column(0).into_owned(), s.a.column(1).into_owned(), drift_column(&s.mgg_inv, g, p)],
    }
}

/// Curvature of the lifted connection at `(r, g)` for spatial momentum `p`,
/// in the grid's working frame.
///
/// Derivatives are taken in the original frame; a shape-dependent change of
/// body frame `beta(r)` maps the curvature by `Ad_{beta^-1}`.
pub fn ccf(grid: &ShapeGrid, r: Shape, g: GroupElement, p: &Covector) -> CcfSample {
    let beta = grid.interpolate_beta(r);
    let d = original_ccf(grid, r, g.compose(beta.inverse()), p);
    let ad = beta.inverse_adjoint();
    CcfSample { d12: ad * d.d12, d1t: ad * d.d1t, d2t: ad * d.d2t }
}

/// Curvature in the original body frame at original-frame pose `g`.
pub fn original_ccf(grid: &ShapeGrid, r: Shape, g: GroupElement, p: &Covector) -> CcfSample {
    let s = grid.interpolate_original(r);
    let d = grid.interpolate_original_derivatives(r);
    let a1 = s.a.column(0).into_owned();
    let a2 = s.a.column(1).into_owned();
    let d_a12 = d.da[0].column(1) - d.da[1].column(0);
    let d12 = -d_a12 + lie_bracket(&a1, &a2);

    let p_body = g.dual_adjoint(p);
    let a3 = -(s.mgg_inv * p_body);
    // Fiber derivative of A3 along a body direction eta.
    let fiber = |eta: &AlgebraVector| -(s.mgg_inv * (ad_matrix(eta).transpose() * p_body));
    let tau_component = |k: usize, ak: &AlgebraVector| {
        let d_a3 = -(d.dmgg_inv[k] * p_body);
        -d_a3 + lie_bracket(ak, &a3) + fiber(ak)
    };
    CcfSample { d12, d1t: tau_component(0, &a1), d2t: tau_component(1, &a2) }
}

/// Curvature at every grid node, evaluated at the identity pose.
#[derive(Debug, Clone)]
pub struct CcfField {
    pub resolution: usize,
    pub samples: Vec<CcfSample>,
}

pub fn ccf_grid_snapshot(grid: &ShapeGrid, p: &Covector) -> CcfField {
    let samples = (0..grid.layout().len())
        .map(|idx| ccf(grid, grid.node_shape(idx), GroupElement::IDENTITY, p))
        .collect();
    CcfField { resolution: grid.resolution(), samples }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::{local_connection, Coordinates};
    use crate::linkage::{mirror_matrix, SystemModel};
    use crate::se2::{log, rkmk4_step, exp};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;
    use std::sync::OnceLock;

    fn snake_grid() -> &'static ShapeGrid {
        static G: OnceLock<ShapeGrid> = OnceLock::new();
        G.get_or_init(|| ShapeGrid::new(&SystemModel::snake()).unwrap())
    }

    fn swimmer_grid() -> &'static ShapeGrid {
        static G: OnceLock<ShapeGrid> = OnceLock::new();
        G.get_or_init(|| ShapeGrid::new(&SystemModel::swimmer()).unwrap())
    }

    /// Integrates the lifted reconstruction along a closed polygon in the
    /// lifted base and returns the displacement as an algebra vector.
    fn loop_displacement(grid: &ShapeGrid, corners: &[Vector3<f64>], g0: GroupElement, p: &Covector) -> AlgebraVector {
        let steps = 200;
        let mut g = g0;
        for w in 0..corners.len() {
            let a = corners[w];
            let b = corners[(w + 1) % corners.len()];
            let dq = b - a;
            for i in 0..steps {
                let s0 = i as f64 / steps as f64;
                g = rkmk4_step(g, s0, 1.0 / steps as f64, |s, gg| {
                    let q = a + dq * s;
                    lifted_connection(grid, Shape::new(q[0], q[1]), gg, p).body_velocity(&dq)
                });
            }
        }
        log(g0.inverse().compose(g)).unwrap()
    }

    /// Stokes ratio for an eps-square in plane (i, j) centered at `center`,
    /// with the displacement carried to the frame at the loop center.
    fn stokes_error(grid: &ShapeGrid, center: Vector3<f64>, g0: GroupElement, p: &Covector, i: usize, j: usize, eps: f64) -> f64 {
        let mut ei = Vector3::zeros();
        let mut ej = Vector3::zeros();
        ei[i] = eps;
        ej[j] = eps;
        let start = center - 0.5 * (ei + ej);
        let corners = [start, start + ei, start + ei + ej, start + ej];
        let disp = loop_displacement(grid, &corners, g0, p);
        let rc = Shape::new(center[0], center[1]);
        let w = start - center;
        let k = exp(&lifted_connection(grid, rc, g0, p).body_velocity(&w), 1.0);
        let g_center = g0.compose(k.inverse());
        // Linearized transport of the displacement from the start to the
        // center, including the pose dependence of the drift column.
        let fiber = w[2] * grid.interpolate(rc).mgg_inv * (ad_matrix(&disp).transpose() * g0.dual_adjoint(p));
        let seen = k.adjoint() * disp - fiber;
        let expected = ccf(grid, Shape::new(center[0], center[1]), g_center, p).component(i, j) * eps * eps;
        (seen - expected).norm() / expected.norm()
    }

    #[test]
    fn zero_momentum_has_no_tau_components() {
        let c = ccf(snake_grid(), Shape::new(0.4, 2.2), GroupElement::new(1.0, 2.0, 0.3), &Vector3::zeros());
        assert_eq!(c.d1t, Vector3::zeros());
        assert_eq!(c.d2t, Vector3::zeros());
    }

    #[test]
    fn lifted_connection_matches_reconstruction() {
        let grid = swimmer_grid();
        let r = Shape::new(0.7, -1.1);
        let g = GroupElement::new(0.2, 0.5, -2.0);
        let p = Vector3::new(0.3, -0.4, 0.8);
        let rd = nalgebra::Vector2::new(0.9, 0.35);
        let lc = lifted_connection(grid, r, g, &p);
        let direct = grid.interpolate(r).body_velocity(&rd, g, &p);
        let lifted = lc.body_velocity(&Vector3::new(rd[0], rd[1], 1.0));
        assert!((direct - lifted).norm() < 1e-12);
        // fixed shape: pure drift
        let drift = lc.body_velocity(&Vector3::new(0.0, 0.0, 1.0));
        assert!((drift - grid.interpolate(r).momentum_distribution(g) * p).norm() < 1e-14);
        // zero momentum reduces to the kinematic part
        let lc0 = lifted_connection(grid, r, g, &Vector3::zeros());
        assert_eq!(lc0.columns[2], Vector3::zeros());
    }

    #[test]
    fn tau_components_are_linear_in_momentum() {
        let grid = snake_grid();
        let r = Shape::new(2.5, 3.9);
        let g = GroupElement::new(-0.3, 0.8, 1.2);
        let p = Vector3::new(0.2, 0.1, 0.9);
        let a = ccf(grid, r, g, &p);
        let b = ccf(grid, r, g, &(2.0 * p));
        assert!((b.d1t - 2.0 * a.d1t).norm() < 1e-14 * b.d1t.norm().max(1.0));
        assert!((b.d2t - 2.0 * a.d2t).norm() < 1e-14 * b.d2t.norm().max(1.0));
        assert_eq!(a.d12, b.d12);
    }

    #[test]
    fn two_form_is_antisymmetric() {
        let c = ccf(snake_grid(), Shape::new(1.0, 2.0), GroupElement::IDENTITY, &Vector3::new(0.0, 0.0, 1.0));
        for i in 0..3 {
            assert_eq!(c.component(i, i), Vector3::zeros());
            for j in 0..3 {
                assert_eq!(c.component(i, j), -c.component(j, i));
            }
        }
    }

    #[test]
    fn shape_plane_stokes_converges() {
        let grid = swimmer_grid();
        let center = Vector3::new(0.6, -0.4, 0.0);
        let errs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&e| stokes_error(grid, center, GroupElement::IDENTITY, &Vector3::zeros(), 0, 1, e))
            .collect();
        assert!(errs[0] < 0.05, "{errs:?}");
        assert!(errs[0] / errs[1] > 3.0 && errs[1] / errs[2] > 3.0, "{errs:?}");
    }

    #[test]
    fn drift_plane_stokes_converges() {
        let grid = snake_grid();
        let g0 = GroupElement::new(0.5, -0.3, 0.4);
        let p = Vector3::new(0.3, -0.2, 1.0);
        for (i, center) in [(0, Vector3::new(2.0, 2.6, 0.0)), (1, Vector3::new(1.2, 4.0, 0.0))] {
            let errs: Vec<f64> = [0.2, 0.1, 0.05]
                .iter()
                .map(|&e| stokes_error(grid, center, g0, &p, i, 2, e))
                .collect();
            assert!(errs[0] < 0.05, "{errs:?}");
            assert!(errs[0] / errs[1] > 3.0 && errs[1] / errs[2] > 3.0, "{errs:?}");
        }
    }

    #[test]
    fn zero_momentum_shape_component_is_kinematic() {
        // Same result from a grid carrying only the original connection.
        let model = SystemModel::swimmer();
        let grid = ShapeGrid::build(&model, 64, Coordinates::Original).unwrap();
        let r = Shape::new(0.9, 2.1);
        let h = 1e-5;
        let a = |r: Shape| local_connection(&model, r).unwrap().a;
        let da2_d1 = (a(Shape::new(r.alpha1 + h, r.alpha2)) - a(Shape::new(r.alpha1 - h, r.alpha2))) / (2.0 * h);
        let da1_d2 = (a(Shape::new(r.alpha1, r.alpha2 + h)) - a(Shape::new(r.alpha1, r.alpha2 - h))) / (2.0 * h);
        let s = a(r);
        let expected = -(da2_d1.column(1) - da1_d2.column(0))
            + lie_bracket(&s.column(0).into_owned(), &s.column(1).into_owned());
        let got = ccf(&grid, r, GroupElement::IDENTITY, &Vector3::zeros()).d12;
        assert!((got - expected).norm() < 2e-4, "{got} vs {expected}");
    }

    #[test]
    fn swimmer_forward_curvature_is_mirror_antisymmetric() {
        let grid = swimmer_grid();
        let snap = ccf_grid_snapshot(grid, &Vector3::zeros());
        let layout = grid.layout();
        let s = mirror_matrix();
        for (i, j) in [(3, 11), (20, 7), (40, 50)] {
            let a = snap.samples[layout.index(i, j)].d12;
            let b = snap.samples[layout.index(j, i)].d12;
            // swapping the joints reverses loop orientation and mirrors x
            assert_relative_eq!(b, -(s * a), epsilon = 1e-9);
        }
    }

    #[test]
    fn snake_rotation_tau_field_circulates_about_center() {
        let grid = snake_grid();
        let p = Vector3::new(0.0, 0.0, 1.0);
        let mut circulation = 0.0;
        let m = 64;
        let rad = 0.8;
        for k in 0..m {
            let phi = 2.0 * PI * k as f64 / m as f64;
            let r = Shape::new(PI + rad * phi.cos(), PI + rad * phi.sin());
            let c = ccf(grid, r, GroupElement::IDENTITY, &p);
            let tangent = (-phi.sin(), phi.cos());
            circulation += c.d1t[2] * tangent.0 + c.d2t[2] * tangent.1;
        }
        assert!(circulation > 0.0, "circulation {circulation}");
    }

    #[test]
    fn grid_resolution_convergence() {
        let fine = ShapeGrid::build(&SystemModel::swimmer(), 128, Coordinates::MinimumPerturbation).unwrap();
        let coarse = swimmer_grid();
        for r in [Shape::new(0.3, 0.5), Shape::new(2.0, -1.0), Shape::new(4.0, 1.0)] {
            let a = ccf(coarse, r, GroupElement::IDENTITY, &Vector3::zeros()).d12;
            let b = ccf(&fine, r, GroupElement::IDENTITY, &Vector3::zeros()).d12;
            assert!((a - b).abs().max() < 1e-4, "{a} vs {b}");
        }
    }
}

//! Three-link serial chains: geometry, forward kinematics, and the
//! shape-dependent generalized inertia matrix (with optional potential-flow
//! added mass for links immersed in an ideal fluid).
//!
//! The original body frame is the middle link. Joint `alpha1` connects the
//! rear link, joint `alpha2` the front link; the swap `(alpha1, alpha2) ->
//! (alpha2, alpha1)` is the reflection `x -> -x` of the chain.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, Matrix3x2, SMatrix, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se2::GroupElement;

/// Position-space direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    X,
    Y,
    Theta,
}

impl Direction {
    pub fn index(self) -> usize {
        match self {
            Direction::X => 0,
            Direction::Y => 1,
            Direction::Theta => 2,
        }
    }

    pub fn unit(self) -> Vector3<f64> {
        let mut v = Vector3::zeros();
        v[self.index()] = 1.0;
        v
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::X => "x",
            Direction::Y => "y",
            Direction::Theta => "theta",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Direction::X),
            "y" => Ok(Direction::Y),
            "theta" | "θ" => Ok(Direction::Theta),
            other => Err(Error::InvalidArgument(format!("unknown direction '{other}'"))),
        }
    }
}

/// Joint angles of a two-joint chain.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Shape {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl Shape {
    pub const fn new(alpha1: f64, alpha2: f64) -> Self {
        Self { alpha1, alpha2 }
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.alpha1, self.alpha2)
    }

    pub fn from_vector(v: &Vector2<f64>) -> Self {
        Self::new(v[0], v[1])
    }

    pub fn swapped(self) -> Self {
        Self::new(self.alpha2, self.alpha1)
    }

    /// Shortest distance on the periodic torus.
    pub fn torus_distance(self, other: Shape) -> f64 {
        let d = |a: f64, b: f64| crate::se2::wrap_angle(a - b).abs();
        d(self.alpha1, other.alpha1).hypot(d(self.alpha2, other.alpha2))
    }

    #[cfg(test)]
    pub(crate) fn get(self, k: usize) -> f64 {
        if k == 0 {
            self.alpha1
        } else {
            self.alpha2
        }
    }

    #[cfg(test)]
    pub(crate) fn with(self, k: usize, value: f64) -> Self {
        if k == 0 {
            Self::new(value, self.alpha2)
        } else {
            Self::new(self.alpha1, value)
        }
    }
}

/// An elliptical link. Semi-axes are `length / 2` and `length * aspect_ratio / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkGeometry {
    pub length: f64,
    pub aspect_ratio: f64,
    pub body_density: f64,
    /// Zero disables added mass.
    pub fluid_density: f64,
}

impl LinkGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidGeometry(format!("length must be > 0, got {}", self.length)));
        }
        if !(self.aspect_ratio > 0.0 && self.aspect_ratio <= 1.0) {
            return Err(Error::InvalidGeometry(format!(
                "aspect_ratio must be in (0, 1], got {}",
                self.aspect_ratio
            )));
        }
        if !(self.body_density >= 0.0 && self.fluid_density >= 0.0) {
            return Err(Error::InvalidGeometry("densities must be >= 0".into()));
        }
        if self.body_density == 0.0 && self.fluid_density == 0.0 {
            return Err(Error::InvalidGeometry("link has no inertia".into()));
        }
        Ok(())
    }

    fn semi_axes(&self) -> (f64, f64) {
        let a = 0.5 * self.length;
        (a, a * self.aspect_ratio)
    }
}

/// Local inertia of one link about its center, in the link frame:
/// `diag(m + m_ax, m + m_ay, J + J_a)`.
pub fn link_inertia(geom: &LinkGeometry) -> Matrix3<f64> {
    let (a, b) = geom.semi_axes();
    let m = geom.body_density * PI * a * b;
    let rot = m * (a * a + b * b) / 4.0;
    let rf = geom.fluid_density;
    let m_ax = rf * PI * b * b;
    let m_ay = rf * PI * a * a;
    let j_a = rf * PI / 8.0 * (a * a - b * b).powi(2);
    Matrix3::from_diagonal(&Vector3::new(m + m_ax, m + m_ay, rot + j_a))
}

/// Generalized inertia split into position, coupling and shape blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaMatrix {
    pub gg: Matrix3<f64>,
    pub gr: Matrix3x2<f64>,
    pub rr: Matrix2<f64>,
}

impl InertiaMatrix {
    pub fn full(&self) -> SMatrix<f64, 5, 5> {
        let mut m = SMatrix::<f64, 5, 5>::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.gg);
        m.fixed_view_mut::<3, 2>(0, 3).copy_from(&self.gr);
        m.fixed_view_mut::<2, 3>(3, 0).copy_from(&self.gr.transpose());
        m.fixed_view_mut::<2, 2>(3, 3).copy_from(&self.rr);
        m
    }

    /// `1/2 [xi; r_dot]^T M [xi; r_dot]`.
    pub fn kinetic_energy(&self, xi: &Vector3<f64>, r_dot: &Vector2<f64>) -> f64 {
        0.5 * (xi.dot(&(self.gg * xi)) + 2.0 * xi.dot(&(self.gr * r_dot)) + r_dot.dot(&(self.rr * r_dot)))
    }

    pub fn is_positive_definite(&self) -> bool {
        self.full().cholesky().is_some()
    }
}

/// Per-link Jacobian from `(xi, r_dot)` to the link's body velocity.
pub type LinkJacobian = SMatrix<f64, 3, 5>;

/// A serial chain of exactly three links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemModel {
    pub name: String,
    pub links: Vec<LinkGeometry>,
}

impl SystemModel {
    pub fn new(name: impl Into<String>, links: Vec<LinkGeometry>) -> Result<Self> {
        let model = Self { name: name.into(), links };
        model.validate()?;
        Ok(model)
    }

    /// Three unit-length links in a unit-density ideal fluid.
    pub fn swimmer() -> Self {
        let link = LinkGeometry { length: 1.0, aspect_ratio: 0.1, body_density: 1.0, fluid_density: 1.0 };
        Self { name: "swimmer".into(), links: vec![link; 3] }
    }

    /// Free-floating chain whose middle link is twice as long as the arms.
    pub fn snake() -> Self {
        let arm = LinkGeometry { length: 1.0, aspect_ratio: 0.1, body_density: 1.0, fluid_density: 0.0 };
        let center = LinkGeometry { length: 2.0, ..arm };
        Self { name: "snake".into(), links: vec![arm, center, arm] }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "swimmer" => Ok(Self::swimmer()),
            "snake" => Ok(Self::snake()),
            other => Err(Error::InvalidArgument(format!("unknown system preset '{other}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.links.len() != 3 {
            return Err(Error::InvalidGeometry(format!(
                "expected 3 links (2 joints), got {}",
                self.links.len()
            )));
        }
        self.links.iter().try_for_each(LinkGeometry::validate)
    }

    /// True when no link carries added mass (inertia is isotropic in translation).
    pub fn has_fluid(&self) -> bool {
        self.links.iter().any(|l| l.fluid_density > 0.0)
    }

    /// Poses of the rear, middle and front links in the middle-link frame.
    pub fn forward_kinematics(&self, r: Shape) -> [GroupElement; 3] {
        let half = |i: usize| 0.5 * self.links[i].length;
        let rear = GroupElement::raw(-half(1), 0.0, 0.0)
            .compose(GroupElement::raw(0.0, 0.0, -r.alpha1))
            .compose(GroupElement::raw(-half(0), 0.0, 0.0));
        let front = GroupElement::raw(half(1), 0.0, 0.0)
            .compose(GroupElement::raw(0.0, 0.0, r.alpha2))
            .compose(GroupElement::raw(half(2), 0.0, 0.0));
        [rear, GroupElement::IDENTITY, front]
    }

    /// Link Jacobians `[Ad_{h_i^-1} | B_i]`.
    pub fn link_jacobians(&self, r: Shape) -> [LinkJacobian; 3] {
        let poses = self.forward_kinematics(r);
        let mut out = [LinkJacobian::zeros(); 3];
        for (i, (j, h)) in out.iter_mut().zip(poses.iter()).enumerate() {
            j.fixed_view_mut::<3, 3>(0, 0).copy_from(&h.inverse_adjoint());
            let half = 0.5 * self.links[i].length;
            match i {
                0 => j.set_column(3, &Vector3::new(0.0, half, -1.0)),
                2 => j.set_column(4, &Vector3::new(0.0, half, 1.0)),
                _ => {}
            }
        }
        out
    }

    /// Generalized inertia `M(r) = sum_i J_i^T m_i J_i`.
    pub fn inertia_matrix(&self, r: Shape) -> InertiaMatrix {
        let jac = self.link_jacobians(r);
        let mut full = SMatrix::<f64, 5, 5>::zeros();
        for (j, link) in jac.iter().zip(&self.links) {
            let m = link_inertia(link);
            full += j.transpose() * m * j;
        }
        InertiaMatrix {
            gg: full.fixed_view::<3, 3>(0, 0).into_owned(),
            gr: full.fixed_view::<3, 2>(0, 3).into_owned(),
            rr: full.fixed_view::<2, 2>(3, 3).into_owned(),
        }
    }

    /// Shape derivatives `(dM/d alpha1, dM/d alpha2)`.
    pub fn inertia_derivatives(&self, r: Shape) -> [InertiaMatrix; 2] {
        let jac = self.link_jacobians(r);
        let half = |i: usize| 0.5 * self.links[i].length;
        let translate = |x: f64| GroupElement::raw(x, 0.0, 0.0).adjoint();
        let d_rot = |phi: f64| {
            let (s, c) = phi.sin_cos();
            Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
        };
        // Only the rear link moves with alpha1 and only the front with alpha2.
        let d_ad = [
            translate(half(0)) * d_rot(r.alpha1) * translate(half(1)),
            -(translate(-half(2)) * d_rot(-r.alpha2) * translate(-half(1))),
        ];
        let links = [0, 2];
        [0, 1].map(|k| {
            let i = links[k];
            let m = link_inertia(&self.links[i]);
            let mut dj = LinkJacobian::zeros();
            dj.fixed_view_mut::<3, 3>(0, 0).copy_from(&d_ad[k]);
            let t = dj.transpose() * m * jac[i];
            let full = t + t.transpose();
            InertiaMatrix {
                gg: full.fixed_view::<3, 3>(0, 0).into_owned(),
                gr: full.fixed_view::<3, 2>(0, 3).into_owned(),
                rr: full.fixed_view::<2, 2>(3, 3).into_owned(),
            }
        })
    }

    /// [`inertia_matrix`](Self::inertia_matrix), failing loudly if it is not positive definite.
    pub fn checked_inertia_matrix(&self, r: Shape) -> Result<InertiaMatrix> {
        let m = self.inertia_matrix(r);
        if m.is_positive_definite() {
            Ok(m)
        } else {
            Err(Error::NotPositiveDefinite(r.alpha1, r.alpha2))
        }
    }

    /// Offset of the generalized center of mass in the middle-link frame:
    /// link centers weighted by body mass plus mean added mass.
    pub fn generalized_center(&self, r: Shape) -> Vector2<f64> {
        let mut acc = Vector2::zeros();
        let mut total = 0.0;
        for (l, h) in self.links.iter().zip(self.forward_kinematics(r)) {
            let (a, b) = l.semi_axes();
            let w = PI * (l.body_density * a * b + 0.5 * l.fluid_density * (a * a + b * b));
            acc += w * Vector2::new(h.x, h.y);
            total += w;
        }
        acc / total
    }

    pub fn total_mass(&self) -> f64 {
        self.links
            .iter()
            .map(|l| {
                let (a, b) = l.semi_axes();
                l.body_density * PI * a * b
            })
            .sum()
    }
}

/// Point `d` such that the locked inertia re-expressed at `d` has no
/// translation/rotation coupling.
pub fn generalized_center_of(gg: &Matrix3<f64>) -> Vector2<f64> {
    let v = gg.fixed_view::<2, 2>(0, 0).into_owned();
    let c = Vector2::new(gg[(0, 2)], gg[(1, 2)]);
    let s = -v.try_inverse().expect("translational inertia is singular") * c;
    Vector2::new(-s[1], s[0])
}

/// Reflection `x -> -x` acting on body velocities (and momenta).
pub fn mirror_matrix() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, -1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ellipse_added_mass_oracle(a: f64, b: f64, rho: f64) -> (f64, f64, f64) {
        // Potential flow around an ellipse via the Joukowski map: the kinetic
        // energy of the fluid equals -rho/2 * closed integral of phi dphi/dn, evaluated
        // numerically from the exact complex potentials for unit motions.
        let n = 20_000;
        let (mut tx, mut ty, mut tr) = (0.0, 0.0, 0.0);
        for k in 0..n {
            let eta = 2.0 * PI * (k as f64 + 0.5) / n as f64;
            let deta = 2.0 * PI / n as f64;
            let (x, y) = (a * eta.cos(), b * eta.sin());
            // outward normal times arc length element
            let (nx, ny) = (b * eta.cos() * deta, a * eta.sin() * deta);
            // Elliptic-coordinate potentials on the boundary (Lamb, Hydrodynamics 71-72).
            let phi_x = -b * eta.cos();
            let phi_y = -a * eta.sin();
            let phi_r = -0.25 * (a + b).powi(2) * (2.0 * eta).sin() * (a - b) / (a + b);
            tx += -phi_x * nx;
            ty += -phi_y * ny;
            tr += -phi_r * (x * ny - y * nx);
        }
        (rho * tx, rho * ty, rho * tr)
    }

    #[test]
    fn link_mass_without_fluid() {
        let g = LinkGeometry { length: 1.0, aspect_ratio: 0.1, body_density: 1.0, fluid_density: 0.0 };
        let m = link_inertia(&g);
        assert_relative_eq!(m[(0, 0)], PI * 0.5 * 0.05, epsilon = 1e-15);
        assert_relative_eq!(m[(0, 0)], 0.078_539_816_339_744_83, epsilon = 1e-15);
        assert_eq!(m[(0, 0)], m[(1, 1)]);
    }

    #[test]
    fn circle_added_mass_is_isotropic() {
        let g = LinkGeometry { length: 1.0, aspect_ratio: 1.0, body_density: 1.0, fluid_density: 2.0 };
        let m = link_inertia(&g);
        assert_relative_eq!(m[(0, 0)], m[(1, 1)], epsilon = 1e-15);
        let body_j = PI * 0.25 * (0.25 + 0.25) / 4.0;
        assert_relative_eq!(m[(2, 2)], body_j, epsilon = 1e-15);
    }

    #[test]
    fn swimmer_link_matches_surface_integral() {
        let g = SystemModel::swimmer().links[0];
        let m = link_inertia(&g);
        let (a, b) = (0.5, 0.05);
        let body = PI * a * b;
        let (mx, my, mr) = ellipse_added_mass_oracle(a, b, 1.0);
        assert_relative_eq!(m[(0, 0)] - body, mx, max_relative = 1e-6);
        assert_relative_eq!(m[(1, 1)] - body, my, max_relative = 1e-6);
        assert_relative_eq!(m[(2, 2)] - body * (a * a + b * b) / 4.0, mr, max_relative = 1e-6);
        // frozen values
        assert_relative_eq!(m[(0, 0)], 0.086_393_797_973_719_31, epsilon = 1e-14);
        assert_relative_eq!(m[(1, 1)], 0.863_937_979_737_193_1, epsilon = 1e-14);
        assert_relative_eq!(m[(2, 2)], 0.029_013_099_029_753_86, epsilon = 1e-14);
    }

    #[test]
    fn straight_and_folded_kinematics() {
        let snake = SystemModel::snake();
        let p = snake.forward_kinematics(Shape::new(0.0, 0.0));
        assert_relative_eq!(p[0].to_vector(), Vector3::new(-1.5, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(p[2].to_vector(), Vector3::new(1.5, 0.0, 0.0), epsilon = 1e-15);
        let f = snake.forward_kinematics(Shape::new(PI, PI));
        assert_relative_eq!(f[0].x, -0.5, epsilon = 1e-15);
        assert_relative_eq!(f[2].x, 0.5, epsilon = 1e-15);
        assert!(f[0].y.abs() < 1e-15 && f[2].y.abs() < 1e-15);
        assert_relative_eq!(f[2].wrapped().theta.abs(), PI, epsilon = 1e-15);
    }

    #[test]
    fn kinematics_matches_matrix_chain() {
        let m = SystemModel::swimmer();
        let r = Shape::new(0.3, -0.7);
        let t = |x: f64| GroupElement::raw(x, 0.0, 0.0).matrix();
        let rot = |a: f64| GroupElement::raw(0.0, 0.0, a).matrix();
        let rear = t(-0.5) * rot(-0.3) * t(-0.5);
        let front = t(0.5) * rot(-0.7) * t(0.5);
        let p = m.forward_kinematics(r);
        assert!((p[0].matrix() - rear).abs().max() < 1e-15);
        assert!((p[2].matrix() - front).abs().max() < 1e-15);
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let m = SystemModel::snake();
        let r = Shape::new(0.8, -1.9);
        let jac = m.link_jacobians(r);
        let h = 1e-6;
        for k in 0..2 {
            let plus = m.forward_kinematics(r.with(k, r.get(k) + h));
            let minus = m.forward_kinematics(r.with(k, r.get(k) - h));
            let base = m.forward_kinematics(r);
            for i in 0..3 {
                let d = base[i].inverse().compose(plus[i]).to_vector()
                    - base[i].inverse().compose(minus[i]).to_vector();
                let col = d / (2.0 * h);
                assert!((col - jac[i].column(3 + k)).norm() < 1e-8, "link {i} joint {k}");
            }
        }
    }

    #[test]
    fn floating_snake_mass_block_is_shape_independent() {
        let m = SystemModel::snake();
        let total = m.total_mass();
        for r in [Shape::new(0.0, 0.0), Shape::new(1.0, 2.0), Shape::new(PI, PI), Shape::new(-2.0, 0.4)] {
            let im = m.inertia_matrix(r);
            assert_relative_eq!(im.gg[(0, 0)], total, epsilon = 1e-14);
            assert_relative_eq!(im.gg[(1, 1)], total, epsilon = 1e-14);
            assert!(im.gg[(0, 1)].abs() < 1e-15);
        }
    }

    #[test]
    fn inertia_is_periodic() {
        let m = SystemModel::swimmer();
        let r = Shape::new(0.4, 1.3);
        let a = m.inertia_matrix(r).full();
        let b = m.inertia_matrix(Shape::new(0.4 + 2.0 * PI, 1.3)).full();
        let c = m.inertia_matrix(Shape::new(0.4, 1.3 - 2.0 * PI)).full();
        assert!((a - b).abs().max() < 1e-13);
        assert!((a - c).abs().max() < 1e-13);
    }

    #[test]
    fn generalized_center_is_center_of_mass_without_fluid() {
        let m = SystemModel::snake();
        let r = Shape::new(0.9, -0.3);
        let poses = m.forward_kinematics(r);
        let mut com = Vector2::zeros();
        let mut total = 0.0;
        for (p, l) in poses.iter().zip(&m.links) {
            let mass = link_inertia(l)[(0, 0)];
            com += mass * Vector2::new(p.x, p.y);
            total += mass;
        }
        assert_relative_eq!(m.generalized_center(r), com / total, epsilon = 1e-14);
        assert_relative_eq!(generalized_center_of(&m.inertia_matrix(r).gg), com / total, epsilon = 1e-12);
    }

    #[test]
    fn swimmer_center_is_link_centroid() {
        let m = SystemModel::swimmer();
        let r = Shape::new(0.7, 1.1);
        let c = m.forward_kinematics(r).iter().fold(Vector2::zeros(), |a, p| a + Vector2::new(p.x, p.y)) / 3.0;
        assert_relative_eq!(m.generalized_center(r), c, epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_geometry() {
        let bad = LinkGeometry { length: 0.0, aspect_ratio: 0.1, body_density: 1.0, fluid_density: 0.0 };
        assert!(SystemModel::new("bad", vec![bad; 3]).is_err());
        let ok = SystemModel::swimmer().links[0];
        assert!(SystemModel::new("two", vec![ok; 2]).is_err());
        let flat = LinkGeometry { aspect_ratio: 1.5, ..ok };
        assert!(flat.validate().is_err());
    }

    #[test]
    fn inertia_derivatives_match_finite_differences() {
        for model in [SystemModel::swimmer(), SystemModel::snake()] {
            let r = Shape::new(0.8, -2.3);
            let d = model.inertia_derivatives(r);
            let h = 1e-6;
            for k in 0..2 {
                let mut rp = r;
                let mut rm = r;
                if k == 0 {
                    rp.alpha1 += h;
                    rm.alpha1 -= h;
                } else {
                    rp.alpha2 += h;
                    rm.alpha2 -= h;
                }
                let fd = (model.inertia_matrix(rp).full() - model.inertia_matrix(rm).full()) / (2.0 * h);
                assert!((fd - d[k].full()).abs().max() < 1e-8, "{}", (fd - d[k].full()).abs().max());
            }
        }
    }

    fn arb_shape() -> impl Strategy<Value = Shape> {
        (-PI..PI, -PI..PI).prop_map(|(a, b)| Shape::new(a, b))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn inertia_symmetric_positive_definite(r in arb_shape(), swim in any::<bool>()) {
            let m = if swim { SystemModel::swimmer() } else { SystemModel::snake() };
            let full = m.inertia_matrix(r).full();
            prop_assert!((full - full.transpose()).abs().max() < 1e-14);
            let eig = full.symmetric_eigenvalues();
            prop_assert!(eig.min() > 0.0);
        }

        #[test]
        fn energy_matches_link_sum(r in arb_shape(),
                                   xi in prop::array::uniform3(-1.0..1.0f64),
                                   rd in prop::array::uniform2(-1.0..1.0f64)) {
            let m = SystemModel::swimmer();
            let xi = Vector3::from(xi);
            let rd = Vector2::from(rd);
            let ke = m.inertia_matrix(r).kinetic_energy(&xi, &rd);
            // Link velocities by finite differences of world link poses along
            // g(t) = exp(t xi), r(t) = r + t r_dot.
            let h = 1e-5;
            let pose = |t: f64| {
                let g = crate::se2::exp(&xi, t);
                let rr = Shape::new(r.alpha1 + t * rd[0], r.alpha2 + t * rd[1]);
                m.forward_kinematics(rr).map(|p| g.compose(p))
            };
            let (p0, pp, pm) = (pose(0.0), pose(h), pose(-h));
            let mut sum = 0.0;
            for i in 0..3 {
                let v = (p0[i].inverse().compose(pp[i]).to_vector()
                    - p0[i].inverse().compose(pm[i]).to_vector()) / (2.0 * h);
                sum += 0.5 * v.dot(&(link_inertia(&m.links[i]) * v));
            }
            prop_assert!((ke - sum).abs() <= 1e-8 * ke.max(1e-3));
        }

        #[test]
        fn mirror_symmetry(r in arb_shape()) {
            let m = SystemModel::swimmer();
            let a = m.inertia_matrix(r);
            let b = m.inertia_matrix(r.swapped());
            let s = mirror_matrix();
            let swap = Matrix2::new(0.0, 1.0, 1.0, 0.0);
            prop_assert!((s * a.gg * s - b.gg).abs().max() < 1e-10);
            prop_assert!((s * a.gr * swap - b.gr).abs().max() < 1e-10);
            prop_assert!((swap * a.rr * swap - b.rr).abs().max() < 1e-10);
        }
    }
}

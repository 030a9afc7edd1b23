//! Exact-trajectory oracle: integrates the reconstruction equation with
//! momentum drift and recovers the joint torques that drive the gait.
//!
//! Integration runs in the original body frame with the reconstruction
//! evaluated from the model's inertia (smooth in shape, so the fourth-order
//! integrator keeps its order), and poses are reported in the grid's working
//! frame through `g = g_original * beta(r)`. Torques come from the Euler-Lagrange shape
//! equations in full coordinates, `u = d/dt(p_r) - 1/2 z^T dM/dr z` with
//! `z = [xi; r_dot]`, evaluated in closed form along the trajectory.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::connection::ShapeGrid;
use crate::error::{Error, Result};
use crate::gait::Gait;
use crate::linkage::{Direction, InertiaMatrix, Shape, SystemModel};
use crate::se2::{ad_matrix, log, rkmk4_step, Covector, GroupElement};

pub const DEFAULT_STEPS: usize = 400;
pub const MIN_STEPS: usize = 16;

/// A periodic shape trajectory with position, velocity and acceleration.
pub trait ShapePath {
    fn period(&self) -> f64;
    fn sample(&self, t: f64) -> (Shape, Vector2<f64>, Vector2<f64>);
}

impl ShapePath for Gait {
    fn period(&self) -> f64 {
        self.period
    }

    fn sample(&self, t: f64) -> (Shape, Vector2<f64>, Vector2<f64>) {
        self.evaluate_full(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub shape: Shape,
    pub shape_velocity: Vector2<f64>,
    /// Pose in the working frame; heading not wrapped.
    pub pose: GroupElement,
    /// Pose of the middle link.
    pub original_pose: GroupElement,
    /// Body velocity in the working frame.
    pub body_velocity: Vector3<f64>,
    pub shape_momentum: Vector2<f64>,
    pub force: Vector2<f64>,
    pub kinetic_energy: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub period: f64,
    pub momentum: Covector,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn step_size(&self) -> f64 {
        self.period / self.steps() as f64
    }

    /// Net displacement over the run, in the working frame of the first sample.
    pub fn displacement(&self) -> GroupElement {
        let first = self.samples.first().expect("empty trajectory").pose;
        let last = self.samples.last().expect("empty trajectory").pose;
        first.inverse().compose(last)
    }
}

/// Per-cycle result of a gait at a momentum level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitOutcome {
    pub displacement: GroupElement,
    /// `displacement / T` per fiber direction.
    pub velocity: [f64; 3],
    pub effort: f64,
}

impl GaitOutcome {
    pub fn velocity_along(&self, d: Direction) -> f64 {
        self.velocity[d.index()]
    }
}

/// Instantaneous shape dynamics at one state.
#[derive(Debug, Clone, Copy)]
pub struct ShapeDynamics {
    /// Body velocity of the middle link.
    pub body_velocity: Vector3<f64>,
    pub shape_momentum: Vector2<f64>,
    pub force: Vector2<f64>,
    pub kinetic_energy: f64,
}

fn block_combination(d: &[InertiaMatrix; 2], w: &Vector2<f64>) -> InertiaMatrix {
    InertiaMatrix {
        gg: d[0].gg * w[0] + d[1].gg * w[1],
        gr: d[0].gr * w[0] + d[1].gr * w[1],
        rr: d[0].rr * w[0] + d[1].rr * w[1],
    }
}

/// Reconstructs the body velocity from conserved momentum and returns the
/// joint torques needed to impose `(r_dot, r_ddot)`.
///
/// `g` is the pose of the middle link and `p` the spatial momentum.
pub fn shape_dynamics(
    model: &SystemModel,
    r: Shape,
    r_dot: &Vector2<f64>,
    r_ddot: &Vector2<f64>,
    g: GroupElement,
    p: &Covector,
) -> Result<ShapeDynamics> {
    let m = model.inertia_matrix(r);
    let dm = model.inertia_derivatives(r);
    let chol = m.gg.cholesky().ok_or(Error::NotPositiveDefinite(r.alpha1, r.alpha2))?;
    let p_body = g.dual_adjoint(p);
    let xi = chol.solve(&(p_body - m.gr * r_dot));
    let m_dot = block_combination(&dm, r_dot);
    let p_body_dot = ad_matrix(&xi).transpose() * p_body;
    let xi_dot = chol.solve(&(p_body_dot - m_dot.gr * r_dot - m.gr * r_ddot - m_dot.gg * xi));
    let shape_momentum = m.gr.transpose() * xi + m.rr * r_dot;
    let shape_momentum_dot =
        m_dot.gr.transpose() * xi + m.gr.transpose() * xi_dot + m_dot.rr * r_dot + m.rr * r_ddot;
    let dl = Vector2::from_fn(|k, _| dm[k].kinetic_energy(&xi, r_dot));
    Ok(ShapeDynamics {
        body_velocity: xi,
        shape_momentum,
        force: shape_momentum_dot - dl,
        kinetic_energy: m.kinetic_energy(&xi, r_dot),
    })
}

/// Body velocity of the middle link from conserved spatial momentum.
pub fn reconstruct(model: &SystemModel, r: Shape, r_dot: &Vector2<f64>, g: GroupElement, p: &Covector) -> Vector3<f64> {
    let m = model.inertia_matrix(r);
    let rhs = g.dual_adjoint(p) - m.gr * r_dot;
    match m.gg.cholesky() {
        Some(c) => c.solve(&rhs),
        None => Vector3::repeat(f64::NAN),
    }
}

fn check_steps(steps: usize) -> Result<()> {
    if steps < MIN_STEPS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_STEPS} integration steps, got {steps}")));
    }
    Ok(())
}

/// Integrates one period of `path` from working-frame pose `g0`.
pub fn integrate_path(
    grid: &ShapeGrid,
    path: &impl ShapePath,
    p: &Covector,
    g0: GroupElement,
    steps: usize,
) -> Result<Trajectory> {
    check_steps(steps)?;
    let period = path.period();
    let h = period / steps as f64;
    let (r0, _, _) = path.sample(0.0);
    let mut g = grid.to_original_pose(r0, g0);
    let model = grid.model();
    let rhs = |t: f64, gg: GroupElement| {
        let (r, rd, _) = path.sample(t);
        reconstruct(model, r, &rd, gg, p)
    };
    let mut samples = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * h;
        let (r, rd, rdd) = path.sample(t);
        let dynamics = shape_dynamics(grid.model(), r, &rd, &rdd, g, p)?;
        // the starting pose is given; skip the round trip through the original frame
        let pose = if k == 0 { g0 } else { grid.to_working_pose(r, g) };
        samples.push(TrajectorySample {
            t,
            shape: r,
            shape_velocity: rd,
            pose,
            original_pose: g,
            body_velocity: grid.interpolate(r).body_velocity(&rd, pose, p),
            shape_momentum: dynamics.shape_momentum,
            force: dynamics.force,
            kinetic_energy: dynamics.kinetic_energy,
        });
        if k < steps {
            g = rkmk4_step(g, t, h, rhs);
        }
        if !g.x.is_finite() || !g.y.is_finite() || !g.theta.is_finite() {
            return Err(Error::Numerical(format!("integration diverged at t = {t}")));
        }
    }
    Ok(Trajectory { period, momentum: *p, samples })
}

/// Integrates one cycle of `gait` at spatial momentum `p` from pose `g0`.
pub fn integrate_gait(grid: &ShapeGrid, gait: &Gait, p: &Covector, g0: GroupElement, steps: usize) -> Result<Trajectory> {
    gait.validate()?;
    integrate_path(grid, gait, p, g0, steps)
}

/// Torque series of an integrated trajectory.
pub fn actuator_forces(trajectory: &Trajectory) -> Vec<Vector2<f64>> {
    trajectory.samples.iter().map(|s| s.force).collect()
}

/// `(1/T) int |u|^2 dt` by the trapezoidal rule over the samples.
pub fn trajectory_effort(trajectory: &Trajectory) -> f64 {
    let s = &trajectory.samples;
    let h = trajectory.step_size();
    let mut sum = 0.0;
    for w in s.windows(2) {
        sum += 0.5 * h * (w[0].force.norm_squared() + w[1].force.norm_squared());
    }
    sum / trajectory.period
}

pub fn outcome(trajectory: &Trajectory) -> GaitOutcome {
    let d = trajectory.displacement();
    let t = trajectory.period;
    GaitOutcome { displacement: d, velocity: [d.x / t, d.y / t, d.theta / t], effort: trajectory_effort(trajectory) }
}

/// Integrates a gait from the identity pose and summarizes the cycle.
pub fn evaluate_gait(grid: &ShapeGrid, gait: &Gait, p: &Covector, steps: usize) -> Result<(Trajectory, GaitOutcome)> {
    let traj = integrate_gait(grid, gait, p, GroupElement::IDENTITY, steps)?;
    let out = outcome(&traj);
    Ok((traj, out))
}

pub fn average_effort(grid: &ShapeGrid, gait: &Gait, p: &Covector, steps: usize) -> Result<f64> {
    Ok(evaluate_gait(grid, gait, p, steps)?.1.effort)
}

/// Fixed-shape drift velocity along `direction` at the identity pose.
pub fn drift_velocity(grid: &ShapeGrid, r: Shape, p: &Covector, direction: Direction) -> f64 {
    (grid.interpolate(r).mgg_inv * p)[direction.index()]
}

/// Largest relative deviation of the spatial momentum recovered from the
/// integrated poses (fifth-order differences of the pose sequence) from `p`.
pub fn momentum_drift(model: &SystemModel, trajectory: &Trajectory) -> f64 {
    let s = &trajectory.samples;
    let h = trajectory.step_size();
    let p = trajectory.momentum;
    let scale = p.norm().max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for k in 2..s.len().saturating_sub(2) {
        let g = s[k].original_pose;
        let rel = |j: usize| log(g.inverse().compose(s[j].original_pose)).expect("step too large for log");
        let xi = (8.0 * (rel(k + 1) - rel(k - 1)) - (rel(k + 2) - rel(k - 2))) / (12.0 * h);
        let m = model.inertia_matrix(s[k].shape);
        let p_body = m.gg * xi + m.gr * s[k].shape_velocity;
        let p_rec = g.spatial_momentum(&p_body);
        worst = worst.max((p_rec - p).norm() / scale);
    }
    worst
}

/// Largest mismatch between the rate of kinetic energy (fourth-order
/// differences) and actuator power `u . r_dot`, relative to the peak power.
pub fn power_balance_error(trajectory: &Trajectory) -> f64 {
    let s = &trajectory.samples;
    let h = trajectory.step_size();
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for k in 2..s.len().saturating_sub(2) {
        let ke = |j: usize| s[j].kinetic_energy;
        let dke = (8.0 * (ke(k + 1) - ke(k - 1)) - (ke(k + 2) - ke(k - 2))) / (12.0 * h);
        let power = s[k].force.dot(&s[k].shape_velocity);
        worst = worst.max((dke - power).abs());
        scale = scale.max(power.abs());
    }
    worst / scale.max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait::ORDER;
    use crate::se2::exp;
    use approx::assert_relative_eq;
    use std::f64::consts::{PI, TAU};
    use std::sync::OnceLock;

    fn snake_grid() -> &'static ShapeGrid {
        static G: OnceLock<ShapeGrid> = OnceLock::new();
        G.get_or_init(|| ShapeGrid::new(&SystemModel::snake()).unwrap())
    }

    fn swimmer_grid() -> &'static ShapeGrid {
        static G: OnceLock<ShapeGrid> = OnceLock::new();
        G.get_or_init(|| ShapeGrid::new(&SystemModel::swimmer()).unwrap())
    }

    fn wiggle() -> Gait {
        let mut g = Gait::circle(Shape::new(0.2, -0.1), 0.6, 3.0).unwrap();
        g.joints[0][2] = 0.15;
        g.joints[1][ORDER + 3] = -0.1;
        g
    }

    #[test]
    fn point_gait_without_momentum_stays_put() {
        let g = Gait::point(Shape::new(1.0, 0.5), 2.0).unwrap();
        let (traj, out) = evaluate_gait(swimmer_grid(), &g, &Vector3::zeros(), DEFAULT_STEPS).unwrap();
        assert_eq!(out.displacement, GroupElement::IDENTITY);
        assert_eq!(out.effort, 0.0);
        assert!(actuator_forces(&traj).iter().all(|u| u.norm() == 0.0));
    }

    #[test]
    fn snake_spins_at_scalar_drift_rate() {
        let grid = snake_grid();
        let l = 0.7;
        let r = Shape::new(PI, PI);
        let g = Gait::point(r, 4.0).unwrap();
        let (_, out) = evaluate_gait(grid, &g, &Vector3::new(0.0, 0.0, l), DEFAULT_STEPS).unwrap();
        let inertia = grid.interpolate(r).locked_inertia()[(2, 2)];
        assert_relative_eq!(out.velocity[2], l / inertia, max_relative = 1e-12);
        assert!(out.displacement.x.abs() < 1e-12 && out.displacement.y.abs() < 1e-12);
        // the rotational inertia at the folded shape is the model's locked value
        let exact = SystemModel::snake().inertia_matrix(r).gg;
        let d = crate::linkage::generalized_center_of(&exact);
        let about_center = exact[(2, 2)] - exact[(0, 0)] * d.norm_squared();
        assert_relative_eq!(inertia, about_center, max_relative = 1e-9);
    }

    #[test]
    fn steps_are_validated() {
        let g = wiggle();
        assert!(integrate_gait(swimmer_grid(), &g, &Vector3::zeros(), GroupElement::IDENTITY, 15).is_err());
    }

    #[test]
    fn momentum_is_conserved_at_fourth_order() {
        let grid = swimmer_grid();
        let p = Vector3::new(0.4, 0.0, 0.0);
        let g = wiggle();
        let d400 = momentum_drift(grid.model(), &integrate_gait(grid, &g, &p, GroupElement::IDENTITY, 400).unwrap());
        let d800 = momentum_drift(grid.model(), &integrate_gait(grid, &g, &p, GroupElement::IDENTITY, 800).unwrap());
        assert!(d400 < 1e-6, "{d400}");
        assert!(d400 / d800 > 12.0, "{d400} {d800}");
    }

    #[test]
    fn time_reversal_inverts_displacement() {
        let grid = swimmer_grid();
        let g = wiggle();
        let (_, fwd) = evaluate_gait(grid, &g, &Vector3::zeros(), DEFAULT_STEPS).unwrap();
        let (_, back) = evaluate_gait(grid, &g.reversed(), &Vector3::zeros(), DEFAULT_STEPS).unwrap();
        assert!(fwd.displacement.compose(back.displacement).distance(GroupElement::IDENTITY) < 1e-8);
        assert!(fwd.displacement.x.abs() > 1e-3);
    }

    struct Repaced {
        gait: Gait,
        eps: f64,
    }

    impl ShapePath for Repaced {
        fn period(&self) -> f64 {
            self.gait.period
        }

        // s(t) = t + eps T/(2 pi) sin(2 pi t / T), a monotone reparameterization.
        fn sample(&self, t: f64) -> (Shape, Vector2<f64>, Vector2<f64>) {
            let w = TAU / self.gait.period;
            let s = t + self.eps / w * (w * t).sin();
            let sd = 1.0 + self.eps * (w * t).cos();
            let sdd = -self.eps * w * (w * t).sin();
            let (r, v, a) = self.gait.evaluate_full(s);
            (r, v * sd, a * sd * sd + v * sdd)
        }
    }

    #[test]
    fn kinematic_displacement_ignores_pacing() {
        let grid = swimmer_grid();
        let g = wiggle();
        let a = integrate_gait(grid, &g, &Vector3::zeros(), GroupElement::IDENTITY, 800).unwrap();
        let path = Repaced { gait: g, eps: 0.5 };
        let b = integrate_path(grid, &path, &Vector3::zeros(), GroupElement::IDENTITY, 800).unwrap();
        assert!(a.displacement().distance(b.displacement()) < 1e-7);
        // pacing does change the effort
        assert!((trajectory_effort(&a) - trajectory_effort(&b)).abs() > 1e-3);
    }

    #[test]
    fn power_balance_holds() {
        for (grid, p) in [(swimmer_grid(), Vector3::new(0.3, 0.0, 0.0)), (snake_grid(), Vector3::new(0.0, 0.0, 0.8))] {
            let traj = integrate_gait(grid, &wiggle(), &p, GroupElement::IDENTITY, 800).unwrap();
            let err = power_balance_error(&traj);
            assert!(err < 1e-3, "{err}");
        }
    }

    #[test]
    fn holding_torque_matches_energy_gradient() {
        // At fixed shape with pure angular momentum the stored energy is
        // E(r) = 1/2 p^T Minv(r) p; holding torque is dE/dr.
        let model = SystemModel::snake();
        let p = Vector3::new(0.0, 0.0, 1.3);
        let r = Shape::new(1.0, 2.0);
        let energy = |r: Shape| 0.5 * p.dot(&(model.inertia_matrix(r).gg.try_inverse().unwrap() * p));
        let d = shape_dynamics(&model, r, &Vector2::zeros(), &Vector2::zeros(), GroupElement::IDENTITY, &p).unwrap();
        let h = 1e-6;
        let fd = Vector2::new(
            (energy(Shape::new(1.0 + h, 2.0)) - energy(Shape::new(1.0 - h, 2.0))) / (2.0 * h),
            (energy(Shape::new(1.0, 2.0 + h)) - energy(Shape::new(1.0, 2.0 - h))) / (2.0 * h),
        );
        assert!(d.force.norm() > 1e-2);
        assert!((d.force - fd).norm() < 1e-8, "{} vs {}", d.force, fd);
    }

    #[test]
    fn effort_grows_when_replayed_faster() {
        let grid = swimmer_grid();
        let g = Gait::circle(Shape::new(0.0, 0.0), 0.5, 5.0).unwrap();
        let slow = average_effort(grid, &g, &Vector3::zeros(), DEFAULT_STEPS).unwrap();
        let fast = average_effort(grid, &g.with_period(2.5).unwrap(), &Vector3::zeros(), DEFAULT_STEPS).unwrap();
        assert!(fast > slow);
        // u scales as 1/T^2 at zero momentum, so effort scales as 1/T^4
        assert_relative_eq!(fast / slow, 16.0, max_relative = 1e-6);
    }

    #[test]
    fn circle_effort_regression() {
        let grid = swimmer_grid();
        let g = Gait::circle(Shape::new(0.0, 0.0), 0.5, 5.0).unwrap();
        let e = average_effort(grid, &g, &Vector3::zeros(), DEFAULT_STEPS).unwrap();
        assert_relative_eq!(e, CIRCLE_EFFORT, max_relative = 1e-9);
    }

    const CIRCLE_EFFORT: f64 = 0.002554729495898687;

    #[test]
    fn drift_velocity_examples() {
        let swim = swimmer_grid();
        let r0 = Shape::new(0.0, 0.0);
        assert_eq!(drift_velocity(swim, r0, &Vector3::zeros(), Direction::X), 0.0);
        let px = 0.9;
        let m = SystemModel::swimmer().inertia_matrix(r0).gg;
        assert_relative_eq!(drift_velocity(swim, r0, &Vector3::new(px, 0.0, 0.0), Direction::X), px / m[(0, 0)], max_relative = 1e-12);
        let snake = snake_grid();
        let a = drift_velocity(snake, Shape::new(PI, PI), &Vector3::new(0.0, 0.0, 1.0), Direction::Theta);
        let b = drift_velocity(snake, Shape::new(PI, PI), &Vector3::new(0.0, 0.0, 3.0), Direction::Theta);
        assert_relative_eq!(b, 3.0 * a, max_relative = 1e-14);
    }

    #[test]
    fn fixed_shape_rotation_is_exact() {
        let grid = snake_grid();
        let p = Vector3::new(0.0, 0.0, 1.0);
        let g = Gait::point(Shape::new(1.0, 2.0), 10.0).unwrap();
        let traj = integrate_gait(grid, &g, &p, GroupElement::IDENTITY, 400).unwrap();
        let start = traj.samples[0].original_pose;
        let xi = reconstruct(grid.model(), Shape::new(1.0, 2.0), &Vector2::zeros(), start, &p);
        let expected = start.compose(exp(&xi, 10.0));
        let err = traj.samples.last().unwrap().original_pose.distance(expected);
        assert!(err < 1e-12, "{err}");
        assert!(momentum_drift(grid.model(), &traj) < 1e-8);
    }
}

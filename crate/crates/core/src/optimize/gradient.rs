//! Displacement gradient from the lifted curvature, effort gradient by
//! central differences.
//!
//! Varying the lifted curve `c(s) = (r(s), s T)`, `s in [0, 1]`, moves the
//! end pose by `eta = Delta^-1 dDelta` with
//!
//! `eta = int_0^1 Phi(1, s) D(dc, c') ds + X(c(1)) dc(1) - Phi(1, 0) X(c(0)) dc(0)`
//!
//! where `X = -A` is the lifted connection, `D = D(-A)` its curvature and
//! `Phi` the propagator of `z' = (-ad_xi + dX3/dg) z` (pure transport by
//! `Ad_{g(1)^-1 g(s)}` when the momentum vanishes). The `dc(1)` tau
//! component `dT` gives the endpoint drift term `X3(end) dT`.

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::curvature::ccf;
use crate::error::Result;
use crate::gait::{Gait, ParamVector, PARAMS, PERIOD_INDEX};
use crate::se2::{ad_matrix, Covector};
use crate::simulate::{average_effort, evaluate_gait, integrate_gait, Trajectory};
use crate::se2::GroupElement;

use super::Problem;

/// Jacobian of the net displacement `(x, y, theta)` over `(coefficients, T)`.
#[derive(Debug, Clone)]
pub struct DisplacementGradient {
    pub displacement: GroupElement,
    pub period: f64,
    pub jacobian: SMatrix<f64, 3, PARAMS>,
}

impl DisplacementGradient {
    /// Gradient of `displacement[d] / T`.
    pub fn velocity_gradient(&self, d: usize) -> ParamVector {
        let t = self.period;
        let mut g: ParamVector = self.jacobian.row(d).transpose() / t;
        g[PERIOD_INDEX] -= self.displacement.to_vector()[d] / (t * t);
        g
    }
}

/// Generator of the linearized fiber equation at one sample.
fn fiber_generator(xi: &Vector3<f64>, mgg_inv: &Matrix3<f64>, p_body: &Covector) -> Matrix3<f64> {
    let mut drift = Matrix3::zeros();
    for k in 0..3 {
        let e = Vector3::ith(k, 1.0);
        drift.set_column(k, &(mgg_inv * (ad_matrix(&e).transpose() * p_body)));
    }
    drift - ad_matrix(xi)
}

/// `Phi(T, t_k)` at every sample, by fourth-order steps over sample pairs.
fn propagators(problem: &Problem, traj: &Trajectory) -> Vec<Matrix3<f64>> {
    let p = problem.momentum_vector();
    let gens: Vec<Matrix3<f64>> = traj
        .samples
        .iter()
        .map(|s| {
            let minv = problem.grid.interpolate(s.shape).mgg_inv;
            fiber_generator(&s.body_velocity, &minv, &s.pose.dual_adjoint(&p))
        })
        .collect();
    let n = gens.len() - 1;
    let h = 2.0 * traj.step_size();
    let mut out = vec![Matrix3::zeros(); n + 1];
    let mut psi = Matrix3::identity();
    out[n] = psi;
    let mut k = n;
    while k >= 2 {
        // d psi / dt = -psi K(t), integrated backwards.
        let (k0, km, k1) = (&gens[k], &gens[k - 1], &gens[k - 2]);
        let f = |m: &Matrix3<f64>, g: &Matrix3<f64>| -(m * g);
        let a = f(&psi, k0);
        let b = f(&(psi - a * (0.5 * h)), km);
        let c = f(&(psi - b * (0.5 * h)), km);
        let d = f(&(psi - c * h), k1);
        psi -= (a + b * 2.0 + c * 2.0 + d) * (h / 6.0);
        k -= 2;
        out[k] = psi;
    }
    out
}

/// Orthonormal normal and binormal of a lifted curve with tangent `v` and
/// acceleration `a`.
fn normal_binormal(v: &Vector3<f64>, a: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let t = v.normalize();
    let mut n = a - t * t.dot(a);
    if n.norm() < 1e-12 * (1.0 + a.norm()) {
        let e = if t[2].abs() < 0.9 { Vector3::z() } else { Vector3::x() };
        n = e - t * t.dot(&e);
    }
    let n = n.normalize();
    (n, t.cross(&n))
}

/// Geometric gradient of the net displacement over `(coefficients, T)`.
pub fn displacement_gradient(problem: &Problem, gait: &Gait) -> Result<DisplacementGradient> {
    let s = &problem.settings;
    let p = problem.momentum_vector();
    let traj = integrate_gait(problem.grid, gait, &p, GroupElement::IDENTITY, s.steps)?;
    let psi = propagators(problem, &traj);
    let n = s.waypoints;
    let stride = s.steps / n;
    let jac = gait.coefficient_jacobian(n)?;
    let t_period = gait.period;

    let mut eta = SMatrix::<f64, 3, PARAMS>::zeros();
    for k in 0..=n {
        let smp = &traj.samples[k * stride];
        let (_, _, acc) = gait.evaluate_full(smp.t);
        let c_dot = Vector3::new(smp.shape_velocity[0], smp.shape_velocity[1], 1.0) * t_period;
        let c_ddot = Vector3::new(acc[0], acc[1], 0.0) * (t_period * t_period);
        let (nrm, bin) = normal_binormal(&c_dot, &c_ddot);
        let d = ccf(problem.grid, smp.shape, smp.pose, &p);
        let w = if k == 0 || k == n { 0.5 / n as f64 } else { 1.0 / n as f64 };
        let flux_n = psi[k * stride] * d.contract(&nrm, &c_dot) * w;
        let flux_b = psi[k * stride] * d.contract(&bin, &c_dot) * w;
        let dc = &jac.base[k];
        eta += flux_n * (nrm.transpose() * dc) + flux_b * (bin.transpose() * dc);
    }

    // Boundary terms: the start shape moves with the loop, and the end
    // advances in tau by dT.
    let first = traj.samples.first().expect("trajectory");
    let last = traj.samples.last().expect("trajectory");
    let a0 = problem.grid.interpolate(first.shape);
    let a1 = problem.grid.interpolate(last.shape);
    let dr0 = jac.base[0].fixed_rows::<2>(0).into_owned();
    eta -= (a1.a - psi[0] * a0.a) * dr0;
    let drift_end = a1.mgg_inv * last.pose.dual_adjoint(&p);
    for i in 0..3 {
        eta[(i, PERIOD_INDEX)] += drift_end[i];
    }

    let delta = traj.displacement();
    let (sn, cs) = delta.theta.sin_cos();
    let mut jacobian = eta;
    for j in 0..PARAMS {
        let (ex, ey) = (eta[(0, j)], eta[(1, j)]);
        jacobian[(0, j)] = cs * ex - sn * ey;
        jacobian[(1, j)] = sn * ex + cs * ey;
    }
    Ok(DisplacementGradient { displacement: delta, period: t_period, jacobian })
}

/// Geometric gradient of the average velocity along the problem direction.
pub fn objective_gradient(problem: &Problem, gait: &Gait) -> Result<ParamVector> {
    Ok(displacement_gradient(problem, gait)?.velocity_gradient(problem.direction.index()))
}

/// Central-difference gradient of the average effort, relative step 1e-5.
pub fn effort_gradient(problem: &Problem, gait: &Gait) -> Result<ParamVector> {
    effort_gradient_masked(problem, gait, &ParamVector::repeat(1.0))
}

/// Central-difference gradient of the average velocity along the problem
/// direction, relative step 1e-5.
pub fn finite_difference_gradient(problem: &Problem, gait: &Gait) -> Result<ParamVector> {
    let x = gait.to_params();
    let p = problem.momentum_vector();
    let mut g = ParamVector::zeros();
    for j in 0..PARAMS {
        let h = 1e-5 * x[j].abs().max(1.0);
        let eval = |delta: f64| -> Result<f64> {
            let mut y = x;
            y[j] += delta;
            let out = evaluate_gait(problem.grid, &Gait::from_params(&y)?, &p, problem.settings.steps)?.1;
            Ok(out.velocity_along(problem.direction))
        };
        g[j] = (eval(h)? - eval(-h)?) / (2.0 * h);
    }
    Ok(g)
}

/// [`effort_gradient`] over the entries where `mask` is nonzero.
pub(crate) fn effort_gradient_masked(problem: &Problem, gait: &Gait, mask: &ParamVector) -> Result<ParamVector> {
    let p = problem.momentum_vector();
    let x = gait.to_params();
    let mut g = ParamVector::zeros();
    for j in (0..PARAMS).filter(|&j| mask[j] != 0.0) {
        let h = 1e-5 * x[j].abs().max(1.0);
        let eval = |delta: f64| -> Result<f64> {
            let mut y = x;
            y[j] += delta;
            average_effort(problem.grid, &Gait::from_params(&y)?, &p, problem.settings.steps)
        };
        g[j] = (eval(h)? - eval(-h)?) / (2.0 * h);
    }
    Ok(g)
}

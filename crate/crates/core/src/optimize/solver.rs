//! Constrained ascent on average velocity under the effort bound.
//!
//! Decision variables are the Fourier coefficients and `ln T`. Each
//! iteration takes a quasi-Newton step projected onto the tangent of the
//! effort constraint when it is active, then restores feasibility by
//! stretching the period (effort falls monotonically as the cycle slows),
//! and accepts the step on an Armijo test of the exact objective.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::{Gait, ParamVector, COEFFS_PER_JOINT, PARAMS, PERIOD_INDEX, T_MIN};
use crate::simulate::{evaluate_gait, GaitOutcome};

use super::gradient::{effort_gradient_masked, objective_gradient};
use super::Problem;

type Mat = SMatrix<f64, PARAMS, PARAMS>;

/// Relative band below the bound that counts as active.
const ACTIVE_BAND: f64 = 1e-3;
/// Restoration aims just inside the bound.
const RESTORE_TARGET: f64 = 1.0 - 2e-5;
const MAX_STEP: f64 = 0.5;
/// Largest coordinate change a restoration may make.
const RESTORE_REACH: f64 = 1.0;
const REPAIR_DESCENTS: usize = 30;
const ARMIJO: f64 = 1e-4;
const STALL_ITERATIONS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    IterationLimit,
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub gait: Gait,
    pub outcome: GaitOutcome,
    pub velocity: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    x: ParamVector,
    gait: Gait,
    velocity: f64,
    effort: f64,
}

fn to_gait(x: &ParamVector) -> Result<Gait> {
    let mut y = *x;
    y[PERIOD_INDEX] = x[PERIOD_INDEX].exp();
    Gait::from_params(&y)
}

fn to_vars(g: &Gait) -> ParamVector {
    let mut x = g.to_params();
    x[PERIOD_INDEX] = g.period.ln();
    x
}

fn evaluate(problem: &Problem, x: ParamVector) -> Result<Point> {
    let gait = to_gait(&x)?;
    let (velocity, effort) = problem.evaluate(&gait)?;
    if !velocity.is_finite() || !effort.is_finite() {
        return Err(Error::Numerical("non-finite objective".into()));
    }
    Ok(Point { x, gait, velocity, effort })
}

/// Moves along `-w` (a direction of decreasing effort) until the effort
/// sits just inside the bound. `max_len` caps the largest coordinate
/// change. Returns `None` when the bound cannot be met along the line.
fn restore_along(problem: &Problem, pt: Point, w: &ParamVector, max_len: f64) -> Result<Option<Point>> {
    Ok(restore_or_descend(problem, pt, w, max_len)?.0)
}

/// As [`restore_along`], also returning the lowest-effort point probed.
fn restore_or_descend(problem: &Problem, pt: Point, w: &ParamVector, max_len: f64) -> Result<(Option<Point>, Point)> {
    let c = problem.settings.effort_bound;
    if pt.effort <= c {
        return Ok((Some(pt), pt));
    }
    let wmax = w.amax();
    if !(wmax > 0.0) {
        return Ok((None, pt));
    }
    let s_max = max_len / wmax;
    let target = (c * RESTORE_TARGET).ln();
    let phi = |p: &Point| p.effort.ln() - target;
    let at = |s: f64| -> Result<Point> {
        let mut x = pt.x - w * s;
        x[PERIOD_INDEX] = x[PERIOD_INDEX].max(T_MIN.ln());
        evaluate(problem, x)
    };
    // Bracket a feasible point by growing the step.
    let (mut s_lo, mut lo) = (0.0, pt);
    let mut s = (s_max * 1e-3).min(s_max);
    let mut bracket = None;
    while s <= s_max {
        let trial = at(s)?;
        if trial.effort <= c {
            bracket = Some((s, trial));
            break;
        }
        if trial.effort < lo.effort {
            s_lo = s;
            lo = trial;
        }
        s *= 2.0;
    }
    let Some((mut s_hi, mut hi)) = bracket else { return Ok((None, lo)) };
    // Illinois iteration on ln E over the step.
    let (mut fa, mut fb) = (phi(&lo), phi(&hi));
    for _ in 0..60 {
        if hi.effort <= c && hi.effort >= c * (1.0 - 1e-4) {
            break;
        }
        let mut u = s_hi - fb * (s_hi - s_lo) / (fb - fa);
        if !u.is_finite() || u <= s_lo.min(s_hi) || u >= s_lo.max(s_hi) {
            u = 0.5 * (s_lo + s_hi);
        }
        let t = at(u)?;
        let ft = phi(&t);
        if (ft > 0.0) == (fb > 0.0) {
            fa *= 0.5;
        } else {
            s_lo = s_hi;
            fa = fb;
        }
        s_hi = u;
        hi = t;
        fb = ft;
        if (s_hi - s_lo).abs() <= 1e-14 * s_max {
            break;
        }
    }
    if hi.effort <= c {
        return Ok((Some(hi), hi));
    }
    let l = at(s_lo)?;
    Ok(((l.effort <= c).then_some(l), l))
}

/// Period stretch as a restoration direction.
fn stretch() -> ParamVector {
    let mut w = ParamVector::zeros();
    w[PERIOD_INDEX] = -1.0;
    w
}

/// Restores a trial point along the effort-descent direction `w`, falling
/// back to stretching the period.
fn restore(problem: &Problem, pt: Point, w: &ParamVector) -> Result<Option<Point>> {
    if let Some(p) = restore_along(problem, pt, w, RESTORE_REACH)? {
        return Ok(Some(p));
    }
    restore_along(problem, pt, &stretch(), RESTORE_REACH)
}

/// Makes an infeasible start feasible: descend the effort, then slow the
/// cycle, then shrink the locus toward its center.
fn repair(problem: &Problem, start: Gait) -> Result<Point> {
    let mut x = to_vars(&start);
    x[PERIOD_INDEX] = x[PERIOD_INDEX].max(T_MIN.ln());
    let pt = evaluate(problem, x)?;
    if pt.effort <= problem.settings.effort_bound {
        return Ok(pt);
    }
    // Steepest descent on the effort until the bound is met.
    let mut cur = pt;
    for _ in 0..REPAIR_DESCENTS {
        let mut ge = effort_gradient_masked(problem, &cur.gait, &problem.symmetry.mask())?;
        ge[PERIOD_INDEX] *= cur.gait.period;
        let (done, lowest) = restore_or_descend(problem, cur, &ge, RESTORE_REACH)?;
        if let Some(p) = done {
            return Ok(p);
        }
        if lowest.effort >= cur.effort * (1.0 - 1e-6) {
            break;
        }
        cur = lowest;
    }
    for _ in 0..60 {
        if let Some(p) = restore_along(problem, evaluate(problem, x)?, &stretch(), 12.0)? {
            return Ok(p);
        }
        for j in 0..PERIOD_INDEX {
            if j % COEFFS_PER_JOINT != 0 {
                x[j] *= 0.5;
            }
        }
    }
    Err(Error::Numerical("no feasible gait found near the initial guess".into()))
}

struct Gradients {
    objective: ParamVector,
    effort: ParamVector,
}

fn gradients(problem: &Problem, pt: &Point) -> Result<Gradients> {
    let mask = problem.symmetry.mask();
    let mut objective = objective_gradient(problem, &pt.gait)?.component_mul(&mask);
    let mut effort = effort_gradient_masked(problem, &pt.gait, &mask)?;
    let t = pt.gait.period;
    objective[PERIOD_INDEX] *= t;
    effort[PERIOD_INDEX] *= t;
    Ok(Gradients { objective, effort })
}

/// Multiplier, projected ascent gradient and bound mask at a point.
fn stationarity(problem: &Problem, pt: &Point, g: &Gradients, h: &Mat) -> (f64, ParamVector, ParamVector) {
    let c = problem.settings.effort_bound;
    let active = pt.effort >= c * (1.0 - ACTIVE_BAND);
    let mut free = problem.symmetry.mask();
    let at_min_period = pt.x[PERIOD_INDEX] <= T_MIN.ln() + 1e-12;
    if at_min_period && g.objective[PERIOD_INDEX] < 0.0 {
        free[PERIOD_INDEX] = 0.0;
    }
    let ge = g.effort.component_mul(&free);
    let gf = g.objective.component_mul(&free);
    let mut mu = 0.0;
    if active {
        let hg = h * ge;
        let denom = ge.dot(&hg);
        if denom > 0.0 {
            mu = (gf.dot(&hg) / denom).max(0.0);
        }
    }
    (mu, gf - ge * mu, free)
}

fn kkt_residual(problem: &Problem, pt: &Point, g: &Gradients) -> f64 {
    let (_, r, _) = stationarity(problem, pt, g, &Mat::identity());
    r.norm()
}

/// Maximizes average velocity along the problem direction subject to the
/// effort bound, starting from `problem.initial`.
pub fn solve(problem: &Problem) -> Result<Solution> {
    problem.validate()?;
    let settings = problem.settings;
    let mut pt = repair(problem, problem.symmetry.project(&problem.initial))?;
    let mut g = gradients(problem, &pt)?;
    let mut h: Option<Mat> = None;
    let mut status = SolveStatus::IterationLimit;
    let mut iterations = 0;
    let mut kkt = kkt_residual(problem, &pt, &g);
    let mut stalled = 0;

    while iterations < settings.max_iterations {
        if kkt < settings.kkt_tolerance {
            status = SolveStatus::Converged;
            break;
        }
        iterations += 1;
        let hm = h.unwrap_or_else(|| Mat::identity() * (0.1 / g.objective.norm().max(1e-12)));
        let (mu, lagr, free) = stationarity(problem, &pt, &g, &hm);
        let mut d = (hm * lagr).component_mul(&free);
        let len = d.amax();
        if len > MAX_STEP {
            d *= MAX_STEP / len;
        }
        let slope = lagr.dot(&d);

        let mut accepted = None;
        let mut alpha = 1.0;
        while alpha > 1e-10 {
            let mut x = pt.x + d * alpha;
            x[PERIOD_INDEX] = x[PERIOD_INDEX].max(T_MIN.ln());
            if let Ok(trial) = evaluate(problem, x) {
                if let Some(trial) = restore(problem, trial, &(hm * g.effort))? {
                    if trial.velocity >= pt.velocity + ARMIJO * alpha * slope && trial.velocity > pt.velocity {
                        accepted = Some(trial);
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }

        let Some(next) = accepted else {
            if h.is_some() {
                h = None;
                continue;
            }
            status = SolveStatus::Stalled;
            break;
        };

        let gn = gradients(problem, &next)?;
        // Quasi-Newton update on the negated Lagrangian Hessian.
        let s: SVector<f64, PARAMS> = next.x - pt.x;
        let y = -((gn.objective - gn.effort * mu) - (g.objective - g.effort * mu));
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let mut hh = h.unwrap_or_else(|| Mat::identity() * (sy / y.dot(&y)));
            let rho = 1.0 / sy;
            let i = Mat::identity();
            hh = (i - s * y.transpose() * rho) * hh * (i - y * s.transpose() * rho) + s * s.transpose() * rho;
            h = Some(hh);
        }

        let gain = next.velocity - pt.velocity;
        stalled = if gain <= 1e-12 * pt.velocity.abs().max(1e-12) { stalled + 1 } else { 0 };
        pt = next;
        g = gn;
        kkt = kkt_residual(problem, &pt, &g);
        if stalled >= STALL_ITERATIONS {
            status = SolveStatus::Stalled;
            break;
        }
    }
    if kkt < settings.kkt_tolerance {
        status = SolveStatus::Converged;
    }

    let (_, outcome) = evaluate_gait(problem.grid, &pt.gait, &problem.momentum_vector(), settings.steps)?;
    Ok(Solution { gait: pt.gait, outcome, velocity: pt.velocity, iterations, kkt_residual: kkt, status })
}

//! Circular gaits tangent to the minimum-inertia shape of a turning chain:
//! kinematic and momentum contributions to the average turning rate.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::connection::ShapeGrid;
use crate::error::{Error, Result};
use crate::gait::{Gait, T_MIN};
use crate::linkage::{Direction, Shape};
use crate::se2::Covector;
use crate::simulate::{evaluate_gait, Trajectory};

const PERIOD_GROWTH: f64 = 1.25;
const PERIOD_MAX: f64 = 1e4;

/// Uniform-pace circle of radius `radius` through `(pi, pi)`, centered on the
/// `alpha1 = alpha2` line below it; clockwise when `clockwise`.
pub fn tangent_circle(radius: f64, period: f64, clockwise: bool) -> Result<Gait> {
    let c = PI - radius * FRAC_1_SQRT_2;
    let g = Gait::circle(Shape::new(c, c), radius, period)?;
    Ok(if clockwise { g.reversed() } else { g })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirclePoint {
    pub radius: f64,
    /// Fastest period meeting the effort bound; `None` when no period does.
    pub period: Option<f64>,
    /// Average turning rate from shape change.
    #[serde(deserialize_with = "crate::nan_or_number")]
    pub kinematic: f64,
    /// Average drift turning rate divided by the momentum magnitude.
    #[serde(deserialize_with = "crate::nan_or_number")]
    pub momentum_per_unit: f64,
    /// Average drift turning rate.
    #[serde(deserialize_with = "crate::nan_or_number")]
    pub momentum: f64,
    #[serde(deserialize_with = "crate::nan_or_number")]
    pub total: f64,
    #[serde(deserialize_with = "crate::nan_or_number")]
    pub effort: f64,
}

impl CirclePoint {
    pub fn feasible(&self) -> bool {
        self.period.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleSweep {
    pub radii: Vec<f64>,
    pub levels: Vec<f64>,
    pub clockwise: bool,
    /// `rows[level][radius]`.
    pub rows: Vec<Vec<CirclePoint>>,
}

/// Splits the turning rate of a trajectory into shape-driven and drift parts.
fn contributions(grid: &ShapeGrid, traj: &Trajectory, p: &Covector) -> (f64, f64) {
    let k = Direction::Theta.index();
    let h = traj.step_size();
    let n = traj.steps();
    let (mut kin, mut mom) = (0.0, 0.0);
    for (i, s) in traj.samples.iter().enumerate() {
        let w = if i == 0 || i == n { 0.5 * h } else { h };
        let sample = grid.interpolate(s.shape);
        mom += w * (sample.mgg_inv * s.pose.dual_adjoint(p))[k];
        kin -= w * (sample.a * s.shape_velocity)[k];
    }
    (kin / traj.period, mom / traj.period)
}

/// Smallest period at least `T_MIN` whose effort meets `bound`.
fn fastest_feasible_period(grid: &ShapeGrid, gait: &Gait, p: &Covector, bound: f64, steps: usize) -> Result<Option<f64>> {
    let effort = |t: f64| -> Result<f64> { Ok(evaluate_gait(grid, &gait.with_period(t)?, p, steps)?.1.effort) };
    let mut lo = T_MIN;
    if effort(lo)? <= bound {
        return Ok(Some(lo));
    }
    let mut hi = lo;
    loop {
        hi *= PERIOD_GROWTH;
        if hi > PERIOD_MAX {
            return Ok(None);
        }
        if effort(hi)? <= bound {
            break;
        }
        lo = hi;
    }
    for _ in 0..50 {
        let mid = (lo * hi).sqrt();
        if effort(mid)? <= bound {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi / lo - 1.0 < 1e-10 {
            break;
        }
    }
    Ok(Some(hi))
}

/// Evaluates tangent circles at each radius and angular momentum level.
/// All circles share one traversal direction, the one that turns positively
/// at zero momentum where the shape-driven turning is strongest, and each
/// runs as fast as the effort bound allows.
pub fn circle_sweep(grid: &ShapeGrid, radii: &[f64], levels: &[f64], bound: f64, steps: usize) -> Result<CircleSweep> {
    if radii.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::InvalidArgument("radii must be non-negative".into()));
    }
    let zero = Covector::zeros();
    let mut strongest = 0.0f64;
    for &r in radii.iter().filter(|&&r| r > 0.0) {
        let (_, out) = evaluate_gait(grid, &tangent_circle(r, 1.0, false)?, &zero, steps)?;
        let turn = out.velocity_along(Direction::Theta);
        if turn.abs() > strongest.abs() {
            strongest = turn;
        }
    }
    let clockwise = strongest < 0.0;
    let mut rows = Vec::with_capacity(levels.len());
    for &l in levels {
        let p = Direction::Theta.unit() * l;
        let mut row = Vec::with_capacity(radii.len());
        for &r in radii {
            let base = tangent_circle(r, 1.0, clockwise)?;
            let period = if r > 0.0 { fastest_feasible_period(grid, &base, &p, bound, steps)? } else { Some(1.0) };
            let point = match period {
                Some(t) => {
                    let (traj, out) = evaluate_gait(grid, &base.with_period(t)?, &p, steps)?;
                    let (kinematic, momentum) = contributions(grid, &traj, &p);
                    CirclePoint {
                        radius: r,
                        period: Some(t),
                        kinematic,
                        momentum_per_unit: if l != 0.0 { momentum / l.abs() } else { 0.0 },
                        momentum,
                        total: out.velocity_along(Direction::Theta),
                        effort: out.effort,
                    }
                }
                None => CirclePoint {
                    radius: r,
                    period: None,
                    kinematic: f64::NAN,
                    momentum_per_unit: f64::NAN,
                    momentum: f64::NAN,
                    total: f64::NAN,
                    effort: f64::NAN,
                },
            };
            row.push(point);
        }
        rows.push(row);
    }
    Ok(CircleSweep { radii: radii.to_vec(), levels: levels.to_vec(), clockwise, rows })
}

/// Indices of local maxima of the total rate over consecutive feasible radii;
/// an endpoint counts when it exceeds its only neighbor.
pub fn local_maxima(points: &[CirclePoint]) -> Vec<usize> {
    let feasible: Vec<usize> = (0..points.len()).filter(|&i| points[i].feasible()).collect();
    let v = |i: usize| points[feasible[i]].total;
    let n = feasible.len();
    let mut out = vec![];
    for i in 0..n {
        let left = i == 0 || v(i) > v(i - 1);
        let right = i + 1 == n || v(i) > v(i + 1);
        if left && right && n > 1 {
            out.push(feasible[i]);
        }
    }
    out
}

//! Momentum continuation, kinematic and momentum baselines, crossover.

use serde::{Deserialize, Serialize};

use crate::connection::ShapeGrid;
use crate::curvature::ccf;
use crate::error::{Error, Result};
use crate::gait::Gait;
use crate::linkage::{Direction, Shape};
use crate::se2::GroupElement;
use crate::simulate::evaluate_gait;

use super::solver::{solve, Solution, SolveStatus};
use super::{Problem, SolverSettings};

/// Radius of the default starting loop.
const SEED_RADIUS: f64 = 0.5;
/// Radius of the loop seeded at the minimum-inertia shape.
const POINT_SEED_RADIUS: f64 = 0.1;
const SEED_PERIOD: f64 = 2.0;

/// Small loop at the strongest shape-plane curvature node with both joints
/// within 2 rad, oriented to move forward along `direction`.
pub fn default_initial_gait(grid: &ShapeGrid, direction: Direction) -> Result<Gait> {
    let k = direction.index();
    let zero = nalgebra::Vector3::zeros();
    let mut best: Option<(f64, Shape)> = None;
    for idx in 0..grid.layout().len() {
        let r = grid.node_shape(idx);
        if r.alpha1.abs() > 2.0 || r.alpha2.abs() > 2.0 {
            continue;
        }
        let v = ccf(grid, r, GroupElement::IDENTITY, &zero).d12[k];
        if best.map_or(true, |(b, _)| v.abs() > b.abs() + 1e-12) {
            best = Some((v, r));
        }
    }
    let (v, center) = best.ok_or_else(|| Error::InvalidArgument("empty grid".into()))?;
    oriented_circle(center, SEED_RADIUS, SEED_PERIOD, v)
}

/// Circle traversed counterclockwise when `sign > 0`, clockwise otherwise.
fn oriented_circle(center: Shape, radius: f64, period: f64, sign: f64) -> Result<Gait> {
    let g = Gait::circle(center, radius, period)?;
    Ok(if sign >= 0.0 { g } else { g.reversed() })
}

/// Optimal gait at zero momentum.
pub fn kinematic_solution(
    grid: &ShapeGrid,
    direction: Direction,
    settings: SolverSettings,
    initial: Gait,
) -> Result<Solution> {
    solve(&Problem::new(grid, direction, 0.0, initial)?.with_settings(settings)?)
}

/// Velocity of the zero-momentum optimum replayed at momentum `momentum`.
pub fn baseline_kinematic(grid: &ShapeGrid, direction: Direction, momentum: f64, kinematic: &Gait, steps: usize) -> Result<f64> {
    let p = direction.unit() * momentum;
    Ok(evaluate_gait(grid, kinematic, &p, steps)?.1.velocity_along(direction))
}

/// Drift velocity at the minimum-inertia shape.
pub fn baseline_momentum(grid: &ShapeGrid, direction: Direction, momentum: f64) -> f64 {
    let r = grid.minimum_inertia_shape(direction);
    grid.drift_velocity(r, &(direction.unit() * momentum))[direction.index()]
}

/// Smallest momentum at which the momentum baseline matches the kinematic
/// baseline, by bisection.
pub fn crossover_momentum(grid: &ShapeGrid, direction: Direction, kinematic: &Gait, steps: usize) -> Result<f64> {
    let gap = |l: f64| -> Result<f64> {
        Ok(baseline_momentum(grid, direction, l) - baseline_kinematic(grid, direction, l, kinematic, steps)?)
    };
    if gap(0.0)? >= 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut found = false;
    for _ in 0..60 {
        if gap(hi)? >= 0.0 {
            found = true;
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    if !found {
        return Err(Error::Numerical("momentum baseline never overtakes the kinematic baseline".into()));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-10 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `count` evenly spaced levels from 0 to `max`.
pub fn linear_levels(max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..count).map(|k| max * k as f64 / (count - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepLevel {
    pub momentum: f64,
    pub gait: Option<Gait>,
    #[serde(deserialize_with = "crate::nan_or_number")]
    pub velocity: f64,
    #[serde(deserialize_with = "crate::nan_or_number")]
    pub amplitude: f64,
    #[serde(deserialize_with = "crate::nan_or_number")]
    pub effort: f64,
    pub kinematic_velocity: f64,
    pub momentum_velocity: f64,
    pub status: Option<SolveStatus>,
    pub iterations: usize,
    #[serde(deserialize_with = "crate::nan_or_number")]
    pub kkt_residual: f64,
    /// Which start produced the kept optimum.
    pub seed: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub system: String,
    pub direction: Direction,
    pub kinematic_gait: Gait,
    pub levels: Vec<SweepLevel>,
}

impl SweepResult {
    pub fn amplitudes(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.amplitude).collect()
    }
}

fn level_from(momentum: f64, s: &Solution, seed: &str, kin: f64, mom: f64) -> SweepLevel {
    SweepLevel {
        momentum,
        gait: Some(s.gait),
        velocity: s.velocity,
        amplitude: s.gait.amplitude(),
        effort: s.outcome.effort,
        kinematic_velocity: kin,
        momentum_velocity: mom,
        status: Some(s.status),
        iterations: s.iterations,
        kkt_residual: s.kkt_residual,
        seed: seed.into(),
        error: None,
    }
}

/// Solves every level from two starts (the previous optimum and a small loop
/// at the minimum-inertia shape) and keeps the faster; the held
/// minimum-inertia shape itself also competes.
fn solve_level(
    grid: &ShapeGrid,
    direction: Direction,
    momentum: f64,
    settings: SolverSettings,
    previous: &Gait,
) -> Result<(Solution, &'static str)> {
    let r_min = grid.minimum_inertia_shape(direction);
    let warm = solve(&Problem::new(grid, direction, momentum, *previous)?.with_settings(settings)?);
    let zero = nalgebra::Vector3::zeros();
    let sign = ccf(grid, r_min, GroupElement::IDENTITY, &zero).d12[direction.index()];
    let seed = oriented_circle(r_min, POINT_SEED_RADIUS, previous.period, sign)?;
    let from_point = solve(&Problem::new(grid, direction, momentum, seed)?.with_settings(settings)?);
    let held = Gait::point(r_min, previous.period)?;
    let held = solve(&Problem::new(grid, direction, momentum, held)?.with_settings(settings)?);
    let mut best: Option<(Solution, &'static str)> = None;
    let mut first_err = None;
    for (cand, name) in [(warm, "previous"), (from_point, "minimum-inertia-loop"), (held, "minimum-inertia-point")] {
        match cand {
            Ok(s) => {
                if best.as_ref().map_or(true, |(b, _)| s.velocity > b.velocity) {
                    best = Some((s, name));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one candidate"))
}

/// Continuation over ascending momentum levels starting at 0.
pub fn sweep(
    grid: &ShapeGrid,
    direction: Direction,
    levels: &[f64],
    settings: SolverSettings,
    initial: Gait,
) -> Result<SweepResult> {
    if levels.first() != Some(&0.0) || levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("momentum levels must ascend strictly from 0".into()));
    }
    let kinematic = kinematic_solution(grid, direction, settings, initial)?;
    sweep_from(grid, direction, levels, settings, &kinematic)
}

/// [`sweep`] with a precomputed zero-momentum optimum.
pub fn sweep_from(
    grid: &ShapeGrid,
    direction: Direction,
    levels: &[f64],
    settings: SolverSettings,
    kinematic: &Solution,
) -> Result<SweepResult> {
    if levels.first() != Some(&0.0) || levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("momentum levels must ascend strictly from 0".into()));
    }
    let mut out = Vec::with_capacity(levels.len());
    let mut previous = kinematic.gait;
    for &l in levels {
        let kin = baseline_kinematic(grid, direction, l, &kinematic.gait, settings.steps)?;
        let mom = baseline_momentum(grid, direction, l);
        if l == 0.0 {
            out.push(level_from(l, kinematic, "initial", kin, mom));
            continue;
        }
        match solve_level(grid, direction, l, settings, &previous) {
            Ok((s, seed)) => {
                previous = s.gait;
                out.push(level_from(l, &s, seed, kin, mom));
            }
            Err(e) => out.push(SweepLevel {
                momentum: l,
                gait: None,
                velocity: f64::NAN,
                amplitude: f64::NAN,
                effort: f64::NAN,
                kinematic_velocity: kin,
                momentum_velocity: mom,
                status: None,
                iterations: 0,
                kkt_residual: f64::NAN,
                seed: String::new(),
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(SweepResult { system: grid.model().name.clone(), direction, kinematic_gait: kinematic.gait, levels: out })
}

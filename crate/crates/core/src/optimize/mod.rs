//! Gait optimization under the average-effort constraint: geometric
//! displacement gradient, effort gradient, constrained solver, momentum
//! continuation, baselines and the circular-gait analysis.

mod circle;
mod estimate;
mod gradient;
mod solver;
mod sweep;

pub use circle::{circle_sweep, local_maxima, tangent_circle, CirclePoint, CircleSweep};
pub use estimate::{flux_estimate, lifted_estimate};
pub use gradient::{displacement_gradient, effort_gradient, finite_difference_gradient, objective_gradient, DisplacementGradient};
pub use solver::{solve, Solution, SolveStatus};
pub use sweep::{
    baseline_kinematic, baseline_momentum, crossover_momentum, default_initial_gait, kinematic_solution, linear_levels,
    sweep, sweep_from, SweepLevel, SweepResult,
};

use serde::{Deserialize, Serialize};

use crate::connection::ShapeGrid;
use crate::error::{Error, Result};
use crate::gait::{Gait, ParamVector, COEFFS_PER_JOINT, ORDER, PERIOD_INDEX};
use crate::linkage::Direction;
use crate::se2::Covector;
use crate::simulate::{evaluate_gait, DEFAULT_STEPS};

pub const DEFAULT_WAYPOINTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub max_iterations: usize,
    pub kkt_tolerance: f64,
    pub effort_bound: f64,
    pub steps: usize,
    pub waypoints: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { max_iterations: 500, kkt_tolerance: 1e-4, effort_bound: 1.0, steps: DEFAULT_STEPS, waypoints: DEFAULT_WAYPOINTS }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be positive".into()));
        }
        if !(self.kkt_tolerance > 0.0) || !(self.effort_bound > 0.0) {
            return Err(Error::InvalidArgument("kkt_tolerance and effort_bound must be positive".into()));
        }
        if self.waypoints < 32 || self.steps % (2 * self.waypoints) != 0 {
            return Err(Error::InvalidArgument(format!(
                "steps ({}) must be a multiple of twice the waypoint count ({}), waypoints >= 32",
                self.steps, self.waypoints
            )));
        }
        Ok(())
    }
}

/// Restriction on the gaits a problem searches over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaitSymmetry {
    /// All coefficients and the period are free.
    Free,
    /// `r(t + T/2) = -r(t)`: zero mean and odd harmonics only. For a chain
    /// symmetric under reflection such a gait has no net rotation, so its
    /// forward velocity is sustained over repeated cycles.
    HalfWave,
}

impl GaitSymmetry {
    /// Translation problems search non-turning gaits; turning problems are free.
    pub fn for_direction(direction: Direction) -> Self {
        match direction {
            Direction::Theta => Self::Free,
            _ => Self::HalfWave,
        }
    }

    /// 1 for free decision variables, 0 for fixed ones.
    pub fn mask(self) -> ParamVector {
        let mut m = ParamVector::repeat(1.0);
        if self == Self::HalfWave {
            for j in 0..2 {
                let off = j * COEFFS_PER_JOINT;
                m[off] = 0.0;
                for k in (2..=ORDER).step_by(2) {
                    m[off + k] = 0.0;
                    m[off + ORDER + k] = 0.0;
                }
            }
        }
        m
    }

    /// Zeroes the coefficients the symmetry forbids.
    pub fn project(self, gait: &Gait) -> Gait {
        let mut x = gait.to_params().component_mul(&self.mask());
        x[PERIOD_INDEX] = gait.period;
        Gait::from_params(&x).expect("projection keeps a valid gait")
    }
}

/// One optimization problem: maximize average velocity along `direction` at
/// momentum `momentum` (aligned with the direction) under the effort bound.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub grid: &'a ShapeGrid,
    pub direction: Direction,
    pub momentum: f64,
    pub settings: SolverSettings,
    pub symmetry: GaitSymmetry,
    pub initial: Gait,
}

impl<'a> Problem<'a> {
    pub fn new(grid: &'a ShapeGrid, direction: Direction, momentum: f64, initial: Gait) -> Result<Self> {
        let symmetry = GaitSymmetry::for_direction(direction);
        let p = Self { grid, direction, momentum, settings: SolverSettings::default(), symmetry, initial };
        p.validate()?;
        Ok(p)
    }

    pub fn with_settings(mut self, settings: SolverSettings) -> Result<Self> {
        self.settings = settings;
        self.validate()?;
        Ok(self)
    }

    pub fn with_symmetry(mut self, symmetry: GaitSymmetry) -> Self {
        self.symmetry = symmetry;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.direction == Direction::Y {
            return Err(Error::InvalidArgument("direction must be x or theta".into()));
        }
        if !self.momentum.is_finite() {
            return Err(Error::InvalidArgument("momentum must be finite".into()));
        }
        self.settings.validate()?;
        self.initial.validate()
    }

    /// Spatial momentum covector.
    pub fn momentum_vector(&self) -> Covector {
        self.direction.unit() * self.momentum
    }

    /// Exact average velocity along the problem direction and average effort.
    pub fn evaluate(&self, gait: &Gait) -> Result<(f64, f64)> {
        let (_, out) = evaluate_gait(self.grid, gait, &self.momentum_vector(), self.settings.steps)?;
        Ok((out.velocity_along(self.direction), out.effort))
    }
}

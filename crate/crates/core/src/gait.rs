//! Fourier gaits and their direct-transcription waypoints.
//!
//! Each joint follows `a0 + sum_k a_k cos(2 pi k t / T) + b_k sin(2 pi k t / T)`
//! for `k = 1..=4`. The decision vector used by the optimizer stacks the nine
//! coefficients of joint 1, then joint 2, then the period.

use std::f64::consts::TAU;

use nalgebra::{SMatrix, SVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::curvature::LiftedBase;
use crate::error::{Error, Result};
use crate::linkage::Shape;

pub const ORDER: usize = 4;
pub const COEFFS_PER_JOINT: usize = 1 + 2 * ORDER;
pub const PARAMS: usize = 2 * COEFFS_PER_JOINT + 1;
pub const PERIOD_INDEX: usize = PARAMS - 1;
pub const T_MIN: f64 = 0.1;

pub type ParamVector = SVector<f64, PARAMS>;

/// Truncated Fourier gait: per joint `[a0, a1..a4, b1..b4]`, plus the period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaitRecord", into = "GaitRecord")]
pub struct Gait {
    pub joints: [[f64; COEFFS_PER_JOINT]; 2],
    pub period: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaitRecord {
    joints: Vec<Vec<f64>>,
    period: f64,
}

impl TryFrom<GaitRecord> for Gait {
    type Error = Error;

    fn try_from(rec: GaitRecord) -> Result<Self> {
        if rec.joints.len() != 2 {
            return Err(Error::InvalidGait(format!("expected 2 joints, got {}", rec.joints.len())));
        }
        let mut joints = [[0.0; COEFFS_PER_JOINT]; 2];
        for (dst, row) in joints.iter_mut().zip(&rec.joints) {
            if row.len() != COEFFS_PER_JOINT {
                return Err(Error::InvalidGait(format!(
                    "each joint needs {COEFFS_PER_JOINT} coefficients [a0, a1..a{ORDER}, b1..b{ORDER}], got {}",
                    row.len()
                )));
            }
            dst.copy_from_slice(row);
        }
        Gait::new(joints, rec.period)
    }
}

impl From<Gait> for GaitRecord {
    fn from(g: Gait) -> Self {
        GaitRecord { joints: g.joints.iter().map(|j| j.to_vec()).collect(), period: g.period }
    }
}

/// Timed samples of a gait's lifted curve.
#[derive(Debug, Clone)]
pub struct Waypoints {
    pub times: Vec<f64>,
    pub base: Vec<LiftedBase>,
    pub shape_velocity: Vec<Vector2<f64>>,
}

/// Derivatives of each waypoint with respect to the decision vector.
#[derive(Debug, Clone)]
pub struct WaypointJacobian {
    /// Rows `(alpha1, alpha2, tau)`.
    pub base: Vec<SMatrix<f64, 3, PARAMS>>,
    pub shape_velocity: Vec<SMatrix<f64, 2, PARAMS>>,
}

impl Gait {
    pub fn new(joints: [[f64; COEFFS_PER_JOINT]; 2], period: f64) -> Result<Self> {
        let g = Self { joints, period };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.period.is_finite() || self.period < T_MIN {
            return Err(Error::InvalidGait(format!("period must be >= {T_MIN}, got {}", self.period)));
        }
        if self.joints.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidGait("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// Constant shape held for one period.
    pub fn point(r: Shape, period: f64) -> Result<Self> {
        let mut joints = [[0.0; COEFFS_PER_JOINT]; 2];
        joints[0][0] = r.alpha1;
        joints[1][0] = r.alpha2;
        Self::new(joints, period)
    }

    /// Counterclockwise circle of radius `radius` about `center`, uniform pace.
    pub fn circle(center: Shape, radius: f64, period: f64) -> Result<Self> {
        let mut g = Self::point(center, period)?;
        g.joints[0][1] = radius;
        g.joints[1][1 + ORDER] = radius;
        Ok(g)
    }

    pub fn center(&self) -> Shape {
        Shape::new(self.joints[0][0], self.joints[1][0])
    }

    fn phase(&self, t: f64) -> f64 {
        TAU * t / self.period
    }

    /// Shape, shape velocity and shape acceleration at time `t`.
    pub fn evaluate_full(&self, t: f64) -> (Shape, Vector2<f64>, Vector2<f64>) {
        let w = self.phase(t);
        let om = TAU / self.period;
        let mut pos = [0.0; 2];
        let mut vel = [0.0; 2];
        let mut acc = [0.0; 2];
        for (j, c) in self.joints.iter().enumerate() {
            pos[j] = c[0];
            for k in 1..=ORDER {
                let kf = k as f64;
                let (s, co) = (kf * w).sin_cos();
                let (a, b) = (c[k], c[ORDER + k]);
                pos[j] += a * co + b * s;
                vel[j] += kf * om * (-a * s + b * co);
                acc[j] -= (kf * om).powi(2) * (a * co + b * s);
            }
        }
        (Shape::new(pos[0], pos[1]), Vector2::from(vel), Vector2::from(acc))
    }

    pub fn evaluate(&self, t: f64) -> (Shape, Vector2<f64>) {
        let (r, v, _) = self.evaluate_full(t);
        (r, v)
    }

    /// `n` uniform intervals over one period, `n + 1` samples.
    pub fn to_waypoints(&self, n: usize) -> Result<Waypoints> {
        check_waypoints(n)?;
        let mut wp = Waypoints { times: vec![], base: vec![], shape_velocity: vec![] };
        for k in 0..=n {
            let t = self.period * k as f64 / n as f64;
            let (r, v) = if k == n { self.evaluate(0.0) } else { self.evaluate(t) };
            wp.times.push(t);
            wp.base.push(LiftedBase { alpha1: r.alpha1, alpha2: r.alpha2, tau: t });
            wp.shape_velocity.push(v);
        }
        Ok(wp)
    }

    /// Exact derivatives of [`Gait::to_waypoints`] with respect to the decision vector.
    pub fn coefficient_jacobian(&self, n: usize) -> Result<WaypointJacobian> {
        check_waypoints(n)?;
        let om = TAU / self.period;
        let mut jac = WaypointJacobian { base: vec![], shape_velocity: vec![] };
        for k in 0..=n {
            let frac = (k % n) as f64 / n as f64;
            let t = self.period * frac;
            let w = TAU * frac;
            let mut jb = SMatrix::<f64, 3, PARAMS>::zeros();
            let mut jv = SMatrix::<f64, 2, PARAMS>::zeros();
            for j in 0..2 {
                let off = j * COEFFS_PER_JOINT;
                jb[(j, off)] = 1.0;
                for m in 1..=ORDER {
                    let mf = m as f64;
                    let (s, c) = (mf * w).sin_cos();
                    jb[(j, off + m)] = c;
                    jb[(j, off + ORDER + m)] = s;
                    jv[(j, off + m)] = -mf * om * s;
                    jv[(j, off + ORDER + m)] = mf * om * c;
                }
            }
            // Sample times scale with T, so the shape at waypoint k is
            // T-independent (basis and sample-time terms cancel) while the
            // velocity scales as 1/T.
            let (_, v) = self.evaluate(t);
            jv[(0, PERIOD_INDEX)] = -v[0] / self.period;
            jv[(1, PERIOD_INDEX)] = -v[1] / self.period;
            jb[(2, PERIOD_INDEX)] = k as f64 / n as f64;
            jac.base.push(jb);
            jac.shape_velocity.push(jv);
        }
        Ok(jac)
    }

    /// RMS distance of the shape locus from its time-averaged center.
    pub fn amplitude(&self) -> f64 {
        let sum: f64 = self.joints.iter().map(|c| c[1..].iter().map(|x| x * x).sum::<f64>()).sum();
        (0.5 * sum).sqrt()
    }

    pub fn to_params(&self) -> ParamVector {
        let mut p = ParamVector::zeros();
        for j in 0..2 {
            for m in 0..COEFFS_PER_JOINT {
                p[j * COEFFS_PER_JOINT + m] = self.joints[j][m];
            }
        }
        p[PERIOD_INDEX] = self.period;
        p
    }

    pub fn from_params(p: &ParamVector) -> Result<Self> {
        let mut joints = [[0.0; COEFFS_PER_JOINT]; 2];
        for j in 0..2 {
            for m in 0..COEFFS_PER_JOINT {
                joints[j][m] = p[j * COEFFS_PER_JOINT + m];
            }
        }
        Self::new(joints, p[PERIOD_INDEX])
    }

    /// Same shape locus traversed in period `period`.
    pub fn with_period(&self, period: f64) -> Result<Self> {
        Self::new(self.joints, period)
    }

    /// Joint roles exchanged (the chain's mirror image).
    pub fn swapped(&self) -> Self {
        Self { joints: [self.joints[1], self.joints[0]], period: self.period }
    }

    /// Same locus traversed backwards in time.
    pub fn reversed(&self) -> Self {
        let mut g = *self;
        for c in g.joints.iter_mut() {
            for k in 1..=ORDER {
                c[ORDER + k] = -c[ORDER + k];
            }
        }
        g
    }

    /// Lifted-base velocity `(a1_dot, a2_dot, 1)` at time `t`.
    pub fn lifted_velocity(&self, t: f64) -> Vector3<f64> {
        let (_, v) = self.evaluate(t);
        Vector3::new(v[0], v[1], 1.0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn check_waypoints(n: usize) -> Result<()> {
    if n < 32 {
        return Err(Error::InvalidArgument(format!("need at least 32 waypoint intervals, got {n}")));
    }
    Ok(())
}

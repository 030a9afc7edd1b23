//! Curvature-flux estimates of net displacement.

use nalgebra::{Vector2, Vector3};

use crate::connection::ShapeGrid;
use crate::curvature::ccf;
use crate::error::Result;
use crate::gait::Gait;
use crate::linkage::Shape;
use crate::se2::{log, AlgebraVector, Covector, GroupElement};
use crate::simulate::{integrate_path, ShapePath};

const LOOP_SAMPLES: usize = 256;

/// Gauss-Legendre nodes and weights on [0, 1].
fn gauss_legendre_unit() -> [(f64, f64); 8] {
    const X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
    const W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];
    let mut out = [(0.0, 0.0); 8];
    for k in 0..4 {
        out[2 * k] = (0.5 * (1.0 - X[k]), 0.5 * W[k]);
        out[2 * k + 1] = (0.5 * (1.0 + X[k]), 0.5 * W[k]);
    }
    out
}

/// Flux of the shape-plane curvature through the region a closed gait
/// encloses (signed by traversal), `oint Phi d(alpha2)` with
/// `Phi(a1, a2) = int_{c1}^{a1} D12(s, a2) ds`.
pub fn flux_estimate(grid: &ShapeGrid, gait: &Gait) -> AlgebraVector {
    let zero = Vector3::zeros();
    let c1 = gait.center().alpha1;
    let nodes = gauss_legendre_unit();
    let mut sum = AlgebraVector::zeros();
    for k in 0..LOOP_SAMPLES {
        let t = gait.period * k as f64 / LOOP_SAMPLES as f64;
        let (r, v) = gait.evaluate(t);
        let mut phi = AlgebraVector::zeros();
        for &(u, w) in &nodes {
            let s = c1 + u * (r.alpha1 - c1);
            let d = ccf(grid, Shape::new(s, r.alpha2), GroupElement::IDENTITY, &zero);
            phi += d.d12 * (w * (r.alpha1 - c1));
        }
        sum += phi * v[1];
    }
    sum * (gait.period / LOOP_SAMPLES as f64)
}

struct Held(Shape, f64);

impl ShapePath for Held {
    fn period(&self) -> f64 {
        self.1
    }
    fn sample(&self, _t: f64) -> (Shape, Vector2<f64>, Vector2<f64>) {
        (self.0, Vector2::zeros(), Vector2::zeros())
    }
}

/// Net displacement estimate with momentum: the drift of holding the start
/// shape for one period plus the lifted-curvature flux through the ruled
/// surface joining that drift line to the lifted gait.
pub fn lifted_estimate(grid: &ShapeGrid, gait: &Gait, p: &Covector, g0: GroupElement, steps: usize) -> Result<AlgebraVector> {
    let (r0, _) = gait.evaluate(0.0);
    let drift = integrate_path(grid, &Held(r0, gait.period), p, g0, steps)?;
    let drift_disp = log(drift.displacement())?;
    let nodes = gauss_legendre_unit();
    let h = gait.period / steps as f64;
    let mut flux = AlgebraVector::zeros();
    for (k, smp) in drift.samples.iter().enumerate() {
        let w = if k == 0 || k == steps { 0.5 * h } else { h };
        let (r, v) = gait.evaluate(smp.t);
        let du = Vector3::new(r.alpha1 - r0.alpha1, r.alpha2 - r0.alpha2, 0.0);
        for &(u, wu) in &nodes {
            let s = Shape::new(r0.alpha1 + u * du[0], r0.alpha2 + u * du[1]);
            let dt = Vector3::new(u * v[0], u * v[1], 1.0);
            flux += ccf(grid, s, smp.pose, p).contract(&du, &dt) * (w * wu);
        }
    }
    Ok(drift_disp + flux)
}

//! Local connection and momentum distribution over shape space.
//!
//! Body velocity reconstruction: `xi = -A(r) r_dot + Minv(r) Ad*_g p`, where
//! `p` is the (conserved) spatial momentum and `g` the pose of the body frame.
//! A [`ShapeGrid`] samples `A` and `Minv` on the periodic shape torus, either
//! in the original (middle-link) frame or in minimum-perturbation coordinates
//! (generalized center of mass with a least-squares mean orientation).

use nalgebra::{Matrix2, Matrix3, Matrix3x2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridLayout, PeriodicField};
use crate::linkage::{Direction, Shape, SystemModel};
use crate::se2::{Covector, GroupElement};

/// Local connection `A` and inverse locked inertia at one shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionSample {
    pub a: Matrix3x2<f64>,
    pub mgg_inv: Matrix3<f64>,
}

impl ConnectionSample {
    /// `A_p(r, g) = Minv Ad*_g`.
    pub fn momentum_distribution(&self, g: GroupElement) -> Matrix3<f64> {
        self.mgg_inv * g.dual_adjoint_matrix()
    }

    pub fn body_velocity(&self, r_dot: &Vector2<f64>, g: GroupElement, p: &Covector) -> Vector3<f64> {
        -self.a * r_dot + self.mgg_inv * g.dual_adjoint(p)
    }

    pub fn locked_inertia(&self) -> Matrix3<f64> {
        self.mgg_inv.try_inverse().expect("inverse locked inertia is singular")
    }

    fn pack(&self) -> [f64; 15] {
        let mut out = [0.0; 15];
        out[..6].copy_from_slice(self.a.as_slice());
        out[6..].copy_from_slice(self.mgg_inv.as_slice());
        out
    }

    fn unpack(v: &[f64; 15]) -> Self {
        Self {
            a: Matrix3x2::from_column_slice(&v[..6]),
            mgg_inv: Matrix3::from_column_slice(&v[6..]),
        }
    }
}

/// Local connection in the original body frame, directly from the model.
pub fn local_connection(model: &SystemModel, r: Shape) -> Result<ConnectionSample> {
    let m = model.checked_inertia_matrix(r)?;
    let mgg_inv = m.gg.try_inverse().ok_or(Error::NotPositiveDefinite(r.alpha1, r.alpha2))?;
    Ok(ConnectionSample { a: mgg_inv * m.gr, mgg_inv })
}

/// `A_p(r, g)` for a sample.
pub fn momentum_distribution(sample: &ConnectionSample, g: GroupElement) -> Matrix3<f64> {
    sample.momentum_distribution(g)
}

/// Re-expresses a sample in a new body frame `g_new = g_old * beta(r)`.
///
/// `grad_beta` holds the shape derivatives of `(x, y, theta)` of `beta`,
/// one column per joint.
pub fn transform_connection(
    sample: &ConnectionSample,
    beta: GroupElement,
    grad_beta: &Matrix3x2<f64>,
) -> ConnectionSample {
    let ad_inv = beta.inverse_adjoint();
    let (s, c) = beta.theta.sin_cos();
    let rot_t = Matrix2::new(c, s, -s, c);
    let mut a = ad_inv * sample.a;
    for k in 0..2 {
        let dk = grad_beta.column(k);
        let lin = rot_t * Vector2::new(dk[0], dk[1]);
        let body = Vector3::new(lin[0], lin[1], dk[2]);
        let col = a.column(k) - body;
        a.set_column(k, &col);
    }
    ConnectionSample { a, mgg_inv: ad_inv * sample.mgg_inv * ad_inv.transpose() }
}

/// Which body frame a grid is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coordinates {
    Original,
    MinimumPerturbation,
}

/// Frame change `beta(r)` from the original body frame to the working frame.
#[derive(Debug, Clone)]
pub struct CoordinateTransform {
    pub beta: Vec<GroupElement>,
    /// Shape derivatives of `(x, y, theta)` of `beta` at each node.
    pub grad_beta: Vec<Matrix3x2<f64>>,
    /// Max |D^T (D theta - A_theta)| after the least-squares solve.
    pub normal_residual: f64,
}

/// Shape-space samples of the connection in a chosen frame.
///
/// The original-frame connection and its stencil derivatives are the
/// interpolated primitives; working-frame quantities are assembled from them
/// and the interpolated frame change, so that derivatives are never taken of
/// the (less smooth) transformed field.
#[derive(Debug, Clone)]
pub struct ShapeGrid {
    model: SystemModel,
    layout: GridLayout,
    coordinates: Coordinates,
    original: Vec<ConnectionSample>,
    transform: CoordinateTransform,
    connection: PeriodicField<15>,
    d_connection: [PeriodicField<15>; 2],
    beta: PeriodicField<3>,
}

/// Interpolated shape derivatives of a [`ConnectionSample`].
#[derive(Debug, Clone, Copy)]
pub struct ConnectionDerivatives {
    pub da: [Matrix3x2<f64>; 2],
    pub dmgg_inv: [Matrix3<f64>; 2],
}

impl ShapeGrid {
    pub const DEFAULT_RESOLUTION: usize = 64;

    pub fn build(model: &SystemModel, n: usize, coordinates: Coordinates) -> Result<Self> {
        model.validate()?;
        let layout = GridLayout::new(n)?;
        let original = (0..layout.len())
            .map(|idx| {
                let (a1, a2) = layout.coords(idx);
                local_connection(model, Shape::new(a1, a2))
            })
            .collect::<Result<Vec<_>>>()?;
        let transform = match coordinates {
            Coordinates::Original => CoordinateTransform {
                beta: vec![GroupElement::IDENTITY; layout.len()],
                grad_beta: vec![Matrix3x2::zeros(); layout.len()],
                normal_residual: 0.0,
            },
            Coordinates::MinimumPerturbation => optimize_coordinates(model, layout, &original),
        };
        let packed: Vec<[f64; 15]> = original.iter().map(ConnectionSample::pack).collect();
        let connection = PeriodicField::from_nodes(layout, packed);
        let d_connection = [0, 1].map(|axis| PeriodicField::from_nodes(layout, connection.node_derivatives(axis)));
        let beta = PeriodicField::from_nodes(
            layout,
            transform.beta.iter().map(|b| [b.x, b.y, b.theta]).collect(),
        );
        Ok(Self { model: model.clone(), layout, coordinates, original, transform, connection, d_connection, beta })
    }

    /// Minimum-perturbation grid at the default resolution.
    pub fn new(model: &SystemModel) -> Result<Self> {
        Self::build(model, Self::DEFAULT_RESOLUTION, Coordinates::MinimumPerturbation)
    }

    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn layout(&self) -> GridLayout {
        self.layout
    }

    pub fn resolution(&self) -> usize {
        self.layout.n
    }

    pub fn coordinates(&self) -> Coordinates {
        self.coordinates
    }

    pub fn transform(&self) -> &CoordinateTransform {
        &self.transform
    }

    pub fn node_shape(&self, idx: usize) -> Shape {
        let (a, b) = self.layout.coords(idx);
        Shape::new(a, b)
    }

    /// Sample at a node in the working frame.
    pub fn node_sample(&self, idx: usize) -> ConnectionSample {
        transform_connection(&self.original[idx], self.transform.beta[idx], &self.transform.grad_beta[idx])
    }

    /// Sample at a node in the original frame.
    pub fn original_node_sample(&self, idx: usize) -> ConnectionSample {
        self.original[idx]
    }

    pub fn node_beta(&self, idx: usize) -> GroupElement {
        self.transform.beta[idx]
    }

    pub fn node_locked_inertia(&self, idx: usize) -> Matrix3<f64> {
        self.node_sample(idx).locked_inertia()
    }

    /// Working-frame connection at an arbitrary shape: the interpolated
    /// original connection carried through the interpolated frame change and
    /// its exact gradient.
    pub fn interpolate(&self, r: Shape) -> ConnectionSample {
        if self.coordinates == Coordinates::Original {
            return self.interpolate_original(r);
        }
        let (beta, grad) = self.interpolate_beta_with_gradient(r);
        transform_connection(&self.interpolate_original(r), beta, &grad)
    }

    /// Original-frame connection at an arbitrary shape.
    pub fn interpolate_original(&self, r: Shape) -> ConnectionSample {
        ConnectionSample::unpack(&self.connection.eval(r.alpha1, r.alpha2))
    }

    /// Shape derivatives of the original-frame connection.
    pub fn interpolate_original_derivatives(&self, r: Shape) -> ConnectionDerivatives {
        let [d1, d2] = [0, 1].map(|k| ConnectionSample::unpack(&self.d_connection[k].eval(r.alpha1, r.alpha2)));
        ConnectionDerivatives { da: [d1.a, d2.a], dmgg_inv: [d1.mgg_inv, d2.mgg_inv] }
    }

    /// Interpolated frame change `beta(r)`.
    pub fn interpolate_beta(&self, r: Shape) -> GroupElement {
        if self.coordinates == Coordinates::Original {
            return GroupElement::IDENTITY;
        }
        let v = self.beta.eval(r.alpha1, r.alpha2);
        GroupElement::raw(v[0], v[1], v[2])
    }

    pub fn interpolate_beta_with_gradient(&self, r: Shape) -> (GroupElement, Matrix3x2<f64>) {
        if self.coordinates == Coordinates::Original {
            return (GroupElement::IDENTITY, Matrix3x2::zeros());
        }
        let [v, d1, d2] = self.beta.eval_with_gradient(r.alpha1, r.alpha2);
        let grad = Matrix3x2::new(d1[0], d2[0], d1[1], d2[1], d1[2], d2[2]);
        (GroupElement::raw(v[0], v[1], v[2]), grad)
    }

    /// Working-frame pose from an original-frame pose at shape `r`.
    pub fn to_working_pose(&self, r: Shape, g_original: GroupElement) -> GroupElement {
        g_original.compose(self.interpolate_beta(r))
    }

    /// Original-frame pose from a working-frame pose at shape `r`.
    pub fn to_original_pose(&self, r: Shape, g: GroupElement) -> GroupElement {
        g.compose(self.interpolate_beta(r).inverse())
    }

    /// Shape of least locked inertia along `direction`: grid argmin refined by
    /// pattern search on the interpolated field.
    pub fn minimum_inertia_shape(&self, direction: Direction) -> Shape {
        let d = direction.index();
        let cost = |r: Shape| self.interpolate(r).locked_inertia()[(d, d)];
        let best = (0..self.layout.len())
            .min_by(|&a, &b| {
                let ca = self.node_locked_inertia(a)[(d, d)];
                let cb = self.node_locked_inertia(b)[(d, d)];
                ca.total_cmp(&cb)
            })
            .expect("grid is empty");
        let mut r = self.node_shape(best);
        let mut f = cost(r);
        let mut step = 0.5 * self.layout.spacing();
        while step > 1e-9 {
            let mut moved = false;
            for (da, db) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0)] {
                let trial = Shape::new(r.alpha1 + da * step, r.alpha2 + db * step);
                let ft = cost(trial);
                if ft < f - 1e-15 {
                    r = trial;
                    f = ft;
                    moved = true;
                    break;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        Shape::new(r.alpha1.rem_euclid(std::f64::consts::TAU), r.alpha2.rem_euclid(std::f64::consts::TAU))
    }

    /// Drift body velocity at a fixed shape and the identity pose.
    pub fn drift_velocity(&self, r: Shape, p: &Covector) -> Vector3<f64> {
        self.interpolate(r).mgg_inv * p
    }
}

/// Minimum-perturbation frame: translate to the generalized center of mass
/// and rotate by the least-squares potential of the rotational connection row.
pub fn optimize_coordinates(
    model: &SystemModel,
    layout: GridLayout,
    original: &[ConnectionSample],
) -> CoordinateTransform {
    let f1: Vec<f64> = original.iter().map(|s| s.a[(2, 0)]).collect();
    let f2: Vec<f64> = original.iter().map(|s| s.a[(2, 1)]).collect();
    let theta = layout.least_squares_potential(&f1, &f2);

    let nodes: Vec<[f64; 3]> = (0..layout.len())
        .map(|i| {
            let (a1, a2) = layout.coords(i);
            let d = model.generalized_center(Shape::new(a1, a2));
            [d[0], d[1], theta[i]]
        })
        .collect();
    let d1 = layout.derivative(&nodes, 0);
    let d2 = layout.derivative(&nodes, 1);

    let r1: Vec<f64> = (0..layout.len()).map(|i| d1[i][2] - f1[i]).collect();
    let r2: Vec<f64> = (0..layout.len()).map(|i| d2[i][2] - f2[i]).collect();
    let n1 = layout.derivative_transpose(&r1, 0);
    let n2 = layout.derivative_transpose(&r2, 1);
    let normal_residual = n1.iter().zip(&n2).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);

    let beta = nodes.iter().map(|v| GroupElement::raw(v[0], v[1], v[2])).collect();
    let grad_beta = (0..layout.len())
        .map(|i| Matrix3x2::new(d1[i][0], d2[i][0], d1[i][1], d2[i][1], d1[i][2], d2[i][2]))
        .collect();
    CoordinateTransform { beta, grad_beta, normal_residual }
}

/// Sum over nodes of the squared rotational row of the connection.
pub fn rotational_row_energy(samples: impl Iterator<Item = ConnectionSample>) -> f64 {
    samples.map(|s| s.a[(2, 0)].powi(2) + s.a[(2, 1)].powi(2)).sum()
}

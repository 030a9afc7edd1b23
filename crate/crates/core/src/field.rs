//! Scalar and vector fields sampled on the periodic square `[0, 2pi)^2`.
//!
//! Derivatives use centered fourth-order stencils with periodic wraparound.
//! Interpolation is bicubic Hermite using those stencil derivatives, which is
//! C1 across cells and fourth-order accurate.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Node layout of an `n x n` periodic grid. Node `(i, j)` sits at
/// `(2 pi i / n, 2 pi j / n)` and is stored at `i * n + j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridLayout {
    pub n: usize,
}

impl GridLayout {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 {
            return Err(Error::InvalidArgument(format!("grid resolution must be >= 8, got {n}")));
        }
        Ok(Self { n })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn index(&self, i: isize, j: isize) -> usize {
        let n = self.n as isize;
        (i.rem_euclid(n) * n + j.rem_euclid(n)) as usize
    }

    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let h = self.spacing();
        ((idx / self.n) as f64 * h, (idx % self.n) as f64 * h)
    }

    /// Fourth-order centered derivative along `axis` (0 or 1) at every node.
    pub fn derivative<const K: usize>(&self, values: &[[f64; K]], axis: usize) -> Vec<[f64; K]> {
        let h = self.spacing();
        let n = self.n as isize;
        let mut out = vec![[0.0; K]; values.len()];
        for i in 0..n {
            for j in 0..n {
                let at = |d: isize| {
                    if axis == 0 {
                        &values[self.index(i + d, j)]
                    } else {
                        &values[self.index(i, j + d)]
                    }
                };
                let (m2, m1, p1, p2) = (at(-2), at(-1), at(1), at(2));
                let o = &mut out[self.index(i, j)];
                for k in 0..K {
                    o[k] = (m2[k] - 8.0 * m1[k] + 8.0 * p1[k] - p2[k]) / (12.0 * h);
                }
            }
        }
        out
    }

    /// Transpose of [`derivative`](Self::derivative) (the stencil is antisymmetric).
    pub fn derivative_transpose(&self, values: &[f64], axis: usize) -> Vec<f64> {
        let wrapped: Vec<[f64; 1]> = values.iter().map(|v| [*v]).collect();
        self.derivative(&wrapped, axis).into_iter().map(|v| -v[0]).collect()
    }

    /// Least-squares potential: minimizes `sum |D phi - (f1, f2)|^2` over
    /// node values `phi`, where `D` is the fourth-order gradient stencil.
    /// The null space of `D^T D` (constant and Nyquist modes) is fixed to zero,
    /// then `phi` is shifted so that it vanishes at node `(0, 0)`.
    pub fn least_squares_potential(&self, f1: &[f64], f2: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let fft2 = |data: &mut Vec<Complex64>, plan: &std::sync::Arc<dyn rustfft::Fft<f64>>| {
            for row in data.chunks_mut(n) {
                plan.process(row);
            }
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for j in 0..n {
                for i in 0..n {
                    col[i] = data[i * n + j];
                }
                plan.process(&mut col);
                for i in 0..n {
                    data[i * n + j] = col[i];
                }
            }
        };
        let mut g1: Vec<Complex64> = f1.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let mut g2: Vec<Complex64> = f2.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        fft2(&mut g1, &fwd);
        fft2(&mut g2, &fwd);
        let h = self.spacing();
        // Symbol of the stencil: i * s(k) / h.
        let symbol = |k: usize| {
            let w = 2.0 * PI * k as f64 / n as f64;
            (8.0 * w.sin() - (2.0 * w).sin()) / (6.0 * h)
        };
        let mut phi = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            let s1 = symbol(i);
            for j in 0..n {
                let s2 = symbol(j);
                let den = s1 * s1 + s2 * s2;
                if den < 1e-12 {
                    continue;
                }
                // conj(i s) = -i s
                let num = Complex64::new(0.0, -s1) * g1[i * n + j] + Complex64::new(0.0, -s2) * g2[i * n + j];
                phi[i * n + j] = num / den;
            }
        }
        fft2(&mut phi, &inv);
        let scale = 1.0 / (n * n) as f64;
        let pin = phi[0].re * scale;
        phi.iter().map(|c| c.re * scale - pin).collect()
    }
}

/// Hermite data for `K` scalar fields: value, d/da1, d/da2 and d2/da1da2 per node.
#[derive(Debug, Clone)]
pub struct PeriodicField<const K: usize> {
    layout: GridLayout,
    data: Vec<[[f64; K]; 4]>,
}

impl<const K: usize> PeriodicField<K> {
    pub fn from_nodes(layout: GridLayout, values: Vec<[f64; K]>) -> Self {
        assert_eq!(values.len(), layout.len());
        let d1 = layout.derivative(&values, 0);
        let d2 = layout.derivative(&values, 1);
        let d12 = layout.derivative(&d1, 1);
        let data = (0..layout.len()).map(|i| [values[i], d1[i], d2[i], d12[i]]).collect();
        Self { layout, data }
    }

    pub fn layout(&self) -> GridLayout {
        self.layout
    }

    pub fn node(&self, idx: usize) -> &[f64; K] {
        &self.data[idx][0]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64; K]> {
        self.data.iter().map(|d| &d[0])
    }

    /// Stencil derivatives at the nodes along `axis`.
    pub fn node_derivatives(&self, axis: usize) -> Vec<[f64; K]> {
        self.data.iter().map(|d| d[1 + axis]).collect()
    }

    /// Bicubic Hermite interpolation at an arbitrary (unwrapped) point.
    pub fn eval(&self, a1: f64, a2: f64) -> [f64; K] {
        self.eval_impl(a1, a2, false)[0]
    }

    /// Interpolant value and its exact partial derivatives along both axes.
    pub fn eval_with_gradient(&self, a1: f64, a2: f64) -> [[f64; K]; 3] {
        self.eval_impl(a1, a2, true)
    }

    fn eval_impl(&self, a1: f64, a2: f64, gradient: bool) -> [[f64; K]; 3] {
        let n = self.layout.n;
        let h = self.layout.spacing();
        let locate = |a: f64| {
            let s = a.rem_euclid(2.0 * PI) / h;
            let mut i = s.floor() as usize;
            let mut t = s - i as f64;
            if i >= n {
                i = n - 1;
                t = 1.0;
            }
            (i, t)
        };
        let (i, u) = locate(a1);
        let (j, v) = locate(a2);
        // Value and derivative weights of the cubic Hermite basis on [0, 1].
        let basis = |t: f64| {
            let t2 = t * t;
            let t3 = t2 * t;
            (
                [2.0 * t3 - 3.0 * t2 + 1.0, -2.0 * t3 + 3.0 * t2],
                [(t3 - 2.0 * t2 + t) * h, (t3 - t2) * h],
            )
        };
        let dbasis = |t: f64| {
            let t2 = t * t;
            (
                [(6.0 * t2 - 6.0 * t) / h, (-6.0 * t2 + 6.0 * t) / h],
                [3.0 * t2 - 4.0 * t + 1.0, 3.0 * t2 - 2.0 * t],
            )
        };
        let (hu, gu) = basis(u);
        let (hv, gv) = basis(v);
        let (dhu, dgu) = if gradient { dbasis(u) } else { ([0.0; 2], [0.0; 2]) };
        let (dhv, dgv) = if gradient { dbasis(v) } else { ([0.0; 2], [0.0; 2]) };
        let mut out = [[0.0; K]; 3];
        for (a, di) in [(0usize, 0isize), (1, 1)] {
            for (b, dj) in [(0usize, 0isize), (1, 1)] {
                let node = &self.data[self.layout.index(i as isize + di, j as isize + dj)];
                let w = [
                    [hu[a] * hv[b], gu[a] * hv[b], hu[a] * gv[b], gu[a] * gv[b]],
                    [dhu[a] * hv[b], dgu[a] * hv[b], dhu[a] * gv[b], dgu[a] * gv[b]],
                    [hu[a] * dhv[b], gu[a] * dhv[b], hu[a] * dgv[b], gu[a] * dgv[b]],
                ];
                let rows = if gradient { 3 } else { 1 };
                for (o, wr) in out.iter_mut().zip(w.iter()).take(rows) {
                    for (wk, vals) in wr.iter().zip(node.iter()) {
                        for k in 0..K {
                            o[k] += wk * vals[k];
                        }
                    }
                }
            }
        }
        out
    }
}

//! SVG figures over one period window of the shape torus: marching-squares
//! contours of a scalar grid field, arrow glyphs for a vector field, and
//! gait loops drawn thicker where the shape changes slowly.

use std::f64::consts::{PI, TAU};
use std::fmt::Write;

use crate::field::GridLayout;
use crate::gait::Gait;
use crate::linkage::Shape;

const SIZE: f64 = 420.0;
const MARGIN: f64 = 48.0;
const CONTOUR_LEVELS: usize = 14;
const ARROWS_PER_SIDE: usize = 16;
const GAIT_SAMPLES: usize = 240;
const GAIT_WIDTH: f64 = 2.5;

/// Node values of a scalar field on the periodic grid.
#[derive(Debug, Clone)]
pub struct ScalarGrid<'a> {
    pub layout: GridLayout,
    pub values: &'a [f64],
}

/// A figure window `[center - pi, center + pi)^2` in shape space.
#[derive(Debug, Clone)]
pub struct Figure {
    center: Shape,
    title: String,
    body: String,
}

impl Figure {
    pub fn new(center: Shape, title: &str) -> Self {
        Self { center, title: escape(title), body: String::new() }
    }

    fn px(&self, a1: f64, a2: f64) -> (f64, f64) {
        let x = MARGIN + (a1 - self.center.alpha1 + PI) / TAU * SIZE;
        let y = MARGIN + (self.center.alpha2 + PI - a2) / TAU * SIZE;
        (x, y)
    }

    /// Shifts `a` by whole periods into `[c - pi, c + pi)`.
    fn wrap(a: f64, c: f64) -> f64 {
        a - TAU * ((a - c + PI) / TAU).floor()
    }

    /// Contour lines at evenly spaced levels; solid for positive, dashed for
    /// negative, heavier at zero.
    pub fn contours(&mut self, field: &ScalarGrid) -> &mut Self {
        let (lo, hi) = field.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !(hi > lo) {
            return self;
        }
        let step = (hi - lo) / (CONTOUR_LEVELS + 1) as f64;
        let mut levels: Vec<f64> = (1..=CONTOUR_LEVELS).map(|k| lo + step * k as f64).collect();
        if lo < 0.0 && hi > 0.0 {
            levels.push(0.0);
        }
        for level in levels {
            let (color, width, dash) = match level.partial_cmp(&0.0) {
                Some(std::cmp::Ordering::Greater) => ("#c0392b", 0.8, ""),
                Some(std::cmp::Ordering::Less) => ("#2e6da4", 0.8, " stroke-dasharray=\"3 2\""),
                _ => ("#222", 1.4, ""),
            };
            let mut d = String::new();
            for [(x0, y0), (x1, y1)] in contour_segments(field, level) {
                let c1 = self.center.alpha1;
                let c2 = self.center.alpha2;
                // Keep each segment together when it straddles the window seam.
                let (ox, oy) = (Self::wrap(x0, c1) - x0, Self::wrap(y0, c2) - y0);
                let (p0, p1) = (self.px(x0 + ox, y0 + oy), self.px(x1 + ox, y1 + oy));
                let _ = write!(d, "M{:.2} {:.2}L{:.2} {:.2}", p0.0, p0.1, p1.0, p1.1);
            }
            if !d.is_empty() {
                let _ = writeln!(
                    self.body,
                    "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"{dash}/>"
                );
            }
        }
        self
    }

    /// Arrow glyphs for a vector field given at grid nodes, scaled so the
    /// longest arrow spans most of a glyph cell.
    pub fn arrows(&mut self, layout: GridLayout, vectors: &[[f64; 2]]) -> &mut Self {
        let n = layout.n;
        let stride = (n / ARROWS_PER_SIDE).max(1);
        let longest = vectors.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
        if !(longest > 0.0) {
            return self;
        }
        let cell = TAU * stride as f64 / n as f64;
        let scale = 0.8 * cell / longest;
        for i in (0..n).step_by(stride) {
            for j in (0..n).step_by(stride) {
                let idx = layout.index(i as isize, j as isize);
                let (a1, a2) = layout.coords(idx);
                let (a1, a2) = (Self::wrap(a1, self.center.alpha1), Self::wrap(a2, self.center.alpha2));
                let [u, v] = vectors[idx];
                let (x0, y0) = self.px(a1 - 0.5 * scale * u, a2 - 0.5 * scale * v);
                let (x1, y1) = self.px(a1 + 0.5 * scale * u, a2 + 0.5 * scale * v);
                let len = (x1 - x0).hypot(y1 - y0);
                if len < 0.5 {
                    continue;
                }
                let (ux, uy) = ((x1 - x0) / len, (y1 - y0) / len);
                let head = (0.35 * len).min(5.0);
                let (lx, ly) = (x1 - head * (ux - 0.5 * uy), y1 - head * (uy + 0.5 * ux));
                let (rx, ry) = (x1 - head * (ux + 0.5 * uy), y1 - head * (uy - 0.5 * ux));
                let _ = writeln!(
                    self.body,
                    "<path d=\"M{x0:.2} {y0:.2}L{x1:.2} {y1:.2}M{lx:.2} {ly:.2}L{x1:.2} {y1:.2}L{rx:.2} {ry:.2}\" \
                     fill=\"none\" stroke=\"#555\" stroke-width=\"0.7\"/>"
                );
            }
        }
        self
    }

    /// A gait loop with stroke width inversely proportional to shape speed.
    pub fn gait(&mut self, gait: &Gait, color: &str) -> &mut Self {
        let pts: Vec<(Shape, f64)> = (0..=GAIT_SAMPLES)
            .map(|k| {
                let (r, v) = gait.evaluate(gait.period * k as f64 / GAIT_SAMPLES as f64);
                (r, v.norm())
            })
            .collect();
        let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        if !(mean > 0.0) {
            let (x, y) = self.px(pts[0].0.alpha1, pts[0].0.alpha2);
            let _ = writeln!(self.body, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"{color}\"/>");
            return self;
        }
        for w in pts.windows(2) {
            let (a, b) = (w[0].0, w[1].0);
            let speed = 0.5 * (w[0].1 + w[1].1);
            let width = (GAIT_WIDTH * mean / speed.max(1e-9)).clamp(0.6, 9.0);
            let (x0, y0) = self.px(a.alpha1, a.alpha2);
            let (x1, y1) = self.px(b.alpha1, b.alpha2);
            let _ = writeln!(
                self.body,
                "<line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x1:.2}\" y2=\"{y1:.2}\" stroke=\"{color}\" \
                 stroke-width=\"{width:.2}\" stroke-linecap=\"round\"/>"
            );
        }
        self
    }

    pub fn to_svg(&self) -> String {
        let total = SIZE + 2.0 * MARGIN;
        let (c1, c2) = (self.center.alpha1, self.center.alpha2);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{total}\" height=\"{total}\" viewBox=\"0 0 {total} {total}\" \
             font-family=\"sans-serif\" font-size=\"12\">"
        );
        let _ = writeln!(
            s,
            "<defs><clipPath id=\"plot\"><rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{SIZE}\" height=\"{SIZE}\"/></clipPath></defs>"
        );
        let _ = writeln!(s, "<rect width=\"{total}\" height=\"{total}\" fill=\"white\"/>");
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", total / 2.0, MARGIN - 16.0, self.title);
        let _ = writeln!(s, "<g clip-path=\"url(#plot)\">\n{}</g>", self.body);
        let _ = writeln!(
            s,
            "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{SIZE}\" height=\"{SIZE}\" fill=\"none\" stroke=\"black\"/>"
        );
        for (k, frac) in [0.0, 0.5, 1.0].into_iter().enumerate() {
            let x = MARGIN + frac * SIZE;
            let y = MARGIN + (1.0 - frac) * SIZE;
            let _ = writeln!(s, "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{:.2}</text>", MARGIN + SIZE + 16.0, c1 - PI + k as f64 * PI);
            let _ = writeln!(s, "<text x=\"{}\" y=\"{y}\" text-anchor=\"end\" dy=\"4\">{:.2}</text>", MARGIN - 6.0, c2 - PI + k as f64 * PI);
        }
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">α1</text>", total / 2.0, total - 8.0);
        let _ = writeln!(
            s,
            "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">α2</text>",
            total / 2.0,
            total / 2.0
        );
        s.push_str("</svg>\n");
        s
    }
}

/// Marching-squares segments of `field = level` over every periodic cell,
/// in unwrapped shape coordinates (each segment lies within one cell).
pub fn contour_segments(field: &ScalarGrid, level: f64) -> Vec<[(f64, f64); 2]> {
    let layout = field.layout;
    let n = layout.n as isize;
    let h = layout.spacing();
    let v = |i: isize, j: isize| field.values[layout.index(i, j)] - level;
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            // Corners counterclockwise from (i, j).
            let c = [v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)];
            let corner = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
            let mut crossings = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (c[e], c[(e + 1) % 4]);
                if (a > 0.0) != (b > 0.0) {
                    let t = a / (a - b);
                    let (p, q) = (corner[e], corner[(e + 1) % 4]);
                    crossings.push((e, (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))));
                }
            }
            let at = |(u, w): (f64, f64)| ((i as f64 + u) * h, (j as f64 + w) * h);
            match crossings.len() {
                2 => out.push([at(crossings[0].1), at(crossings[1].1)]),
                4 => {
                    // Saddle: pair edges by the sign of the cell center.
                    let center = 0.25 * c.iter().sum::<f64>();
                    let pairs = if (center > 0.0) == (c[0] > 0.0) { [(0, 3), (1, 2)] } else { [(0, 1), (2, 3)] };
                    for (a, b) in pairs {
                        out.push([at(crossings[a].1), at(crossings[b].1)]);
                    }
                }
                _ => {}
            }
        }
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

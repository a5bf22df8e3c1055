//! Oriented piecewise-smooth Jordan curves built from circular arcs and line
//! segments, with exact winding numbers, point-to-curve distances and
//! quadrature rules for `∮_Γ g(z) dz`.
//!
//! Full circles use the periodic trapezoidal rule in the angle (spectrally
//! accurate for integrands holomorphic near the curve); line segments and
//! partial arcs use Gauss–Legendre in the curve parameter.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_NODES_PER_SEGMENT: usize = 64;

/// Points closer than `ON_CURVE_REL · scale` to the curve are treated as on it.
pub const ON_CURVE_REL: f64 = 1e-12;

const CLOSURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Segment {
    /// `center + radius·e^{iθ}` for θ running from `start_angle` to `end_angle`.
    CircleArc {
        center: Complex64,
        radius: f64,
        start_angle: f64,
        end_angle: f64,
    },
    LineSegment { start: Complex64, end: Complex64 },
}

impl Segment {
    pub fn start(&self) -> Complex64 {
        match *self {
            Segment::CircleArc { center, radius, start_angle, .. } => {
                center + Complex64::from_polar(radius, start_angle)
            }
            Segment::LineSegment { start, .. } => start,
        }
    }

    pub fn end(&self) -> Complex64 {
        match *self {
            Segment::CircleArc { center, radius, end_angle, .. } => {
                center + Complex64::from_polar(radius, end_angle)
            }
            Segment::LineSegment { end, .. } => end,
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Segment::CircleArc { radius, start_angle, end_angle, .. } => {
                radius * (end_angle - start_angle).abs()
            }
            Segment::LineSegment { start, end } => (end - start).norm(),
        }
    }

    fn is_full_circle(&self) -> bool {
        matches!(*self, Segment::CircleArc { start_angle, end_angle, .. }
            if ((end_angle - start_angle).abs() - TAU).abs() < 1e-14)
    }

    pub fn distance_to(&self, w: Complex64) -> f64 {
        match *self {
            Segment::LineSegment { start, end } => {
                let d = end - start;
                let len2 = d.norm_sqr();
                if len2 == 0.0 {
                    return (w - start).norm();
                }
                let t = ((w - start) * d.conj()).re / len2;
                let t = t.clamp(0.0, 1.0);
                (w - (start + d * t)).norm()
            }
            Segment::CircleArc { center, radius, start_angle, end_angle } => {
                let rel = w - center;
                if self.is_full_circle() || angle_in_range(rel.arg(), start_angle, end_angle) {
                    (rel.norm() - radius).abs()
                } else {
                    (w - self.start()).norm().min((w - self.end()).norm())
                }
            }
        }
    }

    /// Change of `arg(z − w)` along the segment; `w` must not lie on it.
    fn angle_increment(&self, w: Complex64) -> f64 {
        match *self {
            Segment::LineSegment { start, end } => ((end - w) / (start - w)).arg(),
            Segment::CircleArc { center, radius, start_angle, end_angle } => {
                // Pieces of at most a quarter turn: the increment along each
                // piece is the chord increment, plus ±2π when w sits between
                // the chord and the arc.
                let span = end_angle - start_angle;
                let pieces = ((span.abs() / (PI / 2.0)).ceil() as usize).max(1);
                let step = span / pieces as f64;
                let mut total = 0.0;
                for k in 0..pieces {
                    let a0 = start_angle + step * k as f64;
                    let a1 = a0 + step;
                    let p = center + Complex64::from_polar(radius, a0);
                    let q = center + Complex64::from_polar(radius, a1);
                    total += ((q - w) / (p - w)).arg();
                    let inside_disk = (w - center).norm() < radius;
                    // w is on the arc side of the chord p→q.
                    let chord = q - p;
                    let side = (chord.conj() * (w - p)).im;
                    let arc_side = if step > 0.0 { side < 0.0 } else { side > 0.0 };
                    if inside_disk && arc_side {
                        total += TAU * step.signum();
                    }
                }
                total
            }
        }
    }
}

fn angle_in_range(theta: f64, start: f64, end: f64) -> bool {
    let (lo, hi) = if start <= end { (start, end) } else { (end, start) };
    let mut t = theta;
    while t < lo {
        t += TAU;
    }
    while t > lo + TAU {
        t -= TAU;
    }
    t <= hi
}

/// Closed oriented curve. Builders produce counterclockwise simple curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    segments: Vec<Segment>,
    counterclockwise: bool,
}

impl Contour {
    /// Chains `segments` end-to-start; fails unless the chain closes up.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidParameter("contour needs at least one segment".into()));
        }
        for seg in &segments {
            match *seg {
                Segment::CircleArc { radius, start_angle, end_angle, center } => {
                    if !(radius.is_finite() && radius > 0.0) {
                        return Err(Error::InvalidParameter(format!("arc radius {radius} must be positive")));
                    }
                    if !(start_angle.is_finite() && end_angle.is_finite() && center.is_finite()) {
                        return Err(Error::NonFinite("arc parameters"));
                    }
                }
                Segment::LineSegment { start, end } => {
                    if !(start.is_finite() && end.is_finite()) {
                        return Err(Error::NonFinite("segment endpoints"));
                    }
                }
            }
        }
        let mut contour = Self {
            segments,
            counterclockwise: true,
        };
        let scale = contour.scale();
        let k = contour.segments.len();
        for i in 0..k {
            let gap = (contour.segments[i].end() - contour.segments[(i + 1) % k].start()).norm();
            if gap > CLOSURE_TOL * scale {
                return Err(Error::InvalidParameter(format!(
                    "segment {i} ends {gap:e} away from the start of segment {}",
                    (i + 1) % k
                )));
            }
        }
        contour.counterclockwise = contour.signed_area() > 0.0;
        Ok(contour)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_counterclockwise(&self) -> bool {
        self.counterclockwise
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    /// Diameter of the bounding box; the reference length for relative tolerances.
    pub fn scale(&self) -> f64 {
        let (mut lo, mut hi) = (
            Complex64::new(f64::INFINITY, f64::INFINITY),
            Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        let mut extend = |z: Complex64| {
            lo = Complex64::new(lo.re.min(z.re), lo.im.min(z.im));
            hi = Complex64::new(hi.re.max(z.re), hi.im.max(z.im));
        };
        for seg in &self.segments {
            match *seg {
                Segment::CircleArc { center, radius, .. } => {
                    extend(center + Complex64::new(radius, radius));
                    extend(center - Complex64::new(radius, radius));
                }
                Segment::LineSegment { start, end } => {
                    extend(start);
                    extend(end);
                }
            }
        }
        (hi - lo).norm().max(f64::MIN_POSITIVE)
    }

    fn signed_area(&self) -> f64 {
        // ½∮ x dy − y dx, exact for lines and arcs.
        self.segments
            .iter()
            .map(|seg| match *seg {
                Segment::LineSegment { start, end } => 0.5 * (start.re * end.im - end.re * start.im),
                Segment::CircleArc { center, radius, start_angle, end_angle } => {
                    let (a, b) = (start_angle, end_angle);
                    0.5 * (radius * radius * (b - a)
                        + radius * center.re * (b.sin() - a.sin())
                        - radius * center.im * (b.cos() - a.cos()))
                }
            })
            .sum()
    }

    pub fn distance_to(&self, w: Complex64) -> f64 {
        self.segments
            .iter()
            .map(|s| s.distance_to(w))
            .fold(f64::INFINITY, f64::min)
    }

    /// Winding number of the curve (as traversed) about `w`.
    pub fn winding_number(&self, w: Complex64) -> Result<i64> {
        let distance = self.distance_to(w);
        if distance < ON_CURVE_REL * self.scale() {
            return Err(Error::OnCurve { point: w, distance });
        }
        let total: f64 = self.segments.iter().map(|s| s.angle_increment(w)).sum();
        Ok((total / TAU).round() as i64)
    }

    /// Whether `w` lies in the interior of the curve.
    pub fn contains(&self, w: Complex64) -> Result<bool> {
        let orientation = if self.counterclockwise { 1 } else { -1 };
        Ok(self.winding_number(w)? == orientation)
    }

    pub fn quadrature(&self, nodes_per_segment: usize) -> Result<QuadratureRule> {
        if nodes_per_segment < 2 {
            return Err(Error::InvalidParameter(format!(
                "nodes_per_segment = {nodes_per_segment} must be at least 2"
            )));
        }
        let (gl_nodes, gl_weights) = gauss_legendre(nodes_per_segment);
        let mut nodes = Vec::with_capacity(nodes_per_segment * self.segments.len());
        let mut weights = Vec::with_capacity(nodes.capacity());
        for seg in &self.segments {
            match *seg {
                Segment::CircleArc { center, radius, start_angle, end_angle } if seg.is_full_circle() => {
                    let h = (end_angle - start_angle) / nodes_per_segment as f64;
                    for j in 0..nodes_per_segment {
                        let e = Complex64::from_polar(1.0, start_angle + h * j as f64);
                        nodes.push(center + e * radius);
                        weights.push(Complex64::i() * e * (radius * h));
                    }
                }
                Segment::CircleArc { center, radius, start_angle, end_angle } => {
                    let half = 0.5 * (end_angle - start_angle);
                    let mid = 0.5 * (end_angle + start_angle);
                    for (t, w) in gl_nodes.iter().zip(&gl_weights) {
                        let e = Complex64::from_polar(1.0, mid + half * t);
                        nodes.push(center + e * radius);
                        weights.push(Complex64::i() * e * (radius * half * w));
                    }
                }
                Segment::LineSegment { start, end } => {
                    let half = (end - start) * 0.5;
                    let mid = (end + start) * 0.5;
                    for (t, w) in gl_nodes.iter().zip(&gl_weights) {
                        nodes.push(mid + half * *t);
                        weights.push(half * *w);
                    }
                }
            }
        }
        Ok(QuadratureRule {
            nodes,
            weights,
            nodes_per_segment,
        })
    }
}

/// Counterclockwise circle `|z − center| = radius`.
pub fn circle(center: Complex64, radius: f64) -> Result<Contour> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidParameter(format!("circle radius {radius} must be positive")));
    }
    Contour::new(vec![Segment::CircleArc {
        center,
        radius,
        start_angle: 0.0,
        end_angle: TAU,
    }])
}

/// Rectangle with right side `x0 + iy, |y| ≤ ρ + 1`, left side at
/// `x0 − ρ − 1`, counterclockwise from the bottom-right corner. Segment order:
/// right side, top, left side, bottom.
pub fn split_rectangle(x0: f64, rho: f64) -> Result<Contour> {
    if !(rho.is_finite() && rho >= 0.0 && x0.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "rectangle needs finite x0 and ρ ≥ 0, got x0 = {x0}, ρ = {rho}"
        )));
    }
    let h = rho + 1.0;
    let br = Complex64::new(x0, -h);
    let tr = Complex64::new(x0, h);
    let tl = Complex64::new(x0 - h, h);
    let bl = Complex64::new(x0 - h, -h);
    Contour::new(vec![
        Segment::LineSegment { start: br, end: tr },
        Segment::LineSegment { start: tr, end: tl },
        Segment::LineSegment { start: tl, end: bl },
        Segment::LineSegment { start: bl, end: br },
    ])
}

/// Nodes `z_j` and complex weights `ω_j` (including `dz`) so that
/// `∮ g dz ≈ Σ ω_j g(z_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<Complex64>,
    pub weights: Vec<Complex64>,
    pub nodes_per_segment: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, g: impl Fn(Complex64) -> Complex64) -> Complex64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| w * g(*z))
            .sum()
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

//! Deterministic composite quadrature on intervals, circles, rectangles and the unit disk.
//!
//! Non-periodic directions use composite Gauss–Legendre panels; periodic directions use the
//! equispaced trapezoid rule with `order * panels` nodes. Node sets depend only on the
//! [`QuadratureSpec`], so every integral in the crate is reproducible bit-for-bit.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature order must be at least 2 (got {0})")]
    Order(usize),
    #[error("panel counts must be positive (got {0}x{1})")]
    Panels(usize, usize),
    #[error("integrand is not finite at node ({x}, {y}): {value}")]
    NonFinite { x: f64, y: f64, value: f64 },
}

/// Node layout for every integral: Gauss–Legendre order per panel and panel counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct QuadratureSpec {
    pub order: usize,
    pub panels_x: usize,
    pub panels_y: usize,
    pub periodic: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { order: 8, panels_x: 64, panels_y: 64, periodic: false }
    }
}

impl QuadratureSpec {
    pub fn new(order: usize, panels_x: usize, panels_y: usize) -> Result<Self, QuadratureError> {
        let spec = QuadratureSpec { order, panels_x, panels_y, periodic: false };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), QuadratureError> {
        if self.order < 2 {
            return Err(QuadratureError::Order(self.order));
        }
        if self.panels_x == 0 || self.panels_y == 0 {
            return Err(QuadratureError::Panels(self.panels_x, self.panels_y));
        }
        Ok(())
    }

    pub fn with_periodic(mut self, periodic: bool) -> Self {
        self.periodic = periodic;
        self
    }

    /// Same order, both panel counts multiplied by `factor`.
    pub fn refined(mut self, factor: usize) -> Self {
        self.panels_x *= factor;
        self.panels_y *= factor;
        self
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on P_n from the Chebyshev-like initial guess.
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A flattened one-dimensional rule: absolute nodes and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    /// Composite Gauss–Legendre on [a, b].
    pub fn gauss(a: f64, b: f64, order: usize, panels: usize) -> Self {
        let gl = GaussLegendre::new(order);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(order * panels);
        let mut weights = Vec::with_capacity(order * panels);
        for p in 0..panels {
            let lo = a + h * p as f64;
            let mid = lo + 0.5 * h;
            for (z, w) in gl.nodes.iter().zip(&gl.weights) {
                nodes.push(mid + 0.5 * h * z);
                weights.push(0.5 * h * w);
            }
        }
        Rule1d { nodes, weights }
    }

    /// Equispaced trapezoid on a period [a, a + (b - a)).
    pub fn trapezoid(a: f64, b: f64, n: usize) -> Self {
        let h = (b - a) / n as f64;
        Rule1d { nodes: (0..n).map(|i| a + h * i as f64).collect(), weights: vec![h; n] }
    }

    pub fn for_spec(a: f64, b: f64, spec: &QuadratureSpec, panels: usize) -> Self {
        if spec.periodic {
            Rule1d::trapezoid(a, b, spec.order * panels)
        } else {
            Rule1d::gauss(a, b, spec.order, panels)
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> Result<f64, QuadratureError> {
        let mut sum = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(x);
            if !v.is_finite() {
                return Err(QuadratureError::NonFinite { x, y: f64::NAN, value: v });
            }
            sum += w * v;
        }
        Ok(sum)
    }
}

/// Composite rule on [a, b]; trapezoid if `spec.periodic`.
pub fn integrate_1d<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<f64, QuadratureError> {
    spec.validate()?;
    Rule1d::for_spec(a, b, spec, spec.panels_x).integrate(f)
}

/// Integral over the unit circle R/Z (always periodic).
pub fn integrate_circle<F: FnMut(f64) -> f64>(
    f: F,
    spec: &QuadratureSpec,
) -> Result<f64, QuadratureError> {
    integrate_1d(f, 0.0, 1.0, &spec.with_periodic(true))
}

/// Tensor-product rule on [x0, x1] x [y0, y1]. Only the x direction honours `periodic`.
pub fn integrate_2d<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
    spec: &QuadratureSpec,
) -> Result<f64, QuadratureError> {
    spec.validate()?;
    let rx = Rule1d::for_spec(x0, x1, spec, spec.panels_x);
    let ry = Rule1d::gauss(y0, y1, spec.order, spec.panels_y);
    let mut sum = 0.0;
    for (&x, &wx) in rx.nodes.iter().zip(&rx.weights) {
        let mut col = 0.0;
        for (&y, &wy) in ry.nodes.iter().zip(&ry.weights) {
            let v = f(x, y);
            if !v.is_finite() {
                return Err(QuadratureError::NonFinite { x, y, value: v });
            }
            col += wy * v;
        }
        sum += wx * col;
    }
    Ok(sum)
}

/// Integral over the closed unit disk in polar nodes: Gauss in r (panels_x), trapezoid in angle
/// (order * panels_y nodes). The integrand is still evaluated in Cartesian coordinates.
pub fn integrate_disk<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    radius: f64,
    spec: &QuadratureSpec,
) -> Result<f64, QuadratureError> {
    spec.validate()?;
    let rr = Rule1d::gauss(0.0, radius, spec.order, spec.panels_x);
    let ra = Rule1d::trapezoid(0.0, 2.0 * PI, spec.order * spec.panels_y);
    let mut sum = 0.0;
    for (&r, &wr) in rr.nodes.iter().zip(&rr.weights) {
        let mut ring = 0.0;
        for (&a, &wa) in ra.nodes.iter().zip(&ra.weights) {
            let (x, y) = (r * a.cos(), r * a.sin());
            let v = f(x, y);
            if !v.is_finite() {
                return Err(QuadratureError::NonFinite { x, y, value: v });
            }
            ring += wa * v;
        }
        sum += wr * r * ring;
    }
    Ok(sum)
}

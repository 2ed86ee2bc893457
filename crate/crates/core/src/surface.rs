//! Compact surfaces with boundary presented as quotients of a strip (annulus, Möbius band) or
//! as the unit disk, together with even and twisted differential forms on them.
//!
//! Twisted forms live on the oriented strip cover as forms that change sign under the deck
//! map `τ(x, y) = (x + 1, flip·y)` whenever `τ` reverses orientation. Symbolic coefficients
//! are evaluated after reducing a cover point to the fundamental domain, so forms with
//! compact support inside the domain extend equivariantly.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fieldexpr::{bump, CompiledExpr, Expr, Var, BUMP_INTEGRAL};
use crate::quadrature::{integrate_1d, integrate_2d, integrate_disk, QuadratureError, QuadratureSpec};

/// Seam sample count for equivariance checks.
pub const SEAM_SAMPLES: usize = 256;
/// Tolerance for seam equivariance checks.
pub const SEAM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("expected a {expected}-form, got a {found}-form")]
    Degree { expected: &'static str, found: u8 },
    #[error("parity mismatch: {0}")]
    Parity(&'static str),
    #[error("an even 2-form is not a density on the Möbius band and cannot be integrated")]
    EvenDensity,
    #[error("operation needs symbolic coefficients")]
    NotSymbolic,
    #[error("form coefficients may only use x and y, found `{0}`")]
    BadVariable(&'static str),
    #[error("seam equivariance fails at ({x}, {y}): defect {defect:e}")]
    NotEquivariant { x: f64, y: f64, defect: f64 },
    #[error("1-form is not closed: |d lambda| = {defect:e} at ({x}, {y})")]
    NotClosed { x: f64, y: f64, defect: f64 },
    #[error("invalid half-width {0}")]
    HalfWidth(f64),
    #[error("invalid arc: {0}")]
    Arc(String),
    #[error("{0} is not supported on the disk")]
    Disk(&'static str),
    #[error("forms live on different surfaces")]
    SurfaceMismatch,
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKind {
    Disk,
    Annulus,
    Mobius,
}

impl SurfaceKind {
    pub const ALL: [SurfaceKind; 3] = [SurfaceKind::Disk, SurfaceKind::Annulus, SurfaceKind::Mobius];

    pub fn name(self) -> &'static str {
        match self {
            SurfaceKind::Disk => "disk",
            SurfaceKind::Annulus => "annulus",
            SurfaceKind::Mobius => "mobius",
        }
    }
}

impl fmt::Display for SurfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn intersect(&self, o: &Rect) -> Option<Rect> {
        let r = Rect::new(self.x0.max(o.x0), self.x1.min(o.x1), self.y0.max(o.y0), self.y1.min(o.y1));
        (r.x0 < r.x1 && r.y0 < r.y1).then_some(r)
    }

    pub fn hull(&self, o: &Rect) -> Rect {
        Rect::new(self.x0.min(o.x0), self.x1.max(o.x1), self.y0.min(o.y0), self.y1.max(o.y1))
    }

    pub fn expand(&self, m: f64) -> Rect {
        Rect::new(self.x0 - m, self.x1 + m, self.y0 - m, self.y1 + m)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuotientSurface {
    pub kind: SurfaceKind,
    /// Strip half-width `w`; ignored for the disk.
    pub half_width: f64,
}

impl QuotientSurface {
    pub fn new(kind: SurfaceKind, half_width: f64) -> Result<Self, SurfaceError> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(SurfaceError::HalfWidth(half_width));
        }
        Ok(QuotientSurface { kind, half_width })
    }

    pub fn disk() -> Self {
        QuotientSurface { kind: SurfaceKind::Disk, half_width: 0.5 }
    }

    pub fn annulus() -> Self {
        QuotientSurface { kind: SurfaceKind::Annulus, half_width: 0.5 }
    }

    pub fn mobius() -> Self {
        QuotientSurface { kind: SurfaceKind::Mobius, half_width: 0.5 }
    }

    pub fn is_strip(&self) -> bool {
        self.kind != SurfaceKind::Disk
    }

    /// Sign of the Jacobian of τ: −1 on the Möbius band, +1 otherwise.
    pub fn flip(&self) -> f64 {
        if self.kind == SurfaceKind::Mobius {
            -1.0
        } else {
            1.0
        }
    }

    pub fn deck(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0] + 1.0, self.flip() * p[1]]
    }

    pub fn deck_inv(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0] - 1.0, self.flip() * p[1]]
    }

    /// `p = τ^k(p0)` with `p0` in the fundamental domain; returns `(p0, k)`.
    /// The disk is its own chart and returns `(p, 0)`.
    pub fn reduce(&self, p: [f64; 2]) -> ([f64; 2], i64) {
        if !self.is_strip() {
            return (p, 0);
        }
        let k = p[0].floor();
        let ki = k as i64;
        let y = if self.kind == SurfaceKind::Mobius && ki % 2 != 0 { -p[1] } else { p[1] };
        ([p[0] - k, y], ki)
    }

    /// `flip^k`.
    pub fn flip_pow(&self, k: i64) -> f64 {
        if self.kind == SurfaceKind::Mobius && k % 2 != 0 {
            -1.0
        } else {
            1.0
        }
    }

    /// Bounding rectangle of the fundamental domain.
    pub fn domain(&self) -> Rect {
        match self.kind {
            SurfaceKind::Disk => Rect::new(-1.0, 1.0, -1.0, 1.0),
            _ => Rect::new(0.0, 1.0, -self.half_width, self.half_width),
        }
    }

    /// ∫ω: `2w` on strips, `π` on the disk.
    pub fn area(&self) -> f64 {
        match self.kind {
            SurfaceKind::Disk => std::f64::consts::PI,
            _ => 2.0 * self.half_width,
        }
    }

    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        match self.kind {
            SurfaceKind::Disk => p[0].hypot(p[1]) <= 1.0 + tol,
            _ => p[1].abs() <= self.half_width + tol,
        }
    }

    /// Distance to the boundary (negative outside).
    pub fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        match self.kind {
            SurfaceKind::Disk => 1.0 - p[0].hypot(p[1]),
            _ => self.half_width - p[1].abs(),
        }
    }

    /// Integral of a density `f dx∧dy` given in cover coordinates over the fundamental
    /// domain, or over `rect` when given (clipped to the domain on strips).
    pub fn integrate_density<F>(
        &self,
        f: F,
        rect: Option<Rect>,
        spec: &QuadratureSpec,
    ) -> Result<f64, QuadratureError>
    where
        F: FnMut(f64, f64) -> f64,
    {
        match (self.kind, rect) {
            (SurfaceKind::Disk, None) => integrate_disk(f, 1.0, spec),
            (SurfaceKind::Disk, Some(r)) => integrate_2d(f, (r.x0, r.x1), (r.y0, r.y1), spec),
            (_, r) => {
                let dom = self.domain();
                let r = match r {
                    Some(r) => match r.intersect(&dom) {
                        Some(r) => r,
                        None => return Ok(0.0),
                    },
                    None => dom,
                };
                integrate_2d(f, (r.x0, r.x1), (r.y0, r.y1), spec)
            }
        }
    }
}

impl QuotientSurface {
    /// Disjoint rectangles of the fundamental domain covering the projection of `rects`.
    ///
    /// Cover rectangles are moved into the domain by deck translates; overlapping pieces are
    /// replaced by their hull.
    pub fn fundamental_pieces(&self, rects: &[Rect]) -> Vec<Rect> {
        let mut pieces = Vec::new();
        for r in rects {
            if !self.is_strip() {
                pieces.push(*r);
                continue;
            }
            let dom = self.domain();
            let k0 = r.x0.floor() as i64;
            let k1 = r.x1.floor() as i64;
            for k in k0..=k1 {
                let f = self.flip_pow(k);
                let (y0, y1) = if f > 0.0 { (r.y0, r.y1) } else { (-r.y1, -r.y0) };
                let moved = Rect::new(r.x0 - k as f64, r.x1 - k as f64, y0, y1);
                if let Some(p) = moved.intersect(&dom) {
                    pieces.push(p);
                }
            }
        }
        merge_overlaps(pieces)
    }
}

/// Replaces overlapping rectangles by their hull until the set is disjoint.
pub(crate) fn merge_overlaps(mut pieces: Vec<Rect>) -> Vec<Rect> {
    loop {
        let mut merged = false;
        'outer: for i in 0..pieces.len() {
            for j in i + 1..pieces.len() {
                if pieces[i].intersect(&pieces[j]).is_some() {
                    let h = pieces[i].hull(&pieces[j]);
                    pieces.swap_remove(j);
                    pieces[i] = h;
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            return pieces;
        }
    }
}

impl fmt::Display for QuotientSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SurfaceKind::Disk => f.write_str("disk"),
            k => write!(f, "{k}(w={})", self.half_width),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn product(self, o: Parity) -> Parity {
        if self == o {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// A point map on the strip cover (or the disk) with its Jacobian. Implementations on strip
/// surfaces commute with the deck map.
pub trait SurfaceMap: Send + Sync {
    /// `(g(p), Dg(p))` with `Dg[i][j] = ∂g^i/∂x_j`.
    fn jet(&self, p: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]);

    fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        self.jet(p).0
    }

    /// A rectangle in fundamental-domain coordinates outside of which (and of its deck
    /// translates) the map is the identity; `None` if unknown.
    fn support(&self) -> Option<Rect> {
        None
    }
}

impl<T: SurfaceMap + ?Sized> SurfaceMap for Arc<T> {
    fn jet(&self, p: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        (**self).jet(p)
    }

    fn support(&self) -> Option<Rect> {
        (**self).support()
    }
}

/// The identity map.
pub struct IdentityMap;

impl SurfaceMap for IdentityMap {
    fn jet(&self, p: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        (p, [[1.0, 0.0], [0.0, 1.0]])
    }

    fn support(&self) -> Option<Rect> {
        Some(Rect::new(0.5, 0.5, 0.0, 0.0))
    }
}

type NumericFn = dyn Fn(f64, f64) -> [f64; 2] + Send + Sync;

#[derive(Clone)]
enum Repr {
    Symbolic { exprs: Arc<Vec<Expr>>, compiled: Arc<Vec<CompiledExpr>> },
    Numeric(Arc<NumericFn>),
}

/// A differential form of degree 0, 1 or 2 on a [`QuotientSurface`].
///
/// Components: degree 0 `[f]`, degree 1 `[P, Q]` for `P dx + Q dy`, degree 2 `[f]` for
/// `f dx∧dy`.
#[derive(Clone)]
pub struct FormField {
    surface: QuotientSurface,
    degree: u8,
    parity: Parity,
    repr: Repr,
    support: Option<Rect>,
}

impl fmt::Debug for FormField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FormField({self})")
    }
}

impl fmt::Display for FormField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let par = match self.parity {
            Parity::Even => "even",
            Parity::Odd => "odd",
        };
        match &self.repr {
            Repr::Numeric(_) => write!(f, "<numeric {par} {}-form>", self.degree),
            Repr::Symbolic { exprs, .. } => match self.degree {
                1 => write!(f, "({}) dx + ({}) dy [{par}]", exprs[0], exprs[1]),
                2 => write!(f, "({}) dx^dy [{par}]", exprs[0]),
                _ => write!(f, "{} [{par}]", exprs[0]),
            },
        }
    }
}

fn check_vars(e: &Expr) -> Result<(), SurfaceError> {
    match e.variables().into_iter().find(|v| !matches!(v, Var::X | Var::Y)) {
        Some(v) => Err(SurfaceError::BadVariable(v.name())),
        None => Ok(()),
    }
}

impl FormField {
    fn symbolic(
        surface: QuotientSurface,
        degree: u8,
        parity: Parity,
        exprs: Vec<Expr>,
    ) -> Result<Self, SurfaceError> {
        for e in &exprs {
            check_vars(e)?;
        }
        let compiled = exprs.iter().map(Expr::compile).collect();
        let form = FormField {
            surface,
            degree,
            parity,
            repr: Repr::Symbolic { exprs: Arc::new(exprs), compiled: Arc::new(compiled) },
            support: None,
        };
        form.check_seam()?;
        Ok(form)
    }

    pub fn zero_form(s: QuotientSurface, parity: Parity, f: Expr) -> Result<Self, SurfaceError> {
        FormField::symbolic(s, 0, parity, vec![f])
    }

    /// `P dx + Q dy`.
    pub fn one_form(s: QuotientSurface, parity: Parity, p: Expr, q: Expr) -> Result<Self, SurfaceError> {
        FormField::symbolic(s, 1, parity, vec![p, q])
    }

    /// `f dx∧dy`.
    pub fn two_form(s: QuotientSurface, parity: Parity, f: Expr) -> Result<Self, SurfaceError> {
        FormField::symbolic(s, 2, parity, vec![f])
    }

    /// A form given by a closure on the cover, returning the components as documented on the
    /// type. The closure must already be equivariant.
    pub fn numeric<F>(s: QuotientSurface, degree: u8, parity: Parity, f: F) -> Self
    where
        F: Fn(f64, f64) -> [f64; 2] + Send + Sync + 'static,
    {
        assert!(degree <= 2, "degree must be 0, 1 or 2");
        FormField { surface: s, degree, parity, repr: Repr::Numeric(Arc::new(f)), support: None }
    }

    /// Declares that the coefficients vanish outside `rect` (fundamental-domain coordinates).
    pub fn with_support(mut self, rect: Rect) -> Self {
        self.support = Some(rect);
        self
    }

    pub fn surface(&self) -> QuotientSurface {
        self.surface
    }

    pub fn degree(&self) -> u8 {
        self.degree
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn support(&self) -> Option<Rect> {
        self.support
    }

    /// Symbolic coefficients, if any.
    pub fn expressions(&self) -> Option<&[Expr]> {
        match &self.repr {
            Repr::Symbolic { exprs, .. } => Some(exprs.as_slice()),
            Repr::Numeric(_) => None,
        }
    }

    /// Sign picked up by each component when a point moves one sheet: `[σ, σ·flip]` for
    /// degree 1, `[σ]` for degree 0 and `[σ·flip]` for degree 2, σ = flip for odd forms.
    fn sheet_signs(&self) -> [f64; 2] {
        let flip = self.surface.flip();
        let sigma = if self.parity == Parity::Odd { flip } else { 1.0 };
        match self.degree {
            0 => [sigma, sigma],
            1 => [sigma, sigma * flip],
            _ => [sigma * flip, sigma * flip],
        }
    }

    fn raw(&self, x: f64, y: f64) -> [f64; 2] {
        match &self.repr {
            Repr::Symbolic { compiled, .. } => {
                let a = compiled[0].xy(x, y);
                let b = if compiled.len() > 1 { compiled[1].xy(x, y) } else { 0.0 };
                [a, b]
            }
            Repr::Numeric(f) => f(x, y),
        }
    }

    /// Components at a cover point.
    pub fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        match &self.repr {
            Repr::Numeric(f) => f(x, y),
            Repr::Symbolic { .. } => {
                let ([x0, y0], k) = self.surface.reduce([x, y]);
                let v = self.raw(x0, y0);
                if k % 2 == 0 {
                    v
                } else {
                    let s = self.sheet_signs();
                    [s[0] * v[0], s[1] * v[1]]
                }
            }
        }
    }

    /// Equivariance across the seam: the coefficients at `τ(0, y)` against the sign rule
    /// applied at `(0, y)`, on [`SEAM_SAMPLES`] points.
    pub fn check_seam(&self) -> Result<(), SurfaceError> {
        if !self.surface.is_strip() {
            return Ok(());
        }
        let w = self.surface.half_width;
        let s = self.sheet_signs();
        for i in 0..SEAM_SAMPLES {
            let y = -w + 2.0 * w * (i as f64 + 0.5) / SEAM_SAMPLES as f64;
            let a = self.raw(0.0, y);
            let [x1, y1] = self.surface.deck([0.0, y]);
            let b = self.raw(x1, y1);
            let defect = (b[0] - s[0] * a[0]).abs().max((b[1] - s[1] * a[1]).abs());
            if !(defect < SEAM_TOL) {
                return Err(SurfaceError::NotEquivariant { x: 0.0, y, defect });
            }
        }
        Ok(())
    }

    fn same_shape(&self, o: &FormField) -> Result<(), SurfaceError> {
        if self.surface != o.surface {
            return Err(SurfaceError::SurfaceMismatch);
        }
        if self.degree != o.degree {
            return Err(SurfaceError::Degree { expected: "matching", found: o.degree });
        }
        if self.parity != o.parity {
            return Err(SurfaceError::Parity("sum of forms of different parity"));
        }
        Ok(())
    }

    fn hull_support(&self, o: &FormField) -> Option<Rect> {
        match (self.support, o.support) {
            (Some(a), Some(b)) => Some(a.hull(&b)),
            _ => None,
        }
    }

    pub fn add(&self, o: &FormField) -> Result<FormField, SurfaceError> {
        self.combine(o, 1.0)
    }

    pub fn sub(&self, o: &FormField) -> Result<FormField, SurfaceError> {
        self.combine(o, -1.0)
    }

    fn combine(&self, o: &FormField, sign: f64) -> Result<FormField, SurfaceError> {
        self.same_shape(o)?;
        let support = self.hull_support(o);
        if let (Some(a), Some(b)) = (self.expressions(), o.expressions()) {
            let exprs = a.iter().zip(b).map(|(p, q)| p.clone() + Expr::num(sign) * q.clone()).collect();
            let mut f = FormField::symbolic(self.surface, self.degree, self.parity, exprs)?;
            f.support = support;
            return Ok(f);
        }
        let (a, b) = (self.clone(), o.clone());
        let mut f = FormField::numeric(self.surface, self.degree, self.parity, move |x, y| {
            let (u, v) = (a.eval(x, y), b.eval(x, y));
            [u[0] + sign * v[0], u[1] + sign * v[1]]
        });
        f.support = support;
        Ok(f)
    }

    pub fn scale(&self, c: f64) -> FormField {
        if let Some(a) = self.expressions() {
            let exprs = a.iter().map(|p| Expr::num(c) * p.clone()).collect();
            let mut f = FormField::symbolic(self.surface, self.degree, self.parity, exprs)
                .expect("scaling preserves validity");
            f.support = self.support;
            return f;
        }
        let a = self.clone();
        let mut f = FormField::numeric(self.surface, self.degree, self.parity, move |x, y| {
            let u = a.eval(x, y);
            [c * u[0], c * u[1]]
        });
        f.support = self.support;
        f
    }

    /// `d` of a symbolic 0- or 1-form; parity is preserved.
    pub fn exterior_derivative(&self) -> Result<FormField, SurfaceError> {
        let e = self.expressions().ok_or(SurfaceError::NotSymbolic)?;
        let mut f = match self.degree {
            0 => FormField::symbolic(
                self.surface,
                1,
                self.parity,
                vec![e[0].derivative(Var::X), e[0].derivative(Var::Y)],
            )?,
            1 => FormField::symbolic(
                self.surface,
                2,
                self.parity,
                vec![e[1].derivative(Var::X) - e[0].derivative(Var::Y)],
            )?,
            d => return Err(SurfaceError::Degree { expected: "0 or 1", found: d }),
        };
        f.support = self.support;
        Ok(f)
    }

    /// Sampled closedness check of a 1-form: `|∂Q/∂x − ∂P/∂y| < tol` on a 32×32 grid, using
    /// symbolic derivatives when available and central differences otherwise.
    pub fn check_closed(&self, tol: f64) -> Result<(), SurfaceError> {
        if self.degree != 1 {
            return Err(SurfaceError::Degree { expected: "1", found: self.degree });
        }
        let curl: Box<dyn Fn(f64, f64) -> f64> = match self.exterior_derivative() {
            Ok(d) => Box::new(move |x, y| d.eval(x, y)[0]),
            Err(_) => {
                let me = self.clone();
                Box::new(move |x, y| {
                    let h = 1e-5;
                    let qx = (me.eval(x + h, y)[1] - me.eval(x - h, y)[1]) / (2.0 * h);
                    let py = (me.eval(x, y + h)[0] - me.eval(x, y - h)[0]) / (2.0 * h);
                    qx - py
                })
            }
        };
        for (x, y) in grid_points(&self.surface, 32) {
            let defect = curl(x, y).abs();
            if !(defect < tol) {
                return Err(SurfaceError::NotClosed { x, y, defect });
            }
        }
        Ok(())
    }
}

/// Interior sample points of the fundamental domain (`n × n` cell centres; disk points are
/// those of the square grid inside radius 0.98).
pub fn grid_points(s: &QuotientSurface, n: usize) -> Vec<(f64, f64)> {
    let d = s.domain();
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let x = d.x0 + d.width() * (i as f64 + 0.5) / n as f64;
            let y = d.y0 + d.height() * (j as f64 + 0.5) / n as f64;
            if s.kind != SurfaceKind::Disk || x.hypot(y) < 0.98 {
                pts.push((x, y));
            }
        }
    }
    pts
}

/// The area density `dx∧dy` (odd).
pub fn standard_area_form(s: QuotientSurface) -> FormField {
    FormField::two_form(s, Parity::Odd, Expr::num(1.0)).expect("constant density is equivariant")
}

/// A primitive η of the area form: `−y dx` on strips, `(x dy − y dx)/2` on the disk.
pub fn standard_primitive(s: QuotientSurface) -> FormField {
    let (x, y) = (Expr::var(Var::X), Expr::var(Var::Y));
    let (p, q) = match s.kind {
        SurfaceKind::Disk => (-y * 0.5, x * 0.5),
        _ => (-y, Expr::num(0.0)),
    };
    FormField::one_form(s, Parity::Odd, p, q).expect("standard primitive is equivariant")
}

/// `a ∧ b` for 1-forms; the result is even iff the parities agree.
pub fn wedge(a: &FormField, b: &FormField) -> Result<FormField, SurfaceError> {
    if a.surface != b.surface {
        return Err(SurfaceError::SurfaceMismatch);
    }
    for f in [a, b] {
        if f.degree != 1 {
            return Err(SurfaceError::Degree { expected: "1", found: f.degree });
        }
    }
    let parity = a.parity.product(b.parity);
    let support = match (a.support, b.support) {
        (Some(r), Some(s)) => Some(r.intersect(&s).unwrap_or(Rect::new(r.x0, r.x0, r.y0, r.y0))),
        (Some(r), None) | (None, Some(r)) => Some(r),
        (None, None) => None,
    };
    let mut f = if let (Some(p), Some(q)) = (a.expressions(), b.expressions()) {
        FormField::symbolic(
            a.surface,
            2,
            parity,
            vec![p[0].clone() * q[1].clone() - p[1].clone() * q[0].clone()],
        )?
    } else {
        let (a, b) = (a.clone(), b.clone());
        FormField::numeric(a.surface, 2, parity, move |x, y| {
            let (u, v) = (a.eval(x, y), b.eval(x, y));
            [u[0] * v[1] - u[1] * v[0], 0.0]
        })
    };
    f.support = support;
    Ok(f)
}

/// `∫_F f` of a density over the fundamental domain (or the declared support of `f`).
pub fn integrate(f: &FormField, spec: &QuadratureSpec) -> Result<f64, SurfaceError> {
    integrate_over(f, f.support, spec)
}

/// `∫ f` over `rect` (fundamental-domain coordinates), or the whole surface for `None`.
pub fn integrate_over(
    f: &FormField,
    rect: Option<Rect>,
    spec: &QuadratureSpec,
) -> Result<f64, SurfaceError> {
    if f.degree != 2 {
        return Err(SurfaceError::Degree { expected: "2", found: f.degree });
    }
    if f.parity == Parity::Even && f.surface.kind == SurfaceKind::Mobius {
        return Err(SurfaceError::EvenDensity);
    }
    Ok(f.surface.integrate_density(|x, y| f.eval(x, y)[0], rect, spec)?)
}

/// `g*f` computed on the cover with the Jacobian of `g`; parity is unchanged.
pub fn pullback(g: Arc<dyn SurfaceMap>, f: &FormField) -> FormField {
    let form = f.clone();
    FormField::numeric(f.surface, f.degree, f.parity, move |x, y| {
        let (q, j) = g.jet([x, y]);
        let v = form.eval(q[0], q[1]);
        match form.degree {
            0 => [v[0], 0.0],
            1 => [v[0] * j[0][0] + v[1] * j[1][0], v[0] * j[0][1] + v[1] * j[1][1]],
            _ => [v[0] * (j[0][0] * j[1][1] - j[0][1] * j[1][0]), 0.0],
        }
    })
}

/// A properly embedded arc on a strip surface, written as the graph `x = x0 + c(y)` over
/// `y ∈ [−w, w]`, with an orientation (+1: increasing y), a tube half-width `ε` and the
/// transverse profile `ρ(s) = bump(s/(4ε)) / (4ε·∫bump)` supported in `[−ε, ε]`.
#[derive(Debug, Clone)]
pub struct ArcData {
    pub x0: f64,
    /// Horizontal offset `c(y)`; `None` for a vertical arc.
    pub offset: Option<Expr>,
    pub orientation: f64,
    pub epsilon: f64,
}

impl ArcData {
    pub fn vertical(x0: f64, orientation: f64, epsilon: f64) -> Self {
        ArcData { x0, offset: None, orientation, epsilon }
    }

    pub fn graph(x0: f64, offset: Expr, orientation: f64, epsilon: f64) -> Self {
        ArcData { x0, offset: Some(offset), orientation, epsilon }
    }

    fn c(&self, y: f64) -> (f64, f64) {
        match &self.offset {
            None => (0.0, 0.0),
            Some(e) => (e.xy(0.0, y), e.derivative(Var::Y).xy(0.0, y)),
        }
    }

    /// Signed transverse coordinate `s = x − x0 − c(y)` and its differential `(1, −c'(y))`.
    pub fn transverse(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        let (c, dc) = self.c(y);
        (x - self.x0 - c, [1.0, -dc])
    }

    /// `γ(t)` and `γ'(t)` for `t ∈ [0, 1]`.
    pub fn point(&self, w: f64, t: f64) -> ([f64; 2], [f64; 2]) {
        let o = if self.orientation >= 0.0 { 1.0 } else { -1.0 };
        let y = o * (-w + 2.0 * w * t);
        let dy = o * 2.0 * w;
        let (c, dc) = self.c(y);
        ([self.x0 + c, y], [dc * dy, dy])
    }

    /// `ρ(s)`.
    pub fn profile(&self, s: f64) -> f64 {
        let e4 = 4.0 * self.epsilon;
        bump(s / e4) / (e4 * BUMP_INTEGRAL)
    }

    /// Checks the arc lies on a strip surface, is properly embedded and that its ε-tube stays
    /// inside the open fundamental domain `0 < x < 1`.
    pub fn validate(&self, s: &QuotientSurface) -> Result<(), SurfaceError> {
        if !s.is_strip() {
            return Err(SurfaceError::Disk("arcs"));
        }
        if !(self.epsilon > 0.0) {
            return Err(SurfaceError::Arc(format!("tube half-width {} must be positive", self.epsilon)));
        }
        if self.orientation == 0.0 || !self.orientation.is_finite() {
            return Err(SurfaceError::Arc("orientation must be +1 or -1".into()));
        }
        if let Some(e) = &self.offset {
            check_vars(e)?;
            if e.depends_on(Var::X) {
                return Err(SurfaceError::Arc("offset may depend on y only".into()));
            }
        }
        let w = s.half_width;
        for i in 0..=SEAM_SAMPLES {
            let y = -w + 2.0 * w * i as f64 / SEAM_SAMPLES as f64;
            let x = self.x0 + self.c(y).0;
            if !(x - self.epsilon > 0.0 && x + self.epsilon < 1.0) {
                return Err(SurfaceError::Arc(format!(
                    "tube around ({x}, {y}) crosses the seam x = 0 ~ 1"
                )));
            }
        }
        Ok(())
    }

    /// Bounding rectangle of the ε-tube.
    pub fn tube_rect(&self, s: &QuotientSurface) -> Rect {
        let w = s.half_width;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=SEAM_SAMPLES {
            let y = -w + 2.0 * w * i as f64 / SEAM_SAMPLES as f64;
            let x = self.x0 + self.c(y).0;
            lo = lo.min(x);
            hi = hi.max(x);
        }
        Rect::new(lo - self.epsilon, hi + self.epsilon, -w, w)
    }

    /// `∫_γ μ` for a 1-form μ, by Gauss quadrature in the arc parameter.
    pub fn line_integral(
        &self,
        s: &QuotientSurface,
        mu: &FormField,
        spec: &QuadratureSpec,
    ) -> Result<f64, SurfaceError> {
        if mu.degree != 1 {
            return Err(SurfaceError::Degree { expected: "1", found: mu.degree });
        }
        let w = s.half_width;
        Ok(integrate_1d(
            |t| {
                let (p, v) = self.point(w, t);
                let m = mu.eval(p[0], p[1]);
                m[0] * v[0] + m[1] * v[1]
            },
            0.0,
            1.0,
            spec,
        )?)
    }
}

/// The Poincaré dual of an arc together with the sign fixed by calibration.
#[derive(Debug, Clone)]
pub struct PoincareDual {
    pub form: FormField,
    /// `λ_γ = sign · ρ(s) ds`.
    pub sign: f64,
    /// Probe values `∫_F μ∧λ_γ` and `∫_γ μ` used to fix the sign.
    pub probe_pairing: f64,
    pub probe_line: f64,
}

/// Closed even 1-form `λ_γ = ±ρ(s) ds` supported in the ε-tube of `arc`, with the sign chosen
/// so that `∫_F μ∧λ_γ = ∫_γ μ` for the probe `μ = bump(y/(2w)) dy`.
pub fn poincare_dual(
    s: &QuotientSurface,
    arc: &ArcData,
    spec: &QuadratureSpec,
) -> Result<PoincareDual, SurfaceError> {
    arc.validate(s)?;
    let x = Expr::var(Var::X);
    let y = Expr::var(Var::Y);
    let c = arc.offset.clone().unwrap_or(Expr::num(0.0));
    let dc = c.derivative(Var::Y);
    let tr = x - Expr::num(arc.x0) - c;
    let e4 = 4.0 * arc.epsilon;
    let rho = Expr::call(crate::fieldexpr::Func::Bump(0), tr / e4) / (e4 * BUMP_INTEGRAL);
    let build = |sign: f64| -> Result<FormField, SurfaceError> {
        let p = Expr::num(sign) * rho.clone();
        let q = -(Expr::num(sign) * rho.clone() * dc.clone());
        Ok(FormField::one_form(*s, Parity::Even, p, q)?.with_support(arc.tube_rect(s)))
    };
    let plus = build(1.0)?;
    let probe = FormField::one_form(
        *s,
        Parity::Even,
        Expr::num(0.0),
        Expr::call(crate::fieldexpr::Func::Bump(0), y / (2.0 * s.half_width)),
    );
    // The probe only needs to be valid on the tube, which stays inside one chart.
    let probe = match probe {
        Ok(p) => p,
        Err(_) => {
            let w2 = 2.0 * s.half_width;
            FormField::numeric(*s, 1, Parity::Even, move |_, y| [0.0, bump(y / w2)])
        }
    };
    let pairing_form = wedge(&probe, &plus)?;
    let probe_pairing = s.integrate_density(
        |x, y| pairing_form.eval(x, y)[0],
        Some(arc.tube_rect(s)),
        spec,
    )?;
    let probe_line = arc.line_integral(s, &probe, spec)?;
    let sign = if probe_pairing * probe_line >= 0.0 { 1.0 } else { -1.0 };
    let form = if sign > 0.0 { plus } else { build(-1.0)? };
    Ok(PoincareDual { form, sign, probe_pairing: sign * probe_pairing, probe_line })
}

/// One vertical arc `x = 1/2` with tube half-width 1/8 on the strip surfaces; empty on the
/// disk.
pub fn cut_system(s: &QuotientSurface) -> Vec<ArcData> {
    if s.is_strip() {
        vec![ArcData::vertical(0.5, 1.0, 0.125)]
    } else {
        Vec::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldexpr::parse;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::new(8, 16, 16).unwrap()
    }

    fn e(src: &str) -> Expr {
        parse(src).unwrap()
    }

    #[test]
    fn deck_relation() {
        let m = QuotientSurface::mobius();
        for &(x, y) in &[(0.25, 0.2), (0.75, -0.45), (-1.5, 0.0)] {
            let p = m.deck(m.deck([x, y]));
            assert_eq!(p, [x + 2.0, y]);
            assert_eq!(m.deck_inv(m.deck([x, y])), [x, y]);
        }
        let (p0, k) = m.reduce([2.25, 0.3]);
        assert_eq!((p0, k), ([0.25, 0.3], 2));
        let (p0, k) = m.reduce([-0.75, 0.3]);
        assert_eq!((p0, k), ([0.25, -0.3], -1));
    }

    #[test]
    fn areas() {
        for s in [QuotientSurface::mobius(), QuotientSurface::annulus(), QuotientSurface::disk()] {
            let a = integrate(&standard_area_form(s), &spec()).unwrap();
            assert!((a - s.area()).abs() < 1e-12, "{s}: {a}");
        }
        let m = QuotientSurface::new(SurfaceKind::Mobius, 0.3).unwrap();
        assert!((integrate(&standard_area_form(m), &spec()).unwrap() - 0.6).abs() < 1e-13);
    }

    #[test]
    fn primitives_are_primitives() {
        for s in [QuotientSurface::mobius(), QuotientSurface::annulus(), QuotientSurface::disk()] {
            let d = standard_primitive(s).exterior_derivative().unwrap();
            for (x, y) in grid_points(&s, 8) {
                assert_eq!(d.eval(x, y)[0], 1.0);
            }
            assert_eq!(d.parity(), Parity::Odd);
        }
    }

    #[test]
    fn disk_primitive_boundary_integral() {
        let eta = standard_primitive(QuotientSurface::disk());
        let v = crate::quadrature::integrate_circle(
            |t| {
                let a = 2.0 * std::f64::consts::PI * t;
                let (s, c) = a.sin_cos();
                let m = eta.eval(c, s);
                2.0 * std::f64::consts::PI * (m[0] * -s + m[1] * c)
            },
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn seam_rules() {
        let m = QuotientSurface::mobius();
        assert!(FormField::one_form(m, Parity::Odd, e("-y"), e("0")).is_ok());
        assert!(matches!(
            FormField::one_form(m, Parity::Even, e("-y"), e("0")),
            Err(SurfaceError::NotEquivariant { .. })
        ));
        assert!(FormField::one_form(m, Parity::Even, e("1"), e("0")).is_ok());
        assert!(FormField::zero_form(m, Parity::Odd, e("y*cos(2*pi*x)")).is_ok());
        assert!(FormField::zero_form(m, Parity::Odd, e("sin(pi*x)")).is_ok());
        assert!(FormField::zero_form(m, Parity::Even, e("cos(2*pi*x)*y^2")).is_ok());
        assert!(FormField::two_form(m, Parity::Even, e("y")).is_ok());
        assert!(FormField::two_form(m, Parity::Odd, e("y")).is_err());
        let a = QuotientSurface::annulus();
        assert!(FormField::one_form(a, Parity::Odd, e("-y"), e("0")).is_ok());
    }

    #[test]
    fn reduction_extends_compact_support_equivariantly() {
        let m = QuotientSurface::mobius();
        let f = FormField::one_form(
            m,
            Parity::Odd,
            e("bump(((x - 0.5)^2 + y^2)/0.16)"),
            e("y*bump(((x - 0.5)^2 + y^2)/0.16)"),
        )
        .unwrap();
        for &(x, y) in &[(0.5, 0.1), (0.3, -0.2)] {
            let a = f.eval(x, y);
            let b = f.eval(x + 1.0, -y);
            // odd 1-form on the Möbius band: P(τp) = −P(p), Q(τp) = Q(p)
            assert_eq!(b, [-a[0], a[1]]);
        }
    }

    #[test]
    fn wedge_rules() {
        let m = QuotientSurface::mobius();
        let dx = FormField::one_form(m, Parity::Even, e("1"), e("0")).unwrap();
        let dy_a = FormField::one_form(QuotientSurface::annulus(), Parity::Even, e("0"), e("1")).unwrap();
        let dx_a = FormField::one_form(QuotientSurface::annulus(), Parity::Even, e("1"), e("0")).unwrap();
        assert_eq!(wedge(&dx_a, &dy_a).unwrap().eval(0.3, 0.1)[0], 1.0);
        assert_eq!(wedge(&dx, &dx).unwrap().eval(0.3, 0.1)[0], 0.0);
        let eta = standard_primitive(m);
        let w = wedge(&eta, &dx).unwrap();
        assert_eq!(w.parity(), Parity::Odd);
        assert_eq!(w.eval(0.3, 0.2)[0], 0.0);
        let eta_a = standard_primitive(QuotientSurface::annulus());
        assert_eq!(wedge(&eta_a, &dy_a).unwrap().eval(0.3, 0.2)[0], -0.2);
        assert!(matches!(
            wedge(&standard_area_form(m), &dx),
            Err(SurfaceError::Degree { .. })
        ));
    }

    #[test]
    fn even_density_on_mobius_rejected() {
        let m = QuotientSurface::mobius();
        let f = FormField::two_form(m, Parity::Even, e("y")).unwrap();
        assert_eq!(integrate(&f, &spec()), Err(SurfaceError::EvenDensity));
        let a = QuotientSurface::annulus();
        let f = FormField::two_form(a, Parity::Even, e("y")).unwrap();
        assert!(integrate(&f, &spec()).unwrap().abs() < 1e-15);
    }

    #[test]
    fn bump_density_against_1d_oracle() {
        let m = QuotientSurface::mobius();
        let f = FormField::two_form(m, Parity::Odd, e("bump(y)")).unwrap();
        let v = integrate(&f, &QuadratureSpec::default()).unwrap();
        assert!((v - BUMP_INTEGRAL).abs() < 1e-10, "{v}");
    }

    #[test]
    fn d_squared_vanishes() {
        let m = QuotientSurface::mobius();
        let f = FormField::zero_form(m, Parity::Odd, e("y*exp(y^2)*cos(2*pi*x)")).unwrap();
        let dd = f.exterior_derivative().unwrap().exterior_derivative().unwrap();
        for (x, y) in grid_points(&m, 16) {
            assert!(dd.eval(x, y)[0].abs() < 1e-9);
        }
    }

    #[test]
    fn derivative_matches_finite_difference_curl() {
        let a = QuotientSurface::annulus();
        let f = FormField::one_form(a, Parity::Even, e("sin(2*pi*x)*y^3"), e("exp(y)*cos(2*pi*x)"))
            .unwrap();
        let d = f.exterior_derivative().unwrap();
        let h = 1e-5;
        for (x, y) in grid_points(&a, 8) {
            let qx = (f.eval(x + h, y)[1] - f.eval(x - h, y)[1]) / (2.0 * h);
            let py = (f.eval(x, y + h)[0] - f.eval(x, y - h)[0]) / (2.0 * h);
            assert!((d.eval(x, y)[0] - (qx - py)).abs() < 1e-6);
        }
    }

    struct Shift(f64);
    impl SurfaceMap for Shift {
        fn jet(&self, p: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
            ([p[0] + self.0, p[1]], [[1.0, 0.0], [0.0, 1.0]])
        }
    }

    #[test]
    fn pullbacks() {
        let a = QuotientSurface::annulus();
        let dx = FormField::one_form(a, Parity::Even, e("1"), e("0")).unwrap();
        let pulled = pullback(Arc::new(Shift(0.3)), &dx);
        assert_eq!(pulled.eval(0.2, 0.1), [1.0, 0.0]);
        let eta = standard_primitive(a);
        let id = pullback(Arc::new(IdentityMap), &eta);
        assert_eq!(id.eval(0.2, 0.1), eta.eval(0.2, 0.1));
    }

    #[test]
    fn poincare_dual_vertical_arc() {
        let m = QuotientSurface::mobius();
        let arc = &cut_system(&m)[0];
        let pd = poincare_dual(&m, arc, &QuadratureSpec::default()).unwrap();
        assert_eq!(pd.sign, -1.0);
        assert!((pd.probe_pairing - pd.probe_line).abs() < 1e-10);
        pd.form.check_closed(1e-9).unwrap();
        // fiber integral of ρ along a horizontal line
        let fib = integrate_1d(|x| -pd.form.eval(x, 0.1)[0], 0.0, 1.0, &QuadratureSpec::default())
            .unwrap();
        assert!((fib - 1.0).abs() < 1e-12);
        let eta = standard_primitive(m);
        let lhs = integrate(&wedge(&eta, &pd.form).unwrap(), &QuadratureSpec::default()).unwrap();
        let rhs = arc.line_integral(&m, &eta, &QuadratureSpec::default()).unwrap();
        assert!((lhs - rhs).abs() < 1e-6);
    }

    #[test]
    fn poincare_dual_slanted_arc_pairs_with_eta() {
        let m = QuotientSurface::mobius();
        let arc = ArcData::graph(0.45, e("0.2*y^2"), 1.0, 0.1);
        let pd = poincare_dual(&m, &arc, &QuadratureSpec::default()).unwrap();
        pd.form.check_closed(1e-9).unwrap();
        let eta = standard_primitive(m);
        let lhs = integrate(&wedge(&eta, &pd.form).unwrap(), &QuadratureSpec::default()).unwrap();
        let rhs = arc.line_integral(&m, &eta, &QuadratureSpec::default()).unwrap();
        // ∫ −y·0.4y dy over [−1/2, 1/2] = −1/30
        assert!((rhs + 1.0 / 30.0).abs() < 1e-14);
        assert!((lhs - rhs).abs() < 1e-6, "{lhs} vs {rhs}");
        let down = ArcData::graph(0.45, e("0.2*y^2"), -1.0, 0.1);
        let pd_down = poincare_dual(&m, &down, &QuadratureSpec::default()).unwrap();
        assert_eq!(pd_down.sign, -pd.sign);
    }

    #[test]
    fn disjoint_probe_pairs_to_zero() {
        let m = QuotientSurface::mobius();
        let arc = &cut_system(&m)[0];
        let pd = poincare_dual(&m, arc, &QuadratureSpec::default()).unwrap();
        let mu = FormField::one_form(m, Parity::Odd, e("bump((x - 0.1)/0.2)*bump(y)"), e("0")).unwrap();
        let v = integrate(&wedge(&mu, &pd.form).unwrap(), &QuadratureSpec::default()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn arcs_crossing_the_seam_rejected() {
        let m = QuotientSurface::mobius();
        assert!(matches!(ArcData::vertical(0.05, 1.0, 0.1).validate(&m), Err(SurfaceError::Arc(_))));
        assert!(matches!(
            ArcData::vertical(0.5, 1.0, 0.1).validate(&QuotientSurface::disk()),
            Err(SurfaceError::Disk(_))
        ));
    }

    #[test]
    fn cut_systems() {
        assert_eq!(cut_system(&QuotientSurface::mobius()).len(), 1);
        assert_eq!(cut_system(&QuotientSurface::annulus()).len(), 1);
        assert!(cut_system(&QuotientSurface::disk()).is_empty());
    }
}

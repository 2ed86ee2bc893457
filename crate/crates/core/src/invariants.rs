//! λ-flux, the Calabi invariant on the disk, the local Calabi invariant of a patch, and the
//! swept area of an arc under an isotopy.

use thiserror::Error;

use crate::fieldexpr::{Expr, Var};
use crate::flow::{default_steps, flow_between, FlowDiffeo, FlowError, TimeDepVectorField};
use crate::quadrature::{integrate_1d, integrate_2d, QuadratureError, QuadratureSpec};
use crate::surface::{
    grid_points, merge_overlaps, poincare_dual, standard_primitive, ArcData, FormField, Parity, Rect,
    SurfaceError, SurfaceKind, SurfaceMap,
};

/// Default tolerance of the invariant checks.
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InvariantError {
    #[error("λ must be an even closed 1-form: {0}")]
    Lambda(String),
    #[error("η must be an odd 1-form with dη = ω: {0}")]
    Primitive(String),
    #[error("map does not fix a neighbourhood of the boundary (displacement {0:e})")]
    Support(f64),
    #[error("map support {support:?} is not inside the patch {patch:?}")]
    Patch { support: Rect, patch: Rect },
    #[error("η − g*η leaks out of the patch: holonomy {holonomy:e}, boundary value {leak:e}")]
    Leak { holonomy: f64, leak: f64 },
    #[error("isotopy has no generating field")]
    NoGenerator,
    #[error("{0}")]
    Surface(&'static str),
    #[error(transparent)]
    Form(#[from] SurfaceError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

fn check_lambda(lambda: &FormField) -> Result<(), InvariantError> {
    if lambda.degree() != 1 || lambda.parity() != Parity::Even {
        return Err(InvariantError::Lambda(format!("got {lambda}")));
    }
    lambda.check_closed(1e-8).map_err(|e| InvariantError::Lambda(e.to_string()))
}

fn check_primitive(eta: &FormField) -> Result<(), InvariantError> {
    if eta.degree() != 1 || eta.parity() != Parity::Odd {
        return Err(InvariantError::Primitive(format!("got {eta}")));
    }
    let s = eta.surface();
    let d: Box<dyn Fn(f64, f64) -> f64> = match eta.exterior_derivative() {
        Ok(d) => Box::new(move |x, y| d.eval(x, y)[0]),
        Err(_) => {
            let eta = eta.clone();
            Box::new(move |x, y| {
                let h = 1e-5;
                (eta.eval(x + h, y)[1] - eta.eval(x - h, y)[1]) / (2.0 * h)
                    - (eta.eval(x, y + h)[0] - eta.eval(x, y - h)[0]) / (2.0 * h)
            })
        }
    };
    for (x, y) in grid_points(&s, 16) {
        let defect = (d(x, y) - 1.0).abs();
        if !(defect < 1e-8) {
            return Err(InvariantError::Primitive(format!("dη − ω = {defect:e} at ({x}, {y})")));
        }
    }
    Ok(())
}

/// `η(p) − (g*η)(p)` as components.
fn eta_defect(g: &dyn SurfaceMap, eta: &FormField, p: [f64; 2]) -> [f64; 2] {
    let (q, j) = g.jet(p);
    let a = eta.eval(p[0], p[1]);
    let b = eta.eval(q[0], q[1]);
    [a[0] - (b[0] * j[0][0] + b[1] * j[1][0]), a[1] - (b[0] * j[0][1] + b[1] * j[1][1])]
}

/// `η − g*η` as a numeric odd 1-form.
pub fn flux_form(g: &FlowDiffeo, eta: &FormField) -> FormField {
    let (g, eta2) = (g.clone(), eta.clone());
    FormField::numeric(eta.surface(), 1, Parity::Odd, move |x, y| eta_defect(&g, &eta2, [x, y]))
}

/// `Flux_λ(g) = ∫_F (η − g*η)∧λ`.
pub fn flux_lambda(
    g: &FlowDiffeo,
    lambda: &FormField,
    eta: &FormField,
    spec: &QuadratureSpec,
) -> Result<f64, InvariantError> {
    check_lambda(lambda)?;
    check_primitive(eta)?;
    let s = g.surface();
    if lambda.surface() != s || eta.surface() != s {
        return Err(SurfaceError::SurfaceMismatch.into());
    }
    lambda_pairing(g, g.support_rects(), lambda, eta, spec)
}

/// `∫ (η − g*η)∧λ` over the fundamental pieces of `rects` (the whole domain when `None`),
/// without input checks.
pub(crate) fn lambda_pairing(
    g: &dyn SurfaceMap,
    rects: Option<Vec<Rect>>,
    lambda: &FormField,
    eta: &FormField,
    spec: &QuadratureSpec,
) -> Result<f64, InvariantError> {
    let s = eta.surface();
    let integrand = |x: f64, y: f64| {
        let a = eta_defect(g, eta, [x, y]);
        let l = lambda.eval(x, y);
        a[0] * l[1] - a[1] * l[0]
    };
    let Some(rects) = rects else {
        return Ok(s.integrate_density(integrand, lambda.support(), spec)?);
    };
    let lambda_pieces = lambda.support().map(|r| s.fundamental_pieces(&[r]));
    let mut total = 0.0;
    for piece in s.fundamental_pieces(&rects) {
        match &lambda_pieces {
            None => total += s.integrate_density(integrand, Some(piece), spec)?,
            Some(ls) => {
                for l in ls {
                    if let Some(r) = piece.intersect(l) {
                        total += s.integrate_density(integrand, Some(r), spec)?;
                    }
                }
            }
        }
    }
    Ok(total)
}

/// `Cal(g) = ∫_{D²} η∧g*η` for a disk map fixing a neighbourhood of the boundary.
pub fn calabi_disk(g: &FlowDiffeo, eta: &FormField, spec: &QuadratureSpec) -> Result<f64, InvariantError> {
    let s = g.surface();
    if s.kind != SurfaceKind::Disk {
        return Err(InvariantError::Surface("calabi_disk needs the disk"));
    }
    check_primitive(eta)?;
    let mut disp: f64 = 0.0;
    for r in [0.99, 1.0] {
        for i in 0..128 {
            let (sn, c) = (std::f64::consts::TAU * i as f64 / 128.0).sin_cos();
            let p = [r * c, r * sn];
            let q = g.apply(p);
            disp = disp.max((q[0] - p[0]).hypot(q[1] - p[1]));
        }
    }
    if !(disp < 1e-12) {
        return Err(InvariantError::Support(disp));
    }
    // η∧η = 0, so the integrand vanishes off the support of g
    let region = SurfaceMap::support(g);
    let v = s.integrate_density(
        |x, y| {
            let (q, j) = g.jet([x, y]);
            let a = eta.eval(x, y);
            let b = eta.eval(q[0], q[1]);
            let pb = [b[0] * j[0][0] + b[1] * j[1][0], b[0] * j[0][1] + b[1] * j[1][1]];
            a[0] * pb[1] - a[1] * pb[0]
        },
        region,
        spec,
    )?;
    Ok(v)
}

/// Result of [`local_calabi`] with its correctness monitors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalCalabi {
    pub value: f64,
    /// `∮_{∂U} (η − g*η)`.
    pub holonomy: f64,
    /// `max |η − g*η|` on `∂U`.
    pub leak: f64,
}

/// Local Calabi invariant `Cal_U(g) = e·∫_U f ω` with `df = η − g*η` on the patch `U` (cover
/// coordinates), `f` vanishing at the corner `(x0, y0)`.
///
/// With the staircase potential `f(x, y) = ∫_{x0}^x P(r, y0) dr + ∫_{y0}^y Q(x, s) ds` the
/// patch integral is evaluated in Fubini form
/// `(y1 − y0)∫ P(r, y0)(x1 − r) dr + ∫∫ Q(x, s)(y1 − s) dx ds`.
pub fn local_calabi(
    g: &FlowDiffeo,
    patch: Rect,
    e_sign: f64,
    eta: &FormField,
    spec: &QuadratureSpec,
) -> Result<LocalCalabi, InvariantError> {
    check_primitive(eta)?;
    let rects = g.support_rects().or_else(|| SurfaceMap::support(g).map(|r| vec![r]));
    let s = g.surface();
    // α vanishes off the support, so the bulk term only needs its translates inside U
    let mut bulk_pieces = Vec::new();
    let known = rects.is_some();
    for sup in rects.unwrap_or_default() {
        let inside = |r: &Rect| {
            r.x0 >= patch.x0 && r.x1 <= patch.x1 && r.y0 >= patch.y0 && r.y1 <= patch.y1
        };
        // support rectangles are given in the fundamental domain; compare the deck
        // translates that meet the patch
        let shifted = |k: i64| {
            if k == 0 {
                sup
            } else {
                let f = s.flip_pow(k);
                let (a, b) = (f * sup.y0, f * sup.y1);
                Rect::new(sup.x0 + k as f64, sup.x1 + k as f64, a.min(b), a.max(b))
            }
        };
        let candidates: Vec<Rect> = if s.is_strip() {
            (-2..=2).map(shifted).filter(|r| r.intersect(&patch).is_some()).collect()
        } else {
            vec![sup]
        };
        if candidates.is_empty() {
            return Err(InvariantError::Patch { support: sup, patch });
        }
        if let Some(bad) = candidates.iter().find(|r| !inside(r)) {
            return Err(InvariantError::Patch { support: *bad, patch });
        }
        bulk_pieces.extend(candidates);
    }
    let bulk_pieces = if known { merge_overlaps(bulk_pieces) } else { vec![patch] };
    let alpha = |x: f64, y: f64| eta_defect(g, eta, [x, y]);
    let (holonomy, leak) = patch_monitors(&alpha, &patch, spec)?;
    if !(holonomy.abs() < 1e-6 && leak < 1e-6) {
        return Err(InvariantError::Leak { holonomy, leak });
    }
    let bottom = integrate_1d(|r| alpha(r, patch.y0)[0] * (patch.x1 - r), patch.x0, patch.x1, spec)?;
    let mut bulk = 0.0;
    for r in &bulk_pieces {
        bulk += integrate_2d(|x, s| alpha(x, s)[1] * (patch.y1 - s), (r.x0, r.x1), (r.y0, r.y1), spec)?;
    }
    let value = e_sign * (patch.height() * bottom + bulk);
    Ok(LocalCalabi { value, holonomy, leak })
}

fn patch_monitors(
    alpha: &dyn Fn(f64, f64) -> [f64; 2],
    u: &Rect,
    spec: &QuadratureSpec,
) -> Result<(f64, f64), InvariantError> {
    let bottom = integrate_1d(|x| alpha(x, u.y0)[0], u.x0, u.x1, spec)?;
    let right = integrate_1d(|y| alpha(u.x1, y)[1], u.y0, u.y1, spec)?;
    let top = integrate_1d(|x| alpha(x, u.y1)[0], u.x0, u.x1, spec)?;
    let left = integrate_1d(|y| alpha(u.x0, y)[1], u.y0, u.y1, spec)?;
    let holonomy = bottom + right - top - left;
    let mut leak: f64 = 0.0;
    for i in 0..=64 {
        let a = i as f64 / 64.0;
        let (x, y) = (u.x0 + a * u.width(), u.y0 + a * u.height());
        for p in [alpha(x, u.y0), alpha(x, u.y1), alpha(u.x0, y), alpha(u.x1, y)] {
            leak = leak.max(p[0].abs()).max(p[1].abs());
        }
    }
    Ok((holonomy, leak))
}

/// Staircase potential `f` of `η − g*η` on a patch, for inspection.
pub fn local_potential(
    g: &FlowDiffeo,
    patch: Rect,
    eta: &FormField,
    spec: &QuadratureSpec,
    x: f64,
    y: f64,
) -> Result<f64, InvariantError> {
    let alpha = |x: f64, y: f64| eta_defect(g, eta, [x, y]);
    let h = integrate_1d(|r| alpha(r, patch.y0)[0], patch.x0, x, spec)?;
    let v = integrate_1d(|s| alpha(x, s)[1], patch.y0, y, spec)?;
    Ok(h + v)
}

/// An isotopy `φ_s`, `s ∈ [t0, t1]`, given by its generating field.
#[derive(Debug, Clone)]
pub struct IsotopyPath {
    pub field: TimeDepVectorField,
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
}

impl IsotopyPath {
    pub fn new(field: TimeDepVectorField, t0: f64, t1: f64) -> Self {
        IsotopyPath { field, t0, t1, steps: default_steps(t1 - t0) }
    }

    /// The isotopy generating a single flow, shear or twist.
    pub fn from_diffeo(g: &FlowDiffeo) -> Result<Self, InvariantError> {
        let (field, t0, t1) = g.generator().ok_or(InvariantError::NoGenerator)?;
        Ok(IsotopyPath::new(field, t0, t1))
    }

    /// `φ_s` at the sample times `t0 + (t1 − t0)k/K`, k = 0..K.
    pub fn samples(&self, k: usize) -> Result<Vec<FlowDiffeo>, InvariantError> {
        (0..=k)
            .map(|i| {
                let s = self.t0 + (self.t1 - self.t0) * i as f64 / k as f64;
                if i == 0 {
                    Ok(FlowDiffeo::identity(self.field.surface()))
                } else {
                    Ok(flow_between(&self.field, self.t0, s, default_steps(s - self.t0))?)
                }
            })
            .collect()
    }

    /// The end map `φ_{t1}`.
    pub fn end(&self) -> Result<FlowDiffeo, InvariantError> {
        Ok(flow_between(&self.field, self.t0, self.t1, self.steps)?)
    }

    /// The same endpoints along the reparameterized path `s ↦ φ_{t0 + (t1−t0)·r(u)}`, where
    /// `r` is an expression in `t` with `r(0) = 0` and `r(1) = 1`; the new time runs over
    /// [0, 1].
    pub fn reparameterized(&self, r: &Expr) -> Result<IsotopyPath, InvariantError> {
        let span = self.t1 - self.t0;
        let time = Expr::num(self.t0) + Expr::num(span) * r.clone();
        let rate = Expr::num(span) * r.derivative(Var::T);
        let [a, b] = self.field.components();
        let x1 = a.substitute(Var::T, &time) * rate.clone();
        let x2 = b.substitute(Var::T, &time) * rate;
        let field = TimeDepVectorField::new(self.field.surface(), x1, x2, self.field.support())?;
        Ok(IsotopyPath { field, t0: 0.0, t1: 1.0, steps: self.steps.max(default_steps(1.0)) })
    }
}

/// Swept area `O_γ(φ) = −∫∫ ω(X_s(φ_s γ(t)), Dφ_s γ'(t)) ds dt`.
///
/// For each Gauss node `t` the point `φ_s γ(t)`, the tangent `Dφ_s γ'(t)` and the inner
/// integral are advanced together by RK4 in `s`.
pub fn swept_area(
    arc: &ArcData,
    iso: &IsotopyPath,
    spec: &QuadratureSpec,
) -> Result<f64, InvariantError> {
    let s = iso.field.surface();
    arc.validate(&s)?;
    let w = s.half_width;
    let field = &iso.field;
    let h = (iso.t1 - iso.t0) / iso.steps as f64;
    let rhs = |st: &[f64; 5], time: f64| -> [f64; 5] {
        let (v, d) = field.eval_with_jacobian([st[0], st[1]], time);
        let (a, b) = (st[2], st[3]);
        [v[0], v[1], d[0][0] * a + d[0][1] * b, d[1][0] * a + d[1][1] * b, v[0] * b - v[1] * a]
    };
    let inner = |t: f64| {
        let (p, dp) = arc.point(w, t);
        let mut st = [p[0], p[1], dp[0], dp[1], 0.0];
        for n in 0..iso.steps {
            let time = iso.t0 + n as f64 * h;
            let k1 = rhs(&st, time);
            let k2 = rhs(&add5(&st, 0.5 * h, &k1), time + 0.5 * h);
            let k3 = rhs(&add5(&st, 0.5 * h, &k2), time + 0.5 * h);
            let k4 = rhs(&add5(&st, h, &k3), time + h);
            for i in 0..5 {
                st[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        st[4]
    };
    Ok(-integrate_1d(inner, 0.0, 1.0, spec)?)
}

fn add5(s: &[f64; 5], h: f64, k: &[f64; 5]) -> [f64; 5] {
    let mut r = *s;
    for i in 0..5 {
        r[i] += h * k[i];
    }
    r
}

/// Outcome of [`flux_kernel_test`].
#[derive(Debug, Clone, PartialEq)]
pub struct FluxKernelReport {
    pub in_kernel: bool,
    /// `Flux_{λ_i}(g)` for each cut-system arc.
    pub residuals: Vec<f64>,
}

/// Whether `g` lies in the kernel of the boundary flux: `|Flux_{λ_i}(g)| < tol` for the
/// Poincaré duals of all arcs of the cut system.
pub fn flux_kernel_test(
    g: &FlowDiffeo,
    cut: &[ArcData],
    tol: f64,
    spec: &QuadratureSpec,
) -> Result<FluxKernelReport, InvariantError> {
    let s = g.surface();
    let eta = standard_primitive(s);
    let mut residuals = Vec::with_capacity(cut.len());
    for arc in cut {
        let lambda = poincare_dual(&s, arc, spec)?.form;
        residuals.push(flux_lambda(g, &lambda, &eta, spec)?);
    }
    let in_kernel = residuals.iter().all(|r| r.abs() < tol);
    Ok(FluxKernelReport { in_kernel, residuals })
}

/// Closed-form λ = dx flux of the shear `(x + t·b(y), y)` on a strip of width `2w`:
/// `−t ∫_{−w}^{w} y b'(y) dy`, by 1-D quadrature.
pub fn shear_flux_oracle(t: f64, profile: &Expr, w: f64, spec: &QuadratureSpec) -> Result<f64, InvariantError> {
    let db = profile.derivative(Var::Y).compile();
    Ok(-t * integrate_1d(|y| y * db.xy(0.0, y), -w, w, spec)?)
}

/// `η + dβ` for a 0-form β of the same parity as η, as a new primitive.
pub fn shifted_primitive(eta: &FormField, beta: &Expr) -> Result<FormField, InvariantError> {
    let s = eta.surface();
    let b = FormField::zero_form(s, Parity::Odd, beta.clone())?;
    Ok(eta.add(&b.exterior_derivative()?)?)
}

/// Interior support check helper: is the map the identity on the collar of width `m`?
pub fn fixes_collar(g: &FlowDiffeo, m: f64) -> bool {
    let s = g.surface();
    grid_points(&s, 32)
        .into_iter()
        .filter(|&(x, y)| s.boundary_distance([x, y]) < m)
        .all(|(x, y)| {
            let q = g.apply([x, y]);
            (q[0] - x).abs() < 1e-12 && (q[1] - y).abs() < 1e-12
        })
}

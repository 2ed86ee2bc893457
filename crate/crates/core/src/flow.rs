//! Area-preserving diffeomorphisms generated by divergence-free vector fields.
//!
//! Vector fields are symbolic in `(x, y, t)`. Flow maps are integrated with classical RK4
//! together with the variational equation `dJ/dt = DX·J`, so every point evaluation also
//! yields the Jacobian. Shears and elliptical twists have closed forms and skip the ODE.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::circle::{CircleError, CircleLift};
use crate::fieldexpr::{bump_derivative, CompiledBundle, CompiledExpr, Env, Expr, Func, Var};
use crate::surface::{grid_points, QuotientSurface, Rect, SurfaceKind, SurfaceMap, SEAM_SAMPLES};

/// Default RK4 steps per unit time.
pub const STEPS_PER_UNIT_TIME: usize = 256;
/// Sample times used by the field validity checks.
const CHECK_TIMES: [f64; 3] = [0.0, 0.37, 1.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("field expressions may only use x, y and t, found `{0}`")]
    BadVariable(&'static str),
    #[error("field is not equivariant under the deck map at y = {y}, t = {t}: defect {defect:e}")]
    NotEquivariant { y: f64, t: f64, defect: f64 },
    #[error("field is not divergence free: |div X| = {defect:e} at ({x}, {y}, t = {t})")]
    Divergence { x: f64, y: f64, t: f64, defect: f64 },
    #[error("field is not tangent to the boundary at ({x}, {y}, t = {t}): normal part {defect:e}")]
    Tangency { x: f64, y: f64, t: f64, defect: f64 },
    #[error("step count must be at least 1")]
    Steps,
    #[error("trajectory from ({x}, {y}) left the surface")]
    LeftDomain { x: f64, y: f64 },
    #[error("cutoff violates its contract: {0}")]
    Cutoff(String),
    #[error("{0}")]
    Surface(&'static str),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Circle(#[from] CircleError),
}

/// Where a vector field may be nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldSupport {
    Full,
    /// Inside a rectangle of the fundamental domain, away from the boundary.
    Interior(Rect),
    /// Inside a collar of the given depth around the boundary.
    Collar(f64),
}

/// A time-dependent vector field `(X¹, X²)(x, y, t)` on a surface, with symbolic Jacobian.
#[derive(Clone)]
pub struct TimeDepVectorField {
    surface: QuotientSurface,
    exprs: [Expr; 2],
    compiled: [CompiledExpr; 2],
    // X¹, X², ∂X¹/∂x, ∂X¹/∂y, ∂X²/∂x, ∂X²/∂y
    jet: CompiledBundle,
    support: FieldSupport,
}

impl fmt::Debug for TimeDepVectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TimeDepVectorField(({}, {}) on {})", self.exprs[0], self.exprs[1], self.surface)
    }
}

impl TimeDepVectorField {
    /// Builds and validates a field: equivariance on strip surfaces, zero divergence and
    /// boundary tangency, each sampled.
    pub fn new(
        surface: QuotientSurface,
        x1: Expr,
        x2: Expr,
        support: FieldSupport,
    ) -> Result<Self, FlowError> {
        for e in [&x1, &x2] {
            if let Some(v) = e.variables().into_iter().find(|v| !matches!(v, Var::X | Var::Y | Var::T)) {
                return Err(FlowError::BadVariable(v.name()));
            }
        }
        let d = |e: &Expr, v| e.derivative(v);
        let jac = [d(&x1, Var::X), d(&x1, Var::Y), d(&x2, Var::X), d(&x2, Var::Y)];
        let jet = CompiledBundle::new(&[&x1, &x2, &jac[0], &jac[1], &jac[2], &jac[3]]);
        let field = TimeDepVectorField {
            surface,
            compiled: [x1.compile(), x2.compile()],
            exprs: [x1, x2],
            jet,
            support,
        };
        field.check_equivariance()?;
        field.check_divergence_free(1e-8)?;
        field.check_tangency(1e-9)?;
        Ok(field)
    }

    pub fn surface(&self) -> QuotientSurface {
        self.surface
    }

    pub fn components(&self) -> &[Expr; 2] {
        &self.exprs
    }

    pub fn support(&self) -> FieldSupport {
        self.support
    }

    /// `∂X¹/∂x + ∂X²/∂y`.
    pub fn divergence(&self) -> Expr {
        self.exprs[0].derivative(Var::X) + self.exprs[1].derivative(Var::Y)
    }

    fn raw(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let env = Env::xyt(x, y, t);
        [self.compiled[0].eval(&env), self.compiled[1].eval(&env)]
    }

    /// `X(p, t)` at a cover point.
    pub fn eval(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        let ([x, y], k) = self.surface.reduce(p);
        let v = self.raw(x, y, t);
        [v[0], self.surface.flip_pow(k) * v[1]]
    }

    /// `(X(p, t), DX(p, t))` at a cover point.
    pub fn eval_with_jacobian(&self, p: [f64; 2], t: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        self.jet_with_scratch(p, t, &mut Vec::new())
    }

    fn jet_with_scratch(&self, p: [f64; 2], t: f64, scratch: &mut Vec<f64>) -> ([f64; 2], [[f64; 2]; 2]) {
        let ([x, y], k) = self.surface.reduce(p);
        let mut o = [0.0; 6];
        self.jet.eval_into(&Env::xyt(x, y, t), scratch, &mut o);
        let f = self.surface.flip_pow(k);
        ([o[0], f * o[1]], [[o[2], f * o[3]], [f * o[4], o[5]]])
    }

    /// True when `p` lies outside the declared support, so every flow of the field fixes it.
    fn fixes(&self, p: [f64; 2]) -> bool {
        match self.support {
            FieldSupport::Full => false,
            FieldSupport::Interior(r) => {
                let ([x, y], _) = self.surface.reduce(p);
                let f = self.surface.flip();
                !(r.contains(x, y) || r.contains(x + 1.0, f * y) || r.contains(x - 1.0, f * y))
            }
            FieldSupport::Collar(c) => self.surface.boundary_distance(p) > c,
        }
    }

    /// `X(τ(0, y)) = Dτ·X(0, y)` on [`SEAM_SAMPLES`] seam points and a few times.
    pub fn check_equivariance(&self) -> Result<(), FlowError> {
        if !self.surface.is_strip() {
            return Ok(());
        }
        let w = self.surface.half_width;
        let flip = self.surface.flip();
        for &t in &CHECK_TIMES {
            for i in 0..SEAM_SAMPLES {
                let y = -w + 2.0 * w * (i as f64 + 0.5) / SEAM_SAMPLES as f64;
                let a = self.raw(0.0, y, t);
                let b = self.raw(1.0, flip * y, t);
                let defect = (b[0] - a[0]).abs().max((b[1] - flip * a[1]).abs());
                if !(defect < 1e-9) {
                    return Err(FlowError::NotEquivariant { y, t, defect });
                }
            }
        }
        Ok(())
    }

    /// Sampled `|div X| < tol` on a 32×32 grid.
    pub fn check_divergence_free(&self, tol: f64) -> Result<(), FlowError> {
        let mut scratch = Vec::new();
        let mut o = [0.0; 6];
        for &t in &CHECK_TIMES {
            for (x, y) in grid_points(&self.surface, 32) {
                self.jet.eval_into(&Env::xyt(x, y, t), &mut scratch, &mut o);
                let defect = (o[2] + o[5]).abs();
                if !(defect < tol) {
                    return Err(FlowError::Divergence { x, y, t, defect });
                }
            }
        }
        Ok(())
    }

    /// Normal component on the boundary (edges `y = ±w`, or the unit circle) below `tol`.
    pub fn check_tangency(&self, tol: f64) -> Result<(), FlowError> {
        for &t in &CHECK_TIMES {
            for i in 0..SEAM_SAMPLES {
                let u = (i as f64 + 0.5) / SEAM_SAMPLES as f64;
                let checks: Vec<([f64; 2], [f64; 2])> = match self.surface.kind {
                    SurfaceKind::Disk => {
                        let (s, c) = (2.0 * std::f64::consts::PI * u).sin_cos();
                        vec![([c, s], [c, s])]
                    }
                    _ => {
                        let w = self.surface.half_width;
                        vec![([u, w], [0.0, 1.0]), ([u, -w], [0.0, -1.0])]
                    }
                };
                for (p, n) in checks {
                    let v = self.raw(p[0], p[1], t);
                    let defect = (v[0] * n[0] + v[1] * n[1]).abs();
                    if !(defect < tol) {
                        return Err(FlowError::Tangency { x: p[0], y: p[1], t, defect });
                    }
                }
            }
        }
        Ok(())
    }
}

/// The Hamiltonian field `X = (∂K/∂y, −∂K/∂x)` of `K = H·cutoff`, so that `i(X)ω = dK` for
/// `ω = dx∧dy`. On the Möbius band `K` must be odd under the deck map.
pub fn hamiltonian_field(
    surface: QuotientSurface,
    h: &Expr,
    cutoff: Option<&Expr>,
) -> Result<TimeDepVectorField, FlowError> {
    hamiltonian_field_with_support(surface, h, cutoff, FieldSupport::Full)
}

pub fn hamiltonian_field_with_support(
    surface: QuotientSurface,
    h: &Expr,
    cutoff: Option<&Expr>,
    support: FieldSupport,
) -> Result<TimeDepVectorField, FlowError> {
    let k = match cutoff {
        Some(c) => h.clone() * c.clone(),
        None => h.clone(),
    };
    TimeDepVectorField::new(surface, k.derivative(Var::Y), -k.derivative(Var::X), support)
}

/// Closed-form autonomous flow of `H = a·P(q)`, `q = ((x−cx)/ax)² + ((y−cy)/ay)²`, with the
/// radial step `P(q) = bump((1 + q)/8)` falling from 1 at the center to 0 on `q = 1`.
/// In normalized coordinates `(u, v)` each level set of `q` rotates clockwise at rate
/// `k(q) = 2a·P'(q)/(ax·ay) = a·bump'((1 + q)/8)/(4·ax·ay)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticTwist {
    pub center: [f64; 2],
    pub axes: [f64; 2],
    pub amplitude: f64,
    pub time: f64,
}

impl EllipticTwist {
    /// The Hamiltonian `a·bump((1 + q)/8)`.
    pub fn hamiltonian(&self) -> Expr {
        let u = (Expr::var(Var::X) - self.center[0]) / self.axes[0];
        let v = (Expr::var(Var::Y) - self.center[1]) / self.axes[1];
        let q = u.clone().pow(Expr::num(2.0)) + v.clone().pow(Expr::num(2.0));
        Expr::num(self.amplitude) * Expr::call(Func::Bump(0), (q + 1.0) / 8.0)
    }

    /// Bounding rectangle of the support.
    pub fn support(&self) -> Rect {
        Rect::new(
            self.center[0] - self.axes[0],
            self.center[0] + self.axes[0],
            self.center[1] - self.axes[1],
            self.center[1] + self.axes[1],
        )
    }

    /// `∫ H dx dy = a·ax·ay·π·∫_0^1 P(q) dq`.
    pub fn hamiltonian_integral(&self) -> f64 {
        let spec = crate::quadrature::QuadratureSpec::new(16, 64, 1).expect("valid spec");
        let radial = crate::quadrature::integrate_1d(|q| crate::fieldexpr::bump((1.0 + q) / 8.0), 0.0, 1.0, &spec)
            .expect("finite bump");
        self.amplitude * self.axes[0] * self.axes[1] * std::f64::consts::PI * radial
    }

    /// `max_q |t·k(q)|`, the largest rotation angle of a level set.
    pub fn peak_rotation(&self) -> f64 {
        let scale = self.amplitude / (2.0 * self.axes[0] * self.axes[1]);
        let peak = (0..=512)
            .map(|i| bump_derivative((1.0 + i as f64 / 512.0) / 8.0, 1).abs())
            .fold(0.0, f64::max);
        (self.time * scale * peak / 2.0).abs()
    }

    fn jet_local(&self, p: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let [ax, ay] = self.axes;
        let u = (p[0] - self.center[0]) / ax;
        let v = (p[1] - self.center[1]) / ay;
        let q = u * u + v * v;
        if q >= 1.0 {
            return (p, [[1.0, 0.0], [0.0, 1.0]]);
        }
        let scale = self.amplitude / (2.0 * ax * ay);
        let arg = (1.0 + q) / 8.0;
        let k = scale * bump_derivative(arg, 1) / 2.0;
        let dk = scale * bump_derivative(arg, 2) / 16.0;
        let th = k * self.time;
        let (s, c) = th.sin_cos();
        let (u1, v1) = (u * c + v * s, -u * s + v * c);
        // D(u1, v1)/D(u, v) = R + (v1, −u1)ᵀ ∇θ, ∇θ = t·k'(q)·(2u, 2v)
        let g = 2.0 * self.time * dk;
        let m = [
            [c + v1 * g * u, s + v1 * g * v],
            [-s - u1 * g * u, c - u1 * g * v],
        ];
        let jac = [[m[0][0], m[0][1] * ax / ay], [m[1][0] * ay / ax, m[1][1]]];
        ([self.center[0] + ax * u1, self.center[1] + ay * v1], jac)
    }
}

enum Kind {
    Identity,
    Flow { field: Arc<TimeDepVectorField>, t0: f64, t1: f64, steps: usize },
    /// `(x, y) ↦ (x + t·b(y), y)`.
    /// `band` bounds the `y` where `b` or `b'` is nonzero; `None` when `b` vanishes.
    Shear { t: f64, profile: Expr, b: CompiledExpr, db: CompiledExpr, band: Option<(f64, f64)> },
    Twist(EllipticTwist),
    /// `outer ∘ inner`.
    Compose(FlowDiffeo, FlowDiffeo),
}

/// An area-preserving diffeomorphism with pointwise evaluation of the map and its Jacobian.
/// Cheap to clone.
#[derive(Clone)]
pub struct FlowDiffeo {
    surface: QuotientSurface,
    kind: Arc<Kind>,
}

impl fmt::Debug for FlowDiffeo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FlowDiffeo({self})")
    }
}

impl fmt::Display for FlowDiffeo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind.as_ref() {
            Kind::Identity => f.write_str("id"),
            Kind::Flow { field, t0, t1, steps } => write!(
                f,
                "flow[({}, {}), t {t0} -> {t1}, {steps} steps]",
                field.exprs[0], field.exprs[1]
            ),
            Kind::Shear { t, profile, .. } => write!(f, "shear[t = {t}, b = {profile}]"),
            Kind::Twist(tw) => write!(
                f,
                "twist[center ({}, {}), axes ({}, {}), a = {}, t = {}]",
                tw.center[0], tw.center[1], tw.axes[0], tw.axes[1], tw.amplitude, tw.time
            ),
            Kind::Compose(a, b) => write!(f, "({a}) o ({b})"),
        }
    }
}

impl FlowDiffeo {
    pub fn identity(surface: QuotientSurface) -> Self {
        FlowDiffeo { surface, kind: Arc::new(Kind::Identity) }
    }

    pub fn surface(&self) -> QuotientSurface {
        self.surface
    }

    /// Shear `(x, y) ↦ (x + t·b(y), y)` for a profile `b(y)`, which must be even on the
    /// Möbius band. The map fixes the boundary pointwise iff `b(±w) = 0`.
    pub fn shear(surface: QuotientSurface, t: f64, profile: Expr) -> Result<Self, FlowError> {
        if !surface.is_strip() {
            return Err(FlowError::Surface("shears are defined on strip surfaces"));
        }
        if let Some(v) = profile.variables().into_iter().find(|v| *v != Var::Y) {
            return Err(FlowError::BadVariable(v.name()));
        }
        let b = profile.compile();
        if surface.kind == SurfaceKind::Mobius {
            let w = surface.half_width;
            for i in 0..SEAM_SAMPLES {
                let y = w * i as f64 / SEAM_SAMPLES as f64;
                let defect = (b.xy(0.0, y) - b.xy(0.0, -y)).abs();
                if !(defect < 1e-12) {
                    return Err(FlowError::NotEquivariant { y, t: 0.0, defect });
                }
            }
        }
        let db = profile.derivative(Var::Y).compile();
        let band = shear_band(&b, &db, surface.half_width);
        Ok(FlowDiffeo { surface, kind: Arc::new(Kind::Shear { t, profile, b, db, band }) })
    }

    /// An elliptical twist; the ellipse must lie inside the fundamental domain (strips) or the
    /// open unit disk.
    pub fn twist(surface: QuotientSurface, twist: EllipticTwist) -> Result<Self, FlowError> {
        if !(twist.axes[0] > 0.0 && twist.axes[1] > 0.0) {
            return Err(FlowError::Parameter("twist axes must be positive".into()));
        }
        let r = twist.support();
        let inside = match surface.kind {
            SurfaceKind::Disk => (0..SEAM_SAMPLES).all(|i| {
                let (s, c) = (2.0 * std::f64::consts::PI * i as f64 / SEAM_SAMPLES as f64).sin_cos();
                (twist.center[0] + twist.axes[0] * c).hypot(twist.center[1] + twist.axes[1] * s) < 1.0
            }),
            _ => {
                let w = surface.half_width;
                r.x0 > 0.0 && r.x1 < 1.0 && r.y0 > -w && r.y1 < w
            }
        };
        if !inside {
            return Err(FlowError::Parameter(format!("twist support {r:?} leaves the domain")));
        }
        Ok(FlowDiffeo { surface, kind: Arc::new(Kind::Twist(twist)) })
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &FlowDiffeo) -> FlowDiffeo {
        match (self.kind.as_ref(), inner.kind.as_ref()) {
            (Kind::Identity, _) => inner.clone(),
            (_, Kind::Identity) => self.clone(),
            _ => FlowDiffeo { surface: self.surface, kind: Arc::new(Kind::Compose(self.clone(), inner.clone())) },
        }
    }

    /// Exact inverse for closed forms; flows are integrated backwards.
    pub fn inverse(&self) -> FlowDiffeo {
        let kind = match self.kind.as_ref() {
            Kind::Identity => Kind::Identity,
            Kind::Flow { field, t0, t1, steps } => {
                Kind::Flow { field: field.clone(), t0: *t1, t1: *t0, steps: *steps }
            }
            Kind::Shear { t, profile, b, db, band } => {
                Kind::Shear { t: -t, profile: profile.clone(), b: b.clone(), db: db.clone(), band: *band }
            }
            Kind::Twist(tw) => Kind::Twist(EllipticTwist { time: -tw.time, ..*tw }),
            Kind::Compose(a, b) => Kind::Compose(b.inverse(), a.inverse()),
        };
        FlowDiffeo { surface: self.surface, kind: Arc::new(kind) }
    }

    /// The same diffeomorphism with a different RK4 step count (flows only).
    pub fn with_steps(&self, steps: usize) -> FlowDiffeo {
        let kind = match self.kind.as_ref() {
            Kind::Flow { field, t0, t1, .. } => {
                Kind::Flow { field: field.clone(), t0: *t0, t1: *t1, steps: steps.max(1) }
            }
            Kind::Compose(a, b) => Kind::Compose(a.with_steps(steps), b.with_steps(steps)),
            _ => return self.clone(),
        };
        FlowDiffeo { surface: self.surface, kind: Arc::new(kind) }
    }

    /// The autonomous or time-dependent field generating this map together with its time
    /// interval, when it is a single flow, shear or twist.
    pub fn generator(&self) -> Option<(TimeDepVectorField, f64, f64)> {
        match self.kind.as_ref() {
            Kind::Flow { field, t0, t1, .. } => Some(((**field).clone(), *t0, *t1)),
            Kind::Shear { t, profile, .. } => {
                let field = TimeDepVectorField::new(self.surface, profile.clone(), Expr::num(0.0), FieldSupport::Full).ok()?;
                Some((field, 0.0, *t))
            }
            Kind::Twist(tw) => {
                let field = hamiltonian_field_with_support(
                    self.surface,
                    &tw.hamiltonian(),
                    None,
                    FieldSupport::Interior(tw.support()),
                )
                .ok()?;
                Some((field, 0.0, tw.time))
            }
            _ => None,
        }
    }

    /// True when evaluation needs no ODE integration.
    pub fn is_closed_form(&self) -> bool {
        match self.kind.as_ref() {
            Kind::Flow { .. } => false,
            Kind::Compose(a, b) => a.is_closed_form() && b.is_closed_form(),
            _ => true,
        }
    }

    /// `(g(p), Dg(p))`, or an error if an integrated trajectory leaves the surface.
    pub fn try_jet(&self, p: [f64; 2]) -> Result<([f64; 2], [[f64; 2]; 2]), FlowError> {
        let (q, j) = self.jet_unchecked(p);
        if !(q[0].is_finite() && q[1].is_finite()) || !self.surface.contains(q, 1e-6) {
            return Err(FlowError::LeftDomain { x: p[0], y: p[1] });
        }
        Ok((q, j))
    }

    fn jet_unchecked(&self, p: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        match self.kind.as_ref() {
            Kind::Identity => (p, IDENTITY),
            Kind::Flow { field, t0, t1, steps } => rk4_jet(field, p, *t0, *t1, *steps),
            Kind::Shear { t, b, db, .. } => {
                let y = p[1];
                ([p[0] + t * b.xy(0.0, y), y], [[1.0, t * db.xy(0.0, y)], [0.0, 1.0]])
            }
            Kind::Twist(tw) => {
                let (p0, k) = self.surface.reduce(p);
                let (q0, j0) = tw.jet_local(p0);
                if k == 0 {
                    return (q0, j0);
                }
                let f = self.surface.flip_pow(k);
                ([q0[0] + k as f64, f * q0[1]], [[j0[0][0], f * j0[0][1]], [f * j0[1][0], j0[1][1]]])
            }
            Kind::Compose(a, b) => {
                let (q, jb) = b.jet_unchecked(p);
                let (r, ja) = a.jet_unchecked(q);
                (r, mat_mul(&ja, &jb))
            }
        }
    }

    /// Difference between the map at its step count and at twice the step count (zero for
    /// closed forms); an estimate of the integration error at `p`.
    pub fn error_estimate(&self, p: [f64; 2]) -> f64 {
        if self.is_closed_form() {
            return 0.0;
        }
        let fine = self.with_steps(self.steps() * 2).apply(p);
        let coarse = self.apply(p);
        (fine[0] - coarse[0]).hypot(fine[1] - coarse[1])
    }

    fn steps(&self) -> usize {
        match self.kind.as_ref() {
            Kind::Flow { steps, .. } => *steps,
            Kind::Compose(a, b) => a.steps().max(b.steps()),
            _ => 1,
        }
    }

    /// Cover rectangles whose union contains the support, or `None` when unknown.
    pub fn support_rects(&self) -> Option<Vec<Rect>> {
        match self.kind.as_ref() {
            Kind::Identity => Some(Vec::new()),
            Kind::Flow { field, .. } => match field.support {
                FieldSupport::Full => None,
                FieldSupport::Interior(r) => Some(vec![r]),
                FieldSupport::Collar(c) if self.surface.is_strip() => {
                    let w = self.surface.half_width;
                    Some(vec![Rect::new(0.0, 1.0, w - c, w), Rect::new(0.0, 1.0, -w, -w + c)])
                }
                FieldSupport::Collar(_) => None,
            },
            Kind::Shear { band, .. } => Some(match band {
                Some((y0, y1)) => vec![Rect::new(0.0, 1.0, *y0, *y1)],
                None => Vec::new(),
            }),
            Kind::Twist(tw) => Some(vec![tw.support()]),
            Kind::Compose(a, b) => {
                let mut v = a.support_rects()?;
                v.extend(b.support_rects()?);
                Some(v)
            }
        }
    }

    /// `max |det Dg − 1|` over an `n × n` grid of the fundamental domain.
    pub fn det_defect(&self, n: usize) -> f64 {
        grid_points(&self.surface, n)
            .into_iter()
            .map(|(x, y)| {
                let (_, j) = self.jet([x, y]);
                (j[0][0] * j[1][1] - j[0][1] * j[1][0] - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `max |g(p) − p|` over boundary samples.
    pub fn boundary_displacement(&self) -> f64 {
        boundary_samples(&self.surface, 64)
            .into_iter()
            .map(|p| {
                let q = self.apply(p);
                (q[0] - p[0]).hypot(q[1] - p[1])
            })
            .fold(0.0, f64::max)
    }

    /// `max |dist(g(p), ∂)|` over boundary samples; zero when the boundary is preserved.
    pub fn boundary_defect(&self) -> f64 {
        boundary_samples(&self.surface, 64)
            .into_iter()
            .map(|p| self.surface.boundary_distance(self.apply(p)).abs())
            .fold(0.0, f64::max)
    }

    /// Whether the map fixes the boundary pointwise within `tol`.
    pub fn is_rel_boundary(&self, tol: f64) -> bool {
        self.boundary_displacement() < tol
    }
}

const IDENTITY: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];

fn mat_mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn boundary_samples(s: &QuotientSurface, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .flat_map(|i| {
            let u = (i as f64 + 0.5) / n as f64;
            match s.kind {
                SurfaceKind::Disk => {
                    let (sn, c) = (2.0 * std::f64::consts::PI * u).sin_cos();
                    vec![[c, sn]]
                }
                _ => vec![[u, s.half_width], [u, -s.half_width]],
            }
        })
        .collect()
}

impl SurfaceMap for FlowDiffeo {
    fn jet(&self, p: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        match self.try_jet(p) {
            Ok(v) => v,
            Err(_) => ([f64::NAN; 2], [[f64::NAN; 2]; 2]),
        }
    }

    fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        match self.kind.as_ref() {
            Kind::Flow { field, t0, t1, steps } => rk4_point(field, p, *t0, *t1, *steps),
            Kind::Compose(a, b) => a.apply(b.apply(p)),
            _ => self.jet_unchecked(p).0,
        }
    }

    fn support(&self) -> Option<Rect> {
        match self.kind.as_ref() {
            Kind::Identity => Some(Rect::new(0.5, 0.5, 0.0, 0.0)),
            Kind::Flow { field, .. } => match field.support {
                FieldSupport::Interior(r) => Some(r),
                _ => None,
            },
            Kind::Shear { .. } => None,
            Kind::Twist(tw) => Some(tw.support()),
            Kind::Compose(a, b) => match (a.support(), b.support()) {
                (Some(r), Some(s)) => Some(r.hull(&s)),
                _ => None,
            },
        }
    }
}

fn rk4_point(field: &TimeDepVectorField, p: [f64; 2], t0: f64, t1: f64, steps: usize) -> [f64; 2] {
    if field.fixes(p) {
        return p;
    }
    let h = (t1 - t0) / steps as f64;
    let mut s = p;
    for n in 0..steps {
        let t = t0 + n as f64 * h;
        let k1 = field.eval(s, t);
        let k2 = field.eval([s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]], t + 0.5 * h);
        let k3 = field.eval([s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]], t + 0.5 * h);
        let k4 = field.eval([s[0] + h * k3[0], s[1] + h * k3[1]], t + h);
        for i in 0..2 {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    s
}

type State = [f64; 6];

fn variational(field: &TimeDepVectorField, s: &State, t: f64, scratch: &mut Vec<f64>) -> State {
    let (v, d) = field.jet_with_scratch([s[0], s[1]], t, scratch);
    // dJ/dt = DX·J with J = [[s2, s3], [s4, s5]]
    [
        v[0],
        v[1],
        d[0][0] * s[2] + d[0][1] * s[4],
        d[0][0] * s[3] + d[0][1] * s[5],
        d[1][0] * s[2] + d[1][1] * s[4],
        d[1][0] * s[3] + d[1][1] * s[5],
    ]
}

fn axpy(s: &State, h: f64, k: &State) -> State {
    let mut r = *s;
    for i in 0..6 {
        r[i] += h * k[i];
    }
    r
}

fn rk4_jet(
    field: &TimeDepVectorField,
    p: [f64; 2],
    t0: f64,
    t1: f64,
    steps: usize,
) -> ([f64; 2], [[f64; 2]; 2]) {
    if field.fixes(p) {
        return (p, IDENTITY);
    }
    let h = (t1 - t0) / steps as f64;
    let mut s: State = [p[0], p[1], 1.0, 0.0, 0.0, 1.0];
    let mut scratch = Vec::new();
    let sc = &mut scratch;
    for n in 0..steps {
        let t = t0 + n as f64 * h;
        let k1 = variational(field, &s, t, sc);
        let k2 = variational(field, &axpy(&s, 0.5 * h, &k1), t + 0.5 * h, sc);
        let k3 = variational(field, &axpy(&s, 0.5 * h, &k2), t + 0.5 * h, sc);
        let k4 = variational(field, &axpy(&s, h, &k3), t + h, sc);
        for i in 0..6 {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    ([s[0], s[1]], [[s[2], s[3]], [s[4], s[5]]])
}

/// Band of `y` outside which a shear profile and its derivative vanish at 4096 samples,
/// widened by two sample spacings.
fn shear_band(b: &CompiledExpr, db: &CompiledExpr, w: f64) -> Option<(f64, f64)> {
    const N: usize = 4096;
    let h = 2.0 * w / N as f64;
    let moving: Vec<f64> = (0..=N)
        .map(|i| -w + i as f64 * h)
        .filter(|&y| b.xy(0.0, y) != 0.0 || db.xy(0.0, y) != 0.0)
        .collect();
    let (first, last) = (moving.first()?, moving.last()?);
    Some(((first - 2.0 * h).max(-w), (last + 2.0 * h).min(w)))
}

/// Time-`t_end` map of `X` from time 0 by RK4 with `steps` steps.
pub fn flow_map(field: &TimeDepVectorField, t_end: f64, steps: usize) -> Result<FlowDiffeo, FlowError> {
    flow_between(field, 0.0, t_end, steps)
}

/// Flow of `X` from `t0` to `t1`.
pub fn flow_between(
    field: &TimeDepVectorField,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<FlowDiffeo, FlowError> {
    if steps == 0 {
        return Err(FlowError::Steps);
    }
    Ok(FlowDiffeo {
        surface: field.surface,
        kind: Arc::new(Kind::Flow { field: Arc::new(field.clone()), t0, t1, steps }),
    })
}

/// Step count for a time span at [`STEPS_PER_UNIT_TIME`].
pub fn default_steps(span: f64) -> usize {
    ((span.abs() * STEPS_PER_UNIT_TIME as f64).ceil() as usize).max(1)
}

/// The shear `p_t(x, y) = (x + t·bump(y), y)` of the Möbius band.
pub fn mobius_shear(surface: QuotientSurface, t: f64) -> Result<FlowDiffeo, FlowError> {
    if surface.kind != SurfaceKind::Mobius {
        return Err(FlowError::Surface("mobius_shear needs the Möbius band"));
    }
    FlowDiffeo::shear(surface, t, shear_profile())
}

/// The even shear profile `b(y) = bump(y)`, supported in `|y| < 1/4`.
pub fn shear_profile() -> Expr {
    Expr::call(Func::Bump(0), Expr::var(Var::Y))
}

/// Default collar cutoff `μ(s) = bump(0.3·s)`: 1 for `s ≤ 0.41`, 0 for `s ≥ 0.84`.
pub fn default_cutoff() -> Expr {
    Expr::call(Func::Bump(0), Expr::num(0.3) * Expr::var(Var::S))
}

fn check_cutoff(mu: &Expr) -> Result<(), FlowError> {
    if let Some(v) = mu.variables().into_iter().find(|v| *v != Var::S) {
        return Err(FlowError::Cutoff(format!("cutoff may only use s, found `{}`", v.name())));
    }
    let c = mu.compile();
    let at = |s: f64| c.eval(&Env::xy(0.0, 0.0).with(Var::S, s));
    for i in 0..=20 {
        let s = 0.05 * i as f64 / 20.0;
        if !((at(s) - 1.0).abs() < 1e-12) {
            return Err(FlowError::Cutoff(format!("mu({s}) = {} but must be 1 near s = 0", at(s))));
        }
    }
    for i in 0..=200 {
        let s = 0.95 + 0.05 * i as f64;
        if !(at(s).abs() < 1e-12) {
            return Err(FlowError::Cutoff(format!("mu({s}) = {} but must vanish for s >= 0.95", at(s))));
        }
    }
    Ok(())
}

/// A divergence-free field tangent to the boundary whose restriction to the boundary circle
/// is `ξ(θ, t) ∂/∂θ`, supported in a collar of depth `collar_depth` (default `w/4`).
///
/// The boundary circle is the edge `y = w` with `θ = x` on the annulus (the other edge is left
/// fixed) and `θ = x/2` on the Möbius band, whose boundary runs once along `y = w` over
/// `0 ≤ x < 2`. The field is Hamiltonian with
/// `H_top = −(w − y)·μ((w − y)/c)·ξ_x(x, t)`, and on the Möbius band
/// `H = H_top(x, y) − H_top(x + 1, −y)` so that `H` is odd under the deck map.
pub fn boundary_extension(
    surface: QuotientSurface,
    xi: &Expr,
    collar_depth: Option<f64>,
    cutoff: Option<&Expr>,
) -> Result<TimeDepVectorField, FlowError> {
    if !surface.is_strip() {
        return Err(FlowError::Surface("boundary_extension is implemented for strip surfaces"));
    }
    if let Some(v) = xi.variables().into_iter().find(|v| !matches!(v, Var::Theta | Var::T)) {
        return Err(FlowError::BadVariable(v.name()));
    }
    let w = surface.half_width;
    let c = collar_depth.unwrap_or(w / 4.0);
    if !(c > 0.0 && c <= w) {
        return Err(FlowError::Parameter(format!("collar depth {c} must lie in (0, w]")));
    }
    let mu = cutoff.cloned().unwrap_or_else(default_cutoff);
    check_cutoff(&mu)?;
    let (x, y) = (Expr::var(Var::X), Expr::var(Var::Y));
    let mobius = surface.kind == SurfaceKind::Mobius;
    let xi_x = if mobius {
        Expr::num(2.0) * xi.substitute(Var::Theta, &(x.clone() / 2.0))
    } else {
        xi.substitute(Var::Theta, &x)
    };
    let depth = Expr::num(w) - y.clone();
    let h_top = -(depth.clone() * mu.substitute(Var::S, &(depth / c)) * xi_x);
    let h = if mobius {
        let shifted = h_top
            .substitute(Var::X, &(x.clone() + 1.0))
            .substitute(Var::Y, &(-y.clone()));
        h_top - shifted
    } else {
        h_top
    };
    hamiltonian_field_with_support(surface, &h, None, FieldSupport::Collar(c))
}

/// The restriction of a boundary-preserving map to the boundary circle, as a lift.
///
/// Möbius band: `θ ↦ g¹(2θ, w)/2`; annulus: `θ ↦ g¹(θ, w)`; disk: the angle of
/// `g(cos 2πθ, sin 2πθ)` divided by 2π, on the branch continuous from `θ = 0`.
pub fn boundary_trace(g: &FlowDiffeo) -> Result<CircleLift, FlowError> {
    let s = g.surface();
    let w = s.half_width;
    let label = format!("trace({g})");
    let lift = match s.kind {
        SurfaceKind::Mobius => {
            let g = g.clone();
            CircleLift::from_fn(label, move |th| {
                let (q, j) = g.jet([2.0 * th, w]);
                (0.5 * q[0], j[0][0])
            })?
        }
        SurfaceKind::Annulus => {
            let g = g.clone();
            CircleLift::from_fn(label, move |th| {
                let (q, j) = g.jet([th, w]);
                (q[0], j[0][0])
            })?
        }
        SurfaceKind::Disk => {
            let tau = std::f64::consts::TAU;
            let q0 = g.apply([1.0, 0.0]);
            let base = q0[1].atan2(q0[0]) / tau;
            let g = g.clone();
            CircleLift::from_fn(label, move |th| {
                let (sn, c) = (tau * th).sin_cos();
                let (q, j) = g.jet([c, sn]);
                let a = q[1].atan2(q[0]) / tau;
                // branch nearest to θ + base
                let target = th + base;
                let v = a + (target - a).round();
                let dp = [tau * (j[0][0] * -sn + j[0][1] * c), tau * (j[1][0] * -sn + j[1][1] * c)];
                let d = (q[0] * dp[1] - q[1] * dp[0]) / (q[0] * q[0] + q[1] * q[1]) / tau;
                (v, d)
            })?
        }
    };
    Ok(lift)
}

/// Time-`t_end` map of the circle flow `dθ/dt = ξ(θ, t)` by RK4 with the variational
/// equation; an oracle for boundary traces that never touches the surface.
pub fn circle_flow(xi: &Expr, t_end: f64, steps: usize) -> Result<CircleLift, FlowError> {
    if steps == 0 {
        return Err(FlowError::Steps);
    }
    if let Some(v) = xi.variables().into_iter().find(|v| !matches!(v, Var::Theta | Var::T)) {
        return Err(FlowError::BadVariable(v.name()));
    }
    let f = xi.compile();
    let df = xi.derivative(Var::Theta).compile();
    let label = format!("circle_flow({xi}, {t_end})");
    Ok(CircleLift::from_fn(label, move |th0| {
        let h = t_end / steps as f64;
        let rhs = |th: f64, d: f64, t: f64| {
            let env = Env::theta(th, t);
            (f.eval(&env), df.eval(&env) * d)
        };
        let (mut th, mut d) = (th0, 1.0);
        for n in 0..steps {
            let t = n as f64 * h;
            let k1 = rhs(th, d, t);
            let k2 = rhs(th + 0.5 * h * k1.0, d + 0.5 * h * k1.1, t + 0.5 * h);
            let k3 = rhs(th + 0.5 * h * k2.0, d + 0.5 * h * k2.1, t + 0.5 * h);
            let k4 = rhs(th + h * k3.0, d + h * k3.1, t + h);
            th += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            d += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        (th, d)
    })?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldexpr::parse;

    fn e(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn es(s: &str) -> Expr {
        crate::fieldexpr::parse_with(s, &Var::ALL).unwrap()
    }

    fn sup_dist(f: &FlowDiffeo, g: &FlowDiffeo, n: usize) -> f64 {
        grid_points(&f.surface(), n)
            .into_iter()
            .map(|(x, y)| {
                let (a, b) = (f.apply([x, y]), g.apply([x, y]));
                (a[0] - b[0]).hypot(a[1] - b[1])
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn annulus_shear_hamiltonian() {
        let a = QuotientSurface::annulus();
        let x = hamiltonian_field(a, &e("y"), None).unwrap();
        assert_eq!(x.eval([0.3, 0.1], 0.0), [1.0, 0.0]);
    }

    #[test]
    fn radial_hamiltonian_rotates() {
        let d = QuotientSurface::disk();
        // ρ(u) = bump(u): angular speed 2ρ'(r²), clockwise
        let x = hamiltonian_field(d, &e("bump(x^2 + y^2)"), None).unwrap();
        for &r in &[0.3f64, 0.4, 0.45] {
            let v = x.eval([r, 0.0], 0.0);
            let speed = 2.0 * bump_derivative(r * r, 1);
            assert!(v[0].abs() < 1e-15);
            assert!((v[1] / r + speed).abs() < 1e-12, "{r}");
        }
    }

    #[test]
    fn tangency_and_equivariance_enforced() {
        let a = QuotientSurface::annulus();
        assert!(matches!(hamiltonian_field(a, &e("x*y"), None), Err(FlowError::NotEquivariant { .. })));
        assert!(matches!(hamiltonian_field(a, &e("x"), None), Err(FlowError::Tangency { .. })));
        assert!(matches!(
            hamiltonian_field(a, &e("sin(2*pi*x)*y"), None),
            Err(FlowError::Tangency { .. })
        ));
        let m = QuotientSurface::mobius();
        // H must be odd on the Möbius band
        assert!(hamiltonian_field(m, &e("y^2/2"), None).is_err());
        assert!(hamiltonian_field(m, &e("y*cos(2*pi*x)*bump(y)"), None).is_ok());
    }

    #[test]
    fn divergence_checked() {
        let a = QuotientSurface::annulus();
        let r = TimeDepVectorField::new(a, e("sin(2*pi*x)*bump(y)"), e("0"), FieldSupport::Full);
        assert!(matches!(r, Err(FlowError::Divergence { .. })));
    }

    #[test]
    fn zero_field_is_identity() {
        let a = QuotientSurface::annulus();
        let f = TimeDepVectorField::new(a, e("0"), e("0"), FieldSupport::Full).unwrap();
        let g = flow_map(&f, 1.0, 16).unwrap();
        assert_eq!(g.jet([0.3, 0.2]), ([0.3, 0.2], IDENTITY));
    }

    #[test]
    fn shear_field_reproduces_closed_form() {
        let m = QuotientSurface::mobius();
        let f = TimeDepVectorField::new(m, shear_profile(), e("0"), FieldSupport::Full).unwrap();
        let g = flow_map(&f, 1.5, 64).unwrap();
        let p = mobius_shear(m, 1.5).unwrap();
        assert!(sup_dist(&g, &p, 16) < 1e-10);
        let (_, j1) = g.jet([0.3, 0.17]);
        let (_, j2) = p.jet([0.3, 0.17]);
        assert!((j1[0][1] - j2[0][1]).abs() < 1e-10);
    }

    #[test]
    fn shear_group_law_and_determinant() {
        let m = QuotientSurface::mobius();
        let a = mobius_shear(m, 0.4).unwrap().compose(&mobius_shear(m, 0.7).unwrap());
        let b = mobius_shear(m, 1.1).unwrap();
        assert!(sup_dist(&a, &b, 16) < 1e-12);
        assert_eq!(mobius_shear(m, 0.0).unwrap().apply([0.2, 0.1]), [0.2, 0.1]);
        assert!(b.det_defect(32) < 1e-15);
        assert!(b.is_rel_boundary(1e-15));
    }

    #[test]
    fn shear_is_deck_equivariant() {
        let m = QuotientSurface::mobius();
        let p = mobius_shear(m, 0.8).unwrap();
        for &(x, y) in &[(0.2, 0.1), (0.7, -0.2)] {
            let a = m.deck(p.apply([x, y]));
            let b = p.apply(m.deck([x, y]));
            assert!((a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let a = QuotientSurface::annulus();
        let x = hamiltonian_field(a, &e("0.3*sin(2*pi*x)*(y^2 - 0.25)^2*(1 + t)"), None).unwrap();
        let exact = flow_map(&x, 1.0, 512).unwrap();
        let e1 = sup_dist(&flow_map(&x, 1.0, 8).unwrap(), &exact, 8);
        let e2 = sup_dist(&flow_map(&x, 1.0, 16).unwrap(), &exact, 8);
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "{ratio}");
    }

    #[test]
    fn flows_preserve_area() {
        let m = QuotientSurface::mobius();
        let x = hamiltonian_field(m, &e("0.05*y*cos(2*pi*x)*bump(y)*(1 + sin(t))"), None).unwrap();
        let g = flow_map(&x, 1.0, default_steps(1.0)).unwrap();
        assert!(g.det_defect(32) < 1e-6);
    }

    #[test]
    fn inverse_and_composition() {
        let m = QuotientSurface::mobius();
        let x = hamiltonian_field(m, &e("0.05*y*cos(2*pi*x)*bump(y)*(1 + t)"), None).unwrap();
        let g = flow_map(&x, 1.0, 128).unwrap();
        let h = mobius_shear(m, 0.3).unwrap();
        let id = g.compose(&g.inverse());
        assert!(sup_dist(&id, &FlowDiffeo::identity(m), 12) < 1e-6);
        let gh_inv = g.compose(&h).inverse();
        let hg = h.inverse().compose(&g.inverse());
        assert!(sup_dist(&gh_inv, &hg, 12) < 1e-12);
        let p = [0.3, 0.12];
        let (_, jgh) = g.compose(&h).jet(p);
        let (q, jh) = h.jet(p);
        let (_, jg) = g.jet(q);
        let prod = mat_mul(&jg, &jh);
        for i in 0..2 {
            for k in 0..2 {
                assert!((prod[i][k] - jgh[i][k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn twist_matches_rk4_flow() {
        for s in [QuotientSurface::mobius(), QuotientSurface::disk()] {
            let tw = EllipticTwist { center: [0.1, 0.05], axes: [0.3, 0.2], amplitude: 0.05, time: 1.3 };
            let tw = if s.is_strip() { EllipticTwist { center: [0.5, 0.05], ..tw } } else { tw };
            let closed = FlowDiffeo::twist(s, tw).unwrap();
            let (field, t0, t1) = closed.generator().unwrap();
            let numeric = flow_between(&field, t0, t1, 4096).unwrap();
            let r = tw.support();
            for i in 0..5 {
                for k in 0..5 {
                    let p = [r.x0 + r.width() * (i as f64 + 0.5) / 5.0, r.y0 + r.height() * (k as f64 + 0.5) / 5.0];
                    let (a, ja) = closed.jet(p);
                    let (b, jb) = numeric.jet(p);
                    assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9, "{p:?} {a:?} {b:?}");
                    for u in 0..2 {
                        for v in 0..2 {
                            assert!((ja[u][v] - jb[u][v]).abs() < 1e-7, "{p:?}");
                        }
                    }
                }
            }
            assert!(closed.det_defect(32) < 1e-12);
        }
    }

    #[test]
    fn twist_extends_across_sheets() {
        let m = QuotientSurface::mobius();
        let tw = EllipticTwist { center: [0.5, 0.1], axes: [0.3, 0.2], amplitude: 0.1, time: 1.0 };
        let g = FlowDiffeo::twist(m, tw).unwrap();
        let p = [0.45, 0.15];
        let a = m.deck(g.apply(p));
        let b = g.apply(m.deck(p));
        assert!((a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15);
        assert!(FlowDiffeo::twist(m, EllipticTwist { center: [0.9, 0.0], ..tw }).is_err());
    }

    #[test]
    fn boundary_extension_constant_rotation() {
        for s in [QuotientSurface::mobius(), QuotientSurface::annulus()] {
            let x = boundary_extension(s, &e("0.3"), None, None).unwrap();
            let g = flow_map(&x, 1.0, default_steps(1.0)).unwrap();
            let tr = boundary_trace(&g).unwrap();
            assert!(tr.sup_distance(&CircleLift::rotation(0.3), 64) < 1e-8, "{s}");
            assert!(g.det_defect(32) < 1e-6);
        }
    }

    #[test]
    fn boundary_extension_matches_circle_flow() {
        let m = QuotientSurface::mobius();
        let xi = e("0.1*sin(2*pi*theta)");
        let x = boundary_extension(m, &xi, None, None).unwrap();
        let g = flow_map(&x, 1.0, default_steps(1.0)).unwrap();
        let tr = boundary_trace(&g).unwrap();
        let oracle = circle_flow(&xi, 1.0, 1024).unwrap();
        assert!(tr.sup_distance(&oracle, 128) < 1e-6);
    }

    #[test]
    fn boundary_extension_rejects_bad_cutoff() {
        let m = QuotientSurface::mobius();
        assert!(matches!(
            boundary_extension(m, &e("0.3"), None, Some(&es("1"))),
            Err(FlowError::Cutoff(_))
        ));
        assert!(matches!(
            boundary_extension(m, &e("0.3"), None, Some(&es("bump(s/4)"))),
            Err(FlowError::Cutoff(_))
        ));
    }

    #[test]
    fn traces_of_shear_and_identity() {
        let m = QuotientSurface::mobius();
        let tr = boundary_trace(&mobius_shear(m, 1.0).unwrap()).unwrap();
        assert_eq!(tr.sup_distance(&CircleLift::identity(), 64), 0.0);
        let d = QuotientSurface::disk();
        let tr = boundary_trace(&FlowDiffeo::identity(d)).unwrap();
        assert!(tr.sup_distance(&CircleLift::identity(), 64) < 1e-15);
    }

    #[test]
    fn disk_trace_of_rotation() {
        let d = QuotientSurface::disk();
        // H = −π(x² + y²)/2·c rotates counterclockwise by c turns per unit time
        let x = hamiltonian_field(d, &e("-pi*0.2*(x^2 + y^2)"), None).unwrap();
        let g = flow_map(&x, 1.0, 256).unwrap();
        let tr = boundary_trace(&g).unwrap();
        assert!(tr.sup_distance(&CircleLift::rotation(0.2), 64) < 1e-9);
    }
}

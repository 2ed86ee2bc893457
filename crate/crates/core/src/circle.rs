//! Orientation-preserving circle diffeomorphisms through their lifts to the real line, the
//! translation number, the translation-number cocycle and the explicit Euler cocycle built
//! from a pair of circle 1-forms.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::fieldexpr::{CompiledExpr, Env, Expr, Var};
use crate::quadrature::{integrate_circle, GaussLegendre, QuadratureError, QuadratureSpec};

/// Sample count for the lift and 1-form validity checks.
pub const CHECK_GRID: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircleError {
    #[error("lift is not equivariant: |f(x+1) - f(x) - 1| = {defect:e} at x = {x}")]
    NotEquivariant { x: f64, defect: f64 },
    #[error("lift is not increasing: f'({x}) = {derivative}")]
    NotMonotone { x: f64, derivative: f64 },
    #[error("lift expression may only use `theta`, found `{0}`")]
    BadVariable(&'static str),
    #[error("inverse did not converge at x = {0} after 100 iterations")]
    NonConvergence(f64),
    #[error("1-form coefficient is not periodic: defect {defect:e} at theta = {theta}")]
    NotPeriodic { theta: f64, defect: f64 },
    #[error("translation-number cocycle residual {residual:e} exceeds 0.1 (value {value})")]
    Numerical { value: f64, residual: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

type LiftFn = dyn Fn(f64) -> (f64, f64) + Send + Sync;

enum LiftKind {
    Rotation(f64),
    /// `x + shift + Σ_k (s_k sin 2πkx + c_k cos 2πkx)`, k = 1..
    Fourier { shift: f64, terms: Vec<(f64, f64)> },
    Expr { src: Expr, f: CompiledExpr, df: CompiledExpr },
    Compose(CircleLift, CircleLift),
    Inverse(CircleLift),
    /// `f + n`, i.e. post-composition with the n-th power of the unit translation.
    Shift(CircleLift, i64),
    Custom { label: String, f: Arc<LiftFn> },
}

/// A lift `f: R -> R` of a circle diffeomorphism: increasing, with `f(x + 1) = f(x) + 1`.
/// Cheap to clone.
#[derive(Clone)]
pub struct CircleLift(Arc<LiftKind>);

impl fmt::Debug for CircleLift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CircleLift({self})")
    }
}

impl fmt::Display for CircleLift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0.as_ref() {
            LiftKind::Rotation(a) => write!(f, "theta + {a}"),
            LiftKind::Fourier { shift, terms } => {
                write!(f, "theta + {shift}")?;
                for (k, (sk, ck)) in terms.iter().enumerate() {
                    let k = k + 1;
                    write!(f, " + {sk}*sin(2*pi*{k}*theta) + {ck}*cos(2*pi*{k}*theta)")?;
                }
                Ok(())
            }
            LiftKind::Expr { src, .. } => write!(f, "{src}"),
            LiftKind::Compose(a, b) => write!(f, "({a}) o ({b})"),
            LiftKind::Inverse(a) => write!(f, "({a})^-1"),
            LiftKind::Shift(a, n) => write!(f, "({a}) + {n}"),
            LiftKind::Custom { label, .. } => f.write_str(label),
        }
    }
}

impl CircleLift {
    pub fn identity() -> Self {
        CircleLift::rotation(0.0)
    }

    /// `x -> x + a`.
    pub fn rotation(a: f64) -> Self {
        CircleLift(Arc::new(LiftKind::Rotation(a)))
    }

    /// Trigonometric lift `x + shift + Σ_k (s_k sin 2πkx + c_k cos 2πkx)` with `terms[k-1] =
    /// (s_k, c_k)`; validated.
    pub fn fourier(shift: f64, terms: &[(f64, f64)]) -> Result<Self, CircleError> {
        let lift = CircleLift(Arc::new(LiftKind::Fourier { shift, terms: terms.to_vec() }));
        lift.validate()?;
        Ok(lift)
    }

    /// Lift given as an expression in `theta`; validated on [`CHECK_GRID`] points.
    pub fn from_expr(src: Expr) -> Result<Self, CircleError> {
        if let Some(v) = src.variables().into_iter().find(|v| *v != Var::Theta) {
            return Err(CircleError::BadVariable(v.name()));
        }
        let df = src.derivative(Var::Theta).compile();
        let f = src.compile();
        let lift = CircleLift(Arc::new(LiftKind::Expr { src, f, df }));
        lift.validate()?;
        Ok(lift)
    }

    /// Lift from a closure returning `(f(x), f'(x))`; validated.
    pub fn from_fn<F>(label: impl Into<String>, f: F) -> Result<Self, CircleError>
    where
        F: Fn(f64) -> (f64, f64) + Send + Sync + 'static,
    {
        let lift = CircleLift(Arc::new(LiftKind::Custom { label: label.into(), f: Arc::new(f) }));
        lift.validate()?;
        Ok(lift)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_derivative(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.eval_with_derivative(x).1
    }

    /// `(f(x), f'(x))`. Inverse lifts that fail to converge yield NaN.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        match self.0.as_ref() {
            LiftKind::Rotation(a) => (x + a, 1.0),
            LiftKind::Fourier { shift, terms } => {
                let w = 2.0 * std::f64::consts::PI;
                let (s1, c1) = (w * x).sin_cos();
                let (mut sk, mut ck) = (s1, c1);
                let (mut v, mut d) = (x + shift, 1.0);
                for (k, (a, b)) in terms.iter().enumerate() {
                    let kw = w * (k + 1) as f64;
                    v += a * sk + b * ck;
                    d += kw * (a * ck - b * sk);
                    (sk, ck) = (sk * c1 + ck * s1, ck * c1 - sk * s1);
                }
                (v, d)
            }
            LiftKind::Expr { f, df, .. } => {
                let env = Env::theta(x, 0.0);
                (f.eval(&env), df.eval(&env))
            }
            LiftKind::Compose(a, b) => {
                let (gb, db) = b.eval_with_derivative(x);
                let (ga, da) = a.eval_with_derivative(gb);
                (ga, da * db)
            }
            LiftKind::Inverse(a) => match solve_inverse(a, x) {
                Some(y) => (y, 1.0 / a.derivative(y)),
                None => (f64::NAN, f64::NAN),
            },
            LiftKind::Shift(a, n) => {
                let (v, d) = a.eval_with_derivative(x);
                (v + *n as f64, d)
            }
            LiftKind::Custom { f, .. } => f(x),
        }
    }

    /// Evaluation that surfaces inverse non-convergence.
    pub fn try_eval(&self, x: f64) -> Result<f64, CircleError> {
        let v = self.eval(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CircleError::NonConvergence(x))
        }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &CircleLift) -> CircleLift {
        match (self.0.as_ref(), inner.0.as_ref()) {
            (LiftKind::Rotation(a), LiftKind::Rotation(b)) => CircleLift::rotation(a + b),
            (LiftKind::Rotation(a), _) if *a == 0.0 => inner.clone(),
            (_, LiftKind::Rotation(b)) if *b == 0.0 => self.clone(),
            _ => CircleLift(Arc::new(LiftKind::Compose(self.clone(), inner.clone()))),
        }
    }

    pub fn invert(&self) -> CircleLift {
        match self.0.as_ref() {
            LiftKind::Rotation(a) => CircleLift::rotation(-a),
            LiftKind::Inverse(a) => a.clone(),
            _ => CircleLift(Arc::new(LiftKind::Inverse(self.clone()))),
        }
    }

    /// `self + n`; another lift of the same circle map.
    pub fn shift(&self, n: i64) -> CircleLift {
        if n == 0 {
            return self.clone();
        }
        match self.0.as_ref() {
            LiftKind::Rotation(a) => CircleLift::rotation(a + n as f64),
            LiftKind::Shift(a, m) => a.shift(m + n),
            _ => CircleLift(Arc::new(LiftKind::Shift(self.clone(), n))),
        }
    }

    /// The lift of the same circle map with `f(0) ∈ [0, 1)`.
    pub fn normalized(&self) -> CircleLift {
        let v = self.eval(0.0);
        self.shift(-(v.floor() as i64))
    }

    /// Equivariance and monotonicity on [`CHECK_GRID`] points of [0, 1).
    pub fn validate(&self) -> Result<(), CircleError> {
        for i in 0..CHECK_GRID {
            let x = i as f64 / CHECK_GRID as f64;
            let (v, d) = self.eval_with_derivative(x);
            let defect = (self.eval(x + 1.0) - v - 1.0).abs();
            if !(defect < 1e-9) {
                return Err(CircleError::NotEquivariant { x, defect });
            }
            if !(d > 0.0) {
                return Err(CircleError::NotMonotone { x, derivative: d });
            }
        }
        Ok(())
    }

    /// Sup distance between two lifts on a grid of `n` points in [0, 1).
    pub fn sup_distance(&self, other: &CircleLift, n: usize) -> f64 {
        (0..n)
            .map(|i| {
                let x = i as f64 / n as f64;
                (self.eval(x) - other.eval(x)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Solve `f(y) = x` by bracketing on unit steps, then safeguarded Newton to 1e-12.
fn solve_inverse(f: &CircleLift, x: f64) -> Option<f64> {
    let mut lo = x - (f.eval(x) - x);
    let mut hi = lo;
    let mut guard = 0;
    while f.eval(lo) > x {
        lo -= 1.0;
        guard += 1;
        if guard > 100 {
            return None;
        }
    }
    while f.eval(hi) < x {
        hi += 1.0;
        guard += 1;
        if guard > 200 {
            return None;
        }
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..100 {
        let (v, d) = f.eval_with_derivative(y);
        let r = v - x;
        if r.abs() < 1e-12 {
            return Some(y);
        }
        if r > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let newton = y - r / d;
        y = if newton > lo && newton < hi && d > 0.0 { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 {
            return Some(y);
        }
    }
    None
}

/// Poincaré translation number estimate `f^n(0) / n`; the error is O(1/n).
///
/// The orbit is tracked as integer part plus a point in [0, 1) so that precision does not
/// degrade with the orbit's size.
pub fn translation_number(f: &CircleLift, n_iter: usize) -> f64 {
    assert!(n_iter >= 1, "n_iter must be positive");
    let mut whole = 0.0f64;
    let mut frac = 0.0f64;
    for _ in 0..n_iter {
        let v = f.eval(frac);
        let k = v.floor();
        whole += k;
        frac = v - k;
    }
    (whole + frac) / n_iter as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotCocycle {
    pub value: f64,
    pub nearest: i64,
    pub residual: f64,
}

/// `rot(γ̃1) + rot(γ̃2) − rot(γ̃1 γ̃2)` for the normalized lifts (`f(0) ∈ [0, 1)`), with the
/// product taken as the composition of the two normalized lifts.
pub fn rot_cocycle(
    g1: &CircleLift,
    g2: &CircleLift,
    n_iter: usize,
) -> Result<RotCocycle, CircleError> {
    let (a, b) = (g1.normalized(), g2.normalized());
    let ab = a.compose(&b);
    let value = translation_number(&a, n_iter) + translation_number(&b, n_iter)
        - translation_number(&ab, n_iter);
    let nearest = value.round();
    let residual = (value - nearest).abs();
    if residual > 0.1 {
        return Err(CircleError::Numerical { value, residual });
    }
    Ok(RotCocycle { value, nearest: nearest as i64, residual })
}

type FormFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A 1-form `φ(θ) dθ` on R/Z.
#[derive(Clone)]
pub struct CircleOneForm {
    label: String,
    coeff: Arc<FormFn>,
}

impl fmt::Debug for CircleOneForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CircleOneForm({})", self.label)
    }
}

impl CircleOneForm {
    pub fn from_expr(src: &Expr) -> Result<Self, CircleError> {
        if let Some(v) = src.variables().into_iter().find(|v| *v != Var::Theta) {
            return Err(CircleError::BadVariable(v.name()));
        }
        let c = src.compile();
        CircleOneForm::from_fn(src.to_string(), move |th| c.eval(&Env::theta(th, 0.0)))
    }

    pub fn from_fn<F>(label: impl Into<String>, f: F) -> Result<Self, CircleError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let form = CircleOneForm { label: label.into(), coeff: Arc::new(f) };
        for i in 0..CHECK_GRID {
            let th = i as f64 / CHECK_GRID as f64;
            let defect = (form.coeff(th + 1.0) - form.coeff(th)).abs();
            if !(defect < 1e-9) {
                return Err(CircleError::NotPeriodic { theta: th, defect });
            }
        }
        Ok(form)
    }

    /// `c dθ`.
    pub fn constant(c: f64) -> Self {
        CircleOneForm { label: format!("{c}"), coeff: Arc::new(move |_| c) }
    }

    pub fn coeff(&self, theta: f64) -> f64 {
        (self.coeff)(theta)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `∫_{S¹} φ dθ`.
    pub fn total(&self, spec: &QuadratureSpec) -> Result<f64, CircleError> {
        Ok(integrate_circle(|t| self.coeff(t), spec)?)
    }
}

/// `Φ(θ) = ∫_0^θ φ`, extended to R by `Φ(θ + n) = Φ(θ) + n A`.
///
/// Panel sums are cached once, so each evaluation costs one partial-panel Gauss rule.
pub struct Primitive {
    form: CircleOneForm,
    panels: usize,
    prefix: Vec<f64>,
    gl: GaussLegendre,
    total: f64,
}

impl Primitive {
    pub fn new(form: &CircleOneForm, spec: &QuadratureSpec) -> Result<Self, CircleError> {
        spec.validate()?;
        let gl = GaussLegendre::new(spec.order);
        let panels = spec.panels_x;
        let h = 1.0 / panels as f64;
        let mut prefix = Vec::with_capacity(panels + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for p in 0..panels {
            let lo = p as f64 * h;
            acc += partial(&gl, form, lo, lo + h);
            if !acc.is_finite() {
                return Err(QuadratureError::NonFinite { x: lo, y: f64::NAN, value: acc }.into());
            }
            prefix.push(acc);
        }
        Ok(Primitive { form: form.clone(), panels, total: acc, prefix, gl })
    }

    /// `A = ∫ φ`.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let n = theta.floor();
        let r = theta - n;
        let scaled = r * self.panels as f64;
        let k = (scaled.floor() as usize).min(self.panels - 1);
        let lo = k as f64 / self.panels as f64;
        n * self.total + self.prefix[k] + partial(&self.gl, &self.form, lo, r)
    }
}

fn partial(gl: &GaussLegendre, form: &CircleOneForm, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    gl.nodes.iter().zip(&gl.weights).map(|(z, w)| w * half * form.coeff(mid + half * z)).sum()
}

/// The explicit Euler cocycle `χ(γ1, γ2) = ∫ (β_{γ1} − γ2* β_{γ1}) ψ dθ` with the primitive
/// `β̃_{γ1}(θ) = Φ(θ) − Φ(γ̃1(θ)) + Φ(γ̃1(0))`.
pub fn euler_cocycle_chi(
    phi: &CircleOneForm,
    psi: &CircleOneForm,
    g1: &CircleLift,
    g2: &CircleLift,
    spec: &QuadratureSpec,
) -> Result<f64, CircleError> {
    let prim = Primitive::new(phi, spec)?;
    chi_with_primitive(&prim, psi, g1, g2, 0.0, spec)
}

/// χ with the primitive shifted by `offset`; the value does not depend on it.
pub fn chi_with_primitive(
    prim: &Primitive,
    psi: &CircleOneForm,
    g1: &CircleLift,
    g2: &CircleLift,
    offset: f64,
    spec: &QuadratureSpec,
) -> Result<f64, CircleError> {
    let base = prim.eval(g1.try_eval(0.0)?) + offset;
    let beta = |th: f64| prim.eval(th) - prim.eval(g1.eval(th)) + base;
    let v = integrate_circle(|th| (beta(th) - beta(g2.eval(th))) * psi.coeff(th), spec)?;
    Ok(v)
}

/// The 1-cochain `F(γ̃) = ∫_0^1 (Φ(θ) − Φ(γ̃(θ))) ψ(θ) dθ` on lifts.
pub fn f_cochain(
    prim: &Primitive,
    psi: &CircleOneForm,
    g: &CircleLift,
    spec: &QuadratureSpec,
) -> Result<f64, CircleError> {
    Ok(integrate_circle(|th| (prim.eval(th) - prim.eval(g.eval(th))) * psi.coeff(th), spec)?)
}

/// `c_F(γ1, γ2) = δF(γ̃1, γ̃2)`.
pub fn cf_cocycle(
    phi: &CircleOneForm,
    psi: &CircleOneForm,
    g1: &CircleLift,
    g2: &CircleLift,
    spec: &QuadratureSpec,
) -> Result<f64, CircleError> {
    let prim = Primitive::new(phi, spec)?;
    let f = |g: &CircleLift| f_cochain(&prim, psi, g, spec);
    Ok(group_coboundary(|g| f(g), |a, b| a.compose(b), g1, g2)?)
}

/// `δc(g1, g2) = c(g2) − c(g1 g2) + c(g1)` for a 1-cochain `c`.
pub fn group_coboundary<G, E>(
    c: impl Fn(&G) -> Result<f64, E>,
    mul: impl Fn(&G, &G) -> G,
    g1: &G,
    g2: &G,
) -> Result<f64, E> {
    Ok(c(g2)? - c(&mul(g1, g2))? + c(g1)?)
}

/// `δc(g1, g2, g3) = c(g2, g3) − c(g1 g2, g3) + c(g1, g2 g3) − c(g1, g2)` for a 2-cochain.
pub fn group_coboundary2<G, E>(
    c: impl Fn(&G, &G) -> Result<f64, E>,
    mul: impl Fn(&G, &G) -> G,
    g1: &G,
    g2: &G,
    g3: &G,
) -> Result<f64, E> {
    Ok(c(g2, g3)? - c(&mul(g1, g2), g3)? + c(g1, &mul(g2, g3))? - c(g1, g2)?)
}

/// A random smooth lift `θ + a + Σ_k (c_k sin 2πkθ + d_k cos 2πkθ) / (2πk)`, k = 1..3,
/// with `Σ |c_k| + |d_k| ≤ amplitude < 1` so that `f' ≥ 1 − amplitude`.
pub fn random_lift<R: Rng + ?Sized>(rng: &mut R, amplitude: f64) -> CircleLift {
    let a: f64 = rng.gen_range(0.0..1.0);
    let mut coeffs = [0.0f64; 6];
    for c in &mut coeffs {
        *c = rng.gen_range(-1.0..1.0);
    }
    let norm: f64 = coeffs.iter().map(|c| c.abs()).sum();
    let scale = amplitude / norm.max(1e-12);
    let terms: Vec<(f64, f64)> = (1..=3)
        .map(|k| {
            let denom = 2.0 * std::f64::consts::PI * k as f64;
            (coeffs[2 * k - 2] * scale / denom, coeffs[2 * k - 1] * scale / denom)
        })
        .collect();
    CircleLift::fourier(a, &terms).expect("generated lift is valid")
}

/// A random smooth periodic 1-form `c0 + Σ_k (a_k sin 2πkθ + b_k cos 2πkθ)`, k = 1..2.
pub fn random_one_form<R: Rng + ?Sized>(rng: &mut R) -> CircleOneForm {
    let c0: f64 = rng.gen_range(0.5..1.5);
    let mut src = format!("{c0}");
    for k in 1..=2 {
        let a: f64 = rng.gen_range(-0.5..0.5);
        let b: f64 = rng.gen_range(-0.5..0.5);
        src.push_str(&format!(" + {a}*sin(2*pi*{k}*theta) + {b}*cos(2*pi*{k}*theta)"));
    }
    let e = crate::fieldexpr::parse(&src).expect("generated form parses");
    CircleOneForm::from_expr(&e).expect("generated form is periodic")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldexpr::parse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lift(src: &str) -> CircleLift {
        CircleLift::from_expr(parse(src).unwrap()).unwrap()
    }

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn rotations_compose_and_invert() {
        let r = CircleLift::rotation(0.3).compose(&CircleLift::rotation(0.45));
        assert_eq!(r.eval(0.1), 0.1 + 0.75);
        assert_eq!(CircleLift::rotation(0.3).invert().eval(0.5), 0.5 - 0.3);
        assert_eq!(CircleLift::identity().invert().eval(0.25), 0.25);
    }

    #[test]
    fn compose_with_identity() {
        let f = lift("theta + 0.1*sin(2*pi*theta) + 0.3");
        let g = f.compose(&CircleLift::identity());
        assert_eq!(f.sup_distance(&g, 64), 0.0);
    }

    #[test]
    fn inverse_round_trip() {
        let f = lift("theta + 0.1*sin(2*pi*theta) + 0.3");
        let id = f.compose(&f.invert());
        assert!(id.sup_distance(&CircleLift::identity(), 256) < 1e-8);
        let id2 = f.invert().compose(&f);
        assert!(id2.sup_distance(&CircleLift::identity(), 256) < 1e-8);
        let inv = f.invert();
        for i in 0..10 {
            let x = i as f64 * 0.1;
            let d = inv.derivative(x) * f.derivative(inv.eval(x));
            assert!((d - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fourier_lift_matches_expression() {
        let terms = [(0.05, -0.02), (0.01, 0.015), (-0.004, 0.0)];
        let f = CircleLift::fourier(0.37, &terms).unwrap();
        let g = CircleLift::from_expr(parse(&f.to_string()).unwrap()).unwrap();
        for i in 0..50 {
            let x = -1.3 + 0.071 * i as f64;
            let (a, da) = f.eval_with_derivative(x);
            let (b, db) = g.eval_with_derivative(x);
            assert!((a - b).abs() < 1e-13 && (da - db).abs() < 1e-12, "{x}");
        }
    }

    #[test]
    fn invalid_lifts_rejected() {
        assert!(matches!(
            CircleLift::from_expr(parse("2*theta").unwrap()),
            Err(CircleError::NotEquivariant { .. })
        ));
        assert!(matches!(
            CircleLift::from_expr(parse("theta + 0.3*sin(2*pi*theta)").unwrap()),
            Err(CircleError::NotMonotone { .. })
        ));
        assert!(matches!(
            CircleLift::from_expr(parse("theta + x").unwrap()),
            Err(CircleError::BadVariable("x"))
        ));
    }

    #[test]
    fn translation_numbers() {
        assert_eq!(translation_number(&CircleLift::rotation(0.37), 10), 0.37);
        assert_eq!(translation_number(&CircleLift::rotation(1.0), 10), 1.0);
        let f = lift("theta + 0.3 + 0.1*sin(2*pi*theta)");
        let a = translation_number(&f, 100_000);
        let b = translation_number(&f, 200_000);
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }

    #[test]
    fn rot_cocycle_trivial_cases() {
        let h = CircleLift::rotation(0.5);
        let c = rot_cocycle(&h, &h, 1000).unwrap();
        assert_eq!(c.nearest, 0);
        assert!(c.residual < 1e-12);
        let g = lift("theta + 0.2 + 0.05*cos(2*pi*theta)");
        let c = rot_cocycle(&CircleLift::identity(), &g, 10_000).unwrap();
        assert_eq!(c.nearest, 0);
        assert!(c.residual < 1e-3);
    }

    #[test]
    fn chi_vanishes_for_identity_and_rotations() {
        let one = CircleOneForm::constant(1.0);
        let g = lift("theta + 0.2 + 0.05*cos(2*pi*theta)");
        let v = euler_cocycle_chi(&one, &one, &CircleLift::identity(), &g, &spec()).unwrap();
        assert!(v.abs() < 1e-14);
        let v = euler_cocycle_chi(
            &one,
            &one,
            &CircleLift::rotation(0.3),
            &CircleLift::rotation(0.6),
            &spec(),
        )
        .unwrap();
        assert!(v.abs() < 1e-14);
    }

    #[test]
    fn cf_vanishes_at_identity_and_ignores_lift_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let phi = random_one_form(&mut rng);
        let psi = random_one_form(&mut rng);
        let id = CircleLift::identity();
        assert!(cf_cocycle(&phi, &psi, &id, &id, &spec()).unwrap().abs() < 1e-14);
        let g1 = random_lift(&mut rng, 0.6);
        let g2 = random_lift(&mut rng, 0.6);
        let base = cf_cocycle(&phi, &psi, &g1, &g2, &spec()).unwrap();
        let shifted = cf_cocycle(&phi, &psi, &g1.shift(1), &g2, &spec()).unwrap();
        let shifted2 = cf_cocycle(&phi, &psi, &g1, &g2.shift(-2), &spec()).unwrap();
        assert!((base - shifted).abs() < 1e-9);
        assert!((base - shifted2).abs() < 1e-9);
    }

    #[test]
    fn chi_equals_cf_on_nonlinear_pair() {
        let one = CircleOneForm::constant(1.0);
        let psi = CircleOneForm::from_expr(&parse("1 + 0.5*sin(2*pi*theta)").unwrap()).unwrap();
        let g1 = lift("theta + 0.3 + 0.1*sin(2*pi*theta)");
        let g2 = lift("theta + 0.6 + 0.05*cos(4*pi*theta)");
        let chi = euler_cocycle_chi(&one, &psi, &g1, &g2, &spec()).unwrap();
        let cf = cf_cocycle(&one, &psi, &g1, &g2, &spec()).unwrap();
        assert!((chi - cf).abs() < 1e-8);
        assert!(chi.abs() > 1e-4, "pair should give a nonzero value: {chi}");
    }

    #[test]
    fn primitive_matches_closed_form() {
        let phi = CircleOneForm::from_expr(&parse("1 + cos(2*pi*theta)").unwrap()).unwrap();
        let prim = Primitive::new(&phi, &spec()).unwrap();
        assert!((prim.total() - 1.0).abs() < 1e-14);
        for &th in &[0.0, 0.13, 0.5, 0.999, 1.7, -2.3] {
            let want = th + (2.0 * std::f64::consts::PI * th).sin() / (2.0 * std::f64::consts::PI);
            assert!((prim.eval(th) - want).abs() < 1e-13, "{th}");
        }
    }

    #[test]
    fn coboundary_examples() {
        let k = |_: &f64| Ok::<_, ()>(3.5);
        assert_eq!(group_coboundary(k, |a, b| a + b, &1.0, &2.0), Ok(3.5));
        let hom = |a: &f64| Ok::<_, ()>(2.0 * a);
        assert_eq!(group_coboundary(hom, |a, b| a + b, &1.0, &2.0), Ok(0.0));
    }

    #[test]
    fn coboundary_of_f_is_cf() {
        let one = CircleOneForm::constant(1.0);
        let psi = CircleOneForm::from_expr(&parse("1 + 0.5*sin(2*pi*theta)").unwrap()).unwrap();
        let g1 = lift("theta + 0.3 + 0.1*sin(2*pi*theta)");
        let g2 = lift("theta + 0.1 + 0.05*sin(4*pi*theta)");
        let prim = Primitive::new(&one, &spec()).unwrap();
        let by_hand = f_cochain(&prim, &psi, &g2, &spec()).unwrap()
            - f_cochain(&prim, &psi, &g1.compose(&g2), &spec()).unwrap()
            + f_cochain(&prim, &psi, &g1, &spec()).unwrap();
        let cf = cf_cocycle(&one, &psi, &g1, &g2, &spec()).unwrap();
        assert!((by_hand - cf).abs() < 1e-15);
    }

    #[test]
    fn one_form_periodicity_checked() {
        assert!(matches!(
            CircleOneForm::from_expr(&parse("theta").unwrap()),
            Err(CircleError::NotPeriodic { .. })
        ));
    }
}

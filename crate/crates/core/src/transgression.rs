//! The 1-cochain `F_λ(h) = ∫_N (η − h*η)∧λ` on boundary-preserving maps of the Möbius band
//! and the check that its coboundary is the Euler cocycle of the boundary traces.
//!
//! The boundary circle is parameterized by `θ = x/2` along the edge `y = w`, `0 ≤ x < 2`.
//! Odd forms are read through the constant section `e = −1`, the sign for which
//! `∫_N dα = ∫_{S¹} i*α` holds with this orientation of `θ`.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::Serialize;
use thiserror::Error;

use crate::circle::{euler_cocycle_chi, CircleError, CircleOneForm};
use crate::flow::{boundary_trace, FlowDiffeo, FlowError};
use crate::invariants::{flux_lambda, lambda_pairing, InvariantError};
use crate::quadrature::QuadratureSpec;
use crate::surface::{FormField, Parity, QuotientSurface, SurfaceKind, SurfaceMap};

/// Tolerance of the transgression identity.
pub const TRANSGRESSION_TOL: f64 = 2e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransgressionError {
    #[error("transgression is only set up on the Möbius band, got {0}")]
    Surface(&'static str),
    #[error("boundary restriction needs a 1-form, got degree {0}")]
    Degree(u8),
    #[error("map does not preserve the boundary (displacement {0:e})")]
    NotBoundaryPreserving(f64),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Circle(#[from] CircleError),
}

fn require_mobius(s: &QuotientSurface) -> Result<(), TransgressionError> {
    if s.kind != SurfaceKind::Mobius {
        return Err(TransgressionError::Surface(s.kind.name()));
    }
    Ok(())
}

/// `i*μ` as a 1-form on the period-1 boundary circle.
///
/// Along `x = 2θ, y = w` the pullback is `2 μ_x(2θ, w) dθ`; odd forms pick up the section
/// sign −1.
pub fn boundary_form_restriction(mu: &FormField) -> Result<CircleOneForm, TransgressionError> {
    let s = mu.surface();
    require_mobius(&s)?;
    if mu.degree() != 1 {
        return Err(TransgressionError::Degree(mu.degree()));
    }
    let sign = match mu.parity() {
        Parity::Even => 2.0,
        Parity::Odd => -2.0,
    };
    let w = s.half_width;
    let f = mu.clone();
    Ok(CircleOneForm::from_fn(format!("i*({mu})"), move |th| sign * f.eval(2.0 * th, w)[0])?)
}

/// `F_λ(h) = ∫_N (η − h*η)∧λ`; `h` need not fix the boundary.
pub fn f_lambda(
    h: &FlowDiffeo,
    lambda: &FormField,
    eta: &FormField,
    spec: &QuadratureSpec,
) -> Result<f64, TransgressionError> {
    require_mobius(&h.surface())?;
    Ok(flux_lambda(h, lambda, eta, spec)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransgressionReport {
    pub f1: f64,
    pub f2: f64,
    pub f12: f64,
    /// `δF_λ(h1, h2) = F_λ(h1) + F_λ(h2) − F_λ(h1∘h2)`.
    pub lhs: f64,
    /// `χ(p(h1), p(h2))`.
    pub rhs: f64,
    pub difference: f64,
    /// `A_ω = ∫ i*η`.
    pub a_omega: f64,
    /// `B_λ = ∫ i*λ`.
    pub b_lambda: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Computes both sides of `δF_λ(h1, h2) = χ(p(h1), p(h2))`.
///
/// The left side uses 2-D quadrature on the surface with `surface_spec`; the right side uses
/// only the boundary traces and the restricted forms, integrated with `circle_spec`.
pub fn verify_transgression(
    h1: &FlowDiffeo,
    h2: &FlowDiffeo,
    lambda: &FormField,
    eta: &FormField,
    surface_spec: &QuadratureSpec,
    circle_spec: &QuadratureSpec,
    tol: f64,
) -> Result<TransgressionReport, TransgressionError> {
    let s = h1.surface();
    require_mobius(&s)?;
    for h in [h1, h2] {
        let d = h.boundary_defect();
        if !(d < 1e-9) {
            return Err(TransgressionError::NotBoundaryPreserving(d));
        }
    }
    let f1 = f_lambda(h1, lambda, eta, surface_spec)?;
    // F(h2) and F(h1∘h2) meet h2 at the same quadrature nodes
    let inner = Memo { map: h2, jets: Mutex::new(HashMap::new()) };
    let f2 = lambda_pairing(&inner, h2.support_rects(), lambda, eta, surface_spec)?;
    let composed = Composed { outer: h1, inner: &inner };
    let rects = h1.compose(h2).support_rects();
    let f12 = lambda_pairing(&composed, rects, lambda, eta, surface_spec)?;
    let lhs = f1 + f2 - f12;

    let phi = boundary_form_restriction(eta)?;
    let psi = boundary_form_restriction(lambda)?;
    let g1 = boundary_trace(h1)?;
    let g2 = boundary_trace(h2)?;
    g1.validate()?;
    g2.validate()?;
    let rhs = euler_cocycle_chi(&phi, &psi, &g1, &g2, circle_spec)?;
    let difference = lhs - rhs;
    Ok(TransgressionReport {
        f1,
        f2,
        f12,
        lhs,
        rhs,
        difference,
        a_omega: phi.total(circle_spec)?,
        b_lambda: psi.total(circle_spec)?,
        tol,
        pass: difference.abs() <= tol,
    })
}

type Jet = ([f64; 2], [[f64; 2]; 2]);

struct Memo<'a> {
    map: &'a FlowDiffeo,
    jets: Mutex<HashMap<[u64; 2], Jet>>,
}

impl SurfaceMap for Memo<'_> {
    fn jet(&self, p: [f64; 2]) -> Jet {
        let key = [p[0].to_bits(), p[1].to_bits()];
        if let Some(j) = self.jets.lock().unwrap().get(&key) {
            return *j;
        }
        let j = self.map.jet(p);
        self.jets.lock().unwrap().insert(key, j);
        j
    }
}

struct Composed<'a> {
    outer: &'a FlowDiffeo,
    inner: &'a Memo<'a>,
}

impl SurfaceMap for Composed<'_> {
    fn jet(&self, p: [f64; 2]) -> Jet {
        let (q, b) = self.inner.jet(p);
        let (r, a) = self.outer.jet(q);
        let m = |i: usize, j: usize| a[i][0] * b[0][j] + a[i][1] * b[1][j];
        (r, [[m(0, 0), m(0, 1)], [m(1, 0), m(1, 1)]])
    }
}

//! The cell division trick on the Möbius band: a disk-supported map `h` in the flux kernel is
//! split as `h = u∘v` with `Cal_U(u) = Cal_V(v) = 0` for two patches `U`, `V` whose overlap
//! has one component on each side of the seam.
//!
//! Patches are rectangles in cover coordinates, each read through the cover's own section.
//! `V` crosses the seam `x = 1`, so on the component `B` of `U ∩ V` reached through the deck
//! map the two sections differ by the flip.

use serde::Serialize;
use thiserror::Error;

use crate::flow::{EllipticTwist, FlowDiffeo, FlowError};
use crate::invariants::{flux_kernel_test, local_calabi, InvariantError, DEFAULT_TOL};
use crate::quadrature::QuadratureSpec;
use crate::surface::{cut_system, standard_primitive, grid_points, QuotientSurface, Rect, SurfaceKind, SurfaceMap};

/// Largest twist angle (radians) a generator may use before the requested invariant is
/// considered out of reach for its ellipse.
pub const MAX_ROTATION: f64 = 200.0;

/// Margin kept between generator ellipses and the sides of their region.
const MARGIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryCondition {
    /// `U` and `V` are embedded disks.
    Disks,
    /// `U ∩ V` is a disjoint union of two disks `A`, `B`.
    Intersection,
    /// `U ∪ V` contains the core circle, the checkable part of being a Möbius band.
    MobiusUnion,
    /// `supp(h) ⊂ U \ closure(V)`.
    SupportOutsideV,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CellDivisionError {
    #[error("cell division needs the Möbius band, got {0}")]
    Surface(&'static str),
    #[error("geometry condition {condition:?} fails: {detail}")]
    Geometry { condition: GeometryCondition, detail: String },
    #[error("map is not in the flux kernel: residuals {0:?}")]
    NotInKernel(Vec<f64>),
    #[error("reference twist has local Calabi invariant {0:e}; cannot calibrate")]
    Degenerate(f64),
    #[error("invariant {target} needs a {rotation:.1} rad twist on this ellipse (limit {limit})")]
    Overflow { target: f64, rotation: f64, limit: f64 },
    #[error(transparent)]
    Invariant(#[from] InvariantError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// A rectangle in cover coordinates with the sign of its section against the cover's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Patch {
    pub rect: Rect,
    pub e_sign: f64,
}

impl Patch {
    pub fn new(rect: Rect, e_sign: f64) -> Self {
        Patch { rect, e_sign }
    }
}

/// The two patches and the components of their overlap, in `U`'s coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellGeometry {
    pub u: Patch,
    pub v: Patch,
    pub a: Rect,
    pub b: Rect,
    /// `e_U / e_V` on `A` and on `B`.
    pub sign_a: f64,
    pub sign_b: f64,
}

impl CellGeometry {
    /// `U = (0.02, 0.98) × (−0.48, 0.48)`, `V = (0.70, 1.30) × (−0.48, 0.48)` for `w = 1/2`;
    /// heights scale with `w`.
    pub fn standard(s: &QuotientSurface) -> Result<Self, CellDivisionError> {
        require_mobius(s)?;
        let h = 0.96 * s.half_width;
        let u = Patch::new(Rect::new(0.02, 0.98, -h, h), 1.0);
        let v = Patch::new(Rect::new(0.70, 1.30, -h, h), 1.0);
        CellGeometry::from_patches(s, u, v)
    }

    /// Derives `A`, `B` and their section signs from two patches.
    pub fn from_patches(s: &QuotientSurface, u: Patch, v: Patch) -> Result<Self, CellDivisionError> {
        require_mobius(s)?;
        let w = s.half_width;
        for (name, p) in [("U", &u), ("V", &v)] {
            let r = p.rect;
            if !(r.width() > 0.0 && r.width() < 1.0 && r.y0 > -w && r.y1 < w && r.height() > 0.0) {
                return Err(geometry(GeometryCondition::Disks, format!("{name} = {r:?} is not an embedded disk")));
            }
            if p.e_sign.abs() != 1.0 {
                return Err(geometry(GeometryCondition::Disks, format!("{name} section sign {}", p.e_sign)));
            }
        }
        // pieces of U ∩ τ^k(V) in U's coordinates
        let mut pieces = Vec::new();
        for k in -2..=2i64 {
            let f = s.flip_pow(k);
            let (a, b) = (f * v.rect.y0, f * v.rect.y1);
            let moved = Rect::new(v.rect.x0 - k as f64, v.rect.x1 - k as f64, a.min(b), a.max(b));
            if let Some(r) = u.rect.intersect(&moved) {
                pieces.push((r, u.e_sign * v.e_sign * f));
            }
        }
        let [(a, sign_a), (b, sign_b)] = pieces[..] else {
            return Err(geometry(
                GeometryCondition::Intersection,
                format!("U ∩ V has {} components, need 2", pieces.len()),
            ));
        };
        if a.intersect(&b).is_some() {
            return Err(geometry(GeometryCondition::Intersection, "A and B overlap".into()));
        }
        // the overlap with the same section is A
        let (a, sign_a, b, sign_b) = if sign_a > 0.0 { (a, sign_a, b, sign_b) } else { (b, sign_b, a, sign_a) };
        if !(sign_a > 0.0 && sign_b < 0.0) {
            return Err(geometry(
                GeometryCondition::Intersection,
                "sections must agree on one component and differ on the other".into(),
            ));
        }
        let geom = CellGeometry { u, v, a, b, sign_a, sign_b };
        for i in 0..1024 {
            let x = (i as f64 + 0.5) / 1024.0;
            if !geom.covers(s, [x, 0.0]) {
                return Err(geometry(
                    GeometryCondition::MobiusUnion,
                    format!("core circle point ({x}, 0) is outside U ∪ V"),
                ));
            }
        }
        Ok(geom)
    }

    fn covers(&self, s: &QuotientSurface, p: [f64; 2]) -> bool {
        let inside = |r: &Rect, q: [f64; 2]| q[0] > r.x0 && q[0] < r.x1 && q[1] > r.y0 && q[1] < r.y1;
        (-2..=2i64).any(|k| {
            let q = [p[0] + k as f64, s.flip_pow(k) * p[1]];
            inside(&self.u.rect, q) || inside(&self.v.rect, q)
        })
    }

    /// Checks `supp(h) ⊂ U \ closure(V)` for support rectangles given in the fundamental domain.
    pub fn check_support(&self, s: &QuotientSurface, rects: &[Rect]) -> Result<(), CellDivisionError> {
        let u = self.u.rect;
        for r in rects {
            if !(r.x0 > u.x0 && r.x1 < u.x1 && r.y0 > u.y0 && r.y1 < u.y1) {
                return Err(geometry(GeometryCondition::SupportOutsideV, format!("{r:?} is not inside U")));
            }
            for k in -2..=2i64 {
                let f = s.flip_pow(k);
                let (a, b) = (f * r.y0, f * r.y1);
                let moved = Rect::new(r.x0 + k as f64, r.x1 + k as f64, a.min(b), a.max(b));
                let v = self.v.rect;
                let touches = moved.x0 <= v.x1 && moved.x1 >= v.x0 && moved.y0 <= v.y1 && moved.y1 >= v.y0;
                if touches {
                    return Err(geometry(GeometryCondition::SupportOutsideV, format!("{r:?} meets closure(V)")));
                }
            }
        }
        Ok(())
    }

    /// The largest generator ellipse inside a region, kept [`MARGIN`] away from its sides.
    pub fn ellipse_in(r: &Rect) -> ([f64; 2], [f64; 2]) {
        (
            [0.5 * (r.x0 + r.x1), 0.5 * (r.y0 + r.y1)],
            [0.5 * r.width() - MARGIN, 0.5 * r.height() - MARGIN],
        )
    }
}

fn geometry(condition: GeometryCondition, detail: String) -> CellDivisionError {
    CellDivisionError::Geometry { condition, detail }
}

fn require_mobius(s: &QuotientSurface) -> Result<(), CellDivisionError> {
    if s.kind != SurfaceKind::Mobius {
        return Err(CellDivisionError::Surface(s.kind.name()));
    }
    Ok(())
}

/// `Cal = −2t·∫H ω` times the section sign, for the twist flow with `η = −y dx`.
pub fn twist_calabi_oracle(tw: &EllipticTwist, e_sign: f64) -> f64 {
    -2.0 * tw.time * tw.hamiltonian_integral() * e_sign
}

/// A twist supported in the ellipse `(center, axes)` whose local Calabi invariant on `patch`
/// is `c`; the time is fixed by linearity from one reference evaluation.
pub fn calabi_generator(
    s: &QuotientSurface,
    center: [f64; 2],
    axes: [f64; 2],
    c: f64,
    patch: &Patch,
    spec: &QuadratureSpec,
) -> Result<FlowDiffeo, CellDivisionError> {
    let reference = EllipticTwist { center, axes, amplitude: 1.0, time: 1.0 };
    let g = FlowDiffeo::twist(*s, reference)?;
    if c == 0.0 {
        return Ok(FlowDiffeo::identity(*s));
    }
    let eta = standard_primitive(*s);
    let cal = local_calabi(&g, patch.rect, patch.e_sign, &eta, spec)?.value;
    if !(cal.abs() > 1e-12) {
        return Err(CellDivisionError::Degenerate(cal));
    }
    let tw = EllipticTwist { time: c / cal, ..reference };
    let rotation = tw.peak_rotation();
    if !(rotation <= MAX_ROTATION) {
        return Err(CellDivisionError::Overflow { target: c, rotation, limit: MAX_ROTATION });
    }
    Ok(FlowDiffeo::twist(*s, tw)?)
}

#[derive(Debug, Clone)]
pub struct CellDivision {
    pub geometry: CellGeometry,
    pub u: FlowDiffeo,
    pub v: FlowDiffeo,
    pub g_a: FlowDiffeo,
    pub g_b: FlowDiffeo,
    /// `Cal_U(h)`.
    pub cal_h: f64,
    /// `c = Cal_U(h)/2`.
    pub c: f64,
    /// `Cal_U(u)`.
    pub cal_u: f64,
    /// `Cal_V(v)`.
    pub cal_v: f64,
    /// `Cal_U(g_B)`, expected `−c`.
    pub cal_u_gb: f64,
    /// `Cal_V(g_B)`, expected `+c`.
    pub cal_v_gb: f64,
    /// `Cal_U(g_A)` and `Cal_V(g_A)`, both expected `−c`.
    pub cal_u_ga: f64,
    pub cal_v_ga: f64,
    /// `max |u∘v(p) − h(p)|` on a 64×64 grid.
    pub residual: f64,
    /// Flux residuals of `h` on the cut system.
    pub flux: Vec<f64>,
}

/// Splits `h` as `u∘v` with `u = h∘g_A∘g_B`, `v = g_B⁻¹∘g_A⁻¹`.
pub fn cell_division_split(
    s: &QuotientSurface,
    h: &FlowDiffeo,
    geom: &CellGeometry,
    spec: &QuadratureSpec,
) -> Result<CellDivision, CellDivisionError> {
    require_mobius(s)?;
    let kernel = flux_kernel_test(h, &cut_system(s), DEFAULT_TOL, spec)?;
    if !kernel.in_kernel {
        return Err(CellDivisionError::NotInKernel(kernel.residuals));
    }
    let rects = h.support_rects().ok_or_else(|| {
        geometry(GeometryCondition::SupportOutsideV, "support of h is not known".into())
    })?;
    geom.check_support(s, &rects)?;

    let eta = standard_primitive(*s);
    let cal = |g: &FlowDiffeo, p: &Patch| -> Result<f64, CellDivisionError> {
        Ok(local_calabi(g, p.rect, p.e_sign, &eta, spec)?.value)
    };
    let cal_h = cal(h, &geom.u)?;
    let id = FlowDiffeo::identity(*s);
    if cal_h.abs() < 1e-12 {
        return Ok(CellDivision {
            geometry: *geom,
            u: h.clone(),
            v: id.clone(),
            g_a: id.clone(),
            g_b: id,
            cal_h,
            c: 0.0,
            cal_u: cal_h,
            cal_v: 0.0,
            cal_u_gb: 0.0,
            cal_v_gb: 0.0,
            cal_u_ga: 0.0,
            cal_v_ga: 0.0,
            residual: 0.0,
            flux: kernel.residuals,
        });
    }
    let c = cal_h / 2.0;
    let (ca, aa) = CellGeometry::ellipse_in(&geom.a);
    let (cb, ab) = CellGeometry::ellipse_in(&geom.b);
    let g_a = calabi_generator(s, ca, aa, -c, &geom.u, spec)?;
    let g_b = calabi_generator(s, cb, ab, -c, &geom.u, spec)?;
    let u = h.compose(&g_a).compose(&g_b);
    let v = g_b.inverse().compose(&g_a.inverse());
    let uv = u.compose(&v);
    let residual = grid_points(s, 64)
        .into_iter()
        .map(|(x, y)| {
            let (p, q) = (uv.apply([x, y]), h.apply([x, y]));
            (p[0] - q[0]).hypot(p[1] - q[1])
        })
        .fold(0.0, f64::max);
    Ok(CellDivision {
        geometry: *geom,
        cal_h,
        c,
        cal_u: cal(&u, &geom.u)?,
        cal_v: cal(&v, &geom.v)?,
        cal_u_gb: cal(&g_b, &geom.u)?,
        cal_v_gb: cal(&g_b, &geom.v)?,
        cal_u_ga: cal(&g_a, &geom.u)?,
        cal_v_ga: cal(&g_a, &geom.v)?,
        residual,
        flux: kernel.residuals,
        u,
        v,
        g_a,
        g_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mobius() -> QuotientSurface {
        QuotientSurface::mobius()
    }

    fn spec() -> QuadratureSpec {
        QuadratureSpec::new(16, 64, 64).unwrap()
    }

    #[test]
    fn standard_geometry_layout() {
        let g = CellGeometry::standard(&mobius()).unwrap();
        assert_eq!((g.sign_a, g.sign_b), (1.0, -1.0));
        assert!((g.a.x0 - 0.70).abs() < 1e-12 && (g.a.x1 - 0.98).abs() < 1e-12);
        assert!((g.b.x0 - 0.02).abs() < 1e-12 && (g.b.x1 - 0.30).abs() < 1e-12);
    }

    #[test]
    fn geometry_conditions_are_reported() {
        let s = mobius();
        let u = Patch::new(Rect::new(0.02, 0.98, -0.48, 0.48), 1.0);
        let narrow = Patch::new(Rect::new(0.4, 0.6, -0.48, 0.48), 1.0);
        match CellGeometry::from_patches(&s, u, narrow) {
            Err(CellDivisionError::Geometry { condition, .. }) => assert_eq!(condition, GeometryCondition::Intersection),
            other => panic!("{other:?}"),
        }
        let off_core = Patch::new(Rect::new(0.70, 1.30, 0.1, 0.4), 1.0);
        match CellGeometry::from_patches(&s, u, off_core) {
            Err(CellDivisionError::Geometry { condition, .. }) => assert_eq!(condition, GeometryCondition::MobiusUnion),
            other => panic!("{other:?}"),
        }
        let geom = CellGeometry::standard(&s).unwrap();
        let bad = [Rect::new(0.25, 0.6, -0.2, 0.2)];
        assert!(matches!(
            geom.check_support(&s, &bad),
            Err(CellDivisionError::Geometry { condition: GeometryCondition::SupportOutsideV, .. })
        ));
    }

    #[test]
    fn generator_hits_target_and_matches_oracle() {
        let s = mobius();
        let geom = CellGeometry::standard(&s).unwrap();
        let g = calabi_generator(&s, [0.5, 0.0], [0.19, 0.47], 0.05, &geom.u, &spec()).unwrap();
        let eta = standard_primitive(s);
        let v = local_calabi(&g, geom.u.rect, 1.0, &eta, &spec()).unwrap().value;
        assert!((v - 0.05).abs() < 1e-6, "{v}");
        let tw = EllipticTwist { center: [0.5, 0.0], axes: [0.19, 0.47], amplitude: 1.0, time: 1.0 };
        let oracle = twist_calabi_oracle(&tw, 1.0);
        let measured = local_calabi(&FlowDiffeo::twist(s, tw).unwrap(), geom.u.rect, 1.0, &eta, &spec()).unwrap().value;
        assert!((oracle - measured).abs() < 1e-5 * oracle.abs(), "{oracle} vs {measured}");
    }

    #[test]
    fn generator_linearity_and_cancellation() {
        let s = mobius();
        let geom = CellGeometry::standard(&s).unwrap();
        let eta = standard_primitive(s);
        let p = &geom.u;
        let g = calabi_generator(&s, [0.5, 0.0], [0.19, 0.47], 0.03, p, &spec()).unwrap();
        let m = calabi_generator(&s, [0.5, 0.0], [0.19, 0.47], -0.03, p, &spec()).unwrap();
        let cal = |g: &FlowDiffeo| local_calabi(g, p.rect, p.e_sign, &eta, &spec()).unwrap().value;
        assert!(cal(&g.compose(&m)).abs() < 1e-6);
        assert!((cal(&g.compose(&g)) - 2.0 * cal(&g)).abs() < 1e-6);
        let zero = calabi_generator(&s, [0.5, 0.0], [0.19, 0.47], 0.0, p, &spec()).unwrap();
        assert_eq!(zero.apply([0.5, 0.1]), [0.5, 0.1]);
    }

    #[test]
    fn overflow_guard() {
        let s = mobius();
        let geom = CellGeometry::standard(&s).unwrap();
        let r = calabi_generator(&s, [0.5, 0.0], [0.02, 0.02], 0.2, &geom.u, &QuadratureSpec::new(16, 64, 64).unwrap());
        assert!(matches!(r, Err(CellDivisionError::Overflow { .. })), "{r:?}");
    }

    #[test]
    fn zero_invariant_input_is_returned() {
        let s = mobius();
        let geom = CellGeometry::standard(&s).unwrap();
        let h = FlowDiffeo::twist(s, EllipticTwist { center: [0.5, 0.0], axes: [0.19, 0.47], amplitude: 0.0, time: 1.0 })
            .unwrap();
        let d = cell_division_split(&s, &h, &geom, &spec()).unwrap();
        assert_eq!(d.c, 0.0);
        assert_eq!(d.v.apply([0.4, 0.1]), [0.4, 0.1]);
    }

    #[test]
    fn split_of_a_twist() {
        let s = mobius();
        let geom = CellGeometry::standard(&s).unwrap();
        let h = calabi_generator(&s, [0.5, 0.0], [0.19, 0.47], 0.2, &geom.u, &spec()).unwrap();
        let d = cell_division_split(&s, &h, &geom, &spec()).unwrap();
        assert!((d.cal_h - 0.2).abs() < 1e-6, "{}", d.cal_h);
        assert!(d.cal_u.abs() < 1e-5, "{}", d.cal_u);
        assert!(d.cal_v.abs() < 1e-5, "{}", d.cal_v);
        assert!(d.residual < 1e-5);
        assert!((d.cal_u_gb + d.c).abs() < 1e-6 && (d.cal_v_gb - d.c).abs() < 1e-6, "{d:?}");
        assert!((d.cal_u_ga + d.c).abs() < 1e-6 && (d.cal_v_ga + d.c).abs() < 1e-6);
    }
}

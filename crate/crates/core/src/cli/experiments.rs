//! Expands configured experiments into independent tasks that each produce report rows.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Experiment, IntegratorBlock, Tolerances};
use super::grammar::{build_arc, build_form, build_map, cut_arcs, BuiltMap, ClosedForm, Context};
use super::report::Row;
use crate::celldivision::{calabi_generator, cell_division_split, twist_calabi_oracle, CellGeometry};
use crate::circle::{
    cf_cocycle, euler_cocycle_chi, group_coboundary2, random_lift, random_one_form, rot_cocycle,
};
use crate::flow::{boundary_extension, boundary_trace, circle_flow, flow_map, mobius_shear, EllipticTwist, FlowDiffeo};
use crate::invariants::{
    calabi_disk, flux_kernel_test, flux_lambda, local_calabi, shear_flux_oracle, swept_area, IsotopyPath,
};
use crate::quadrature::QuadratureSpec;
use crate::surface::{poincare_dual, standard_primitive, Rect, SurfaceKind};
use crate::transgression::{boundary_form_restriction, verify_transgression, TRANSGRESSION_TOL};

pub type Task = Box<dyn FnOnce() -> Vec<Row> + Send>;

const TWIST_ORACLE_ANCHOR: &str = "Local Calabi invariant";

/// Settings shared by all experiments of a run.
#[derive(Debug, Clone)]
pub struct Settings {
    pub ctx: Context,
    pub integrator: IntegratorBlock,
    pub tolerances: Tolerances,
    /// `--tol`, overriding every tolerance.
    pub tol: Option<f64>,
    pub seed: u64,
}

impl Settings {
    fn tol(&self, configured: Option<f64>, default: f64) -> f64 {
        self.tol.or(configured).unwrap_or(default)
    }

    fn surface_spec(&self, default: QuadratureSpec) -> Result<QuadratureSpec, String> {
        let i = &self.integrator;
        let spec = QuadratureSpec {
            order: i.order.unwrap_or(default.order),
            panels_x: i.panels_x.unwrap_or(default.panels_x),
            panels_y: i.panels_y.unwrap_or(default.panels_y),
            periodic: false,
        };
        spec.validate().map_err(|e| format!("[integrator]: {e}"))?;
        Ok(spec)
    }

    fn circle_spec(&self, order: usize, panels: usize) -> Result<QuadratureSpec, String> {
        let i = &self.integrator;
        QuadratureSpec::new(i.circle_order.unwrap_or(order), i.circle_panels.unwrap_or(panels), 1)
            .map_err(|e| format!("[integrator]: {e}"))
    }

    fn require(&self, kinds: &[SurfaceKind], what: &str) -> Result<(), String> {
        if kinds.contains(&self.ctx.surface.kind) {
            Ok(())
        } else {
            Err(format!("{what} needs surface kind {kinds:?}, got {}", self.ctx.surface.kind.name()))
        }
    }
}

/// Validates an experiment and returns its tasks in report order. Errors are configuration
/// errors; numerical failures become failing rows when the tasks run.
pub fn tasks(e: &Experiment, prefix: &str, st: &Settings) -> Result<Vec<Task>, String> {
    match e {
        Experiment::Flux { map, lambda, .. } => flux(prefix, st, map.as_deref(), lambda.as_deref()),
        Experiment::Calabi { map, patch, e_sign, .. } => calabi(prefix, st, map.as_deref(), *patch, *e_sign),
        Experiment::SweptArea { arc, isotopy, .. } => swept(prefix, st, arc.as_deref(), isotopy.as_deref()),
        Experiment::Cocycle { triples, pairs, rotation_pairs, n_iter, amplitude, .. } => cocycle(
            prefix,
            st,
            triples.unwrap_or(50),
            pairs.unwrap_or(20),
            rotation_pairs.unwrap_or(0),
            n_iter.unwrap_or(1_000_000),
            amplitude.unwrap_or(0.6),
        ),
        Experiment::Transgression { pairs, lambda, steps, .. } => {
            transgression(prefix, st, pairs.as_ref(), lambda.as_deref(), *steps)
        }
        Experiment::Flows { extensions, grid, .. } => flows(prefix, st, extensions.as_ref(), grid.unwrap_or(32)),
        Experiment::CellDivision { target, .. } => cell_division(prefix, st, target.unwrap_or(0.2)),
    }
}

fn rows_or_failure(quantity: String, anchor: &'static str, f: impl FnOnce() -> Result<Vec<Row>, String>) -> Vec<Row> {
    match f() {
        Ok(rows) => rows,
        Err(msg) => {
            eprintln!("{quantity}: {msg}");
            vec![Row::failure(quantity, anchor)]
        }
    }
}

fn task(quantity: String, anchor: &'static str, f: impl FnOnce() -> Result<Vec<Row>, String> + Send + 'static) -> Task {
    Box::new(move || rows_or_failure(quantity, anchor, f))
}

fn s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn flux(prefix: &str, st: &Settings, map: Option<&str>, lambda: Option<&str>) -> Result<Vec<Task>, String> {
    let ctx = &st.ctx;
    let map_src = map.unwrap_or("shear:t=1");
    let lambda_src = lambda.unwrap_or("dx");
    let spec = st.surface_spec(QuadratureSpec::default())?;
    let BuiltMap { map, closed } = build_map(map_src, ctx).map_err(|e| format!("map: {e}"))?;
    let lambda = build_form(lambda_src, ctx, &spec).map_err(|e| format!("lambda: {e}"))?;
    let tol = st.tol(st.tolerances.flux, 1e-6);
    let w = ctx.surface.half_width;
    let q = format!("{prefix}.flux_lambda");
    let is_dx = lambda_src.trim() == "dx";
    Ok(vec![task(q.clone(), "Subsec:lambda-flux", move || {
        let eta = standard_primitive(map.surface());
        let value = flux_lambda(&map, &lambda, &eta, &spec).map_err(s)?;
        let row = match closed {
            ClosedForm::Identity => Row::check(q, value, 0.0, tol, "Subsec:lambda-flux"),
            ClosedForm::Shear { t, profile } if is_dx => {
                let oracle = shear_flux_oracle(t, &profile, w, &QuadratureSpec::new(16, 64, 1).map_err(s)?)
                    .map_err(s)?;
                Row::check(q, value, oracle, tol, "Sec:Flux")
            }
            _ => {
                let refined = flux_lambda(&map, &lambda, &eta, &spec.refined(2)).map_err(s)?;
                Row::check(q, value, refined, tol, "Subsec:lambda-flux")
            }
        };
        Ok(vec![row])
    })])
}

fn calabi(
    prefix: &str,
    st: &Settings,
    map: Option<&str>,
    patch: Option<[f64; 4]>,
    e_sign: Option<f64>,
) -> Result<Vec<Task>, String> {
    let ctx = &st.ctx;
    let surf = ctx.surface;
    let disk = surf.kind == SurfaceKind::Disk;
    let default_map = if disk {
        "twist:cx=0.1,cy=-0.1,ax=0.3,ay=0.25,a=0.02".to_string()
    } else {
        format!("twist:cx=0.5,cy=0,ax=0.3,ay={},a=0.02", 0.6 * surf.half_width)
    };
    let BuiltMap { map, closed } = build_map(map.unwrap_or(&default_map), ctx).map_err(|e| format!("map: {e}"))?;
    let e = e_sign.unwrap_or(1.0);
    if e.abs() != 1.0 {
        return Err(format!("e_sign must be 1 or -1, got {e}"));
    }
    let h = 0.96 * surf.half_width;
    let patch = patch.map(|[x0, x1, y0, y1]| Rect::new(x0, x1, y0, y1)).unwrap_or(Rect::new(0.02, 0.98, -h, h));
    let spec = st.surface_spec(QuadratureSpec::new(16, 64, 64).map_err(s)?)?;
    let tol = st.tol(st.tolerances.calabi, 1e-6);
    let q = format!("{prefix}.{}", if disk { "calabi_disk" } else { "local_calabi" });
    Ok(vec![task(q.clone(), TWIST_ORACLE_ANCHOR, move || {
        let eta = standard_primitive(surf);
        let eval = |spec: &QuadratureSpec| -> Result<f64, String> {
            if disk {
                calabi_disk(&map, &eta, spec).map_err(s)
            } else {
                local_calabi(&map, patch, e, &eta, spec).map(|c| c.value).map_err(s)
            }
        };
        let value = eval(&spec)?;
        let oracle = match closed {
            ClosedForm::Identity => 0.0,
            // ∫ η∧g*η on the disk is minus the patch invariant with e = +1
            ClosedForm::Twist(tw) if disk => -twist_calabi_oracle(&tw, 1.0),
            ClosedForm::Twist(tw) => twist_calabi_oracle(&tw, e),
            _ => eval(&spec.refined(2))?,
        };
        Ok(vec![Row::check(q, value, oracle, tol, TWIST_ORACLE_ANCHOR)])
    })])
}

fn swept(prefix: &str, st: &Settings, arc: Option<&str>, isotopy: Option<&str>) -> Result<Vec<Task>, String> {
    let ctx = &st.ctx;
    st.require(&[SurfaceKind::Mobius, SurfaceKind::Annulus], "swept-area")?;
    let arc = build_arc(arc.unwrap_or("cut:0"), ctx).map_err(|e| format!("arc: {e}"))?;
    let BuiltMap { map, .. } = build_map(isotopy.unwrap_or("shear:t=1"), ctx).map_err(|e| format!("isotopy: {e}"))?;
    let iso = IsotopyPath::from_diffeo(&map).map_err(|e| format!("isotopy: {e}"))?;
    let spec = st.surface_spec(QuadratureSpec::default())?;
    let tol = st.tol(st.tolerances.swept_area, 1e-6);
    let surf = ctx.surface;
    let q = format!("{prefix}.swept_area");
    Ok(vec![task(q.clone(), "Lem:sweptArea", move || {
        let value = swept_area(&arc, &iso, &spec).map_err(s)?;
        let lambda = poincare_dual(&surf, &arc, &spec).map_err(s)?.form;
        let oracle = flux_lambda(&map, &lambda, &standard_primitive(surf), &spec).map_err(s)?;
        Ok(vec![Row::check(q, value, oracle, tol, "Lem:sweptArea")])
    })])
}

fn cocycle(
    prefix: &str,
    st: &Settings,
    triples: usize,
    pairs: usize,
    rotation_pairs: usize,
    n_iter: usize,
    amplitude: f64,
) -> Result<Vec<Task>, String> {
    if !(amplitude > 0.0 && amplitude < 1.0) {
        return Err(format!("amplitude must lie in (0, 1), got {amplitude}"));
    }
    if n_iter == 0 {
        return Err("n_iter must be positive".into());
    }
    let spec = st.circle_spec(8, 64)?;
    let tol_chi = st.tol(st.tolerances.cocycle, 1e-7);
    let tol_cf = st.tol(st.tolerances.chi_cf, 1e-8);
    let tol_rot = st.tol(st.tolerances.rotation, 1e-3);
    // all random inputs are drawn here, in order, so tasks are independent of scheduling
    let mut rng = ChaCha8Rng::seed_from_u64(st.seed);
    let mut out: Vec<Task> = Vec::new();
    for i in 0..triples {
        let (phi, psi) = (random_one_form(&mut rng), random_one_form(&mut rng));
        let g: Vec<_> = (0..3).map(|_| random_lift(&mut rng, amplitude)).collect();
        let q = format!("{prefix}.delta_chi[{i}]");
        out.push(task(q.clone(), "eq:Euler_cocycle", move || {
            let chi = |a: &_, b: &_| euler_cocycle_chi(&phi, &psi, a, b, &spec);
            let d = group_coboundary2(chi, |a, b| a.compose(b), &g[0], &g[1], &g[2]).map_err(s)?;
            Ok(vec![Row::check(q, d, 0.0, tol_chi, "eq:Euler_cocycle")])
        }));
    }
    for i in 0..pairs {
        let (phi, psi) = (random_one_form(&mut rng), random_one_form(&mut rng));
        let (g1, g2) = (random_lift(&mut rng, amplitude), random_lift(&mut rng, amplitude));
        let q = format!("{prefix}.chi_vs_cf[{i}]");
        out.push(task(q.clone(), "Sec:euFormula", move || {
            let chi = euler_cocycle_chi(&phi, &psi, &g1, &g2, &spec).map_err(s)?;
            let cf = cf_cocycle(&phi, &psi, &g1, &g2, &spec).map_err(s)?;
            Ok(vec![Row::check(q, chi, cf, tol_cf, "Sec:euFormula")])
        }));
    }
    for i in 0..rotation_pairs {
        let (g1, g2) = (random_lift(&mut rng, amplitude), random_lift(&mut rng, amplitude));
        let q = format!("{prefix}.rot_cocycle[{i}]");
        out.push(task(q.clone(), "Exa:matsumoto_cocycle", move || {
            let r = rot_cocycle(&g1, &g2, n_iter).map_err(s)?;
            Ok(vec![Row::check(q, r.value, r.nearest as f64, tol_rot, "Exa:matsumoto_cocycle")])
        }));
    }
    Ok(out)
}

/// Pairs `(h1, h2)` of the default transgression suite: extensions of circle flows, closed-form
/// maps fixing the boundary, and mixtures.
pub const TRANSGRESSION_PAIRS: [[&str; 2]; 10] = [
    ["extension:xi=0.12*sin(2*pi*theta) + 0.05", "extension:xi=0.1*cos(2*pi*theta)*(1 + t) - 0.04"],
    ["extension:xi=0.1", "extension:xi=0.08*sin(4*pi*theta)"],
    ["extension:xi=0.1*sin(2*pi*theta)", "extension:xi=0.05*cos(2*pi*theta) - 0.07"],
    ["extension:xi=0.1*cos(4*pi*theta)", "extension:xi=0.12*sin(2*pi*theta) + 0.05"],
    ["extension:xi=0.1", "twist:cx=0.5,cy=0,ax=0.2,ay=0.15,a=0.3"],
    ["twist:cx=0.6,cy=-0.05,ax=0.2,ay=0.15,a=0.3", "extension:xi=0.1*sin(2*pi*theta)"],
    ["extension:xi=0.1*sin(2*pi*theta) + 0.05", "shear:t=0.5,b=bump(0.6*y)"],
    ["shear:t=0.7", "twist:cx=0.3,cy=0.05,ax=0.2,ay=0.15,a=0.005"],
    ["twist:cx=0.6,cy=-0.05,ax=0.2,ay=0.15,a=0.005", "twist:cx=0.4,cy=0.1,ax=0.15,ay=0.2,a=-0.004"],
    ["shear:t=-0.4", "shear:t=1.1"],
];

/// The closed even form `(1 + πy cos πx) dx + sin(πx) dy` of the default suite.
pub const TRANSGRESSION_LAMBDA: &str = "form:p=1 + pi*y*cos(pi*x),q=sin(pi*x)";

fn transgression(
    prefix: &str,
    st: &Settings,
    pairs: Option<&Vec<[String; 2]>>,
    lambda: Option<&str>,
    steps: Option<usize>,
) -> Result<Vec<Task>, String> {
    st.require(&[SurfaceKind::Mobius], "transgression")?;
    let mut ctx = st.ctx.clone();
    ctx.steps = Some(steps.or(ctx.steps).unwrap_or(32));
    let pairs: Vec<[String; 2]> = match pairs {
        Some(p) => p.clone(),
        None => TRANSGRESSION_PAIRS.iter().map(|[a, b]| [a.to_string(), b.to_string()]).collect(),
    };
    let collar_base = QuadratureSpec::new(16, 4, 32).map_err(s)?;
    let closed_spec = st.surface_spec(QuadratureSpec::new(16, 64, 64).map_err(s)?)?;
    let circle_spec = st.circle_spec(16, 64)?;
    let lambda = build_form(lambda.unwrap_or(TRANSGRESSION_LAMBDA), &ctx, &closed_spec)
        .map_err(|e| format!("lambda: {e}"))?;
    let tol = st.tol(st.tolerances.transgression, TRANSGRESSION_TOL);
    let mut out: Vec<Task> = Vec::new();
    {
        let lambda = lambda.clone();
        let area = ctx.surface.area();
        let a_tol = st.tol(None, 1e-6);
        let q = format!("{prefix}.a_omega");
        let qb = format!("{prefix}.b_lambda");
        out.push(task(q.clone(), "Thm:transgression_flux", move || {
            let eta = standard_primitive(lambda.surface());
            let a = boundary_form_restriction(&eta).map_err(s)?.total(&circle_spec).map_err(s)?;
            let b = boundary_form_restriction(&lambda).map_err(s)?.total(&circle_spec).map_err(s)?;
            Ok(vec![
                Row::check(q, a, area, a_tol, "Thm:transgression_flux"),
                Row::value(qb, b, "Thm:transgression_flux"),
            ])
        }));
    }
    for (i, [a, b]) in pairs.iter().enumerate() {
        let h1 = build_map(a, &ctx).map_err(|e| format!("pairs[{i}][0]: {e}"))?;
        let h2 = build_map(b, &ctx).map_err(|e| format!("pairs[{i}][1]: {e}"))?;
        let closed = |m: &BuiltMap| m.closed != ClosedForm::None;
        let spec = if closed(&h1) && closed(&h2) {
            closed_spec
        } else {
            st.surface_spec(overlap_spec(collar_base, &h1.map, &h2.map))?
        };
        let lambda = lambda.clone();
        let q = format!("{prefix}.pair[{i}]");
        out.push(task(q.clone(), "Thm:transgression_flux", move || {
            let eta = standard_primitive(lambda.surface());
            let r = verify_transgression(&h1.map, &h2.map, &lambda, &eta, &spec, &circle_spec, tol).map_err(s)?;
            Ok(vec![Row::check(q, r.lhs, r.rhs, tol, "Thm:transgression_flux")])
        }));
    }
    Ok(out)
}

/// Panel counts for a pair whose supports overlap: at least 8 panels across the narrowest
/// support piece in each direction, rounded up to a power of two. Pieces spanning the whole
/// domain in a direction impose nothing there.
fn overlap_spec(base: QuadratureSpec, h1: &FlowDiffeo, h2: &FlowDiffeo) -> QuadratureSpec {
    let surf = h1.surface();
    let dom = surf.domain();
    let pieces = |h: &FlowDiffeo| surf.fundamental_pieces(&h.support_rects().unwrap_or_else(|| vec![dom]));
    let (p1, p2) = (pieces(h1), pieces(h2));
    if !p1.iter().any(|a| p2.iter().any(|b| a.intersect(b).is_some())) {
        return base;
    }
    let need = |full: f64, part: f64| {
        if part >= full * (1.0 - 1e-9) {
            return 0;
        }
        ((8.0 * full / part).ceil() as usize).next_power_of_two().min(256)
    };
    let mut spec = base;
    for r in p1.iter().chain(&p2) {
        spec.panels_x = spec.panels_x.max(need(dom.x1 - dom.x0, r.x1 - r.x0));
        spec.panels_y = spec.panels_y.max(need(dom.y1 - dom.y0, r.y1 - r.y0));
    }
    spec
}

/// Boundary flows of the default `flows` suite.
pub const FLOW_EXTENSIONS: [&str; 3] =
    ["0.1*sin(2*pi*theta)", "0.05 + 0.1*cos(2*pi*theta)*t", "0.08*sin(4*pi*theta) - 0.03"];

fn flows(prefix: &str, st: &Settings, extensions: Option<&Vec<String>>, grid: usize) -> Result<Vec<Task>, String> {
    let ctx = &st.ctx;
    st.require(&[SurfaceKind::Mobius, SurfaceKind::Annulus], "flows")?;
    if grid == 0 {
        return Err("grid must be positive".into());
    }
    let surf = ctx.surface;
    let per_unit = ctx.steps.unwrap_or(crate::flow::STEPS_PER_UNIT_TIME);
    let det_tol = st.tol(st.tolerances.area_preservation, 1e-6);
    let trace_tol = st.tol(st.tolerances.trace, 1e-6);
    let kernel_tol = st.tol(st.tolerances.kernel, 1e-6);
    let mut out: Vec<Task> = Vec::new();
    let xis: Vec<String> = match extensions {
        Some(x) => x.clone(),
        None => FLOW_EXTENSIONS.iter().map(|x| x.to_string()).collect(),
    };
    for (i, src) in xis.iter().enumerate() {
        let xi = super::grammar::resolve(src, ctx).map_err(|e| format!("extensions[{i}]: {e}"))?;
        let field = boundary_extension(surf, &xi, ctx.collar_depth, None).map_err(|e| format!("extensions[{i}]: {e}"))?;
        let q = format!("{prefix}.extension[{i}]");
        out.push(task(q.clone(), "Prop:boundarySurj", move || {
            let g = flow_map(&field, 1.0, per_unit).map_err(s)?;
            let det = g.det_defect(grid);
            let trace = boundary_trace(&g).map_err(s)?;
            let oracle = circle_flow(&xi, 1.0, 4 * per_unit).map_err(s)?;
            let dist = trace.sup_distance(&oracle, 256);
            Ok(vec![
                Row::check(format!("{q}.det_defect"), det, 0.0, det_tol, "Prop:boundarySurj"),
                Row::check(format!("{q}.trace_distance"), dist, 0.0, trace_tol, "Prop:boundarySurj"),
            ])
        }));
    }
    let spec = st.surface_spec(QuadratureSpec::default())?;
    let cut = cut_arcs(ctx);
    let w = surf.half_width;
    {
        let cut = cut.clone();
        let q = format!("{prefix}.kernel.twist");
        out.push(task(q.clone(), "Lem:zeroArea", move || {
            let tw = EllipticTwist { center: [0.45, 0.1 * w], axes: [0.3, 0.6 * w], amplitude: 0.03, time: 1.0 };
            let g = FlowDiffeo::twist(surf, tw).map_err(s)?;
            let r = flux_kernel_test(&g, &cut, kernel_tol, &spec).map_err(s)?;
            let worst = r.residuals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            Ok(vec![Row::check(q, worst, 0.0, kernel_tol, "Lem:zeroArea")])
        }));
    }
    let q = format!("{prefix}.kernel.shear");
    out.push(task(q.clone(), "Lem:zeroFluxn", move || {
        let g = if surf.kind == SurfaceKind::Mobius {
            mobius_shear(surf, 1.0).map_err(s)?
        } else {
            FlowDiffeo::shear(surf, 1.0, crate::flow::shear_profile()).map_err(s)?
        };
        let r = flux_kernel_test(&g, &cut, kernel_tol, &spec).map_err(s)?;
        let iso = IsotopyPath::from_diffeo(&g).map_err(s)?;
        let mut rows = Vec::new();
        for (k, (arc, value)) in cut.iter().zip(&r.residuals).enumerate() {
            // nonzero flux, confirmed by the area the arc sweeps
            let oracle = swept_area(arc, &iso, &spec).map_err(s)?;
            rows.push(Row::check(format!("{q}[{k}]"), *value, oracle, kernel_tol, "Lem:zeroFluxn"));
        }
        rows.push(Row::check(
            format!("{q}.in_kernel"),
            if r.in_kernel { 1.0 } else { 0.0 },
            0.0,
            0.0,
            "Lem:zeroFluxn",
        ));
        Ok(rows)
    }));
    Ok(out)
}

fn cell_division(prefix: &str, st: &Settings, target: f64) -> Result<Vec<Task>, String> {
    st.require(&[SurfaceKind::Mobius], "cell-division")?;
    let surf = st.ctx.surface;
    let geom = CellGeometry::standard(&surf).map_err(s)?;
    let spec = st.surface_spec(QuadratureSpec::new(16, 64, 64).map_err(s)?)?;
    let tol_cal = st.tol(st.tolerances.calabi, 1e-6);
    let tol_split = st.tol(st.tolerances.cell_division, 1e-5);
    let tol_sign = st.tol(st.tolerances.sign_flip, 1e-6);
    let q = prefix.to_string();
    Ok(vec![task(q.clone(), "Lem:cellDivision", move || {
        let w = surf.half_width;
        let h = calabi_generator(&surf, [0.5, 0.0], [0.19, 0.94 * w], target, &geom.u, &spec).map_err(s)?;
        let d = cell_division_split(&surf, &h, &geom, &spec).map_err(s)?;
        let a = "Lem:cellDivision";
        Ok(vec![
            Row::check(format!("{q}.cal_u_h"), d.cal_h, target, tol_cal, a),
            Row::check(format!("{q}.cal_u_u"), d.cal_u, 0.0, tol_split, a),
            Row::check(format!("{q}.cal_v_v"), d.cal_v, 0.0, tol_split, a),
            Row::check(format!("{q}.composition_residual"), d.residual, 0.0, tol_split, a),
            Row::check(format!("{q}.cal_u_gb"), d.cal_u_gb, -d.c, tol_sign, a),
            Row::check(format!("{q}.cal_v_gb"), d.cal_v_gb, d.c, tol_sign, a),
            Row::check(format!("{q}.cal_u_ga"), d.cal_u_ga, -d.c, tol_sign, a),
            Row::check(format!("{q}.cal_v_ga"), d.cal_v_ga, -d.c, tol_sign, a),
        ])
    })])
}

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if any fails.
//!
//! Tolerances and sizes are fixed here and do not read the CLI defaults.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use areaflux::celldivision::{calabi_generator, cell_division_split, CellGeometry};
use areaflux::circle::{cf_cocycle, euler_cocycle_chi, group_coboundary2, random_lift, random_one_form, rot_cocycle};
use areaflux::cli::grammar::{build_arc, build_map, Context};
use areaflux::cli::{run, Cli};
use areaflux::fieldexpr::{parse, parse_with, Var};
use areaflux::flow::{
    boundary_extension, boundary_trace, circle_flow, flow_map, mobius_shear, shear_profile, EllipticTwist,
    FlowDiffeo, STEPS_PER_UNIT_TIME,
};
use areaflux::invariants::{
    calabi_disk, flux_kernel_test, flux_lambda, shear_flux_oracle, shifted_primitive, swept_area, IsotopyPath,
};
use areaflux::quadrature::QuadratureSpec;
use areaflux::surface::{cut_system, poincare_dual, standard_primitive, FormField, Parity, QuotientSurface};

const SEED: u64 = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = fn() -> Result<Outcome, String>;

fn outcome(pass: bool, detail: String) -> Result<Outcome, String> {
    Ok(Outcome { pass, detail })
}

fn s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn circle_spec() -> QuadratureSpec {
    QuadratureSpec::new(8, 64, 1).unwrap()
}

fn ctx(surface: QuotientSurface) -> Context {
    Context { surface, fields: Default::default(), steps: None, collar_depth: None, epsilon: 0.125 }
}

fn c1_cocycle() -> Result<Outcome, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let spec = circle_spec();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (phi, psi) = (random_one_form(&mut rng), random_one_form(&mut rng));
        let g: Vec<_> = (0..3).map(|_| random_lift(&mut rng, 0.6)).collect();
        let chi = |a: &_, b: &_| euler_cocycle_chi(&phi, &psi, a, b, &spec);
        let d = group_coboundary2(chi, |a, b| a.compose(b), &g[0], &g[1], &g[2]).map_err(s)?;
        worst = worst.max(d.abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst < 1e-7 && secs < 30.0, format!("50 triples, max |δχ| = {worst:.2e} (< 1e-7), {secs:.1} s (< 30 s)"))
}

fn c2_chi_cf() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let spec = circle_spec();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (phi, psi) = (random_one_form(&mut rng), random_one_form(&mut rng));
        let (g1, g2) = (random_lift(&mut rng, 0.6), random_lift(&mut rng, 0.6));
        let chi = euler_cocycle_chi(&phi, &psi, &g1, &g2, &spec).map_err(s)?;
        let cf = cf_cocycle(&phi, &psi, &g1, &g2, &spec).map_err(s)?;
        worst = worst.max((chi - cf).abs());
    }
    outcome(worst < 1e-8, format!("20 pairs, max |χ − c_F| = {worst:.2e} (< 1e-8)"))
}

fn dx(s: QuotientSurface) -> FormField {
    FormField::one_form(s, Parity::Even, parse("1").unwrap(), parse("0").unwrap()).unwrap()
}

fn c3_shear_flux() -> Result<Outcome, String> {
    let m = QuotientSurface::mobius();
    let eta = standard_primitive(m);
    let spec = QuadratureSpec::default();
    let oracle_spec = QuadratureSpec::new(16, 64, 1).unwrap();
    let flux = |t: f64| -> Result<f64, String> {
        flux_lambda(&mobius_shear(m, t).map_err(s)?, &dx(m), &eta, &spec).map_err(s)
    };
    let unit = flux(1.0)?;
    let (mut worst, mut lin) = (0.0f64, 0.0f64);
    for t in [0.25, 1.0, 2.0] {
        let v = flux(t)?;
        let want = shear_flux_oracle(t, &shear_profile(), m.half_width, &oracle_spec).map_err(s)?;
        worst = worst.max((v - want).abs());
        lin = lin.max((v - t * unit).abs());
    }
    outcome(
        worst < 1e-6 && lin < 1e-6 && unit.abs() > 1e-3,
        format!("t ∈ {{0.25, 1, 2}}: max |F − oracle| = {worst:.2e}, linearity {lin:.2e} (< 1e-6), F(1) = {unit:.6}"),
    )
}

fn c4_swept_area() -> Result<Outcome, String> {
    let cases: [(&str, &str, &str); 7] = [
        ("annulus", "cut:0", "shear:t=1"),
        ("annulus", "vertical:x=0.3,orientation=-1", "shear:t=-0.6,b=bump(0.7*y)"),
        ("annulus", "graph:x=0.4,c=0.1*sin(pi*y),orientation=1", "flow:H=0.3*(y - 4*y^3/3) + 0.05*(y^2 - 0.25)^2*sin(2*pi*x)"),
        ("mobius", "cut:0", "shear:t=1"),
        ("mobius", "vertical:x=0.6,orientation=1", "shear:t=0.8,b=bump(0.8*y)"),
        ("mobius", "graph:x=0.5,c=0.15*y^2,orientation=1", "shear:t=-1.3"),
        ("mobius", "cut:0", "twist:cx=0.5,cy=0,ax=0.3,ay=0.3,a=0.02"),
    ];
    let spec = QuadratureSpec::default();
    let mut worst = 0.0f64;
    let mut nontrivial = 0;
    for (kind, arc, iso) in cases {
        let surf = if kind == "annulus" { QuotientSurface::annulus() } else { QuotientSurface::mobius() };
        let c = ctx(surf);
        let arc = build_arc(arc, &c)?;
        let map = build_map(iso, &c)?.map;
        let path = IsotopyPath::from_diffeo(&map).map_err(s)?;
        let o = swept_area(&arc, &path, &spec).map_err(s)?;
        let lambda = poincare_dual(&surf, &arc, &spec).map_err(s)?.form;
        let f = flux_lambda(&map, &lambda, &standard_primitive(surf), &spec).map_err(s)?;
        worst = worst.max((o - f).abs());
        if f.abs() > 1e-3 {
            nontrivial += 1;
        }
    }
    outcome(
        worst < 1e-6 && nontrivial >= 5,
        format!("{} arc/isotopy pairs ({nontrivial} nonzero), max |O − Flux| = {worst:.2e} (< 1e-6)", cases.len()),
    )
}

fn c5_transgression() -> Result<Outcome, String> {
    let start = Instant::now();
    let cli = <Cli as clap::Parser>::try_parse_from(["areaflux", "verify", "transgression"]).map_err(s)?;
    let mut out = Vec::new();
    run(&cli, &mut out)?;
    let secs = start.elapsed().as_secs_f64();
    let (mut pairs, mut vanishing, mut worst) = (0, 0, 0.0f64);
    for line in String::from_utf8(out).map_err(s)?.lines() {
        let row: serde_json::Value = serde_json::from_str(line).map_err(s)?;
        if !row["quantity"].as_str().unwrap_or("").contains(".pair[") {
            continue;
        }
        let (lhs, rhs) = (row["value"].as_f64(), row["oracle"].as_f64());
        let (Some(lhs), Some(rhs)) = (lhs, rhs) else { return outcome(false, format!("no value in {line}")) };
        pairs += 1;
        worst = worst.max((lhs - rhs).abs());
        if rhs == 0.0 && lhs.abs() < 2e-5 {
            vanishing += 1;
        }
    }
    outcome(
        pairs >= 10 && worst < 2e-5 && vanishing >= 1 && secs < 300.0,
        format!("{pairs} pairs ({vanishing} with both sides 0), max |δF − χ| = {worst:.2e} (< 2e-5), {secs:.0} s (< 300 s)"),
    )
}

fn c6_boundary_extension() -> Result<Outcome, String> {
    let xis = ["0.1*sin(2*pi*theta)", "0.05 + 0.1*cos(2*pi*theta)*t", "0.08*sin(4*pi*theta) - 0.03"];
    let (mut det, mut dist) = (0.0f64, 0.0f64);
    let mut n = 0;
    for surf in [QuotientSurface::mobius(), QuotientSurface::annulus()] {
        for src in xis {
            let xi = parse_with(src, &Var::ALL).map_err(s)?;
            let g = flow_map(&boundary_extension(surf, &xi, None, None).map_err(s)?, 1.0, STEPS_PER_UNIT_TIME)
                .map_err(s)?;
            det = det.max(g.det_defect(32));
            let oracle = circle_flow(&xi, 1.0, 4 * STEPS_PER_UNIT_TIME).map_err(s)?;
            dist = dist.max(boundary_trace(&g).map_err(s)?.sup_distance(&oracle, 512));
            n += 1;
        }
    }
    outcome(
        det < 1e-6 && dist < 1e-6,
        format!("{n} extensions, max |det D − 1| = {det:.2e} on 32×32, trace sup distance {dist:.2e} (< 1e-6)"),
    )
}

/// A shear with a smooth even profile vanishing at the edges, or a twist turning its level
/// sets by at most one radian.
fn random_mobius_map(rng: &mut ChaCha8Rng) -> Result<FlowDiffeo, String> {
    let m = QuotientSurface::mobius();
    if rng.gen_bool(0.5) {
        let t = rng.gen_range(-1.5..1.5);
        let c = rng.gen_range(-2.0..2.0);
        FlowDiffeo::shear(m, t, parse(&format!("cos(pi*y)^2*(1 + {c}*y^2)")).map_err(s)?).map_err(s)
    } else {
        let mut tw = EllipticTwist {
            center: [rng.gen_range(0.35..0.65), rng.gen_range(-0.1..0.1)],
            axes: [rng.gen_range(0.15..0.3), rng.gen_range(0.15..0.3)],
            amplitude: rng.gen_range(-0.02..0.02),
            time: 1.0,
        };
        tw.amplitude /= tw.peak_rotation().max(1.0);
        FlowDiffeo::twist(m, tw).map_err(s)
    }
}

fn random_disk_twist(rng: &mut ChaCha8Rng) -> Result<FlowDiffeo, String> {
    let tw = EllipticTwist {
        center: [rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)],
        axes: [rng.gen_range(0.2..0.4), rng.gen_range(0.2..0.4)],
        amplitude: rng.gen_range(-0.02..0.02),
        time: 1.0,
    };
    FlowDiffeo::twist(QuotientSurface::disk(), tw).map_err(s)
}

fn c7_homomorphisms() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let m = QuotientSurface::mobius();
    let eta = standard_primitive(m);
    let lambda = FormField::one_form(m, Parity::Even, parse("1 + pi*y*cos(pi*x)").unwrap(), parse("sin(pi*x)").unwrap())
        .map_err(s)?;
    let spec = QuadratureSpec::new(16, 64, 64).unwrap();
    let mut flux_worst = 0.0f64;
    for _ in 0..50 {
        let (g, h) = (random_mobius_map(&mut rng)?, random_mobius_map(&mut rng)?);
        let f = |x: &FlowDiffeo| flux_lambda(x, &lambda, &eta, &spec).map_err(s);
        flux_worst = flux_worst.max((f(&g.compose(&h))? - f(&g)? - f(&h)?).abs());
    }
    let d = QuotientSurface::disk();
    let eta0 = standard_primitive(d);
    let eta1 = shifted_primitive(&eta0, &parse("0.3*x*y + 0.1*sin(2*x)*cos(y)").unwrap()).map_err(s)?;
    let dspec = QuadratureSpec::new(16, 64, 64).unwrap();
    let (mut cal_worst, mut prim_worst) = (0.0f64, 0.0f64);
    for i in 0..50 {
        let (g, h) = (random_disk_twist(&mut rng)?, random_disk_twist(&mut rng)?);
        let c = |x: &FlowDiffeo, e| calabi_disk(x, e, &dspec).map_err(s);
        let (cg, ch, cgh) = (c(&g, &eta0)?, c(&h, &eta0)?, c(&g.compose(&h), &eta0)?);
        cal_worst = cal_worst.max((cgh - cg - ch).abs());
        if i < 10 {
            prim_worst = prim_worst.max((c(&g.compose(&h), &eta1)? - cgh).abs());
        }
    }
    outcome(
        flux_worst < 1e-6 && cal_worst < 1e-6 && prim_worst < 1e-6,
        format!(
            "50 pairs each: flux additivity {flux_worst:.2e}, Calabi additivity {cal_worst:.2e}, primitive change {prim_worst:.2e} (< 1e-6)"
        ),
    )
}

fn c8_kernel() -> Result<Outcome, String> {
    let m = QuotientSurface::mobius();
    let cut = cut_system(&m);
    let spec = QuadratureSpec::default();
    let c = ctx(m);
    let mut worst = 0.0f64;
    let mut all_in = true;
    for src in [
        "twist:cx=0.45,cy=0.05,ax=0.3,ay=0.3,a=0.03",
        "twist:cx=0.5,cy=-0.1,ax=0.2,ay=0.25,a=-0.02",
        "flow:H=0.01*bump(4*((x - 0.5)^2 + y^2))",
    ] {
        let g = build_map(src, &c)?.map;
        let r = flux_kernel_test(&g, &cut, 1e-6, &spec).map_err(s)?;
        worst = r.residuals.iter().fold(worst, |a, v| a.max(v.abs()));
        all_in &= r.in_kernel;
    }
    let shear = flux_kernel_test(&mobius_shear(m, 1.0).map_err(s)?, &cut, 1e-6, &spec).map_err(s)?;
    let shear_size = shear.residuals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    outcome(
        worst < 1e-6 && all_in && !shear.in_kernel,
        format!("disk-supported max residual {worst:.2e} (< 1e-6); shear p_1 flux {shear_size:.4}, in kernel: {}", shear.in_kernel),
    )
}

fn c9_cell_division() -> Result<Outcome, String> {
    let m = QuotientSurface::mobius();
    let geom = CellGeometry::standard(&m).map_err(s)?;
    let spec = QuadratureSpec::new(16, 64, 64).unwrap();
    let w = m.half_width;
    let h = calabi_generator(&m, [0.5, 0.0], [0.19, 0.94 * w], 0.2, &geom.u, &spec).map_err(s)?;
    let d = cell_division_split(&m, &h, &geom, &spec).map_err(s)?;
    let flip = (d.cal_u_gb + d.c).abs().max((d.cal_v_gb - d.c).abs());
    outcome(
        (d.cal_h - 0.2).abs() < 1e-6 && d.cal_u.abs() < 1e-5 && d.cal_v.abs() < 1e-5 && d.residual < 1e-5 && flip < 1e-6,
        format!(
            "Cal_U(h) = {:.7}, |Cal_U(u)| = {:.1e}, |Cal_V(v)| = {:.1e}, residual {:.1e} (< 1e-5), sign flip c = {:.5} within {flip:.1e} (< 1e-6)",
            d.cal_h,
            d.cal_u.abs(),
            d.cal_v.abs(),
            d.residual,
            d.c
        ),
    )
}

fn c10_rotation() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (g1, g2) = (random_lift(&mut rng, 0.6), random_lift(&mut rng, 0.6));
        worst = worst.max(rot_cocycle(&g1, &g2, 1_000_000).map_err(s)?.residual);
    }
    outcome(worst < 1e-3, format!("20 pairs, n_iter = 1e6, max distance to an integer {worst:.2e} (< 1e-3)"))
}

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("cocycle suite", c1_cocycle),
        ("chi = c_F", c2_chi_cf),
        ("Möbius shear flux", c3_shear_flux),
        ("swept area", c4_swept_area),
        ("transgression", c5_transgression),
        ("boundary extension", c6_boundary_extension),
        ("homomorphisms", c7_homomorphisms),
        ("flux kernel", c8_kernel),
        ("cell division", c9_cell_division),
        ("rotation cocycle integrality", c10_rotation),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match f() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {verdict} {name}: {detail} [{:.1} s]", start.elapsed().as_secs_f64());
        if !pass {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

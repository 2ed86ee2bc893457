use proptest::prelude::*;

use areaflux::circle::{translation_number, CircleLift};
use areaflux::fieldexpr::{parse, Env, Var};
use areaflux::flow::{EllipticTwist, FlowDiffeo};
use areaflux::invariants::flux_lambda;
use areaflux::quadrature::{integrate_1d, QuadratureSpec};
use areaflux::surface::{standard_primitive, FormField, Parity, QuotientSurface, SurfaceMap};

fn expr_source() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        Just("pi".to_string()),
        (-3.0..3.0f64).prop_map(|c| format!("{c:.3}")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("bump({a})")),
            inner.prop_map(|a| format!("-({a})^2")),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_expressions_reparse_to_the_same_function(src in expr_source(), x in -1.0..1.0f64, y in -0.5..0.5f64) {
        let e = parse(&src).unwrap();
        let again = parse(&e.to_string()).unwrap();
        let env = Env::xy(x, y);
        let (a, b) = (e.eval(&env).unwrap(), again.eval(&env).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{src}: {a} vs {b}");
    }

    #[test]
    fn derivative_matches_central_difference(src in expr_source(), x in -1.0..1.0f64, y in -0.5..0.5f64) {
        let e = parse(&src).unwrap();
        let d = e.derivative(Var::X);
        let h = 1e-5;
        let f = |x: f64| e.eval(&Env::xy(x, y)).unwrap();
        let fd = (f(x + h) - f(x - h)) / (2.0 * h);
        let exact = d.eval(&Env::xy(x, y)).unwrap();
        // the bump has large higher derivatives, so compare against the step error scale
        let scale = 1.0 + exact.abs() + fd.abs();
        prop_assert!((exact - fd).abs() < 1e-4 * scale, "{src}: {exact} vs {fd}");
    }

    #[test]
    fn gauss_rule_is_exact_for_low_degree(coeffs in prop::collection::vec(-1.0..1.0f64, 16), a in -2.0..0.0f64, b in 0.1..2.0f64) {
        let spec = QuadratureSpec::new(8, 1, 1).unwrap();
        let p = |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let got = integrate_1d(p, a, b, &spec).unwrap();
        let exact: f64 = coeffs.iter().enumerate().map(|(k, c)| c * (b.powi(k as i32 + 1) - a.powi(k as i32 + 1)) / (k as f64 + 1.0)).sum();
        prop_assert!((got - exact).abs() < 1e-11 * (1.0 + exact.abs()), "{got} vs {exact}");
    }

    #[test]
    fn twists_preserve_area_and_fix_the_outside(
        cx in 0.35..0.65f64, cy in -0.1..0.1f64, ax in 0.1..0.3f64, ay in 0.1..0.3f64,
        amp in -0.05..0.05f64, px in 0.0..1.0f64, py in -0.5..0.5f64,
    ) {
        let tw = EllipticTwist { center: [cx, cy], axes: [ax, ay], amplitude: amp, time: 1.0 };
        let g = FlowDiffeo::twist(QuotientSurface::mobius(), tw).unwrap();
        let (q, d) = g.jet([px, py]);
        prop_assert!((d[0][0] * d[1][1] - d[0][1] * d[1][0] - 1.0).abs() < 1e-10);
        let inside = ((px - cx) / ax).powi(2) + ((py - cy) / ay).powi(2) < 1.0;
        if !inside {
            prop_assert_eq!(q, [px, py]);
        }
    }

    #[test]
    fn lift_composed_with_inverse_is_identity(shift in -0.5..0.5f64, c1 in -0.1..0.1f64, d1 in -0.1..0.1f64, x in 0.0..1.0f64) {
        let f = CircleLift::fourier(shift, &[(c1, d1)]).unwrap();
        let id = f.compose(&f.invert());
        prop_assert!((id.eval(x) - x).abs() < 1e-9);
    }

    #[test]
    fn rotation_translation_number(a in -2.0..2.0f64) {
        let r = translation_number(&CircleLift::rotation(a), 10_000);
        prop_assert!((r - a).abs() < 1e-9, "{r} vs {a}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn shear_flux_is_linear_in_time(t in -2.0..2.0f64, k in 0.6..1.4f64) {
        let m = QuotientSurface::mobius();
        let dx = FormField::one_form(m, Parity::Even, parse("1").unwrap(), parse("0").unwrap()).unwrap();
        let eta = standard_primitive(m);
        let spec = QuadratureSpec::new(8, 8, 16).unwrap();
        let b = parse(&format!("bump({k}*y)")).unwrap();
        let f = |t: f64| flux_lambda(&FlowDiffeo::shear(m, t, b.clone()).unwrap(), &dx, &eta, &spec).unwrap();
        let (ft, f1) = (f(t), f(1.0));
        prop_assert!((ft - t * f1).abs() < 1e-9, "{ft} vs {}", t * f1);
    }
}

//! The fixed plateau bump and its derivatives.
//!
//! `bump(y) = 1` for `|y| <= 1/8`, `0` for `|y| >= 1/4`, and in between the normalized
//! `exp(-1/s)` smooth step `S(u) = g(u) / (g(u) + g(1 - u))`, `g(s) = exp(-1/s)`, with
//! `u = 8 (1/4 - |y|)`. Derivatives of `S` come from truncated Taylor arithmetic, so every
//! order is exact up to round-off.

/// `∫ bump(y) dy` over the real line; the smooth step is antisymmetric about its midpoint,
/// so the transition contributes exactly half its width on each side.
pub const BUMP_INTEGRAL: f64 = 0.375;

const N: usize = super::MAX_BUMP_DERIVATIVE as usize + 1;

/// Taylor coefficients c_k = f^(k) / k!, truncated after `len` terms.
#[derive(Clone, Copy)]
struct Jet {
    c: [f64; N],
    len: usize,
}

impl Jet {
    fn variable(x: f64, len: usize) -> Jet {
        let mut c = [0.0; N];
        c[0] = x;
        if len > 1 {
            c[1] = 1.0;
        }
        Jet { c, len }
    }

    fn constant(x: f64, len: usize) -> Jet {
        let mut c = [0.0; N];
        c[0] = x;
        Jet { c, len }
    }

    fn scale(mut self, s: f64) -> Jet {
        for a in &mut self.c[..self.len] {
            *a *= s;
        }
        self
    }

    fn add(mut self, o: Jet) -> Jet {
        for k in 0..self.len {
            self.c[k] += o.c[k];
        }
        self
    }

    fn shift(mut self, s: f64) -> Jet {
        self.c[0] += s;
        self
    }

    fn div(self, o: Jet) -> Jet {
        let mut q = [0.0; N];
        for k in 0..self.len {
            let mut acc = self.c[k];
            for j in 0..k {
                acc -= q[j] * o.c[k - j];
            }
            q[k] = acc / o.c[0];
        }
        Jet { c: q, len: self.len }
    }

    fn recip(self) -> Jet {
        Jet::constant(1.0, self.len).div(self)
    }

    fn exp(self) -> Jet {
        // e' = e a'  =>  k e_k = sum_{j=1..k} j a_j e_{k-j}
        let mut e = [0.0; N];
        e[0] = self.c[0].exp();
        for k in 1..self.len {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.c[j] * e[k - j];
            }
            e[k] = acc / k as f64;
        }
        Jet { c: e, len: self.len }
    }
}

/// exp(-1/s) as a jet; caller guarantees s > 0.
fn flat(s: Jet) -> Jet {
    s.recip().scale(-1.0).exp()
}

/// n-th derivative of the smooth step S at u in (0, 1).
fn step_derivative(u: f64, n: u8) -> f64 {
    let x = Jet::variable(u, n as usize + 1);
    let a = flat(x);
    let b = flat(x.scale(-1.0).shift(1.0));
    let s = a.div(a.add(b));
    let mut fact = 1.0;
    for k in 1..=n {
        fact *= k as f64;
    }
    s.c[n as usize] * fact
}

fn step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        a / (a + b)
    }
}

pub fn bump(y: f64) -> f64 {
    step(8.0 * (0.25 - y.abs()))
}

/// n-th derivative of [`bump`]; `n = 0` is the bump itself.
pub fn bump_derivative(y: f64, n: u8) -> f64 {
    if n == 0 {
        return bump(y);
    }
    if n > super::MAX_BUMP_DERIVATIVE {
        return f64::NAN;
    }
    if y.is_nan() {
        return f64::NAN;
    }
    let a = y.abs();
    if a <= 0.125 || a >= 0.25 {
        return 0.0;
    }
    let u = 8.0 * (0.25 - a);
    // d/dy u = -8 sign(y)
    let chain = (-8.0 * y.signum()).powi(n as i32);
    chain * step_derivative(u, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::Rule1d;

    #[test]
    fn plateau_and_support() {
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(0.1), 1.0);
        assert_eq!(bump(-0.125), 1.0);
        assert_eq!(bump(0.25), 0.0);
        assert_eq!(bump(-0.3), 0.0);
        let v = bump(0.1875);
        assert!((v - 0.5).abs() < 1e-15, "midpoint value {v}");
    }

    #[test]
    fn even() {
        for i in 0..100 {
            let y = i as f64 * 0.003;
            assert_eq!(bump(y), bump(-y));
            assert_eq!(bump_derivative(y, 1), -bump_derivative(-y, 1));
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-4;
        for n in 0..4u8 {
            for &y in &[0.15, 0.1875, 0.2, 0.22, -0.17, -0.21] {
                let f = |z: f64| bump_derivative(z, n);
                // fourth-order central difference
                let fd = (8.0 * (f(y + h) - f(y - h)) - (f(y + 2.0 * h) - f(y - 2.0 * h))) / (12.0 * h);
                let an = bump_derivative(y, n + 1);
                let scale = an.abs().max(1.0);
                assert!((fd - an).abs() / scale < 1e-6, "n={n} y={y}: fd {fd} vs {an}");
            }
        }
    }

    #[test]
    fn steep_corner_matches_high_precision_values() {
        // 40-digit reference values of d^n/dy^n bump at y = 0.13
        let want = [(1, -1.971293871602363e-7), (2, -9.086487257000052e-4), (3, -3.809899895049074)];
        for (n, w) in want {
            let got = bump_derivative(0.13, n);
            assert!((got - w).abs() <= 1e-8 * w.abs(), "n={n}: {got} vs {w}");
        }
    }

    #[test]
    fn integral_constant() {
        let r = Rule1d::gauss(-0.25, 0.25, 8, 256);
        let v = r.integrate(bump).unwrap();
        assert!((v - BUMP_INTEGRAL).abs() < 1e-12, "{v}");
    }
}

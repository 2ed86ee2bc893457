use super::{BinOp, Expr, Func, Var};

pub(super) fn differentiate(e: &Expr, v: Var) -> Expr {
    match e {
        Expr::Num(_) | Expr::Pi => Expr::Num(0.0),
        Expr::Var(u) => Expr::Num(if *u == v { 1.0 } else { 0.0 }),
        Expr::Neg(a) => -differentiate(a, v),
        Expr::Binary(op, a, b) => {
            let (a, b) = (a.as_ref(), b.as_ref());
            match op {
                BinOp::Add => differentiate(a, v) + differentiate(b, v),
                BinOp::Sub => differentiate(a, v) - differentiate(b, v),
                BinOp::Mul => differentiate(a, v) * b.clone() + a.clone() * differentiate(b, v),
                BinOp::Div => {
                    let da = differentiate(a, v);
                    if !b.depends_on(v) {
                        return da / b.clone();
                    }
                    let db = differentiate(b, v);
                    (da * b.clone() - a.clone() * db) / b.clone().pow(Expr::Num(2.0))
                }
                BinOp::Pow => {
                    let da = differentiate(a, v);
                    if !b.depends_on(v) {
                        // b a^(b-1) a'
                        let reduced = match b.as_const() {
                            Some(c) => Expr::Num(c - 1.0),
                            None => b.clone() - 1.0,
                        };
                        return b.clone() * a.clone().pow(reduced) * da;
                    }
                    let db = differentiate(b, v);
                    let log_a = Expr::call(Func::Log, a.clone());
                    // a^b (b' log a + b a' / a)
                    e.clone() * (db * log_a + b.clone() * da / a.clone())
                }
            }
        }
        Expr::Call(f, a) => {
            let da = differentiate(a, v);
            if let Expr::Num(z) = da {
                if z == 0.0 {
                    return Expr::Num(0.0);
                }
            }
            let inner = a.as_ref().clone();
            let outer = match f {
                Func::Sin => Expr::call(Func::Cos, inner),
                Func::Cos => -Expr::call(Func::Sin, inner),
                Func::Exp => e.clone(),
                Func::Log => Expr::Num(1.0) / inner,
                Func::Bump(n) => Expr::call(Func::Bump(n + 1), inner),
            };
            outer * da
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, Env};
    use super::*;

    fn d(src: &str, v: Var) -> Expr {
        parse(src).unwrap().derivative(v)
    }

    #[test]
    fn square() {
        let e = d("x^2", Var::X);
        for x in [-1.5, 0.0, 0.3, 2.0] {
            assert_eq!(e.eval(&Env::xy(x, 0.0)).unwrap(), 2.0 * x);
        }
    }

    #[test]
    fn trig_chain() {
        let e = d("sin(2*pi*theta)", Var::Theta);
        for th in [0.0, 0.1, 0.37] {
            let got = e.eval(&Env::theta(th, 0.0)).unwrap();
            let want = 2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * th).cos();
            assert!((got - want).abs() < 1e-13);
        }
    }

    #[test]
    fn bump_goes_to_dbump() {
        let e = d("bump(y)", Var::Y);
        assert_eq!(e.to_string(), "dbump(y)");
        let y = 3.0 / 16.0;
        let h = 1e-5;
        let b = parse("bump(y)").unwrap();
        let fd = (b.xy(0.0, y + h) - b.xy(0.0, y - h)) / (2.0 * h);
        assert!((e.xy(0.0, y) - fd).abs() < 1e-6);
    }

    #[test]
    fn independent_variable_is_zero() {
        assert_eq!(d("sin(x) * exp(x)", Var::Y), Expr::Num(0.0));
    }

    #[test]
    fn variable_exponent() {
        let e = d("x^x", Var::X);
        let x: f64 = 1.7;
        let want = x.powf(x) * (x.ln() + 1.0);
        assert!((e.xy(x, 0.0) - want).abs() < 1e-12);
    }
}

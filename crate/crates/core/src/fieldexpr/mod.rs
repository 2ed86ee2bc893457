//! Scalar field expressions: parsing, evaluation, exact partial derivatives and pretty-printing.
//!
//! The grammar is the usual infix one (`+ - * / ^`, unary minus, parentheses) over real
//! literals, the constant `pi`, a declared set of variables and the functions
//! `sin cos exp log bump dbump d2bump ... d10bump`. There is no implicit multiplication.

mod bump;
mod compile;
mod diff;
mod parse;
mod print;

use std::fmt;

use thiserror::Error;

pub use bump::{bump, bump_derivative, BUMP_INTEGRAL};
pub use compile::{CompiledBundle, CompiledExpr};
pub use parse::{parse, parse_with};

/// Highest bump derivative representable as a named function (`d10bump`).
pub const MAX_BUMP_DERIVATIVE: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X,
    Y,
    T,
    Theta,
    /// Collar coordinate used by boundary cutoff profiles.
    S,
}

impl Var {
    pub const ALL: [Var; 5] = [Var::X, Var::Y, Var::T, Var::Theta, Var::S];

    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::T => "t",
            Var::Theta => "theta",
            Var::S => "s",
        }
    }

    pub fn from_name(name: &str) -> Option<Var> {
        Var::ALL.into_iter().find(|v| v.name() == name)
    }

    pub(crate) fn slot(self) -> usize {
        self as usize
    }
}

/// The default variable set for surface and circle fields.
pub const FIELD_VARS: &[Var] = &[Var::X, Var::Y, Var::T, Var::Theta];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    /// `n`-th derivative of the plateau bump; `Bump(0)` is `bump` itself.
    Bump(u8),
}

impl Func {
    pub fn name(self) -> String {
        match self {
            Func::Sin => "sin".into(),
            Func::Cos => "cos".into(),
            Func::Exp => "exp".into(),
            Func::Log => "log".into(),
            Func::Bump(0) => "bump".into(),
            Func::Bump(1) => "dbump".into(),
            Func::Bump(n) => format!("d{n}bump"),
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "bump" => Some(Func::Bump(0)),
            "dbump" => Some(Func::Bump(1)),
            _ => {
                let n: u8 = name.strip_prefix('d')?.strip_suffix("bump")?.parse().ok()?;
                (2..=MAX_BUMP_DERIVATIVE).contains(&n).then_some(Func::Bump(n))
            }
        }
    }

    pub fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Bump(n) => bump_derivative(v, n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("expression `{expr}` is not finite at {point}: {value}")]
    Domain { expr: String, point: String, value: f64 },
}

/// Variable assignment, indexed by [`Var`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Env(pub [f64; 5]);

impl Env {
    pub fn xy(x: f64, y: f64) -> Self {
        Env([x, y, 0.0, 0.0, 0.0])
    }

    pub fn xyt(x: f64, y: f64, t: f64) -> Self {
        Env([x, y, t, 0.0, 0.0])
    }

    pub fn theta(theta: f64, t: f64) -> Self {
        Env([0.0, 0.0, t, theta, 0.0])
    }

    pub fn with(mut self, v: Var, value: f64) -> Self {
        self.0[v.slot()] = value;
        self
    }

    pub fn get(&self, v: Var) -> f64 {
        self.0[v.slot()]
    }
}

impl fmt::Display for Env {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            Var::ALL.iter().map(|v| format!("{}={}", v.name(), self.get(*v))).collect();
        write!(f, "({})", parts.join(", "))
    }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        if let Some(c) = arg.as_const() {
            return Expr::Num(f.apply(c));
        }
        Expr::Call(f, Box::new(arg))
    }

    /// Numeric value if the expression has no variables.
    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Pi => Some(std::f64::consts::PI),
            Expr::Var(_) => None,
            Expr::Neg(a) => a.as_const().map(|v| -v),
            Expr::Binary(op, a, b) => Some(apply_bin(*op, a.as_const()?, b.as_const()?)),
            Expr::Call(f, a) => a.as_const().map(|v| f.apply(v)),
        }
    }

    fn is_num(&self, v: f64) -> bool {
        matches!(self, Expr::Num(c) if *c == v)
    }

    /// Tree recursion with a finiteness check on the result.
    pub fn eval(&self, env: &Env) -> Result<f64, EvalError> {
        let v = self.eval_raw(env);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::Domain { expr: self.to_string(), point: env.to_string(), value: v })
        }
    }

    pub fn eval_raw(&self, env: &Env) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(v) => env.get(*v),
            Expr::Neg(a) => -a.eval_raw(env),
            Expr::Binary(op, a, b) => apply_bin(*op, a.eval_raw(env), b.eval_raw(env)),
            Expr::Call(f, a) => f.apply(a.eval_raw(env)),
        }
    }

    pub fn xy(&self, x: f64, y: f64) -> f64 {
        self.eval_raw(&Env::xy(x, y))
    }

    /// Variables occurring in the expression, sorted and deduplicated.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Expr::Var(v) => out.push(*v),
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Num(_) | Expr::Pi => {}
        }
    }

    pub fn depends_on(&self, v: Var) -> bool {
        self.variables().contains(&v)
    }

    /// Replace every occurrence of `v` by `with`.
    pub fn substitute(&self, v: Var, with: &Expr) -> Expr {
        match self {
            Expr::Var(u) if *u == v => with.clone(),
            Expr::Num(_) | Expr::Pi | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => -a.substitute(v, with),
            Expr::Binary(op, a, b) => {
                Expr::binary(*op, a.substitute(v, with), b.substitute(v, with))
            }
            Expr::Call(f, a) => Expr::call(*f, a.substitute(v, with)),
        }
    }

    pub fn derivative(&self, v: Var) -> Expr {
        diff::differentiate(self, v)
    }

    pub fn compile(&self) -> CompiledExpr {
        CompiledExpr::new(self)
    }

    pub fn pow(self, e: Expr) -> Expr {
        Expr::binary(BinOp::Pow, self, e)
    }

    /// Binary node with light constant folding (identities for 0 and 1 only).
    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            if matches!((&a, &b), (Expr::Num(_), Expr::Num(_))) {
                return Expr::Num(apply_bin(op, x, y));
            }
        }
        match op {
            BinOp::Add if a.is_num(0.0) => b,
            BinOp::Add | BinOp::Sub if b.is_num(0.0) => a,
            BinOp::Sub if a.is_num(0.0) => -b,
            BinOp::Mul if a.is_num(0.0) || b.is_num(0.0) => Expr::Num(0.0),
            BinOp::Mul if a.is_num(1.0) => b,
            BinOp::Mul | BinOp::Div if b.is_num(1.0) => a,
            BinOp::Div if a.is_num(0.0) => Expr::Num(0.0),
            BinOp::Pow if b.is_num(1.0) => a,
            BinOp::Pow if b.is_num(0.0) => Expr::Num(1.0),
            _ => Expr::Binary(op, Box::new(a), Box::new(b)),
        }
    }
}

pub(crate) fn apply_bin(op: BinOp, a: f64, b: f64) -> f64 {
    match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => a / b,
        BinOp::Pow => power(a, b),
    }
}

pub(crate) fn power(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() < 1024.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(-v),
            Expr::Neg(a) => *a,
            other => Expr::Neg(Box::new(other)),
        }
    }
}

macro_rules! impl_op {
    ($tr:ident, $method:ident, $op:expr) => {
        impl std::ops::$tr for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, self, rhs)
            }
        }
        impl std::ops::$tr<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::binary($op, self, Expr::Num(rhs))
            }
        }
        impl std::ops::$tr<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, Expr::Num(self), rhs)
            }
        }
    };
}

impl_op!(Add, add, BinOp::Add);
impl_op!(Sub, sub, BinOp::Sub);
impl_op!(Mul, mul, BinOp::Mul);
impl_op!(Div, div, BinOp::Div);

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: found {found}, expected one of {}", expected.join(", "))]
    Syntax { offset: usize, found: String, expected: Vec<String> },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("invalid number `{text}` at byte {offset}")]
    Number { offset: usize, text: String },
}

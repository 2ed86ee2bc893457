use std::collections::HashMap;

use super::{apply_bin, BinOp, Env, Expr, Func};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Push(f64),
    Load(usize),
    Neg,
    Bin(BinOp),
    Call(Func),
}

const INLINE_STACK: usize = 32;

/// Postfix form of an [`Expr`] for hot evaluation loops. Produces the same value as
/// [`Expr::eval_raw`] bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledExpr {
    ops: Vec<Op>,
    depth: usize,
    constant: Option<f64>,
}

impl CompiledExpr {
    pub fn new(e: &Expr) -> Self {
        let mut ops = Vec::new();
        let depth = emit(e, &mut ops);
        let constant = match ops.as_slice() {
            [Op::Push(v)] => Some(*v),
            _ => None,
        };
        CompiledExpr { ops, depth, constant }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == Some(0.0)
    }

    #[inline]
    pub fn eval(&self, env: &Env) -> f64 {
        if let Some(c) = self.constant {
            return c;
        }
        if self.depth <= INLINE_STACK {
            let mut stack = [0.0f64; INLINE_STACK];
            run(&self.ops, env, &mut stack)
        } else {
            let mut stack = vec![0.0f64; self.depth];
            run(&self.ops, env, &mut stack)
        }
    }

    pub fn xy(&self, x: f64, y: f64) -> f64 {
        self.eval(&Env::xy(x, y))
    }
}

#[inline]
fn run(ops: &[Op], env: &Env, stack: &mut [f64]) -> f64 {
    let mut sp = 0;
    for op in ops {
        match *op {
            Op::Push(v) => {
                stack[sp] = v;
                sp += 1;
            }
            Op::Load(slot) => {
                stack[sp] = env.0[slot];
                sp += 1;
            }
            Op::Neg => stack[sp - 1] = -stack[sp - 1],
            Op::Bin(b) => {
                sp -= 1;
                stack[sp - 1] = apply_bin(b, stack[sp - 1], stack[sp]);
            }
            Op::Call(f) => stack[sp - 1] = f.apply(stack[sp - 1]),
        }
    }
    stack[0]
}

/// Emits postfix code, returns the stack depth needed.
fn emit(e: &Expr, ops: &mut Vec<Op>) -> usize {
    if let Some(c) = e.as_const() {
        ops.push(Op::Push(c));
        return 1;
    }
    match e {
        Expr::Num(v) => {
            ops.push(Op::Push(*v));
            1
        }
        Expr::Pi => {
            ops.push(Op::Push(std::f64::consts::PI));
            1
        }
        Expr::Var(v) => {
            ops.push(Op::Load(v.slot()));
            1
        }
        Expr::Neg(a) => {
            let d = emit(a, ops);
            ops.push(Op::Neg);
            d
        }
        Expr::Call(f, a) => {
            let d = emit(a, ops);
            ops.push(Op::Call(*f));
            d
        }
        Expr::Binary(op, a, b) => {
            let da = emit(a, ops);
            let db = emit(b, ops);
            ops.push(Op::Bin(*op));
            da.max(db + 1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Node {
    Const(u64),
    Load(usize),
    Neg(usize),
    Bin(BinOp, usize, usize),
    Call(Func, usize),
}

/// Several expressions compiled together so that identical subtrees are evaluated once.
/// Each output matches [`Expr::eval_raw`] bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledBundle {
    nodes: Vec<Node>,
    outputs: Vec<usize>,
}

impl CompiledBundle {
    pub fn new(exprs: &[&Expr]) -> Self {
        let mut b = BundleBuilder { nodes: Vec::new(), index: HashMap::new() };
        let outputs = exprs.iter().map(|e| b.intern(e)).collect();
        CompiledBundle { nodes: b.nodes, outputs }
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// Number of distinct subexpressions.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Writes the outputs into `out`, which must have length [`len`](Self::len).
    pub fn eval_into(&self, env: &Env, scratch: &mut Vec<f64>, out: &mut [f64]) {
        scratch.clear();
        scratch.reserve(self.nodes.len());
        for n in &self.nodes {
            let v = match *n {
                Node::Const(bits) => f64::from_bits(bits),
                Node::Load(slot) => env.0[slot],
                Node::Neg(a) => -scratch[a],
                Node::Bin(op, a, b) => apply_bin(op, scratch[a], scratch[b]),
                Node::Call(f, a) => f.apply(scratch[a]),
            };
            scratch.push(v);
        }
        for (o, &i) in out.iter_mut().zip(&self.outputs) {
            *o = scratch[i];
        }
    }

    pub fn eval(&self, env: &Env) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs.len()];
        self.eval_into(env, &mut Vec::new(), &mut out);
        out
    }
}

struct BundleBuilder {
    nodes: Vec<Node>,
    index: HashMap<Node, usize>,
}

impl BundleBuilder {
    fn push(&mut self, n: Node) -> usize {
        if let Some(&i) = self.index.get(&n) {
            return i;
        }
        self.nodes.push(n);
        self.index.insert(n, self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    fn intern(&mut self, e: &Expr) -> usize {
        if let Some(c) = e.as_const() {
            return self.push(Node::Const(c.to_bits()));
        }
        let n = match e {
            Expr::Num(_) | Expr::Pi => unreachable!("constants are folded above"),
            Expr::Var(v) => Node::Load(v.slot()),
            Expr::Neg(a) => Node::Neg(self.intern(a)),
            Expr::Call(f, a) => Node::Call(*f, self.intern(a)),
            Expr::Binary(op, a, b) => {
                let (a, b) = (self.intern(a), self.intern(b));
                Node::Bin(*op, a, b)
            }
        };
        self.push(n)
    }
}

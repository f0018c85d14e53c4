//! A small calculator language for declaring connections, guards, resets,
//! potentials and curves as data.
//!
//! Grammar (lowest to highest precedence): `+ -` (left), `* /` (left),
//! unary `-`, `^` (right). Functions: `sin cos tan exp log sqrt abs`.
//! The identifier `pi` is the constant π. Angles are radians.

mod diff;
mod parse;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }

    fn apply(self, a: f64, b: f64) -> Result<f64> {
        match self {
            BinOp::Add => Ok(a + b),
            BinOp::Sub => Ok(a - b),
            BinOp::Mul => Ok(a * b),
            BinOp::Div => {
                if b == 0.0 {
                    Err(Error::Domain(format!("division by zero ({a} / 0)")))
                } else {
                    Ok(a / b)
                }
            }
            BinOp::Pow => {
                let v = a.powf(b);
                if v.is_nan() && !a.is_nan() && !b.is_nan() {
                    Err(Error::Domain(format!("{a} ^ {b} is undefined")))
                } else {
                    Ok(v)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, x: f64) -> Result<f64> {
        match self {
            Func::Sin => Ok(x.sin()),
            Func::Cos => Ok(x.cos()),
            Func::Tan => Ok(x.tan()),
            Func::Exp => Ok(x.exp()),
            Func::Log => {
                if x <= 0.0 {
                    Err(Error::Domain(format!("log of non-positive argument {x}")))
                } else {
                    Ok(x.ln())
                }
            }
            Func::Sqrt => {
                if x < 0.0 {
                    Err(Error::Domain(format!("sqrt of negative argument {x}")))
                } else {
                    Ok(x.sqrt())
                }
            }
            Func::Abs => Ok(x.abs()),
        }
    }
}

/// Abstract syntax tree of a scalar expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Variable name to value. Angles are radians.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings(HashMap<String, f64>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: f64) -> Self {
        self.0.insert(name.into(), value);
        self
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        self.0.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for Bindings {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        Bindings(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

pub fn parse(source: &str) -> Result<Expr> {
    parse::parse(source)
}

impl FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse(s)
    }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    pub fn evaluate(&self, b: &Bindings) -> Result<f64> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(name) => b
                .get(name)
                .ok_or_else(|| Error::UnboundVariable(name.clone())),
            Expr::Neg(e) => Ok(-e.evaluate(b)?),
            Expr::Binary(op, l, r) => op.apply(l.evaluate(b)?, r.evaluate(b)?),
            Expr::Call(f, arg) => f.apply(arg.evaluate(b)?),
        }
    }

    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(n) => {
                out.insert(n.clone());
            }
            Expr::Neg(e) | Expr::Call(_, e) => e.collect_vars(out),
            Expr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    /// Replaces every occurrence of a mapped variable by its expression.
    pub fn substitute(&self, map: &HashMap<String, Expr>) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Var(n) => map.get(n).cloned().unwrap_or_else(|| Expr::Var(n.clone())),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(map))),
            Expr::Binary(op, l, r) => Expr::Binary(
                *op,
                Box::new(l.substitute(map)),
                Box::new(r.substitute(map)),
            ),
            Expr::Call(f, e) => Expr::Call(*f, Box::new(e.substitute(map))),
        }
    }

    /// Resolves variables against an ordered slot list for fast repeated evaluation.
    pub fn compile(&self, slots: &[&str]) -> Result<CompiledExpr> {
        Ok(CompiledExpr {
            root: self.lower(slots)?,
        })
    }

    fn lower(&self, slots: &[&str]) -> Result<Node> {
        Ok(match self {
            Expr::Num(v) => Node::Num(*v),
            Expr::Var(n) => Node::Var(
                slots
                    .iter()
                    .position(|s| s == n)
                    .ok_or_else(|| Error::UnboundVariable(n.clone()))?,
            ),
            Expr::Neg(e) => Node::Neg(Box::new(e.lower(slots)?)),
            Expr::Binary(op, l, r) => {
                Node::Binary(*op, Box::new(l.lower(slots)?), Box::new(r.lower(slots)?))
            }
            Expr::Call(f, e) => Node::Call(*f, Box::new(e.lower(slots)?)),
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if v.is_infinite() {
                    let s = if *v > 0.0 { "1e999" } else { "(-1e999)" };
                    f.write_str(s)
                } else if v.is_sign_negative() {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var(n) => f.write_str(n),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            Node::Num(v) => Ok(*v),
            Node::Var(i) => Ok(x[*i]),
            Node::Neg(e) => Ok(-e.eval(x)?),
            Node::Binary(op, l, r) => op.apply(l.eval(x)?, r.eval(x)?),
            Node::Call(f, e) => f.apply(e.eval(x)?),
        }
    }
}

/// An expression whose variables are resolved to positions in a value slice.
///
/// Evaluation performs the same floating-point operations in the same order
/// as [`Expr::evaluate`], so both routes agree bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledExpr {
    root: Node,
}

impl CompiledExpr {
    pub fn constant(v: f64) -> Self {
        CompiledExpr { root: Node::Num(v) }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.root.eval(x)
    }

    /// Central-difference partial derivative with respect to slot `i`.
    pub fn partial(&self, x: &[f64], i: usize, h: Option<f64>) -> Result<f64> {
        let h = h.unwrap_or_else(|| default_step(x[i]));
        let mut probe = x.to_vec();
        probe[i] = x[i] + h;
        let up = self.eval(&probe)?;
        probe[i] = x[i] - h;
        let down = self.eval(&probe)?;
        Ok((up - down) / (2.0 * h))
    }
}

fn default_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

/// Central difference `(e(x+h) - e(x-h)) / 2h` in variable `var`.
/// The default step is `1e-6 * max(1, |x|)`.
pub fn numeric_partial(e: &Expr, var: &str, b: &Bindings, h: Option<f64>) -> Result<f64> {
    let x = b
        .get(var)
        .ok_or_else(|| Error::UnboundVariable(var.to_string()))?;
    let h = h.unwrap_or_else(|| default_step(x));
    let mut probe = b.clone();
    probe.set(var, x + h);
    let up = e.evaluate(&probe)?;
    probe.set(var, x - h);
    let down = e.evaluate(&probe)?;
    Ok((up - down) / (2.0 * h))
}

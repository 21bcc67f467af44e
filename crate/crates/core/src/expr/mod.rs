//! Integrand expressions in the variables `t`, `x` and `v`.
//!
//! In a delta integrand `x` stands for `y^sigma(t)` and `v` for `y^Delta(t)`;
//! in a nabla integrand they stand for `y^rho(t)` and `y^nabla(t)`.
//! Expressions are parsed from text, printed back in a fully parenthesized
//! canonical form, evaluated either exactly or in floating point, and
//! differentiated symbolically.

mod diff;
mod float;
mod parse;

use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::number::{format_decimal, gcd_free_denominator_ok, Number, Rational, Scalar};

pub use float::FloatExpr;
pub use parse::parse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    T,
    X,
    V,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
            Var::V => "v",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Rational),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

// folding constructors, deliberately not operator traits
#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn constant(r: Rational) -> Self {
        Expr::Const(r)
    }

    pub fn zero() -> Self {
        Expr::Const(Rational::zero())
    }

    pub fn one() -> Self {
        Expr::Const(Rational::one())
    }

    pub fn var(v: Var) -> Self {
        Expr::Var(v)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_zero())
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_one())
    }

    pub fn as_const(&self) -> Option<&Rational> {
        match self {
            Expr::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Value of a variable-free, function-free subtree.
    pub fn constant_value(&self) -> Option<Rational> {
        if !self.is_rational_closed() || Var::ALL.iter().any(|&v| self.contains(v)) {
            return None;
        }
        let z = Rational::zero();
        self.eval(&z, &z, &z).ok()
    }

    pub fn contains(&self, var: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.contains(var),
            Expr::Binary(_, a, b) => a.contains(var) || b.contains(var),
        }
    }

    /// No transcendental functions and only integer constant exponents, so
    /// evaluation on rationals stays rational.
    pub fn is_rational_closed(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => true,
            Expr::Call(..) => false,
            Expr::Neg(a) => a.is_rational_closed(),
            Expr::Binary(BinOp::Pow, a, b) => {
                a.is_rational_closed()
                    && !Var::ALL.iter().any(|&v| b.contains(v))
                    && b.is_rational_closed()
                    && b.constant_value().is_some_and(|c| c.is_integer())
            }
            Expr::Binary(_, a, b) => a.is_rational_closed() && b.is_rational_closed(),
        }
    }

    pub fn eval<S: Scalar>(&self, t: &S, x: &S, v: &S) -> Result<S> {
        Ok(match self {
            Expr::Const(c) => S::from_rational(c),
            Expr::Var(Var::T) => t.clone(),
            Expr::Var(Var::X) => x.clone(),
            Expr::Var(Var::V) => v.clone(),
            Expr::Neg(a) => -a.eval(t, x, v)?,
            Expr::Binary(op, a, b) => {
                let a = a.eval(t, x, v)?;
                let b = b.eval(t, x, v)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a.checked_div(&b)?,
                    BinOp::Pow => a.pow(&b)?,
                }
            }
            Expr::Call(f, a) => {
                let a = a.eval(t, x, v)?;
                match f {
                    Func::Sin => a.sin()?,
                    Func::Cos => a.cos()?,
                    Func::Exp => a.exp()?,
                    Func::Log => a.ln()?,
                }
            }
        })
    }

    pub fn eval_f64(&self, t: f64, x: f64, v: f64) -> Result<f64> {
        self.eval(&t, &x, &v)
    }

    pub fn differentiate(&self, var: Var) -> Expr {
        diff::differentiate(self, var)
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
            _ if a.is_zero() => b,
            _ if b.is_zero() => a,
            _ => Expr::Binary(BinOp::Add, Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
            _ if b.is_zero() => a,
            _ if a.is_zero() => Expr::neg(b),
            _ => Expr::Binary(BinOp::Sub, Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
            _ if a.is_zero() || b.is_zero() => Expr::zero(),
            _ if a.is_one() => b,
            _ if b.is_one() => a,
            _ => Expr::Binary(BinOp::Mul, Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) if !y.is_zero() => Expr::Const(x / y),
            _ if b.is_one() => a,
            _ => Expr::Binary(BinOp::Div, Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        if b.is_one() {
            return a;
        }
        if let (Expr::Const(x), Expr::Const(y)) = (&a, &b) {
            if let Ok(r) = Scalar::pow(x, y) {
                return Expr::Const(r);
            }
        }
        Expr::Binary(BinOp::Pow, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    /// `c * self`, folded.
    pub fn scaled(self, c: &Rational) -> Expr {
        Expr::mul(Expr::Const(c.clone()), self)
    }
}

impl Var {
    pub const ALL: [Var; 3] = [Var::T, Var::X, Var::V];
}

/// Canonical, fully parenthesized text that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.is_integer() && !c.is_negative() {
                    write!(f, "{}", c.numer())
                } else if gcd_free_denominator_ok(c) && !c.is_negative() {
                    f.write_str(&format_decimal(c))
                } else if c.is_integer() {
                    write!(f, "({})", c.numer())
                } else {
                    write!(f, "({}/{})", c.numer(), c.denom())
                }
            }
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// Evaluates `e` exactly when every input is exact and `e` is rational-closed,
/// in floating point otherwise.
pub fn evaluate(e: &Expr, t: &Number, x: &Number, v: &Number) -> Result<Number> {
    match (t, x, v) {
        (Number::Exact(t), Number::Exact(x), Number::Exact(v)) if e.is_rational_closed() => {
            e.eval(t, x, v).map(Number::Exact)
        }
        _ => {
            let r = e.eval(&t.to_f64(), &x.to_f64(), &v.to_f64())?;
            if r.is_finite() {
                Ok(Number::Float(r))
            } else {
                Err(Error::eval("non-finite result"))
            }
        }
    }
}

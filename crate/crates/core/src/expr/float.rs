//! Expressions lowered to `f64` constants for hot numeric loops.

use crate::error::Result;
use crate::number::Scalar;

use super::{BinOp, Expr, Func, Var};

#[derive(Debug, Clone, PartialEq)]
pub enum FloatExpr {
    Const(f64),
    Var(Var),
    Neg(Box<FloatExpr>),
    Binary(BinOp, Box<FloatExpr>, Box<FloatExpr>),
    Call(Func, Box<FloatExpr>),
}

impl From<&Expr> for FloatExpr {
    fn from(e: &Expr) -> Self {
        match e {
            Expr::Const(c) => FloatExpr::Const(c.as_f64()),
            Expr::Var(v) => FloatExpr::Var(*v),
            Expr::Neg(a) => FloatExpr::Neg(Box::new(a.as_ref().into())),
            Expr::Binary(op, a, b) => FloatExpr::Binary(*op, Box::new(a.as_ref().into()), Box::new(b.as_ref().into())),
            Expr::Call(f, a) => FloatExpr::Call(*f, Box::new(a.as_ref().into())),
        }
    }
}

impl FloatExpr {
    /// Same semantics as [`Expr::eval_f64`].
    pub fn eval(&self, t: f64, x: f64, v: f64) -> Result<f64> {
        Ok(match self {
            FloatExpr::Const(c) => *c,
            FloatExpr::Var(Var::T) => t,
            FloatExpr::Var(Var::X) => x,
            FloatExpr::Var(Var::V) => v,
            FloatExpr::Neg(a) => -a.eval(t, x, v)?,
            FloatExpr::Binary(op, a, b) => {
                let a = a.eval(t, x, v)?;
                let b = b.eval(t, x, v)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a.checked_div(&b)?,
                    BinOp::Pow => Scalar::pow(&a, &b)?,
                }
            }
            FloatExpr::Call(f, a) => {
                let a = a.eval(t, x, v)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => Scalar::exp(&a)?,
                    Func::Log => Scalar::ln(&a)?,
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn agrees_with_generic_evaluation() {
        for src in ["t * v^2", "(x - 3)^2 / (1 + v^2)", "exp(x) * sin(t) - log(2 + v^2)", "x^-2 + 1/3 * v"] {
            let e = parse(src).unwrap();
            let f = FloatExpr::from(&e);
            for (t, x, v) in [(1.0, 0.5, -2.0), (3.0, 2.0, 0.25)] {
                assert_eq!(f.eval(t, x, v).unwrap(), e.eval_f64(t, x, v).unwrap(), "{src}");
            }
        }
        assert!(FloatExpr::from(&parse("x / v").unwrap()).eval(0.0, 1.0, 0.0).is_err());
    }
}

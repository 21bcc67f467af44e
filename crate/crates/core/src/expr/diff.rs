use super::{BinOp, Expr, Func, Var};

pub(super) fn differentiate(e: &Expr, var: Var) -> Expr {
    if !e.contains(var) {
        return Expr::zero();
    }
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Var(v) => {
            if *v == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Neg(a) => Expr::neg(differentiate(a, var)),
        Expr::Binary(op, a, b) => {
            let (a, b) = (a.as_ref(), b.as_ref());
            match op {
                BinOp::Add => Expr::add(differentiate(a, var), differentiate(b, var)),
                BinOp::Sub => Expr::sub(differentiate(a, var), differentiate(b, var)),
                BinOp::Mul => Expr::add(
                    Expr::mul(differentiate(a, var), b.clone()),
                    Expr::mul(a.clone(), differentiate(b, var)),
                ),
                BinOp::Div => Expr::div(
                    Expr::sub(
                        Expr::mul(differentiate(a, var), b.clone()),
                        Expr::mul(a.clone(), differentiate(b, var)),
                    ),
                    Expr::pow(b.clone(), Expr::Const(crate::number::int(2))),
                ),
                BinOp::Pow if !b.contains(var) => {
                    // d(a^c) = c a^(c-1) a'
                    let lowered = match b.constant_value() {
                        Some(c) => Expr::Const(c - crate::number::int(1)),
                        None => Expr::sub(b.clone(), Expr::one()),
                    };
                    Expr::mul(
                        Expr::mul(reduce(b), Expr::pow(a.clone(), lowered)),
                        differentiate(a, var),
                    )
                }
                BinOp::Pow => {
                    // d(a^b) = a^b (b' log a + b a' / a)
                    Expr::mul(
                        e.clone(),
                        Expr::add(
                            Expr::mul(differentiate(b, var), Expr::call(Func::Log, a.clone())),
                            Expr::div(Expr::mul(b.clone(), differentiate(a, var)), a.clone()),
                        ),
                    )
                }
            }
        }
        Expr::Call(f, a) => {
            let da = differentiate(a, var);
            let a = a.as_ref().clone();
            let outer = match f {
                Func::Sin => Expr::call(Func::Cos, a),
                Func::Cos => Expr::neg(Expr::call(Func::Sin, a)),
                Func::Exp => Expr::call(Func::Exp, a),
                Func::Log => return Expr::div(da, a),
            };
            Expr::mul(outer, da)
        }
    }
}

/// Folds a constant subtree into a single literal when possible.
fn reduce(e: &Expr) -> Expr {
    e.constant_value().map(Expr::Const).unwrap_or_else(|| e.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn d(src: &str, var: Var) -> Expr {
        parse(src).unwrap().differentiate(var)
    }

    #[test]
    fn worked_partials() {
        let dv = d("t * v^2", Var::V);
        assert_eq!(dv.to_string(), "(t * (2 * v))");
        assert_eq!(dv.eval_f64(3.0, 0.0, 0.5).unwrap(), 3.0);
        assert_eq!(d("t * v^2", Var::X), Expr::zero());
        let dx = d("(x - 3)^2", Var::X);
        assert_eq!(dx.to_string(), "(2 * (x - 3))");
    }

    #[test]
    fn absent_variable_gives_zero() {
        assert_eq!(d("sin(t) * exp(v)", Var::X), Expr::zero());
        assert_eq!(d("x^2 / (1 + v^2)", Var::T), Expr::zero());
    }

    #[test]
    fn chain_rule_and_quotients() {
        let e = d("log(1 + x^2)", Var::X);
        assert!((e.eval_f64(0.0, 2.0, 0.0).unwrap() - 0.8).abs() < 1e-15);
        let e = d("x / v", Var::V);
        assert!((e.eval_f64(0.0, 3.0, 2.0).unwrap() + 0.75).abs() < 1e-15);
        let e = d("x^v", Var::V);
        assert!((e.eval_f64(0.0, 2.0, 3.0).unwrap() - 8.0 * 2f64.ln()).abs() < 1e-12);
        let e = d("cos(x*v)", Var::X);
        assert!((e.eval_f64(0.0, 1.0, 2.0).unwrap() + 2.0 * 2f64.sin()).abs() < 1e-12);
        let e = d("x^-2", Var::X);
        assert!((e.eval_f64(0.0, 2.0, 0.0).unwrap() + 0.25).abs() < 1e-15);
    }
}

use super::{BinOp, Expr, Func};

impl Expr {
    /// Symbolic derivative with respect to `var`, lightly simplified.
    pub fn derivative(&self, var: &str) -> Expr {
        match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Var(v) => Expr::Num(if v == var { 1.0 } else { 0.0 }),
            Expr::Neg(e) => neg(e.derivative(var)),
            Expr::Binary(op, a, b) => {
                let (da, db) = (a.derivative(var), b.derivative(var));
                let (a, b) = (a.as_ref().clone(), b.as_ref().clone());
                match op {
                    BinOp::Add => add(da, db),
                    BinOp::Sub => sub(da, db),
                    BinOp::Mul => add(mul(da, b.clone()), mul(a, db)),
                    BinOp::Div => div(sub(mul(da, b.clone()), mul(a, db)), pow(b, Expr::Num(2.0))),
                    BinOp::Pow => {
                        if is_zero(&db) {
                            let lowered = match b.clone() {
                                Expr::Num(k) => Expr::Num(k - 1.0),
                                other => sub(other, Expr::Num(1.0)),
                            };
                            mul(mul(b, pow(a, lowered)), da)
                        } else {
                            let whole = pow(a.clone(), b.clone());
                            let rate = add(
                                mul(db, Expr::call(Func::Log, a.clone())),
                                div(mul(b, da), a),
                            );
                            mul(whole, rate)
                        }
                    }
                }
            }
            Expr::Call(f, e) => {
                let du = e.derivative(var);
                if is_zero(&du) {
                    return Expr::Num(0.0);
                }
                let u = e.as_ref().clone();
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, u),
                    Func::Cos => neg(Expr::call(Func::Sin, u)),
                    Func::Tan => div(
                        Expr::Num(1.0),
                        pow(Expr::call(Func::Cos, u), Expr::Num(2.0)),
                    ),
                    Func::Exp => Expr::call(Func::Exp, u),
                    Func::Log => div(Expr::Num(1.0), u),
                    Func::Sqrt => div(Expr::Num(0.5), Expr::call(Func::Sqrt, u)),
                    Func::Abs => div(u.clone(), Expr::call(Func::Abs, u)),
                };
                mul(outer, du)
            }
        }
    }
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Num(v) if *v == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Num(v) if *v == 1.0)
}

fn fold(op: BinOp, a: &Expr, b: &Expr) -> Option<Expr> {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => op.apply(*x, *y).ok().map(Expr::Num),
        _ => None,
    }
}

fn neg(e: Expr) -> Expr {
    match e {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        e => Expr::Neg(Box::new(e)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        return b;
    }
    if is_zero(&b) {
        return a;
    }
    fold(BinOp::Add, &a, &b).unwrap_or_else(|| Expr::binary(BinOp::Add, a, b))
}

fn sub(a: Expr, b: Expr) -> Expr {
    if is_zero(&b) {
        return a;
    }
    if is_zero(&a) {
        return neg(b);
    }
    fold(BinOp::Sub, &a, &b).unwrap_or_else(|| Expr::binary(BinOp::Sub, a, b))
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        return Expr::Num(0.0);
    }
    if is_one(&a) {
        return b;
    }
    if is_one(&b) {
        return a;
    }
    fold(BinOp::Mul, &a, &b).unwrap_or_else(|| Expr::binary(BinOp::Mul, a, b))
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        return Expr::Num(0.0);
    }
    if is_one(&b) {
        return a;
    }
    fold(BinOp::Div, &a, &b).unwrap_or_else(|| Expr::binary(BinOp::Div, a, b))
}

fn pow(a: Expr, b: Expr) -> Expr {
    if is_one(&b) {
        return a;
    }
    fold(BinOp::Pow, &a, &b).unwrap_or_else(|| Expr::binary(BinOp::Pow, a, b))
}

#[cfg(test)]
mod tests {
    use crate::expr::{numeric_partial, parse, Bindings};

    fn check(src: &str, at: f64) {
        let e = parse(src).unwrap();
        let d = e.derivative("t");
        let b = Bindings::new().with("t", at);
        let exact = d.evaluate(&b).unwrap();
        let fd = numeric_partial(&e, "t", &b, None).unwrap();
        assert!(
            (exact - fd).abs() <= 1e-6 * (1.0 + fd.abs()),
            "{src}: {exact} vs {fd} ({d})"
        );
    }

    #[test]
    fn matches_finite_differences() {
        for src in [
            "3*t^2 - 2*t + 1",
            "sin(2*pi*t)*cos(t)",
            "exp(t)/t",
            "sqrt(t + 1) - log(t)",
            "tan(t/3)",
            "t^t",
            "abs(t - 2)",
            "-(t - 1)^3",
        ] {
            check(src, 0.7);
        }
    }

    #[test]
    fn linear_curves_have_constant_derivative() {
        let d = parse("0.3 - 4*0.3*(7*t - 2 - 0.5)")
            .unwrap()
            .derivative("t");
        assert!(d.variables().is_empty());
        assert_eq!(d.evaluate(&Bindings::new()).unwrap(), -(4.0 * 0.3 * 7.0));
    }

    #[test]
    fn other_variables_are_constants() {
        let d = parse("a*t + sin(a)").unwrap().derivative("t");
        assert_eq!(d.to_string(), "a");
    }
}

use super::{add, div, mul, neg, pow, sub, unary, BinaryOp, DynamicsSpec, Expr, UnaryOp, Var};

impl Expr {
    /// Symbolic partial derivative with respect to `var`.
    ///
    /// Only local folding is applied (see the smart constructors), so the
    /// derivative of `a + b` evaluates to exactly `da + db`.
    pub fn differentiate(&self, var: Var) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::State(k) => Expr::Const(if var == Var::State(*k) { 1.0 } else { 0.0 }),
            Expr::Time => Expr::Const(if var == Var::Time { 1.0 } else { 0.0 }),
            Expr::Unary(op, a) => {
                let da = a.differentiate(var);
                if da.is_zero() {
                    return Expr::Const(0.0);
                }
                let a = (**a).clone();
                match op {
                    UnaryOp::Neg => neg(da),
                    UnaryOp::Sin => mul(unary(UnaryOp::Cos, a), da),
                    UnaryOp::Cos => neg(mul(unary(UnaryOp::Sin, a), da)),
                    UnaryOp::Exp => mul(unary(UnaryOp::Exp, a), da),
                    UnaryOp::Ln => div(da, a),
                    UnaryOp::Sqrt => div(da, mul(Expr::Const(2.0), unary(UnaryOp::Sqrt, a))),
                }
            }
            Expr::Binary(op, a, b) => {
                let da = a.differentiate(var);
                let db = b.differentiate(var);
                match op {
                    BinaryOp::Add => add(da, db),
                    BinaryOp::Sub => sub(da, db),
                    BinaryOp::Mul => add(mul(da, (**b).clone()), mul((**a).clone(), db)),
                    BinaryOp::Div => {
                        if db.is_zero() {
                            div(da, (**b).clone())
                        } else {
                            div(
                                sub(mul(da, (**b).clone()), mul((**a).clone(), db)),
                                pow((**b).clone(), 2.0),
                            )
                        }
                    }
                }
            }
            Expr::Pow(a, c) => {
                let da = a.differentiate(var);
                if da.is_zero() {
                    return Expr::Const(0.0);
                }
                mul(mul(Expr::Const(*c), pow((**a).clone(), c - 1.0)), da)
            }
        }
    }
}

/// Derivative along trajectories: `de/dt + sum_k (de/dx_k) * f_k`, simplified.
pub fn total_time_derivative(e: &Expr, dynamics: &DynamicsSpec) -> Expr {
    let mut acc = e.differentiate(Var::Time);
    for (k, fk) in dynamics.rhs().iter().enumerate() {
        if !e.depends_on(Var::State(k)) {
            continue;
        }
        acc = add(acc, mul(e.differentiate(Var::State(k)), fk.clone()));
    }
    acc.simplify()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    fn p(s: &str) -> Expr {
        parse_expression(s, 3).unwrap()
    }

    #[test]
    fn jacobian_entries_of_example_one() {
        assert_eq!(p("-x1 - x1*x2").differentiate(Var::State(1)), p("-x1"));
        assert_eq!(p("x1^2 - x2 - x2*x3").differentiate(Var::State(0)), p("2*x1"));
        assert_eq!(p("x1 + 5").differentiate(Var::Time), Expr::Const(0.0));
    }

    #[test]
    fn elementary_rules() {
        let x = [0.7, -1.3, 2.1];
        let t = 0.4;
        let cases: &[(&str, Var, f64)] = &[
            ("sin(x1)", Var::State(0), 0.7f64.cos()),
            ("cos(x1*x2)", Var::State(1), -(0.7f64 * -1.3).sin() * 0.7),
            ("exp(2*t)", Var::Time, 2.0 * 0.8f64.exp()),
            ("ln(x3)", Var::State(2), 1.0 / 2.1),
            ("sqrt(x3)", Var::State(2), 0.5 / 2.1f64.sqrt()),
            ("x1/x3", Var::State(2), -0.7 / (2.1 * 2.1)),
            ("x3^2.5", Var::State(2), 2.5 * 2.1f64.powf(1.5)),
        ];
        for (src, var, expected) in cases {
            let d = p(src).differentiate(*var).evaluate(&x, t).unwrap();
            assert!((d - expected).abs() < 1e-12, "{src}: {d} vs {expected}");
        }
    }

    #[test]
    fn total_derivative_cases() {
        let dyn1 = DynamicsSpec::parse(&["-x1"]).unwrap();
        assert_eq!(total_time_derivative(&Expr::Const(2.0), &dyn1), Expr::Const(0.0));
        assert_eq!(total_time_derivative(&parse_expression("x1", 1).unwrap(), &dyn1), parse_expression("-x1", 1).unwrap());
        let b = parse_expression("1 + 0.9*sin(t)", 1).unwrap();
        assert_eq!(total_time_derivative(&b, &dyn1), parse_expression("0.9*cos(t)", 1).unwrap());
    }
}

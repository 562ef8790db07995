//! Light algebraic simplification.
//!
//! Sums are flattened into `coefficient * base` terms and like bases are
//! merged; products and quotients are flattened into a coefficient times
//! powers of bases and like bases are merged, so `(-2*x1)/(-x1)` becomes `2`.
//! Factors of a product are sorted by their printed form; sum terms keep
//! their order. Products are never distributed over sums.

use super::{mul, pow, unary, BinaryOp, Expr, UnaryOp};

impl Expr {
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::State(_) | Expr::Time => self.clone(),
            Expr::Unary(UnaryOp::Neg, a) => collect_sum(&Expr::Unary(UnaryOp::Neg, Box::new(a.simplify()))),
            Expr::Unary(op, a) => unary(*op, a.simplify()),
            Expr::Binary(op, a, b) => {
                let node = Expr::Binary(*op, Box::new(a.simplify()), Box::new(b.simplify()));
                match op {
                    BinaryOp::Add | BinaryOp::Sub => collect_sum(&node),
                    BinaryOp::Mul | BinaryOp::Div => collect_product(&node),
                }
            }
            Expr::Pow(a, c) => collect_product(&Expr::Pow(Box::new(a.simplify()), *c)),
        }
    }
}

fn collect_sum(e: &Expr) -> Expr {
    let mut constant = 0.0;
    let mut terms: Vec<(f64, Expr)> = Vec::new();
    sum_terms(e, 1.0, &mut constant, &mut terms);
    terms.retain(|(c, _)| *c != 0.0);

    let mut acc: Option<Expr> = (constant != 0.0).then_some(Expr::Const(constant));
    for (c, base) in terms {
        acc = Some(match acc {
            None => scaled(c, base),
            Some(lhs) if c < 0.0 => Expr::Binary(
                BinaryOp::Add,
                Box::new(lhs),
                Box::new(Expr::Unary(UnaryOp::Neg, Box::new(scaled(-c, base)))),
            ),
            Some(lhs) => Expr::Binary(BinaryOp::Add, Box::new(lhs), Box::new(scaled(c, base))),
        });
    }
    acc.unwrap_or(Expr::Const(0.0))
}

fn sum_terms(e: &Expr, sign: f64, constant: &mut f64, terms: &mut Vec<(f64, Expr)>) {
    match e {
        Expr::Binary(BinaryOp::Add, a, b) => {
            sum_terms(a, sign, constant, terms);
            sum_terms(b, sign, constant, terms);
        }
        Expr::Binary(BinaryOp::Sub, a, b) => {
            sum_terms(a, sign, constant, terms);
            sum_terms(b, -sign, constant, terms);
        }
        Expr::Unary(UnaryOp::Neg, a) => sum_terms(a, -sign, constant, terms),
        Expr::Const(c) => *constant += sign * c,
        other => {
            let (c, base) = split_coefficient(other);
            let c = sign * c;
            match terms.iter_mut().find(|(_, b)| *b == base) {
                Some(slot) => slot.0 += c,
                None => terms.push((c, base)),
            }
        }
    }
}

fn split_coefficient(e: &Expr) -> (f64, Expr) {
    match e {
        Expr::Binary(BinaryOp::Mul, a, b) => match **a {
            Expr::Const(c) => (c, (**b).clone()),
            _ => (1.0, e.clone()),
        },
        _ => (1.0, e.clone()),
    }
}

fn scaled(c: f64, base: Expr) -> Expr {
    if c == 1.0 {
        base
    } else if c == -1.0 {
        Expr::Unary(UnaryOp::Neg, Box::new(base))
    } else {
        mul(Expr::Const(c), base)
    }
}

fn collect_product(e: &Expr) -> Expr {
    let mut coefficient = 1.0;
    let mut factors: Vec<(Expr, f64)> = Vec::new();
    product_factors(e, 1.0, &mut coefficient, &mut factors);
    if coefficient == 0.0 {
        return Expr::Const(0.0);
    }
    factors.retain(|(_, p)| *p != 0.0);
    // Commuted products must compare equal when sums merge like terms.
    factors.sort_by_cached_key(|(b, _)| b.to_string());

    let fold = |it: &mut dyn Iterator<Item = Expr>| it.reduce(|acc, f| Expr::Binary(BinaryOp::Mul, Box::new(acc), Box::new(f)));
    let numerator = fold(&mut factors.iter().filter(|(_, p)| *p > 0.0).map(|(b, p)| pow(b.clone(), *p)));
    let denominator = fold(&mut factors.iter().filter(|(_, p)| *p < 0.0).map(|(b, p)| pow(b.clone(), -*p)));

    let body = match (numerator, denominator) {
        (None, None) => return Expr::Const(coefficient),
        (Some(n), None) => n,
        (n, Some(d)) => Expr::Binary(BinaryOp::Div, Box::new(n.unwrap_or(Expr::Const(1.0))), Box::new(d)),
    };
    scaled(coefficient, body)
}

fn product_factors(e: &Expr, power: f64, coefficient: &mut f64, factors: &mut Vec<(Expr, f64)>) {
    let integral = power.fract() == 0.0;
    match e {
        Expr::Const(c) => *coefficient *= c.powf(power),
        Expr::Binary(BinaryOp::Mul, a, b) => {
            product_factors(a, power, coefficient, factors);
            product_factors(b, power, coefficient, factors);
        }
        Expr::Binary(BinaryOp::Div, a, b) => {
            product_factors(a, power, coefficient, factors);
            product_factors(b, -power, coefficient, factors);
        }
        Expr::Unary(UnaryOp::Neg, a) if integral => {
            *coefficient *= (-1.0f64).powf(power);
            product_factors(a, power, coefficient, factors);
        }
        Expr::Pow(a, c) if (integral && c.fract() == 0.0) || is_leaf(a) => {
            product_factors(a, power * c, coefficient, factors)
        }
        other => match factors.iter_mut().find(|(b, _)| b == other) {
            Some(slot) => slot.1 += power,
            None => factors.push((other.clone(), power)),
        },
    }
}

fn is_leaf(e: &Expr) -> bool {
    !matches!(
        e,
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..)
            | Expr::Unary(UnaryOp::Neg, _)
            | Expr::Const(_)
            | Expr::Pow(..)
    )
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse_expression, Expr};

    fn s(src: &str) -> Expr {
        parse_expression(src, 3).unwrap().simplify()
    }

    #[test]
    fn structural_cancellation() {
        assert_eq!(s("x1 - x1"), Expr::Const(0.0));
        assert_eq!(s("2*x1*x2 - x2*x1*2 + 0"), s("2*x1*x2 - 2*x1*x2"));
        assert_eq!(s("x1 + x1"), s("2*x1"));
        assert_eq!(s("3 + x2 - 3"), s("x2"));
    }

    #[test]
    fn ratio_cancellation() {
        assert_eq!(s("-(2*x1)/(-x1)"), Expr::Const(2.0));
        assert_eq!(s("(2*x2)/(-(-x2))"), Expr::Const(2.0));
        assert_eq!(s("x1^2/x1"), s("x1"));
        assert_eq!(s("x1*x2/(x2*x1^3)"), s("1/x1^2"));
        assert_eq!(s("-(1 + 0.9*sin(t))/1"), s("-(1 + 0.9*sin(t))"));
    }

    #[test]
    fn constant_folding_and_identities() {
        assert_eq!(s("2*3 + 4"), Expr::Const(10.0));
        assert_eq!(s("x1*1 + 0*x2"), s("x1"));
        assert_eq!(s("x1^0"), Expr::Const(1.0));
        assert_eq!(s("sin(0)"), Expr::Const(0.0));
        assert_eq!(s("-1 - x2").to_string(), "-1 - x2");
        assert_eq!(s("--x1"), s("x1"));
    }

    #[test]
    fn fractional_powers_of_products_are_not_split() {
        let e = s("(x1*x2)^0.5");
        assert_eq!(e.to_string(), "(x1*x2)^0.5");
        let v = e.evaluate(&[-2.0, -8.0, 0.0], 0.0).unwrap();
        assert_eq!(v, 4.0);
    }

    #[test]
    fn simplification_preserves_value() {
        let x = [0.3, -1.7, 2.2];
        for src in [
            "x1*x2/(x2*x1^3) + x3 - 2*x3",
            "(1 + x1)*(1 + x1)/(1 + x1) - x1",
            "exp(x1)*exp(x1)^2/exp(x1)",
            "-(x1 - x2)*3/(-x3)",
        ] {
            let e = parse_expression(src, 3).unwrap();
            let a = e.evaluate(&x, 0.0).unwrap();
            let b = e.simplify().evaluate(&x, 0.0).unwrap();
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{src}: {a} vs {b}");
        }
    }
}

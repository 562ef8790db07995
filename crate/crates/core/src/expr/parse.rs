//! Recursive-descent parser for the model expression grammar.
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?          exponent must fold to a constant
//! primary := number | 'x' digits | 't' | func '(' sum ')' | '(' sum ')'
//! func    := sin | cos | exp | ln | sqrt
//! ```
//!
//! `a - b` is read as `a + (-b)`, so sums are always built from `Add` and
//! `Neg` nodes.

use super::{BinaryOp, Expr, UnaryOp};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("variable x{index} at byte {offset} is out of range for a system of dimension {n}")]
    VariableOutOfRange { offset: usize, index: usize, n: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::VariableOutOfRange { offset, .. } => *offset,
        }
    }
}

/// Parses `text` as an expression over `x1..xn` and `t`.
pub fn parse_expression(text: &str, n: usize) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, n };
    p.skip_ws();
    if p.at_end() {
        return Err(p.error("empty expression"));
    }
    let e = p.sum()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error(format!("unexpected '{}'", p.peek_char())));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    n: usize,
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_char(&self) -> char {
        std::str::from_utf8(&self.src[self.pos..])
            .ok()
            .and_then(|s| s.chars().next())
            .unwrap_or('?')
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { offset: self.pos, message: message.into() }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.product()?;
                lhs = Expr::Binary(BinaryOp::Add, Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'-') {
                let rhs = self.product()?;
                lhs = Expr::Binary(
                    BinaryOp::Add,
                    Box::new(lhs),
                    Box::new(Expr::Unary(UnaryOp::Neg, Box::new(rhs))),
                );
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.unary()?;
                lhs = Expr::Binary(BinaryOp::Mul, Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'/') {
                let rhs = self.unary()?;
                lhs = Expr::Binary(BinaryOp::Div, Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            let inner = self.unary()?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        self.skip_ws();
        let at = self.pos;
        let exponent = self.unary()?;
        match fold_constant(&exponent) {
            Some(c) if c.is_finite() => Ok(Expr::Pow(Box::new(base), c)),
            _ => Err(ParseError::Syntax {
                offset: at,
                message: "exponent must be a constant".into(),
            }),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                    self.pos += 1;
                }
                let ident = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                self.identifier(ident, start)
            }
            Some(_) => Err(self.error(format!("unexpected '{}'", self.peek_char()))),
        }
    }

    fn identifier(&mut self, ident: &str, start: usize) -> Result<Expr, ParseError> {
        if ident == "t" {
            return Ok(Expr::Time);
        }
        if let Some(digits) = ident.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("bad variable index in '{ident}'"),
                })?;
                if index == 0 || index > self.n {
                    return Err(ParseError::VariableOutOfRange { offset: start, index, n: self.n });
                }
                return Ok(Expr::State(index - 1));
            }
        }
        let op = match ident {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "ln" => UnaryOp::Ln,
            "sqrt" => UnaryOp::Sqrt,
            _ => {
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unknown identifier '{ident}'"),
                })
            }
        };
        if !self.eat(b'(') {
            return Err(self.error(format!("expected '(' after {ident}")));
        }
        let arg = self.sum()?;
        if !self.eat(b')') {
            return Err(self.error("expected ')'"));
        }
        Ok(Expr::Unary(op, Box::new(arg)))
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while matches!(p.peek(), Some(c) if c.is_ascii_digit()) {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut count = digits(self);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            return Err(ParseError::Syntax { offset: start, message: "malformed number".into() });
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| ParseError::Syntax { offset: start, message: format!("malformed number '{text}'") })
    }
}

fn fold_constant(e: &Expr) -> Option<f64> {
    if e.is_constant() {
        e.evaluate(&[], 0.0).ok()
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(e: Expr) -> Box<Expr> {
        Box::new(e)
    }

    #[test]
    fn example_one_first_equation() {
        let e = parse_expression("-x1 - x1*x2", 3).unwrap();
        let expected = Expr::Binary(
            BinaryOp::Add,
            b(Expr::Unary(UnaryOp::Neg, b(Expr::State(0)))),
            b(Expr::Unary(
                UnaryOp::Neg,
                b(Expr::Binary(BinaryOp::Mul, b(Expr::State(0)), b(Expr::State(1)))),
            )),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn constant_zero() {
        assert_eq!(parse_expression("0", 1).unwrap(), Expr::Const(0.0));
    }

    #[test]
    fn periodic_asymmetry() {
        let e = parse_expression("1 + 0.9*sin(t)", 0).unwrap();
        let expected = Expr::Binary(
            BinaryOp::Add,
            b(Expr::Const(1.0)),
            b(Expr::Binary(
                BinaryOp::Mul,
                b(Expr::Const(0.9)),
                b(Expr::Unary(UnaryOp::Sin, b(Expr::Time))),
            )),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn precedence_rules() {
        // pow binds tighter than unary minus
        let e = parse_expression("-x1^2", 1).unwrap();
        assert_eq!(e, Expr::Unary(UnaryOp::Neg, b(Expr::Pow(b(Expr::State(0)), 2.0))));
        // left associativity of division
        let e = parse_expression("x1/x2/x3", 3).unwrap();
        assert_eq!(
            e,
            Expr::Binary(
                BinaryOp::Div,
                b(Expr::Binary(BinaryOp::Div, b(Expr::State(0)), b(Expr::State(1)))),
                b(Expr::State(2))
            )
        );
        assert_eq!(parse_expression("x1^-1", 1).unwrap(), Expr::Pow(b(Expr::State(0)), -1.0));
        assert_eq!(parse_expression("x1^(1/2)", 1).unwrap(), Expr::Pow(b(Expr::State(0)), 0.5));
        assert_eq!(parse_expression("2.5e-1", 0).unwrap(), Expr::Const(0.25));
    }

    #[test]
    fn errors_carry_offsets() {
        let err = parse_expression("x1 + * x2", 2).unwrap_err();
        assert_eq!(err.offset(), 5);
        let err = parse_expression("x1 + x4", 3).unwrap_err();
        assert_eq!(err, ParseError::VariableOutOfRange { offset: 5, index: 4, n: 3 });
        assert!(matches!(parse_expression("x0", 3), Err(ParseError::VariableOutOfRange { .. })));
        assert!(parse_expression("x1^x2", 2).is_err());
        assert!(parse_expression("", 2).is_err());
        assert!(parse_expression("   ", 2).is_err());
        assert!(parse_expression("(x1", 2).is_err());
        assert!(parse_expression("foo(x1)", 2).is_err());
        assert!(parse_expression("x1 x2", 2).is_err());
        assert!(parse_expression("sin x1", 2).is_err());
    }
}

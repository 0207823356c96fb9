//! Recursive-descent parser for the expression language.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | atom ('^' exponent)?
//! atom   := number | 'x' index | func '(' expr ')' | '(' expr ')'
//! number := integer | decimal          ("1/4" parses as a division)
//! func   := sin | cos | exp
//! ```
//!
//! Unary minus binds looser than `^`, so `-x0^2` is `-(x0^2)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::Expr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("variable x{index} at byte {offset} is out of range for dimension {dim}")]
    VariableOutOfRange { index: usize, dim: usize, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::VariableOutOfRange { offset, .. } => *offset,
        }
    }
}

/// Parses `text` as an expression over coordinates `x0 .. x(dimension-1)`.
pub fn parse(text: &str, dimension: usize) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, dim: dimension };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ParseError {
        ParseError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat(b'+') {
                terms.push(self.term()?);
            } else if self.eat(b'-') {
                terms.push(Expr::neg(self.term()?));
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::sum(terms) })
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut factors = vec![self.factor()?];
        loop {
            if self.eat(b'*') {
                factors.push(self.factor()?);
            } else if self.eat(b'/') {
                factors.push(Expr::recip(self.factor()?));
            } else {
                break;
            }
        }
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { Expr::product(factors) })
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(Expr::neg(self.factor()?));
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            let k = self.exponent()?;
            return Ok(Expr::pow(base, k));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i64, ParseError> {
        let parens = self.eat(b'(');
        let negative = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected integer exponent"));
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let mut k: i64 = digits.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            message: "exponent out of range".into(),
        })?;
        if negative {
            k = -k;
        }
        if parens {
            self.expect(b')')?;
        }
        Ok(k)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let c = self.peek().ok_or_else(|| self.error("unexpected end of input"))?;
        match c {
            b'(' => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            b'0'..=b'9' | b'.' => self.number(),
            b'x' => {
                let start = self.pos;
                self.pos += 1;
                let ds = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if ds == self.pos {
                    return Err(ParseError::Syntax { offset: ds, message: "expected variable index after 'x'".into() });
                }
                let index: usize = std::str::from_utf8(&self.src[ds..self.pos])
                    .unwrap()
                    .parse()
                    .map_err(|_| ParseError::Syntax { offset: ds, message: "variable index out of range".into() })?;
                if index >= self.dim {
                    return Err(ParseError::VariableOutOfRange { index, dim: self.dim, offset: start });
                }
                Ok(Expr::var(index))
            }
            b'a'..=b'z' => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let f: fn(Expr) -> Expr = match name {
                    "sin" => Expr::sin,
                    "cos" => Expr::cos,
                    "exp" => Expr::exp,
                    _ => {
                        return Err(ParseError::Syntax { offset: start, message: format!("unknown function '{name}'") })
                    }
                };
                self.expect(b'(')?;
                let arg = self.expr()?;
                self.expect(b')')?;
                Ok(f(arg))
            }
            _ => Err(self.error(&format!("unexpected character '{}'", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let mut int_digits = String::new();
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            int_digits.push(self.src[self.pos] as char);
            self.pos += 1;
        }
        let mut frac_digits = String::new();
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                frac_digits.push(self.src[self.pos] as char);
                self.pos += 1;
            }
        }
        if int_digits.is_empty() && frac_digits.is_empty() {
            return Err(ParseError::Syntax { offset: start, message: "malformed number".into() });
        }
        let all = format!("{int_digits}{frac_digits}");
        let numer: BigInt = all.parse().unwrap_or_else(|_| BigInt::zero());
        let denom = num_traits::pow(BigInt::from(10), frac_digits.len());
        let value = if frac_digits.is_empty() { BigRational::from_integer(numer) } else { BigRational::new(numer, denom) };
        Ok(Expr::constant(value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Node;

    #[test]
    fn square_plus_one() {
        let e = parse("x0^2 + 1", 2).unwrap();
        match e.node() {
            Node::Sum(terms) => {
                assert!(matches!(terms[0].node(), Node::Pow(b, 2) if matches!(b.node(), Node::Var(0))));
                assert!(terms[1].is_const_one());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quarter_times_sine() {
        let e = parse("1/4 * sin(x1)", 2).unwrap();
        match e.node() {
            Node::Product(f) => {
                assert_eq!(f[0].as_const().unwrap(), &BigRational::new(1.into(), 4.into()));
                assert!(matches!(f[1].node(), Node::Sin(u) if matches!(u.node(), Node::Var(1))));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn variable_out_of_range() {
        assert_eq!(parse("x3", 2).unwrap_err(), ParseError::VariableOutOfRange { index: 3, dim: 2, offset: 0 });
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        assert_eq!(parse("x0 + * 2", 1).unwrap_err().offset(), 5);
        assert_eq!(parse("(x0", 1).unwrap_err().offset(), 3);
        assert_eq!(parse("tan(x0)", 1).unwrap_err().offset(), 0);
        assert_eq!(parse("x0 x0", 1).unwrap_err().offset(), 3);
    }

    #[test]
    fn precedence_and_decimals() {
        let p = [2.0f64, 3.0];
        let v = |s: &str| parse(s, 2).unwrap().eval(&p).unwrap();
        assert_eq!(v("1 + 2*x0^2"), 9.0);
        assert_eq!(v("-x0^2"), -4.0);
        assert_eq!(v("x1 - x0 - 1"), 0.0);
        assert_eq!(v("x1/x0/2"), 0.75);
        assert_eq!(v("2.5*x0"), 5.0);
        assert_eq!(v("x0^-1 + x0^(-2)"), 0.75);
        assert_eq!(v("  ( x0 )^3 "), 8.0);
    }
}

//! Infix parser for the field expression language.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' unary)?
//! atom  := number | symbol | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)`.

use super::expr::{Expr, Func};
use crate::error::ParseError;

/// Coordinate names available to an expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbols {
    names: Vec<String>,
}

impl Symbols {
    /// Base-manifold coordinates `x1 .. x{m}`.
    pub fn base(m: usize) -> Self {
        Symbols {
            names: (1..=m).map(|i| format!("x{i}")).collect(),
        }
    }

    /// Full chart coordinates `x1 .. x{m}, s, t`.
    pub fn chart(m: usize) -> Self {
        let mut names: Vec<String> = (1..=m).map(|i| format!("x{i}")).collect();
        names.push("s".into());
        names.push("t".into());
        Symbols { names }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // scientific notation
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ParseError::BadNumber {
                pos: start,
                text: text.to_string(),
            })?;
            out.push((start, Token::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            out.push((start, Token::Ident(src[start..i].to_string())));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Token::Op(c),
                '(' => Token::LParen,
                ')' => Token::RParen,
                other => return Err(ParseError::UnexpectedChar { pos: i, ch: other }),
            };
            out.push((i, tok));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    symbols: &'a Symbols,
    len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(p, _)| *p)
            .unwrap_or(self.len)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::add(lhs, rhs)
            } else {
                Expr::sub(lhs, rhs)
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::mul(lhs, rhs)
            } else {
                Expr::div(lhs, rhs)
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(Expr::neg(self.unary()?))
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::pow(base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let pos = self.offset();
        match self.next() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::LParen) => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Some(Token::Ident(name)) => {
                if let Some(func) = Func::from_name(&name) {
                    match self.next() {
                        Some(Token::LParen) => {}
                        _ => {
                            return Err(ParseError::Expected {
                                pos: self.offset(),
                                what: "'(' after function name",
                            })
                        }
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expr::call(func, arg))
                } else if name == "pi" {
                    Ok(Expr::Const(std::f64::consts::PI))
                } else if let Some(k) = self.symbols.index_of(&name) {
                    Ok(Expr::Var(k))
                } else {
                    Err(ParseError::UnknownSymbol { pos, name })
                }
            }
            Some(_) => Err(ParseError::Expected {
                pos,
                what: "operand",
            }),
            None => Err(ParseError::UnexpectedEnd),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        let pos = self.offset();
        match self.next() {
            Some(Token::RParen) => Ok(()),
            Some(_) => Err(ParseError::Expected { pos, what: "')'" }),
            None => Err(ParseError::UnexpectedEnd),
        }
    }
}

/// Parse `src` against the given coordinate symbols.
pub fn parse_expr(src: &str, symbols: &Symbols) -> Result<Expr, ParseError> {
    let tokens = tokenize(src)?;
    if tokens.is_empty() {
        return Err(ParseError::UnexpectedEnd);
    }
    let mut p = Parser {
        tokens,
        pos: 0,
        symbols,
        len: src.len(),
    };
    let e = p.expr()?;
    if p.pos < p.tokens.len() {
        return Err(ParseError::Trailing { pos: p.offset() });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Result<Expr, ParseError> {
        parse_expr(src, &Symbols::chart(2))
    }

    fn eval(src: &str, x: &[f64]) -> f64 {
        parse(src).unwrap().eval(x).unwrap()
    }

    #[test]
    fn arithmetic_precedence() {
        let p = [2.0, 3.0, 0.0, 0.5];
        assert_eq!(eval("x1*x2", &p), 6.0);
        assert_eq!(eval("1 + 2*3", &p), 7.0);
        assert_eq!(eval("(1 + 2)*3", &p), 9.0);
        assert_eq!(eval("2^3^2", &p), 512.0);
        assert_eq!(eval("-x1^2", &p), -4.0);
        assert_eq!(eval("x2/x1/3", &p), 0.5);
        assert_eq!(eval("1e-1*10", &p), 1.0);
        assert!((eval("exp(t)", &p) - 0.5f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn whitespace_insensitive() {
        assert_eq!(parse(" x1 *  x2 ").unwrap(), parse("x1*x2").unwrap());
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse("x1 +"), Err(ParseError::UnexpectedEnd)));
        assert!(matches!(parse("x3"), Err(ParseError::UnknownSymbol { .. })));
        assert!(matches!(parse("x1 x2"), Err(ParseError::Trailing { .. })));
        assert!(matches!(parse("exp x1"), Err(ParseError::Expected { .. })));
        assert!(matches!(parse("(x1"), Err(ParseError::UnexpectedEnd)));
        assert!(matches!(
            parse("x1 $ 2"),
            Err(ParseError::UnexpectedChar { .. })
        ));
        assert!(matches!(parse(""), Err(ParseError::UnexpectedEnd)));
    }

    #[test]
    fn base_symbols_exclude_fiber_coordinates() {
        assert!(parse_expr("s", &Symbols::base(2)).is_err());
        assert!(parse_expr("x2", &Symbols::base(2)).is_ok());
    }
}

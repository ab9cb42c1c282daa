use super::{diff, Expression, Func, Node, ParseError};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                out.push((i, Tok::Plus));
                i += 1
            }
            b'-' => {
                out.push((i, Tok::Minus));
                i += 1
            }
            b'*' => {
                out.push((i, Tok::Star));
                i += 1
            }
            b'/' => {
                out.push((i, Tok::Slash));
                i += 1
            }
            b'^' => {
                out.push((i, Tok::Caret));
                i += 1
            }
            b'(' => {
                out.push((i, Tok::LParen));
                i += 1
            }
            b')' => {
                out.push((i, Tok::RParen));
                i += 1
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| ParseError::BadNumber { offset: start })?;
                out.push((start, Tok::Num(value)));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError::UnexpectedChar { offset: i, ch });
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if let Some(Tok::Minus) = self.peek() {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.pos += 1;
            let at = self.offset();
            let exponent = diff::simplify(self.unary()?);
            let n = match exponent {
                Node::Const(c) if c.fract() == 0.0 && c.abs() <= i32::MAX as f64 => c as i32,
                _ => return Err(ParseError::NonIntegerExponent { offset: at }),
            };
            return Ok(Node::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let at = self.offset();
        let tok = match self.toks.get(self.pos) {
            Some((_, t)) => t.clone(),
            None => return Err(ParseError::Unexpected { offset: at, message: "expression ended early".into() }),
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Const(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.close_paren(at)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    match self.peek() {
                        Some(Tok::LParen) => {
                            let open = self.offset();
                            self.pos += 1;
                            let arg = self.expr()?;
                            self.close_paren(open)?;
                            Ok(Node::Call(func, Box::new(arg)))
                        }
                        _ => Err(ParseError::Unexpected {
                            offset: self.offset(),
                            message: format!("expected `(` after `{name}`"),
                        }),
                    }
                } else if let Some(slot) = self.vars.iter().position(|v| *v == name) {
                    Ok(Node::Var(slot))
                } else if name == "pi" {
                    Ok(Node::Const(std::f64::consts::PI))
                } else {
                    Err(ParseError::UnknownIdentifier { offset: at, name })
                }
            }
            Tok::RParen => Err(ParseError::Unbalanced { offset: at }),
            other => Err(ParseError::Unexpected { offset: at, message: format!("unexpected {}", describe(&other)) }),
        }
    }

    fn close_paren(&mut self, open: usize) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::RParen) => {
                self.pos += 1;
                Ok(())
            }
            None => Err(ParseError::Unbalanced { offset: open }),
            Some(t) => Err(ParseError::Unexpected {
                offset: self.offset(),
                message: format!("expected `)`, found {}", describe(t)),
            }),
        }
    }
}

fn describe(t: &Tok) -> &'static str {
    match t {
        Tok::Num(_) => "number",
        Tok::Ident(_) => "identifier",
        Tok::Plus => "`+`",
        Tok::Minus => "`-`",
        Tok::Star => "`*`",
        Tok::Slash => "`/`",
        Tok::Caret => "`^`",
        Tok::LParen => "`(`",
        Tok::RParen => "`)`",
    }
}

/// Parse `source` against the declared variable names.
pub fn parse(source: &str, variables: &[&str]) -> Result<Expression, ParseError> {
    if source.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let toks = lex(source)?;
    let mut p = Parser { toks, pos: 0, end: source.len(), vars: variables };
    let root = p.expr()?;
    if let Some((off, tok)) = p.toks.get(p.pos) {
        return Err(match tok {
            Tok::RParen => ParseError::Unbalanced { offset: *off },
            t => ParseError::Unexpected { offset: *off, message: format!("trailing {}", describe(t)) },
        });
    }
    Ok(Expression { root, vars: variables.iter().map(|s| s.to_string()).collect::<Arc<[String]>>() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_expected_trees() {
        let e = parse("sin(x)", &["x"]).unwrap();
        assert_eq!(e.root(), &Node::Call(Func::Sin, Box::new(Node::Var(0))));
        let q = parse("2*sin(xi)", &["xi", "v"]).unwrap();
        assert_eq!(
            q.root(),
            &Node::Mul(Box::new(Node::Const(2.0)), Box::new(Node::Call(Func::Sin, Box::new(Node::Var(0)))))
        );
    }

    #[test]
    fn malformed_input_reports_offset() {
        let err = parse("x +* 2", &["x"]).unwrap_err();
        assert_eq!(err.offset(), Some(3));
        assert_eq!(parse("", &["x"]).unwrap_err(), ParseError::Empty);
        assert_eq!(parse("   ", &["x"]).unwrap_err(), ParseError::Empty);
        assert!(matches!(parse("sin(x", &["x"]).unwrap_err(), ParseError::Unbalanced { offset: 3 }));
        assert!(matches!(parse("x)", &["x"]).unwrap_err(), ParseError::Unbalanced { offset: 1 }));
        assert!(matches!(parse("y + 1", &["x"]).unwrap_err(), ParseError::UnknownIdentifier { offset: 0, .. }));
        assert!(matches!(parse("x^0.5", &["x"]).unwrap_err(), ParseError::NonIntegerExponent { offset: 2 }));
        assert!(matches!(parse("2 x", &["x"]).unwrap_err(), ParseError::Unexpected { offset: 2, .. }));
        assert!(matches!(parse("x # 1", &["x"]).unwrap_err(), ParseError::UnexpectedChar { offset: 2, ch: '#' }));
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse("-x^2", &["x"]).unwrap();
        assert_eq!(e.eval(&[3.0]).unwrap(), -9.0);
        let e = parse("2^3^2", &[]).unwrap();
        assert_eq!(e.eval(&[]).unwrap(), 512.0);
        let e = parse("8/4/2", &[]).unwrap();
        assert_eq!(e.eval(&[]).unwrap(), 1.0);
        let e = parse("1 - 2 - 3", &[]).unwrap();
        assert_eq!(e.eval(&[]).unwrap(), -4.0);
        let e = parse("x^-1", &["x"]).unwrap();
        assert_eq!(e.eval(&[4.0]).unwrap(), 0.25);
        let e = parse("x^(1+1)", &["x"]).unwrap();
        assert_eq!(e.eval(&[3.0]).unwrap(), 9.0);
        let e = parse("1.5e-3*x + 2E2", &["x"]).unwrap();
        assert_eq!(e.eval(&[1000.0]).unwrap(), 201.5);
    }
}

//! Scalar expression language used to describe the unperturbed field `f(x)`,
//! the perturbation profile `q(xi, v)` and auxiliary fields in configuration
//! files.
//!
//! Expressions are parsed once into an immutable tree whose variables are
//! resolved to slot indices, so evaluation is a plain tree walk over a slice
//! of values. The grammar is the usual one:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          -- right associative, integer exponent
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Powers bind tighter than unary minus, so `-x^2` is `-(x^2)`. Exponents
//! must fold to an integer constant; fractional powers are written through
//! `sqrt` or `exp(a*log(x))`.

mod diff;
mod parse;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use parse::parse;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("unexpected character {ch:?} at offset {offset}")]
    UnexpectedChar { offset: usize, ch: char },
    #[error("unexpected token at offset {offset}: {message}")]
    Unexpected { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("unbalanced parentheses at offset {offset}")]
    Unbalanced { offset: usize },
    #[error("exponent at offset {offset} is not an integer constant")]
    NonIntegerExponent { offset: usize },
    #[error("invalid number literal at offset {offset}")]
    BadNumber { offset: usize },
}

impl ParseError {
    /// Byte offset of the error in the source, when one applies.
    pub fn offset(&self) -> Option<usize> {
        match self {
            ParseError::Empty => Some(0),
            ParseError::UnexpectedChar { offset, .. }
            | ParseError::Unexpected { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::Unbalanced { offset }
            | ParseError::NonIntegerExponent { offset }
            | ParseError::BadNumber { offset } => Some(*offset),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("variable `{0}` is not bound")]
    Unbound(String),
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sinh,
    Cosh,
    Tanh,
    Sqrt,
    Abs,
    Atan,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Atan => "atan",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "atan" => Func::Atan,
            _ => return None,
        })
    }

    fn apply(self, u: f64) -> Result<f64, EvalError> {
        Ok(match self {
            Func::Sin => u.sin(),
            Func::Cos => u.cos(),
            Func::Tan => u.tan(),
            Func::Exp => u.exp(),
            Func::Log => {
                if u <= 0.0 {
                    return Err(EvalError::Domain("log of a non-positive number"));
                }
                u.ln()
            }
            Func::Sinh => u.sinh(),
            Func::Cosh => u.cosh(),
            Func::Tanh => u.tanh(),
            Func::Sqrt => {
                if u < 0.0 {
                    return Err(EvalError::Domain("sqrt of a negative number"));
                }
                u.sqrt()
            }
            Func::Abs => u.abs(),
            Func::Atan => u.atan(),
        })
    }
}

/// Expression tree. Variables are slot indices into the owning
/// [`Expression`]'s variable list.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval(&self, vals: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Node::Const(c) => *c,
            Node::Var(i) => vals[*i],
            Node::Neg(a) => -a.eval(vals)?,
            Node::Add(a, b) => a.eval(vals)? + b.eval(vals)?,
            Node::Sub(a, b) => a.eval(vals)? - b.eval(vals)?,
            Node::Mul(a, b) => a.eval(vals)? * b.eval(vals)?,
            Node::Div(a, b) => {
                let num = a.eval(vals)?;
                let den = b.eval(vals)?;
                if den == 0.0 {
                    return Err(EvalError::Domain("division by zero"));
                }
                num / den
            }
            Node::Pow(a, n) => {
                let base = a.eval(vals)?;
                if base == 0.0 && *n < 0 {
                    return Err(EvalError::Domain("zero raised to a negative power"));
                }
                base.powi(*n)
            }
            Node::Call(f, a) => f.apply(a.eval(vals)?)?,
        })
    }

    fn uses_var(&self, slot: usize) -> bool {
        match self {
            Node::Const(_) => false,
            Node::Var(i) => *i == slot,
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.uses_var(slot),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.uses_var(slot) || b.uses_var(slot)
            }
        }
    }

    fn size(&self) -> usize {
        match self {
            Node::Const(_) | Node::Var(_) => 1,
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => 1 + a.size(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => 1 + a.size() + b.size(),
        }
    }
}

/// A parsed expression together with its declared variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    vars: Arc<[String]>,
}

impl Expression {
    pub fn from_node(root: Node, vars: &[&str]) -> Self {
        Expression { root, vars: vars.iter().map(|s| s.to_string()).collect() }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn variables(&self) -> &[String] {
        &self.vars
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    /// Whether the variable actually appears in the tree.
    pub fn depends_on(&self, name: &str) -> bool {
        self.slot(name).is_some_and(|s| self.root.uses_var(s))
    }

    pub fn node_count(&self) -> usize {
        self.root.size()
    }

    /// Evaluate with values given in declaration order.
    pub fn eval(&self, values: &[f64]) -> Result<f64, EvalError> {
        if values.len() != self.vars.len() {
            return Err(EvalError::Arity { expected: self.vars.len(), got: values.len() });
        }
        self.root.eval(values)
    }

    /// Evaluate with named bindings. Every declared variable must be bound.
    pub fn evaluate(&self, bindings: &HashMap<String, f64>) -> Result<f64, EvalError> {
        let values = self
            .vars
            .iter()
            .map(|v| bindings.get(v).copied().ok_or_else(|| EvalError::Unbound(v.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        self.root.eval(&values)
    }

    /// Exact symbolic derivative with light constant folding.
    ///
    /// Returns `None` when `var` is not declared.
    pub fn differentiate(&self, var: &str) -> Option<Expression> {
        let slot = self.slot(var)?;
        Some(Expression { root: diff::derivative(&self.root, slot), vars: self.vars.clone() })
    }

    /// Substitute a constant for one variable, keeping the variable declared.
    pub fn bind_constant(&self, var: &str, value: f64) -> Option<Expression> {
        let slot = self.slot(var)?;
        Some(Expression { root: diff::simplify(substitute(&self.root, slot, value)), vars: self.vars.clone() })
    }
}

fn substitute(node: &Node, slot: usize, value: f64) -> Node {
    let sub = |n: &Node| Box::new(substitute(n, slot, value));
    match node {
        Node::Const(c) => Node::Const(*c),
        Node::Var(i) if *i == slot => Node::Const(value),
        Node::Var(i) => Node::Var(*i),
        Node::Neg(a) => Node::Neg(sub(a)),
        Node::Add(a, b) => Node::Add(sub(a), sub(b)),
        Node::Sub(a, b) => Node::Sub(sub(a), sub(b)),
        Node::Mul(a, b) => Node::Mul(sub(a), sub(b)),
        Node::Div(a, b) => Node::Div(sub(a), sub(b)),
        Node::Pow(a, n) => Node::Pow(sub(a), *n),
        Node::Call(f, a) => Node::Call(*f, sub(a)),
    }
}

struct Printer<'a> {
    node: &'a Node,
    vars: &'a [String],
}

impl<'a> fmt::Display for Printer<'a> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = |n: &'a Node| Printer { node: n, vars: self.vars };
        match self.node {
            Node::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                write!(out, "(-{:?})", -c)
            }
            Node::Const(c) => write!(out, "{:?}", c),
            Node::Var(i) => write!(out, "{}", self.vars[*i]),
            Node::Neg(a) => write!(out, "(-{})", p(a)),
            Node::Add(a, b) => write!(out, "({} + {})", p(a), p(b)),
            Node::Sub(a, b) => write!(out, "({} - {})", p(a), p(b)),
            Node::Mul(a, b) => write!(out, "({} * {})", p(a), p(b)),
            Node::Div(a, b) => write!(out, "({} / {})", p(a), p(b)),
            Node::Pow(a, n) => write!(out, "({}^({}))", p(a), n),
            Node::Call(f, a) => write!(out, "{}({})", f.name(), p(a)),
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Printer { node: &self.root, vars: &self.vars }.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn bind(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn evaluates_simple_forms() {
        let e = parse("sin(x)", &["x"]).unwrap();
        assert_eq!(e.evaluate(&bind(&[("x", 0.0)])).unwrap(), 0.0);
        let q = parse("2*sin(xi)", &["xi", "v"]).unwrap();
        assert_eq!(q.evaluate(&bind(&[("xi", PI / 2.0), ("v", 0.3)])).unwrap(), 2.0);
        let v = parse("cos(x)*cosh(z)", &["x", "z"]).unwrap();
        assert_eq!(v.evaluate(&bind(&[("x", 0.0), ("z", 0.0)])).unwrap(), 1.0);
    }

    #[test]
    fn unbound_and_domain_errors() {
        let e = parse("x + y", &["x", "y"]).unwrap();
        assert_eq!(e.evaluate(&bind(&[("x", 1.0)])), Err(EvalError::Unbound("y".into())));
        let l = parse("log(x)", &["x"]).unwrap();
        assert!(matches!(l.eval(&[0.0]), Err(EvalError::Domain(_))));
        let s = parse("sqrt(x)", &["x"]).unwrap();
        assert!(matches!(s.eval(&[-1.0]), Err(EvalError::Domain(_))));
        assert_eq!(s.eval(&[4.0]).unwrap(), 2.0);
        let d = parse("1/x", &["x"]).unwrap();
        assert!(matches!(d.eval(&[0.0]), Err(EvalError::Domain(_))));
    }

    #[test]
    fn derivative_examples() {
        let e = parse("sin(x)", &["x"]).unwrap();
        let de = e.differentiate("x").unwrap();
        assert_eq!(de.to_string(), "cos(x)");
        assert_eq!(de.eval(&[0.0]).unwrap(), 1.0);
        let c = parse("x^3", &["x"]).unwrap();
        assert_eq!(c.differentiate("x").unwrap().eval(&[2.0]).unwrap(), 12.0);
        assert!(c.differentiate("y").is_none());
    }

    #[test]
    fn abs_derivative_is_undefined_at_zero() {
        let e = parse("abs(x)", &["x"]).unwrap();
        let de = e.differentiate("x").unwrap();
        assert_eq!(de.eval(&[-2.0]).unwrap(), -1.0);
        assert!(matches!(de.eval(&[0.0]), Err(EvalError::Domain(_))));
    }

    #[test]
    fn dependency_query() {
        let q = parse("cos(v)", &["xi", "v"]).unwrap();
        assert!(!q.depends_on("xi"));
        assert!(q.depends_on("v"));
        let z = parse("0*xi", &["xi", "v"]).unwrap();
        assert!(z.depends_on("xi"));
    }

    #[test]
    fn bind_constant_folds() {
        let e = parse("a*x + a", &["x", "a"]).unwrap();
        let b = e.bind_constant("a", 2.0).unwrap();
        assert_eq!(b.eval(&[3.0, 99.0]).unwrap(), 8.0);
        assert!(!b.depends_on("a"));
    }
}

//! Closed-form scalar expressions over cube coordinates.
//!
//! Expressions are written in parenthesised prefix notation, e.g.
//! `(+ 0.2 (+ (^ x1 2) (* 0.1 x2)))`. Coordinates are `x1 .. xD` (one-based).
//! Operators: `+` and `*` (two or more operands), `-` (one or two operands),
//! `^` (base and a numeric exponent) and `abs`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Zero-based coordinate index.
    Coord(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Abs(Box<Expr>),
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    /// One-based coordinate `x_i`, matching the textual form.
    pub fn coord(i: usize) -> Self {
        assert!(i >= 1, "coordinates are one-based");
        Expr::Coord(i - 1)
    }

    pub fn add(self, rhs: Expr) -> Self {
        Expr::Add(Box::new(self), Box::new(rhs))
    }

    pub fn sub(self, rhs: Expr) -> Self {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }

    pub fn mul(self, rhs: Expr) -> Self {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }

    pub fn pow(self, exponent: f64) -> Self {
        Expr::Pow(Box::new(self), exponent)
    }

    pub fn abs(self) -> Self {
        Expr::Abs(Box::new(self))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_with(&|i| x[i])
    }

    /// Evaluates with coordinates supplied by `coord`, used to evaluate a boundary
    /// function on a point with one axis removed.
    pub fn eval_with(&self, coord: &dyn Fn(usize) -> f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Coord(i) => coord(*i),
            Expr::Add(a, b) => a.eval_with(coord) + b.eval_with(coord),
            Expr::Sub(a, b) => a.eval_with(coord) - b.eval_with(coord),
            Expr::Mul(a, b) => a.eval_with(coord) * b.eval_with(coord),
            Expr::Pow(a, p) => a.eval_with(coord).powf(*p),
            Expr::Abs(a) => a.eval_with(coord).abs(),
        }
    }

    /// Number of coordinates the expression needs (highest index used + 1).
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Coord(i) => i + 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.arity().max(b.arity()),
            Expr::Pow(a, _) | Expr::Abs(a) => a.arity(),
        }
    }

    /// Returns `(weights, offset)` if the expression is affine in `dim` coordinates.
    pub fn affine_coefficients(&self, dim: usize) -> Option<(Vec<f64>, f64)> {
        match self {
            Expr::Const(c) => Some((vec![0.0; dim], *c)),
            Expr::Coord(i) => {
                if *i >= dim {
                    return None;
                }
                let mut w = vec![0.0; dim];
                w[*i] = 1.0;
                Some((w, 0.0))
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let (wa, ca) = a.affine_coefficients(dim)?;
                let (wb, cb) = b.affine_coefficients(dim)?;
                let s = if matches!(self, Expr::Sub(..)) { -1.0 } else { 1.0 };
                let w = wa.iter().zip(&wb).map(|(p, q)| p + s * q).collect();
                Some((w, ca + s * cb))
            }
            Expr::Mul(a, b) => {
                let (wa, ca) = a.affine_coefficients(dim)?;
                let (wb, cb) = b.affine_coefficients(dim)?;
                if wa.iter().all(|&v| v == 0.0) {
                    Some((wb.iter().map(|v| v * ca).collect(), ca * cb))
                } else if wb.iter().all(|&v| v == 0.0) {
                    Some((wa.iter().map(|v| v * cb).collect(), ca * cb))
                } else {
                    None
                }
            }
            Expr::Pow(a, p) => {
                let (w, c) = a.affine_coefficients(dim)?;
                if *p == 1.0 {
                    Some((w, c))
                } else if w.iter().all(|&v| v == 0.0) {
                    Some((w, c.powf(*p)))
                } else {
                    None
                }
            }
            Expr::Abs(a) => {
                let (w, c) = a.affine_coefficients(dim)?;
                w.iter().all(|&v| v == 0.0).then(|| (w, c.abs()))
            }
        }
    }

    pub fn parse(src: &str) -> Result<Self> {
        let tokens = tokenize(src);
        let mut pos = 0;
        let expr = parse_tokens(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(Error::Parse(format!(
                "trailing input after expression: `{}`",
                tokens[pos..].join(" ")
            )));
        }
        Ok(expr)
    }
}

fn tokenize(src: &str) -> Vec<String> {
    src.replace('(', " ( ")
        .replace(')', " ) ")
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

fn parse_tokens(tokens: &[String], pos: &mut usize) -> Result<Expr> {
    let tok = tokens
        .get(*pos)
        .ok_or_else(|| Error::Parse("unexpected end of expression".into()))?;
    *pos += 1;
    match tok.as_str() {
        "(" => {
            let op = tokens
                .get(*pos)
                .ok_or_else(|| Error::Parse("missing operator after `(`".into()))?
                .clone();
            *pos += 1;
            let mut args = Vec::new();
            while tokens.get(*pos).map(String::as_str) != Some(")") {
                if *pos >= tokens.len() {
                    return Err(Error::Parse("unbalanced parentheses".into()));
                }
                args.push(parse_tokens(tokens, pos)?);
            }
            *pos += 1;
            build(&op, args)
        }
        ")" => Err(Error::Parse("unexpected `)`".into())),
        atom => parse_atom(atom),
    }
}

fn build(op: &str, mut args: Vec<Expr>) -> Result<Expr> {
    let arity_err = |want: &str| {
        Err(Error::Parse(format!(
            "operator `{op}` takes {want} operands, got {}",
            args.len()
        )))
    };
    match op {
        "+" | "*" => {
            if args.len() < 2 {
                return arity_err("at least 2");
            }
            let mut it = args.into_iter();
            let first = it.next().unwrap();
            Ok(it.fold(first, |acc, e| {
                if op == "+" {
                    acc.add(e)
                } else {
                    acc.mul(e)
                }
            }))
        }
        "-" => match args.len() {
            1 => Ok(Expr::Const(0.0).sub(args.pop().unwrap())),
            2 => {
                let b = args.pop().unwrap();
                Ok(args.pop().unwrap().sub(b))
            }
            _ => arity_err("1 or 2"),
        },
        "^" => {
            if args.len() != 2 {
                return arity_err("2");
            }
            match args.pop().unwrap() {
                Expr::Const(p) => Ok(args.pop().unwrap().pow(p)),
                _ => Err(Error::Parse("exponent of `^` must be a number".into())),
            }
        }
        "abs" => {
            if args.len() != 1 {
                return arity_err("1");
            }
            Ok(args.pop().unwrap().abs())
        }
        other => Err(Error::Parse(format!("unknown operator `{other}`"))),
    }
}

fn parse_atom(atom: &str) -> Result<Expr> {
    if let Some(idx) = atom.strip_prefix('x') {
        return match idx.parse::<usize>() {
            Ok(i) if i >= 1 => Ok(Expr::Coord(i - 1)),
            _ => Err(Error::Parse(format!("bad coordinate `{atom}`"))),
        };
    }
    atom.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Expr::Const)
        .ok_or_else(|| Error::Parse(format!("bad atom `{atom}`")))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Coord(i) => write!(f, "x{}", i + 1),
            Expr::Add(a, b) => write!(f, "(+ {a} {b})"),
            Expr::Sub(a, b) => write!(f, "(- {a} {b})"),
            Expr::Mul(a, b) => write!(f, "(* {a} {b})"),
            Expr::Pow(a, p) => write!(f, "(^ {a} {p})"),
            Expr::Abs(a) => write!(f, "(abs {a})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_nary_and_unary() {
        let e = Expr::parse("(+ 1 x1 (* 2 x2))").unwrap();
        assert_eq!(e.eval(&[0.5, 0.25]), 2.0);
        let neg = Expr::parse("(- x1)").unwrap();
        assert_eq!(neg.eval(&[3.0]), -3.0);
    }

    #[test]
    fn parse_errors() {
        for bad in ["(+ 1)", "(foo 1 2)", "(^ x1 x2)", "(+ 1 2", "x0", "1 2", ")", "nan"] {
            assert!(Expr::parse(bad).is_err(), "{bad} should fail");
        }
    }

    #[test]
    fn affine_detection() {
        let h = Expr::parse("(- 0.75 (* 0.6 x1))").unwrap();
        let (w, c) = h.affine_coefficients(1).unwrap();
        assert_eq!(w, vec![-0.6]);
        assert_eq!(c, 0.75);
        assert!(Expr::parse("(^ x1 2)").unwrap().affine_coefficients(1).is_none());
        assert!(Expr::parse("x2").unwrap().affine_coefficients(1).is_none());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-10.0f64..10.0).prop_map(Expr::Const),
            (0usize..3).prop_map(Expr::Coord),
        ];
        leaf.prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a.add(b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a.sub(b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a.mul(b)),
                (inner.clone(), 0.5f64..3.0).prop_map(|(a, p)| a.pow(p)),
                inner.prop_map(Expr::abs),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_parse_roundtrip(e in arb_expr()) {
            let back = Expr::parse(&e.to_string()).unwrap();
            prop_assert_eq!(back, e);
        }
    }
}

//! Expressions over `th1..thm`, `x1..xd`, `eps` and `pi` with `+ − * /`,
//! unary minus and `sin`, `cos`, `exp`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::base_flow::{BaseFlow, BasePoint};
use crate::cocycle::{System, VectorField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Theta(usize),
    X(usize),
    Eps,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number '{text}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [Tok],
    pos: usize,
    m: usize,
    d: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.atom()
    }

    fn index(&self, name: &str, prefix: &str, max: usize) -> Result<Option<usize>> {
        let Some(rest) = name.strip_prefix(prefix) else {
            return Ok(None);
        };
        let Ok(k) = rest.parse::<usize>() else {
            return Ok(None);
        };
        if k == 0 || k > max {
            return Err(Error::Parse(format!("'{name}' out of range (1..={max})")));
        }
        Ok(Some(k - 1))
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self.peek().cloned().ok_or_else(|| Error::Parse("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(Error::Parse("missing ')'".into()));
                }
                Ok(e)
            }
            Tok::Op(c) => Err(Error::Parse(format!("unexpected '{c}'"))),
            Tok::Ident(name) => {
                if let Some(k) = self.index(&name, "th", self.m)? {
                    return Ok(Expr::Theta(k));
                }
                if let Some(k) = self.index(&name, "x", self.d)? {
                    return Ok(Expr::X(k));
                }
                match name.as_str() {
                    "eps" => Ok(Expr::Eps),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "sin" | "cos" | "exp" => {
                        if !self.eat('(') {
                            return Err(Error::Parse(format!("'{name}' needs '('")));
                        }
                        let arg = Box::new(self.expr()?);
                        if !self.eat(')') {
                            return Err(Error::Parse("missing ')'".into()));
                        }
                        Ok(match name.as_str() {
                            "sin" => Expr::Sin(arg),
                            "cos" => Expr::Cos(arg),
                            _ => Expr::Exp(arg),
                        })
                    }
                    _ => Err(Error::Parse(format!("unknown identifier '{name}'"))),
                }
            }
        }
    }
}

impl Expr {
    /// Parses with `m` angles and `d` state components in scope.
    pub fn parse(src: &str, m: usize, d: usize) -> Result<Expr> {
        let toks = lex(src)?;
        let mut p = Parser { toks: &toks, pos: 0, m, d };
        let e = p.expr()?;
        if p.pos != toks.len() {
            return Err(Error::Parse(format!("trailing input in '{src}'")));
        }
        Ok(e)
    }

    pub fn eval(&self, th: &[f64], x: &[f64], eps: f64) -> f64 {
        use Expr::*;
        match self {
            Num(v) => *v,
            Theta(k) => th[*k],
            X(k) => x[*k],
            Eps => eps,
            Neg(a) => -a.eval(th, x, eps),
            Add(a, b) => a.eval(th, x, eps) + b.eval(th, x, eps),
            Sub(a, b) => a.eval(th, x, eps) - b.eval(th, x, eps),
            Mul(a, b) => a.eval(th, x, eps) * b.eval(th, x, eps),
            Div(a, b) => a.eval(th, x, eps) / b.eval(th, x, eps),
            Sin(a) => a.eval(th, x, eps).sin(),
            Cos(a) => a.eval(th, x, eps).cos(),
            Exp(a) => a.eval(th, x, eps).exp(),
        }
    }

    /// Symbolic `∂/∂x_k`.
    pub fn diff_x(&self, k: usize) -> Expr {
        use Expr::*;
        let b = Box::new;
        match self {
            Num(_) | Theta(_) | Eps => Num(0.0),
            X(j) => Num(if *j == k { 1.0 } else { 0.0 }),
            Neg(a) => Neg(b(a.diff_x(k))),
            Add(p, q) => Add(b(p.diff_x(k)), b(q.diff_x(k))),
            Sub(p, q) => Sub(b(p.diff_x(k)), b(q.diff_x(k))),
            Mul(p, q) => Add(b(Mul(b(p.diff_x(k)), q.clone())), b(Mul(p.clone(), b(q.diff_x(k))))),
            Div(p, q) => Div(
                b(Sub(b(Mul(b(p.diff_x(k)), q.clone())), b(Mul(p.clone(), b(q.diff_x(k)))))),
                b(Mul(q.clone(), q.clone())),
            ),
            Sin(a) => Mul(b(Cos(a.clone())), b(a.diff_x(k))),
            Cos(a) => Neg(b(Mul(b(Sin(a.clone())), b(a.diff_x(k))))),
            Exp(a) => Mul(b(Exp(a.clone())), b(a.diff_x(k))),
        }
    }
}

/// A vector field given componentwise by expressions.
#[derive(Debug, Clone)]
pub struct ExprField {
    components: Vec<Expr>,
    jacobian: Vec<Vec<Expr>>,
    origin_equilibrium: bool,
}

impl ExprField {
    pub fn parse(components: &[String], m: usize) -> Result<Self> {
        let d = components.len();
        if d == 0 {
            return Err(Error::Parse("field needs at least one component".into()));
        }
        let components = components.iter().map(|c| Expr::parse(c, m, d)).collect::<Result<Vec<_>>>()?;
        let jacobian = components.iter().map(|c| (0..d).map(|k| c.diff_x(k)).collect()).collect();
        // f(p, 0) = 0 checked on a sample of base points and ε values
        let zero = vec![0.0; d];
        let origin_equilibrium = (0..16).all(|i| {
            let th: Vec<f64> = (0..m).map(|k| 0.37 * (i * (k + 2)) as f64 + 0.11 * k as f64).collect();
            components.iter().all(|c| [0.0, 0.05, 0.3].iter().all(|&e| c.eval(&th, &zero, e) == 0.0))
        });
        Ok(Self {
            components,
            jacobian,
            origin_equilibrium,
        })
    }
}

impl VectorField for ExprField {
    fn dim(&self) -> usize {
        self.components.len()
    }

    fn eval(&self, p: &BasePoint, x: &DVector<f64>, eps: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.components.len(),
            self.components.iter().map(|c| c.eval(p.angles(), x.as_slice(), eps)),
        )
    }

    fn jacobian_x(&self, p: &BasePoint, x: &DVector<f64>, eps: f64) -> DMatrix<f64> {
        let d = self.components.len();
        DMatrix::from_fn(d, d, |i, j| self.jacobian[i][j].eval(p.angles(), x.as_slice(), eps))
    }

    fn origin_is_equilibrium(&self) -> bool {
        self.origin_equilibrium
    }
}

/// A system from frequencies and component expressions.
pub fn inline_system(frequencies: Vec<f64>, components: &[String]) -> Result<System> {
    let m = frequencies.len();
    let base = BaseFlow::new(frequencies)?;
    let field = ExprField::parse(components, m)?;
    Ok(System::new(base, Arc::new(field)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks;
    use proptest::prelude::*;

    #[test]
    fn precedence_and_associativity() {
        let e = |s: &str| Expr::parse(s, 1, 1).unwrap().eval(&[0.0], &[0.0], 0.0);
        assert_eq!(e("1 + 2 * 3"), 7.0);
        assert_eq!(e("(1 + 2) * 3"), 9.0);
        assert_eq!(e("8 / 4 / 2"), 1.0);
        assert_eq!(e("1 - 2 - 3"), -4.0);
        assert_eq!(e("-2 * -3"), 6.0);
        assert_eq!(e("2.5e-1 * 4"), 1.0);
        assert_eq!(e("exp(0) + cos(0) + sin(0)"), 2.0);
    }

    #[test]
    fn variables_resolve() {
        let e = Expr::parse("x2 * th1 - eps / x1", 1, 2).unwrap();
        assert_eq!(e.eval(&[3.0], &[2.0, 5.0], 4.0), 13.0);
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "1 +", "(1", "x3", "th0", "foo(1)", "sin 1", "1 $ 2", "2 3", "th2"] {
            assert!(matches!(Expr::parse(bad, 1, 2), Err(Error::Parse(_))), "{bad}");
        }
    }

    #[test]
    fn b2_inline_matches_shipped() {
        let sys = inline_system(
            vec![1.0, std::f64::consts::SQRT_2],
            &[
                "-x1*x1*x1*(1 + 0.2*cos(th2)) - x1*x1*x2".into(),
                "cos(th1)*x1 - x2 + x1*x1".into(),
            ],
        )
        .unwrap();
        let shipped = benchmarks::b2();
        assert!(sys.field.origin_is_equilibrium());
        for (a, b, x1, x2) in [(0.3, 1.2, 0.4, -0.2), (5.0, 2.0, -1.0, 0.7)] {
            let p = BasePoint::new(vec![a, b]);
            let x = DVector::from_vec(vec![x1, x2]);
            assert!((sys.field.eval(&p, &x, 0.1) - shipped.field.eval(&p, &x, 0.1)).norm() < 1e-14);
            assert!((sys.field.jacobian_x(&p, &x, 0.1) - shipped.field.jacobian_x(&p, &x, 0.1)).norm() < 1e-13);
        }
        let forced = inline_system(vec![1.0], &["-x1 + cos(th1)".into()]).unwrap();
        assert!(!forced.field.origin_is_equilibrium());
    }

    proptest! {
        #[test]
        fn symbolic_derivative_matches_differences(a in -1.5f64..1.5, b in -1.5f64..1.5, th in 0.0f64..std::f64::consts::TAU) {
            let e = Expr::parse("sin(x1*x2) / (2 + cos(th1*x1)) + exp(-x2)*eps", 1, 2).unwrap();
            for k in 0..2 {
                let d = e.diff_x(k);
                let h = 1e-6;
                let mut xp = [a, b];
                let mut xm = [a, b];
                xp[k] += h;
                xm[k] -= h;
                let fd = (e.eval(&[th], &xp, 0.3) - e.eval(&[th], &xm, 0.3)) / (2.0 * h);
                prop_assert!((d.eval(&[th], &[a, b], 0.3) - fd).abs() < 1e-7);
            }
        }
    }
}

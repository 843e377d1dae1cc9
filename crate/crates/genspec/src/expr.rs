//! A tiny arithmetic expression language for user-defined SDE systems:
//! variables `x`, `y` (or `x1..xd` in general), the parameter `eps`, the
//! constant `pi`, functions sin/cos/exp/sqrt, numeric literals, and the
//! operators + - * / with parentheses and unary minus. Expressions are
//! parsed once into an AST and evaluated per grid point.

use std::fmt;

use crate::error::{GenspecError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Const(f64),
    /// Index into the coordinate vector.
    Var(usize),
    Eps,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A compiled scalar expression in the coordinates and `eps`.
#[derive(Debug, Clone)]
pub struct Expr {
    root: Node,
    source: String,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    /// Parse an expression over `dim` coordinates. The variables are `x`
    /// and `y` for dim <= 2 plus the general names `x1, x2, ...`.
    pub fn parse(source: &str, dim: usize) -> Result<Expr> {
        let tokens = tokenize(source)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            dim,
            source,
        };
        let root = p.expression()?;
        if p.pos != p.tokens.len() {
            return Err(p.error(format!("unexpected trailing input at token {}", p.pos)));
        }
        Ok(Expr {
            root,
            source: source.to_string(),
        })
    }

    pub fn eval(&self, z: &[f64], eps: f64) -> f64 {
        eval_node(&self.root, z, eps)
    }
}

fn eval_node(n: &Node, z: &[f64], eps: f64) -> f64 {
    match n {
        Node::Const(c) => *c,
        Node::Var(i) => z[*i],
        Node::Eps => eps,
        Node::Neg(a) => -eval_node(a, z, eps),
        Node::Add(a, b) => eval_node(a, z, eps) + eval_node(b, z, eps),
        Node::Sub(a, b) => eval_node(a, z, eps) - eval_node(b, z, eps),
        Node::Mul(a, b) => eval_node(a, z, eps) * eval_node(b, z, eps),
        Node::Div(a, b) => eval_node(a, z, eps) / eval_node(b, z, eps),
        Node::Call(f, a) => f.apply(eval_node(a, z, eps)),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
}

fn tokenize(s: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let bytes: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit()
                        || bytes[i] == '.'
                        || bytes[i] == 'e'
                        || bytes[i] == 'E'
                        || ((bytes[i] == '+' || bytes[i] == '-')
                            && i > start
                            && (bytes[i - 1] == 'e' || bytes[i - 1] == 'E')))
                {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                let v: f64 = text
                    .parse()
                    .map_err(|_| GenspecError::Expr(format!("bad number literal `{text}`")))?;
                out.push(Token::Num(v));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                out.push(Token::Ident(bytes[start..i].iter().collect()));
            }
            other => {
                return Err(GenspecError::Expr(format!(
                    "unexpected character `{other}` in expression"
                )))
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    dim: usize,
    source: &'a str,
}

impl<'a> Parser<'a> {
    fn error(&self, msg: String) -> GenspecError {
        GenspecError::Expr(format!("{msg} in `{}`", self.source))
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Token) -> Result<()> {
        match self.next() {
            Some(got) if got == t => Ok(()),
            other => Err(self.error(format!("expected {t:?}, got {other:?}"))),
        }
    }

    fn expression(&mut self) -> Result<Node> {
        let mut node = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    node = Node::Add(Box::new(node), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    node = Node::Sub(Box::new(node), Box::new(self.term()?));
                }
                _ => return Ok(node),
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut node = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    node = Node::Mul(Box::new(node), Box::new(self.factor()?));
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    node = Node::Div(Box::new(node), Box::new(self.factor()?));
                }
                _ => return Ok(node),
            }
        }
    }

    fn factor(&mut self) -> Result<Node> {
        match self.next() {
            Some(Token::Minus) => Ok(Node::Neg(Box::new(self.factor()?))),
            Some(Token::Plus) => self.factor(),
            Some(Token::Num(v)) => Ok(Node::Const(v)),
            Some(Token::LParen) => {
                let inner = self.expression()?;
                self.expect(Token::RParen)?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => self.ident(name),
            other => Err(self.error(format!("expected a factor, got {other:?}"))),
        }
    }

    fn ident(&mut self, name: String) -> Result<Node> {
        if self.peek() == Some(&Token::LParen) {
            let func = match name.as_str() {
                "sin" => Func::Sin,
                "cos" => Func::Cos,
                "exp" => Func::Exp,
                "sqrt" => Func::Sqrt,
                other => return Err(self.error(format!("unknown function `{other}`"))),
            };
            self.pos += 1;
            let arg = self.expression()?;
            self.expect(Token::RParen)?;
            return Ok(Node::Call(func, Box::new(arg)));
        }
        match name.as_str() {
            "pi" => Ok(Node::Const(std::f64::consts::PI)),
            "eps" => Ok(Node::Eps),
            "x" if self.dim >= 1 => Ok(Node::Var(0)),
            "y" if self.dim >= 2 => Ok(Node::Var(1)),
            other => {
                if let Some(rest) = other.strip_prefix('x') {
                    if let Ok(k) = rest.parse::<usize>() {
                        if k >= 1 && k <= self.dim {
                            return Ok(Node::Var(k - 1));
                        }
                    }
                }
                Err(self.error(format!("unknown identifier `{other}`")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parses_arithmetic_with_precedence() {
        let e = Expr::parse("1 + 2 * 3 - 4 / 2", 2).unwrap();
        assert_relative_eq!(e.eval(&[0.0, 0.0], 1.0), 5.0);
    }

    #[test]
    fn variables_functions_and_eps() {
        let e = Expr::parse("sin(y) + cos(x) / sqrt(eps)", 2).unwrap();
        let v = e.eval(&[0.5, 1.25], 0.01);
        assert_relative_eq!(v, 1.25f64.sin() + 0.5f64.cos() / 0.1, epsilon = 1e-14);
    }

    #[test]
    fn unary_minus_and_pi() {
        let e = Expr::parse("-x * (pi - 2)", 1).unwrap();
        assert_relative_eq!(
            e.eval(&[3.0], 1.0),
            -3.0 * (std::f64::consts::PI - 2.0),
            epsilon = 1e-14
        );
    }

    #[test]
    fn scientific_literals() {
        let e = Expr::parse("1e-3 + 2.5E+2", 1).unwrap();
        assert_relative_eq!(e.eval(&[0.0], 1.0), 250.001, epsilon = 1e-12);
    }

    #[test]
    fn indexed_variables() {
        let e = Expr::parse("x1 * x2 - x1", 2).unwrap();
        assert_relative_eq!(e.eval(&[2.0, 5.0], 1.0), 8.0);
    }

    #[test]
    fn rejects_unknown_identifiers_and_garbage() {
        assert!(Expr::parse("tan(x)", 2).is_err());
        assert!(Expr::parse("z + 1", 2).is_err());
        assert!(Expr::parse("1 +", 2).is_err());
        assert!(Expr::parse("(1 + 2", 2).is_err());
        assert!(Expr::parse("1 ; 2", 2).is_err());
        assert!(Expr::parse("y", 1).is_err());
    }

    #[test]
    fn crommelin_drift_roundtrip() {
        let e = Expr::parse("(sin(x) - y) / eps", 2).unwrap();
        assert_relative_eq!(
            e.eval(&[std::f64::consts::PI / 2.0, 0.0], 1e-3),
            1000.0,
            epsilon = 1e-9
        );
    }
}

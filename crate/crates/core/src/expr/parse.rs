//! Recursive-descent parser.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 't' | 'x' | 'v' | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus and is right-associative. Numbers are
//! integers or finite decimals and are kept exact. Positions in errors are
//! 0-based character offsets.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::number::parse_rational;

use super::{BinOp, Expr, Func, Var};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

fn err(position: usize, message: impl Into<String>) -> Error {
    Error::Parse { position, message: message.into() }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            Tok::Num(chars[start..i].iter().collect())
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else {
            i += 1;
            match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => return Err(err(start, format!("unexpected character `{c}`"))),
            }
        };
        out.push((tok, start));
    }
    out.push((Tok::End, chars.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.unary()?;
            lhs = match (c, &lhs, &rhs) {
                // literal fractions such as `3/4` stay a single constant
                ('/', Expr::Const(_), Expr::Const(d)) if !d.is_zero() => Expr::div(lhs, rhs),
                ('*', ..) => Expr::Binary(BinOp::Mul, Box::new(lhs), Box::new(rhs)),
                _ => Expr::Binary(BinOp::Div, Box::new(lhs), Box::new(rhs)),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(match self.unary()? {
                Expr::Const(c) => Expr::Const(-c),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(text) => parse_rational(&text)
                .map(Expr::Const)
                .map_err(|_| err(at, format!("malformed number `{text}`"))),
            Tok::Ident(name) => {
                match name.as_str() {
                    "t" => return Ok(Expr::Var(Var::T)),
                    "x" => return Ok(Expr::Var(Var::X)),
                    "v" => return Ok(Expr::Var(Var::V)),
                    _ => {}
                }
                let Some(func) = Func::from_name(&name) else {
                    return Err(err(at, format!("unknown identifier `{name}` (expected t, x, v or a function)")));
                };
                let open = self.offset();
                if self.bump() != Tok::LParen {
                    return Err(err(open, format!("expected `(` after `{name}`")));
                }
                let arg = self.expr()?;
                self.expect_close()?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_close()?;
                Ok(inner)
            }
            Tok::Op(c) => Err(err(at, format!("unexpected operator `{c}`"))),
            Tok::RParen => Err(err(at, "unexpected `)`")),
            Tok::End => Err(err(at, "unexpected end of input")),
        }
    }

    fn expect_close(&mut self) -> Result<()> {
        let at = self.offset();
        match self.bump() {
            Tok::RParen => Ok(()),
            _ => Err(err(at, "expected `)`")),
        }
    }
}

pub fn parse(source: &str) -> Result<Expr> {
    let mut p = Parser { toks: tokenize(source)?, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(err(p.offset(), "unexpected trailing input"));
    }
    Ok(e)
}

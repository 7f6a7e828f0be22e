//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr   := term (("+"|"-") term)* ;
//! term   := factor (("*"|"/") factor)* ;
//! factor := unary ("^" integer)? ;
//! unary  := "-" unary | atom ;
//! atom   := number | ident | func "(" expr ")" | "(" expr ")" ;
//! ```
//!
//! Exponents accept an optional leading minus (`x^-1`).

use super::{BinaryOp, Coord, Expr, UnaryOp};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownFunction(String),
    IndexOutOfRange { name: String, n: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{}", describe(.kind, *.offset))]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

fn describe(kind: &ParseErrorKind, offset: usize) -> String {
    match kind {
        ParseErrorKind::Syntax(msg) => format!("syntax error at byte {offset}: {msg}"),
        ParseErrorKind::UnknownFunction(name) => {
            format!("unknown function `{name}` at byte {offset}")
        }
        ParseErrorKind::IndexOutOfRange { name, n } => {
            format!("index out of range: `{name}` at byte {offset} (dimension {n})")
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Int(i64),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    /// Returns the next token and its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let Some(c) = self.peek_char() else {
            return Ok((Tok::End, start));
        };
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            self.pos += 1;
            return Ok((tok, start));
        }
        if c.is_ascii_digit() || c == '.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let len = self.src[start..]
                .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                .unwrap_or(self.src.len() - start);
            self.pos += len;
            return Ok((Tok::Ident(self.src[start..self.pos].to_string()), start));
        }
        Err(ParseError {
            offset: start,
            kind: ParseErrorKind::Syntax(format!("unexpected character `{c}`")),
        })
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize), ParseError> {
        let bytes = self.src.as_bytes();
        let mut i = start;
        let digits = |i: &mut usize| {
            let s = *i;
            while *i < bytes.len() && bytes[*i].is_ascii_digit() {
                *i += 1;
            }
            *i - s
        };
        let int_digits = digits(&mut i);
        let mut frac_digits = 0;
        let mut is_int = true;
        if i < bytes.len() && bytes[i] == b'.' {
            is_int = false;
            i += 1;
            frac_digits = digits(&mut i);
        }
        if int_digits + frac_digits == 0 {
            return Err(ParseError {
                offset: start,
                kind: ParseErrorKind::Syntax("malformed number".into()),
            });
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if digits(&mut j) == 0 {
                return Err(ParseError {
                    offset: i,
                    kind: ParseErrorKind::Syntax("malformed exponent".into()),
                });
            }
            is_int = false;
            i = j;
        }
        let text = &self.src[start..i];
        self.pos = i;
        let value: f64 = text.parse().map_err(|_| ParseError {
            offset: start,
            kind: ParseErrorKind::Syntax(format!("malformed number `{text}`")),
        })?;
        if is_int {
            if let Ok(k) = text.parse::<i64>() {
                return Ok((Tok::Int(k), start));
            }
        }
        Ok((Tok::Num(value), start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
    n: usize,
}

pub(super) fn parse(text: &str, n: usize) -> Result<Expr, ParseError> {
    let mut lexer = Lexer { src: text, pos: 0 };
    let (tok, at) = lexer.next()?;
    if tok == Tok::End {
        return Err(ParseError {
            offset: 0,
            kind: ParseErrorKind::Syntax("empty expression".into()),
        });
    }
    let mut p = Parser { lexer, tok, at, n };
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.unexpected());
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ParseError> {
        let (tok, at) = self.lexer.next()?;
        self.tok = tok;
        self.at = at;
        Ok(())
    }

    fn unexpected(&self) -> ParseError {
        let what = match &self.tok {
            Tok::End => "end of input".to_string(),
            t => format!("{t:?}"),
        };
        ParseError {
            offset: self.at,
            kind: ParseErrorKind::Syntax(format!("unexpected {what}")),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Expr::raw_binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.tok {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.factor()?;
            lhs = Expr::raw_binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.unary()?;
        if self.tok != Tok::Caret {
            return Ok(base);
        }
        self.bump()?;
        let negative = if self.tok == Tok::Minus {
            self.bump()?;
            true
        } else {
            false
        };
        let Tok::Int(k) = self.tok else {
            return Err(ParseError {
                offset: self.at,
                kind: ParseErrorKind::Syntax("exponent must be an integer".into()),
            });
        };
        let k = if negative { -k } else { k };
        let k = i32::try_from(k).map_err(|_| ParseError {
            offset: self.at,
            kind: ParseErrorKind::Syntax("exponent out of range".into()),
        })?;
        self.bump()?;
        Ok(Expr::raw_pow(base, k))
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.tok == Tok::Minus {
            self.bump()?;
            let inner = self.unary()?;
            return Ok(Expr::raw_unary(UnaryOp::Neg, inner));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(x) => {
                self.bump()?;
                Ok(Expr::constant(x))
            }
            Tok::Int(k) => {
                self.bump()?;
                Ok(Expr::constant(k as f64))
            }
            Tok::LParen => {
                self.bump()?;
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let at = self.at;
                self.bump()?;
                if self.tok == Tok::LParen {
                    let op = UnaryOp::function(&name).ok_or(ParseError {
                        offset: at,
                        kind: ParseErrorKind::UnknownFunction(name.clone()),
                    })?;
                    self.bump()?;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::raw_unary(op, arg));
                }
                if UnaryOp::function(&name).is_some() {
                    return Err(ParseError {
                        offset: self.at,
                        kind: ParseErrorKind::Syntax(format!("expected `(` after `{name}`")),
                    });
                }
                self.ident(name, at)
            }
            _ => Err(self.unexpected()),
        }
    }

    fn ident(&self, name: String, at: usize) -> Result<Expr, ParseError> {
        if name == "z" {
            return Ok(Expr::z());
        }
        let indexed = |prefix: char| -> Option<usize> {
            let rest = name.strip_prefix(prefix)?;
            if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            rest.parse().ok()
        };
        let coord = match (indexed('q'), indexed('v')) {
            (Some(i), _) => Some((i, Coord::Q as fn(usize) -> Coord)),
            (_, Some(i)) => Some((i, Coord::V as fn(usize) -> Coord)),
            _ => None,
        };
        match coord {
            Some((i, make)) => {
                if i == 0 || i > self.n {
                    Err(ParseError {
                        offset: at,
                        kind: ParseErrorKind::IndexOutOfRange { name, n: self.n },
                    })
                } else {
                    Ok(Expr::coord(make(i - 1)))
                }
            }
            None => Ok(Expr::param(name)),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.tok != Tok::RParen {
            return Err(ParseError {
                offset: self.at,
                kind: ParseErrorKind::Syntax("expected `)`".into()),
            });
        }
        self.bump()
    }
}

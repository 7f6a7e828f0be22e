//! Canonical serializer. Parentheses are emitted only where the grammar
//! needs them to reproduce the same tree, so `parse(print(e)) == e` for
//! every parsed `e`.

use super::{BinaryOp, Expr, Node, UnaryOp};
use std::fmt;

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const POWER: u8 = 3;
const UNARY: u8 = 4;
const ATOM: u8 = 5;

fn level(e: &Expr) -> u8 {
    match e.node() {
        Node::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => SUM,
        Node::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => PRODUCT,
        Node::Pow(..) => POWER,
        Node::Unary(UnaryOp::Neg, _) => UNARY,
        Node::Const(c) if c.is_sign_negative() => UNARY,
        _ => ATOM,
    }
}

fn write_wrapped(e: &Expr, parens: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if parens {
        f.write_str("(")?;
        write_expr(e, f)?;
        f.write_str(")")
    } else {
        write_expr(e, f)
    }
}

fn write_const(c: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c.is_finite() {
        // Rust's shortest round-trip formatting never uses exponents, so the
        // output always lexes as a plain decimal.
        write!(f, "{c}")
    } else {
        write!(f, "({c})")
    }
}

pub(super) fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e.node() {
        Node::Const(c) => write_const(*c, f),
        Node::Coord(c) => write!(f, "{c}"),
        Node::Param(p) => f.write_str(p),
        Node::Unary(UnaryOp::Neg, a) => {
            f.write_str("-")?;
            write_wrapped(a, level(a) < UNARY, f)
        }
        Node::Unary(op, a) => {
            write!(f, "{}(", op.name())?;
            write_expr(a, f)?;
            f.write_str(")")
        }
        Node::Binary(op, a, b) => {
            let l = level(e);
            write_wrapped(a, level(a) < l, f)?;
            match op {
                BinaryOp::Add | BinaryOp::Sub => write!(f, " {} ", op.symbol())?,
                _ => write!(f, "{}", op.symbol())?,
            }
            write_wrapped(b, level(b) <= l, f)
        }
        Node::Pow(a, k) => {
            write_wrapped(a, level(a) < UNARY, f)?;
            write!(f, "^{k}")
        }
    }
}

//! Scalar expression language over the chart coordinates `(q, v, z)`.
//!
//! Every scalar field in the crate (Lagrangians, Hamiltonians, action
//! functions, one-form and vector-field components) is an [`Expr`]. The
//! module provides a parser for the textual grammar, a canonical printer,
//! exact symbolic differentiation with light simplification, and pointwise
//! evaluation of values, gradients and Hessians.
//!
//! Coordinates are written `q1..qn`, `v1..vn` and `z`. Any other identifier
//! that is not a function name is a named parameter, bound through a
//! [`ParamSet`] at evaluation time.

mod diff;
mod eval;
mod parse;
mod print;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

pub use eval::{EvalError, Gradient, Jet2, ParamSet, StatePoint};
pub use parse::{ParseError, ParseErrorKind};

/// A chart coordinate. Indices are zero-based; `Q(0)` prints as `q1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coord {
    Q(usize),
    V(usize),
    Z,
}

impl Coord {
    /// Position of the coordinate in the flat `(q, v, z)` ordering.
    pub fn index(self, n: usize) -> usize {
        match self {
            Coord::Q(i) => i,
            Coord::V(i) => n + i,
            Coord::Z => 2 * n,
        }
    }

    /// Inverse of [`Coord::index`].
    pub fn from_index(idx: usize, n: usize) -> Coord {
        if idx < n {
            Coord::Q(idx)
        } else if idx < 2 * n {
            Coord::V(idx - n)
        } else {
            Coord::Z
        }
    }

    /// All `2n + 1` coordinates in flat order.
    pub fn all(n: usize) -> impl Iterator<Item = Coord> {
        (0..2 * n + 1).map(move |k| Coord::from_index(k, n))
    }

    pub fn fits(self, n: usize) -> bool {
        match self {
            Coord::Q(i) | Coord::V(i) => i < n,
            Coord::Z => true,
        }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coord::Q(i) => write!(f, "q{}", i + 1),
            Coord::V(i) => write!(f, "v{}", i + 1),
            Coord::Z => f.write_str("z"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Tanh => "tanh",
        }
    }

    pub(crate) fn function(name: &str) -> Option<UnaryOp> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "tanh" => UnaryOp::Tanh,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

/// One node of the expression tree.
#[derive(Debug, PartialEq)]
pub enum Node {
    Const(f64),
    Coord(Coord),
    Param(String),
    Unary(UnaryOp, Expr),
    Binary(BinaryOp, Expr, Expr),
    Pow(Expr, i32),
}

/// Immutable, cheaply clonable expression tree.
///
/// Equality is structural. Subtrees are shared through `Arc`, so cloning
/// and building derivatives never deep-copies.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    fn from_node(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    /// Parses `text` for a system of dimension `n`.
    pub fn parse(text: &str, n: usize) -> Result<Expr, ParseError> {
        parse::parse(text, n)
    }

    pub fn constant(c: f64) -> Expr {
        Expr::from_node(Node::Const(c))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn coord(c: Coord) -> Expr {
        Expr::from_node(Node::Coord(c))
    }

    pub fn q(i: usize) -> Expr {
        Expr::coord(Coord::Q(i))
    }

    pub fn v(i: usize) -> Expr {
        Expr::coord(Coord::V(i))
    }

    pub fn z() -> Expr {
        Expr::coord(Coord::Z)
    }

    pub fn param(name: impl Into<String>) -> Expr {
        Expr::from_node(Node::Param(name.into()))
    }

    /// Raw constructors: build the node exactly as given, without folding.
    /// The parser uses these so that parsed trees mirror the source text.
    pub fn raw_unary(op: UnaryOp, a: Expr) -> Expr {
        Expr::from_node(Node::Unary(op, a))
    }

    pub fn raw_binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        Expr::from_node(Node::Binary(op, a, b))
    }

    pub fn raw_pow(a: Expr, k: i32) -> Expr {
        Expr::from_node(Node::Pow(a, k))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    // Simplifying constructors: constant folding and 0/1 elimination only.

    pub fn add(&self, other: &Expr) -> Expr {
        match (self.as_const(), other.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a + b),
            (Some(a), _) if a == 0.0 => other.clone(),
            (_, Some(b)) if b == 0.0 => self.clone(),
            _ => Expr::raw_binary(BinaryOp::Add, self.clone(), other.clone()),
        }
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        match (self.as_const(), other.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a - b),
            (Some(a), _) if a == 0.0 => other.neg(),
            (_, Some(b)) if b == 0.0 => self.clone(),
            _ => Expr::raw_binary(BinaryOp::Sub, self.clone(), other.clone()),
        }
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        match (self.as_const(), other.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a * b),
            (Some(a), _) if a == 0.0 => Expr::zero(),
            (_, Some(b)) if b == 0.0 => Expr::zero(),
            (Some(a), _) if a == 1.0 => other.clone(),
            (_, Some(b)) if b == 1.0 => self.clone(),
            (Some(a), _) if a == -1.0 => other.neg(),
            (_, Some(b)) if b == -1.0 => self.neg(),
            (Some(a), None) => match other.node() {
                // c1 * (c2 * x) -> (c1 c2) * x
                Node::Binary(BinaryOp::Mul, l, r) if l.as_const().is_some() => {
                    Expr::constant(a * l.as_const().unwrap_or(1.0)).mul(r)
                }
                _ => Expr::raw_binary(BinaryOp::Mul, self.clone(), other.clone()),
            },
            (None, Some(_)) => other.mul(self),
            _ => Expr::raw_binary(BinaryOp::Mul, self.clone(), other.clone()),
        }
    }

    pub fn div(&self, other: &Expr) -> Expr {
        match (self.as_const(), other.as_const()) {
            (Some(a), Some(b)) if b != 0.0 => Expr::constant(a / b),
            (Some(a), _) if a == 0.0 => Expr::zero(),
            (_, Some(b)) if b == 1.0 => self.clone(),
            _ => Expr::raw_binary(BinaryOp::Div, self.clone(), other.clone()),
        }
    }

    pub fn neg(&self) -> Expr {
        match self.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Unary(UnaryOp::Neg, inner) => inner.clone(),
            _ => Expr::raw_unary(UnaryOp::Neg, self.clone()),
        }
    }

    pub fn powi(&self, k: i32) -> Expr {
        match (self.as_const(), k) {
            (_, 0) => Expr::one(),
            (_, 1) => self.clone(),
            (Some(c), _) => Expr::constant(c.powi(k)),
            _ => Expr::raw_pow(self.clone(), k),
        }
    }

    pub fn apply(&self, op: UnaryOp) -> Expr {
        if op == UnaryOp::Neg {
            return self.neg();
        }
        Expr::raw_unary(op, self.clone())
    }

    pub fn sin(&self) -> Expr {
        self.apply(UnaryOp::Sin)
    }

    pub fn cos(&self) -> Expr {
        self.apply(UnaryOp::Cos)
    }

    pub fn exp(&self) -> Expr {
        self.apply(UnaryOp::Exp)
    }

    pub fn scale(&self, c: f64) -> Expr {
        Expr::constant(c).mul(self)
    }

    /// Sum of a sequence, folding zeros.
    pub fn sum<'a>(terms: impl IntoIterator<Item = &'a Expr>) -> Expr {
        terms.into_iter().fold(Expr::zero(), |acc, t| acc.add(t))
    }

    /// Exact partial derivative with respect to `var`.
    pub fn diff(&self, var: Coord) -> Expr {
        diff::differentiate(self, var)
    }

    /// Directional derivative `Σ_a X^a ∂_a self` for symbolic components.
    pub fn directional(&self, n: usize, components: &[Expr]) -> Expr {
        let terms: Vec<Expr> = Coord::all(n)
            .zip(components)
            .map(|(c, x)| x.mul(&self.diff(c)))
            .collect();
        Expr::sum(&terms)
    }

    /// Replaces every occurrence of parameter `name` by `with`.
    pub fn substitute_param(&self, name: &str, with: &Expr) -> Expr {
        self.map_leaves(&|node| match node {
            Node::Param(p) if p == name => Some(with.clone()),
            _ => None,
        })
    }

    /// Replaces every occurrence of coordinate `coord` by `with`.
    pub fn substitute_coord(&self, coord: Coord, with: &Expr) -> Expr {
        self.map_leaves(&|node| match node {
            Node::Coord(c) if *c == coord => Some(with.clone()),
            _ => None,
        })
    }

    fn map_leaves(&self, f: &dyn Fn(&Node) -> Option<Expr>) -> Expr {
        if let Some(e) = f(self.node()) {
            return e;
        }
        match self.node() {
            Node::Const(_) | Node::Coord(_) | Node::Param(_) => self.clone(),
            Node::Unary(op, a) => Expr::raw_unary(*op, a.map_leaves(f)),
            Node::Binary(op, a, b) => Expr::raw_binary(*op, a.map_leaves(f), b.map_leaves(f)),
            Node::Pow(a, k) => Expr::raw_pow(a.map_leaves(f), *k),
        }
    }

    /// Whether the tree mentions `coord` anywhere.
    pub fn mentions(&self, coord: Coord) -> bool {
        match self.node() {
            Node::Coord(c) => *c == coord,
            Node::Const(_) | Node::Param(_) => false,
            Node::Unary(_, a) | Node::Pow(a, _) => a.mentions(coord),
            Node::Binary(_, a, b) => a.mentions(coord) || b.mentions(coord),
        }
    }

    /// Names of all parameters referenced by the tree.
    pub fn params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_params(&mut out);
        out
    }

    fn collect_params(&self, out: &mut BTreeSet<String>) {
        match self.node() {
            Node::Param(p) => {
                out.insert(p.clone());
            }
            Node::Const(_) | Node::Coord(_) => {}
            Node::Unary(_, a) | Node::Pow(a, _) => a.collect_params(out),
            Node::Binary(_, a, b) => {
                a.collect_params(out);
                b.collect_params(out);
            }
        }
    }

    /// Largest coordinate index referenced, as a required dimension.
    pub fn required_dim(&self) -> usize {
        match self.node() {
            Node::Coord(Coord::Q(i)) | Node::Coord(Coord::V(i)) => i + 1,
            Node::Coord(Coord::Z) | Node::Const(_) | Node::Param(_) => 0,
            Node::Unary(_, a) | Node::Pow(a, _) => a.required_dim(),
            Node::Binary(_, a, b) => a.required_dim().max(b.required_dim()),
        }
    }

    /// Number of nodes in the tree (shared subtrees counted per use).
    pub fn size(&self) -> usize {
        match self.node() {
            Node::Const(_) | Node::Coord(_) | Node::Param(_) => 1,
            Node::Unary(_, a) | Node::Pow(a, _) => 1 + a.size(),
            Node::Binary(_, a, b) => 1 + a.size() + b.size(),
        }
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Expr {
        Expr::constant(c)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_expr(self, f)
    }
}

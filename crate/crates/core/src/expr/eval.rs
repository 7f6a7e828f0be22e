use super::{BinaryOp, Coord, Expr, Node, UnaryOp};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound parameter `{0}`")]
    UnboundParam(String),
    #[error("domain error: {op} of {arg} in `{node}`")]
    Domain {
        op: &'static str,
        arg: f64,
        node: String,
    },
    #[error("division by zero in `{node}`")]
    DivisionByZero { node: String },
    #[error("non-finite value in `{node}`")]
    NonFinite { node: String },
    #[error("coordinate {coord} outside a point of dimension {n}")]
    CoordOutOfRange { coord: Coord, n: usize },
    #[error("invalid state point: {0}")]
    InvalidPoint(String),
}

/// Named real parameters (`gam`, `m`, `g`, ...).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamSet(BTreeMap<String, f64>);

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set from pairs; later duplicates are rejected.
    pub fn from_pairs<'a>(
        pairs: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<Self, EvalError> {
        let mut set = ParamSet::new();
        for (k, v) in pairs {
            set.bind(k, v)?;
        }
        Ok(set)
    }

    /// Binds `name`; fails if it is already bound or `value` is not finite.
    pub fn bind(&mut self, name: &str, value: f64) -> Result<(), EvalError> {
        if !value.is_finite() {
            return Err(EvalError::NonFinite {
                node: name.to_string(),
            });
        }
        if self.0.contains_key(name) {
            return Err(EvalError::InvalidPoint(format!(
                "parameter `{name}` bound twice"
            )));
        }
        self.0.insert(name.to_string(), value);
        Ok(())
    }

    /// Builder-style bind for literals known to be valid.
    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Union of two sets. A name bound in both must carry the same value.
    pub fn merged(&self, other: &ParamSet) -> Result<ParamSet, String> {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            match out.0.get(k) {
                Some(old) if *old != v => {
                    return Err(format!("parameter `{k}` bound to both {old} and {v}"))
                }
                _ => {
                    out.0.insert(k.to_string(), v);
                }
            }
        }
        Ok(out)
    }
}

/// A point `(q, v, z)` of the global chart, stored flat as
/// `[q1..qn, v1..vn, z]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatePoint {
    n: usize,
    coords: Vec<f64>,
}

impl StatePoint {
    pub fn new(q: &[f64], v: &[f64], z: f64) -> Result<Self, EvalError> {
        if q.len() != v.len() {
            return Err(EvalError::InvalidPoint(format!(
                "q has {} entries but v has {}",
                q.len(),
                v.len()
            )));
        }
        let mut coords = Vec::with_capacity(2 * q.len() + 1);
        coords.extend_from_slice(q);
        coords.extend_from_slice(v);
        coords.push(z);
        Self::from_coords(q.len(), coords)
    }

    pub fn from_coords(n: usize, coords: Vec<f64>) -> Result<Self, EvalError> {
        if coords.len() != 2 * n + 1 {
            return Err(EvalError::InvalidPoint(format!(
                "expected {} coordinates, got {}",
                2 * n + 1,
                coords.len()
            )));
        }
        if let Some(x) = coords.iter().find(|x| !x.is_finite()) {
            return Err(EvalError::InvalidPoint(format!("non-finite entry {x}")));
        }
        Ok(StatePoint { n, coords })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn q(&self) -> &[f64] {
        &self.coords[..self.n]
    }

    pub fn v(&self) -> &[f64] {
        &self.coords[self.n..2 * self.n]
    }

    pub fn z(&self) -> f64 {
        self.coords[2 * self.n]
    }

    pub fn get(&self, c: Coord) -> f64 {
        self.coords[c.index(self.n)]
    }

    /// Same `(q, v)` with the action coordinate replaced.
    pub fn with_z(&self, z: f64) -> StatePoint {
        let mut out = self.clone();
        out.coords[2 * self.n] = z;
        out
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coords)
    }
}

fn check(value: f64, e: &Expr) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EvalError::NonFinite {
            node: e.to_string(),
        })
    }
}

impl Expr {
    /// IEEE-double evaluation at `p`.
    pub fn eval(&self, p: &StatePoint, params: &ParamSet) -> Result<f64, EvalError> {
        self.eval_flat(p.coords(), p.dim(), params)
    }

    /// Evaluation against flat coordinates `[q.., v.., z]` of dimension `n`.
    pub fn eval_flat(&self, x: &[f64], n: usize, params: &ParamSet) -> Result<f64, EvalError> {
        match self.node() {
            Node::Const(c) => Ok(*c),
            Node::Coord(c) => {
                if !c.fits(n) || x.len() != 2 * n + 1 {
                    return Err(EvalError::CoordOutOfRange { coord: *c, n });
                }
                Ok(x[c.index(n)])
            }
            Node::Param(name) => params
                .get(name)
                .ok_or_else(|| EvalError::UnboundParam(name.clone())),
            Node::Unary(op, a) => {
                let u = a.eval_flat(x, n, params)?;
                let domain = |op: &'static str| EvalError::Domain {
                    op,
                    arg: u,
                    node: self.to_string(),
                };
                let r = match op {
                    UnaryOp::Neg => -u,
                    UnaryOp::Sin => u.sin(),
                    UnaryOp::Cos => u.cos(),
                    UnaryOp::Exp => u.exp(),
                    UnaryOp::Tanh => u.tanh(),
                    UnaryOp::Log => {
                        if u <= 0.0 {
                            return Err(domain("log"));
                        }
                        u.ln()
                    }
                    UnaryOp::Sqrt => {
                        if u < 0.0 {
                            return Err(domain("sqrt"));
                        }
                        u.sqrt()
                    }
                };
                check(r, self)
            }
            Node::Binary(op, a, b) => {
                let u = a.eval_flat(x, n, params)?;
                let w = b.eval_flat(x, n, params)?;
                let r = match op {
                    BinaryOp::Add => u + w,
                    BinaryOp::Sub => u - w,
                    BinaryOp::Mul => u * w,
                    BinaryOp::Div => {
                        if w == 0.0 {
                            return Err(EvalError::DivisionByZero {
                                node: self.to_string(),
                            });
                        }
                        u / w
                    }
                };
                check(r, self)
            }
            Node::Pow(a, k) => {
                let u = a.eval_flat(x, n, params)?;
                if u == 0.0 && *k < 0 {
                    return Err(EvalError::DivisionByZero {
                        node: self.to_string(),
                    });
                }
                check(u.powi(*k), self)
            }
        }
    }

    /// Value, gradient and Hessian over all `2n + 1` coordinates.
    pub fn eval_jet2(
        &self,
        p: &StatePoint,
        params: &ParamSet,
    ) -> Result<(f64, DVector<f64>, DMatrix<f64>), EvalError> {
        Jet2::new(self, p.dim()).eval(p, params)
    }
}

/// Symbolic first and second derivatives of one expression, built once and
/// evaluated at many points.
#[derive(Clone, Debug)]
pub struct Jet2 {
    n: usize,
    value: Expr,
    grad: Vec<Expr>,
    /// Upper triangle, row-major: (a, b) with a <= b.
    hess: Vec<Expr>,
}

impl Jet2 {
    pub fn new(e: &Expr, n: usize) -> Jet2 {
        let dim = 2 * n + 1;
        let grad: Vec<Expr> = Coord::all(n).map(|c| e.diff(c)).collect();
        let mut hess = Vec::with_capacity(dim * (dim + 1) / 2);
        for a in 0..dim {
            for b in a..dim {
                hess.push(grad[a].diff(Coord::from_index(b, n)));
            }
        }
        Jet2 {
            n,
            value: e.clone(),
            grad,
            hess,
        }
    }

    pub fn grad_exprs(&self) -> &[Expr] {
        &self.grad
    }

    pub fn eval(
        &self,
        p: &StatePoint,
        params: &ParamSet,
    ) -> Result<(f64, DVector<f64>, DMatrix<f64>), EvalError> {
        let dim = 2 * self.n + 1;
        let value = self.value.eval(p, params)?;
        let mut grad = DVector::zeros(dim);
        for (a, g) in self.grad.iter().enumerate() {
            grad[a] = g.eval(p, params)?;
        }
        let mut hess = DMatrix::zeros(dim, dim);
        let mut k = 0;
        for a in 0..dim {
            for b in a..dim {
                let h = self.hess[k].eval(p, params)?;
                hess[(a, b)] = h;
                hess[(b, a)] = h;
                k += 1;
            }
        }
        Ok((value, grad, hess))
    }
}

/// Symbolic gradient over all `2n + 1` coordinates.
#[derive(Clone, Debug)]
pub struct Gradient {
    exprs: Vec<Expr>,
}

impl Gradient {
    pub fn new(e: &Expr, n: usize) -> Gradient {
        Gradient {
            exprs: Coord::all(n).map(|c| e.diff(c)).collect(),
        }
    }

    pub fn exprs(&self) -> &[Expr] {
        &self.exprs
    }

    pub fn eval(&self, p: &StatePoint, params: &ParamSet) -> Result<DVector<f64>, EvalError> {
        let mut g = DVector::zeros(self.exprs.len());
        for (a, e) in self.exprs.iter().enumerate() {
            if !e.is_zero() {
                g[a] = e.eval(p, params)?;
            }
        }
        Ok(g)
    }

    /// `Σ_a x^a ∂_a e` at `p`.
    pub fn dot(&self, x: &DVector<f64>, p: &StatePoint, params: &ParamSet) -> Result<f64, EvalError> {
        let mut acc = 0.0;
        for (a, e) in self.exprs.iter().enumerate() {
            if !e.is_zero() {
                acc += x[a] * e.eval(p, params)?;
            }
        }
        Ok(acc)
    }
}

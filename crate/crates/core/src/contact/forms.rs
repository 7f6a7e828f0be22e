use super::field::CoordVectorField;
use crate::error::{Error, Result};
use crate::expr::{Coord, Expr, ParamSet, StatePoint};
use nalgebra::{DMatrix, DVector};
use std::sync::{Arc, OnceLock};

/// A one-form `Σ α_a dx^a` over the `2n + 1` chart coordinates.
#[derive(Clone, Debug)]
pub struct CoordOneForm {
    n: usize,
    comps: Vec<Expr>,
    grads: Arc<OnceLock<Vec<Vec<Expr>>>>,
}

impl CoordOneForm {
    pub fn new(n: usize, components: Vec<Expr>) -> Result<Self> {
        if components.len() != 2 * n + 1 {
            return Err(Error::Dimension(format!(
                "one-form needs {} components, got {}",
                2 * n + 1,
                components.len()
            )));
        }
        Ok(CoordOneForm {
            n,
            comps: components,
            grads: Arc::default(),
        })
    }

    /// Darboux form `dz − Σ vᵢ dqⁱ`, with `v` playing the momenta.
    pub fn darboux(n: usize) -> Self {
        let mut comps: Vec<Expr> = (0..n).map(|i| Expr::v(i).neg()).collect();
        comps.extend((0..n).map(|_| Expr::zero()));
        comps.push(Expr::one());
        CoordOneForm::new(n, comps).expect("darboux layout")
    }

    /// `df` for a scalar expression.
    pub fn exact(n: usize, f: &Expr) -> Self {
        CoordOneForm::new(n, Coord::all(n).map(|c| f.diff(c)).collect()).expect("gradient layout")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[Expr] {
        &self.comps
    }

    pub fn component(&self, c: Coord) -> &Expr {
        &self.comps[c.index(self.n)]
    }

    /// `f · α`, symbolically.
    pub fn scaled(&self, f: &Expr) -> Self {
        CoordOneForm::new(self.n, self.comps.iter().map(|a| f.mul(a)).collect())
            .expect("same layout")
    }

    /// `α + β`, symbolically.
    pub fn plus(&self, other: &CoordOneForm) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::Dimension("one-forms of different dimension".into()));
        }
        CoordOneForm::new(
            self.n,
            self.comps.iter().zip(&other.comps).map(|(a, b)| a.add(b)).collect(),
        )
    }

    /// `grads[a][c] = ∂α_a/∂x^c`.
    pub fn grad_exprs(&self) -> &[Vec<Expr>] {
        self.grads.get_or_init(|| {
            self.comps
                .iter()
                .map(|e| Coord::all(self.n).map(|c| e.diff(c)).collect())
                .collect()
        })
    }

    /// Symbolic `(dα)(∂_a, ∂_b) = ∂_a α_b − ∂_b α_a`.
    pub fn exterior_derivative_expr(&self, a: usize, b: usize) -> Expr {
        let g = self.grad_exprs();
        g[b][a].sub(&g[a][b])
    }

    pub fn eval(&self, p: &StatePoint, params: &ParamSet) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.comps.len());
        for (a, e) in self.comps.iter().enumerate() {
            out[a] = e.eval(p, params)?;
        }
        Ok(out)
    }

    /// Values and gradient matrix `G[(a, c)] = ∂α_a/∂x^c`.
    pub fn jet(&self, p: &StatePoint, params: &ParamSet) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let dim = self.comps.len();
        let value = self.eval(p, params)?;
        let mut grad = DMatrix::zeros(dim, dim);
        for (a, row) in self.grad_exprs().iter().enumerate() {
            for (c, e) in row.iter().enumerate() {
                if !e.is_zero() {
                    grad[(a, c)] = e.eval(p, params)?;
                }
            }
        }
        Ok((value, grad))
    }
}

fn check_dims(alpha: &CoordOneForm, p: &StatePoint) -> Result<()> {
    if alpha.dim() != p.dim() {
        return Err(Error::Dimension(format!(
            "one-form of dimension {} at a point of dimension {}",
            alpha.dim(),
            p.dim()
        )));
    }
    Ok(())
}

/// `M[(a, b)] = ∂α_b/∂x^a − ∂α_a/∂x^b`, so `(dα)(X, Y) = Xᵀ M Y`.
///
/// Only the upper triangle is computed; the lower one is its negation, so
/// the result is exactly antisymmetric.
pub fn exterior_derivative(
    alpha: &CoordOneForm,
    p: &StatePoint,
    params: &ParamSet,
) -> Result<DMatrix<f64>> {
    check_dims(alpha, p)?;
    let (_, g) = alpha.jet(p, params)?;
    let dim = g.nrows();
    let mut m = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        for b in a + 1..dim {
            let v = g[(b, a)] - g[(a, b)];
            m[(a, b)] = v;
            m[(b, a)] = -v;
        }
    }
    Ok(m)
}

/// `𝓛_X α = ι_X dα + d(α(X))` at `p`.
pub fn lie_derivative(
    alpha: &CoordOneForm,
    field: &CoordVectorField,
    p: &StatePoint,
    params: &ParamSet,
) -> Result<DVector<f64>> {
    check_dims(alpha, p)?;
    let (a_val, a_grad) = alpha.jet(p, params)?;
    let (x_val, x_jac) = field.jet(p, params)?;
    // (𝓛_X α)_b = Σ_a X^a ∂_a α_b + Σ_a α_a ∂_b X^a
    Ok(a_grad * &x_val + x_jac.transpose() * &a_val)
}

/// Least-squares scalar `g` with `𝓛_X α ≈ g α` at `p`, and the max-norm of
/// `𝓛_X α − g α`.
pub fn conformal_factor(
    alpha: &CoordOneForm,
    field: &CoordVectorField,
    p: &StatePoint,
    params: &ParamSet,
) -> Result<(f64, f64)> {
    let a = alpha.eval(p, params)?;
    let norm2 = a.norm_squared();
    if norm2 == 0.0 {
        return Err(Error::Precondition(format!(
            "one-form vanishes at {:?}",
            p.coords()
        )));
    }
    let lie = lie_derivative(alpha, field, p, params)?;
    let g = lie.dot(&a) / norm2;
    let residual = (lie - &a * g).amax();
    Ok((g, residual))
}

/// `α(X)` at `p`.
pub fn contract(
    alpha: &CoordOneForm,
    field: &CoordVectorField,
    p: &StatePoint,
    params: &ParamSet,
) -> Result<f64> {
    check_dims(alpha, p)?;
    Ok(alpha.eval(p, params)?.dot(&field.eval(p, params)?))
}

//! Reeb and Hamiltonian vector fields from the defining equations
//! `ι_R dη = 0, η(R) = 1` and `ι_X dη = dH − (R H) η, η(X) = −H`.
//!
//! Both are solved as the bordered square system
//!
//! ```text
//! [ (dη)ᵀ  η ] [ X ]   [ dH ]
//! [   ηᵀ   0 ] [ λ ] = [ −H ]
//! ```
//!
//! Contracting the first block row with `R` forces `λ = R(H)`, so the
//! multiplier reproduces the `(R H) η` term without solving for `R` first.
//! The matrix is nonsingular exactly when `η ∧ (dη)ⁿ ≠ 0`.
//!
//! Note: the frequently quoted Darboux expansion of `X_H` puts `∂H/∂qⁱ` in
//! the `∂/∂qⁱ` slot; the defining equations give `∂H/∂pᵢ` there. The
//! solver follows the defining equations.

use super::field::{CoordVectorField, Degeneracy, LinearSystem, Slot};
use super::forms::CoordOneForm;
use crate::error::{Error, Result};
use crate::expr::{Coord, Expr, ParamSet, StatePoint};
use nalgebra::DVector;

/// Relative singular-value threshold of the contact condition.
pub const CONTACT_TOL: f64 = 1e-10;

/// A contact form `η` with Hamiltonian `H`.
#[derive(Clone, Debug)]
pub struct ContactHamiltonianSystem {
    pub n: usize,
    pub eta: CoordOneForm,
    pub h: Expr,
    pub params: ParamSet,
}

fn bordered_system(eta: &CoordOneForm, rhs_top: Vec<Expr>, rhs_last: Expr, what: &str) -> LinearSystem {
    let n = eta.dim();
    let dim = 2 * n + 1;
    let size = dim + 1;
    let mut matrix = Vec::with_capacity(size * size);
    for b in 0..dim {
        for a in 0..dim {
            // coefficient of X^a in (ι_X dη)_b
            matrix.push(eta.exterior_derivative_expr(a, b));
        }
        matrix.push(eta.components()[b].clone());
    }
    matrix.extend(eta.components().iter().cloned());
    matrix.push(Expr::zero());
    let mut rhs = rhs_top;
    rhs.push(rhs_last);
    LinearSystem::new(
        n,
        matrix,
        rhs,
        Degeneracy::RelativeSingularValue(CONTACT_TOL),
        what,
    )
}

fn solved_slots(n: usize) -> Vec<Slot> {
    (0..2 * n + 1).map(Slot::Solved).collect()
}

/// Reeb field of `η` as a (solved) vector field.
pub fn reeb_vector_field(eta: &CoordOneForm) -> CoordVectorField {
    let n = eta.dim();
    let zeros = (0..2 * n + 1).map(|_| Expr::zero()).collect();
    let sys = bordered_system(eta, zeros, Expr::one(), "contact system (Reeb field)");
    CoordVectorField::implicit(n, solved_slots(n), sys).expect("bordered layout")
}

/// Reeb field of `η` at `p`.
pub fn reeb_field(eta: &CoordOneForm, p: &StatePoint, params: &ParamSet) -> Result<DVector<f64>> {
    reeb_vector_field(eta).eval(p, params)
}

impl ContactHamiltonianSystem {
    pub fn new(eta: CoordOneForm, h: Expr, params: ParamSet) -> Self {
        ContactHamiltonianSystem {
            n: eta.dim(),
            eta,
            h,
            params,
        }
    }

    /// `(dz − Σ pᵢ dqⁱ, H)` with `v` as the momenta.
    pub fn darboux(n: usize, h: Expr, params: ParamSet) -> Self {
        Self::new(CoordOneForm::darboux(n), h, params)
    }

    /// `X_H` as a solved vector field.
    pub fn hamiltonian_vector_field(&self) -> CoordVectorField {
        let rhs = Coord::all(self.n).map(|c| self.h.diff(c)).collect();
        let sys = bordered_system(&self.eta, rhs, self.h.neg(), "contact system (Hamiltonian field)");
        CoordVectorField::implicit(self.n, solved_slots(self.n), sys).expect("bordered layout")
    }

    pub fn reeb_field(&self, p: &StatePoint) -> Result<DVector<f64>> {
        reeb_field(&self.eta, p, &self.params)
    }

    /// `X_H` at `p`, with the check `|η(X) + H| <= 1e-10 (1 + |H|)`.
    pub fn hamiltonian_field(&self, p: &StatePoint) -> Result<DVector<f64>> {
        let x = self.hamiltonian_vector_field().eval(p, &self.params)?;
        let h = self.h.eval(p, &self.params)?;
        let eta = self.eta.eval(p, &self.params)?;
        let defect = (eta.dot(&x) + h).abs();
        if defect > 1e-10 * (1.0 + h.abs()) {
            return Err(Error::Postcondition(format!(
                "η(X_H) + H = {defect:e} at {:?}",
                p.coords()
            )));
        }
        Ok(x)
    }

    /// `σ_min/σ_max` of the bordered matrix at `p`; the contact condition
    /// holds when it exceeds [`CONTACT_TOL`].
    pub fn contact_measure(&self, p: &StatePoint) -> Result<f64> {
        let zeros = (0..2 * self.n + 1).map(|_| Expr::zero()).collect();
        let sys = bordered_system(&self.eta, zeros, Expr::one(), "contact system");
        let m = sys.eval_matrix(p, &self.params)?;
        Ok(super::field::singular_value_ratio(&m))
    }
}

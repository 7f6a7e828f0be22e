//! Vector fields in the global chart.
//!
//! A component is either an explicit [`Expr`] or an unknown of a pointwise
//! linear system `K(x) u = r(x)` whose entries are themselves expressions.
//! Solved components are never turned into closed forms for evaluation;
//! their Jacobian comes from differentiating the system,
//! `∂u = K⁻¹(∂r − (∂K) u)`, which stays exact given symbolic `∂K`, `∂r`.

use crate::error::{Error, Result};
use crate::expr::{Coord, Expr, ParamSet, StatePoint};
use nalgebra::{DMatrix, DVector};
use std::sync::{Arc, OnceLock};

/// How a square system is declared degenerate before solving.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Degeneracy {
    /// `|det K| <= tol`.
    Determinant(f64),
    /// `σ_min(K) <= tol · σ_max(K)`.
    RelativeSingularValue(f64),
}

/// Square system with symbolic entries, `matrix` stored row-major.
#[derive(Debug)]
pub struct LinearSystem {
    n: usize,
    size: usize,
    matrix: Vec<Expr>,
    rhs: Vec<Expr>,
    degeneracy: Degeneracy,
    what: String,
    derivs: OnceLock<SystemDerivatives>,
}

#[derive(Debug)]
struct SystemDerivatives {
    /// `[entry][coord]`
    matrix: Vec<Vec<Expr>>,
    rhs: Vec<Vec<Expr>>,
}

/// A solved system at one point, holding the factorization for reuse.
pub struct SolvedSystem {
    pub matrix: DMatrix<f64>,
    pub solution: DVector<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl LinearSystem {
    pub fn new(
        n: usize,
        matrix: Vec<Expr>,
        rhs: Vec<Expr>,
        degeneracy: Degeneracy,
        what: impl Into<String>,
    ) -> LinearSystem {
        let size = rhs.len();
        assert_eq!(matrix.len(), size * size, "system matrix must be square");
        LinearSystem {
            n,
            size,
            matrix,
            rhs,
            degeneracy,
            what: what.into(),
            derivs: OnceLock::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entry(&self, row: usize, col: usize) -> &Expr {
        &self.matrix[row * self.size + col]
    }

    pub fn rhs(&self) -> &[Expr] {
        &self.rhs
    }

    fn derivatives(&self) -> &SystemDerivatives {
        self.derivs.get_or_init(|| {
            let grad = |e: &Expr| Coord::all(self.n).map(|c| e.diff(c)).collect::<Vec<_>>();
            SystemDerivatives {
                matrix: self.matrix.iter().map(grad).collect(),
                rhs: self.rhs.iter().map(grad).collect(),
            }
        })
    }

    pub fn eval_matrix(&self, p: &StatePoint, params: &ParamSet) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.size, self.size);
        for r in 0..self.size {
            for c in 0..self.size {
                m[(r, c)] = self.entry(r, c).eval(p, params)?;
            }
        }
        Ok(m)
    }

    /// Evaluates, tests degeneracy and solves at `p`.
    pub fn solve(&self, p: &StatePoint, params: &ParamSet) -> Result<SolvedSystem> {
        let matrix = self.eval_matrix(p, params)?;
        let mut rhs = DVector::zeros(self.size);
        for (k, e) in self.rhs.iter().enumerate() {
            rhs[k] = e.eval(p, params)?;
        }
        let singular = |measure: f64| Error::Singular {
            what: self.what.clone(),
            point: p.coords().to_vec(),
            measure,
        };
        match self.degeneracy {
            Degeneracy::Determinant(tol) => {
                let det = matrix.determinant();
                if !(det.abs() > tol) {
                    return Err(singular(det));
                }
            }
            Degeneracy::RelativeSingularValue(tol) => {
                let ratio = singular_value_ratio(&matrix);
                if !(ratio > tol) {
                    return Err(singular(ratio));
                }
            }
        }
        let lu = matrix.clone().lu();
        let solution = lu.solve(&rhs).ok_or_else(|| singular(0.0))?;
        Ok(SolvedSystem {
            matrix,
            solution,
            lu,
        })
    }

    /// Jacobian `∂u_k/∂x^c` of the solution, by implicit differentiation.
    pub fn solution_jacobian(
        &self,
        solved: &SolvedSystem,
        p: &StatePoint,
        params: &ParamSet,
    ) -> Result<DMatrix<f64>> {
        let d = self.derivatives();
        let dim = 2 * self.n + 1;
        let mut jac = DMatrix::zeros(self.size, dim);
        for c in 0..dim {
            let mut col = DVector::zeros(self.size);
            for r in 0..self.size {
                let mut acc = d.rhs[r][c].eval(p, params)?;
                for k in 0..self.size {
                    let dk = &d.matrix[r * self.size + k][c];
                    if !dk.is_zero() {
                        acc -= dk.eval(p, params)? * solved.solution[k];
                    }
                }
                col[r] = acc;
            }
            let sol = solved.lu.solve(&col).ok_or_else(|| Error::Singular {
                what: self.what.clone(),
                point: p.coords().to_vec(),
                measure: 0.0,
            })?;
            jac.set_column(c, &sol);
        }
        Ok(jac)
    }

    /// Closed-form solution by Cramer's rule, for systems of size <= 4.
    pub fn symbolic_solution(&self) -> Option<Vec<Expr>> {
        if self.size > 4 {
            return None;
        }
        let rows: Vec<Vec<Expr>> = (0..self.size)
            .map(|r| (0..self.size).map(|c| self.entry(r, c).clone()).collect())
            .collect();
        let det = symbolic_det(&rows);
        if det.is_zero() {
            return None;
        }
        Some(
            (0..self.size)
                .map(|k| {
                    let replaced: Vec<Vec<Expr>> = rows
                        .iter()
                        .zip(&self.rhs)
                        .map(|(row, b)| {
                            let mut row = row.clone();
                            row[k] = b.clone();
                            row
                        })
                        .collect();
                    symbolic_det(&replaced).div(&det)
                })
                .collect(),
        )
    }
}

/// Laplace expansion along the first row.
pub(crate) fn symbolic_det(rows: &[Vec<Expr>]) -> Expr {
    match rows.len() {
        0 => Expr::one(),
        1 => rows[0][0].clone(),
        size => {
            let mut acc = Expr::zero();
            for col in 0..size {
                let a = &rows[0][col];
                if a.is_zero() {
                    continue;
                }
                let minor: Vec<Vec<Expr>> = rows[1..]
                    .iter()
                    .map(|r| {
                        r.iter()
                            .enumerate()
                            .filter(|(c, _)| *c != col)
                            .map(|(_, e)| e.clone())
                            .collect()
                    })
                    .collect();
                let term = a.mul(&symbolic_det(&minor));
                acc = if col % 2 == 0 {
                    acc.add(&term)
                } else {
                    acc.sub(&term)
                };
            }
            acc
        }
    }
}

/// `σ_min / σ_max`, or 0 for the zero matrix.
pub fn singular_value_ratio(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0.0;
    }
    sv.min() / max
}

#[derive(Clone, Debug)]
pub enum Slot {
    Explicit(Expr),
    /// Index into the unknowns of the field's linear system.
    Solved(usize),
}

/// A vector field with `2n + 1` components (`∂q`, `∂v`, `∂z` slots).
#[derive(Clone, Debug)]
pub struct CoordVectorField {
    n: usize,
    slots: Vec<Slot>,
    system: Option<Arc<LinearSystem>>,
    grads: Arc<OnceLock<Vec<Option<Vec<Expr>>>>>,
}

impl CoordVectorField {
    /// Field with explicit components.
    pub fn new(n: usize, components: Vec<Expr>) -> Result<Self> {
        if components.len() != 2 * n + 1 {
            return Err(Error::Dimension(format!(
                "vector field needs {} components, got {}",
                2 * n + 1,
                components.len()
            )));
        }
        Ok(CoordVectorField {
            n,
            slots: components.into_iter().map(Slot::Explicit).collect(),
            system: None,
            grads: Arc::default(),
        })
    }

    /// Field whose `Solved` slots are unknowns of `system`.
    pub fn implicit(n: usize, slots: Vec<Slot>, system: LinearSystem) -> Result<Self> {
        if slots.len() != 2 * n + 1 {
            return Err(Error::Dimension(format!(
                "vector field needs {} slots, got {}",
                2 * n + 1,
                slots.len()
            )));
        }
        if slots
            .iter()
            .any(|s| matches!(s, Slot::Solved(k) if *k >= system.size()))
        {
            return Err(Error::Dimension("solved slot outside system".into()));
        }
        Ok(CoordVectorField {
            n,
            slots,
            system: Some(Arc::new(system)),
            grads: Arc::default(),
        })
    }

    /// The field `Σ vⁱ ∂qⁱ + aⁱ ∂vⁱ + b ∂z`.
    pub fn sode(accelerations: &[Expr], z_rate: &Expr) -> Self {
        let n = accelerations.len();
        let mut comps: Vec<Expr> = (0..n).map(Expr::v).collect();
        comps.extend(accelerations.iter().cloned());
        comps.push(z_rate.clone());
        CoordVectorField::new(n, comps).expect("sode layout has 2n + 1 components")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn system(&self) -> Option<&LinearSystem> {
        self.system.as_deref()
    }

    /// Components as expressions if none is solved.
    pub fn explicit_components(&self) -> Option<Vec<Expr>> {
        self.slots
            .iter()
            .map(|s| match s {
                Slot::Explicit(e) => Some(e.clone()),
                Slot::Solved(_) => None,
            })
            .collect()
    }

    /// All components in closed form, solving the system by Cramer's rule
    /// when needed. `None` if the system is too large.
    pub fn to_explicit(&self) -> Option<CoordVectorField> {
        let solution = match &self.system {
            Some(sys) => Some(sys.symbolic_solution()?),
            None => None,
        };
        let comps = self
            .slots
            .iter()
            .map(|s| match s {
                Slot::Explicit(e) => e.clone(),
                Slot::Solved(k) => solution.as_ref().expect("solved slot has a system")[*k].clone(),
            })
            .collect();
        CoordVectorField::new(self.n, comps).ok()
    }

    fn check_point(&self, p: &StatePoint) -> Result<()> {
        if p.dim() != self.n {
            return Err(Error::Dimension(format!(
                "field of dimension {} evaluated at a point of dimension {}",
                self.n,
                p.dim()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, p: &StatePoint, params: &ParamSet) -> Result<DVector<f64>> {
        self.check_point(p)?;
        let solved = match &self.system {
            Some(sys) => Some(sys.solve(p, params)?),
            None => None,
        };
        let mut out = DVector::zeros(self.slots.len());
        for (a, slot) in self.slots.iter().enumerate() {
            out[a] = match slot {
                Slot::Explicit(e) => e.eval(p, params)?,
                Slot::Solved(k) => solved.as_ref().expect("solved slot has a system").solution[*k],
            };
        }
        Ok(out)
    }

    fn explicit_grads(&self) -> &[Option<Vec<Expr>>] {
        self.grads.get_or_init(|| {
            self.slots
                .iter()
                .map(|s| match s {
                    Slot::Explicit(e) => Some(Coord::all(self.n).map(|c| e.diff(c)).collect()),
                    Slot::Solved(_) => None,
                })
                .collect()
        })
    }

    /// Value and Jacobian `J[(a, c)] = ∂X^a/∂x^c` at `p`.
    pub fn jet(&self, p: &StatePoint, params: &ParamSet) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.check_point(p)?;
        let dim = self.slots.len();
        let solved = match &self.system {
            Some(sys) => {
                let s = sys.solve(p, params)?;
                let jac = sys.solution_jacobian(&s, p, params)?;
                Some((s, jac))
            }
            None => None,
        };
        let grads = self.explicit_grads();
        let mut value = DVector::zeros(dim);
        let mut jac = DMatrix::zeros(dim, dim);
        for (a, slot) in self.slots.iter().enumerate() {
            match slot {
                Slot::Explicit(e) => {
                    value[a] = e.eval(p, params)?;
                    for (c, g) in grads[a].as_ref().expect("explicit slot").iter().enumerate() {
                        jac[(a, c)] = g.eval(p, params)?;
                    }
                }
                Slot::Solved(k) => {
                    let (s, sj) = solved.as_ref().expect("solved slot has a system");
                    value[a] = s.solution[*k];
                    jac.set_row(a, &sj.row(*k));
                }
            }
        }
        Ok((value, jac))
    }

    /// `X(f)` at `p`, the derivative of `f` along the field.
    pub fn apply(&self, f: &Expr, p: &StatePoint, params: &ParamSet) -> Result<f64> {
        let x = self.eval(p, params)?;
        let mut acc = 0.0;
        for (a, c) in Coord::all(self.n).enumerate() {
            let d = f.diff(c);
            if !d.is_zero() {
                acc += x[a] * d.eval(p, params)?;
            }
        }
        Ok(acc)
    }
}

//! Action functions `ζ(q, v, z)` and Lagrangian mechanics in the `ζ`-chart.
//!
//! Everything stays in the base chart `(q, v, z)`; the `ζ`-chart frame is
//!
//! ```text
//! (∂/∂qⁱ)_ζ = ∂/∂qⁱ − (ζ_qⁱ/ζ_z) ∂/∂z
//! (∂/∂vⁱ)_ζ = ∂/∂vⁱ − (ζ_vⁱ/ζ_z) ∂/∂z
//! ∂/∂ζ      = (1/ζ_z) ∂/∂z
//! ```

use crate::contact::{ContactHamiltonianSystem, CoordOneForm, CoordVectorField};
use crate::error::{Error, Result};
use crate::expr::{Coord, Expr, Gradient, ParamSet, StatePoint};
use crate::lagrangian::DET_TOL;
use crate::report::{CheckReport, Tolerances};
use crate::sampling::{map_points, SamplePlan};
use nalgebra::{DMatrix, DVector};

/// `|∂ζ/∂z|` at or below this makes the frame singular.
pub const FRAME_TOL: f64 = 1e-10;

/// Symbol standing for `ζ` in expressions written in the `ζ`-chart.
pub const ZETA_SYMBOL: &str = "zeta";

#[derive(Clone, Debug)]
pub struct ActionFunction {
    pub n: usize,
    pub zeta: Expr,
    pub params: ParamSet,
}

impl ActionFunction {
    pub fn new(n: usize, zeta: Expr, params: ParamSet) -> Result<Self> {
        if zeta.required_dim() > n {
            return Err(Error::Dimension(format!(
                "action function references coordinates beyond n = {n}"
            )));
        }
        Ok(ActionFunction { n, zeta, params })
    }

    pub fn parse(text: &str, n: usize, params: ParamSet) -> Result<Self> {
        Self::new(n, Expr::parse(text, n)?, params)
    }

    /// `ζ = z`.
    pub fn identity(n: usize) -> Self {
        ActionFunction {
            n,
            zeta: Expr::z(),
            params: ParamSet::new(),
        }
    }

    pub fn zeta_z(&self) -> Expr {
        self.zeta.diff(Coord::Z)
    }

    /// `∂ζ/∂z` at `p`, failing when the frame degenerates.
    pub fn check(&self, p: &StatePoint, params: &ParamSet) -> Result<f64> {
        let zz = self.zeta_z().eval(p, params)?;
        if zz.abs() <= FRAME_TOL {
            return Err(Error::Singular {
                what: "action function (∂ζ/∂z)".into(),
                point: p.coords().to_vec(),
                measure: zz.abs(),
            });
        }
        Ok(zz)
    }

    /// True when every `∂ζ/∂vⁱ` vanishes symbolically.
    pub fn is_velocity_free(&self) -> bool {
        (0..self.n).all(|i| self.zeta.diff(Coord::V(i)).is_zero())
    }

    /// `φ*f = f(q, v, ζ(q, v, z))` for `f` written in the `ζ`-chart with
    /// `z` in the role of `ζ`.
    pub fn pullback(&self, f: &Expr) -> Expr {
        f.substitute_coord(Coord::Z, &self.zeta)
    }
}

/// Parses an expression written in the `ζ`-chart, where the symbol `zeta`
/// is the action coordinate. The result uses `z` in its place.
pub fn parse_zeta_chart(text: &str, n: usize) -> Result<Expr> {
    let e = Expr::parse(text, n)?;
    if e.mentions(Coord::Z) {
        return Err(Error::Precondition(format!(
            "`{text}` is written in the ζ-chart and may not mention z; use `{ZETA_SYMBOL}`"
        )));
    }
    Ok(e.substitute_param(ZETA_SYMBOL, &Expr::z()))
}

/// Frame `(∂/∂q)_ζ, (∂/∂v)_ζ, ∂/∂ζ` as matrix columns at `p`.
pub fn zeta_frame(zeta: &ActionFunction, p: &StatePoint, params: &ParamSet) -> Result<DMatrix<f64>> {
    let zz = zeta.check(p, params)?;
    let dim = 2 * zeta.n + 1;
    let grad = Gradient::new(&zeta.zeta, zeta.n).eval(p, params)?;
    let mut m = DMatrix::identity(dim, dim);
    for c in 0..dim - 1 {
        m[(dim - 1, c)] = -grad[c] / zz;
    }
    m[(dim - 1, dim - 1)] = 1.0 / zz;
    Ok(m)
}

/// Partial derivative along the `ζ`-frame; `Coord::Z` selects `∂/∂ζ`.
pub fn zeta_partial(f: &Expr, zeta: &ActionFunction, var: Coord) -> Expr {
    let fz = f.diff(Coord::Z);
    let zz = zeta.zeta_z();
    match var {
        Coord::Z => fz.div(&zz),
        _ => {
            let zv = zeta.zeta.diff(var);
            let base = f.diff(var);
            if zv.is_zero() || fz.is_zero() {
                base
            } else {
                base.sub(&zv.div(&zz).mul(&fz))
            }
        }
    }
}

/// Checks that the `∂q` components of `x` equal `v`.
pub fn extended_sode_check(
    x: &CoordVectorField,
    plan: &SamplePlan,
    params: &ParamSet,
    tol: Tolerances,
) -> CheckReport {
    let task = "extended-sode";
    let n = x.dim();
    let points = match plan.points(n) {
        Ok(p) => p,
        Err(e) => return CheckReport::error(task, tol, Some(plan), &e),
    };
    let mut report = CheckReport::new(task, tol, Some(plan));
    let rows = map_points(&points, |p| -> Result<Vec<f64>> {
        let val = x.eval(p, params)?;
        Ok((0..n).map(|i| val[i] - p.v()[i]).collect())
    });
    let names: Vec<String> = (1..=n).map(|i| format!("q{i}_rate_minus_v{i}")).collect();
    for (p, row) in points.iter().zip(rows) {
        match row {
            Ok(r) => {
                let values: Vec<(&str, f64)> = names.iter().map(String::as_str).zip(r).collect();
                report.push(p, &values, &[]);
            }
            Err(e) => {
                report.escalate(crate::report::Verdict::Error, format!("{e}"));
                break;
            }
        }
    }
    report.finish()
}

/// `(n, L, ζ)` with `L` a function on the base chart.
#[derive(Clone, Debug)]
pub struct ExtendedLagrangianSystem {
    pub n: usize,
    pub lagrangian: Expr,
    pub zeta: ActionFunction,
    pub params: ParamSet,
}

/// Result of the `ζ`-Legendre transform at a point.
#[derive(Clone, Debug)]
pub struct LegendreImage {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub zeta: f64,
    /// Max-norm of `Φ*(dζ̃ − pᵢdqⁱ) − η^ζ_L` at the point.
    pub pullback_residual: f64,
    /// Determinant of the Jacobian of `Φ = (q, p^ζ, ζ)`.
    pub jacobian_det: f64,
}

impl ExtendedLagrangianSystem {
    pub fn new(lagrangian: Expr, zeta: ActionFunction, params: ParamSet) -> Result<Self> {
        let n = zeta.n;
        if lagrangian.required_dim() > n {
            return Err(Error::Dimension(format!(
                "Lagrangian references coordinates beyond n = {n}"
            )));
        }
        let params = params.merged(&zeta.params).map_err(Error::Precondition)?;
        Ok(ExtendedLagrangianSystem {
            n,
            lagrangian,
            zeta,
            params,
        })
    }

    /// Builds the system from `L̄` written in its own `ζ`-chart (`z` standing
    /// for `ζ`), i.e. `L = φ*L̄`.
    pub fn from_zeta_chart(lbar: &Expr, zeta: ActionFunction, params: ParamSet) -> Result<Self> {
        let l = zeta.pullback(lbar);
        Self::new(l, zeta, params)
    }

    fn zp(&self, f: &Expr, var: Coord) -> Expr {
        zeta_partial(f, &self.zeta, var)
    }

    /// `p^ζᵢ = (∂L/∂vⁱ)_ζ`.
    pub fn momentum(&self, i: usize) -> Expr {
        self.zp(&self.lagrangian, Coord::V(i))
    }

    /// `∂L/∂ζ`.
    pub fn lagrangian_zeta(&self) -> Expr {
        self.zp(&self.lagrangian, Coord::Z)
    }

    /// `η^ζ_L = dζ − p^ζᵢ dqⁱ` expanded in the base chart.
    pub fn extended_lagrangian_form(&self) -> CoordOneForm {
        let n = self.n;
        let z = &self.zeta.zeta;
        let mut comps: Vec<Expr> = (0..n)
            .map(|i| z.diff(Coord::Q(i)).sub(&self.momentum(i)))
            .collect();
        comps.extend((0..n).map(|i| z.diff(Coord::V(i))));
        comps.push(z.diff(Coord::Z));
        CoordOneForm::new(n, comps).expect("extended form layout")
    }

    /// `W^ζᵢⱼ = (∂/∂vʲ)_ζ (∂L/∂vⁱ)_ζ`, row-major.
    pub fn w_zeta_exprs(&self) -> Vec<Expr> {
        let n = self.n;
        let mut w = Vec::with_capacity(n * n);
        for i in 0..n {
            let pi = self.momentum(i);
            for j in 0..n {
                w.push(self.zp(&pi, Coord::V(j)));
            }
        }
        w
    }

    pub fn w_zeta(&self, p: &StatePoint) -> Result<DMatrix<f64>> {
        self.zeta.check(p, &self.params)?;
        let n = self.n;
        let mut w = DMatrix::zeros(n, n);
        for (k, e) in self.w_zeta_exprs().iter().enumerate() {
            w[(k / n, k % n)] = e.eval(p, &self.params)?;
        }
        Ok(w)
    }

    /// `(det W^ζ, |det| > DET_TOL)` at `p`.
    pub fn zeta_regularity(&self, p: &StatePoint) -> Result<(f64, bool)> {
        let det = self.w_zeta(p)?.determinant();
        Ok((det, det.abs() > DET_TOL))
    }

    /// `max |W^ζᵢⱼ − W^ζⱼᵢ|` at `p`.
    pub fn w_zeta_asymmetry(&self, p: &StatePoint) -> Result<f64> {
        let w = self.w_zeta(p)?;
        Ok((&w - w.transpose()).amax())
    }

    /// `E^ζ_L = Σ vⁱ p^ζᵢ − L`.
    pub fn zeta_energy(&self) -> Expr {
        let terms: Vec<Expr> = (0..self.n)
            .map(|i| Expr::v(i).mul(&self.momentum(i)))
            .collect();
        Expr::sum(&terms).sub(&self.lagrangian)
    }

    /// The contact system `(η^ζ_L, E^ζ_L)`.
    pub fn contact_system(&self) -> ContactHamiltonianSystem {
        ContactHamiltonianSystem::new(
            self.extended_lagrangian_form(),
            self.zeta_energy(),
            self.params.clone(),
        )
    }

    /// `ζ`-Herglotz field, the Hamiltonian field of `(η^ζ_L, E^ζ_L)`.
    pub fn zeta_herglotz_field(&self) -> CoordVectorField {
        self.contact_system().hamiltonian_vector_field()
    }

    /// `ζ`-Herglotz field at `p`, checking `ξ(ζ) = L` there.
    pub fn zeta_herglotz_at(&self, field: &CoordVectorField, p: &StatePoint) -> Result<DVector<f64>> {
        self.zeta.check(p, &self.params)?;
        let x = field.eval(p, &self.params)?;
        let rate = Gradient::new(&self.zeta.zeta, self.n).dot(&x, p, &self.params)?;
        let l = self.lagrangian.eval(p, &self.params)?;
        let defect = (rate - l).abs();
        if defect > 1e-8 * (1.0 + l.abs()) {
            return Err(Error::Postcondition(format!(
                "ξ(ζ) − L = {defect:e} at {:?}",
                p.coords()
            )));
        }
        Ok(x)
    }

    /// `Φ(q, v, z) = (q, p^ζ, ζ)` at `p`, with the strict-similarity
    /// residual of `dζ̃ − pᵢdqⁱ` against `η^ζ_L`.
    pub fn zeta_legendre(&self, p: &StatePoint) -> Result<LegendreImage> {
        let n = self.n;
        let dim = 2 * n + 1;
        let prm = &self.params;
        let (det, ok) = self.zeta_regularity(p)?;
        if !ok {
            return Err(Error::Singular {
                what: "ζ-Legendre transform (W^ζ)".into(),
                point: p.coords().to_vec(),
                measure: det.abs(),
            });
        }
        // Jacobian of Φ, row per output coordinate
        let mut jac = DMatrix::zeros(dim, dim);
        let mut mom = vec![0.0; n];
        for i in 0..n {
            jac[(i, i)] = 1.0;
            let pi = self.momentum(i);
            mom[i] = pi.eval(p, prm)?;
            let grad = Gradient::new(&pi, n).eval(p, prm)?;
            jac.set_row(n + i, &grad.transpose());
        }
        let zeta_val = self.zeta.zeta.eval(p, prm)?;
        let zgrad = Gradient::new(&self.zeta.zeta, n).eval(p, prm)?;
        jac.set_row(dim - 1, &zgrad.transpose());

        // Φ*(dζ̃ − pᵢ dqⁱ): covector (−p, 0, 1) at Φ(p) composed with the Jacobian
        let mut target = DVector::zeros(dim);
        for i in 0..n {
            target[i] = -mom[i];
        }
        target[dim - 1] = 1.0;
        let pulled = jac.transpose() * target;
        let eta = self.extended_lagrangian_form().eval(p, prm)?;
        Ok(LegendreImage {
            q: p.q().to_vec(),
            p: mom,
            zeta: zeta_val,
            pullback_residual: (pulled - eta).amax(),
            jacobian_det: jac.determinant(),
        })
    }
}

//! Contact Lagrangian systems with the canonical action coordinate `z`.

use crate::contact::{CoordOneForm, CoordVectorField, Degeneracy, LinearSystem, Slot};
use crate::error::{Error, Result};
use crate::expr::{Coord, Expr, ParamSet, StatePoint};
use nalgebra::{DMatrix, DVector};

/// Threshold on `|det W|` below which a Lagrangian counts as singular.
pub const DET_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct ContactLagrangianSystem {
    pub n: usize,
    pub lagrangian: Expr,
    pub params: ParamSet,
}

impl ContactLagrangianSystem {
    pub fn new(n: usize, lagrangian: Expr, params: ParamSet) -> Result<Self> {
        if lagrangian.required_dim() > n {
            return Err(Error::Dimension(format!(
                "Lagrangian references coordinates beyond n = {n}"
            )));
        }
        Ok(ContactLagrangianSystem {
            n,
            lagrangian,
            params,
        })
    }

    pub fn parse(text: &str, n: usize, params: ParamSet) -> Result<Self> {
        Self::new(n, Expr::parse(text, n)?, params)
    }

    fn l(&self) -> &Expr {
        &self.lagrangian
    }

    /// `∂L/∂vᵢ`.
    pub fn momentum(&self, i: usize) -> Expr {
        self.l().diff(Coord::V(i))
    }

    /// `η_L = dz − Σ (∂L/∂vᵢ) dqⁱ`.
    pub fn lagrangian_form(&self) -> CoordOneForm {
        let n = self.n;
        let mut comps: Vec<Expr> = (0..n).map(|i| self.momentum(i).neg()).collect();
        comps.extend((0..n).map(|_| Expr::zero()));
        comps.push(Expr::one());
        CoordOneForm::new(n, comps).expect("lagrangian form layout")
    }

    /// `E_L = Σ vᵢ ∂L/∂vᵢ − L`.
    pub fn energy(&self) -> Expr {
        let terms: Vec<Expr> = (0..self.n)
            .map(|i| Expr::v(i).mul(&self.momentum(i)))
            .collect();
        Expr::sum(&terms).sub(self.l())
    }

    /// Symbolic velocity Hessian `W_ij = ∂²L/∂vᵢ∂vⱼ`.
    pub fn hessian_exprs(&self) -> Vec<Expr> {
        let n = self.n;
        let mut w = Vec::with_capacity(n * n);
        for i in 0..n {
            let li = self.momentum(i);
            for j in 0..n {
                w.push(li.diff(Coord::V(j)));
            }
        }
        w
    }

    pub fn velocity_hessian(&self, p: &StatePoint) -> Result<DMatrix<f64>> {
        let n = self.n;
        let exprs = self.hessian_exprs();
        let mut w = DMatrix::zeros(n, n);
        for (k, e) in exprs.iter().enumerate() {
            w[(k / n, k % n)] = e.eval(p, &self.params)?;
        }
        Ok(w)
    }

    /// `(det W, |det W| > DET_TOL)` at `p`.
    pub fn regularity(&self, p: &StatePoint) -> Result<(f64, bool)> {
        let det = self.velocity_hessian(p)?.determinant();
        Ok((det, det.abs() > DET_TOL))
    }

    /// Right-hand side of `W a = rhs` from expanding `d/dt (∂L/∂vᵢ)` along a
    /// SODE with `ż = L`:
    /// `rhsᵢ = ∂L/∂qᵢ + L_z L_{vᵢ} − Σⱼ vⱼ ∂²L/∂qⱼ∂vᵢ − L ∂²L/∂z∂vᵢ`.
    fn acceleration_rhs(&self) -> Vec<Expr> {
        let l = self.l();
        let lz = l.diff(Coord::Z);
        (0..self.n)
            .map(|i| {
                let lv = self.momentum(i);
                let mut acc = l.diff(Coord::Q(i)).add(&lz.mul(&lv));
                for j in 0..self.n {
                    acc = acc.sub(&Expr::v(j).mul(&lv.diff(Coord::Q(j))));
                }
                acc.sub(&l.mul(&lv.diff(Coord::Z)))
            })
            .collect()
    }

    fn acceleration_system(&self) -> LinearSystem {
        LinearSystem::new(
            self.n,
            self.hessian_exprs(),
            self.acceleration_rhs(),
            Degeneracy::Determinant(DET_TOL),
            "velocity Hessian",
        )
    }

    /// Herglotz vector field `vⁱ∂qⁱ + aⁱ∂vⁱ + L∂z`, accelerations solved
    /// pointwise from `W a = rhs`.
    pub fn herglotz_field(&self) -> CoordVectorField {
        let n = self.n;
        let mut slots: Vec<Slot> = (0..n).map(|i| Slot::Explicit(Expr::v(i))).collect();
        slots.extend((0..n).map(Slot::Solved));
        slots.push(Slot::Explicit(self.l().clone()));
        CoordVectorField::implicit(n, slots, self.acceleration_system()).expect("herglotz layout")
    }

    /// Closed-form accelerations by Cramer's rule (n <= 4).
    pub fn symbolic_accelerations(&self) -> Option<Vec<Expr>> {
        self.acceleration_system().symbolic_solution()
    }

    /// Accelerations at `p`.
    pub fn accelerations(&self, p: &StatePoint) -> Result<DVector<f64>> {
        Ok(self.acceleration_system().solve(p, &self.params)?.solution)
    }

    /// Herglotz-equation defect with accelerations `a` substituted:
    /// `rᵢ = d/dt(∂L/∂vᵢ) − ∂L/∂qᵢ − (∂L/∂z)(∂L/∂vᵢ)`, with `ż = L`.
    pub fn herglotz_residual(&self, p: &StatePoint, a: &[f64]) -> Result<DVector<f64>> {
        if a.len() != self.n {
            return Err(Error::Dimension(format!(
                "expected {} accelerations, got {}",
                self.n,
                a.len()
            )));
        }
        let prm = &self.params;
        let l = self.l();
        let l_val = l.eval(p, prm)?;
        let lz = l.diff(Coord::Z).eval(p, prm)?;
        let mut r = DVector::zeros(self.n);
        for i in 0..self.n {
            let lv = self.momentum(i);
            let mut ddt = lv.diff(Coord::Z).eval(p, prm)? * l_val;
            for j in 0..self.n {
                ddt += p.v()[j] * lv.diff(Coord::Q(j)).eval(p, prm)?;
                ddt += a[j] * lv.diff(Coord::V(j)).eval(p, prm)?;
            }
            r[i] = ddt - l.diff(Coord::Q(i)).eval(p, prm)? - lz * lv.eval(p, prm)?;
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{conformal_factor, contract, ContactHamiltonianSystem};

    fn damped(gam: f64) -> ContactLagrangianSystem {
        ContactLagrangianSystem::parse("0.5*v1^2 - gam*z", 1, ParamSet::new().with("gam", gam)).unwrap()
    }

    fn parachute() -> ContactLagrangianSystem {
        let params = ParamSet::new().with("m", 1.0).with("gam", 1.0).with("g", 9.8);
        ContactLagrangianSystem::parse(
            "0.5*v1^2 - m*g/(2*gam)*(exp(2*gam*q1) - 1) + 2*gam*v1*z",
            1,
            params,
        )
        .unwrap()
    }

    fn pt(q: f64, v: f64, z: f64) -> StatePoint {
        StatePoint::new(&[q], &[v], z).unwrap()
    }

    #[test]
    fn lagrangian_form_of_damped_particle() {
        let eta = damped(0.1).lagrangian_form();
        let c = eta.components();
        assert_eq!(c[0], Expr::v(0).neg());
        assert!(c[1].is_zero());
        assert!(c[2].is_one());
    }

    #[test]
    fn parachute_form_has_z_dependent_momentum() {
        let sys = parachute();
        let eta = sys.lagrangian_form();
        let p = pt(0.3, 1.5, -0.4);
        let val = eta.eval(&p, &sys.params).unwrap();
        assert!((val[0] + (1.5 + 2.0 * 1.0 * -0.4)).abs() < 1e-14);
    }

    #[test]
    fn energy_examples() {
        let sys = damped(0.1);
        let e = sys.energy();
        let p = pt(0.0, 2.0, 1.0);
        assert!((e.eval(&p, &sys.params).unwrap() - (2.0 + 0.1)).abs() < 1e-14);

        let c = ContactLagrangianSystem::parse("3.5", 1, ParamSet::new()).unwrap();
        assert_eq!(c.energy().eval(&p, &ParamSet::new()).unwrap(), -3.5);

        let homogeneous = ContactLagrangianSystem::parse("q1*v1 + z*v1", 1, ParamSet::new()).unwrap();
        assert_eq!(homogeneous.energy().eval(&p, &ParamSet::new()).unwrap(), 0.0);
    }

    #[test]
    fn regularity_examples() {
        let free = ContactLagrangianSystem::parse("0.5*v1^2", 1, ParamSet::new()).unwrap();
        assert_eq!(free.regularity(&pt(0.0, 3.0, 0.0)).unwrap(), (1.0, true));
        let quartic = ContactLagrangianSystem::parse("v1^4", 1, ParamSet::new()).unwrap();
        let (det, ok) = quartic.regularity(&pt(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(det, 0.0);
        assert!(!ok);
    }

    #[test]
    fn damped_herglotz_field_value() {
        let sys = damped(0.1);
        let x = sys.herglotz_field().eval(&pt(0.0, 2.0, 0.0), &sys.params).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15);
        assert!((x[1] + 0.2).abs() < 1e-15);
        assert!((x[2] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn parachute_acceleration() {
        let sys = parachute();
        let a = sys.accelerations(&pt(0.0, 2.0, 0.0)).unwrap();
        assert!((a[0] + 5.8).abs() < 1e-12, "{}", a[0]);
    }

    #[test]
    fn free_particle_does_not_accelerate() {
        let sys = ContactLagrangianSystem::parse("0.5*v1^2", 1, ParamSet::new()).unwrap();
        assert_eq!(sys.accelerations(&pt(0.4, -1.0, 2.0)).unwrap()[0], 0.0);
    }

    #[test]
    fn singular_hessian_is_an_error() {
        let sys = ContactLagrangianSystem::parse("v1^4", 1, ParamSet::new()).unwrap();
        let err = sys.herglotz_field().eval(&pt(0.0, 0.0, 0.0), &sys.params);
        assert!(matches!(err, Err(Error::Singular { .. })));
    }

    #[test]
    fn residual_examples() {
        let sys = damped(0.1);
        let r = sys.herglotz_residual(&pt(0.0, 2.0, 0.0), &[0.0]).unwrap();
        assert!((r[0] - 0.2).abs() < 1e-15);
        let free = ContactLagrangianSystem::parse("0.5*v1^2", 1, ParamSet::new()).unwrap();
        assert_eq!(free.herglotz_residual(&pt(0.0, 2.0, 0.0), &[1.0]).unwrap()[0], 1.0);
        let p = pt(0.2, -0.7, 0.9);
        let a = parachute().accelerations(&p).unwrap();
        let r = parachute().herglotz_residual(&p, a.as_slice()).unwrap();
        assert!(r[0].abs() < 1e-10);
    }

    #[test]
    fn herglotz_field_is_hamiltonian_field_of_lagrangian_data() {
        let sys = parachute();
        let ham = ContactHamiltonianSystem::new(sys.lagrangian_form(), sys.energy(), sys.params.clone());
        let xi = sys.herglotz_field();
        for &(q, v, z) in &[(0.1, 0.5, -0.3), (-0.6, 1.2, 0.8), (0.0, -2.0, 0.1)] {
            let p = pt(q, v, z);
            let a = xi.eval(&p, &sys.params).unwrap();
            let b = ham.hamiltonian_field(&p).unwrap();
            assert!((a - b).amax() < 1e-9);
            let eta = sys.lagrangian_form();
            let e = sys.energy().eval(&p, &sys.params).unwrap();
            assert!((contract(&eta, &xi, &p, &sys.params).unwrap() + e).abs() < 1e-10);
            let (g, res) = conformal_factor(&eta, &xi, &p, &sys.params).unwrap();
            let lz = sys.lagrangian.diff(Coord::Z).eval(&p, &sys.params).unwrap();
            assert!((g - lz).abs() < 1e-9 && res < 1e-9, "g={g} lz={lz} res={res}");
        }
    }

    #[test]
    fn cramer_accelerations_match_pointwise_solve() {
        let sys = ContactLagrangianSystem::parse(
            "0.5*v1^2 + 0.5*v2^2 + 0.1*v1*v2*q2 - gam*z + sin(q1)*v2",
            2,
            ParamSet::new().with("gam", 0.3),
        )
        .unwrap();
        let acc = sys.symbolic_accelerations().unwrap();
        let p = StatePoint::new(&[0.3, -0.2], &[0.5, 1.1], 0.7).unwrap();
        let a = sys.accelerations(&p).unwrap();
        for i in 0..2 {
            assert!((acc[i].eval(&p, &sys.params).unwrap() - a[i]).abs() < 1e-12);
        }
    }
}

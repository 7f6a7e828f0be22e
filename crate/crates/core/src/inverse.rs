//! Inverse problem: is a given SODE the Herglotz field of some Lagrangian?

use crate::contact::CoordVectorField;
use crate::error::{Error, Result};
use crate::expr::{Coord, Expr, ParamSet};
use crate::extended::ActionFunction;
use crate::lagrangian::ContactLagrangianSystem;
use crate::report::{sampled_check, CheckReport, PointResult, Tolerances, Verdict};
use crate::sampling::SamplePlan;
use nalgebra::DMatrix;

/// `|Eᵢ|` at or below this excludes a point from the ratio tests.
pub const E_EXCLUDE_TOL: f64 = 1e-6;

/// `ξ = vⁱ∂qⁱ + aⁱ∂vⁱ + b∂z`.
#[derive(Clone, Debug)]
pub struct SODESystem {
    pub n: usize,
    pub accelerations: Vec<Expr>,
    pub z_rate: Expr,
    pub params: ParamSet,
}

/// Data recovered by [`extended_inverse_check`].
#[derive(Clone, Debug)]
pub struct ExtendedInverseData {
    /// `yᵢ = ∂ξ(ζ)/∂vⁱ`.
    pub y: Vec<Expr>,
    /// Conformal factor `(∂ξ(ζ)/∂z)/(∂ζ/∂z)`.
    pub g: Expr,
    /// The candidate Lagrangian `ξ(ζ)` in the base chart.
    pub lagrangian: Expr,
}

impl SODESystem {
    pub fn new(accelerations: Vec<Expr>, z_rate: Expr, params: ParamSet) -> Result<Self> {
        let n = accelerations.len();
        if n == 0 {
            return Err(Error::Dimension("SODE needs at least one acceleration".into()));
        }
        if accelerations.iter().chain([&z_rate]).any(|e| e.required_dim() > n) {
            return Err(Error::Dimension(format!("SODE references coordinates beyond n = {n}")));
        }
        Ok(SODESystem {
            n,
            accelerations,
            z_rate,
            params,
        })
    }

    pub fn parse(accelerations: &[&str], z_rate: &str, params: ParamSet) -> Result<Self> {
        let n = accelerations.len();
        let acc = accelerations
            .iter()
            .map(|s| Expr::parse(s, n))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(acc, Expr::parse(z_rate, n)?, params)
    }

    /// Herglotz field of `sys` in closed form (Cramer's rule, `n <= 4`).
    pub fn from_herglotz(sys: &ContactLagrangianSystem) -> Result<Self> {
        let acc = sys
            .symbolic_accelerations()
            .ok_or_else(|| Error::Dimension(format!("closed-form accelerations need n <= 4, got {}", sys.n)))?;
        Self::new(acc, sys.lagrangian.clone(), sys.params.clone())
    }

    /// Copy with `delta` added to acceleration `i`.
    pub fn perturbed(&self, i: usize, delta: f64) -> Self {
        let mut s = self.clone();
        s.accelerations[i] = s.accelerations[i].add(&Expr::constant(delta));
        s
    }

    pub fn field(&self) -> CoordVectorField {
        CoordVectorField::sode(&self.accelerations, &self.z_rate)
    }

    fn components(&self) -> Vec<Expr> {
        let mut c: Vec<Expr> = (0..self.n).map(Expr::v).collect();
        c.extend(self.accelerations.iter().cloned());
        c.push(self.z_rate.clone());
        c
    }

    /// `ξ(f)` as an expression.
    pub fn derivative_of(&self, f: &Expr) -> Expr {
        f.directional(self.n, &self.components())
    }
}

/// Checks whether `ξ` is the Herglotz field of `L = b`:
/// `ξ(∂b/∂vⁱ) − ∂b/∂qⁱ − (∂b/∂z)(∂b/∂vⁱ) = 0` and `det ∂²b/∂v∂v ≠ 0`.
/// Returns `b` on pass.
pub fn naive_inverse_check(sode: &SODESystem, plan: &SamplePlan, tol: Tolerances) -> (CheckReport, Option<Expr>) {
    let n = sode.n;
    let b = &sode.z_rate;
    let residuals: Vec<Expr> = (0..n)
        .map(|i| {
            let bv = b.diff(Coord::V(i));
            sode.derivative_of(&bv)
                .sub(&b.diff(Coord::Q(i)))
                .sub(&b.diff(Coord::Z).mul(&bv))
        })
        .collect();
    let hessian: Vec<Expr> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| b.diff(Coord::V(i)).diff(Coord::V(j)))
        .collect();
    let prm = &sode.params;
    let report = sampled_check("check-inverse", tol, plan, n, |_| true, |p| {
        let mut r = PointResult::default();
        for (i, e) in residuals.iter().enumerate() {
            r.value(format!("herglotz{}", i + 1), e.eval(p, prm)?);
        }
        let mut w = DMatrix::zeros(n, n);
        for (k, e) in hessian.iter().enumerate() {
            w[(k / n, k % n)] = e.eval(p, prm)?;
        }
        let det = w.determinant();
        r.info("det_w", det);
        if det.abs() <= tol.det_tol {
            r.issue(
                Verdict::Fail,
                "regularity violated",
                format!("det ∂²b/∂v∂v = {det:e} at {:?}", p.coords()),
            );
        }
        Ok(r)
    });
    let recovered = report.passed().then(|| b.clone());
    (report, recovered)
}

/// Checks the extended inverse condition for a velocity-free `ζ(q, z)`:
/// `(∂F/∂qⁱ − ξ(∂F/∂vⁱ)) ζ_z = (ζ_qⁱ − ∂F/∂vⁱ) ∂F/∂z` with `F = ξ(ζ)`.
pub fn extended_inverse_check(
    sode: &SODESystem,
    zeta: &ActionFunction,
    plan: &SamplePlan,
    tol: Tolerances,
) -> (CheckReport, Option<ExtendedInverseData>) {
    let task = "check-inverse-ext";
    let n = sode.n;
    if zeta.n != n {
        let e = Error::Dimension(format!("action function of dimension {} for SODE of dimension {n}", zeta.n));
        return (CheckReport::error(task, tol, Some(plan), &e), None);
    }
    if !zeta.is_velocity_free() {
        let e = Error::Precondition("action function must not depend on velocities".into());
        return (CheckReport::error(task, tol, Some(plan), &e), None);
    }
    let prm = match sode.params.merged(&zeta.params) {
        Ok(p) => p,
        Err(e) => return (CheckReport::error(task, tol, Some(plan), &Error::Precondition(e)), None),
    };
    let z = &zeta.zeta;
    let zz = zeta.zeta_z();
    let f = sode.derivative_of(z);
    let fz = f.diff(Coord::Z);
    let y: Vec<Expr> = (0..n).map(|i| f.diff(Coord::V(i))).collect();
    let residuals: Vec<Expr> = (0..n)
        .map(|i| {
            let lhs = f.diff(Coord::Q(i)).sub(&sode.derivative_of(&y[i])).mul(&zz);
            let rhs = z.diff(Coord::Q(i)).sub(&y[i]).mul(&fz);
            lhs.sub(&rhs)
        })
        .collect();
    let accept = |p: &crate::expr::StatePoint| {
        zz.eval(p, &prm)
            .is_ok_and(|v| v.abs() > crate::equivalence::SAMPLE_FRAME_TOL)
    };
    let report = sampled_check(task, tol, plan, n, accept, |p| {
        let mut r = PointResult::default();
        for (i, e) in residuals.iter().enumerate() {
            r.value(format!("inv_pde{}", i + 1), e.eval(p, &prm)?);
        }
        Ok(r)
    });
    let data = report.passed().then(|| ExtendedInverseData {
        y,
        g: fz.div(&zz),
        lagrangian: f,
    });
    (report, data)
}

/// Necessary conditions for a velocity-free action function:
/// `Dᵢ = Σⱼ aʲ b_{vⁱvʲ} + Σⱼ vʲ b_{vⁱqʲ} − b_{qⁱ}` and
/// `Eᵢ = b_{vⁱ} b_z − b b_{vⁱz}` must satisfy `Dᵢ = ζ_z Eᵢ`.
///
/// Residuals per point: `zero_set_mismatch` (exactly one of `Dᵢ`, `Eᵢ`
/// vanishes), `ratio_spread` (max pairwise `|Dᵢ/Eᵢ − Dⱼ/Eⱼ|`) and
/// `ratio_v_derivative` (max `|∂(Dᵢ/Eᵢ)/∂vᵏ|`). Ratio tests skip indices with
/// `|Eᵢ| <= 1e-6`.
pub fn di_ei_diagnostics(sode: &SODESystem, plan: &SamplePlan, tol: Tolerances) -> CheckReport {
    let n = sode.n;
    let b = &sode.z_rate;
    let bz = b.diff(Coord::Z);
    let mut d = Vec::with_capacity(n);
    let mut e = Vec::with_capacity(n);
    for i in 0..n {
        let bv = b.diff(Coord::V(i));
        let mut di = b.diff(Coord::Q(i)).neg();
        for j in 0..n {
            di = di
                .add(&sode.accelerations[j].mul(&bv.diff(Coord::V(j))))
                .add(&Expr::v(j).mul(&bv.diff(Coord::Q(j))));
        }
        d.push(di);
        e.push(bv.mul(&bz).sub(&b.mul(&bv.diff(Coord::Z))));
    }
    // ∂(D/E)/∂vᵏ = (D_vᵏ E − D E_vᵏ)/E²
    let ratio_dv: Vec<Vec<Expr>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|k| {
                    let num = d[i].diff(Coord::V(k)).mul(&e[i]).sub(&d[i].mul(&e[i].diff(Coord::V(k))));
                    num.div(&e[i].powi(2))
                })
                .collect()
        })
        .collect();
    let prm = &sode.params;
    let zero = tol.pass_tol;
    let mut report = sampled_check("check-di-ei", tol, plan, n, |_| true, |p| {
        let mut r = PointResult::default();
        let mut mismatch = 0.0;
        let mut ratios = Vec::new();
        let mut excluded = 0.0;
        let mut dv_max: f64 = 0.0;
        for i in 0..n {
            let di = d[i].eval(p, prm)?;
            let ei = e[i].eval(p, prm)?;
            if (di.abs() <= zero) != (ei.abs() <= zero) {
                mismatch = 1.0;
            }
            if ei.abs() > E_EXCLUDE_TOL {
                ratios.push(di / ei);
                for k in 0..n {
                    dv_max = dv_max.max(ratio_dv[i][k].eval(p, prm)?.abs());
                }
            } else {
                excluded += 1.0;
            }
            r.info(format!("d{}", i + 1), di);
            r.info(format!("e{}", i + 1), ei);
        }
        let spread = ratios
            .iter()
            .flat_map(|a| ratios.iter().map(move |b| (a - b).abs()))
            .fold(0.0, f64::max);
        r.value("zero_set_mismatch", mismatch);
        r.value("ratio_spread", spread);
        r.value("ratio_v_derivative", dv_max);
        r.info("excluded_indices", excluded);
        Ok(r)
    });
    let excluded: f64 = report
        .residuals
        .iter()
        .filter_map(|r| r.info.get("excluded_indices"))
        .sum();
    report.note(format!(
        "{excluded} (point, index) pairs excluded from ratio tests (|E| <= {E_EXCLUDE_TOL:e})"
    ));
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> SamplePlan {
        SamplePlan::cube(-1.0, 1.0, 100, 11)
    }

    fn chute() -> ContactLagrangianSystem {
        let prm = ParamSet::new().with("m", 1.0).with("gam", 1.0).with("g", 9.8);
        ContactLagrangianSystem::parse("0.5*v1^2 - m*g/(2*gam)*(exp(2*gam*q1) - 1) + 2*gam*v1*z", 1, prm).unwrap()
    }

    fn damped() -> SODESystem {
        SODESystem::parse(&["-gam*v1"], "0.5*v1^2 - gam*z", ParamSet::new().with("gam", 0.1)).unwrap()
    }

    #[test]
    fn naive_round_trip() {
        let tol = Tolerances::default();
        let sode = SODESystem::from_herglotz(&chute()).unwrap();
        let (r, l) = naive_inverse_check(&sode, &plan(), tol);
        assert!(r.passed(), "{} {:?}", r.max_residual, r.diagnostics);
        assert_eq!(l.unwrap(), chute().lagrangian);

        let (r, _) = naive_inverse_check(&damped(), &plan(), tol);
        assert!(r.passed());

        let (r, l) = naive_inverse_check(&SODESystem::parse(&["q1"], "0", ParamSet::new()).unwrap(), &plan(), tol);
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(l.is_none());
    }

    #[test]
    fn naive_detects_perturbation() {
        let (r, _) = naive_inverse_check(&damped().perturbed(0, 0.1), &plan(), Tolerances::default());
        assert_eq!(r.verdict, Verdict::Fail);
        assert!((r.max_residual - 0.1).abs() < 1e-12);
    }

    #[test]
    fn extended_examples() {
        let tol = Tolerances::default();
        let id = ActionFunction::identity(1);
        let (r, data) = extended_inverse_check(&damped(), &id, &plan(), tol);
        assert!(r.passed());
        let data = data.unwrap();
        assert_eq!(data.g.eval(&crate::StatePoint::new(&[0.0], &[1.0], 2.0).unwrap(), &damped().params).unwrap(), -0.1);

        let (r, _) = extended_inverse_check(&damped().perturbed(0, 0.1), &id, &plan(), tol);
        assert_eq!(r.verdict, Verdict::Fail);

        let free = SODESystem::parse(&["-q1"], "0.5*v1^2 - 0.5*q1^2", ParamSet::new()).unwrap();
        assert!(extended_inverse_check(&free, &id, &plan(), tol).0.passed());
        assert!(naive_inverse_check(&free, &plan(), tol).0.passed());

        let zv = ActionFunction::parse("z + v1", 1, ParamSet::new()).unwrap();
        assert_eq!(extended_inverse_check(&damped(), &zv, &plan(), tol).0.verdict, Verdict::Error);
    }

    #[test]
    fn d_e_diagnostics() {
        let tol = Tolerances::default();
        let sode = SODESystem::from_herglotz(&chute()).unwrap();
        let r = di_ei_diagnostics(&sode, &plan(), tol);
        assert!(r.passed(), "{} {:?}", r.max_residual, r.diagnostics);
        for rec in &r.residuals {
            if rec.info["e1"].abs() > 1e-3 {
                assert!((rec.info["d1"] / rec.info["e1"] - 1.0).abs() < 1e-9);
            }
        }
        let r = di_ei_diagnostics(&sode.perturbed(0, 0.1), &plan(), tol);
        assert_eq!(r.verdict, Verdict::Fail);

        // z-free: E ≡ 0, so D must vanish
        let el = SODESystem::parse(&["-q1"], "0.5*v1^2 - 0.5*q1^2", ParamSet::new()).unwrap();
        assert!(di_ei_diagnostics(&el, &plan(), tol).passed());
        let bad = SODESystem::parse(&["-2*q1"], "0.5*v1^2 - 0.5*q1^2", ParamSet::new()).unwrap();
        assert_eq!(di_ei_diagnostics(&bad, &plan(), tol).verdict, Verdict::Fail);
    }
}

//! Sampled checks of conformal and dynamical equivalence of contact
//! Hamiltonian systems, horizontal similarity of SODEs, and strong and
//! general equivalence of extended Lagrangian systems.

use crate::contact::{ContactHamiltonianSystem, CoordVectorField};
use crate::error::{Error, Result};
use crate::expr::{Coord, Expr, Gradient, ParamSet, StatePoint};
use crate::extended::{zeta_partial, ActionFunction, ExtendedLagrangianSystem};
use crate::lagrangian::ContactLagrangianSystem;
use crate::report::{sampled_check, CheckReport, PointResult, Tolerances, Verdict};
use crate::sampling::SamplePlan;
use nalgebra::DVector;

/// Sample points with `|∂ζ/∂z|` at or below this are rejected.
pub const SAMPLE_FRAME_TOL: f64 = 1e-8;

/// `|H|` above this is used to estimate the conformal factor as `H̄/H`.
pub const H_ESTIMATE_TOL: f64 = 1e-8;

fn frame_filter<'a>(zeta: &'a ActionFunction, params: &'a ParamSet) -> impl Fn(&StatePoint) -> bool + 'a {
    let zz = zeta.zeta_z();
    move |p| {
        zz.eval(p, params)
            .map(|v| v.abs() > SAMPLE_FRAME_TOL)
            .unwrap_or(false)
    }
}

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("systems of dimension {a} and {b}")));
    }
    Ok(())
}

fn merged(a: &ParamSet, b: &ParamSet) -> Result<ParamSet> {
    a.merged(b).map_err(Error::Precondition)
}

/// Checks `η̄ = f η` and `H̄ = f H`. Without `f` it is estimated pointwise as
/// `H̄/H` where `|H| > 1e-8`, and from the forms elsewhere.
pub fn conformal_similarity_check(
    a: &ContactHamiltonianSystem,
    b: &ContactHamiltonianSystem,
    f: Option<&Expr>,
    plan: &SamplePlan,
    tol: Tolerances,
) -> CheckReport {
    let task = "check-conformal";
    let setup = same_dim(a.n, b.n).and_then(|_| merged(&a.params, &b.params));
    let params = match setup {
        Ok(p) => p,
        Err(e) => return CheckReport::error(task, tol, Some(plan), &e),
    };
    if f.is_none() {
        // the factor must be estimable from H somewhere
        let any_h = plan.points(a.n).map(|pts| {
            pts.iter()
                .any(|p| a.h.eval(p, &a.params).is_ok_and(|h| h.abs() > H_ESTIMATE_TOL))
        });
        match any_h {
            Ok(true) => {}
            Ok(false) => {
                let e = Error::Precondition("conformal factor not estimable: H ≈ 0 at every sample point".into());
                return CheckReport::error(task, tol, Some(plan), &e);
            }
            Err(e) => return CheckReport::error(task, tol, Some(plan), &e),
        }
    }
    sampled_check(task, tol, plan, a.n, |_| true, |p| {
        let h = a.h.eval(p, &a.params)?;
        let hb = b.h.eval(p, &b.params)?;
        let eta = a.eta.eval(p, &a.params)?;
        let etab = b.eta.eval(p, &b.params)?;
        let fv = match f {
            Some(f) => f.eval(p, &params)?,
            None if h.abs() > H_ESTIMATE_TOL => hb / h,
            None => etab.dot(&eta) / eta.norm_squared(),
        };
        let mut r = PointResult::default();
        if fv.abs() <= H_ESTIMATE_TOL || !fv.is_finite() {
            r.issue(Verdict::Fail, "conformal factor vanishes", format!("f = {fv:e} at {:?}", p.coords()));
        }
        r.value("eta", (&etab - &eta * fv).amax());
        r.value("hamiltonian", (hb - fv * h).abs());
        r.info("f", fv);
        Ok(r)
    })
}

/// Checks `X_H = X̄_H̄` componentwise.
pub fn dynamical_equivalence_check(
    a: &ContactHamiltonianSystem,
    b: &ContactHamiltonianSystem,
    plan: &SamplePlan,
    tol: Tolerances,
) -> CheckReport {
    let task = "check-dynamical";
    if let Err(e) = same_dim(a.n, b.n) {
        return CheckReport::error(task, tol, Some(plan), &e);
    }
    let xa = a.hamiltonian_vector_field();
    let xb = b.hamiltonian_vector_field();
    sampled_check(task, tol, plan, a.n, |_| true, |p| {
        let va = xa.eval(p, &a.params)?;
        let vb = xb.eval(p, &b.params)?;
        let mut r = PointResult::default();
        r.value("field", (va - vb).amax());
        Ok(r)
    })
}

/// Points where exactly one of `H`, `H̄` vanishes (`|·| <= pass_tol`), or
/// where `sign(H H̄)` differs from its predominant value over the sample (a
/// nonvanishing conformal factor keeps that sign fixed). Any mismatch fails
/// the report.
pub fn zero_set_diagnostic(
    a: &ContactHamiltonianSystem,
    b: &ContactHamiltonianSystem,
    plan: &SamplePlan,
    tol: Tolerances,
) -> CheckReport {
    let task = "check-zero-set";
    if let Err(e) = same_dim(a.n, b.n) {
        return CheckReport::error(task, tol, Some(plan), &e);
    }
    let zero = tol.pass_tol;
    let mut report = sampled_check(task, tol, plan, a.n, |_| true, |p| {
        let h = a.h.eval(p, &a.params)?;
        let hb = b.h.eval(p, &b.params)?;
        let mut r = PointResult::default();
        let (za, zb) = (h.abs() <= zero, hb.abs() <= zero);
        r.value("mismatch", if za != zb { 1.0 } else { 0.0 });
        r.info("h", h);
        r.info("h_bar", hb);
        Ok(r)
    });
    let signs: Vec<Option<f64>> = report
        .residuals
        .iter()
        .map(|r| {
            let (h, hb) = (r.info["h"], r.info["h_bar"]);
            (h.abs() > zero && hb.abs() > zero).then(|| (h * hb).signum())
        })
        .collect();
    let positive = signs.iter().filter(|s| **s == Some(1.0)).count();
    let negative = signs.iter().filter(|s| **s == Some(-1.0)).count();
    let reference = if positive >= negative { 1.0 } else { -1.0 };
    for (rec, s) in report.residuals.iter_mut().zip(&signs) {
        if s.is_some_and(|s| s != reference) {
            rec.values.insert("mismatch".into(), 1.0);
        }
    }
    let count = report
        .residuals
        .iter()
        .filter(|r| r.values.get("mismatch") == Some(&1.0))
        .count();
    report.note(format!("{count} zero-set mismatch point(s)"));
    report.finish()
}

fn sode_defect(x: &DVector<f64>, p: &StatePoint) -> f64 {
    let n = p.dim();
    (0..n).map(|i| (x[i] - p.v()[i]).abs()).fold(0.0, f64::max)
}

/// Checks `aⁱ(p) = āⁱ(φ(p))` and `ξ(ζ)(p) = b̄(φ(p))` with
/// `φ(q, v, z) = (q, v, ζ(q, v, z))`.
pub fn horizontal_similarity_check(
    xi: &CoordVectorField,
    xibar: &CoordVectorField,
    zeta: &ActionFunction,
    params: &ParamSet,
    plan: &SamplePlan,
    tol: Tolerances,
) -> CheckReport {
    let task = "check-horizontal";
    let n = xi.dim();
    if let Err(e) = same_dim(n, xibar.dim()).and_then(|_| same_dim(n, zeta.n)) {
        return CheckReport::error(task, tol, Some(plan), &e);
    }
    let params = match merged(params, &zeta.params) {
        Ok(p) => p,
        Err(e) => return CheckReport::error(task, tol, Some(plan), &e),
    };
    let zgrad = Gradient::new(&zeta.zeta, n);
    sampled_check(task, tol, plan, n, frame_filter(zeta, &params), |p| {
        let x = xi.eval(p, &params)?;
        let mut coords = p.coords().to_vec();
        coords[2 * n] = zeta.zeta.eval(p, &params)?;
        let phi = StatePoint::from_coords(n, coords)?;
        let xb = xibar.eval(&phi, &params)?;
        let mut r = PointResult::default();
        let (d1, d2) = (sode_defect(&x, p), sode_defect(&xb, &phi));
        if d1.max(d2) > tol.pass_tol {
            r.issue(
                Verdict::Error,
                "input is not an extended SODE",
                format!("q-rate defect {:e} at {:?}", d1.max(d2), p.coords()),
            );
        }
        for i in 0..n {
            r.value(format!("a{}", i + 1), x[n + i] - xb[n + i]);
        }
        r.value("z_rate", zgrad.dot(&x, p, &params)? - xb[2 * n]);
        Ok(r)
    })
}

/// Residual `max |∂aⁱ/∂z|` of a SODE.
pub fn projectability_check(xi: &CoordVectorField, params: &ParamSet, plan: &SamplePlan, tol: Tolerances) -> CheckReport {
    let n = xi.dim();
    sampled_check("check-projectable", tol, plan, n, |_| true, |p| {
        let (x, jac) = xi.jet(p, params)?;
        let mut r = PointResult::default();
        let defect = sode_defect(&x, p);
        if defect > tol.pass_tol {
            r.issue(Verdict::Error, "input is not an extended SODE", format!("q-rate defect {defect:e}"));
        }
        let dz = (0..n).map(|i| jac[(n + i, 2 * n)].abs()).fold(0.0, f64::max);
        r.value("da_dz", dz);
        Ok(r)
    })
}

struct Pair {
    base: ContactLagrangianSystem,
    bar: ExtendedLagrangianSystem,
    params: ParamSet,
}

fn pair(l: &ContactLagrangianSystem, lbar_chart: &Expr, zeta: &ActionFunction) -> Result<Pair> {
    same_dim(l.n, zeta.n)?;
    let params = merged(&l.params, &zeta.params)?;
    let bar = ExtendedLagrangianSystem::from_zeta_chart(lbar_chart, zeta.clone(), params.clone())?;
    let base = ContactLagrangianSystem::new(l.n, l.lagrangian.clone(), params.clone())?;
    Ok(Pair { base, bar, params })
}

fn regularity_issues(pair: &Pair, p: &StatePoint, r: &mut PointResult) -> Result<bool> {
    let (det, ok) = pair.base.regularity(p)?;
    let (det_z, ok_z) = pair.bar.zeta_regularity(p)?;
    r.info("det_w", det);
    r.info("det_w_zeta", det_z);
    if !ok {
        r.issue(
            Verdict::Error,
            "regularity violated",
            format!("det W = {det:e} at {:?}", p.coords()),
        );
    }
    if !ok_z {
        r.issue(
            Verdict::Error,
            "zeta-regularity violated",
            format!("det W^ζ = {det_z:e} at {:?}", p.coords()),
        );
    }
    Ok(ok && ok_z)
}

/// Strong equivalence of `(L, z)` and `(L̄, ζ)`: `∂ζ/∂vⁱ = 0`,
/// `ζ_z L + vⁱ ζ_qⁱ = φ*L̄`, and `η^ζ_L̄ = ζ_z η_L`.
pub fn strong_equivalence_check(
    l: &ContactLagrangianSystem,
    lbar_chart: &Expr,
    zeta: &ActionFunction,
    plan: &SamplePlan,
    tol: Tolerances,
) -> CheckReport {
    let task = "check-strong-eq";
    let pair = match pair(l, lbar_chart, zeta) {
        Ok(p) => p,
        Err(e) => return CheckReport::error(task, tol, Some(plan), &e),
    };
    let n = l.n;
    let z = &zeta.zeta;
    let zv: Vec<Expr> = (0..n).map(|i| z.diff(Coord::V(i))).collect();
    let mut lhs = z.diff(Coord::Z).mul(&pair.base.lagrangian);
    for i in 0..n {
        lhs = lhs.add(&Expr::v(i).mul(&z.diff(Coord::Q(i))));
    }
    let defect = lhs.sub(&pair.bar.lagrangian);
    let eta_l = pair.base.lagrangian_form();
    let eta_bar = pair.bar.extended_lagrangian_form();
    let zz = zeta.zeta_z();
    let params = &pair.params;
    sampled_check(task, tol, plan, n, frame_filter(zeta, params), |p| {
        let mut r = PointResult::default();
        regularity_issues(&pair, p, &mut r)?;
        let mut vmax: f64 = 0.0;
        for e in &zv {
            if !e.is_zero() {
                vmax = vmax.max(e.eval(p, params)?.abs());
            }
        }
        r.value("zeta_v", vmax);
        r.value("lag_equiv", defect.eval(p, params)?);
        let scaled = eta_l.eval(p, params)? * zz.eval(p, params)?;
        r.value("conformal", (eta_bar.eval(p, params)? - scaled).amax());
        Ok(r)
    })
}

/// General equivalence of `(L, z)` and `(L̄, ζ)`:
/// `φ*L̄ = ξ_L(ζ)` and
/// `ξ_L(p̄ᵢ) − (∂L̄/∂qⁱ)_ζ − (∂L̄/∂ζ) p̄ᵢ = 0` with `p̄ᵢ = (∂L̄/∂vⁱ)_ζ`,
/// plus the direct comparison of the two Herglotz fields.
pub fn general_equivalence_check(
    l: &ContactLagrangianSystem,
    lbar_chart: &Expr,
    zeta: &ActionFunction,
    plan: &SamplePlan,
    tol: Tolerances,
) -> CheckReport {
    let task = "check-eq";
    let pair = match pair(l, lbar_chart, zeta) {
        Ok(p) => p,
        Err(e) => return CheckReport::error(task, tol, Some(plan), &e),
    };
    let n = l.n;
    let lbar = &pair.bar.lagrangian;
    let mom: Vec<Expr> = (0..n).map(|i| pair.bar.momentum(i)).collect();
    let mom_grad: Vec<Gradient> = mom.iter().map(|m| Gradient::new(m, n)).collect();
    let lq: Vec<Expr> = (0..n).map(|i| zeta_partial(lbar, zeta, Coord::Q(i))).collect();
    let lzeta = pair.bar.lagrangian_zeta();
    let zgrad = Gradient::new(&zeta.zeta, n);
    let xi = pair.base.herglotz_field();
    let xibar = pair.bar.zeta_herglotz_field();
    let params = &pair.params;
    sampled_check(task, tol, plan, n, frame_filter(zeta, params), |p| {
        let mut r = PointResult::default();
        if !regularity_issues(&pair, p, &mut r)? {
            return Ok(r);
        }
        let x = xi.eval(p, params)?;
        r.value("l_condition", lbar.eval(p, params)? - zgrad.dot(&x, p, params)?);
        let lz = lzeta.eval(p, params)?;
        for i in 0..n {
            let pi = mom[i].eval(p, params)?;
            let res = mom_grad[i].dot(&x, p, params)? - lq[i].eval(p, params)? - lz * pi;
            r.value(format!("p_condition{}", i + 1), res);
        }
        let xb = xibar.eval(p, params)?;
        r.value("field", (x - xb).amax());
        Ok(r)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::CoordOneForm;
    use crate::extended::parse_zeta_chart;

    fn form(comps: &[&str]) -> CoordOneForm {
        CoordOneForm::new(1, comps.iter().map(|s| Expr::parse(s, 1).unwrap()).collect()).unwrap()
    }

    fn ham(eta: &[&str], h: &str) -> ContactHamiltonianSystem {
        ContactHamiltonianSystem::new(form(eta), Expr::parse(h, 1).unwrap(), ParamSet::new())
    }

    fn plan() -> SamplePlan {
        SamplePlan::cube(-1.0, 1.0, 100, 42)
    }

    fn pair4() -> (ContactHamiltonianSystem, ContactHamiltonianSystem) {
        (ham(&["-v1", "0", "1"], "v1*q1 + z"), ham(&["v1", "0", "1"], "z - v1*q1"))
    }

    #[test]
    fn dynamical_pair_is_equivalent_but_not_conformal() {
        let (a, b) = pair4();
        let tol = Tolerances::default();
        let d = dynamical_equivalence_check(&a, &b, &plan(), tol);
        assert!(d.passed() && d.max_residual <= 1e-9, "{:?}", d.diagnostics);
        assert_eq!(conformal_similarity_check(&a, &b, None, &plan(), tol).verdict, Verdict::Fail);
        let z = zero_set_diagnostic(&a, &b, &SamplePlan::explicit(vec![vec![1.0, 1.0, -1.0]]), tol);
        assert_eq!(z.verdict, Verdict::Fail);
        assert_eq!(z.residuals[0].info["h"], 0.0);
        assert_eq!(z.residuals[0].info["h_bar"], -2.0);
    }

    #[test]
    fn normalization_is_conformal() {
        let a = ham(&["-v1", "0", "1"], "2");
        let b = ham(&["0.5*v1", "0", "-0.5"], "-1");
        let tol = Tolerances::default();
        let r = conformal_similarity_check(&a, &b, None, &plan(), tol);
        assert!(r.passed());
        assert_eq!(r.residuals[0].info["f"], -0.5);
        let f = Expr::constant(-0.5);
        assert!(conformal_similarity_check(&a, &b, Some(&f), &plan(), tol).passed());
        assert!(conformal_similarity_check(&a, &a, None, &plan(), tol).passed());
        assert!(zero_set_diagnostic(&a, &b, &plan(), tol).passed());
        assert!(dynamical_equivalence_check(&a, &b, &plan(), tol).passed());
    }

    #[test]
    fn conformal_errors() {
        let a = ham(&["-v1", "0", "1"], "0");
        let r = conformal_similarity_check(&a, &a, None, &plan(), Tolerances::default());
        assert_eq!(r.verdict, Verdict::Error);
        let f = Expr::parse("q1", 1).unwrap();
        let b = ham(&["-v1", "0", "1"], "1");
        let pts = SamplePlan::explicit(vec![vec![0.0, 0.3, 0.2]]);
        let r = conformal_similarity_check(&b, &b, Some(&f), &pts, Tolerances::default());
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn shifted_hamiltonian_is_not_equivalent() {
        let a = ham(&["-v1", "0", "1"], "0.5*v1^2");
        let b = ham(&["-v1", "0", "1"], "0.5*v1^2 + 1");
        let r = dynamical_equivalence_check(&a, &b, &plan(), Tolerances::default());
        assert_eq!(r.verdict, Verdict::Fail);
        assert!((r.max_residual - 1.0).abs() < 1e-12);
    }

    fn field(comps: &[&str]) -> CoordVectorField {
        CoordVectorField::new(1, comps.iter().map(|s| Expr::parse(s, 1).unwrap()).collect()).unwrap()
    }

    #[test]
    fn horizontal_similarity() {
        let prm = ParamSet::new().with("gam", 0.3);
        let tol = Tolerances::default();
        let xi = field(&["v1", "-gam*v1", "0.5*v1^2 - gam*z"]);
        let id = ActionFunction::identity(1);
        assert!(horizontal_similarity_check(&xi, &xi, &id, &prm, &plan(), tol).passed());

        // ξ(ζ) = 0 for ζ = z + v when a = −γv and b = γv
        let proj = field(&["v1", "-gam*v1", "gam*v1"]);
        let hat = field(&["v1", "-gam*v1", "0"]);
        let zeta = ActionFunction::parse("z + v1", 1, ParamSet::new()).unwrap();
        assert!(horizontal_similarity_check(&proj, &hat, &zeta, &prm, &plan(), tol).passed());

        let other = field(&["v1", "-2*gam*v1", "0.5*v1^2 - gam*z"]);
        let r = horizontal_similarity_check(&xi, &other, &zeta, &prm, &plan(), tol);
        assert_eq!(r.verdict, Verdict::Fail);

        let not_sode = field(&["2*v1", "0", "0"]);
        let r = horizontal_similarity_check(&not_sode, &not_sode, &id, &prm, &plan(), tol);
        assert_eq!(r.verdict, Verdict::Error);
    }

    #[test]
    fn projectability() {
        let prm = ParamSet::new().with("gam", 1.0).with("m", 1.0).with("g", 9.8);
        let tol = Tolerances::default();
        assert!(projectability_check(&field(&["v1", "-gam*v1", "z"]), &prm, &plan(), tol).passed());
        let r = projectability_check(&field(&["v1", "z", "0"]), &prm, &plan(), tol);
        assert_eq!(r.verdict, Verdict::Fail);
        let chute = ContactLagrangianSystem::parse(
            "0.5*v1^2 - m*g/(2*gam)*(exp(2*gam*q1) - 1) + 2*gam*v1*z",
            1,
            prm.clone(),
        )
        .unwrap();
        assert!(projectability_check(&chute.herglotz_field(), &prm, &plan(), tol).passed());
    }

    fn lag(text: &str, prm: &ParamSet) -> ContactLagrangianSystem {
        ContactLagrangianSystem::parse(text, 1, prm.clone()).unwrap()
    }

    fn zeta(text: &str) -> ActionFunction {
        ActionFunction::parse(text, 1, ParamSet::new()).unwrap()
    }

    #[test]
    fn strong_equivalence_examples() {
        let tol = Tolerances::default();
        let prm = ParamSet::new().with("gam", 0.2);
        let l = lag("0.5*v1^2 - 0.5*q1^2 - gam*z", &prm);
        let lbar = parse_zeta_chart("0.5*v1^2 - 0.5*q1^2 - gam*(zeta - sin(q1)) + cos(q1)*v1", 1).unwrap();
        let r = strong_equivalence_check(&l, &lbar, &zeta("z + sin(q1)"), &plan(), tol);
        assert!(r.passed(), "{} {:?}", r.max_residual, r.diagnostics);
        assert!(general_equivalence_check(&l, &lbar, &zeta("z + sin(q1)"), &plan(), tol).passed());

        let chute = ParamSet::new().with("m", 1.0).with("gam", 1.0).with("g", 9.8);
        let l = lag("0.5*v1^2 - m*g/(2*gam)*(exp(2*gam*q1) - 1) + 2*gam*v1*z", &chute);
        let lbar = parse_zeta_chart(
            "0.5*v1^2 + (2*q1 - 2*gam*q1^2 + 2*gam*zeta)*v1 - m*g/(2*gam)*(exp(2*gam*q1) - 1)",
            1,
        )
        .unwrap();
        let r = strong_equivalence_check(&l, &lbar, &zeta("z + q1^2"), &plan(), tol);
        assert!(r.passed(), "{} {:?}", r.max_residual, r.diagnostics);

        let l = lag("0.5*v1^2 - gam*z", &prm);
        let lbar = parse_zeta_chart("0.5*v1^2 - gam*zeta", 1).unwrap();
        let r = strong_equivalence_check(&l, &lbar, &zeta("z + v1"), &plan(), tol);
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.max_of("zeta_v") >= 1.0);
    }

    fn lbar_74(k: u32, g: f64) -> (ContactLagrangianSystem, Expr, ActionFunction, ParamSet) {
        let prm = ParamSet::new().with("gam", g);
        let l = lag("0.5*v1^2 - gam*z", &prm);
        // L̄ = −γk vᵏ + ½v² − γζ + γvᵏ
        let text = format!("-gam*{k}*v1^{k} + 0.5*v1^2 - gam*zeta + gam*v1^{k}");
        let lbar = parse_zeta_chart(&text, 1).unwrap();
        (l, lbar, zeta(&format!("z + v1^{k}")), prm)
    }

    #[test]
    fn non_strong_family() {
        let tol = Tolerances::default();
        for (k, g) in [(1, 0.3), (2, 0.3)] {
            let (l, lbar, z, _) = lbar_74(k, g);
            let r = general_equivalence_check(&l, &lbar, &z, &plan(), tol);
            assert!(r.passed(), "k={k}: {} {:?}", r.max_residual, r.diagnostics);
        }
        let (l, lbar, z, _) = lbar_74(3, 0.3);
        let r = general_equivalence_check(&l, &lbar, &z, &plan(), tol);
        assert_eq!(r.verdict, Verdict::Fail);
        // p-condition defect is 6γ²v²
        for rec in &r.residuals {
            let v = rec.point[1];
            assert!((rec.values["p_condition1"].abs() - 6.0 * 0.09 * v * v).abs() < 1e-10);
        }
        let (l, lbar, z, _) = lbar_74(2, 0.5);
        let r = general_equivalence_check(&l, &lbar, &z, &plan(), tol);
        assert_eq!(r.verdict, Verdict::Error);
        assert!(r.diagnostics.iter().any(|d| d.contains("zeta-regularity violated")));
    }
}

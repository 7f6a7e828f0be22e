use super::*;
use crate::expr::{Coord, Expr, ParamSet, StatePoint};
use nalgebra::DVector;

fn pt(q: f64, v: f64, z: f64) -> StatePoint {
    StatePoint::new(&[q], &[v], z).unwrap()
}

fn form(comps: &[&str]) -> CoordOneForm {
    let n = (comps.len() - 1) / 2;
    CoordOneForm::new(n, comps.iter().map(|s| Expr::parse(s, n).unwrap()).collect()).unwrap()
}

fn field(comps: &[&str]) -> CoordVectorField {
    let n = (comps.len() - 1) / 2;
    CoordVectorField::new(n, comps.iter().map(|s| Expr::parse(s, n).unwrap()).collect()).unwrap()
}

fn close(a: &DVector<f64>, b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn exterior_derivative_of_darboux_form() {
    let eta = CoordOneForm::darboux(1);
    let params = ParamSet::new();
    let p = pt(0.3, -1.2, 2.0);
    let m = exterior_derivative(&eta, &p, &params).unwrap();
    assert_eq!(m[(0, 1)], 1.0);
    assert_eq!(m[(1, 0)], -1.0);
    for a in 0..3 {
        assert_eq!(m[(2, a)], 0.0);
        assert_eq!(m[(a, 2)], 0.0);
    }

    // finite differences of the components
    let h = 1e-6;
    for a in 0..3 {
        for b in 0..3 {
            let comp = |x: &[f64], c: usize| eta.components()[c].eval_flat(x, 1, &params).unwrap();
            let d = |c: usize, along: usize| {
                let mut xp = p.coords().to_vec();
                let mut xm = p.coords().to_vec();
                xp[along] += h;
                xm[along] -= h;
                (comp(&xp, c) - comp(&xm, c)) / (2.0 * h)
            };
            let fd = d(b, a) - d(a, b);
            assert!((fd - m[(a, b)]).abs() < 1e-8);
        }
    }
}

#[test]
fn closed_forms_have_zero_derivative() {
    let params = ParamSet::new();
    let p = pt(0.7, 0.1, -0.4);
    for eta in [form(&["0", "0", "1"]), form(&["q1", "0", "0"])] {
        let m = exterior_derivative(&eta, &p, &params).unwrap();
        assert!(m.iter().all(|x| *x == 0.0));
    }
    let exact = CoordOneForm::exact(1, &Expr::parse("sin(q1)*v1 + z^2", 1).unwrap());
    let m = exterior_derivative(&exact, &p, &params).unwrap();
    assert!(m.amax() < 1e-15);
}

#[test]
fn exterior_derivative_is_antisymmetric() {
    let eta = form(&["q2*v1", "sin(z)", "exp(q1)*v2", "q1*q2", "1 + v1^2"]);
    let p = StatePoint::new(&[0.3, -0.5], &[1.2, 0.4], 0.9).unwrap();
    let m = exterior_derivative(&eta, &p, &ParamSet::new()).unwrap();
    assert_eq!(m.clone(), -m.transpose());
}

#[test]
fn reeb_examples() {
    let params = ParamSet::new().with("gam", 0.1);
    let p = pt(0.4, 1.5, -0.3);
    let r = reeb_field(&CoordOneForm::darboux(1), &p, &params).unwrap();
    assert!(close(&r, &[0.0, 0.0, 1.0], 1e-12));
    let r = reeb_field(&form(&["-v1", "0", "2"]), &p, &params).unwrap();
    assert!(close(&r, &[0.0, 0.0, 0.5], 1e-12));

    let eta = crate::lagrangian::ContactLagrangianSystem::parse("0.5*v1^2 - gam*z", 1, params.clone())
        .unwrap()
        .lagrangian_form();
    let r = reeb_field(&eta, &p, &params).unwrap();
    assert!(close(&r, &[0.0, 0.0, 1.0], 1e-12));
}

#[test]
fn reeb_field_satisfies_defining_equations() {
    let params = ParamSet::new();
    let eta = form(&["-v1*exp(z)", "0.3*q1", "1 + 0.2*q1^2"]);
    let p = pt(0.5, -0.8, 0.2);
    let r = reeb_field(&eta, &p, &params).unwrap();
    let e = eta.eval(&p, &params).unwrap();
    let m = exterior_derivative(&eta, &p, &params).unwrap();
    assert!((e.dot(&r) - 1.0).abs() <= 1e-10);
    assert!((m.transpose() * &r).amax() <= 1e-10);
}

#[test]
fn non_contact_form_is_singular() {
    let err = reeb_field(&form(&["0", "0", "1"]), &pt(0.0, 0.0, 0.0), &ParamSet::new());
    assert!(matches!(err, Err(crate::Error::Singular { .. })));
}

#[test]
fn hamiltonian_field_examples() {
    let params = ParamSet::new();
    let p = pt(1.0, 1.0, 1.0);

    let sys = ContactHamiltonianSystem::darboux(1, Expr::constant(-1.0), params.clone());
    assert!(close(&sys.hamiltonian_field(&pt(0.2, 3.0, -1.0)).unwrap(), &[0.0, 0.0, 1.0], 1e-12));

    let sys = ContactHamiltonianSystem::darboux(1, Expr::parse("v1*q1 + z", 1).unwrap(), params.clone());
    assert!(close(&sys.hamiltonian_field(&p).unwrap(), &[1.0, -2.0, -1.0], 1e-12));

    let bar = ContactHamiltonianSystem::new(
        form(&["v1", "0", "1"]),
        Expr::parse("z - v1*q1", 1).unwrap(),
        params,
    );
    assert!(close(&bar.hamiltonian_field(&p).unwrap(), &[1.0, -2.0, -1.0], 1e-12));
}

#[test]
fn hamiltonian_field_matches_hand_solved_darboux_system() {
    // For η = dz − p dq the defining equations give
    // X = (H_p, −H_q − p H_z, p H_p − H).
    let params = ParamSet::new().with("k", 0.4);
    let h = Expr::parse("0.5*v1^2 + k*sin(q1) - 0.3*z*v1", 1).unwrap();
    let sys = ContactHamiltonianSystem::darboux(1, h.clone(), params.clone());
    for &(q, pm, z) in &[(0.1, 0.2, 0.3), (-1.0, 2.0, 0.5), (2.0, -0.7, -1.1)] {
        let p = pt(q, pm, z);
        let d = |c| h.diff(c).eval(&p, &params).unwrap();
        let hv = h.eval(&p, &params).unwrap();
        let expected = [d(Coord::V(0)), -d(Coord::Q(0)) - pm * d(Coord::Z), pm * d(Coord::V(0)) - hv];
        assert!(close(&sys.hamiltonian_field(&p).unwrap(), &expected, 1e-12));
    }
}

#[test]
fn hamiltonian_field_is_conformally_contact() {
    let params = ParamSet::new();
    let eta = form(&["-v1", "0", "1 + 0.1*q1^2"]);
    let h = Expr::parse("v1^2*q1 + z*cos(q1)", 1).unwrap();
    let sys = ContactHamiltonianSystem::new(eta.clone(), h.clone(), params.clone());
    let xh = sys.hamiltonian_vector_field();
    for &(q, v, z) in &[(0.2, 0.4, 0.1), (-0.9, 1.3, 0.6)] {
        let p = pt(q, v, z);
        let r = sys.reeb_field(&p).unwrap();
        let (_, grad, _) = h.eval_jet2(&p, &params).unwrap();
        let rh = grad.dot(&r);
        let (g, res) = conformal_factor(&eta, &xh, &p, &params).unwrap();
        assert!((g + rh).abs() <= 1e-8 && res <= 1e-8, "g={g} RH={rh} res={res}");
        let hv = h.eval(&p, &params).unwrap();
        assert!((contract(&eta, &xh, &p, &params).unwrap() + hv).abs() <= 1e-10);
    }
}

#[test]
fn conformal_rescaling_leaves_field_unchanged() {
    let params = ParamSet::new();
    let eta = CoordOneForm::darboux(1);
    let h = Expr::parse("0.5*v1^2 + q1^2 + 0.2*z", 1).unwrap();
    let f = Expr::parse("2 + sin(q1*v1) + 0.1*z^2", 1).unwrap();
    let a = ContactHamiltonianSystem::new(eta.clone(), h.clone(), params.clone());
    let b = ContactHamiltonianSystem::new(eta.scaled(&f), f.mul(&h), params);
    for &(q, v, z) in &[(0.3, -0.4, 1.0), (1.1, 0.9, -0.5), (-2.0, 0.1, 0.0)] {
        let p = pt(q, v, z);
        let xa = a.hamiltonian_field(&p).unwrap();
        let xb = b.hamiltonian_field(&p).unwrap();
        assert!((xa - xb).amax() <= 1e-8);
    }
}

#[test]
fn conformal_factor_examples() {
    let params = ParamSet::new().with("gam", 0.1);
    let p = pt(0.5, 1.0, -0.2);

    let sys = crate::lagrangian::ContactLagrangianSystem::parse("0.5*v1^2 - gam*z", 1, params.clone()).unwrap();
    let (g, res) = conformal_factor(&sys.lagrangian_form(), &sys.herglotz_field(), &p, &params).unwrap();
    assert!((g + 0.1).abs() <= 1e-10 && res <= 1e-10);

    let eta = CoordOneForm::darboux(1);
    let (g, res) = conformal_factor(&eta, &reeb_vector_field(&eta), &p, &params).unwrap();
    assert!(g.abs() <= 1e-14 && res <= 1e-14);

    let (g, res) = conformal_factor(&eta, &field(&["1", "0", "0"]), &p, &params).unwrap();
    assert_eq!((g, res), (0.0, 0.0));
    let lie = lie_derivative(&eta, &field(&["1", "0", "0"]), &p, &params).unwrap();
    assert!(lie.iter().all(|x| *x == 0.0));
}

#[test]
fn zero_covector_is_rejected() {
    let r = conformal_factor(
        &form(&["q1", "0", "0"]),
        &field(&["1", "0", "0"]),
        &pt(0.0, 1.0, 1.0),
        &ParamSet::new(),
    );
    assert!(matches!(r, Err(crate::Error::Precondition(_))));
}

#[test]
fn solved_field_jacobian_matches_finite_differences() {
    let params = ParamSet::new();
    let sys = ContactHamiltonianSystem::new(
        form(&["-v1", "0", "1 + 0.1*q1^2"]),
        Expr::parse("v1^2*q1 + z*cos(q1)", 1).unwrap(),
        params.clone(),
    );
    let x = sys.hamiltonian_vector_field();
    let p = pt(0.4, 0.7, -0.3);
    let (_, jac) = x.jet(&p, &params).unwrap();
    let h = 1e-6;
    for c in 0..3 {
        let mut xp = p.coords().to_vec();
        let mut xm = p.coords().to_vec();
        xp[c] += h;
        xm[c] -= h;
        let fp = x.eval(&StatePoint::from_coords(1, xp).unwrap(), &params).unwrap();
        let fm = x.eval(&StatePoint::from_coords(1, xm).unwrap(), &params).unwrap();
        let fd = (fp - fm) / (2.0 * h);
        for a in 0..3 {
            assert!((fd[a] - jac[(a, c)]).abs() < 1e-7, "({a},{c})");
        }
    }
}

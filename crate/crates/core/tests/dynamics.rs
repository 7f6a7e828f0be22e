use herglotz::dynamics::{integrate, z_operator};
use herglotz::extended::{parse_zeta_chart, ActionFunction, ExtendedLagrangianSystem};
use herglotz::lagrangian::ContactLagrangianSystem;
use herglotz::{ParamSet, StatePoint};

fn chute() -> ContactLagrangianSystem {
    let prm = ParamSet::new().with("m", 1.0).with("gam", 1.0).with("g", 9.8);
    ContactLagrangianSystem::parse("0.5*v1^2 - m*g/(2*gam)*(exp(2*gam*q1) - 1) + 2*gam*v1*z", 1, prm).unwrap()
}

#[test]
fn action_operator_reproduces_trajectory_z() {
    for (sys, p0) in [
        (
            ContactLagrangianSystem::parse("0.5*v1^2 - 0.3*z", 1, ParamSet::new()).unwrap(),
            StatePoint::new(&[0.0], &[2.0], 1.0).unwrap(),
        ),
        (
            ContactLagrangianSystem::parse("0.5*(v1^2 + v2^2) - 0.5*q1^2 - q2^4 - 0.3*z*v2", 2, ParamSet::new()).unwrap(),
            StatePoint::new(&[0.3, -0.2], &[1.0, 0.5], 0.7).unwrap(),
        ),
    ] {
        let worst = z_mismatch(&sys, &p0, 1e-3);
        assert!(worst <= 1e-6, "{worst}");
    }
}

fn z_mismatch(sys: &ContactLagrangianSystem, p0: &StatePoint, dt: f64) -> f64 {
    let tr = integrate(&sys.herglotz_field(), &sys.params, p0, 1.0, dt).unwrap();
    let z = z_operator(&sys.lagrangian, &sys.params, &tr.to_curve().unwrap(), p0.z()).unwrap();
    z.iter().zip(&tr.states).map(|(a, s)| (a - s.z()).abs()).fold(0.0, f64::max)
}

// Linear interpolation inside steps makes the operator second order; on the
// parachute the constant is large enough to sit above 1e-6 at dt = 1e-3.
#[test]
fn action_operator_converges_at_second_order() {
    let p0 = StatePoint::new(&[0.0], &[2.0], 0.0).unwrap();
    let coarse = z_mismatch(&chute(), &p0, 2e-3);
    let fine = z_mismatch(&chute(), &p0, 1e-3);
    let order = (coarse / fine).log2();
    assert!((order - 2.0).abs() < 0.1, "order {order}");
    assert!(z_mismatch(&chute(), &p0, 2.5e-4) <= 1e-6);
}

#[test]
fn equivalent_systems_share_trajectories() {
    // (½v² − γz, z) and (½v² − γζ, ζ = z + v)
    let prm = ParamSet::new().with("gam", 0.3);
    let l = ContactLagrangianSystem::parse("0.5*v1^2 - gam*z", 1, prm.clone()).unwrap();
    let zeta = ActionFunction::parse("z + v1", 1, ParamSet::new()).unwrap();
    let lbar = parse_zeta_chart("0.5*v1^2 - gam*zeta", 1).unwrap();
    let ext = ExtendedLagrangianSystem::from_zeta_chart(&lbar, zeta, prm.clone()).unwrap();
    let p0 = StatePoint::new(&[0.2], &[1.5], -0.4).unwrap();
    let a = integrate(&l.herglotz_field(), &prm, &p0, 1.0, 1e-3).unwrap();
    let b = integrate(&ext.zeta_herglotz_field(), &ext.params, &p0, 1.0, 1e-3).unwrap();
    for (x, y) in a.states.iter().zip(&b.states) {
        assert!((x.q()[0] - y.q()[0]).abs() <= 1e-6);
        assert!((x.v()[0] - y.v()[0]).abs() <= 1e-6);
    }
}

#[test]
fn parachute_reaches_terminal_velocity() {
    let sys = chute();
    let p0 = StatePoint::new(&[0.0], &[0.0], 0.0).unwrap();
    let tr = integrate(&sys.herglotz_field(), &sys.params, &p0, 5.0, 1e-3).unwrap();
    // ẏ = −√(g/γ) tanh(√(gγ) t)
    let v = tr.last().v()[0];
    let exact = -(9.8f64).sqrt() * (9.8f64.sqrt() * 5.0).tanh();
    assert!((v - exact).abs() < 1e-9, "{v} vs {exact}");
}

//! Fixed-step RK4 integration, the Herglotz action functional along curves,
//! and a finite-difference stationarity test.

use crate::contact::CoordVectorField;
use crate::error::{Error, Result};
use crate::expr::{Expr, ParamSet, StatePoint};
use crate::report::{CheckReport, Tolerances, Verdict};
use nalgebra::DVector;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub n: usize,
    pub times: Vec<f64>,
    pub states: Vec<StatePoint>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &StatePoint {
        self.states.last().expect("trajectory has an initial state")
    }

    /// CSV with header `t,q1..qn,v1..vn,z` followed by `extra` columns.
    pub fn to_csv(&self, extra: &[(String, Vec<f64>)]) -> String {
        let n = self.n;
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("q{i}")));
        header.extend((1..=n).map(|i| format!("v{i}")));
        header.push("z".into());
        header.extend(extra.iter().map(|(name, _)| name.clone()));
        let mut out = header.join(",");
        out.push('\n');
        for (k, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            write!(out, "{t:.16e}").unwrap();
            for x in s.coords() {
                write!(out, ",{x:.16e}").unwrap();
            }
            for (_, col) in extra {
                write!(out, ",{:.16e}", col[k]).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Projection to `(t, q(t), v(t))`; the trajectory must span `[0, 1]`.
    pub fn to_curve(&self) -> Result<SampledCurve> {
        let q = self.states.iter().map(|s| s.q().to_vec()).collect();
        let v = self.states.iter().map(|s| s.v().to_vec()).collect();
        SampledCurve::new(self.n, self.times.clone(), q, Some(v))
    }
}

/// Step count and final step for `[0, t_end]` with nominal step `dt`;
/// the last step is shortened to land on `t_end`.
fn step_plan(t_end: f64, dt: f64) -> (usize, f64) {
    let ratio = t_end / dt;
    let full = ratio.round();
    if (ratio - full).abs() <= 1e-9 * ratio.max(1.0) {
        (full as usize, dt)
    } else {
        let k = ratio.floor() as usize;
        (k + 1, t_end - k as f64 * dt)
    }
}

fn rk4_step(
    field: &CoordVectorField,
    params: &ParamSet,
    n: usize,
    x: &DVector<f64>,
    h: f64,
) -> Result<DVector<f64>> {
    let eval = |y: &DVector<f64>| -> Result<DVector<f64>> {
        let p = StatePoint::from_coords(n, y.iter().copied().collect())?;
        field.eval(&p, params)
    };
    let k1 = eval(x)?;
    let k2 = eval(&(x + &k1 * (h / 2.0)))?;
    let k3 = eval(&(x + &k2 * (h / 2.0)))?;
    let k4 = eval(&(x + &k3 * h))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Classical RK4 from `p0` over `[0, t_end]`.
pub fn integrate(
    field: &CoordVectorField,
    params: &ParamSet,
    p0: &StatePoint,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !dt.is_finite() || !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::Precondition(format!("need dt > 0 and t_end >= 0, got dt = {dt}, t_end = {t_end}")));
    }
    let n = p0.dim();
    if field.dim() != n {
        return Err(Error::Dimension(format!("field of dimension {} with initial point of dimension {n}", field.dim())));
    }
    let (steps, last) = if t_end == 0.0 { (0, dt) } else { step_plan(t_end, dt) };
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(p0.clone());
    let mut x = p0.to_vector();
    for k in 0..steps {
        let h = if k + 1 == steps { last } else { dt };
        let t = if k + 1 == steps { t_end } else { (k + 1) as f64 * dt };
        x = rk4_step(field, params, n, &x, h).map_err(|e| Error::Integration {
            t: times[k],
            last_good: states[k].clone(),
            source: Box::new(e),
        })?;
        let p = StatePoint::from_coords(n, x.iter().copied().collect()).map_err(|e| Error::Integration {
            t: times[k],
            last_good: states[k].clone(),
            source: Box::new(e.into()),
        })?;
        times.push(t);
        states.push(p);
    }
    Ok(Trajectory { n, times, states })
}

/// A curve `q(t)` sampled on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledCurve {
    pub n: usize,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
}

impl SampledCurve {
    /// Velocities default to centered differences, one-sided at the ends.
    pub fn new(
        n: usize,
        times: Vec<f64>,
        positions: Vec<Vec<f64>>,
        velocities: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let m = times.len();
        if m < 2 || positions.len() != m || velocities.as_ref().is_some_and(|v| v.len() != m) {
            return Err(Error::Dimension("curve needs at least two samples and matching lengths".into()));
        }
        if times[0] != 0.0 || times[m - 1] != 1.0 {
            return Err(Error::Precondition("curve times must run from 0 to 1".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition("curve times must be strictly increasing".into()));
        }
        let all = positions.iter().chain(velocities.iter().flatten());
        if all.clone().any(|row| row.len() != n) {
            return Err(Error::Dimension(format!("curve samples must have {n} coordinates")));
        }
        if all.flatten().any(|x| !x.is_finite()) {
            return Err(Error::Precondition("curve samples must be finite".into()));
        }
        let velocities = velocities.unwrap_or_else(|| finite_difference_velocities(&times, &positions));
        Ok(SampledCurve {
            n,
            times,
            positions,
            velocities,
        })
    }

    /// Uniform grid of `m` points with `q` and optionally `v` given as
    /// functions of `t`.
    pub fn from_fn(
        n: usize,
        m: usize,
        q: impl Fn(f64) -> Vec<f64>,
        v: Option<&dyn Fn(f64) -> Vec<f64>>,
    ) -> Result<Self> {
        let times: Vec<f64> = (0..m).map(|k| k as f64 / (m - 1) as f64).collect();
        let pos = times.iter().map(|&t| q(t)).collect();
        let vel = v.map(|v| times.iter().map(|&t| v(t)).collect());
        Self::new(n, times, pos, vel)
    }

    /// Adds `ε sin(jπt)` to coordinate `i` (and `ε jπ cos(jπt)` to its
    /// velocity).
    pub fn perturbed(&self, i: usize, j: usize, eps: f64) -> SampledCurve {
        let w = j as f64 * PI;
        let mut c = self.clone();
        for (k, &t) in self.times.iter().enumerate() {
            c.positions[k][i] += eps * (w * t).sin();
            c.velocities[k][i] += eps * w * (w * t).cos();
        }
        c
    }
}

fn finite_difference_velocities(times: &[f64], q: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = times.len();
    (0..m)
        .map(|k| {
            let (a, b) = if k == 0 {
                (0, 1)
            } else if k == m - 1 {
                (m - 2, m - 1)
            } else {
                (k - 1, k + 1)
            };
            let dt = times[b] - times[a];
            q[a].iter().zip(&q[b]).map(|(x, y)| (y - x) / dt).collect()
        })
        .collect()
}

/// Solves `Ż = L(q(t), q̇(t), Z)`, `Z(0) = z0`, with one RK4 step per sample
/// interval and linear interpolation of `(q, q̇)` at the midpoint. Returns
/// `Z` at the sample times.
///
/// For a Lagrangian written in a `ζ`-chart the same call yields the action
/// coordinate `ζ` along the curve.
pub fn z_operator(l: &Expr, params: &ParamSet, curve: &SampledCurve, z0: f64) -> Result<Vec<f64>> {
    let n = curve.n;
    let eval = |q: &[f64], v: &[f64], z: f64| -> Result<f64> {
        Ok(l.eval(&StatePoint::new(q, v, z)?, params)?)
    };
    let mut out = Vec::with_capacity(curve.times.len());
    out.push(z0);
    let mut z = z0;
    let mut qm = vec![0.0; n];
    let mut vm = vec![0.0; n];
    for k in 0..curve.times.len() - 1 {
        let h = curve.times[k + 1] - curve.times[k];
        let (q0, q1) = (&curve.positions[k], &curve.positions[k + 1]);
        let (v0, v1) = (&curve.velocities[k], &curve.velocities[k + 1]);
        for i in 0..n {
            qm[i] = 0.5 * (q0[i] + q1[i]);
            vm[i] = 0.5 * (v0[i] + v1[i]);
        }
        let k1 = eval(q0, v0, z)?;
        let k2 = eval(&qm, &vm, z + 0.5 * h * k1)?;
        let k3 = eval(&qm, &vm, z + 0.5 * h * k2)?;
        let k4 = eval(q1, v1, z + h * k3)?;
        z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push(z);
    }
    Ok(out)
}

/// `𝒜(γ) = Z(1) − z0`.
pub fn action(l: &Expr, params: &ParamSet, curve: &SampledCurve, z0: f64) -> Result<f64> {
    Ok(z_operator(l, params, curve, z0)?.last().copied().expect("nonempty") - z0)
}

/// Central differences of the action along `sin(jπt)` bumps in every
/// coordinate, `j = 1..=modes`, with step `amplitude`. Residual per bump is
/// `|Dⱼ|/(1 + |𝒜|)`; the report passes iff all are `<= stat_tol`.
pub fn stationarity_test(
    l: &Expr,
    params: &ParamSet,
    curve: &SampledCurve,
    z0: f64,
    modes: usize,
    amplitude: f64,
    stat_tol: f64,
) -> CheckReport {
    let tol = Tolerances {
        pass_tol: stat_tol,
        fail_tol: stat_tol,
        det_tol: Tolerances::default().det_tol,
    };
    let task = "stationarity";
    let base = match action(l, params, curve, z0) {
        Ok(a) => a,
        Err(e) => return CheckReport::error(task, tol, None, &e),
    };
    let bumps: Vec<(usize, usize)> = (0..curve.n)
        .flat_map(|i| (1..=modes).map(move |j| (i, j)))
        .collect();
    let derivs: Vec<Result<f64>> = bumps
        .par_iter()
        .map(|&(i, j)| {
            let plus = action(l, params, &curve.perturbed(i, j, amplitude), z0)?;
            let minus = action(l, params, &curve.perturbed(i, j, -amplitude), z0)?;
            Ok((plus - minus) / (2.0 * amplitude))
        })
        .collect();
    let mut report = CheckReport::new(task, tol, None);
    let scale = 1.0 + base.abs();
    let mut values = Vec::new();
    let mut info = vec![("action".to_string(), base)];
    for (&(i, j), d) in bumps.iter().zip(derivs) {
        match d {
            Ok(d) => {
                values.push((format!("q{}_mode{j}", i + 1), d.abs() / scale));
                info.push((format!("d_q{}_mode{j}", i + 1), d));
            }
            Err(e) => {
                report.escalate(Verdict::Error, e.to_string());
            }
        }
    }
    let start: Vec<f64> = curve.positions[0]
        .iter()
        .chain(&curve.velocities[0])
        .copied()
        .chain([z0])
        .collect();
    match StatePoint::from_coords(curve.n, start) {
        Ok(p) => report.push_owned(&p, values, info),
        Err(e) => report.escalate(Verdict::Error, e.to_string()),
    }
    report.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::ContactLagrangianSystem;

    fn pt(q: f64, v: f64, z: f64) -> StatePoint {
        StatePoint::new(&[q], &[v], z).unwrap()
    }

    #[test]
    fn constant_field_reaches_one() {
        let f = CoordVectorField::new(1, vec![Expr::zero(), Expr::zero(), Expr::one()]).unwrap();
        let tr = integrate(&f, &ParamSet::new(), &pt(0.0, 0.0, 0.0), 1.0, 0.1).unwrap();
        assert_eq!(tr.len(), 11);
        assert_eq!(tr.times[10], 1.0);
        assert!((tr.last().z() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn final_step_is_shortened() {
        let f = CoordVectorField::new(1, vec![Expr::zero(), Expr::zero(), Expr::one()]).unwrap();
        let tr = integrate(&f, &ParamSet::new(), &pt(0.0, 0.0, 0.0), 1.0, 0.3).unwrap();
        assert_eq!(tr.times.len(), 5);
        assert!((tr.times[3] - 0.9).abs() < 1e-15);
        assert_eq!(tr.times[4], 1.0);
        assert!((tr.last().z() - 1.0).abs() < 1e-15);
        assert!(integrate(&f, &ParamSet::new(), &pt(0.0, 0.0, 0.0), 1.0, 0.0).is_err());
    }

    #[test]
    fn damped_particle_matches_closed_form() {
        let prm = ParamSet::new().with("gam", 0.1);
        let sys = ContactLagrangianSystem::parse("0.5*v1^2 - gam*z", 1, prm.clone()).unwrap();
        let tr = integrate(&sys.herglotz_field(), &prm, &pt(0.0, 2.0, 0.0), 1.0, 1e-3).unwrap();
        let v = tr.last().v()[0];
        assert!((v - 2.0 * (-0.1f64).exp()).abs() <= 1e-8);
        // q(t) = 20 (1 − e^{−0.1t})
        assert!((tr.last().q()[0] - 20.0 * (1.0 - (-0.1f64).exp())).abs() <= 1e-8);
    }

    #[test]
    fn failure_reports_last_good_state() {
        // q reaches 0 at t = 0.5 and log(q) stops being defined
        let f = CoordVectorField::new(1, vec![Expr::parse("-1", 1).unwrap(), Expr::parse("log(q1)", 1).unwrap(), Expr::zero()]).unwrap();
        let err = integrate(&f, &ParamSet::new(), &pt(0.5, 0.0, 0.0), 2.0, 0.1).unwrap_err();
        match err {
            Error::Integration { t, last_good, .. } => {
                assert!(t <= 0.5 + 1e-12);
                assert!(last_good.q()[0] >= -1e-12);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn csv_layout() {
        let f = CoordVectorField::new(1, vec![Expr::zero(), Expr::zero(), Expr::one()]).unwrap();
        let tr = integrate(&f, &ParamSet::new(), &pt(0.0, 0.0, 0.0), 0.5, 0.5).unwrap();
        let csv = tr.to_csv(&[("residual".into(), vec![0.0, 0.25])]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,q1,v1,z,residual");
        assert_eq!(lines[2], "5.0000000000000000e-1,0.0000000000000000e0,0.0000000000000000e0,5.0000000000000000e-1,2.5000000000000000e-1");
        let back: f64 = lines[2].split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(back, 0.5);
    }

    fn line(m: usize) -> SampledCurve {
        SampledCurve::from_fn(1, m, |t| vec![t], Some(&|_| vec![1.0])).unwrap()
    }

    #[test]
    fn z_operator_examples() {
        let prm = ParamSet::new().with("gam", 0.5);
        let c = line(11);
        let z = z_operator(&Expr::constant(3.0), &prm, &c, 1.0).unwrap();
        assert!((z[10] - 4.0).abs() < 1e-14);
        let z = z_operator(&Expr::parse("-gam*z", 1).unwrap(), &prm, &line(201), 2.0).unwrap();
        assert!((z[200] - 2.0 * (-0.5f64).exp()).abs() < 1e-12);
        let a = action(&Expr::parse("0.5*v1^2", 1).unwrap(), &prm, &c, 0.0).unwrap();
        assert!((a - 0.5).abs() < 1e-15);
        assert_eq!(action(&Expr::constant(2.5), &prm, &c, 7.0).unwrap(), 2.5);
    }

    #[test]
    fn finite_difference_velocities_are_exact_for_lines() {
        let c = SampledCurve::from_fn(1, 5, |t| vec![3.0 * t - 1.0], None).unwrap();
        assert!(c.velocities.iter().all(|v| (v[0] - 3.0).abs() < 1e-14));
        assert!(SampledCurve::new(1, vec![0.0, 0.5], vec![vec![0.0]; 2], None).is_err());
    }

    #[test]
    fn straight_line_is_stationary_for_free_particle() {
        let l = Expr::parse("0.5*v1^2", 1).unwrap();
        let r = stationarity_test(&l, &ParamSet::new(), &line(200), 0.0, 8, 1e-4, 1e-6);
        assert!(r.passed(), "{}", r.max_residual);
        let bent = SampledCurve::from_fn(1, 200, |t| vec![t + 0.3 * (3.0 * PI * t).sin()], None).unwrap();
        let r = stationarity_test(&l, &ParamSet::new(), &bent, 0.0, 8, 1e-4, 1e-6);
        assert_eq!(r.verdict, Verdict::Fail);
    }
}

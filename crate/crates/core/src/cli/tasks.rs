//! Subcommands: argument parsing, name resolution against a [`Catalog`],
//! and execution.

use super::config::{Catalog, ConfigError, LagrangianEntry, System};
use crate::contact::{ContactHamiltonianSystem, CoordVectorField};
use crate::dynamics::{integrate, stationarity_test, SampledCurve};
use crate::equivalence::{
    conformal_similarity_check, dynamical_equivalence_check, general_equivalence_check,
    horizontal_similarity_check, strong_equivalence_check, zero_set_diagnostic,
};
use crate::expr::{Expr, Gradient, ParamSet, StatePoint};
use crate::extended::{ActionFunction, ExtendedLagrangianSystem};
use crate::inverse::{di_ei_diagnostics, extended_inverse_check, naive_inverse_check, SODESystem};
use crate::lagrangian::ContactLagrangianSystem;
use crate::report::{sampled_check, CheckReport, PointResult, Tolerances, Verdict};
use crate::sampling::{map_points, SamplePlan};
use clap::{Args, Subcommand, ValueEnum};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::f64::consts::PI;

fn default_plan() -> String {
    "default".into()
}
fn one() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    1e-3
}
fn first() -> usize {
    1
}
fn default_points() -> usize {
    200
}
fn default_modes() -> usize {
    8
}
fn default_amplitude() -> f64 {
    1e-4
}
fn default_stat_tol() -> f64 {
    1e-3
}

#[derive(Args, Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    /// Lagrangian system to integrate.
    #[arg(long)]
    pub system: String,
    /// Final time.
    #[arg(long = "t", default_value_t = 1.0)]
    #[serde(default = "one")]
    pub t: f64,
    #[arg(long, default_value_t = 1e-3)]
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Initial state `q1,..,qn,v1,..,vn,z`; defaults to the system's.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
}

#[derive(Args, Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct HerglotzArgs {
    #[arg(long)]
    pub system: String,
    /// Action function; the Lagrangian is then read in its chart.
    #[arg(long)]
    #[serde(default)]
    pub zeta: Option<String>,
    #[arg(long, default_value = "default")]
    #[serde(default = "default_plan")]
    pub plan: String,
}

#[derive(Args, Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct PairArgs {
    #[arg(long)]
    pub lagrangian: String,
    /// Lagrangian written in the chart of `--zeta`.
    #[arg(long)]
    pub lagrangian_bar: String,
    /// Action function; `z` when omitted.
    #[arg(long)]
    #[serde(default)]
    pub zeta: Option<String>,
    #[arg(long, default_value = "default")]
    #[serde(default = "default_plan")]
    pub plan: String,
}

#[derive(Args, Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct HorizontalArgs {
    #[arg(long)]
    pub sode: String,
    #[arg(long)]
    pub sode_bar: String,
    #[arg(long)]
    pub zeta: String,
    #[arg(long, default_value = "default")]
    #[serde(default = "default_plan")]
    pub plan: String,
}

#[derive(Args, Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct InverseArgs {
    /// SODE, or a Lagrangian whose Herglotz field is used.
    #[arg(long)]
    pub sode: String,
    /// Action function (only for `check-inverse-ext`); `z` when omitted.
    #[arg(long)]
    #[serde(default)]
    pub zeta: Option<String>,
    /// Constant added to one acceleration.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default)]
    pub perturb: Option<f64>,
    /// 1-based index of the perturbed acceleration.
    #[arg(long, default_value_t = 1)]
    #[serde(default = "first")]
    pub perturb_index: usize,
    #[arg(long, default_value = "default")]
    #[serde(default = "default_plan")]
    pub plan: String,
}

#[derive(Args, Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianPairArgs {
    #[arg(long)]
    pub hamiltonian: String,
    #[arg(long)]
    pub hamiltonian_bar: String,
    /// Conformal factor (only for `check-conformal`); estimated when omitted.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default)]
    pub factor: Option<String>,
    #[arg(long, default_value = "default")]
    #[serde(default = "default_plan")]
    pub plan: String,
}

#[derive(Args, Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct LegendreArgs {
    /// Lagrangian written in the chart of `--zeta`.
    #[arg(long)]
    pub lagrangian: String,
    #[arg(long)]
    #[serde(default)]
    pub zeta: Option<String>,
    #[arg(long, default_value = "default")]
    #[serde(default = "default_plan")]
    pub plan: String,
}

#[derive(ValueEnum, Deserialize, Clone, Copy, Debug, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    /// Herglotz trajectory from the initial state over `[0, 1]`.
    #[default]
    Solution,
    /// Random smooth curve with the same endpoints as the solution.
    Random,
}

#[derive(Args, Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct StationarityArgs {
    #[arg(long)]
    pub lagrangian: String,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = CurveKind::Solution)]
    #[serde(default)]
    pub curve: CurveKind,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub curve_seed: u64,
    /// Grid size on `[0, 1]`.
    #[arg(long, default_value_t = 200)]
    #[serde(default = "default_points")]
    pub points: usize,
    /// Sine modes per coordinate.
    #[arg(long, default_value_t = 8)]
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[arg(long, default_value_t = 1e-4)]
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[arg(long, default_value_t = 1e-3)]
    #[serde(default = "default_stat_tol")]
    pub stat_tol: f64,
}

#[derive(Subcommand, Deserialize, Clone, Debug)]
#[serde(tag = "command", content = "args", rename_all = "kebab-case")]
pub enum Command {
    /// Integrate the Herglotz field and write a CSV trajectory.
    Simulate(SimulateArgs),
    /// Print the Herglotz field components.
    Herglotz(HerglotzArgs),
    /// Strong equivalence of two contact Lagrangians under an action function.
    CheckStrongEq(PairArgs),
    /// Equivalence of the Herglotz fields of two contact Lagrangians.
    CheckEq(PairArgs),
    /// Does the change of action variable map one extended SODE onto the other?
    CheckHorizontal(HorizontalArgs),
    /// Is a SODE the Herglotz field of some contact Lagrangian?
    CheckInverse(InverseArgs),
    /// Inverse problem with an action function.
    CheckInverseExt(InverseArgs),
    /// D/E ratio diagnostic for representability with a v-independent action function.
    CheckDiEi(InverseArgs),
    /// Are two contact forms conformally related?
    CheckConformal(HamiltonianPairArgs),
    /// Do two contact Hamiltonian systems share their dynamics?
    CheckDynamical(HamiltonianPairArgs),
    /// Compare the zero sets of two Hamiltonians.
    CheckZeroSet(HamiltonianPairArgs),
    /// Legendre map of an extended Lagrangian and its pullback check.
    Legendre(LegendreArgs),
    /// Herglotz variational stationarity along a curve.
    Stationarity(StationarityArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Herglotz(_) => "herglotz",
            Command::CheckStrongEq(_) => "check-strong-eq",
            Command::CheckEq(_) => "check-eq",
            Command::CheckHorizontal(_) => "check-horizontal",
            Command::CheckInverse(_) => "check-inverse",
            Command::CheckInverseExt(_) => "check-inverse-ext",
            Command::CheckDiEi(_) => "check-di-ei",
            Command::CheckConformal(_) => "check-conformal",
            Command::CheckDynamical(_) => "check-dynamical",
            Command::CheckZeroSet(_) => "check-zero-set",
            Command::Legendre(_) => "legendre",
            Command::Stationarity(_) => "stationarity",
        }
    }

    /// Parses a config task `{command, args}`; errors are located under
    /// `prefix`.
    pub fn from_task(command: &str, args: &serde_json::Value, prefix: &str) -> Result<Command, ConfigError> {
        let value = serde_json::json!({ "command": command, "args": args });
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { prefix.to_string() } else { format!("{prefix}.{path}") };
            ConfigError::new(path, e.into_inner())
        })
    }
}

/// What a finished task produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: CheckReport,
    /// Lines for standard output besides the verdict summary.
    pub lines: Vec<String>,
    pub csv: Option<String>,
}

impl Outcome {
    fn report(report: CheckReport) -> Self {
        Outcome {
            report,
            lines: Vec::new(),
            csv: None,
        }
    }
}

pub type Job<'a> = Box<dyn FnOnce() -> Outcome + 'a>;

/// Resolves argument names against the catalog.
pub struct Resolver<'a> {
    pub catalog: &'a Catalog,
    /// `None` for command-line flags, `Some("tasks[i].args")` for config tasks.
    pub prefix: Option<String>,
}

impl<'a> Resolver<'a> {
    fn path(&self, field: &str) -> String {
        match &self.prefix {
            None => format!("--{}", field.replace('_', "-")),
            Some(p) => format!("{p}.{field}"),
        }
    }

    fn err(&self, field: &str, msg: impl std::fmt::Display) -> ConfigError {
        ConfigError::new(self.path(field), msg)
    }

    fn system(&self, field: &str, name: &str) -> Result<&'a System, ConfigError> {
        self.catalog
            .systems
            .get(name)
            .ok_or_else(|| self.err(field, format!("unknown system `{name}`")))
    }

    fn wrong_kind(&self, field: &str, name: &str, sys: &System, want: &str) -> ConfigError {
        self.err(field, format!("system `{name}` is of kind {}, expected {want}", sys.kind()))
    }

    fn lagrangian(&self, field: &str, name: &str) -> Result<&'a LagrangianEntry, ConfigError> {
        match self.system(field, name)? {
            System::Lagrangian(l) => Ok(l),
            other => Err(self.wrong_kind(field, name, other, "a lagrangian")),
        }
    }

    fn action(&self, field: &str, name: Option<&str>, n: usize) -> Result<ActionFunction, ConfigError> {
        let Some(name) = name else {
            return Ok(ActionFunction::identity(n));
        };
        match self.system(field, name)? {
            System::Action(a) => {
                self.same_dim(field, n, a.n)?;
                Ok(a.clone())
            }
            other => Err(self.wrong_kind(field, name, other, "an action function")),
        }
    }

    fn hamiltonian(&self, field: &str, name: &str) -> Result<ContactHamiltonianSystem, ConfigError> {
        match self.system(field, name)? {
            System::Hamiltonian(h) => Ok(h.clone()),
            System::Lagrangian(l) => {
                let ext = ExtendedLagrangianSystem::new(
                    l.system.lagrangian.clone(),
                    ActionFunction::identity(l.system.n),
                    l.system.params.clone(),
                )
                .map_err(|e| self.err(field, e))?;
                Ok(ext.contact_system())
            }
            other => Err(self.wrong_kind(field, name, other, "a hamiltonian or lagrangian")),
        }
    }

    fn sode(&self, field: &str, name: &str) -> Result<SODESystem, ConfigError> {
        match self.system(field, name)? {
            System::Sode(s) => Ok(s.clone()),
            System::Lagrangian(l) => SODESystem::from_herglotz(&l.system).map_err(|e| self.err(field, e)),
            other => Err(self.wrong_kind(field, name, other, "a sode or lagrangian")),
        }
    }

    fn vector_field(&self, field: &str, name: &str) -> Result<(usize, CoordVectorField, ParamSet), ConfigError> {
        match self.system(field, name)? {
            System::Sode(s) => Ok((s.n, s.field(), s.params.clone())),
            System::Lagrangian(l) => Ok((l.system.n, l.system.herglotz_field(), l.system.params.clone())),
            System::Hamiltonian(h) => Ok((h.n, h.hamiltonian_vector_field(), h.params.clone())),
            other => Err(self.wrong_kind(field, name, other, "a vector field")),
        }
    }

    fn plan(&self, name: &str, n: usize) -> Result<SamplePlan, ConfigError> {
        let plan = self
            .catalog
            .plans
            .get(name)
            .ok_or_else(|| self.err("plan", format!("unknown sample plan `{name}`")))?;
        plan.validate(n).map_err(|e| self.err("plan", e))?;
        Ok(plan.clone())
    }

    fn same_dim(&self, field: &str, n: usize, m: usize) -> Result<(), ConfigError> {
        if n != m {
            return Err(self.err(field, format!("dimension {m} does not match n = {n}")));
        }
        Ok(())
    }

    fn merge(&self, field: &str, a: &ParamSet, b: &ParamSet) -> Result<ParamSet, ConfigError> {
        a.merged(b).map_err(|e| self.err(field, e))
    }

    fn initial(&self, given: Option<&Vec<f64>>, fallback: Option<&Vec<f64>>, n: usize) -> Result<StatePoint, ConfigError> {
        let coords = given.or(fallback).cloned().unwrap_or_else(|| vec![0.0; 2 * n + 1]);
        if coords.len() != 2 * n + 1 || coords.iter().any(|x| !x.is_finite()) {
            return Err(self.err("initial", format!("expected {} finite values", 2 * n + 1)));
        }
        StatePoint::from_coords(n, coords).map_err(|e| self.err("initial", e))
    }

    fn perturbed(&self, sode: SODESystem, args: &InverseArgs) -> Result<SODESystem, ConfigError> {
        match args.perturb {
            None => Ok(sode),
            Some(d) => {
                if args.perturb_index == 0 || args.perturb_index > sode.n {
                    return Err(self.err("perturb_index", format!("must lie in 1..={}", sode.n)));
                }
                if !d.is_finite() {
                    return Err(self.err("perturb", "must be finite"));
                }
                Ok(sode.perturbed(args.perturb_index - 1, d))
            }
        }
    }

    /// Builds an extended system from a Lagrangian written in the chart of
    /// `zeta`, merging parameters.
    fn extended(&self, field: &str, l: &LagrangianEntry, zeta: ActionFunction) -> Result<ExtendedLagrangianSystem, ConfigError> {
        let prm = self.merge(field, &l.system.params, &zeta.params)?;
        ExtendedLagrangianSystem::from_zeta_chart(&l.system.lagrangian, zeta, prm).map_err(|e| self.err(field, e))
    }

    /// Validates `cmd` and returns the work to run.
    pub fn prepare(&self, cmd: &Command) -> Result<Job<'a>, ConfigError> {
        let tol = self.catalog.tolerances;
        match cmd.clone() {
            Command::Simulate(a) => {
                let l = self.lagrangian("system", &a.system)?;
                let p0 = self.initial(a.initial.as_ref(), l.initial.as_ref(), l.system.n)?;
                if !(a.t >= 0.0 && a.t.is_finite()) {
                    return Err(self.err("t", "must be finite and non-negative"));
                }
                if !(a.dt > 0.0 && a.dt.is_finite()) {
                    return Err(self.err("dt", "must be positive"));
                }
                Ok(Box::new(move || simulate(l, &p0, a.t, a.dt, tol)))
            }
            Command::Herglotz(a) => {
                let l = self.lagrangian("system", &a.system)?;
                let n = l.system.n;
                let zeta = self.action("zeta", a.zeta.as_deref(), n)?;
                let given = a.zeta.is_some();
                let ext = self.extended("system", l, zeta)?;
                let plan = self.plan(&a.plan, n)?;
                Ok(Box::new(move || herglotz(&l.system, &ext, given, &plan, tol)))
            }
            Command::CheckStrongEq(a) | Command::CheckEq(a) => {
                let strong = matches!(cmd, Command::CheckStrongEq(_));
                let l = self.lagrangian("lagrangian", &a.lagrangian)?;
                let lbar = self.lagrangian("lagrangian_bar", &a.lagrangian_bar)?;
                let n = l.system.n;
                self.same_dim("lagrangian_bar", n, lbar.system.n)?;
                let zeta = self.action("zeta", a.zeta.as_deref(), n)?;
                let prm = self.merge("lagrangian_bar", &l.system.params, &lbar.system.params)?;
                self.merge("zeta", &prm, &zeta.params)?;
                let base = ContactLagrangianSystem::new(n, l.system.lagrangian.clone(), prm)
                    .map_err(|e| self.err("lagrangian", e))?;
                let lbar = lbar.system.lagrangian.clone();
                let plan = self.plan(&a.plan, n)?;
                Ok(Box::new(move || {
                    let r = if strong {
                        strong_equivalence_check(&base, &lbar, &zeta, &plan, tol)
                    } else {
                        general_equivalence_check(&base, &lbar, &zeta, &plan, tol)
                    };
                    Outcome::report(r)
                }))
            }
            Command::CheckHorizontal(a) => {
                let (n, xi, p1) = self.vector_field("sode", &a.sode)?;
                let (m, xibar, p2) = self.vector_field("sode_bar", &a.sode_bar)?;
                self.same_dim("sode_bar", n, m)?;
                let zeta = self.action("zeta", Some(&a.zeta), n)?;
                let prm = self.merge("sode_bar", &p1, &p2)?;
                let prm = self.merge("zeta", &prm, &zeta.params)?;
                let plan = self.plan(&a.plan, n)?;
                Ok(Box::new(move || {
                    Outcome::report(horizontal_similarity_check(&xi, &xibar, &zeta, &prm, &plan, tol))
                }))
            }
            Command::CheckInverse(a) => {
                let sode = self.perturbed(self.sode("sode", &a.sode)?, &a)?;
                let plan = self.plan(&a.plan, sode.n)?;
                Ok(Box::new(move || {
                    let (report, b) = naive_inverse_check(&sode, &plan, tol);
                    let lines = b.map(|b| vec![format!("L = {b}")]).unwrap_or_default();
                    Outcome { report, lines, csv: None }
                }))
            }
            Command::CheckInverseExt(a) => {
                let sode = self.perturbed(self.sode("sode", &a.sode)?, &a)?;
                let zeta = self.action("zeta", a.zeta.as_deref(), sode.n)?;
                self.merge("zeta", &sode.params, &zeta.params)?;
                let plan = self.plan(&a.plan, sode.n)?;
                Ok(Box::new(move || {
                    let (report, data) = extended_inverse_check(&sode, &zeta, &plan, tol);
                    let lines = data
                        .map(|d| vec![format!("L = {}", d.lagrangian), format!("g = {}", d.g)])
                        .unwrap_or_default();
                    Outcome { report, lines, csv: None }
                }))
            }
            Command::CheckDiEi(a) => {
                let sode = self.perturbed(self.sode("sode", &a.sode)?, &a)?;
                let plan = self.plan(&a.plan, sode.n)?;
                Ok(Box::new(move || Outcome::report(di_ei_diagnostics(&sode, &plan, tol))))
            }
            Command::CheckConformal(a) | Command::CheckDynamical(a) | Command::CheckZeroSet(a) => {
                let h = self.hamiltonian("hamiltonian", &a.hamiltonian)?;
                let hbar = self.hamiltonian("hamiltonian_bar", &a.hamiltonian_bar)?;
                self.same_dim("hamiltonian_bar", h.n, hbar.n)?;
                let factor = match &a.factor {
                    None => None,
                    Some(text) => Some(Expr::parse(text, h.n).map_err(|e| self.err("factor", e))?),
                };
                let plan = self.plan(&a.plan, h.n)?;
                let which = cmd.name();
                Ok(Box::new(move || {
                    Outcome::report(match which {
                        "check-conformal" => conformal_similarity_check(&h, &hbar, factor.as_ref(), &plan, tol),
                        "check-dynamical" => dynamical_equivalence_check(&h, &hbar, &plan, tol),
                        _ => zero_set_diagnostic(&h, &hbar, &plan, tol),
                    })
                }))
            }
            Command::Legendre(a) => {
                let l = self.lagrangian("lagrangian", &a.lagrangian)?;
                let n = l.system.n;
                let zeta = self.action("zeta", a.zeta.as_deref(), n)?;
                let ext = self.extended("lagrangian", l, zeta)?;
                let plan = self.plan(&a.plan, n)?;
                Ok(Box::new(move || Outcome::report(legendre(&ext, &plan, tol))))
            }
            Command::Stationarity(a) => {
                let l = self.lagrangian("lagrangian", &a.lagrangian)?;
                let p0 = self.initial(a.initial.as_ref(), l.initial.as_ref(), l.system.n)?;
                if a.points < 3 {
                    return Err(self.err("points", "need at least 3 grid points"));
                }
                if a.modes == 0 {
                    return Err(self.err("modes", "need at least one mode"));
                }
                if !(a.amplitude > 0.0 && a.amplitude.is_finite()) {
                    return Err(self.err("amplitude", "must be positive"));
                }
                if !(a.stat_tol > 0.0 && a.stat_tol.is_finite()) {
                    return Err(self.err("stat_tol", "must be positive"));
                }
                Ok(Box::new(move || stationarity(&l.system, &p0, &a, tol)))
            }
        }
    }
}

fn simulate(l: &LagrangianEntry, p0: &StatePoint, t: f64, dt: f64, tol: Tolerances) -> Outcome {
    let task = "simulate";
    let sys = &l.system;
    let n = sys.n;
    let prm = &sys.params;
    let field = sys.herglotz_field();
    let traj = match integrate(&field, prm, p0, t, dt) {
        Ok(tr) => tr,
        Err(e) => return Outcome::report(CheckReport::error(task, tol, None, &e)),
    };
    let residual = |p: &StatePoint| -> crate::Result<f64> {
        let x = field.eval(p, prm)?;
        let a: Vec<f64> = (0..n).map(|i| x[n + i]).collect();
        match &l.reference {
            Some(refs) => {
                let mut m: f64 = 0.0;
                for (ai, r) in a.iter().zip(refs) {
                    m = m.max((ai - r.eval(p, prm)?).abs());
                }
                Ok(m)
            }
            None => Ok(sys.herglotz_residual(p, &a)?.amax()),
        }
    };
    let column = match map_points(&traj.states, residual).into_iter().collect::<crate::Result<Vec<f64>>>() {
        Ok(c) => c,
        Err(e) => return Outcome::report(CheckReport::error(task, tol, None, &e)),
    };
    let max = column.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut report = CheckReport::new(task, tol, None);
    report.push(traj.last(), &[("residual", max)], &[("t_end", t), ("steps", (traj.len() - 1) as f64)]);
    let csv = traj.to_csv(&[("residual".into(), column)]);
    Outcome {
        report: report.finish(),
        lines: Vec::new(),
        csv: Some(csv),
    }
}

fn herglotz(
    base: &ContactLagrangianSystem,
    ext: &ExtendedLagrangianSystem,
    zeta_given: bool,
    plan: &SamplePlan,
    tol: Tolerances,
) -> Outcome {
    let n = ext.n;
    let field = if zeta_given { ext.zeta_herglotz_field() } else { base.herglotz_field() };
    let mut lines = Vec::new();
    let closed = if zeta_given {
        field.explicit_components()
    } else {
        base.symbolic_accelerations().map(|acc| {
            let mut c: Vec<Expr> = (0..n).map(Expr::v).collect();
            c.extend(acc);
            c.push(base.lagrangian.clone());
            c
        })
    };
    match closed {
        Some(c) => {
            let names = (1..=n)
                .map(|i| format!("q{i}"))
                .chain((1..=n).map(|i| format!("v{i}")))
                .chain(["z".to_string()]);
            for (name, e) in names.zip(c) {
                lines.push(format!("d{name}/dt = {e}"));
            }
        }
        None => lines.push("components are solved numerically (no closed form for this size)".into()),
    }
    let eta = ext.extended_lagrangian_form();
    let energy = ext.zeta_energy();
    let zgrad = Gradient::new(&ext.zeta.zeta, n);
    let prm = &ext.params;
    let report = sampled_check(
        "herglotz",
        tol,
        plan,
        n,
        |p| ext.zeta.check(p, prm).is_ok(),
        |p| {
            let mut r = PointResult::default();
            let (det, ok) = ext.zeta_regularity(p)?;
            r.info("det_w_zeta", det);
            if !ok {
                r.issue(Verdict::Error, "zeta-regularity violated", format!("det W^ζ = {det:e} at {:?}", p.coords()));
                return Ok(r);
            }
            let x = field.eval(p, prm)?;
            let sode = (0..n).map(|i| (x[i] - p.v()[i]).abs()).fold(0.0, f64::max);
            r.value("sode", sode);
            r.value("z_rate", zgrad.dot(&x, p, prm)? - ext.lagrangian.eval(p, prm)?);
            r.value("contact", eta.eval(p, prm)?.dot(&x) + energy.eval(p, prm)?);
            Ok(r)
        },
    );
    Outcome {
        report,
        lines,
        csv: None,
    }
}

fn legendre(ext: &ExtendedLagrangianSystem, plan: &SamplePlan, tol: Tolerances) -> CheckReport {
    let prm = &ext.params;
    sampled_check(
        "legendre",
        tol,
        plan,
        ext.n,
        |p| ext.zeta.check(p, prm).is_ok(),
        |p| {
            let mut r = PointResult::default();
            let (det, ok) = ext.zeta_regularity(p)?;
            if !ok {
                r.info("det_w_zeta", det);
                r.issue(Verdict::Error, "zeta-regularity violated", format!("det W^ζ = {det:e} at {:?}", p.coords()));
                return Ok(r);
            }
            let img = ext.zeta_legendre(p)?;
            r.value("pullback", img.pullback_residual);
            r.info("jacobian_det", img.jacobian_det);
            r.info("zeta", img.zeta);
            Ok(r)
        },
    )
}

fn stationarity(sys: &ContactLagrangianSystem, p0: &StatePoint, a: &StationarityArgs, tol: Tolerances) -> Outcome {
    let task = "stationarity";
    let n = sys.n;
    let dt = 1.0 / (a.points - 1) as f64;
    let solution = integrate(&sys.herglotz_field(), &sys.params, p0, 1.0, dt).and_then(|tr| tr.to_curve());
    let solution = match solution {
        Ok(c) => c,
        Err(e) => return Outcome::report(CheckReport::error(task, stat_tolerances(a, tol), None, &e)),
    };
    let curve = match a.curve {
        CurveKind::Solution => solution,
        CurveKind::Random => {
            let start = solution.positions[0].clone();
            let end = solution.positions[a.points - 1].clone();
            match random_curve(n, a.points, &start, &end, a.curve_seed) {
                Ok(c) => c,
                Err(e) => return Outcome::report(CheckReport::error(task, stat_tolerances(a, tol), None, &e)),
            }
        }
    };
    let report = stationarity_test(&sys.lagrangian, &sys.params, &curve, p0.z(), a.modes, a.amplitude, a.stat_tol);
    Outcome::report(report)
}

fn stat_tolerances(a: &StationarityArgs, tol: Tolerances) -> Tolerances {
    Tolerances {
        pass_tol: a.stat_tol,
        fail_tol: a.stat_tol,
        det_tol: tol.det_tol,
    }
}

/// `q(t) = (1−t) start + t end + Σⱼ cⱼ sin(jπt)` with three random modes
/// per coordinate, `|cⱼ| <= 0.5`.
pub fn random_curve(n: usize, points: usize, start: &[f64], end: &[f64], seed: u64) -> crate::Result<SampledCurve> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<[f64; 3]> = (0..n)
        .map(|_| std::array::from_fn(|_| rng.random_range(-0.5..0.5)))
        .collect();
    let q = |t: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let bumps: f64 = coeffs[i].iter().enumerate().map(|(j, c)| c * ((j + 1) as f64 * PI * t).sin()).sum();
                (1.0 - t) * start[i] + t * end[i] + bumps
            })
            .collect()
    };
    let v = |t: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let bumps: f64 = coeffs[i]
                    .iter()
                    .enumerate()
                    .map(|(j, c)| {
                        let w = (j + 1) as f64 * PI;
                        c * w * (w * t).cos()
                    })
                    .sum();
                end[i] - start[i] + bumps
            })
            .collect()
    };
    SampledCurve::from_fn(n, points, q, Some(&v))
}

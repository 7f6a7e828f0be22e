//! Run configuration: named systems, sample plans, tolerances and tasks.

use crate::contact::{ContactHamiltonianSystem, CoordOneForm};
use crate::expr::{Expr, ParamSet};
use crate::extended::{parse_zeta_chart, ActionFunction, ZETA_SYMBOL};
use crate::inverse::SODESystem;
use crate::lagrangian::ContactLagrangianSystem;
use crate::report::Tolerances;
use crate::sampling::SamplePlan;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

/// The fixture pack compiled into the binary.
pub const BUILTIN: &str = include_str!("../../fixtures/builtin.json");

/// Environment variable overriding the seed of every sample plan.
pub const SEED_ENV: &str = "HERGLOTZ_SEED";

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error at {}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub systems: BTreeMap<String, SystemSpec>,
    #[serde(default)]
    pub sample_plans: BTreeMap<String, SamplePlan>,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Lagrangian {
        n: usize,
        lagrangian: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
        #[serde(default)]
        initial: Option<Vec<f64>>,
        #[serde(default)]
        reference_accelerations: Option<Vec<String>>,
    },
    /// `eta` lists the `2n+1` components; absent means `dz − pᵢdqⁱ`.
    Hamiltonian {
        n: usize,
        #[serde(default)]
        eta: Option<Vec<String>>,
        h: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
    Sode {
        n: usize,
        accelerations: Vec<String>,
        z_rate: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
    Action {
        n: usize,
        zeta: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub command: String,
    #[serde(default = "empty_args")]
    pub args: serde_json::Value,
}

fn empty_args() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

/// A Lagrangian together with the optional extras of its spec.
#[derive(Debug, Clone)]
pub struct LagrangianEntry {
    pub system: ContactLagrangianSystem,
    /// True when written in a `ζ`-chart (the `zeta` symbol was replaced by `z`).
    pub zeta_chart: bool,
    pub initial: Option<Vec<f64>>,
    pub reference: Option<Vec<Expr>>,
}

#[derive(Debug, Clone)]
pub enum System {
    Lagrangian(LagrangianEntry),
    Hamiltonian(ContactHamiltonianSystem),
    Sode(SODESystem),
    Action(ActionFunction),
}

impl System {
    pub fn kind(&self) -> &'static str {
        match self {
            System::Lagrangian(_) => "lagrangian",
            System::Hamiltonian(_) => "hamiltonian",
            System::Sode(_) => "sode",
            System::Action(_) => "action",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            System::Lagrangian(l) => l.system.n,
            System::Hamiltonian(h) => h.n,
            System::Sode(s) => s.n,
            System::Action(a) => a.n,
        }
    }
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Catalog {
    pub systems: BTreeMap<String, System>,
    pub plans: BTreeMap<String, SamplePlan>,
    pub tolerances: Tolerances,
    pub tasks: Vec<TaskSpec>,
    pub output_dir: Option<PathBuf>,
    pub seed_override: Option<u64>,
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "(root)".to_string() } else { path };
        ConfigError::new(path, e.into_inner())
    })
}

impl Catalog {
    /// The built-in fixture pack, optionally overlaid with a user config
    /// (user systems and plans replace built-ins of the same name; user tasks
    /// replace the built-in task list). `seed` overrides every plan's seed.
    pub fn load(user: Option<&Path>, seed: Option<u64>) -> Result<Catalog, ConfigError> {
        let builtin = parse_config(BUILTIN).expect("built-in fixtures parse");
        let merged = match user {
            None => builtin,
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError::new(path.display().to_string(), e))?;
                let user = parse_config(&text)?;
                let mut systems = builtin.systems;
                systems.extend(user.systems);
                let mut sample_plans = builtin.sample_plans;
                sample_plans.extend(user.sample_plans);
                RunConfig {
                    systems,
                    sample_plans,
                    tolerances: user.tolerances.or(builtin.tolerances),
                    tasks: user.tasks,
                    output_dir: user.output_dir,
                }
            }
        };
        Self::from_config(merged, seed)
    }

    pub fn from_config(cfg: RunConfig, seed: Option<u64>) -> Result<Catalog, ConfigError> {
        let tolerances = cfg.tolerances.unwrap_or_default();
        tolerances
            .validate()
            .map_err(|e| ConfigError::new("tolerances", e))?;
        let mut systems = BTreeMap::new();
        for (name, spec) in &cfg.systems {
            let sys = compile(spec).map_err(|(field, msg)| {
                let path = match field {
                    Some(f) => format!("systems.{name}.{f}"),
                    None => format!("systems.{name}"),
                };
                ConfigError::new(path, msg)
            })?;
            systems.insert(name.clone(), sys);
        }
        let mut plans = cfg.sample_plans;
        if let Some(s) = seed {
            for plan in plans.values_mut() {
                plan.seed = s;
            }
        }
        Ok(Catalog {
            systems,
            plans,
            tolerances,
            tasks: cfg.tasks,
            output_dir: cfg.output_dir,
            seed_override: seed,
        })
    }
}

/// Reads the seed override from the environment.
pub fn seed_from_env() -> Result<Option<u64>, ConfigError> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| ConfigError::new(SEED_ENV, format!("`{s}` is not a seed: {e}"))),
        Err(_) => Ok(None),
    }
}

type CompileError = (Option<String>, String);

fn at(field: impl Into<String>) -> impl FnOnce(crate::Error) -> CompileError {
    let field = field.into();
    move |e| (Some(field), e.to_string())
}

fn params(map: &BTreeMap<String, f64>) -> Result<ParamSet, CompileError> {
    ParamSet::from_pairs(map.iter().map(|(k, v)| (k.as_str(), *v)))
        .map_err(|e| (Some("params".into()), e.to_string()))
}

fn expr(text: &str, n: usize, prm: &ParamSet, field: String) -> Result<Expr, CompileError> {
    let e = Expr::parse(text, n).map_err(|e| (Some(field.clone()), e.to_string()))?;
    check_expr(&e, n, prm, field)?;
    Ok(e)
}

fn check_expr(e: &Expr, n: usize, prm: &ParamSet, field: String) -> Result<(), CompileError> {
    if e.required_dim() > n {
        return Err((Some(field), format!("references coordinates beyond n = {n}")));
    }
    if let Some(p) = e.params().into_iter().find(|p| prm.get(p).is_none()) {
        return Err((Some(field), format!("unbound parameter `{p}`")));
    }
    Ok(())
}

fn check_dim(n: usize) -> Result<(), CompileError> {
    if n == 0 {
        return Err((Some("n".into()), "n must be at least 1".into()));
    }
    Ok(())
}

fn compile(spec: &SystemSpec) -> Result<System, CompileError> {
    match spec {
        SystemSpec::Lagrangian {
            n,
            lagrangian,
            params: p,
            initial,
            reference_accelerations,
        } => {
            let n = *n;
            check_dim(n)?;
            let prm = params(p)?;
            let raw = Expr::parse(lagrangian, n).map_err(|e| (Some("lagrangian".into()), e.to_string()))?;
            let zeta_chart = raw.params().contains(ZETA_SYMBOL) && prm.get(ZETA_SYMBOL).is_none();
            let l = if zeta_chart {
                parse_zeta_chart(lagrangian, n).map_err(at("lagrangian"))?
            } else {
                raw
            };
            check_expr(&l, n, &prm, "lagrangian".into())?;
            if let Some(x) = initial {
                if x.len() != 2 * n + 1 || x.iter().any(|v| !v.is_finite()) {
                    return Err((Some("initial".into()), format!("expected {} finite values", 2 * n + 1)));
                }
            }
            let reference = match reference_accelerations {
                None => None,
                Some(list) => {
                    if list.len() != n {
                        return Err((Some("reference_accelerations".into()), format!("expected {n} expressions")));
                    }
                    let exprs = list
                        .iter()
                        .enumerate()
                        .map(|(i, s)| expr(s, n, &prm, format!("reference_accelerations[{i}]")))
                        .collect::<Result<Vec<_>, _>>()?;
                    Some(exprs)
                }
            };
            let system = ContactLagrangianSystem::new(n, l, prm).map_err(at("lagrangian"))?;
            Ok(System::Lagrangian(LagrangianEntry {
                system,
                zeta_chart,
                initial: initial.clone(),
                reference,
            }))
        }
        SystemSpec::Hamiltonian { n, eta, h, params: p } => {
            let n = *n;
            check_dim(n)?;
            let prm = params(p)?;
            let form = match eta {
                None => CoordOneForm::darboux(n),
                Some(list) => {
                    if list.len() != 2 * n + 1 {
                        return Err((Some("eta".into()), format!("expected {} components", 2 * n + 1)));
                    }
                    let comps = list
                        .iter()
                        .enumerate()
                        .map(|(i, s)| expr(s, n, &prm, format!("eta[{i}]")))
                        .collect::<Result<Vec<_>, _>>()?;
                    CoordOneForm::new(n, comps).map_err(at("eta"))?
                }
            };
            let h = expr(h, n, &prm, "h".into())?;
            Ok(System::Hamiltonian(ContactHamiltonianSystem::new(form, h, prm)))
        }
        SystemSpec::Sode {
            n,
            accelerations,
            z_rate,
            params: p,
        } => {
            let n = *n;
            check_dim(n)?;
            let prm = params(p)?;
            if accelerations.len() != n {
                return Err((Some("accelerations".into()), format!("expected {n} expressions")));
            }
            let acc = accelerations
                .iter()
                .enumerate()
                .map(|(i, s)| expr(s, n, &prm, format!("accelerations[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            let b = expr(z_rate, n, &prm, "z_rate".into())?;
            Ok(System::Sode(SODESystem::new(acc, b, prm).map_err(at("accelerations"))?))
        }
        SystemSpec::Action { n, zeta, params: p } => {
            let n = *n;
            check_dim(n)?;
            let prm = params(p)?;
            let e = expr(zeta, n, &prm, "zeta".into())?;
            Ok(System::Action(ActionFunction::new(n, e, prm).map_err(at("zeta"))?))
        }
    }
}

//! Sampled residual reports.

use crate::error::{Error, Result};
use crate::expr::StatePoint;
use crate::sampling::{map_points, SamplePlan};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
    Error,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Fail => "fail",
            Verdict::Error => "error",
        }
    }

    /// Process exit code for this verdict.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive | Verdict::Error => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub pass_tol: f64,
    pub fail_tol: f64,
    pub det_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            pass_tol: 1e-8,
            fail_tol: 1e-4,
            det_tol: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.pass_tol) || !ok(self.fail_tol) || !ok(self.det_tol) {
            return Err(Error::Precondition("tolerances must be positive".into()));
        }
        if self.pass_tol >= self.fail_tol {
            return Err(Error::Precondition("pass_tol must be below fail_tol".into()));
        }
        Ok(())
    }

    /// Verdict for a maximum residual alone.
    pub fn classify(&self, max_residual: f64) -> Verdict {
        if max_residual.is_nan() {
            Verdict::Error
        } else if max_residual <= self.pass_tol {
            Verdict::Pass
        } else if max_residual >= self.fail_tol {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }
}

/// Residuals at one point. `info` holds auxiliary values (determinants,
/// fitted factors) that do not enter `max_residual`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub point: Vec<f64>,
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub info: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub task: String,
    pub verdict: Verdict,
    pub max_residual: f64,
    pub tolerances: Tolerances,
    pub sample_plan: Option<SamplePlan>,
    pub residuals: Vec<ResidualRecord>,
    pub diagnostics: Vec<String>,
}

impl CheckReport {
    pub fn new(task: impl Into<String>, tolerances: Tolerances, plan: Option<&SamplePlan>) -> Self {
        CheckReport {
            task: task.into(),
            verdict: Verdict::Pass,
            max_residual: 0.0,
            tolerances,
            sample_plan: plan.cloned(),
            residuals: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    /// Report for a check that could not run.
    pub fn error(task: impl Into<String>, tolerances: Tolerances, plan: Option<&SamplePlan>, err: &Error) -> Self {
        let mut r = Self::new(task, tolerances, plan);
        r.verdict = Verdict::Error;
        r.diagnostics.push(err.to_string());
        r
    }

    pub fn push(&mut self, p: &StatePoint, values: &[(&str, f64)], info: &[(&str, f64)]) {
        let to_map = |kv: &[(&str, f64)]| kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        self.residuals.push(ResidualRecord {
            point: p.coords().to_vec(),
            values: to_map(values),
            info: to_map(info),
        });
    }

    pub fn push_owned(&mut self, p: &StatePoint, values: Vec<(String, f64)>, info: Vec<(String, f64)>) {
        self.residuals.push(ResidualRecord {
            point: p.coords().to_vec(),
            values: values.into_iter().collect(),
            info: info.into_iter().collect(),
        });
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        self.diagnostics.push(msg.into());
    }

    /// Raises the verdict to at least `v`.
    pub fn escalate(&mut self, v: Verdict, msg: impl Into<String>) {
        self.verdict = self.verdict.max(v);
        self.note(msg);
    }

    /// Largest value of residual `name` over all records.
    pub fn max_of(&self, name: &str) -> f64 {
        self.residuals
            .iter()
            .filter_map(|r| r.values.get(name))
            .fold(0.0, |m, v| nan_max(m, v.abs()))
    }

    /// Sets `max_residual` and combines the tolerance verdict with any
    /// escalation already recorded.
    pub fn finish(mut self) -> Self {
        self.max_residual = self
            .residuals
            .iter()
            .flat_map(|r| r.values.values())
            .fold(0.0, |m, v| nan_max(m, v.abs()));
        let by_tol = self.tolerances.classify(self.max_residual);
        if by_tol == Verdict::Error {
            self.note("non-finite residual");
        }
        self.verdict = self.verdict.max(by_tol);
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Outcome of a check at one point.
#[derive(Clone, Debug, Default)]
pub struct PointResult {
    pub values: Vec<(String, f64)>,
    pub info: Vec<(String, f64)>,
    /// `(verdict, kind, detail)`; the report keeps the first detail per kind.
    pub issues: Vec<(Verdict, &'static str, String)>,
}

impl PointResult {
    pub fn value(&mut self, name: impl Into<String>, v: f64) {
        self.values.push((name.into(), v));
    }

    pub fn info(&mut self, name: impl Into<String>, v: f64) {
        self.info.push((name.into(), v));
    }

    pub fn issue(&mut self, verdict: Verdict, kind: &'static str, detail: impl Into<String>) {
        self.issues.push((verdict, kind, detail.into()));
    }
}

/// Runs `eval` at every accepted point of `plan` (in parallel) and folds the
/// results into a report in point order.
pub fn sampled_check(
    task: &str,
    tol: Tolerances,
    plan: &SamplePlan,
    n: usize,
    accept: impl Fn(&StatePoint) -> bool,
    eval: impl Fn(&StatePoint) -> Result<PointResult> + Sync + Send,
) -> CheckReport {
    let sample = match plan.points_where(n, accept) {
        Ok(s) => s,
        Err(e) => return CheckReport::error(task, tol, Some(plan), &e),
    };
    let mut report = CheckReport::new(task, tol, Some(plan));
    if sample.rejected > 0 {
        report.note(format!("{} candidate points rejected (frame singular)", sample.rejected));
    }
    let outcomes = map_points(&sample.points, eval);
    let mut kinds: Vec<(&'static str, Verdict, String, usize)> = Vec::new();
    let mut record = |v: Verdict, kind: &'static str, detail: String| {
        match kinds.iter_mut().find(|k| k.0 == kind) {
            Some(k) => {
                k.1 = k.1.max(v);
                k.3 += 1;
            }
            None => kinds.push((kind, v, detail, 1)),
        }
    };
    for (p, out) in sample.points.iter().zip(outcomes) {
        match out {
            Ok(r) => {
                for (v, kind, detail) in r.issues {
                    record(v, kind, detail);
                }
                report.push_owned(p, r.values, r.info);
            }
            Err(e) => record(Verdict::Error, "evaluation failed", e.to_string()),
        }
    }
    for (kind, v, detail, count) in kinds {
        report.escalate(v, format!("{kind}: {detail} ({count} point(s))"));
    }
    report.finish()
}

fn nan_max(m: f64, v: f64) -> f64 {
    if v.is_nan() || m.is_nan() {
        f64::NAN
    } else {
        m.max(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(z: f64) -> StatePoint {
        StatePoint::new(&[0.0], &[0.0], z).unwrap()
    }

    #[test]
    fn verdict_bands() {
        let t = Tolerances::default();
        assert_eq!(t.classify(0.0), Verdict::Pass);
        assert_eq!(t.classify(1e-8), Verdict::Pass);
        assert_eq!(t.classify(1e-6), Verdict::Inconclusive);
        assert_eq!(t.classify(1e-4), Verdict::Fail);
        assert_eq!(t.classify(f64::NAN), Verdict::Error);
    }

    #[test]
    fn finish_takes_max_over_values_only() {
        let mut r = CheckReport::new("t", Tolerances::default(), None);
        r.push(&pt(0.0), &[("a", 1e-12)], &[("det", 5.0)]);
        r.push(&pt(1.0), &[("a", -3e-9), ("b", 0.0)], &[]);
        let r = r.finish();
        assert_eq!(r.max_residual, 3e-9);
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.max_of("b"), 0.0);
    }

    #[test]
    fn escalation_is_sticky() {
        let mut r = CheckReport::new("t", Tolerances::default(), None);
        r.push(&pt(0.0), &[("a", 0.0)], &[]);
        r.escalate(Verdict::Error, "regularity");
        r.escalate(Verdict::Fail, "later");
        assert_eq!(r.finish().verdict, Verdict::Error);
    }

    #[test]
    fn exit_codes_and_tolerance_validation() {
        assert_eq!(Verdict::Pass.exit_code(), 0);
        assert_eq!(Verdict::Fail.exit_code(), 1);
        assert_eq!(Verdict::Inconclusive.exit_code(), 2);
        assert_eq!(Verdict::Error.exit_code(), 2);
        let bad = Tolerances {
            pass_tol: 1e-3,
            fail_tol: 1e-4,
            det_tol: 1e-10,
        };
        assert!(bad.validate().is_err());
        assert!(Tolerances::default().validate().is_ok());
    }

    #[test]
    fn json_schema_fields() {
        let plan = SamplePlan::cube(-1.0, 1.0, 2, 9);
        let mut r = CheckReport::new("demo", Tolerances::default(), Some(&plan));
        r.push(&pt(0.5), &[("x", 0.0)], &[]);
        let json: serde_json::Value = serde_json::from_str(&r.finish().to_json()).unwrap();
        for key in ["task", "verdict", "max_residual", "tolerances", "sample_plan", "residuals", "diagnostics"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["verdict"], "pass");
        assert_eq!(json["sample_plan"]["mode"], "random");
        assert_eq!(json["residuals"][0]["point"][2], 0.5);
    }
}

//! Scenario reports and output plumbing.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use steerlab::detect::{Robustness, DEFAULT_TOL};
use steerlab::ineq::{SteeringFunctional, BOUND_TOL};
use steerlab::io::{functional_to_json, matrix_to_json, state_to_json};
use steerlab::meas::NO_SIGNALING_TOL;
use steerlab::qmat::{BipartiteState, HERMITICITY_TOL, PSD_TOL, TRACE_TOL};

/// Entrywise tolerance for exact algebraic identities.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Tolerance for linear identities between functional values.
pub const FUNCTIONAL_TOL: f64 = 1e-10;

/// Label attached to every finite-family feasibility fact.
pub const FINITE_FAMILY: &str = "necessary-condition check (finite family)";

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Threshold the value was compared against.
    pub tolerance: f64,
    pub relation: &'static str,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Step {
    pub name: String,
    pub result: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub version: String,
    pub inputs: Value,
    pub tolerances: BTreeMap<&'static str, f64>,
    pub steps: Vec<Step>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub passed: bool,
}

impl ScenarioReport {
    pub fn new(scenario: &str, inputs: Value, solver_tol: f64) -> Self {
        let tolerances = BTreeMap::from([
            ("identity", IDENTITY_TOL),
            ("functional_identity", FUNCTIONAL_TOL),
            ("hermiticity", HERMITICITY_TOL),
            ("trace", TRACE_TOL),
            ("psd", PSD_TOL),
            ("no_signaling", NO_SIGNALING_TOL),
            ("functional_bound", BOUND_TOL),
            ("solver_default", DEFAULT_TOL),
            ("feasibility", solver_tol),
        ]);
        Self {
            scenario: scenario.to_string(),
            version: VERSION.to_string(),
            inputs,
            tolerances,
            steps: Vec::new(),
            checks: Vec::new(),
            warnings: Vec::new(),
            passed: true,
        }
    }

    pub fn step(&mut self, name: &str, result: Value) {
        self.steps.push(Step {
            name: name.to_string(),
            result,
        });
    }

    pub fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    fn push(&mut self, name: &str, value: f64, tolerance: f64, relation: &'static str, passed: bool) {
        if !passed {
            log::warn!("check failed: {name} = {value:e} ({relation} {tolerance:e})");
        }
        self.passed &= passed;
        self.checks.push(Check {
            name: name.to_string(),
            value,
            tolerance,
            relation,
            passed,
        });
    }

    /// Passes when `value <= tolerance`.
    pub fn check_le(&mut self, name: &str, value: f64, tolerance: f64) {
        self.push(name, value, tolerance, "<=", value <= tolerance);
    }

    /// Passes when `value > threshold`.
    pub fn check_gt(&mut self, name: &str, value: f64, threshold: f64) {
        self.push(name, value, threshold, ">", value > threshold);
    }

    /// Passes when `value < threshold`.
    pub fn check_lt(&mut self, name: &str, value: f64, threshold: f64) {
        self.push(name, value, threshold, "<", value < threshold);
    }

    /// Passes when `value >= threshold`.
    pub fn check_ge(&mut self, name: &str, value: f64, threshold: f64) {
        self.push(name, value, threshold, ">=", value >= threshold);
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn state_value(rho: &BipartiteState) -> Value {
    serde_json::to_value(state_to_json(rho)).expect("state encodes")
}

pub fn functional_value(g: &SteeringFunctional) -> Value {
    serde_json::to_value(functional_to_json(g)).expect("functional encodes")
}

/// Robustness with everything needed to audit it.
pub fn robustness_value(r: &Robustness) -> Value {
    serde_json::json!({
        "t": r.t,
        "tolerance": r.tolerance,
        "primal_residual": r.primal_residual,
        "dual_residual": r.dual_residual,
        "gap": r.gap,
        "iterations": r.iterations,
        "scope": FINITE_FAMILY,
        "certificate": functional_value(&r.certificate),
    })
}

pub fn lhs_model_value(model: &steerlab::detect::LhsDecomposition) -> Value {
    let parts: Vec<Value> = model
        .strategies
        .iter()
        .zip(&model.states)
        .map(|(s, st)| serde_json::json!({"strategy": s, "state": matrix_to_json(st.matrix())}))
        .collect();
    Value::Array(parts)
}

/// Pretty JSON with a trailing newline.
pub fn render<T: Serialize>(value: &T) -> steerlab::Result<String> {
    steerlab::io::to_json_string(value)
}

/// Writes `text` to `out` atomically, or to stdout when no path is given.
pub fn write_output(text: &str, out: Option<&Path>) -> std::io::Result<()> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(text.as_bytes())?;
            tmp.as_file().sync_all()?;
            tmp.persist(path).map_err(|e| e.error)?;
            Ok(())
        }
    }
}

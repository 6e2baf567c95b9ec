//! File-driven commands.

use serde_json::{json, Value};

use steerlab::detect::{bell_local_lp, lhs_feasibility, solve, ConicProblem, SolveResult};
use steerlab::io::{parse_document, Document};
use steerlab::meas::{assemblage, standard_family, Assemblage, FamilyKind};
use steerlab::qmat::BipartiteState;
use steerlab::states::entanglement_verdict;
use steerlab::{Error, Result};

use crate::report::{functional_value, lhs_model_value, FINITE_FAMILY, VERSION};
use crate::scenarios::family_from_name;

fn steering_value(sigma: &Assemblage, family: Option<&str>, tol: f64) -> Result<Value> {
    let f = lhs_feasibility(sigma, tol)?;
    let (nx, na, db) = sigma.shape();
    Ok(json!({
        "test": "steering",
        "family": family,
        "shape": {"nX": nx, "nA": na, "dimB": db},
        "scope": FINITE_FAMILY,
        "verdict": if f.feasible { "no steering detected with this family" } else { "steerable" },
        "robustness": f.robustness,
        "tolerance": f.tolerance,
        "solver_tolerance": f.solver_tolerance,
        "certificate": f.certificate.as_ref().map(functional_value),
        "certificate_value": f.certificate_value,
        "model": f.model.as_ref().map(lhs_model_value),
    }))
}

fn default_family(rho: &BipartiteState) -> Result<FamilyKind> {
    match rho.dim_a() {
        2 => Ok(FamilyKind::Pauli3),
        3 => Ok(FamilyKind::Mub { d: 3 }),
        d => Err(Error::Parse(format!(
            "no default family for Alice dimension {d}; pass --family sphere{d}:<settings> with --seed"
        ))),
    }
}

/// Runs the detection matching the document in `text`.
pub fn detect(text: &str, family: Option<&str>, seed: Option<u64>, tol: f64) -> Result<Value> {
    let (input, result) = match parse_document(text)? {
        Document::State(rho) => {
            let fam = match family {
                Some(name) => family_from_name(name, seed)?,
                None => standard_family(&default_family(&rho)?)?,
            };
            if fam.dim() != rho.dim_a() {
                return Err(Error::Parse(format!(
                    "family {} acts on dimension {}, but Alice's dimension is {}",
                    fam.label(),
                    fam.dim(),
                    rho.dim_a()
                )));
            }
            let mut v = steering_value(&assemblage(&rho, &fam)?, Some(fam.label()), tol)?;
            v["entanglement"] = json!(entanglement_verdict(&rho)?.label());
            ("state", v)
        }
        Document::Assemblage(sigma) => {
            if family.is_some() {
                log::warn!("--family is ignored for assemblage input");
            }
            ("assemblage", steering_value(&sigma, None, tol)?)
        }
        Document::Behavior(p) => {
            if family.is_some() {
                log::warn!("--family is ignored for behavior input");
            }
            let r = bell_local_lp(&p, tol)?;
            let v = json!({
                "test": "bell",
                "shape": p.shape(),
                "scope": FINITE_FAMILY,
                "verdict": if r.local { "local for these settings" } else { "nonlocal" },
                "robustness": r.robustness,
                "tolerance": r.tolerance,
                "functional": r.functional,
                "functional_value": r.functional_value,
                "weights": r.weights,
            });
            ("behavior", v)
        }
    };
    Ok(json!({"version": VERSION, "input": input, "result": result}))
}

/// Parses a conic problem and solves it.
pub fn solve_problem(text: &str, tol: f64) -> Result<SolveResult> {
    let problem: ConicProblem =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("conic problem: {e}")))?;
    solve(&problem, tol)
}

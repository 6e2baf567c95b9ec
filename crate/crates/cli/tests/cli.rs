use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use steerlab::detect::DEFAULT_TOL;
use steerlab::io::{assemblage_to_json, behavior_to_json, state_to_json, to_json_string};
use steerlab::meas::{assemblage, behavior, chsh_families, standard_family, FamilyKind};
use steerlab::states::{singlet, werner};
use steerlab_cli::report::FINITE_FAMILY;
use steerlab_cli::scenarios;

fn steerlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steerlab")).args(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn singlet_assemblage_file_is_steerable_with_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = assemblage(&singlet(), &standard_family(&FamilyKind::Pauli3).unwrap()).unwrap();
    let path = write(dir.path(), "sigma.json", &to_json_string(&assemblage_to_json(&sigma)).unwrap());
    let out = steerlab(&["detect", &path]);
    assert_eq!(out.status.code(), Some(0));
    let r = json_of(&out);
    assert_eq!(r["input"], "assemblage");
    assert_eq!(r["result"]["verdict"], "steerable");
    assert_eq!(r["result"]["certificate"]["operators"].as_array().unwrap().len(), 3);
    assert!(r["result"]["certificate_value"].as_f64().unwrap() > 0.0);
    assert_eq!(r["result"]["tolerance"].as_f64().unwrap(), DEFAULT_TOL);
}

#[test]
fn werner_state_file_is_not_detected_and_carries_scope() {
    let dir = tempfile::tempdir().unwrap();
    let rho = werner(2, 0.5).unwrap();
    let path = write(dir.path(), "rho.json", &to_json_string(&state_to_json(&rho)).unwrap());
    let out = steerlab(&["detect", &path, "--family", "mub2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json_of(&out);
    assert_eq!(r["result"]["verdict"], "no steering detected with this family");
    assert_eq!(r["result"]["scope"], FINITE_FAMILY);
    assert!(r["result"]["model"].is_array());
    assert!(!String::from_utf8_lossy(&out.stdout).contains("admits LHS model"));
}

#[test]
fn behavior_file_runs_the_bell_test() {
    let dir = tempfile::tempdir().unwrap();
    let (fa, fb) = chsh_families().unwrap();
    let p = behavior(&singlet(), &fa, &fb).unwrap();
    let path = write(dir.path(), "p.json", &to_json_string(&behavior_to_json(&p)).unwrap());
    let out = steerlab(&["detect", &path]);
    assert_eq!(out.status.code(), Some(0));
    let r = json_of(&out);
    assert_eq!(r["result"]["verdict"], "nonlocal");
    let v = r["result"]["functional_value"].as_f64().unwrap();
    assert!((v - 2.0 * 2f64.sqrt()).abs() < 1e-6);
}

#[test]
fn non_hermitian_input_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let sigma = assemblage(&singlet(), &standard_family(&FamilyKind::Pauli3).unwrap()).unwrap();
    let mut js = assemblage_to_json(&sigma);
    js.members[1][0][0][1][1] += 1e-3;
    let path = write(dir.path(), "bad.json", &serde_json::to_string(&js).unwrap());
    let out = steerlab(&["detect", &path]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("members[1][0]") && msg.contains("(0, 1)"), "{msg}");
}

#[test]
fn malformed_json_and_missing_files_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "broken.json", "{\"dims\": [2, 2], \"matrix\": [");
    assert_eq!(steerlab(&["detect", &path]).status.code(), Some(2));
    let missing = dir.path().join("absent.json");
    assert_eq!(steerlab(&["detect", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(steerlab(&["solve", &path]).status.code(), Some(2));
}

#[test]
fn out_of_domain_parameters_exit_2() {
    assert_eq!(steerlab(&["steervsnl", "--q", "1.5"]).status.code(), Some(2));
    assert_eq!(steerlab(&["hidden", "--d", "2"]).status.code(), Some(2));
    let out = steerlab(&["entvsteer", "--d", "4", "--alpha", "0.22"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn solve_reports_optimal_and_infeasible_answers() {
    let dir = tempfile::tempdir().unwrap();
    let lp = write(
        dir.path(),
        "lp.json",
        r#"{"c": [1, 2], "a": [[1, 1]], "b": [1], "cones": [{"non_neg": 2}]}"#,
    );
    let out = steerlab(&["solve", &lp]);
    assert_eq!(out.status.code(), Some(0));
    let r = json_of(&out);
    assert_eq!(r["status"], "optimal");
    assert!((r["primal_objective"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    let infeasible = write(
        dir.path(),
        "inf.json",
        r#"{"c": [1, 1], "a": [[1, 1]], "b": [-1], "cones": [{"non_neg": 2}]}"#,
    );
    let out = steerlab(&["solve", &infeasible]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["status"], "infeasible");
}

#[test]
fn out_flag_writes_the_same_bytes_as_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = steerlab(&["hidden", "--d", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let stdout = steerlab(&["hidden", "--d", "3"]).stdout;
    assert_eq!(std::fs::read(&path).unwrap(), stdout);
}

#[test]
fn entvsteer_inside_window_is_npt_without_warning() {
    let r = scenarios::entanglement_vs_steering(2, 0.4, None, DEFAULT_TOL).unwrap();
    assert!(r.passed, "{:?}", r.checks);
    assert!(r.warnings.is_empty());
    let werner = &r.steps.iter().find(|s| s.name == "werner").unwrap().result;
    assert_eq!(werner["verdict"], "NPT (entangled)");
    let th = &r.steps.iter().find(|s| s.name == "thresholds").unwrap().result;
    assert_eq!(th["povm_lhs"].as_f64().unwrap(), 5.0 / 12.0);
}

#[test]
fn entvsteer_below_window_is_ppt_and_flagged() {
    let r = scenarios::entanglement_vs_steering(2, 0.3, None, DEFAULT_TOL).unwrap();
    assert!(r.passed, "{:?}", r.checks);
    assert_eq!(r.warnings.len(), 1);
    let werner = &r.steps.iter().find(|s| s.name == "werner").unwrap().result;
    assert_eq!(werner["verdict"], "PPT (separable)");
}

#[test]
fn steervsnl_filter_identities_and_certificates() {
    let r = scenarios::steering_vs_nonlocality(0.5, DEFAULT_TOL).unwrap();
    assert!(r.passed, "{:?}", r.checks);
    for name in ["Alice qubit filter gives erasure(q/3, B)", "Bob qubit filter gives erasure(1/3, A)"] {
        assert!(r.check(name).unwrap().value <= 1e-12);
    }
    let chain = &r.steps.iter().find(|s| s.name == "erasure_alice_filtered").unwrap().result;
    let t = chain["singlet_robustness"]["t"].as_f64().unwrap();
    assert!((t - (2.0 - 3f64.sqrt())).abs() < 1e-6);
    let corollary = &r.steps.iter().find(|s| s.name == "corollary_chain").unwrap().result;
    assert_eq!(corollary["alice_to_bob_certified"], true);
    // At q = 1/2 the flagged-side erasure parameter sits exactly on the
    // six-axis loss threshold 1/6.
    assert_eq!(corollary["bob_to_alice_certified"], false);
    assert_eq!(r.warnings.len(), 1);
}

#[test]
fn steervsnl_certifies_both_directions_above_the_loss_threshold() {
    let r = scenarios::steering_vs_nonlocality(1.0, DEFAULT_TOL).unwrap();
    assert!(r.passed, "{:?}", r.checks);
    let corollary = &r.steps.iter().find(|s| s.name == "corollary_chain").unwrap().result;
    assert_eq!(corollary["bob_to_alice_certified"], true);
    assert!(r.check("bob_to_alice: pulled-back certificate value on rho_G").unwrap().passed);
}

#[test]
fn oneway_records_exploratory_search_with_seed() {
    let r = scenarios::one_way(7, DEFAULT_TOL).unwrap();
    assert!(r.passed, "{:?}", r.checks);
    let search = &r.steps.iter().find(|s| s.name == "exploratory_bob_to_alice").unwrap().result;
    assert_eq!(search["seed"], 7);
    assert_eq!(search["gating"], false);
    let families = search["families"].as_array().unwrap();
    assert!(families.iter().any(|f| f["family"].as_str().unwrap().contains("seed7")));
}

#[test]
fn hidden_reports_visibility_and_steering() {
    let r = scenarios::hidden_steering(4, DEFAULT_TOL).unwrap();
    assert!(r.passed, "{:?}", r.checks);
    let vis = &r.steps.iter().find(|s| s.name == "visibility").unwrap().result;
    assert!((vis["value"].as_f64().unwrap() - 4.0 / 6.0).abs() < 1e-15);
    let r3 = scenarios::hidden_steering(3, DEFAULT_TOL).unwrap();
    assert!(r3.check("target robustness alice_to_bob").unwrap().value > DEFAULT_TOL);
}

#[test]
fn reports_never_claim_models_for_all_measurements() {
    for r in [
        scenarios::entanglement_vs_steering(2, 0.4, None, DEFAULT_TOL).unwrap(),
        scenarios::one_way(1, DEFAULT_TOL).unwrap(),
    ] {
        let text = steerlab_cli::report::render(&r).unwrap();
        assert!(!text.contains("admits LHS model"));
        assert!(text.contains(FINITE_FAMILY));
        assert!(text.contains("\"tolerances\""));
    }
}

//! The four demonstration scenarios.

use serde_json::{json, Value};

use steerlab::detect::{bell_local_lp, lhs_feasibility, steering_robustness, LhsFeasibility};
use steerlab::ineq::{evaluate, transform, BOUND_TOL};
use steerlab::maps::{apply_to_state, filter_assemblage, hidden_to_oneway, KrausMap};
use steerlab::meas::{assemblage, behavior, standard_family, Assemblage, FamilyKind, MeasurementFamily};
use steerlab::qmat::{BipartiteState, Party, PSD_TOL};
use steerlab::states::{
    compress, entanglement_verdict, erasure, flag_extend, hidden_steering_target, rho_1w, rho_1w_prime, rho_g,
    rho_hs, singlet, werner, werner_thresholds, EntanglementVerdict,
};
use steerlab::{Error, Result};

use crate::report::{
    functional_value, robustness_value, state_value, ScenarioReport, FINITE_FAMILY, FUNCTIONAL_TOL, IDENTITY_TOL,
};

/// Agreement required between an SDP value and its closed form.
pub const ORACLE_TOL: f64 = 1e-6;

/// Settings drawn for Haar-sampled families.
const SAMPLED_SETTINGS: usize = 3;

fn pt_min(rho: &BipartiteState) -> Result<f64> {
    rho.partial_transpose(Party::B).min_eigenvalue()
}

fn entanglement_value(rho: &BipartiteState) -> Result<Value> {
    let verdict = entanglement_verdict(rho)?;
    Ok(json!({
        "dims": [rho.dim_a(), rho.dim_b()],
        "verdict": verdict.label(),
        "partial_transpose_min_eigenvalue": pt_min(rho)?,
        "tolerance": PSD_TOL,
    }))
}

pub fn feasibility_value(f: &LhsFeasibility, family: &str) -> Value {
    json!({
        "family": family,
        "scope": FINITE_FAMILY,
        "verdict": if f.feasible { "no steering detected with this family" } else { "steerable" },
        "robustness": f.robustness,
        "tolerance": f.tolerance,
        "solver_tolerance": f.solver_tolerance,
        "model_terms": f.model.as_ref().map(|m| m.strategies.len()),
        "certificate": f.certificate.as_ref().map(functional_value),
        "certificate_value": f.certificate_value,
    })
}

fn sigma_diff(a: &Assemblage, b: &Assemblage) -> f64 {
    a.max_abs_diff(b)
}

/// Family Alice measures on a Werner state of dimension `d`. Dimensions
/// without a complete MUB set use Haar-sampled bases and need a seed.
pub fn werner_family(d: usize, seed: Option<u64>) -> Result<FamilyKind> {
    match d {
        2 | 3 => Ok(FamilyKind::Mub { d }),
        _ => match seed {
            Some(seed) => Ok(FamilyKind::SphereSample {
                settings: SAMPLED_SETTINGS,
                dim: d,
                seed,
            }),
            None => Err(Error::Domain(format!(
                "--seed is required for d = {d}: the measurement family is Haar-sampled"
            ))),
        },
    }
}

/// Werner states between the entanglement and POVM-steering thresholds,
/// with their flag extensions.
pub fn entanglement_vs_steering(d: usize, alpha: f64, seed: Option<u64>, tol: f64) -> Result<ScenarioReport> {
    let th = werner_thresholds(d)?;
    let rho = werner(d, alpha)?;
    let kind = werner_family(d, seed)?;
    let family = standard_family(&kind)?;
    let mut rep = ScenarioReport::new(
        "entvsteer",
        json!({"d": d, "alpha": alpha, "seed": seed, "family": kind.to_string()}),
        tol,
    );

    let in_window = alpha > th.entanglement && alpha <= th.povm_lhs;
    if !in_window {
        rep.warn(format!(
            "alpha = {alpha} lies outside ({}, {}], where Werner states are entangled but not POVM-steerable",
            th.entanglement, th.povm_lhs
        ));
    }
    rep.step(
        "thresholds",
        json!({
            "entanglement": th.entanglement,
            "povm_lhs": th.povm_lhs,
            "window_width": th.povm_lhs - th.entanglement,
            "alpha_in_window": in_window,
        }),
    );
    rep.check_gt("window width povm_lhs - 1/(d+1)", th.povm_lhs - th.entanglement, 0.0);

    let df = d as f64;
    let min = pt_min(&rho)?;
    rep.step("werner", entanglement_value(&rho)?);
    rep.check_le(
        "werner partial transpose minimum against (1 - alpha(d+1))/d^2",
        (min - (1.0 - alpha * (df + 1.0)) / (df * df)).abs(),
        IDENTITY_TOL,
    );
    let npt = entanglement_verdict(&rho)? == EntanglementVerdict::Npt;
    if alpha > th.entanglement {
        rep.check_lt("werner partial transpose minimum (entangled)", min, -PSD_TOL);
    } else {
        rep.check_ge("werner partial transpose minimum (PPT)", min, -PSD_TOL);
    }

    let ext = flag_extend(&rho, Party::A);
    let back = compress(&ext, Party::A, d)?;
    let ext_npt = entanglement_verdict(&ext)? == EntanglementVerdict::Npt;
    rep.step("flag_extension", entanglement_value(&ext)?);
    rep.check_le("flag extension filter-back deviation", back.max_abs_diff(&rho), IDENTITY_TOL);
    rep.check_le("flag extension PPT verdict mismatch", f64::from(u8::from(ext_npt != npt)), 0.0);

    let feas = lhs_feasibility(&assemblage(&rho, &family)?, tol)?;
    rep.step("werner_finite_family", feasibility_value(&feas, family.label()));
    let flagged = family.with_flag_outcome(1);
    let ext_feas = lhs_feasibility(&assemblage(&ext, &flagged)?, tol)?;
    rep.step("flag_extension_finite_family", feasibility_value(&ext_feas, flagged.label()));
    if alpha <= th.povm_lhs {
        // Below the POVM bound no finite family may detect steering.
        rep.check_le("werner finite-family robustness", feas.robustness, tol);
        rep.check_le("flag extension finite-family robustness", ext_feas.robustness, tol);
    }
    Ok(rep)
}

/// Steering of an erasure state (flag on Bob's side) from its qubit side:
/// Bob's qubit filter yields the singlet, whose certificate is pulled back.
fn erasure_chain(rep: &mut ScenarioReport, name: &str, rho: &BipartiteState, alpha: f64, tol: f64) -> Result<Value> {
    let f3 = KrausMap::qubit_filter(3);
    let pauli = standard_family(&FamilyKind::Pauli3)?;
    let sigma_e = assemblage(rho, &pauli)?;
    let (sigma_s, p_f) = filter_assemblage(&sigma_e, &f3)?;
    rep.check_le(&format!("{name}: qubit filter |p_F - alpha|"), (p_f - alpha).abs(), IDENTITY_TOL);
    rep.check_le(
        &format!("{name}: qubit-filtered assemblage equals singlet assemblage"),
        sigma_diff(&sigma_s, &assemblage(&singlet(), &pauli)?),
        IDENTITY_TOL,
    );

    let rob = steering_robustness(&sigma_s, tol)?;
    rep.check_gt(&format!("{name}: robustness of filtered singlet assemblage"), rob.t, tol);
    rep.check_le(
        &format!("{name}: singlet robustness against 2 - sqrt3"),
        (rob.t - (2.0 - 3f64.sqrt())).abs(),
        ORACLE_TOL,
    );
    let value_s = evaluate(&rob.certificate, &sigma_s)?;
    let pulled = transform(&rob.certificate, &f3)?;
    let value_e = evaluate(&pulled, &sigma_e)?;
    let bound = pulled.strategy_max()?;
    rep.check_le(
        &format!("{name}: pulled-back value minus p_F times filtered value"),
        (value_e - p_f * value_s).abs(),
        FUNCTIONAL_TOL,
    );
    rep.check_gt(&format!("{name}: pulled-back certificate value"), value_e, 0.0);
    rep.check_le(&format!("{name}: pulled-back certificate LHS bound"), bound, BOUND_TOL);
    Ok(json!({
        "alpha": alpha,
        "family": pauli.label(),
        "p_f": p_f,
        "singlet_robustness": robustness_value(&rob),
        "certificate_value_filtered": value_s,
        "pulled_back_certificate": functional_value(&pulled),
        "pulled_back_value": value_e,
        "pulled_back_bound": bound,
        "scope": FINITE_FAMILY,
    }))
}

/// Steering of `rho` from A to B through B's qubit filter. The filtered
/// state is an erasure state whose flag sits with the steering party, so
/// the family carries a flag outcome.
fn flagged_direction(rep: &mut ScenarioReport, dir: &str, rho: &BipartiteState, tol: f64) -> Result<(Value, bool)> {
    let f3 = KrausMap::qubit_filter(3);
    let family = standard_family(&FamilyKind::Icosahedral)?.with_flag_outcome(1);
    let filtered = apply_to_state(rho, &f3, Party::B)?;
    let sigma_e = assemblage(&filtered.state, &family)?;
    let feas = lhs_feasibility(&sigma_e, tol)?;
    let mut out = json!({
        "family": family.label(),
        "p_f": filtered.p_f,
        "erasure_finite_family": feasibility_value(&feas, family.label()),
    });
    let Some(gamma) = feas.certificate.as_ref() else {
        return Ok((out, false));
    };
    let value_e = evaluate(gamma, &sigma_e)?;
    let pulled = transform(gamma, &f3)?;
    let value = evaluate(&pulled, &assemblage(rho, &family)?)?;
    let bound = pulled.strategy_max()?;
    rep.check_le(
        &format!("{dir}: pulled-back value minus p_F times erasure value"),
        (value - filtered.p_f * value_e).abs(),
        FUNCTIONAL_TOL,
    );
    rep.check_gt(&format!("{dir}: pulled-back certificate value on rho_G"), value, 0.0);
    rep.check_le(&format!("{dir}: pulled-back certificate LHS bound"), bound, BOUND_TOL);
    out["pulled_back_certificate"] = functional_value(&pulled);
    out["pulled_back_value"] = json!(value);
    out["pulled_back_bound"] = json!(bound);
    Ok((out, true))
}

/// `rho_G(q)`: steerable in both directions, yet local for the tested Bell
/// settings.
pub fn steering_vs_nonlocality(q: f64, tol: f64) -> Result<ScenarioReport> {
    let rho = rho_g(q)?;
    let f3 = KrausMap::qubit_filter(3);
    let mut rep = ScenarioReport::new("steervsnl", json!({"q": q}), tol);
    rep.step("rho_g", json!({"state": state_value(&rho)}));

    let fa = apply_to_state(&rho, &f3, Party::A)?;
    let fb = apply_to_state(&rho, &f3, Party::B)?;
    rep.check_le(
        "Alice qubit filter gives erasure(q/3, B)",
        fa.state.max_abs_diff(&erasure(q / 3.0, Party::B)?),
        IDENTITY_TOL,
    );
    rep.check_le("Alice filter |p_F - 1/3|", (fa.p_f - 1.0 / 3.0).abs(), IDENTITY_TOL);
    rep.check_le(
        "Bob qubit filter gives erasure(1/3, A)",
        fb.state.max_abs_diff(&erasure(1.0 / 3.0, Party::A)?),
        IDENTITY_TOL,
    );
    rep.check_le("Bob filter |p_F - q/3|", (fb.p_f - q / 3.0).abs(), IDENTITY_TOL);
    rep.step(
        "filters",
        json!({
            "alice": {"p_f": fa.p_f, "erasure_alpha": q / 3.0, "state": state_value(&fa.state)},
            "bob": {"p_f": fb.p_f, "erasure_alpha": 1.0 / 3.0, "state": state_value(&fb.state)},
        }),
    );

    let e_a = erasure_chain(&mut rep, "erasure(q/3) from its qubit side", &fa.state, q / 3.0, tol)?;
    rep.step("erasure_alice_filtered", e_a);
    let e_b = erasure_chain(&mut rep, "erasure(1/3) from its qubit side", &fb.state.swap_parties(), 1.0 / 3.0, tol)?;
    rep.step("erasure_bob_filtered", e_b);

    let (ab, ab_found) = flagged_direction(&mut rep, "alice_to_bob", &rho, tol)?;
    rep.check_gt(
        "alice_to_bob: erasure(1/3) finite-family robustness",
        ab["erasure_finite_family"]["robustness"].as_f64().unwrap_or(0.0),
        tol,
    );
    rep.step("alice_to_bob", ab);
    let (mut ba, ba_found) = flagged_direction(&mut rep, "bob_to_alice", &rho.swap_parties(), tol)?;
    ba["gating"] = json!(false);
    rep.step("bob_to_alice", ba);
    if !ba_found {
        rep.warn(format!(
            "bob_to_alice: the six-axis flagged family detects erasure steering from the flagged side only for alpha > 1/6; here alpha = q/3 = {}",
            q / 3.0
        ));
    }
    rep.step(
        "corollary_chain",
        json!({
            "alice_to_bob_certified": ab_found,
            "bob_to_alice_certified": ba_found,
            "argument": [
                "a filter on the steered party cannot create steering",
                "Bob's qubit filter maps rho_G to erasure(1/3) with the flag on Alice's side",
                "a certificate for that erasure state pulls back through Bob's filter to one for rho_G",
                "Alice's qubit filter maps rho_G to erasure(q/3) with the flag on Bob's side, giving the reverse direction",
            ],
        }),
    );

    let flagged = standard_family(&FamilyKind::Pauli3)?.with_flag_outcome(1);
    let p = behavior(&rho, &flagged, &flagged)?;
    let bell = bell_local_lp(&p, tol)?;
    rep.step(
        "bell_finite_family",
        json!({
            "family": flagged.label(),
            "scope": FINITE_FAMILY,
            "verdict": if bell.local { "local for these settings" } else { "nonlocal" },
            "robustness": bell.robustness,
            "tolerance": bell.tolerance,
            "functional_value": bell.functional_value,
        }),
    );
    rep.check_le("rho_G finite-family Bell robustness", bell.robustness, tol);
    Ok(rep)
}

fn exploratory_families(seed: u64) -> Vec<FamilyKind> {
    let mut kinds = vec![FamilyKind::Pauli3];
    for (i, settings) in [4usize, 6, 8].into_iter().enumerate() {
        kinds.push(FamilyKind::SphereSample {
            settings,
            dim: 2,
            seed: seed.wrapping_add(i as u64),
        });
    }
    kinds
}

/// `rho_1W` and its flag extension `rho_1W'`.
pub fn one_way(seed: u64, tol: f64) -> Result<ScenarioReport> {
    let rho = rho_1w();
    let ext = rho_1w_prime();
    let mut rep = ScenarioReport::new("oneway", json!({"seed": seed}), tol);
    rep.step("rho_1w", json!({"state": state_value(&rho), "entanglement": entanglement_value(&rho)?}));
    rep.step("rho_1w_prime", json!({"state": state_value(&ext), "entanglement": entanglement_value(&ext)?}));

    let back = compress(&ext, Party::A, 2)?;
    rep.check_le("filter-back of rho_1W' equals rho_1W", back.max_abs_diff(&rho), IDENTITY_TOL);
    let filtered = apply_to_state(&ext, &KrausMap::qubit_filter(3), Party::A)?;
    rep.check_le("qubit filter on rho_1W' |p_F - 1/3|", (filtered.p_f - 1.0 / 3.0).abs(), IDENTITY_TOL);
    rep.check_lt("rho_1W' partial transpose minimum (entangled)", pt_min(&ext)?, -PSD_TOL);

    let pauli = standard_family(&FamilyKind::Pauli3)?;
    let flagged = pauli.with_flag_outcome(1);
    let a_to_b = lhs_feasibility(&assemblage(&ext, &flagged)?, tol)?;
    rep.step("alice_to_bob_finite_family", feasibility_value(&a_to_b, flagged.label()));
    rep.check_le("rho_1W' Alice-to-Bob finite-family robustness", a_to_b.robustness, tol);

    // Bob measures his qubit; Alice holds the qutrit.
    let swapped = ext.swap_parties();
    let mut results = Vec::new();
    let mut detected = false;
    for kind in exploratory_families(seed) {
        let family = standard_family(&kind)?;
        let f = lhs_feasibility(&assemblage(&swapped, &family)?, tol)?;
        detected |= !f.feasible;
        results.push(feasibility_value(&f, &kind.to_string()));
    }
    rep.step(
        "exploratory_bob_to_alice",
        json!({"gating": false, "seed": seed, "detected": detected, "families": results}),
    );
    if !detected {
        rep.warn("Bob-to-Alice steering of rho_1W' was not detected by the sampled families (exploratory)".into());
    }
    Ok(rep)
}

/// `rho_HS(d)`: qubit filters on both sides produce a steerable Werner
/// state, and one filter already yields a steerable state.
pub fn hidden_steering(d: usize, tol: f64) -> Result<ScenarioReport> {
    if d < 3 {
        return Err(Error::Domain(format!("hidden steering needs d >= 3, got {d}")));
    }
    let rho = rho_hs(d)?;
    let f = KrausMap::qubit_filter(d + 1);
    let mut rep = ScenarioReport::new("hidden", json!({"d": d}), tol);

    let fa = apply_to_state(&rho, &f, Party::A)?;
    let fab = apply_to_state(&fa.state, &f, Party::B)?;
    let target = hidden_steering_target(d)?;
    let df = d as f64;
    let visibility = df / (df + 2.0);
    rep.check_le("double-filtered rho_HS equals target", fab.state.max_abs_diff(&target), IDENTITY_TOL);
    rep.check_le(
        "double-filtered rho_HS equals werner(2, d/(d+2))",
        fab.state.max_abs_diff(&werner(2, visibility)?),
        IDENTITY_TOL,
    );
    rep.step(
        "double_filter",
        json!({
            "p_f_alice": fa.p_f,
            "p_f_bob": fab.p_f,
            "p_f": fa.p_f * fab.p_f,
            "state": state_value(&fab.state),
        }),
    );
    rep.step(
        "visibility",
        json!({
            "value": visibility,
            "formula_1_over_1_plus_2_over_d": 1.0 / (1.0 + 2.0 / df),
            "three_setting_threshold": 1.0 / 3f64.sqrt(),
        }),
    );

    let mub = standard_family(&FamilyKind::Mub { d: 2 })?;
    let rob_ab = steering_robustness(&assemblage(&target, &mub)?, tol)?;
    let rob_ba = steering_robustness(&assemblage(&target.swap_parties(), &mub)?, tol)?;
    rep.check_le("target is symmetric under exchange", target.swap_parties().max_abs_diff(&target), IDENTITY_TOL);
    rep.check_gt("target robustness alice_to_bob", rob_ab.t, tol);
    rep.check_gt("target robustness bob_to_alice", rob_ba.t, tol);
    rep.check_le("target robustness direction mismatch", (rob_ab.t - rob_ba.t).abs(), tol);
    rep.step("target_alice_to_bob", robustness_value(&rob_ab));
    rep.step("target_bob_to_alice", robustness_value(&rob_ba));

    // One-sided filter: Bob steers Alice's qudit, and Alice's filter maps
    // the assemblage onto the target's.
    let one_sided = hidden_to_oneway(&rho, &f)?;
    let swapped = one_sided.swap_parties();
    let sigma = assemblage(&swapped, &mub)?;
    let (sigma_t, p_f) = filter_assemblage(&sigma, &f)?;
    rep.check_le(
        "filtered one-sided assemblage equals target assemblage",
        sigma_diff(&sigma_t, &assemblage(&target.swap_parties(), &mub)?),
        IDENTITY_TOL,
    );
    let value_t = evaluate(&rob_ba.certificate, &sigma_t)?;
    let pulled = transform(&rob_ba.certificate, &f)?;
    let value = evaluate(&pulled, &sigma)?;
    let bound = pulled.strategy_max()?;
    rep.check_le(
        "pulled-back value minus p_F times target value",
        (value - p_f * value_t).abs(),
        FUNCTIONAL_TOL,
    );
    rep.check_gt("pulled-back certificate value on one-sided state", value, 0.0);
    rep.check_le("pulled-back certificate LHS bound", bound, BOUND_TOL);
    rep.step(
        "one_sided_filter",
        json!({
            "state": state_value(&one_sided),
            "p_f": p_f,
            "pulled_back_certificate": functional_value(&pulled),
            "pulled_back_value": value,
            "pulled_back_bound": bound,
            "scope": FINITE_FAMILY,
        }),
    );
    Ok(rep)
}

/// Looks up a family by name; sampled families need `seed`.
pub fn family_from_name(name: &str, seed: Option<u64>) -> Result<MeasurementFamily> {
    let kind = match name {
        "pauli3" => FamilyKind::Pauli3,
        "mub2" => FamilyKind::Mub { d: 2 },
        "mub3" => FamilyKind::Mub { d: 3 },
        "trine" => FamilyKind::TrinePovm,
        "icosa6" => FamilyKind::Icosahedral,
        other => {
            let rest = other.strip_prefix("sphere").ok_or_else(|| {
                Error::Parse(format!(
                    "unknown family '{other}': expected pauli3, mub2, mub3, trine, icosa6 or sphere<dim>:<settings>"
                ))
            })?;
            let (dim, settings) = rest
                .split_once(':')
                .and_then(|(d, s)| Some((d.parse().ok()?, s.parse().ok()?)))
                .ok_or_else(|| Error::Parse(format!("family '{other}': expected sphere<dim>:<settings>")))?;
            let seed = seed.ok_or_else(|| Error::Parse(format!("family '{other}' is sampled and needs --seed")))?;
            FamilyKind::SphereSample { settings, dim, seed }
        }
    };
    standard_family(&kind)
}

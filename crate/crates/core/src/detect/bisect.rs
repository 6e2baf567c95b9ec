//! Locating feasible/infeasible transitions along one-parameter families.

use serde::Serialize;

use super::steering::lhs_feasibility;
use super::DEFAULT_TOL;
use crate::error::{Error, Result};
use crate::meas::{assemblage, MeasurementFamily};
use crate::qmat::BipartiteState;

pub const MAX_BISECTION_ITER: usize = 40;
/// Interior points checked for monotonicity before bisecting.
const PROBE_POINTS: usize = 9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BisectionResult {
    /// Midpoint of the final bracket.
    pub alpha: f64,
    /// Largest parameter found on the holding side.
    pub low: f64,
    /// Smallest parameter found on the failing side.
    pub high: f64,
    pub iterations: usize,
    /// `(parameter, predicate)` on the probe grid, endpoints included.
    pub probes: Vec<(f64, bool)>,
}

/// Bisects a predicate that holds at `interval.0`, fails at `interval.1`
/// and switches once in between. The switch is checked on a probe grid
/// first; more than one flip is an error.
pub fn bisect_transition(
    mut holds: impl FnMut(f64) -> Result<bool>,
    interval: (f64, f64),
    tol: f64,
) -> Result<BisectionResult> {
    let (lo, hi) = interval;
    if lo.is_nan() || hi.is_nan() || lo >= hi || tol.is_nan() || tol <= 0.0 {
        return Err(Error::Bisection(format!("invalid interval [{lo}, {hi}] or tolerance {tol}")));
    }
    let mut probes = Vec::with_capacity(PROBE_POINTS + 2);
    for i in 0..=PROBE_POINTS + 1 {
        let t = lo + (hi - lo) * i as f64 / (PROBE_POINTS + 1) as f64;
        probes.push((t, holds(t)?));
    }
    if !probes[0].1 || probes[probes.len() - 1].1 {
        return Err(Error::Bisection(format!(
            "interval does not bracket a transition: holds({lo}) = {}, holds({hi}) = {}",
            probes[0].1,
            probes[probes.len() - 1].1
        )));
    }
    let flips = probes.windows(2).filter(|w| w[0].1 != w[1].1).count();
    if flips > 1 {
        return Err(Error::Bisection(format!("predicate switches {flips} times on the probe grid")));
    }
    let switch = probes.windows(2).position(|w| w[0].1 && !w[1].1).expect("one flip");
    let (mut low, mut high) = (probes[switch].0, probes[switch + 1].0);
    let mut iterations = 0;
    while high - low > tol && iterations < MAX_BISECTION_ITER {
        let mid = 0.5 * (low + high);
        if holds(mid)? {
            low = mid;
        } else {
            high = mid;
        }
        iterations += 1;
    }
    Ok(BisectionResult {
        alpha: 0.5 * (low + high),
        low,
        high,
        iterations,
        probes,
    })
}

/// Steering threshold of `state_family(alpha)` with Alice measuring
/// `family`: LHS-feasible below, infeasible above.
pub fn steering_threshold_bisect(
    state_family: impl Fn(f64) -> Result<BipartiteState>,
    family: &MeasurementFamily,
    interval: (f64, f64),
    tol: f64,
) -> Result<BisectionResult> {
    bisect_transition(
        |alpha| {
            let sigma = assemblage(&state_family(alpha)?, family)?;
            Ok(lhs_feasibility(&sigma, DEFAULT_TOL)?.feasible)
        },
        interval,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_step_location() {
        let r = bisect_transition(|t| Ok(t <= 0.3), (0.0, 1.0), 1e-8).unwrap();
        assert!((r.alpha - 0.3).abs() < 1e-8);
        assert!(r.iterations <= MAX_BISECTION_ITER);
    }

    #[test]
    fn rejects_non_bracketing_interval() {
        assert!(matches!(bisect_transition(|_| Ok(true), (0.0, 1.0), 1e-6), Err(Error::Bisection(_))));
    }

    #[test]
    fn rejects_non_monotone_predicate() {
        let r = bisect_transition(|t| Ok(t < 0.25 || (t > 0.5 && t < 0.75)), (0.0, 1.0), 1e-6);
        assert!(matches!(r, Err(Error::Bisection(_))));
    }
}

//! Finite-measurement LHS and LHV membership.
//!
//! With finitely many settings the response functions of a hidden variable
//! model reduce to convex mixtures of deterministic strategies, so both
//! questions become conic feasibility problems over an enumerated set.
//! A "feasible" or "local" answer only concerns the measurements supplied.

pub mod bell;
pub mod bisect;
pub mod conic;
pub mod steering;

use serde::Serialize;

use crate::error::{Error, Result};

pub use bell::{bell_local_lp, BellFunctional, BellLocality, STRATEGY_PAIR_CAP};
pub use bisect::{bisect_transition, steering_threshold_bisect, BisectionResult, MAX_BISECTION_ITER};
pub use conic::{solve, Certificate, Cone, ConicProblem, SolveResult, SolveStatus, DEFAULT_TOL};
pub use steering::{lhs_feasibility, steering_robustness, LhsDecomposition, LhsFeasibility, Robustness, STRATEGY_CAP};

/// A response function assigning one outcome to every setting.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct DeterministicStrategy {
    outcomes: Vec<usize>,
}

impl DeterministicStrategy {
    pub fn new(outcomes: Vec<usize>) -> Self {
        DeterministicStrategy { outcomes }
    }

    pub fn outcome(&self, x: usize) -> usize {
        self.outcomes[x]
    }

    pub fn outcomes(&self) -> &[usize] {
        &self.outcomes
    }

    pub fn n_settings(&self) -> usize {
        self.outcomes.len()
    }

    /// `D(a|x)`, 1 if the strategy answers `a` to `x`.
    pub fn response(&self, a: usize, x: usize) -> f64 {
        if self.outcomes[x] == a {
            1.0
        } else {
            0.0
        }
    }
}

/// `n_outcomes ^ n_settings`, saturating.
pub fn strategy_count(n_settings: usize, n_outcomes: usize) -> u128 {
    let mut count: u128 = 1;
    for _ in 0..n_settings {
        count = count.saturating_mul(n_outcomes as u128);
    }
    count
}

/// All deterministic strategies in lexicographic order (setting 0 most
/// significant).
pub fn enumerate_strategies(n_settings: usize, n_outcomes: usize, cap: u128) -> Result<Vec<DeterministicStrategy>> {
    let count = strategy_count(n_settings, n_outcomes);
    if count > cap {
        return Err(Error::EnumerationCap { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut current = vec![0usize; n_settings];
    for _ in 0..count {
        out.push(DeterministicStrategy::new(current.clone()));
        for x in (0..n_settings).rev() {
            current[x] += 1;
            if current[x] < n_outcomes {
                break;
            }
            current[x] = 0;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_every_function_once() {
        let all = enumerate_strategies(3, 2, STRATEGY_CAP).unwrap();
        assert_eq!(all.len(), 8);
        assert_eq!(all[0].outcomes(), &[0, 0, 0]);
        assert_eq!(all[1].outcomes(), &[0, 0, 1]);
        assert_eq!(all[7].outcomes(), &[1, 1, 1]);
        let set: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(set.len(), 8);
        for s in &all {
            for x in 0..3 {
                assert_eq!(s.response(0, x) + s.response(1, x), 1.0);
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert_eq!(strategy_count(13, 2), 8192);
        assert!(matches!(
            enumerate_strategies(13, 2, STRATEGY_CAP),
            Err(Error::EnumerationCap { count: 8192, cap: 4096 })
        ));
        assert_eq!(enumerate_strategies(12, 2, STRATEGY_CAP).unwrap().len(), 4096);
    }
}

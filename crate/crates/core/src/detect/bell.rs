//! Bell locality of a behavior as a linear program over pairs of
//! deterministic strategies.
//!
//! The program finds the least white noise `r` such that `p + r u` (with `u`
//! uniform) is a nonnegative combination of local deterministic points.
//! Constraints are written in Collins-Gisin coordinates, which parametrize
//! no-signaling behaviors without redundancy.

use serde::Serialize;

use nalgebra::{DMatrix, DVector};

use super::conic::{solve, Cone, ConicProblem, SolveStatus, MIN_TOL};
use super::{enumerate_strategies, strategy_count, DeterministicStrategy};
use crate::error::{Error, Result};
use crate::meas::{Behavior, BehaviorShape};

/// Largest number of strategy pairs the LP enumerates.
pub const STRATEGY_PAIR_CAP: u128 = 1 << 20;

/// Linear functional on behaviors, `sum B(ab|xy) p(ab|xy) <= local_bound`
/// on every local behavior.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BellFunctional {
    pub shape: BehaviorShape,
    /// Same flat layout as [`Behavior::flat`].
    pub coefficients: Vec<f64>,
    pub local_bound: f64,
}

impl BellFunctional {
    pub fn evaluate(&self, p: &Behavior) -> Result<f64> {
        if p.shape() != self.shape {
            return Err(Error::Dimension("behavior shape does not match functional".into()));
        }
        Ok(p.dot(&self.coefficients))
    }

    /// Maximum over deterministic local points, by enumeration.
    pub fn local_maximum(&self) -> Result<f64> {
        local_maximum(&self.shape, &self.coefficients)
    }
}

fn local_maximum(shape: &BehaviorShape, coeffs: &[f64]) -> Result<f64> {
    check_cap(shape)?;
    let sa = enumerate_strategies(shape.n_x, shape.n_a, u128::MAX)?;
    let sb = enumerate_strategies(shape.n_y, shape.n_b, u128::MAX)?;
    let mut best = f64::NEG_INFINITY;
    for fa in &sa {
        for fb in &sb {
            let mut v = 0.0;
            for x in 0..shape.n_x {
                for y in 0..shape.n_y {
                    v += coeffs[flat_index(shape, fa.outcome(x), fb.outcome(y), x, y)];
                }
            }
            best = best.max(v);
        }
    }
    Ok(best)
}

fn flat_index(s: &BehaviorShape, a: usize, b: usize, x: usize, y: usize) -> usize {
    ((x * s.n_y + y) * s.n_a + a) * s.n_b + b
}

fn check_cap(shape: &BehaviorShape) -> Result<u128> {
    let count = strategy_count(shape.n_x, shape.n_a).saturating_mul(strategy_count(shape.n_y, shape.n_b));
    if count > STRATEGY_PAIR_CAP {
        return Err(Error::EnumerationCap {
            count,
            cap: STRATEGY_PAIR_CAP,
        });
    }
    Ok(count)
}

/// Weight of one local deterministic point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalWeight {
    pub alice: DeterministicStrategy,
    pub bob: DeterministicStrategy,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BellLocality {
    pub local: bool,
    /// Least white-noise weight `r` making `p + r u` local (unnormalized).
    pub robustness: f64,
    pub tolerance: f64,
    /// Present when local: nonzero weights of the decomposition.
    pub weights: Option<Vec<LocalWeight>>,
    /// Present when nonlocal: functional centred on white noise and scaled
    /// to local bound 2.
    pub functional: Option<BellFunctional>,
    pub functional_value: Option<f64>,
}

/// Collins-Gisin coordinate functionals as coefficient vectors on the full
/// table.
fn cg_rows(s: &BehaviorShape) -> Vec<Vec<f64>> {
    let len = s.len();
    let mut rows = Vec::new();
    let mut norm = vec![0.0; len];
    for a in 0..s.n_a {
        for b in 0..s.n_b {
            norm[flat_index(s, a, b, 0, 0)] = 1.0;
        }
    }
    rows.push(norm);
    for x in 0..s.n_x {
        for a in 0..s.n_a - 1 {
            let mut r = vec![0.0; len];
            for b in 0..s.n_b {
                r[flat_index(s, a, b, x, 0)] = 1.0;
            }
            rows.push(r);
        }
    }
    for y in 0..s.n_y {
        for b in 0..s.n_b - 1 {
            let mut r = vec![0.0; len];
            for a in 0..s.n_a {
                r[flat_index(s, a, b, 0, y)] = 1.0;
            }
            rows.push(r);
        }
    }
    for x in 0..s.n_x {
        for y in 0..s.n_y {
            for a in 0..s.n_a - 1 {
                for b in 0..s.n_b - 1 {
                    let mut r = vec![0.0; len];
                    r[flat_index(s, a, b, x, y)] = 1.0;
                    rows.push(r);
                }
            }
        }
    }
    rows
}

/// Decides whether `p` lies in the local polytope, up to `tol` in white-noise
/// robustness.
pub fn bell_local_lp(p: &Behavior, tol: f64) -> Result<BellLocality> {
    if tol.is_nan() || tol < MIN_TOL {
        return Err(Error::Domain(format!("tolerance {tol} is below {MIN_TOL:e}")));
    }
    let shape = p.shape();
    check_cap(&shape)?;
    let sa = enumerate_strategies(shape.n_x, shape.n_a, u128::MAX)?;
    let sb = enumerate_strategies(shape.n_y, shape.n_b, u128::MAX)?;
    let rows = cg_rows(&shape);
    let uniform = Behavior::uniform(shape);
    let n_pairs = sa.len() * sb.len();
    let n = n_pairs + 1;
    let m = rows.len();

    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    for (i, g) in rows.iter().enumerate() {
        b[i] = p.dot(g);
        a[(i, n_pairs)] = -uniform.dot(g);
    }
    for (ia, fa) in sa.iter().enumerate() {
        for (ib, fb) in sb.iter().enumerate() {
            let col = ia * sb.len() + ib;
            for (i, g) in rows.iter().enumerate() {
                let mut v = 0.0;
                for x in 0..shape.n_x {
                    for y in 0..shape.n_y {
                        v += g[flat_index(&shape, fa.outcome(x), fb.outcome(y), x, y)];
                    }
                }
                a[(i, col)] = v;
            }
        }
    }
    let mut cvec = DVector::zeros(n);
    cvec[n_pairs] = 1.0;
    let problem = ConicProblem::new(cvec, a, b, vec![Cone::NonNeg(n)])?;
    let solver_tol = (tol * 1e-2).max(MIN_TOL);
    let res = solve(&problem, solver_tol)?;
    if res.status != SolveStatus::Optimal {
        return Err(Error::Numeric(format!(
            "locality LP ended with status {:?} after {} iterations",
            res.status, res.iterations
        )));
    }
    let r = res.x[n_pairs].max(0.0);
    if r <= tol {
        let weights = sa
            .iter()
            .flat_map(|fa| sb.iter().map(move |fb| (fa, fb)))
            .zip(&res.x[..n_pairs])
            .filter(|(_, &w)| w > 1e-12)
            .map(|((fa, fb), &w)| LocalWeight {
                alice: fa.clone(),
                bob: fb.clone(),
                weight: w,
            })
            .collect();
        return Ok(BellLocality {
            local: true,
            robustness: r,
            tolerance: tol,
            weights: Some(weights),
            functional: None,
            functional_value: None,
        });
    }

    let mut coeffs = vec![0.0; shape.len()];
    for (g, yi) in rows.iter().zip(&res.y) {
        for (cf, gv) in coeffs.iter_mut().zip(g) {
            *cf += yi * gv;
        }
    }
    // Shift by a constant so white noise scores zero, then scale the local
    // bound to 2.
    let shift = uniform.dot(&coeffs) / (shape.n_x * shape.n_y) as f64;
    coeffs.iter_mut().for_each(|v| *v -= shift);
    let bound = local_maximum(&shape, &coeffs)?;
    if bound.is_nan() || bound <= 1e-12 {
        return Err(Error::Numeric(format!("dual functional has degenerate local bound {bound:e}")));
    }
    coeffs.iter_mut().for_each(|v| *v *= 2.0 / bound);
    let functional = BellFunctional {
        shape,
        coefficients: coeffs,
        local_bound: 2.0,
    };
    let value = functional.evaluate(p)?;
    Ok(BellLocality {
        local: false,
        robustness: r,
        tolerance: tol,
        weights: None,
        functional: Some(functional),
        functional_value: Some(value),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::DEFAULT_TOL;
    use crate::meas::{behavior, chsh_families, correlator};
    use crate::random::{random_density, rng_from_seed};
    use crate::states::{singlet, werner};

    #[test]
    fn singlet_violates_chsh_maximally() {
        let (fa, fb) = chsh_families().unwrap();
        let p = behavior(&singlet(), &fa, &fb).unwrap();
        let res = bell_local_lp(&p, DEFAULT_TOL).unwrap();
        assert!(!res.local);
        let f = res.functional.unwrap();
        assert!((f.local_maximum().unwrap() - 2.0).abs() < 1e-9);
        let v = res.functional_value.unwrap();
        assert!((v - 2.0 * 2f64.sqrt()).abs() < 1e-6, "value {v}");
        // Oracle: the CHSH combination of correlators.
        let chsh = correlator(&p, 0, 0) + correlator(&p, 0, 1) + correlator(&p, 1, 0) - correlator(&p, 1, 1);
        assert!((chsh.abs() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn werner_half_is_local() {
        let (fa, fb) = chsh_families().unwrap();
        let p = behavior(&werner(2, 0.5).unwrap(), &fa, &fb).unwrap();
        let res = bell_local_lp(&p, DEFAULT_TOL).unwrap();
        assert!(res.local, "r = {}", res.robustness);
        let weights = res.weights.unwrap();
        let total: f64 = weights.iter().map(|w| w.weight).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn product_behavior_is_local() {
        let mut rng = rng_from_seed(401);
        let (fa, fb) = chsh_families().unwrap();
        let rho = crate::qmat::BipartiteState::new(
            crate::qmat::tensor(&random_density(2, &mut rng), &random_density(2, &mut rng)),
            2,
            2,
        )
        .unwrap();
        let res = bell_local_lp(&behavior(&rho, &fa, &fb).unwrap(), DEFAULT_TOL).unwrap();
        assert!(res.local);
    }

    #[test]
    fn cg_row_count() {
        let s = BehaviorShape {
            n_x: 2,
            n_y: 3,
            n_a: 3,
            n_b: 2,
        };
        assert_eq!(cg_rows(&s).len(), 1 + 2 * 2 + 3 + 6 * 2);
    }
}

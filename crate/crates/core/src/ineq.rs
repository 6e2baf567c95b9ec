//! Steering functionals with LHS bound normalized to zero, and their pullback
//! through local filters.
//!
//! A functional `Gamma_{a|x}` is valid when every deterministic strategy `f`
//! gives `sum_x Gamma_{f(x)|x} <= 0`. Then `sum tr Gamma_{a|x} sigma_{a|x}`
//! is at most zero on every LHS assemblage, and a positive value witnesses
//! steering.

use crate::detect::{enumerate_strategies, STRATEGY_CAP};
use crate::error::{Error, Result};
use crate::maps::{dual_map, KrausMap};
use crate::meas::Assemblage;
use crate::qmat::HermitianOperator;

/// Tolerance on the strategy-max invariant.
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct SteeringFunctional {
    ops: Vec<Vec<HermitianOperator>>,
}

fn check_shape(ops: &[Vec<HermitianOperator>]) -> Result<(usize, usize, usize)> {
    let nx = ops.len();
    let na = ops.first().map_or(0, Vec::len);
    if nx == 0 || na == 0 {
        return Err(Error::InvalidFunctional("empty operator grid".into()));
    }
    let d = ops[0][0].dim();
    for (x, row) in ops.iter().enumerate() {
        if row.len() != na {
            return Err(Error::InvalidFunctional(format!(
                "setting {x} has {} operators, expected {na}",
                row.len()
            )));
        }
        if let Some(a) = row.iter().position(|g| g.dim() != d) {
            return Err(Error::InvalidFunctional(format!("operator ({x}, {a}) has the wrong dimension")));
        }
    }
    Ok((nx, na, d))
}

/// `max_f lambda_max(sum_x Gamma_{f(x)|x})` over all deterministic
/// strategies.
pub fn strategy_max(ops: &[Vec<HermitianOperator>]) -> Result<f64> {
    let (nx, na, d) = check_shape(ops)?;
    let mut best = f64::NEG_INFINITY;
    for f in enumerate_strategies(nx, na, STRATEGY_CAP)? {
        let mut sum = HermitianOperator::zeros(d);
        for x in 0..nx {
            sum = &sum + &ops[x][f.outcome(x)];
        }
        best = best.max(sum.max_eigenvalue()?);
    }
    Ok(best)
}

impl SteeringFunctional {
    /// Validates the grid shape and the strategy-max invariant.
    pub fn new(ops: Vec<Vec<HermitianOperator>>) -> Result<Self> {
        let worst = strategy_max(&ops)?;
        if worst > BOUND_TOL {
            return Err(Error::InvalidFunctional(format!(
                "a deterministic strategy reaches {worst:.3e} above the zero bound"
            )));
        }
        Ok(SteeringFunctional { ops })
    }

    pub fn zeros(n_settings: usize, n_outcomes: usize, dim: usize) -> Self {
        SteeringFunctional {
            ops: vec![vec![HermitianOperator::zeros(dim); n_outcomes]; n_settings],
        }
    }

    pub fn operator(&self, x: usize, a: usize) -> &HermitianOperator {
        &self.ops[x][a]
    }

    pub fn operators(&self) -> &[Vec<HermitianOperator>] {
        &self.ops
    }

    pub fn n_settings(&self) -> usize {
        self.ops.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.ops[0].len()
    }

    pub fn dim(&self) -> usize {
        self.ops[0][0].dim()
    }

    /// `(n_settings, n_outcomes, dim)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_settings(), self.n_outcomes(), self.dim())
    }

    /// Largest value any deterministic strategy reaches; at most `1e-9`.
    pub fn strategy_max(&self) -> Result<f64> {
        strategy_max(&self.ops)
    }
}

/// `sum_{a,x} tr(Gamma_{a|x} sigma_{a|x})`.
pub fn evaluate(gamma: &SteeringFunctional, sigma: &Assemblage) -> Result<f64> {
    if gamma.shape() != sigma.shape() {
        return Err(Error::Dimension(format!(
            "functional shape {:?} does not match assemblage shape {:?}",
            gamma.shape(),
            sigma.shape()
        )));
    }
    let mut total = 0.0;
    for (x, row) in gamma.ops.iter().enumerate() {
        for (a, g) in row.iter().enumerate() {
            total += g.trace_product(sigma.member(x, a));
        }
    }
    Ok(total)
}

/// Turns `sum tr Gamma sigma <= raw_bound` into a zero-bound functional.
///
/// The offset is `max(raw_bound, strategy max)`, so the result is valid even
/// when the declared bound was too optimistic. It is split as
/// `offset / n_settings` times identity on every operator, which lowers every
/// strategy by exactly `offset` and every trace-one assemblage value by the
/// same amount.
pub fn normalize_bound(raw: Vec<Vec<HermitianOperator>>, raw_bound: f64) -> Result<SteeringFunctional> {
    let (nx, _, d) = check_shape(&raw)?;
    let offset = raw_bound.max(strategy_max(&raw)?);
    if offset == 0.0 {
        return Ok(SteeringFunctional { ops: raw });
    }
    let shift = HermitianOperator::identity(d).scale(offset / nx as f64);
    let ops = raw.iter().map(|row| row.iter().map(|g| g - &shift).collect()).collect();
    Ok(SteeringFunctional { ops })
}

/// Pulls a functional on the filter's output back to its input:
/// `Gamma_{a|x} -> Lambda^dag(Gamma_{a|x})`.
pub fn transform(gamma: &SteeringFunctional, map: &KrausMap) -> Result<SteeringFunctional> {
    if map.dim_out() != gamma.dim() {
        return Err(Error::Dimension(format!(
            "filter outputs dimension {}, functional acts on {}",
            map.dim_out(),
            gamma.dim()
        )));
    }
    let dual = dual_map(map);
    let ops = gamma
        .ops
        .iter()
        .map(|row| row.iter().map(|g| dual.apply(g)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    SteeringFunctional::new(ops)
}

//! LHS membership of assemblages through the steering robustness SDP.
//!
//! ```text
//! minimize    sum_l tr sigma_l
//! subject to  sum_{l : f_l(x) = a} sigma_l - tau_{a|x} = sigma_{a|x}
//!             sigma_l, tau_{a|x} psd
//! ```
//!
//! Every feasible point has objective `1 + sum_a tr tau_{a|x}`, so the
//! optimum is `1 + t` with `t = 0` exactly on LHS assemblages. The dual
//! variables `F_{a|x}` satisfy `F >= 0` and `sum_x F_{f(x)|x} <= I`, and
//! `Gamma_{a|x} = F_{a|x} - I / n_settings` is a zero-bound steering
//! functional whose value on `sigma` is `t`.
//!
//! Hermitian unknowns are realified: `Z = A + iB` becomes the real symmetric
//! `[[A, -B], [B, A]]`, with `tr(H Z) = tr(H_r Z_r) / 2`.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::conic::{smat, solve, svec, Cone, ConicProblem, SolveResult, SolveStatus, MIN_TOL};
use super::{enumerate_strategies, DeterministicStrategy};
use crate::error::{Error, Result};
use crate::ineq::{normalize_bound, SteeringFunctional};
use crate::meas::Assemblage;
use crate::qmat::{c, cr, CMat, HermitianOperator};

/// Largest number of deterministic strategies enumerated for one assemblage.
pub const STRATEGY_CAP: u128 = 4096;

/// Orthonormal basis of the real space of `d x d` Hermitian matrices.
pub(crate) fn hermitian_basis(d: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        let mut m = CMat::zeros(d, d);
        m[(i, i)] = cr(1.0);
        out.push(m);
    }
    for i in 0..d {
        for j in i + 1..d {
            let mut re = CMat::zeros(d, d);
            re[(i, j)] = cr(FRAC_1_SQRT_2);
            re[(j, i)] = cr(FRAC_1_SQRT_2);
            out.push(re);
            let mut im = CMat::zeros(d, d);
            im[(i, j)] = c(0.0, FRAC_1_SQRT_2);
            im[(j, i)] = c(0.0, -FRAC_1_SQRT_2);
            out.push(im);
        }
    }
    out
}

pub(crate) fn realify(h: &CMat) -> DMatrix<f64> {
    let d = h.nrows();
    let mut r = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let z = h[(i, j)];
            r[(i, j)] = z.re;
            r[(i + d, j + d)] = z.re;
            r[(i, j + d)] = -z.im;
            r[(i + d, j)] = z.im;
        }
    }
    r
}

/// Complex operator represented by a realified PSD block. Unstructured
/// blocks are projected onto the realified subspace by averaging.
pub(crate) fn dereal(y: &DMatrix<f64>) -> HermitianOperator {
    let d = y.nrows() / 2;
    let m = CMat::from_fn(d, d, |i, j| {
        c(
            0.5 * (y[(i, j)] + y[(i + d, j + d)]),
            0.5 * (y[(i + d, j)] - y[(i, j + d)]),
        )
    });
    HermitianOperator::hermitize(m)
}

/// Hidden states `sigma_l` attached to deterministic strategies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LhsDecomposition {
    pub strategies: Vec<DeterministicStrategy>,
    #[serde(skip)]
    pub states: Vec<HermitianOperator>,
    pub n_outcomes: usize,
}

impl LhsDecomposition {
    /// `sum_l D_l(a|x) sigma_l` as `members[x][a]`.
    pub fn reconstruct(&self) -> Vec<Vec<HermitianOperator>> {
        let nx = self.strategies.first().map_or(0, DeterministicStrategy::n_settings);
        let d = self.states.first().map_or(0, HermitianOperator::dim);
        let mut out = vec![vec![HermitianOperator::zeros(d); self.n_outcomes]; nx];
        for (f, s) in self.strategies.iter().zip(&self.states) {
            for (x, row) in out.iter_mut().enumerate() {
                let a = f.outcome(x);
                row[a] = &row[a] + s;
            }
        }
        out
    }

    /// Largest entrywise deviation of the reconstruction from `sigma`.
    pub fn residual(&self, sigma: &Assemblage) -> f64 {
        let rec = self.reconstruct();
        let mut worst: f64 = 0.0;
        for (x, row) in rec.iter().enumerate() {
            for (a, op) in row.iter().enumerate() {
                worst = worst.max(op.max_abs_diff(sigma.member(x, a)));
            }
        }
        worst
    }
}

/// Solution of the robustness SDP.
#[derive(Clone, Debug, PartialEq)]
pub struct Robustness {
    /// `t >= 0`; zero exactly for LHS assemblages.
    pub t: f64,
    /// Solver tolerance the value was certified at.
    pub tolerance: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    /// Zero-bound functional with `evaluate(certificate, sigma)` close to `t`.
    pub certificate: SteeringFunctional,
    /// Primal hidden states; reproduce `sigma` up to the noise `tau`.
    pub model: LhsDecomposition,
}

struct RobustnessSdp {
    problem: ConicProblem,
    strategies: Vec<DeterministicStrategy>,
    basis: Vec<CMat>,
}

fn build(sigma: &Assemblage) -> Result<RobustnessSdp> {
    let (nx, na, d) = sigma.shape();
    let strategies = enumerate_strategies(nx, na, STRATEGY_CAP)?;
    let basis = hermitian_basis(d);
    let k = 2 * d;
    let blen = k * (k + 1) / 2;
    let n_blocks = strategies.len() + nx * na;
    let n = n_blocks * blen;
    let m = nx * na * d * d;

    let coeffs: Vec<Vec<f64>> = basis.iter().map(|e| svec(&(realify(e) * 0.5))).collect();
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    let row_of = |x: usize, outcome: usize, kk: usize| (x * na + outcome) * d * d + kk;
    for (l, f) in strategies.iter().enumerate() {
        for x in 0..nx {
            for (kk, coef) in coeffs.iter().enumerate() {
                let row = row_of(x, f.outcome(x), kk);
                for (j, v) in coef.iter().enumerate() {
                    a[(row, l * blen + j)] = *v;
                }
            }
        }
    }
    for x in 0..nx {
        for outcome in 0..na {
            let blk = strategies.len() + x * na + outcome;
            let target = sigma.member(x, outcome).matrix();
            for (kk, (coef, e)) in coeffs.iter().zip(&basis).enumerate() {
                let row = row_of(x, outcome, kk);
                for (j, v) in coef.iter().enumerate() {
                    a[(row, blk * blen + j)] = -*v;
                }
                b[row] = (e * target).trace().re;
            }
        }
    }
    let half_identity = svec(&(DMatrix::identity(k, k) * 0.5));
    let mut cvec = DVector::zeros(n);
    for l in 0..strategies.len() {
        for (j, v) in half_identity.iter().enumerate() {
            cvec[l * blen + j] = *v;
        }
    }
    let problem = ConicProblem::new(cvec, a, b, vec![Cone::Psd(k); n_blocks])?;
    Ok(RobustnessSdp {
        problem,
        strategies,
        basis,
    })
}

fn run(sdp: &RobustnessSdp, tol: f64) -> Result<SolveResult> {
    let res = solve(&sdp.problem, tol)?;
    match res.status {
        SolveStatus::Optimal => Ok(res),
        // The robustness problem always has an optimum; anything else is a
        // numerical breakdown.
        SolveStatus::Infeasible | SolveStatus::NumericFailure => Err(Error::Numeric(format!(
            "robustness SDP ended with status {:?} after {} iterations (gap {:.2e})",
            res.status, res.iterations, res.gap
        ))),
    }
}

/// Minimal noise `t` such that `sigma` is dominated by an LHS assemblage of
/// total trace `1 + t`, with the optimal dual steering functional.
pub fn steering_robustness(sigma: &Assemblage, tol: f64) -> Result<Robustness> {
    let (nx, na, d) = sigma.shape();
    let sdp = build(sigma)?;
    let res = run(&sdp, tol)?;
    let k = 2 * d;
    let blen = k * (k + 1) / 2;

    let states = (0..sdp.strategies.len())
        .map(|l| dereal(&smat(&res.x[l * blen..(l + 1) * blen], k)))
        .collect();
    let model = LhsDecomposition {
        strategies: sdp.strategies.clone(),
        states,
        n_outcomes: na,
    };

    let inv_m = HermitianOperator::identity(d).scale(1.0 / nx as f64);
    let mut raw = Vec::with_capacity(nx);
    for x in 0..nx {
        let mut row = Vec::with_capacity(na);
        for outcome in 0..na {
            let mut f = CMat::zeros(d, d);
            for (kk, e) in sdp.basis.iter().enumerate() {
                f += e * cr(res.y[(x * na + outcome) * d * d + kk]);
            }
            row.push(&HermitianOperator::hermitize(f) - &inv_m);
        }
        raw.push(row);
    }
    let certificate = normalize_bound(raw, 0.0)?;

    Ok(Robustness {
        t: (res.primal_objective - 1.0).max(0.0),
        tolerance: tol,
        primal_residual: res.primal_residual,
        dual_residual: res.dual_residual,
        gap: res.gap,
        iterations: res.iterations,
        certificate,
        model,
    })
}

/// Finite-family LHS verdict with the tolerance it was decided at.
#[derive(Clone, Debug, PartialEq)]
pub struct LhsFeasibility {
    pub feasible: bool,
    pub robustness: f64,
    pub tolerance: f64,
    /// Tolerance the underlying SDP was solved to.
    pub solver_tolerance: f64,
    /// Present when feasible: hidden states reproducing `sigma` within
    /// `tolerance`.
    pub model: Option<LhsDecomposition>,
    /// Present when infeasible: a zero-bound functional with positive value.
    pub certificate: Option<SteeringFunctional>,
    pub certificate_value: Option<f64>,
}

/// Decides whether `sigma` has an LHS decomposition over the deterministic
/// strategies of its own shape, up to `tol` in robustness.
pub fn lhs_feasibility(sigma: &Assemblage, tol: f64) -> Result<LhsFeasibility> {
    if tol.is_nan() || tol < MIN_TOL {
        return Err(Error::Domain(format!("feasibility tolerance {tol} is below {MIN_TOL:e}")));
    }
    // Solve well inside the decision tolerance so that t is accurate.
    let mut last_err = None;
    for solver_tol in [(tol * 1e-2).max(MIN_TOL), (tol * 1e-1).max(MIN_TOL), tol] {
        match steering_robustness(sigma, solver_tol) {
            Ok(r) => return Ok(verdict(sigma, r, tol)),
            Err(Error::Numeric(msg)) => {
                log::debug!("robustness at tolerance {solver_tol:e} failed: {msg}");
                last_err = Some(Error::Numeric(msg));
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

fn verdict(sigma: &Assemblage, r: Robustness, tol: f64) -> LhsFeasibility {
    let feasible = r.t <= tol;
    if feasible {
        LhsFeasibility {
            feasible,
            robustness: r.t,
            tolerance: tol,
            solver_tolerance: r.tolerance,
            model: Some(r.model),
            certificate: None,
            certificate_value: None,
        }
    } else {
        let value = crate::ineq::evaluate(&r.certificate, sigma).ok();
        LhsFeasibility {
            feasible,
            robustness: r.t,
            tolerance: tol,
            solver_tolerance: r.tolerance,
            model: None,
            certificate: Some(r.certificate),
            certificate_value: value,
        }
    }
}

//! Dense primal-dual interior-point solver for linear conic programs
//!
//! ```text
//! minimize  c'x   subject to  A x = b,  x in K
//! ```
//!
//! where `K` is a product of nonnegative orthants and real positive
//! semidefinite cones. Semidefinite blocks are stored as `svec`: the lower
//! triangle in column-major order with off-diagonal entries scaled by
//! `sqrt(2)`, so the Euclidean inner product of two `svec`s equals the trace
//! inner product of the matrices.
//!
//! The solver works on the homogeneous self-dual embedding, so a problem
//! without a solution ends with an improving ray instead of diverging
//! iterates. Steps use Nesterov-Todd scaling and a Mehrotra
//! predictor-corrector.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-7;
/// Smallest tolerance [`solve`] accepts.
pub const MIN_TOL: f64 = 1e-9;
const MAX_ITER: usize = 120;
const STEP_FRACTION: f64 = 0.99;
/// Relative size below which a constraint row counts as a combination of
/// earlier rows.
const DEPENDENT_ROW_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cone {
    /// `n` nonnegative scalars.
    NonNeg(usize),
    /// A `k x k` real symmetric PSD matrix stored in `k(k+1)/2` entries.
    Psd(usize),
}

impl Cone {
    pub fn len(&self) -> usize {
        match *self {
            Cone::NonNeg(n) => n,
            Cone::Psd(k) => k * (k + 1) / 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn degree(&self) -> usize {
        match *self {
            Cone::NonNeg(n) => n,
            Cone::Psd(k) => k,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemData", into = "ProblemData")]
pub struct ConicProblem {
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    cones: Vec<Cone>,
}

/// Wire format: `a` is a list of constraint rows.
#[derive(Serialize, Deserialize)]
struct ProblemData {
    c: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    cones: Vec<Cone>,
}

impl TryFrom<ProblemData> for ConicProblem {
    type Error = Error;

    fn try_from(d: ProblemData) -> Result<Self> {
        let n = d.c.len();
        for (i, row) in d.a.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "constraint row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
        }
        let a = DMatrix::from_fn(d.a.len(), n, |i, j| d.a[i][j]);
        ConicProblem::new(DVector::from_vec(d.c), a, DVector::from_vec(d.b), d.cones)
    }
}

impl From<ConicProblem> for ProblemData {
    fn from(p: ConicProblem) -> Self {
        ProblemData {
            c: p.c.iter().copied().collect(),
            a: p.a.row_iter().map(|r| r.iter().copied().collect()).collect(),
            b: p.b.iter().copied().collect(),
            cones: p.cones,
        }
    }
}

impl ConicProblem {
    pub fn new(c: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>, cones: Vec<Cone>) -> Result<Self> {
        if cones.iter().any(Cone::is_empty) {
            return Err(Error::Dimension("cone blocks must have positive size".into()));
        }
        let n: usize = cones.iter().map(Cone::len).sum();
        if c.len() != n {
            return Err(Error::Dimension(format!("objective has {} entries, cones cover {n}", c.len())));
        }
        if a.ncols() != n || a.nrows() != b.len() {
            return Err(Error::Dimension(format!(
                "constraint matrix is {}x{}, expected {}x{n}",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        if c.iter().chain(a.iter()).chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("problem data contains non-finite values".into()));
        }
        Ok(ConicProblem { c, a, b, cones })
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.b.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericFailure,
}

/// Improving ray proving that no optimal solution exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Certificate {
    /// `b'y = 1` and `-A'y` lies in the dual cone: the constraints are
    /// inconsistent.
    PrimalInfeasible { y: Vec<f64> },
    /// `c'x = -1`, `A x = 0`, `x` in the cone: the objective is unbounded
    /// below, so the dual is infeasible.
    DualInfeasible { x: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    /// `|A x - b| / (1 + |b|)`.
    pub primal_residual: f64,
    /// `|A'y + s - c| / (1 + |c|)`.
    pub dual_residual: f64,
    /// Relative duality gap.
    pub gap: f64,
    pub tolerance: f64,
    pub certificate: Option<Certificate>,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Packs a symmetric matrix into `svec` form.
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let k = m.nrows();
    let mut out = Vec::with_capacity(k * (k + 1) / 2);
    for j in 0..k {
        out.push(m[(j, j)]);
        for i in j + 1..k {
            out.push(0.5 * (m[(i, j)] + m[(j, i)]) * SQRT_2);
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    let mut idx = 0;
    for j in 0..k {
        m[(j, j)] = v[idx];
        idx += 1;
        for i in j + 1..k {
            let val = v[idx] / SQRT_2;
            m[(i, j)] = val;
            m[(j, i)] = val;
            idx += 1;
        }
    }
    m
}

#[derive(Clone, Copy, Debug)]
struct Block {
    cone: Cone,
    off: usize,
}

fn blocks_of(cones: &[Cone]) -> Vec<Block> {
    let mut off = 0;
    cones
        .iter()
        .map(|&cone| {
            let b = Block { cone, off };
            off += cone.len();
            b
        })
        .collect()
}

fn identity_point(blocks: &[Block], n: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    for blk in blocks {
        match blk.cone {
            Cone::NonNeg(len) => e.rows_mut(blk.off, len).fill(1.0),
            Cone::Psd(k) => {
                let mut idx = blk.off;
                for j in 0..k {
                    e[idx] = 1.0;
                    idx += k - j;
                }
            }
        }
    }
    e
}

enum BlockScaling {
    NonNeg {
        w: Vec<f64>,
        lambda: Vec<f64>,
    },
    Psd {
        r: DMatrix<f64>,
        rinv: DMatrix<f64>,
        lambda: Vec<f64>,
    },
}

/// Nesterov-Todd scaling `W` with `W x = W^{-T} s = lambda`.
struct Scaling {
    blocks: Vec<(Block, BlockScaling)>,
}

fn sym_sqrt_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    match m.clone().cholesky() {
        Some(ch) => ch.l(),
        None => {
            // Borderline interior point: fall back to a clamped square root.
            let eig = m.clone().symmetric_eigen();
            let d = eig.eigenvalues.map(|v| v.max(1e-300).sqrt());
            &eig.eigenvectors * DMatrix::from_diagonal(&d)
        }
    }
}

impl Scaling {
    fn new(blocks: &[Block], x: &DVector<f64>, s: &DVector<f64>) -> Option<Self> {
        let mut out = Vec::with_capacity(blocks.len());
        for &blk in blocks {
            let sc = match blk.cone {
                Cone::NonNeg(n) => {
                    let mut w = Vec::with_capacity(n);
                    let mut lambda = Vec::with_capacity(n);
                    for i in 0..n {
                        let (xi, si) = (x[blk.off + i], s[blk.off + i]);
                        if !(xi > 0.0 && si > 0.0) {
                            return None;
                        }
                        w.push((si / xi).sqrt());
                        lambda.push((xi * si).sqrt());
                    }
                    BlockScaling::NonNeg { w, lambda }
                }
                Cone::Psd(k) => {
                    let len = blk.cone.len();
                    let xm = smat(&x.as_slice()[blk.off..blk.off + len], k);
                    let sm = smat(&s.as_slice()[blk.off..blk.off + len], k);
                    let lx = sym_sqrt_factor(&xm);
                    let ls = sym_sqrt_factor(&sm);
                    let svd = (ls.transpose() * &lx).svd(true, true);
                    let u = svd.u?;
                    let v_t = svd.v_t?;
                    let sv = svd.singular_values;
                    if sv.iter().any(|&v| v.is_nan() || v <= 0.0 || v.is_infinite()) {
                        return None;
                    }
                    let inv_sqrt = DMatrix::from_diagonal(&sv.map(|v| 1.0 / v.sqrt()));
                    let r = &lx * v_t.transpose() * &inv_sqrt;
                    let rinv = &inv_sqrt * u.transpose() * ls.transpose();
                    BlockScaling::Psd {
                        r,
                        rinv,
                        lambda: sv.iter().copied().collect(),
                    }
                }
            };
            out.push((blk, sc));
        }
        Some(Scaling { blocks: out })
    }

    fn map_blocks(
        &self,
        v: &DVector<f64>,
        nonneg: impl Fn(&[f64], &[f64], &mut [f64]),
        psd: impl Fn(&DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>) -> DMatrix<f64>,
    ) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for (blk, sc) in &self.blocks {
            let len = blk.cone.len();
            let src = &v.as_slice()[blk.off..blk.off + len];
            match sc {
                BlockScaling::NonNeg { w, .. } => {
                    nonneg(w, src, &mut out.as_mut_slice()[blk.off..blk.off + len]);
                }
                BlockScaling::Psd { r, rinv, .. } => {
                    if src.iter().all(|&z| z == 0.0) {
                        continue;
                    }
                    let k = r.nrows();
                    let m = psd(r, rinv, &smat(src, k));
                    out.as_mut_slice()[blk.off..blk.off + len].copy_from_slice(&svec(&m));
                }
            }
        }
        out
    }

    /// `W v`.
    fn w(&self, v: &DVector<f64>) -> DVector<f64> {
        self.map_blocks(
            v,
            |w, src, dst| dst.iter_mut().zip(w.iter().zip(src)).for_each(|(d, (wi, si))| *d = wi * si),
            |_, rinv, m| rinv * m * rinv.transpose(),
        )
    }

    /// `W^{-T} v`.
    fn w_inv_t(&self, v: &DVector<f64>) -> DVector<f64> {
        self.map_blocks(
            v,
            |w, src, dst| dst.iter_mut().zip(w.iter().zip(src)).for_each(|(d, (wi, si))| *d = si / wi),
            |r, _, m| r.transpose() * m * r,
        )
    }

    /// `W^T v`.
    fn w_t(&self, v: &DVector<f64>) -> DVector<f64> {
        self.map_blocks(
            v,
            |w, src, dst| dst.iter_mut().zip(w.iter().zip(src)).for_each(|(d, (wi, si))| *d = wi * si),
            |_, rinv, m| rinv.transpose() * m * rinv,
        )
    }

    /// `H^{-1} v`.
    fn h_inv(&self, v: &DVector<f64>) -> DVector<f64> {
        self.map_blocks(
            v,
            |w, src, dst| dst.iter_mut().zip(w.iter().zip(src)).for_each(|(d, (wi, si))| *d = si / (wi * wi)),
            |r, _, m| {
                let rt_m_r = r.transpose() * m * r;
                r * rt_m_r * r.transpose()
            },
        )
    }

    fn lambda_blocks(&self) -> impl Iterator<Item = (&Block, &[f64])> {
        self.blocks.iter().map(|(blk, sc)| match sc {
            BlockScaling::NonNeg { lambda, .. } | BlockScaling::Psd { lambda, .. } => (blk, lambda.as_slice()),
        })
    }

    /// `lambda o lambda` in the Jordan algebra of the cone.
    fn lambda_sq(&self, n: usize) -> DVector<f64> {
        let mut out = DVector::zeros(n);
        for (blk, lambda) in self.lambda_blocks() {
            match blk.cone {
                Cone::NonNeg(_) => {
                    for (i, l) in lambda.iter().enumerate() {
                        out[blk.off + i] = l * l;
                    }
                }
                Cone::Psd(k) => {
                    let mut idx = blk.off;
                    for (j, l) in lambda.iter().enumerate() {
                        out[idx] = l * l;
                        idx += k - j;
                    }
                }
            }
        }
        out
    }

    /// Solves `lambda o u = r` for `u`.
    fn lambda_solve(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(r.len());
        for (blk, lambda) in self.lambda_blocks() {
            let len = blk.cone.len();
            let src = &r.as_slice()[blk.off..blk.off + len];
            match blk.cone {
                Cone::NonNeg(_) => {
                    for i in 0..len {
                        out[blk.off + i] = src[i] / lambda[i];
                    }
                }
                Cone::Psd(k) => {
                    let mut m = smat(src, k);
                    for j in 0..k {
                        for i in 0..k {
                            m[(i, j)] *= 2.0 / (lambda[i] + lambda[j]);
                        }
                    }
                    out.as_mut_slice()[blk.off..blk.off + len].copy_from_slice(&svec(&m));
                }
            }
        }
        out
    }

    /// Largest step `alpha` with `lambda + alpha * d` in the cone.
    fn max_step(&self, d: &DVector<f64>) -> f64 {
        let mut alpha = f64::INFINITY;
        for (blk, lambda) in self.lambda_blocks() {
            let len = blk.cone.len();
            let src = &d.as_slice()[blk.off..blk.off + len];
            match blk.cone {
                Cone::NonNeg(_) => {
                    for i in 0..len {
                        if src[i] < 0.0 {
                            alpha = alpha.min(-lambda[i] / src[i]);
                        }
                    }
                }
                Cone::Psd(k) => {
                    let mut m = smat(src, k);
                    for j in 0..k {
                        for i in 0..k {
                            m[(i, j)] /= (lambda[i] * lambda[j]).sqrt();
                        }
                    }
                    let emin = m.symmetric_eigenvalues().min();
                    if emin < 0.0 {
                        alpha = alpha.min(-1.0 / emin);
                    }
                }
            }
        }
        alpha
    }
}

/// Jordan product `u o v` blockwise.
fn jordan(blocks: &[Block], u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(u.len());
    for blk in blocks {
        let len = blk.cone.len();
        let range = blk.off..blk.off + len;
        match blk.cone {
            Cone::NonNeg(_) => {
                for i in range {
                    out[i] = u[i] * v[i];
                }
            }
            Cone::Psd(k) => {
                let um = smat(&u.as_slice()[range.clone()], k);
                let vm = smat(&v.as_slice()[range.clone()], k);
                let p = (&um * &vm + &vm * &um) * 0.5;
                out.as_mut_slice()[range].copy_from_slice(&svec(&p));
            }
        }
    }
    out
}

/// Cholesky of the normal matrix, regularized only as far as needed.
struct NormalSolver {
    m: DMatrix<f64>,
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

impl NormalSolver {
    fn new(m: DMatrix<f64>) -> Option<Self> {
        if m.nrows() == 0 {
            return Some(NormalSolver { m, chol: None });
        }
        let scale = m.diagonal().iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);
        if let Some(ch) = m.clone().cholesky() {
            return Some(NormalSolver { m, chol: Some(ch) });
        }
        for exp in [-14, -13, -12, -11, -10, -9, -8, -7, -6] {
            let reg = scale * 10f64.powi(exp);
            let shifted = &m + DMatrix::identity(m.nrows(), m.nrows()) * reg;
            if let Some(ch) = shifted.cholesky() {
                return Some(NormalSolver { m, chol: Some(ch) });
            }
        }
        None
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let Some(ch) = &self.chol else {
            return DVector::zeros(0);
        };
        let mut sol = ch.solve(rhs);
        // Iterative refinement against the unregularized matrix.
        for _ in 0..3 {
            let res = rhs - &self.m * &sol;
            sol += ch.solve(&res);
        }
        sol
    }
}

struct Direction {
    dx: DVector<f64>,
    dy: DVector<f64>,
    ds: DVector<f64>,
    dtau: f64,
    dkappa: f64,
    wdx: DVector<f64>,
    wds: DVector<f64>,
}

struct Rhs<'a> {
    r1: &'a DVector<f64>,
    r2: &'a DVector<f64>,
    r3: f64,
    rxs: &'a DVector<f64>,
    rtk: f64,
}

struct Newton<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    c: &'a DVector<f64>,
    sc: &'a Scaling,
    hinv_at: DMatrix<f64>,
    normal: NormalSolver,
    u: DVector<f64>,
    dx1: DVector<f64>,
    tau: f64,
    kappa: f64,
}

impl Newton<'_> {
    fn direction(&self, rhs: &Rhs) -> Direction {
        let q = self.sc.lambda_solve(rhs.rxs);
        let wtq = self.sc.w_t(&q);
        let g = &wtq - rhs.r2;
        let hinv_g = self.sc.h_inv(&g);
        let p = self.normal.solve(&(rhs.r1 - self.a * &hinv_g));
        let dx0 = &self.hinv_at * &p + &hinv_g;
        let denom = self.kappa + self.tau * (self.b.dot(&self.u) - self.c.dot(&self.dx1));
        let dtau = (rhs.rtk - self.tau * (rhs.r3 - self.c.dot(&dx0) + self.b.dot(&p))) / denom;
        let dy = &p + &self.u * dtau;
        let dx = &dx0 + &self.dx1 * dtau;
        let dkappa = rhs.r3 - self.c.dot(&dx) + self.b.dot(&dy);
        // Taken from the dual equation rather than `W'q - H dx`, which loses
        // the dual residual to cancellation near convergence.
        let ds = rhs.r2 - self.a.tr_mul(&dy) + self.c * dtau;
        let wdx = self.sc.w(&dx);
        let wds = self.sc.w_inv_t(&ds);
        Direction {
            dx,
            dy,
            ds,
            dtau,
            dkappa,
            wdx,
            wds,
        }
    }

    fn step_length(&self, d: &Direction) -> f64 {
        let mut alpha = self.sc.max_step(&d.wdx).min(self.sc.max_step(&d.wds));
        if d.dtau < 0.0 {
            alpha = alpha.min(-self.tau / d.dtau);
        }
        if d.dkappa < 0.0 {
            alpha = alpha.min(-self.kappa / d.dkappa);
        }
        alpha
    }
}

struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    s: DVector<f64>,
    tau: f64,
    kappa: f64,
}

struct Measures {
    pres: f64,
    dres: f64,
    gap: f64,
    pobj: f64,
    dobj: f64,
}

fn measures(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>, it: &Iterate) -> Measures {
    let rp = (a * &it.x - b * it.tau).norm() / it.tau;
    let rd = (a.tr_mul(&it.y) + &it.s - c * it.tau).norm() / it.tau;
    let pobj = c.dot(&it.x) / it.tau;
    let dobj = b.dot(&it.y) / it.tau;
    Measures {
        pres: rp / (1.0 + b.norm()),
        dres: rd / (1.0 + c.norm()),
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs().min(dobj.abs())),
        pobj,
        dobj,
    }
}

fn failure(n: usize, m: usize, iterations: usize, tol: f64, last: Option<&Measures>) -> SolveResult {
    SolveResult {
        status: SolveStatus::NumericFailure,
        x: vec![f64::NAN; n],
        y: vec![f64::NAN; m],
        s: vec![f64::NAN; n],
        primal_objective: last.map_or(f64::NAN, |m| m.pobj),
        dual_objective: last.map_or(f64::NAN, |m| m.dobj),
        iterations,
        primal_residual: last.map_or(f64::NAN, |m| m.pres),
        dual_residual: last.map_or(f64::NAN, |m| m.dres),
        gap: last.map_or(f64::NAN, |m| m.gap),
        tolerance: tol,
        certificate: None,
    }
}

fn hsd(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>, cones: &[Cone], tol: f64) -> SolveResult {
    let n = c.len();
    let m = b.len();
    let blocks = blocks_of(cones);
    let nu = cones.iter().map(Cone::degree).sum::<usize>() as f64;
    let e = identity_point(&blocks, n);
    let mut it = Iterate {
        x: e.clone(),
        y: DVector::zeros(m),
        s: e.clone(),
        tau: 1.0,
        kappa: 1.0,
    };
    let mut last: Option<Measures> = None;
    let mut small_steps = 0;

    for iter in 0..MAX_ITER {
        let meas = measures(a, b, c, &it);
        if ![meas.pres, meas.dres, meas.gap, it.tau, it.kappa].iter().all(|v| v.is_finite()) {
            log::debug!("non-finite iterate at iteration {iter}");
            return failure(n, m, iter, tol, last.as_ref());
        }
        if meas.pres <= tol && meas.dres <= tol && meas.gap <= tol {
            log::debug!("optimal after {iter} iterations, objective {:.12e}", meas.pobj);
            return SolveResult {
                status: SolveStatus::Optimal,
                x: (&it.x / it.tau).iter().copied().collect(),
                y: (&it.y / it.tau).iter().copied().collect(),
                s: (&it.s / it.tau).iter().copied().collect(),
                primal_objective: meas.pobj,
                dual_objective: meas.dobj,
                iterations: iter,
                primal_residual: meas.pres,
                dual_residual: meas.dres,
                gap: meas.gap,
                tolerance: tol,
                certificate: None,
            };
        }
        let by = b.dot(&it.y);
        if by > 0.0 && (a.tr_mul(&it.y) + &it.s).norm() / by <= tol {
            log::debug!("primal infeasibility certificate after {iter} iterations");
            return SolveResult {
                status: SolveStatus::Infeasible,
                x: vec![f64::NAN; n],
                y: (&it.y / by).iter().copied().collect(),
                s: (&it.s / by).iter().copied().collect(),
                primal_objective: f64::INFINITY,
                dual_objective: f64::INFINITY,
                iterations: iter,
                primal_residual: f64::NAN,
                dual_residual: (a.tr_mul(&it.y) + &it.s).norm() / by,
                gap: f64::NAN,
                tolerance: tol,
                certificate: Some(Certificate::PrimalInfeasible {
                    y: (&it.y / by).iter().copied().collect(),
                }),
            };
        }
        let cx = c.dot(&it.x);
        if cx < 0.0 && (a * &it.x).norm() / -cx <= tol {
            log::debug!("dual infeasibility certificate after {iter} iterations");
            let ray: Vec<f64> = (&it.x / -cx).iter().copied().collect();
            return SolveResult {
                status: SolveStatus::Infeasible,
                x: ray.clone(),
                y: vec![f64::NAN; m],
                s: vec![f64::NAN; n],
                primal_objective: f64::NEG_INFINITY,
                dual_objective: f64::NEG_INFINITY,
                iterations: iter,
                primal_residual: (a * &it.x).norm() / -cx,
                dual_residual: f64::NAN,
                gap: f64::NAN,
                tolerance: tol,
                certificate: Some(Certificate::DualInfeasible { x: ray }),
            };
        }

        let Some(sc) = Scaling::new(&blocks, &it.x, &it.s) else {
            log::debug!("lost interiority at iteration {iter}");
            return failure(n, m, iter, tol, Some(&meas));
        };
        let mu = (it.x.dot(&it.s) + it.tau * it.kappa) / (nu + 1.0);

        let mut hinv_at = DMatrix::zeros(n, m);
        for i in 0..m {
            let row: DVector<f64> = a.row(i).transpose();
            hinv_at.set_column(i, &sc.h_inv(&row));
        }
        let mut normal_m = a * &hinv_at;
        normal_m = (&normal_m + normal_m.transpose()) * 0.5;
        let Some(normal) = NormalSolver::new(normal_m) else {
            log::debug!("normal matrix factorization failed at iteration {iter}");
            return failure(n, m, iter, tol, Some(&meas));
        };
        let hinv_c = sc.h_inv(c);
        let u = normal.solve(&(b + a * &hinv_c));
        let dx1 = &hinv_at * &u - &hinv_c;
        let newton = Newton {
            a,
            b,
            c,
            sc: &sc,
            hinv_at,
            normal,
            u,
            dx1,
            tau: it.tau,
            kappa: it.kappa,
        };

        let rp = a * &it.x - b * it.tau;
        let rd = a.tr_mul(&it.y) + &it.s - c * it.tau;
        let rg = it.kappa + c.dot(&it.x) - b.dot(&it.y);
        let lam_sq = sc.lambda_sq(n);

        let neg_rp = -&rp;
        let neg_rd = -&rd;
        let neg_lam_sq = -&lam_sq;
        let aff = newton.direction(&Rhs {
            r1: &neg_rp,
            r2: &neg_rd,
            r3: -rg,
            rxs: &neg_lam_sq,
            rtk: -it.tau * it.kappa,
        });
        let alpha_aff = newton.step_length(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        let eta = 1.0 - sigma;
        let r1 = &rp * -eta;
        let r2 = &rd * -eta;
        let rxs = &neg_lam_sq - jordan(&blocks, &aff.wdx, &aff.wds) + &e * (sigma * mu);
        let rtk = -it.tau * it.kappa - aff.dtau * aff.dkappa + sigma * mu;
        let dir = newton.direction(&Rhs {
            r1: &r1,
            r2: &r2,
            r3: -eta * rg,
            rxs: &rxs,
            rtk,
        });
        let alpha = (STEP_FRACTION * newton.step_length(&dir)).min(1.0);
        log::trace!(
            "iter {iter}: pres {:.2e} dres {:.2e} gap {:.2e} tau {:.2e} kappa {:.2e} step {:.3}",
            meas.pres,
            meas.dres,
            meas.gap,
            it.tau,
            it.kappa,
            alpha
        );
        if !alpha.is_finite() {
            return failure(n, m, iter, tol, Some(&meas));
        }

        it.x += &dir.dx * alpha;
        it.y += &dir.dy * alpha;
        it.s += &dir.ds * alpha;
        it.tau += dir.dtau * alpha;
        it.kappa += dir.dkappa * alpha;

        // Keep the embedding well scaled: the problem is homogeneous.
        let norm = it.tau + it.kappa;
        if !(1e-8..=1e8).contains(&norm) {
            it.x /= norm;
            it.y /= norm;
            it.s /= norm;
            it.tau /= norm;
            it.kappa /= norm;
        }

        if alpha < 1e-9 {
            small_steps += 1;
            if small_steps >= 3 {
                log::debug!("stalled at iteration {iter}");
                return failure(n, m, iter + 1, tol, Some(&meas));
            }
        } else {
            small_steps = 0;
        }
        last = Some(meas);
    }
    failure(n, m, MAX_ITER, tol, last.as_ref())
}

enum Presolved {
    Keep(Vec<usize>),
    Inconsistent(Vec<f64>),
}

/// Finds a maximal set of linearly independent constraint rows by modified
/// Gram-Schmidt. A dependent row with inconsistent right-hand side yields a
/// Farkas vector `y` with `A'y = 0` and `b'y = 1`.
fn presolve(a: &DMatrix<f64>, b: &DVector<f64>) -> Presolved {
    let m = a.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut combos: Vec<DVector<f64>> = Vec::new();
    let mut keep = Vec::new();
    let bscale = 1.0 + b.amax();
    for i in 0..m {
        let row: DVector<f64> = a.row(i).transpose();
        let row_norm = row.norm();
        let mut v = row.clone();
        let mut coeff = DVector::zeros(m);
        coeff[i] = 1.0;
        for _ in 0..2 {
            for (q, t) in basis.iter().zip(&combos) {
                let h = q.dot(&v);
                v.axpy(-h, q, 1.0);
                coeff.axpy(-h, t, 1.0);
            }
        }
        let norm = v.norm();
        if norm > DEPENDENT_ROW_TOL * row_norm.max(1.0) {
            basis.push(v / norm);
            combos.push(coeff / norm);
            keep.push(i);
            continue;
        }
        let delta = coeff.dot(b);
        if delta.abs() > DEPENDENT_ROW_TOL * bscale * coeff.amax().max(1.0) {
            log::debug!("constraint row {i} is inconsistent with earlier rows");
            return Presolved::Inconsistent((coeff / delta).iter().copied().collect());
        }
        log::debug!("dropping redundant constraint row {i}");
    }
    Presolved::Keep(keep)
}

/// Solves `problem` to relative accuracy `tol`.
///
/// Errors only on `tol < 1e-9`; numerical trouble is reported through
/// [`SolveStatus::NumericFailure`].
pub fn solve(problem: &ConicProblem, tol: f64) -> Result<SolveResult> {
    if tol.is_nan() || tol < MIN_TOL || tol.is_infinite() {
        return Err(Error::Domain(format!("solver tolerance {tol} is below {MIN_TOL:e}")));
    }
    let (a, b, c) = (&problem.a, &problem.b, &problem.c);
    let n = c.len();
    let m = b.len();
    let keep = match presolve(a, b) {
        Presolved::Keep(k) => k,
        Presolved::Inconsistent(y) => {
            return Ok(SolveResult {
                status: SolveStatus::Infeasible,
                x: vec![f64::NAN; n],
                y: y.clone(),
                s: vec![0.0; n],
                primal_objective: f64::INFINITY,
                dual_objective: f64::INFINITY,
                iterations: 0,
                primal_residual: f64::NAN,
                dual_residual: a.tr_mul(&DVector::from_vec(y.clone())).norm(),
                gap: f64::NAN,
                tolerance: tol,
                certificate: Some(Certificate::PrimalInfeasible { y }),
            })
        }
    };
    let mut res = if keep.len() == m {
        hsd(a, b, c, &problem.cones, tol)
    } else {
        let a_red = a.select_rows(keep.iter());
        let b_red = b.select_rows(keep.iter());
        hsd(&a_red, &b_red, c, &problem.cones, tol)
    };
    if keep.len() != m {
        let mut y = vec![0.0; m];
        for (k, &i) in keep.iter().enumerate() {
            y[i] = res.y[k];
        }
        res.y = y;
        if let Some(Certificate::PrimalInfeasible { y: cy }) = &mut res.certificate {
            let mut full = vec![0.0; m];
            for (k, &i) in keep.iter().enumerate() {
                full[i] = cy[k];
            }
            *cy = full;
        }
    }
    if res.is_optimal() {
        // Report residuals against the full constraint set.
        let x = DVector::from_column_slice(&res.x);
        let y = DVector::from_column_slice(&res.y);
        let s = DVector::from_column_slice(&res.s);
        res.primal_residual = (a * &x - b).norm() / (1.0 + b.norm());
        res.dual_residual = (a.tr_mul(&y) + &s - c).norm() / (1.0 + c.norm());
    }
    Ok(res)
}

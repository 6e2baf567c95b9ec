//! Dense complex Hermitian matrix algebra.
//!
//! All composite indices are A-major: the basis vector `|a>|b>` of a
//! `dA x dB` system sits at index `a * dB + b`. Every module in the crate
//! relies on this ordering, and so do the JSON fixtures.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Largest tolerated `|H_ij - conj(H_ji)|` before symmetrization.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Allowed deviation of a state's trace from one.
pub const TRACE_TOL: f64 = 1e-10;
/// Smallest eigenvalue still accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-9;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// One of the two parties of a bipartite system.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::A => Party::B,
            Party::B => Party::A,
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::A => write!(f, "A"),
            Party::B => write!(f, "B"),
        }
    }
}

/// A square complex matrix that is Hermitian to within [`HERMITICITY_TOL`].
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    mat: CMat,
}

impl HermitianOperator {
    /// Checks squareness and Hermiticity, then symmetrizes `(H + H^dag) / 2`.
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::Dimension(format!(
                "operator must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.nrows() == 0 {
            return Err(Error::Dimension("operator must have positive dimension".into()));
        }
        let n = mat.nrows();
        let mut worst = (0, 0, 0.0f64);
        for i in 0..n {
            for j in i..n {
                let dev = (mat[(i, j)] - mat[(j, i)].conj()).norm();
                if !dev.is_finite() {
                    return Err(Error::Numeric(format!("non-finite entry at ({i}, {j})")));
                }
                if dev > worst.2 {
                    worst = (i, j, dev);
                }
            }
        }
        if worst.2 > HERMITICITY_TOL {
            return Err(Error::NotHermitian {
                row: worst.0,
                col: worst.1,
                deviation: worst.2,
            });
        }
        Ok(Self::hermitize(mat))
    }

    /// Symmetrizes without the tolerance check. Used for results of
    /// operations that are Hermitian in exact arithmetic.
    pub(crate) fn hermitize(mat: CMat) -> Self {
        debug_assert_eq!(mat.nrows(), mat.ncols());
        let adj = mat.adjoint();
        Self {
            mat: (mat + adj).map(|z| z * 0.5),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: CMat::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: CMat::zeros(dim, dim),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            mat: CMat::from_fn(n, n, |i, j| if i == j { cr(diag[i]) } else { cr(0.0) }),
        }
    }

    /// `|v><v|` for an arbitrary (not necessarily normalized) vector.
    pub fn projector(v: &CVec) -> Self {
        Self::hermitize(v * v.adjoint())
    }

    /// `|k><k|` in dimension `dim`.
    pub fn basis_projector(dim: usize, k: usize) -> Self {
        assert!(k < dim, "basis index {k} out of range for dimension {dim}");
        let mut mat = CMat::zeros(dim, dim);
        mat[(k, k)] = cr(1.0);
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    /// `Re tr(self * other)`, which is the full trace for Hermitian pairs.
    pub fn trace_product(&self, other: &HermitianOperator) -> f64 {
        assert_eq!(self.dim(), other.dim(), "trace_product dimension mismatch");
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self.mat[(i, j)] * other.mat[(j, i)]).re;
            }
        }
        acc
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            mat: self.mat.map(|z| z * k),
        }
    }

    /// `K H K^dag`, Hermitian for any `K` of compatible width.
    pub fn conjugate_by(&self, k: &CMat) -> Self {
        assert_eq!(k.ncols(), self.dim(), "conjugation dimension mismatch");
        Self::hermitize(k * &self.mat * k.adjoint())
    }

    /// Elementwise complex conjugate (equivalently the transpose).
    pub fn conj(&self) -> Self {
        Self {
            mat: self.mat.map(|z| z.conj()),
        }
    }

    pub fn max_abs_diff(&self, other: &HermitianOperator) -> f64 {
        assert_eq!(self.dim(), other.dim(), "max_abs_diff dimension mismatch");
        self.mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Ascending eigenvalues with matching orthonormal eigenvectors (columns).
    pub fn eigh(&self) -> Result<(Vec<f64>, CMat)> {
        let eig = self
            .mat
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 10_000)
            .ok_or_else(|| Error::Numeric("Hermitian eigensolver did not converge".into()))?;
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMat::from_fn(self.dim(), self.dim(), |r, k| eig.eigenvectors[(r, order[k])]);
        Ok((values, vectors))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.eigh().map(|(v, _)| v)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        min_eigenvalue(self)
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(*self.eigenvalues()?.last().expect("non-empty spectrum"))
    }

    pub fn is_psd(&self) -> Result<bool> {
        Ok(self.min_eigenvalue()? >= -PSD_TOL)
    }
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: &HermitianOperator) -> HermitianOperator {
        assert_eq!(self.dim(), rhs.dim(), "operator addition dimension mismatch");
        HermitianOperator {
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: &HermitianOperator) -> HermitianOperator {
        assert_eq!(self.dim(), rhs.dim(), "operator subtraction dimension mismatch");
        HermitianOperator {
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, k: f64) -> HermitianOperator {
        self.scale(k)
    }
}

/// Kronecker product `A (x) B` with A-major ordering.
pub fn tensor(a: &HermitianOperator, b: &HermitianOperator) -> HermitianOperator {
    HermitianOperator {
        mat: a.mat.kronecker(&b.mat),
    }
}

fn check_split(dim: usize, dims: (usize, usize)) -> Result<()> {
    if dims.0 == 0 || dims.1 == 0 || dims.0 * dims.1 != dim {
        return Err(Error::Dimension(format!(
            "declared split {}x{} does not match operator dimension {dim}",
            dims.0, dims.1
        )));
    }
    Ok(())
}

/// Traces out `side` of an operator on a `dims.0 x dims.1` system.
pub fn partial_trace(op: &HermitianOperator, dims: (usize, usize), side: Party) -> Result<HermitianOperator> {
    check_split(op.dim(), dims)?;
    let (da, db) = dims;
    let m = &op.mat;
    let mat = match side {
        Party::A => CMat::from_fn(db, db, |i, j| (0..da).map(|k| m[(k * db + i, k * db + j)]).sum()),
        Party::B => CMat::from_fn(da, da, |i, j| (0..db).map(|k| m[(i * db + k, j * db + k)]).sum()),
    };
    Ok(HermitianOperator::hermitize(mat))
}

/// Transposes the `side` factor. Pure index permutation, so it is an exact
/// involution.
pub fn partial_transpose(op: &HermitianOperator, dims: (usize, usize), side: Party) -> Result<HermitianOperator> {
    check_split(op.dim(), dims)?;
    let (da, db) = dims;
    let n = da * db;
    let m = &op.mat;
    let mat = CMat::from_fn(n, n, |r, s| {
        let (a, b) = (r / db, r % db);
        let (a2, b2) = (s / db, s % db);
        match side {
            Party::A => m[(a2 * db + b, a * db + b2)],
            Party::B => m[(a * db + b2, a2 * db + b)],
        }
    });
    Ok(HermitianOperator { mat })
}

/// Smallest eigenvalue of a Hermitian operator.
pub fn min_eigenvalue(h: &HermitianOperator) -> Result<f64> {
    Ok(h.eigenvalues()?[0])
}

/// The permutation `|a>|b> -> |b>|a>` from `dA x dB` to `dB x dA`.
pub fn swap_matrix(da: usize, db: usize) -> CMat {
    let n = da * db;
    let mut mat = CMat::zeros(n, n);
    for a in 0..da {
        for b in 0..db {
            mat[(b * da + a, a * db + b)] = cr(1.0);
        }
    }
    mat
}

/// The `d x d` isometry embedding of the first `k` basis vectors, as a
/// `d x k` matrix.
pub fn embedding(k: usize, d: usize) -> CMat {
    assert!(k <= d, "cannot embed dimension {k} into {d}");
    CMat::from_fn(d, k, |i, j| if i == j { cr(1.0) } else { cr(0.0) })
}

/// A density operator on `dA x dB` with trace one and no eigenvalue below
/// `-PSD_TOL`.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteState {
    dims: (usize, usize),
    op: HermitianOperator,
}

impl BipartiteState {
    pub fn new(op: HermitianOperator, dim_a: usize, dim_b: usize) -> Result<Self> {
        check_split(op.dim(), (dim_a, dim_b))?;
        let tr = op.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let min = op.min_eigenvalue()?;
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min:.3e} is negative")));
        }
        Ok(Self {
            dims: (dim_a, dim_b),
            op,
        })
    }

    /// Normalizes a positive operator to unit trace first.
    pub fn from_unnormalized(op: HermitianOperator, dim_a: usize, dim_b: usize) -> Result<Self> {
        let tr = op.trace();
        if tr <= 0.0 || !tr.is_finite() {
            return Err(Error::InvalidState(format!("cannot normalize operator with trace {tr}")));
        }
        Self::new(op.scale(1.0 / tr), dim_a, dim_b)
    }

    pub fn dim_a(&self) -> usize {
        self.dims.0
    }

    pub fn dim_b(&self) -> usize {
        self.dims.1
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &CMat {
        self.op.matrix()
    }

    pub fn dim_of(&self, side: Party) -> usize {
        match side {
            Party::A => self.dims.0,
            Party::B => self.dims.1,
        }
    }

    /// Partial trace over `side`.
    pub fn partial_trace(&self, side: Party) -> HermitianOperator {
        partial_trace(&self.op, self.dims, side).expect("state split is consistent")
    }

    /// Reduced state of `party`, i.e. the partial trace over the other one.
    pub fn marginal(&self, party: Party) -> HermitianOperator {
        self.partial_trace(party.other())
    }

    pub fn partial_transpose(&self, side: Party) -> HermitianOperator {
        partial_transpose(&self.op, self.dims, side).expect("state split is consistent")
    }

    /// Exchanges the roles of A and B.
    pub fn swap_parties(&self) -> BipartiteState {
        let s = swap_matrix(self.dims.0, self.dims.1);
        BipartiteState {
            dims: (self.dims.1, self.dims.0),
            op: self.op.conjugate_by(&s),
        }
    }

    pub fn max_abs_diff(&self, other: &BipartiteState) -> f64 {
        if self.dims != other.dims {
            return f64::INFINITY;
        }
        self.op.max_abs_diff(&other.op)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_hermitian, random_unit_vector, rng_from_seed};
    use crate::states::singlet;

    #[test]
    fn identity_tensor_identity() {
        let id = tensor(&HermitianOperator::identity(2), &HermitianOperator::identity(3));
        assert_eq!(id, HermitianOperator::identity(6));
    }

    #[test]
    fn basis_tensor_is_a_major() {
        let p = tensor(
            &HermitianOperator::basis_projector(2, 0),
            &HermitianOperator::basis_projector(2, 1),
        );
        assert_eq!(p, HermitianOperator::basis_projector(4, 1));
    }

    #[test]
    fn tensor_trace_multiplies() {
        let mut rng = rng_from_seed(11);
        for _ in 0..100 {
            let x = random_hermitian(2, &mut rng);
            let y = random_hermitian(3, &mut rng);
            let t = tensor(&x, &y);
            assert!((t.trace() - x.trace() * y.trace()).abs() < 1e-12);
        }
    }

    #[test]
    fn tensor_is_associative() {
        let mut rng = rng_from_seed(12);
        let a = random_hermitian(2, &mut rng);
        let b = random_hermitian(3, &mut rng);
        let cc = random_hermitian(2, &mut rng);
        assert!(tensor(&tensor(&a, &b), &cc).max_abs_diff(&tensor(&a, &tensor(&b, &cc))) < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMat::identity(3, 3);
        m[(0, 2)] = c(0.0, 1e-6);
        match HermitianOperator::new(m) {
            Err(Error::NotHermitian { row, col, .. }) => assert_eq!((row, col), (0, 2)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(HermitianOperator::new(CMat::zeros(2, 3)).is_err());
    }

    #[test]
    fn singlet_marginal_is_maximally_mixed() {
        let s = singlet();
        let half = HermitianOperator::identity(2).scale(0.5);
        assert!(s.partial_trace(Party::A).max_abs_diff(&half) < 1e-15);
        assert!(s.partial_trace(Party::B).max_abs_diff(&half) < 1e-15);
    }

    #[test]
    fn partial_trace_of_product() {
        let mut rng = rng_from_seed(13);
        for _ in 0..20 {
            let x = random_hermitian(3, &mut rng);
            let y = random_hermitian(2, &mut rng);
            let xy = tensor(&x, &y);
            let got_b = partial_trace(&xy, (3, 2), Party::A).unwrap();
            assert!(got_b.max_abs_diff(&y.scale(x.trace())) < 1e-12);
            let got_a = partial_trace(&xy, (3, 2), Party::B).unwrap();
            assert!(got_a.max_abs_diff(&x.scale(y.trace())) < 1e-12);
        }
    }

    #[test]
    fn partial_trace_rejects_bad_split() {
        let id = HermitianOperator::identity(6);
        assert!(matches!(partial_trace(&id, (4, 2), Party::A), Err(Error::Dimension(_))));
    }

    #[test]
    fn partial_transpose_of_singlet() {
        let pt = singlet().partial_transpose(Party::B);
        assert!((pt.min_eigenvalue().unwrap() + 0.5).abs() < 1e-12);
        assert!((pt.trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn partial_transpose_is_exact_involution() {
        let mut rng = rng_from_seed(14);
        let h = random_hermitian(6, &mut rng);
        for side in [Party::A, Party::B] {
            let twice = partial_transpose(&partial_transpose(&h, (2, 3), side).unwrap(), (2, 3), side).unwrap();
            assert_eq!(twice, h);
        }
    }

    #[test]
    fn product_state_is_ppt() {
        let mut rng = rng_from_seed(15);
        let a = HermitianOperator::projector(&random_unit_vector(2, &mut rng));
        let b = HermitianOperator::projector(&random_unit_vector(3, &mut rng));
        let st = BipartiteState::new(tensor(&a, &b), 2, 3).unwrap();
        assert!(st.partial_transpose(Party::B).min_eigenvalue().unwrap() > -1e-12);
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert!((HermitianOperator::identity(4).min_eigenvalue().unwrap() - 1.0).abs() < 1e-15);
        let d = HermitianOperator::from_real_diagonal(&[3.0, -2.0, 5.0]);
        assert!((d.min_eigenvalue().unwrap() + 2.0).abs() < 1e-15);
    }

    #[test]
    fn min_eigenvalue_bounds_rayleigh_quotient() {
        let mut rng = rng_from_seed(16);
        let h = random_hermitian(5, &mut rng);
        let lmin = h.min_eigenvalue().unwrap();
        for _ in 0..100 {
            let v = random_unit_vector(5, &mut rng);
            let q = (v.adjoint() * h.matrix() * &v)[(0, 0)].re;
            assert!(lmin <= q + 1e-12);
        }
    }

    #[test]
    fn swap_parties_round_trip() {
        let mut rng = rng_from_seed(17);
        let st = crate::random::random_state(2, 3, &mut rng);
        let back = st.swap_parties().swap_parties();
        assert!(back.max_abs_diff(&st) < 1e-15);
        let sw = st.swap_parties();
        assert!(sw.marginal(Party::A).max_abs_diff(&st.marginal(Party::B)) < 1e-14);
    }
}

//! State families: singlet, Werner, flag extensions, erasure states and the
//! one-way and hidden-steering constructions, plus PPT entanglement tests.
//!
//! The flag dimension appended by [`flag_extend`] is always the last basis
//! index of the extended party, so a qutrit `|2>` flag sits at index 2.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::qmat::{cr, embedding, swap_matrix, tensor, BipartiteState, CMat, CVec, HermitianOperator, Party, PSD_TOL};

pub fn ket(dim: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(dim);
    v[k] = cr(1.0);
    v
}

/// `(|01> - |10>) / sqrt(2)`.
pub fn singlet_vector() -> CVec {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_vec(vec![cr(0.0), cr(s), cr(-s), cr(0.0)])
}

pub fn singlet() -> BipartiteState {
    BipartiteState::new(HermitianOperator::projector(&singlet_vector()), 2, 2).expect("singlet is a state")
}

/// Conjugates a `from` system into a larger `to` system by embedding each
/// factor into its leading basis vectors.
pub fn embed_local(op: &HermitianOperator, from: (usize, usize), to: (usize, usize)) -> HermitianOperator {
    let k = embedding(from.0, to.0).kronecker(&embedding(from.1, to.1));
    op.conjugate_by(&k)
}

/// Projector onto the antisymmetric subspace, `(I - SWAP) / 2`.
pub fn antisymmetric_projector(d: usize) -> HermitianOperator {
    let n = d * d;
    let id = CMat::identity(n, n);
    HermitianOperator::new((id - swap_matrix(d, d)).map(|z| z * 0.5)).expect("real symmetric")
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct WernerParams {
    pub d: usize,
    pub alpha: f64,
}

impl WernerParams {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        werner(d, alpha)?;
        Ok(Self { d, alpha })
    }

    pub fn state(&self) -> BipartiteState {
        werner(self.d, self.alpha).expect("validated at construction")
    }
}

/// `alpha * 2 P_anti / (d(d-1)) + (1 - alpha) I / d^2`.
pub fn werner(d: usize, alpha: f64) -> Result<BipartiteState> {
    if d < 2 {
        return Err(Error::Domain(format!("Werner dimension must be at least 2, got {d}")));
    }
    if !alpha.is_finite() {
        return Err(Error::Domain(format!("Werner parameter must be finite, got {alpha}")));
    }
    let df = d as f64;
    let anti = antisymmetric_projector(d).scale(2.0 * alpha / (df * (df - 1.0)));
    let noise = HermitianOperator::identity(d * d).scale((1.0 - alpha) / (df * df));
    let op = &anti + &noise;
    let min = op.min_eigenvalue()?;
    if min < -PSD_TOL {
        return Err(Error::Domain(format!(
            "alpha = {alpha} gives a non-positive Werner operator (min eigenvalue {min:.3e})"
        )));
    }
    BipartiteState::new(op, d, d)
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct WernerThresholds {
    /// Entangled strictly above this value.
    pub entanglement: f64,
    /// Known POVM local-model bound.
    pub povm_lhs: f64,
}

/// `1/(d+1)` and `(3d-1)/(d+1) (d-1)^(d-1) d^(-d)`.
///
/// The second value is formed as a single ratio of exact integers while
/// they fit in `u128`, so `d = 2` yields exactly `5.0 / 12.0`.
pub fn werner_thresholds(d: usize) -> Result<WernerThresholds> {
    if d < 2 {
        return Err(Error::Domain(format!("Werner dimension must be at least 2, got {d}")));
    }
    let entanglement = 1.0 / (d as f64 + 1.0);
    let exact = || -> Option<(u128, u128)> {
        let d = d as u128;
        let num = (3 * d - 1).checked_mul((d - 1).checked_pow((d - 1) as u32)?)?;
        let den = (d + 1).checked_mul(d.checked_pow(d as u32)?)?;
        Some((num, den))
    };
    let povm_lhs = match exact() {
        Some((num, den)) => num as f64 / den as f64,
        None => {
            let df = d as f64;
            (3.0 * df - 1.0) / (df + 1.0) * ((df - 1.0) / df).powi(d as i32 - 1) / df
        }
    };
    Ok(WernerThresholds {
        entanglement,
        povm_lhs,
    })
}

/// Appends an orthogonal flag level to `side`:
/// `(rho + d P_flag (x) rho_other) / (d + 1)` where `d` is the local
/// dimension of `side` before extension and `rho_other` is the other
/// party's reduced state.
pub fn flag_extend(rho: &BipartiteState, side: Party) -> BipartiteState {
    let (da, db) = rho.dims();
    let (to, d) = match side {
        Party::A => ((da + 1, db), da),
        Party::B => ((da, db + 1), db),
    };
    let embedded = embed_local(rho.op(), (da, db), to);
    let flag_term = match side {
        Party::A => tensor(&HermitianOperator::basis_projector(da + 1, da), &rho.marginal(Party::B)),
        Party::B => tensor(&rho.marginal(Party::A), &HermitianOperator::basis_projector(db + 1, db)),
    };
    let df = d as f64;
    let op = (&embedded + &flag_term.scale(df)).scale(1.0 / (df + 1.0));
    BipartiteState::new(op, to.0, to.1).expect("flag extension preserves positivity and trace")
}

/// Compresses `side` onto its leading `k` basis vectors and renormalizes.
/// This is the local filter that undoes [`flag_extend`].
pub fn compress(rho: &BipartiteState, side: Party, k: usize) -> Result<BipartiteState> {
    let (da, db) = rho.dims();
    let local = rho.dim_of(side);
    if k == 0 || k > local {
        return Err(Error::Dimension(format!("cannot compress dimension {local} to {k}")));
    }
    let (ka, kb) = match side {
        Party::A => (embedding(k, da).adjoint(), CMat::identity(db, db)),
        Party::B => (CMat::identity(da, da), embedding(k, db).adjoint()),
    };
    let out = rho.op().conjugate_by(&ka.kronecker(&kb));
    let (na, nb) = match side {
        Party::A => (k, db),
        Party::B => (da, k),
    };
    let tr = out.trace();
    if tr <= 1e-12 {
        return Err(Error::DegenerateFilter(tr));
    }
    BipartiteState::from_unnormalized(out, na, nb)
}

/// The two-qutrit family
/// `[q psi- + (3-q) I2/2 (x) |2><2| + 2q |2><2| (x) I2/2 + (6-2q) |22><22|] / 9`.
pub fn rho_g(q: f64) -> Result<BipartiteState> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Domain(format!("q must lie in (0, 1], got {q}")));
    }
    let psi = embed_local(singlet().op(), (2, 2), (3, 3));
    let qubit_half = HermitianOperator::from_real_diagonal(&[0.5, 0.5, 0.0]);
    let flag = HermitianOperator::basis_projector(3, 2);
    let terms = [
        psi.scale(q),
        tensor(&qubit_half, &flag).scale(3.0 - q),
        tensor(&flag, &qubit_half).scale(2.0 * q),
        tensor(&flag, &flag).scale(6.0 - 2.0 * q),
    ];
    let mut op = HermitianOperator::zeros(9);
    for t in &terms {
        op = &op + t;
    }
    BipartiteState::new(op.scale(1.0 / 9.0), 3, 3)
}

/// `alpha psi- + (1 - alpha) I2/2 (x) |2><2|` on `2 x 3` when `steered_side`
/// is B; the mirrored `3 x 2` state when it is A.
pub fn erasure(alpha: f64, steered_side: Party) -> Result<BipartiteState> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("erasure alpha must lie in [0, 1], got {alpha}")));
    }
    let half = HermitianOperator::identity(2).scale(0.5);
    let flag = HermitianOperator::basis_projector(3, 2);
    let (dims, erased) = match steered_side {
        Party::B => ((2, 3), tensor(&half, &flag)),
        Party::A => ((3, 2), tensor(&flag, &half)),
    };
    let psi = embed_local(singlet().op(), (2, 2), dims);
    let op = &psi.scale(alpha) + &erased.scale(1.0 - alpha);
    BipartiteState::new(op, dims.0, dims.1)
}

/// `[psi- + 3/5 |1><1| (x) I2/2 + 2/5 I2/2 (x) |0><0|] / 2`.
pub fn rho_1w() -> BipartiteState {
    let half = HermitianOperator::identity(2).scale(0.5);
    let p0 = HermitianOperator::basis_projector(2, 0);
    let p1 = HermitianOperator::basis_projector(2, 1);
    let op = &(&singlet().op().clone() + &tensor(&p1, &half).scale(0.6)) + &tensor(&half, &p0).scale(0.4);
    BipartiteState::new(op.scale(0.5), 2, 2).expect("rho_1W is a state")
}

/// Flag extension of [`rho_1w`] on Alice's side,
/// `[rho_1W + 2 |2><2| (x) rho_B] / 3` with `rho_B = diag(3/5, 2/5)`.
pub fn rho_1w_prime() -> BipartiteState {
    flag_extend(&rho_1w(), Party::A)
}

/// Werner state at `alpha = (d-1)/d`, flag-extended first on A then on B.
/// Normalized to unit trace, i.e. prefactor `1/(d+1)^2`.
pub fn rho_hs(d: usize) -> Result<BipartiteState> {
    let w = werner(d, (d as f64 - 1.0) / d as f64)?;
    Ok(flag_extend(&flag_extend(&w, Party::A), Party::B))
}

/// `[psi- + (2/d) I4/4] / (1 + 2/d)`, the two-qubit state obtained from
/// [`rho_hs`] after qubit filters on both sides.
pub fn hidden_steering_target(d: usize) -> Result<BipartiteState> {
    if d < 2 {
        return Err(Error::Domain(format!("dimension must be at least 2, got {d}")));
    }
    let r = 2.0 / d as f64;
    let op = &singlet().op().clone() + &HermitianOperator::identity(4).scale(r / 4.0);
    BipartiteState::new(op.scale(1.0 / (1.0 + r)), 2, 2)
}

pub fn is_ppt(rho: &BipartiteState) -> Result<bool> {
    Ok(rho.partial_transpose(Party::B).min_eigenvalue()? >= -PSD_TOL)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntanglementVerdict {
    /// Negative partial transpose, hence entangled.
    Npt,
    /// PPT in total dimension at most 6, hence separable.
    PptSeparable,
    /// PPT in higher dimension: no conclusion.
    PptInconclusive,
}

impl EntanglementVerdict {
    pub fn label(self) -> &'static str {
        match self {
            EntanglementVerdict::Npt => "NPT (entangled)",
            EntanglementVerdict::PptSeparable => "PPT (separable)",
            EntanglementVerdict::PptInconclusive => "PPT (inconclusive for entanglement)",
        }
    }
}

pub fn entanglement_verdict(rho: &BipartiteState) -> Result<EntanglementVerdict> {
    if !is_ppt(rho)? {
        Ok(EntanglementVerdict::Npt)
    } else if rho.dim_a() * rho.dim_b() <= 6 {
        Ok(EntanglementVerdict::PptSeparable)
    } else {
        Ok(EntanglementVerdict::PptInconclusive)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_state, rng_from_seed};

    const EXACT: f64 = 1e-12;

    fn assert_valid(st: &BipartiteState) {
        assert!((st.op().trace() - 1.0).abs() <= 1e-10);
        assert!(st.op().min_eigenvalue().unwrap() >= -1e-9);
    }

    #[test]
    fn singlet_properties() {
        let s = singlet();
        assert!((s.op().trace() - 1.0).abs() < EXACT);
        let half = HermitianOperator::identity(2).scale(0.5);
        assert!(s.marginal(Party::A).max_abs_diff(&half) < EXACT);
        assert!(s.marginal(Party::B).max_abs_diff(&half) < EXACT);
        let pt = s.partial_transpose(Party::B).min_eigenvalue().unwrap();
        assert!((pt + 0.5).abs() < EXACT);
    }

    #[test]
    fn two_qubit_werner_is_singlet_plus_noise() {
        for alpha in [0.0, 0.3, 0.7, 1.0] {
            let w = werner(2, alpha).unwrap();
            let expect = &singlet().op().scale(alpha) + &HermitianOperator::identity(4).scale((1.0 - alpha) / 4.0);
            assert!(w.op().max_abs_diff(&expect) < EXACT);
        }
    }

    #[test]
    fn werner_zero_is_maximally_mixed() {
        for d in 2..5 {
            let w = werner(d, 0.0).unwrap();
            let id = HermitianOperator::identity(d * d).scale(1.0 / (d * d) as f64);
            assert!(w.op().max_abs_diff(&id) < EXACT);
        }
    }

    #[test]
    fn werner_is_swap_invariant() {
        let w = werner(3, 0.9).unwrap();
        let swapped = w.op().conjugate_by(&swap_matrix(3, 3));
        assert!(w.op().max_abs_diff(&swapped) < EXACT);
    }

    #[test]
    fn werner_rejects_non_positive_alpha() {
        assert!(matches!(werner(2, 1.5), Err(Error::Domain(_))));
        assert!(matches!(werner(3, -2.0), Err(Error::Domain(_))));
        assert!(matches!(werner(1, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn thresholds_at_d2() {
        let t = werner_thresholds(2).unwrap();
        assert_eq!(t.entanglement, 1.0 / 3.0);
        assert_eq!(t.povm_lhs, 5.0 / 12.0);
    }

    #[test]
    fn threshold_window_nonempty() {
        for d in 2..=6 {
            let t = werner_thresholds(d).unwrap();
            let df = d as f64;
            let direct = (3.0 * df - 1.0) / (df + 1.0) * (df - 1.0).powi(d as i32 - 1) * df.powi(-(d as i32));
            assert!((t.povm_lhs - direct).abs() < 1e-15);
            assert!(t.povm_lhs > t.entanglement, "d = {d}");
        }
    }

    #[test]
    fn werner_ppt_transition() {
        for d in [2usize, 3] {
            let thr = 1.0 / (d as f64 + 1.0);
            for k in 1..100 {
                let a = 0.01 * k as f64;
                let ppt = is_ppt(&werner(d, a).unwrap()).unwrap();
                assert_eq!(ppt, a <= thr + 1e-9, "d = {d}, alpha = {a}");
            }
        }
    }

    #[test]
    fn ppt_examples() {
        assert!(is_ppt(&werner(2, 0.3).unwrap()).unwrap());
        assert!(!is_ppt(&werner(2, 0.4).unwrap()).unwrap());
        let mut rng = rng_from_seed(3);
        let a = crate::random::random_density(2, &mut rng);
        let b = crate::random::random_density(3, &mut rng);
        assert!(is_ppt(&BipartiteState::new(tensor(&a, &b), 2, 3).unwrap()).unwrap());
        assert_eq!(
            entanglement_verdict(&werner(3, 0.2).unwrap()).unwrap(),
            EntanglementVerdict::PptInconclusive
        );
    }

    #[test]
    fn flag_extension_of_entangled_werner() {
        let ext = flag_extend(&werner(2, 0.4).unwrap(), Party::A);
        assert_eq!(ext.dims(), (3, 2));
        assert_valid(&ext);
        assert!(!is_ppt(&ext).unwrap());
    }

    #[test]
    fn flag_extension_filters_back() {
        let mut rng = rng_from_seed(5);
        for _ in 0..20 {
            let rho = random_state(2, 3, &mut rng);
            for side in [Party::A, Party::B] {
                let ext = flag_extend(&rho, side);
                assert_valid(&ext);
                let k = rho.dim_of(side);
                let back = compress(&ext, side, k).unwrap();
                assert!(back.max_abs_diff(&rho) < EXACT);
            }
        }
    }

    #[test]
    fn rho_g_is_valid_with_known_marginals() {
        for q in [0.1, 0.5, 1.0] {
            let g = rho_g(q).unwrap();
            assert_valid(&g);
            // Term-by-term reductions of the four summands.
            let ra = HermitianOperator::from_real_diagonal(&[1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]);
            let rb = HermitianOperator::from_real_diagonal(&[q / 6.0, q / 6.0, 1.0 - q / 3.0]);
            assert!(g.marginal(Party::A).max_abs_diff(&ra) < EXACT);
            assert!(g.marginal(Party::B).max_abs_diff(&rb) < EXACT);
        }
        assert!(rho_g(0.0).is_err());
        assert!(rho_g(1.2).is_err());
    }

    #[test]
    fn erasure_limits() {
        let one = erasure(1.0, Party::B).unwrap();
        assert_eq!(one.dims(), (2, 3));
        let embedded = embed_local(singlet().op(), (2, 2), (2, 3));
        assert!(one.op().max_abs_diff(&embedded) < EXACT);
        let zero = erasure(0.0, Party::B).unwrap();
        let prod = tensor(&HermitianOperator::identity(2).scale(0.5), &HermitianOperator::basis_projector(3, 2));
        assert!(zero.op().max_abs_diff(&prod) < EXACT);
        let a = erasure(0.25, Party::A).unwrap();
        assert!(a.max_abs_diff(&erasure(0.25, Party::B).unwrap().swap_parties()) < EXACT);
        assert!(erasure(1.1, Party::A).is_err());
    }

    #[test]
    fn rho_1w_marginal() {
        let r = rho_1w();
        assert_valid(&r);
        let rb = HermitianOperator::from_real_diagonal(&[0.6, 0.4]);
        assert!(r.partial_trace(Party::A).max_abs_diff(&rb) < EXACT);
    }

    #[test]
    fn rho_1w_prime_properties() {
        let p = rho_1w_prime();
        assert_eq!(p.dims(), (3, 2));
        assert_valid(&p);
        assert!(!is_ppt(&p).unwrap());
        let back = compress(&p, Party::A, 2).unwrap();
        assert!(back.max_abs_diff(&rho_1w()) < EXACT);
        // Same extension built directly from its blocks.
        let rb = HermitianOperator::from_real_diagonal(&[0.6, 0.4]);
        let direct = (&embed_local(rho_1w().op(), (2, 2), (3, 2))
            + &tensor(&HermitianOperator::basis_projector(3, 2), &rb).scale(2.0))
            .scale(1.0 / 3.0);
        assert!(p.op().max_abs_diff(&direct) < EXACT);
    }

    #[test]
    fn rho_hs_matches_four_term_structure() {
        for d in 3..=5 {
            let hs = rho_hs(d).unwrap();
            assert_eq!(hs.dims(), (d + 1, d + 1));
            assert_valid(&hs);
            let df = d as f64;
            let w = werner(d, (df - 1.0) / df).unwrap();
            let flag = HermitianOperator::basis_projector(d + 1, d);
            let mixed = HermitianOperator::from_real_diagonal(
                &(0..=d).map(|i| if i < d { 1.0 / df } else { 0.0 }).collect::<Vec<_>>(),
            );
            let mut expect = embed_local(w.op(), (d, d), (d + 1, d + 1));
            expect = &expect + &(&tensor(&flag, &mixed) + &tensor(&mixed, &flag)).scale(df);
            expect = &expect + &tensor(&flag, &flag).scale(df * df);
            let expect = expect.scale(1.0 / ((df + 1.0) * (df + 1.0)));
            assert!(hs.op().max_abs_diff(&expect) < EXACT);
        }
    }

    #[test]
    fn rho_hs_swap_symmetry() {
        let hs = rho_hs(3).unwrap();
        let sw = hs.op().conjugate_by(&swap_matrix(4, 4));
        assert!(hs.op().max_abs_diff(&sw) < EXACT);
    }

    #[test]
    fn hidden_target_is_qubit_werner() {
        for d in 2..7 {
            let t = hidden_steering_target(d).unwrap();
            assert_valid(&t);
            let w = werner(2, d as f64 / (d as f64 + 2.0)).unwrap();
            assert!(t.max_abs_diff(&w) < EXACT);
        }
        let t3 = hidden_steering_target(3).unwrap();
        let sv = singlet_vector();
        let overlap = (sv.adjoint() * t3.matrix() * &sv)[(0, 0)].re;
        // visibility 3/5 plus the noise overlap (1 - 3/5) / 4
        assert!((overlap - (0.6 + 0.1)).abs() < EXACT);
    }
}

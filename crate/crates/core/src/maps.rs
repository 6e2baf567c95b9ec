//! Completely positive maps in Kraus form: local filtering of states and
//! assemblages, and dual maps.

use crate::error::{Error, Result};
use crate::meas::Assemblage;
use crate::qmat::{embedding, BipartiteState, CMat, HermitianOperator, Party, PSD_TOL};

/// Success probabilities at or below this are rejected.
pub const MIN_SUCCESS_PROBABILITY: f64 = 1e-12;

/// A completely positive map `X -> sum_i K_i X K_i^dag`, with each `K_i` of
/// shape `dim_out x dim_in`. No trace condition.
#[derive(Clone, Debug, PartialEq)]
pub struct CpMap {
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<CMat>,
}

impl CpMap {
    pub fn new(kraus: Vec<CMat>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::Dimension("map needs at least one Kraus operator".into()))?;
        let (dim_out, dim_in) = first.shape();
        if dim_in == 0 || dim_out == 0 {
            return Err(Error::Dimension("Kraus operators must be non-empty".into()));
        }
        if let Some(k) = kraus.iter().find(|k| k.shape() != (dim_out, dim_in)) {
            return Err(Error::Dimension(format!(
                "Kraus operator of shape {:?}, expected {:?}",
                k.shape(),
                (dim_out, dim_in)
            )));
        }
        Ok(Self { dim_in, dim_out, kraus })
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn kraus(&self) -> &[CMat] {
        &self.kraus
    }

    pub fn apply(&self, x: &HermitianOperator) -> Result<HermitianOperator> {
        if x.dim() != self.dim_in {
            return Err(Error::Dimension(format!(
                "map expects dimension {}, got {}",
                self.dim_in,
                x.dim()
            )));
        }
        let mut acc = HermitianOperator::zeros(self.dim_out);
        for k in &self.kraus {
            acc = &acc + &x.conjugate_by(k);
        }
        Ok(acc)
    }

    /// Embeds the map on one side of a bipartite system as `I (x) K_i` or
    /// `K_i (x) I`.
    pub fn apply_local(&self, op: &HermitianOperator, dims: (usize, usize), side: Party) -> Result<HermitianOperator> {
        let (da, db) = dims;
        let local = match side {
            Party::A => da,
            Party::B => db,
        };
        if local != self.dim_in || op.dim() != da * db {
            return Err(Error::Dimension(format!(
                "map on dimension {} cannot act on side {side} of a {da}x{db} operator",
                self.dim_in
            )));
        }
        let mut acc = HermitianOperator::zeros(self.local_output_dim(dims, side));
        for k in &self.kraus {
            let full = match side {
                Party::A => k.kronecker(&CMat::identity(db, db)),
                Party::B => CMat::identity(da, da).kronecker(k),
            };
            acc = &acc + &op.conjugate_by(&full);
        }
        Ok(acc)
    }

    fn local_output_dim(&self, dims: (usize, usize), side: Party) -> usize {
        match side {
            Party::A => self.dim_out * dims.1,
            Party::B => dims.0 * self.dim_out,
        }
    }

    /// `sum_i K_i^dag K_i`.
    pub fn effect(&self) -> HermitianOperator {
        let mut acc = CMat::zeros(self.dim_in, self.dim_in);
        for k in &self.kraus {
            acc += k.adjoint() * k;
        }
        HermitianOperator::hermitize(acc)
    }
}

/// Trace non-increasing CP map: `sum_i K_i^dag K_i <= I`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausMap(CpMap);

impl KrausMap {
    pub fn new(kraus: Vec<CMat>) -> Result<Self> {
        let map = CpMap::new(kraus)?;
        let gap = &HermitianOperator::identity(map.dim_in) - &map.effect();
        let min = gap.min_eigenvalue()?;
        if min < -PSD_TOL {
            return Err(Error::NotTraceNonIncreasing(min));
        }
        Ok(Self(map))
    }

    pub fn identity(d: usize) -> Self {
        Self(CpMap::new(vec![CMat::identity(d, d)]).expect("identity Kraus"))
    }

    /// Single-Kraus filter `X -> F X F^dag`.
    pub fn filter(f: CMat) -> Result<Self> {
        Self::new(vec![f])
    }

    /// Projection of `C^dim` onto its leading `k` basis vectors, keeping
    /// the output in dimension `k`.
    pub fn subspace_filter(k: usize, dim: usize) -> Self {
        Self::filter(embedding(k, dim).adjoint()).expect("partial isometry is a contraction")
    }

    /// `|0><0| + |1><1|` as a map `C^dim -> C^2`.
    pub fn qubit_filter(dim: usize) -> Self {
        Self::subspace_filter(2, dim)
    }

    pub fn as_cp(&self) -> &CpMap {
        &self.0
    }

    pub fn dim_in(&self) -> usize {
        self.0.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.0.dim_out
    }

    pub fn apply(&self, x: &HermitianOperator) -> Result<HermitianOperator> {
        self.0.apply(x)
    }
}

impl AsRef<CpMap> for KrausMap {
    fn as_ref(&self) -> &CpMap {
        &self.0
    }
}

impl AsRef<CpMap> for CpMap {
    fn as_ref(&self) -> &CpMap {
        self
    }
}

/// Normalized local filtering outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct Filtered {
    pub state: BipartiteState,
    /// `tr[(I (x) Lambda)(rho)]`.
    pub p_f: f64,
}

/// `rho_F = (I (x) Lambda)(rho) / p_F` with the map on `side`.
pub fn apply_to_state(rho: &BipartiteState, map: &KrausMap, side: Party) -> Result<Filtered> {
    let out = map.0.apply_local(rho.op(), rho.dims(), side)?;
    let p_f = out.trace();
    if p_f <= MIN_SUCCESS_PROBABILITY {
        return Err(Error::DegenerateFilter(p_f));
    }
    let (da, db) = rho.dims();
    let dims = match side {
        Party::A => (map.dim_out(), db),
        Party::B => (da, map.dim_out()),
    };
    let state = BipartiteState::new(out.scale(1.0 / p_f), dims.0, dims.1)?;
    Ok(Filtered { state, p_f })
}

/// `sigma~_{a|x} = Lambda(sigma_{a|x}) / p_F`, `p_F = tr Lambda(rho_B)`.
pub fn filter_assemblage(sigma: &Assemblage, map: &KrausMap) -> Result<(Assemblage, f64)> {
    if map.dim_in() != sigma.dim_b() {
        return Err(Error::Dimension(format!(
            "map acts on dimension {}, assemblage on {}",
            map.dim_in(),
            sigma.dim_b()
        )));
    }
    let p_f = map.apply(&sigma.marginal())?.trace();
    if p_f <= MIN_SUCCESS_PROBABILITY {
        return Err(Error::DegenerateFilter(p_f));
    }
    let members = sigma
        .members()
        .iter()
        .map(|row| row.iter().map(|m| map.apply(m).map(|o| o.scale(1.0 / p_f))).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok((Assemblage::new(members)?, p_f))
}

/// Adjoint map with Kraus operators `K_i^dag`, satisfying
/// `tr[X Lambda(Y)] = tr[Lambda^dag(X) Y]`.
pub fn dual_map(map: &impl AsRef<CpMap>) -> CpMap {
    let m = map.as_ref();
    CpMap {
        dim_in: m.dim_out,
        dim_out: m.dim_in,
        kraus: m.kraus.iter().map(|k| k.adjoint()).collect(),
    }
}

/// Filters Bob's side only: `(I (x) F_B) rho (I (x) F_B^dag)` normalized.
pub fn hidden_to_oneway(rho: &BipartiteState, f_b: &KrausMap) -> Result<BipartiteState> {
    apply_to_state(rho, f_b, Party::B).map(|f| f.state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meas::{assemblage, standard_family, FamilyKind, MeasurementFamily, Povm};
    use crate::qmat::{cr, tensor};
    use crate::random::{random_contraction, random_hermitian, random_povm_elements, random_state, rng_from_seed};
    use crate::states::{erasure, hidden_steering_target, rho_g, rho_hs, singlet, werner};

    #[test]
    fn identity_map_is_trivial() {
        let mut rng = rng_from_seed(31);
        let rho = random_state(2, 3, &mut rng);
        let f = apply_to_state(&rho, &KrausMap::identity(3), Party::B).unwrap();
        assert!(f.state.max_abs_diff(&rho) < 1e-14);
        assert!((f.p_f - 1.0).abs() < 1e-14);
        let fam = standard_family(&FamilyKind::Pauli3).unwrap();
        let sig = assemblage(&rho, &fam).unwrap();
        let (out, p) = filter_assemblage(&sig, &KrausMap::identity(3)).unwrap();
        assert!(out.max_abs_diff(&sig) < 1e-14);
        assert!((p - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rho_g_filter_identities() {
        for q in [0.1, 0.5, 1.0] {
            let g = rho_g(q).unwrap();
            let fa = apply_to_state(&g, &KrausMap::qubit_filter(3), Party::A).unwrap();
            assert!(fa.state.max_abs_diff(&erasure(q / 3.0, Party::B).unwrap()) < 1e-12);
            assert!((fa.p_f - 1.0 / 3.0).abs() < 1e-12);
            let fb = apply_to_state(&g, &KrausMap::qubit_filter(3), Party::B).unwrap();
            assert!(fb.state.max_abs_diff(&erasure(1.0 / 3.0, Party::A).unwrap()) < 1e-12);
            assert!((fb.p_f - q / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_expanding_maps_and_degenerate_filters() {
        let k = CMat::identity(2, 2).map(|z| z * 1.1);
        assert!(matches!(KrausMap::filter(k), Err(Error::NotTraceNonIncreasing(_))));
        // filter onto |2> kills a state supported on the qubit block
        let mut onto_flag = CMat::zeros(1, 3);
        onto_flag[(0, 2)] = cr(1.0);
        let f = KrausMap::filter(onto_flag).unwrap();
        let st = erasure(1.0, Party::B).unwrap();
        assert!(matches!(apply_to_state(&st, &f, Party::B), Err(Error::DegenerateFilter(_))));
    }

    #[test]
    fn filter_commutes_with_measurement() {
        let mut rng = rng_from_seed(32);
        for _ in 0..100 {
            let rho = random_state(2, 3, &mut rng);
            let fam = MeasurementFamily::new(vec![
                Povm::new(random_povm_elements(2, 2, &mut rng)).unwrap(),
                Povm::new(random_povm_elements(2, 3, &mut rng)).unwrap(),
            ])
            .unwrap();
            let map = KrausMap::new(vec![random_contraction(2, 3, 0.7, &mut rng), random_contraction(2, 3, 0.7, &mut rng)]).unwrap();
            let (via_sigma, p1) = filter_assemblage(&assemblage(&rho, &fam).unwrap(), &map).unwrap();
            let f = apply_to_state(&rho, &map, Party::B).unwrap();
            let via_state = assemblage(&f.state, &fam).unwrap();
            assert!(via_sigma.max_abs_diff(&via_state) < 1e-10);
            assert!((p1 - f.p_f).abs() < 1e-11);
            let from_marginal = map.apply(&rho.marginal(Party::B)).unwrap().trace();
            assert!((from_marginal - f.p_f).abs() < 1e-11);
        }
    }

    #[test]
    fn erasure_bob_filter_gives_singlet_assemblage() {
        let fam = standard_family(&FamilyKind::Pauli3).unwrap();
        for alpha in [0.2, 0.7] {
            let sig = assemblage(&erasure(alpha, Party::B).unwrap(), &fam).unwrap();
            let (out, p) = filter_assemblage(&sig, &KrausMap::qubit_filter(3)).unwrap();
            assert!(out.max_abs_diff(&assemblage(&singlet(), &fam).unwrap()) < 1e-12);
            assert!((p - alpha).abs() < 1e-12);
        }
    }

    #[test]
    fn dual_map_identities() {
        let mut rng = rng_from_seed(33);
        let id = KrausMap::identity(3);
        assert_eq!(dual_map(&id), *id.as_cp());
        let map = KrausMap::new(vec![random_contraction(2, 3, 0.6, &mut rng), random_contraction(2, 3, 0.6, &mut rng)]).unwrap();
        let dual = dual_map(&map);
        let back = dual_map(&dual);
        for _ in 0..100 {
            let x = random_hermitian(2, &mut rng);
            let y = random_hermitian(3, &mut rng);
            let lhs = x.trace_product(&map.apply(&y).unwrap());
            let rhs = dual.apply(&x).unwrap().trace_product(&y);
            assert!((lhs - rhs).abs() < 1e-11);
            assert!(back.apply(&y).unwrap().max_abs_diff(&map.apply(&y).unwrap()) < 1e-14);
        }
    }

    #[test]
    fn hidden_steering_double_filter() {
        for d in 3..=5 {
            let hs = rho_hs(d).unwrap();
            let f = KrausMap::qubit_filter(d + 1);
            let one_way = hidden_to_oneway(&hs, &f).unwrap();
            assert_eq!(one_way.dims(), (d + 1, 2));
            let both = apply_to_state(&one_way, &f, Party::A).unwrap().state;
            assert!(both.max_abs_diff(&hidden_steering_target(d).unwrap()) < 1e-12);
        }
        let hs = rho_hs(3).unwrap();
        assert!(hidden_to_oneway(&hs, &KrausMap::identity(4)).unwrap().max_abs_diff(&hs) < 1e-14);
    }

    #[test]
    fn werner_bob_filter_matches_direct_construction() {
        // <ij|rho_W|kl> = c1 d_ik d_jl - c2 d_il d_jk, then keep j, l < 2
        for d in 3..=5 {
            let df = d as f64;
            let alpha = (df - 1.0) / df;
            let c2 = alpha / (df * (df - 1.0));
            let c1 = c2 + (1.0 - alpha) / (df * df);
            let norm = 2.0 * df * c1 - 2.0 * c2;
            let n = 2 * d;
            let direct = CMat::from_fn(n, n, |r, s| {
                let (i, j, k, l) = (r / 2, r % 2, s / 2, s % 2);
                let mut v = 0.0;
                if i == k && j == l {
                    v += c1;
                }
                if i == l && j == k {
                    v -= c2;
                }
                cr(v / norm)
            });
            let filtered = hidden_to_oneway(&werner(d, alpha).unwrap(), &KrausMap::qubit_filter(d)).unwrap();
            let diff = (filtered.matrix() - direct).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(diff < 1e-13, "d = {d}: {diff}");
        }
    }

    #[test]
    fn apply_local_matches_tensor_structure() {
        let mut rng = rng_from_seed(34);
        let a = crate::random::random_density(2, &mut rng);
        let b = crate::random::random_density(3, &mut rng);
        let map = KrausMap::filter(random_contraction(2, 3, 1.0, &mut rng)).unwrap();
        let out = map.as_cp().apply_local(&tensor(&a, &b), (2, 3), Party::B).unwrap();
        let expect = tensor(&a, &map.apply(&b).unwrap());
        assert!(out.max_abs_diff(&expect) < 1e-14);
    }
}

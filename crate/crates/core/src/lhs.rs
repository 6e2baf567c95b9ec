//! LHS model built from a response function on pure hidden states.
//!
//! The hidden variable is a Haar-random unit vector `|l>` in `C^d`. For a
//! rank-one POVM element `alpha P`, Alice answers with probability
//! `alpha / (d-1) * (1 - <l|P|l>)` and Bob holds
//! `sigma_l = (I - |l><l|) / (d-1)`. General elements are first refined into
//! weighted rank-one projectors and their responses summed.
//!
//! Because the integrand is at most quadratic in `|l><l|`, the predicted
//! assemblage follows exactly from the first two Haar moments
//! `E[|l><l|] = I/d` and `E[|l><l| (x) |l><l|] = (I + SWAP) / (d(d+1))`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::meas::{assemblage, Assemblage, MeasurementFamily, Povm};
use crate::qmat::{cr, partial_trace, swap_matrix, tensor, CMat, CVec, HermitianOperator, Party};
use crate::random::{random_unit_vector, rng_from_seed, SeededRng};
use crate::states::werner;

/// Eigenvalues below this are treated as zero when refining.
const REFINE_CUTOFF: f64 = 1e-12;
/// Allowed deviation from `|l| = 1`.
const UNIT_TOL: f64 = 1e-10;

/// One weighted rank-one piece `alpha |v><v|` of a POVM element.
#[derive(Clone, Debug, PartialEq)]
pub struct Rank1Part {
    pub weight: f64,
    pub vector: CVec,
}

impl Rank1Part {
    pub fn projector(&self) -> HermitianOperator {
        HermitianOperator::projector(&self.vector)
    }
}

/// Rank-one refinement of every element of a POVM, `parts[a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rank1Decomposition {
    dim: usize,
    parts: Vec<Vec<Rank1Part>>,
}

impl Rank1Decomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn parts(&self) -> &[Vec<Rank1Part>] {
        &self.parts
    }

    /// `sum alpha P` for element `a`.
    pub fn element(&self, a: usize) -> HermitianOperator {
        let mut sum = HermitianOperator::zeros(self.dim);
        for p in &self.parts[a] {
            sum = &sum + &p.projector().scale(p.weight);
        }
        sum
    }
}

fn refine_element(e: &HermitianOperator) -> Result<Vec<Rank1Part>> {
    let (vals, vecs) = e.eigh()?;
    Ok(vals
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > REFINE_CUTOFF)
        .map(|(k, &v)| Rank1Part {
            weight: v,
            vector: vecs.column(k).into_owned(),
        })
        .collect())
}

/// Eigendecomposition of each element into weighted rank-one projectors.
pub fn rank1_refine(povm: &Povm) -> Result<Rank1Decomposition> {
    let parts = povm.elements().iter().map(refine_element).collect::<Result<Vec<_>>>()?;
    Ok(Rank1Decomposition { dim: povm.dim(), parts })
}

fn check_unit(lambda: &CVec) -> Result<()> {
    let n = lambda.norm();
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::Domain(format!("hidden state has norm {n}, expected 1")));
    }
    Ok(())
}

/// `alpha / (d-1) * (1 - <l|P|l>)` for one rank-one piece.
pub fn barrett_response(part: &Rank1Part, lambda: &CVec) -> Result<f64> {
    check_unit(lambda)?;
    let d = lambda.len();
    if d < 2 || part.vector.len() != d {
        return Err(Error::Dimension(format!(
            "response needs matching dimensions of at least 2, got {} and {d}",
            part.vector.len()
        )));
    }
    let overlap = part.vector.dotc(lambda).norm_sqr();
    Ok(part.weight / (d as f64 - 1.0) * (1.0 - overlap))
}

/// `(I - |l><l|) / (d-1)`.
pub fn barrett_hidden_state(lambda: &CVec) -> Result<HermitianOperator> {
    check_unit(lambda)?;
    let d = lambda.len();
    if d < 2 {
        return Err(Error::Dimension("hidden state dimension must be at least 2".into()));
    }
    let p = HermitianOperator::projector(lambda);
    Ok((&HermitianOperator::identity(d) - &p).scale(1.0 / (d as f64 - 1.0)))
}

/// The response-function model on `C^d` with a Haar prior.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LhsModel {
    d: usize,
}

impl LhsModel {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("model dimension must be at least 2, got {d}")));
        }
        Ok(LhsModel { d })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Probability of outcome `a`: the sum over the element's rank-one parts.
    pub fn response(&self, dec: &Rank1Decomposition, a: usize, lambda: &CVec) -> Result<f64> {
        let mut p = 0.0;
        for part in &dec.parts[a] {
            p += barrett_response(part, lambda)?;
        }
        Ok(p)
    }

    pub fn hidden_state(&self, lambda: &CVec) -> Result<HermitianOperator> {
        barrett_hidden_state(lambda)
    }

    /// Haar-random hidden variable.
    pub fn sample(&self, rng: &mut SeededRng) -> CVec {
        random_unit_vector(self.d, rng)
    }

    fn check_family(&self, family: &MeasurementFamily) -> Result<()> {
        if family.dim() != self.d {
            return Err(Error::Dimension(format!(
                "family acts on dimension {}, model on {}",
                family.dim(),
                self.d
            )));
        }
        Ok(())
    }
}

fn refine_family(family: &MeasurementFamily) -> Result<Vec<Vec<Vec<Rank1Part>>>> {
    (0..family.n_settings())
        .map(|x| (0..family.n_outcomes()).map(|a| refine_element(&family.element(x, a))).collect())
        .collect()
}

/// `E[(1 - <l|P|l>) (I - |l><l|)]` from the moment operators.
fn moment_integral(p: &HermitianOperator, first: &HermitianOperator, second: &HermitianOperator) -> Result<HermitianOperator> {
    let d = p.dim();
    let id = HermitianOperator::identity(d);
    let tr_first_p = first.trace_product(p);
    // E[<l|P|l> |l><l|] = tr_1[(P (x) I) E[L (x) L]].
    let weighted = HermitianOperator::hermitize(tensor(p, &id).matrix() * second.matrix());
    let cross = partial_trace(&weighted, (d, d), Party::A)?;
    Ok(&(&(&id - first) - &id.scale(tr_first_p)) + &cross)
}

/// Exact model assemblage `int dl p(a|x,l) sigma_l` over the Haar measure.
pub fn predicted_assemblage_exact(model: &LhsModel, family: &MeasurementFamily) -> Result<Assemblage> {
    model.check_family(family)?;
    let d = model.d;
    let df = d as f64;
    let first = HermitianOperator::identity(d).scale(1.0 / df);
    let second = HermitianOperator::hermitize(
        (CMat::identity(d * d, d * d) + swap_matrix(d, d)).map(|z| z / cr(df * (df + 1.0))),
    );
    let scale = 1.0 / ((df - 1.0) * (df - 1.0));
    let members = refine_family(family)?
        .iter()
        .map(|row| {
            row.iter()
                .map(|parts| {
                    let mut acc = HermitianOperator::zeros(d);
                    for part in parts {
                        let m = moment_integral(&part.projector(), &first, &second)?;
                        acc = &acc + &m.scale(part.weight * scale);
                    }
                    Ok(acc)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Assemblage::new(members)
}

/// Sample mean of the model assemblage with entrywise standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct McEstimate {
    pub assemblage: Assemblage,
    /// Standard error of the real parts, `[x][a]`.
    pub std_err_re: Vec<Vec<DMatrix<f64>>>,
    /// Standard error of the imaginary parts, `[x][a]`.
    pub std_err_im: Vec<Vec<DMatrix<f64>>>,
    pub samples: usize,
}

/// Averages `p(a|x,l) sigma_l` over the given hidden states, in order.
pub fn predicted_assemblage_from_samples(
    model: &LhsModel,
    family: &MeasurementFamily,
    samples: &[CVec],
) -> Result<McEstimate> {
    model.check_family(family)?;
    if samples.is_empty() {
        return Err(Error::Domain("at least one sample is required".into()));
    }
    let d = model.d;
    let (nx, na) = (family.n_settings(), family.n_outcomes());
    let refined = refine_family(family)?;
    let mut sum = vec![vec![CMat::zeros(d, d); na]; nx];
    let mut sum_sq_re = vec![vec![DMatrix::<f64>::zeros(d, d); na]; nx];
    let mut sum_sq_im = vec![vec![DMatrix::<f64>::zeros(d, d); na]; nx];
    for lambda in samples {
        let sigma = barrett_hidden_state(lambda)?;
        for x in 0..nx {
            for a in 0..na {
                let mut p = 0.0;
                for part in &refined[x][a] {
                    p += barrett_response(part, lambda)?;
                }
                let term = sigma.matrix().map(|z| z * p);
                for (k, z) in term.iter().enumerate() {
                    sum_sq_re[x][a][k] += z.re * z.re;
                    sum_sq_im[x][a][k] += z.im * z.im;
                }
                sum[x][a] += term;
            }
        }
    }
    let n = samples.len() as f64;
    let std_err = |sq: &DMatrix<f64>, mean: &DMatrix<f64>| {
        DMatrix::from_fn(d, d, |i, j| {
            if samples.len() < 2 {
                return 0.0;
            }
            let var = (sq[(i, j)] / n - mean[(i, j)] * mean[(i, j)]).max(0.0) * n / (n - 1.0);
            (var / n).sqrt()
        })
    };
    let mut members = Vec::with_capacity(nx);
    let mut se_re = Vec::with_capacity(nx);
    let mut se_im = Vec::with_capacity(nx);
    for x in 0..nx {
        let mut row = Vec::with_capacity(na);
        let mut row_re = Vec::with_capacity(na);
        let mut row_im = Vec::with_capacity(na);
        for a in 0..na {
            let mean = sum[x][a].map(|z| z / cr(n));
            row_re.push(std_err(&sum_sq_re[x][a], &mean.map(|z| z.re)));
            row_im.push(std_err(&sum_sq_im[x][a], &mean.map(|z| z.im)));
            row.push(HermitianOperator::hermitize(mean));
        }
        members.push(row);
        se_re.push(row_re);
        se_im.push(row_im);
    }
    Ok(McEstimate {
        assemblage: Assemblage::new(members)?,
        std_err_re: se_re,
        std_err_im: se_im,
        samples: samples.len(),
    })
}

/// Monte Carlo estimate from `n` Haar samples drawn from `seed`.
pub fn predicted_assemblage_mc(model: &LhsModel, family: &MeasurementFamily, n: usize, seed: u64) -> Result<McEstimate> {
    if n == 0 {
        return Err(Error::Domain("at least one sample is required".into()));
    }
    let mut rng = rng_from_seed(seed);
    let samples: Vec<CVec> = (0..n).map(|_| model.sample(&mut rng)).collect();
    predicted_assemblage_from_samples(model, family, &samples)
}

/// Werner parameter reproduced by the model, with its verification
/// residuals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WernerMatch {
    pub d: usize,
    pub w: f64,
    /// Largest entrywise deviation on the probe family used for the fit.
    pub fit_residual: f64,
    /// Largest entrywise deviation on an independent family.
    pub residual: f64,
}

/// Largest entrywise deviation allowed when verifying the match.
pub const WERNER_MATCH_TOL: f64 = 1e-10;

fn real_inner(p: &HermitianOperator, q: &HermitianOperator) -> f64 {
    p.trace_product(q)
}

/// Least-squares `w` with `assemblage(werner(d, w), family)` closest to
/// the model assemblage. Both are affine in `w`, so the fit is closed form.
pub fn fit_werner_parameter(d: usize, family: &MeasurementFamily) -> Result<(f64, f64)> {
    let model = LhsModel::new(d)?;
    let target = predicted_assemblage_exact(&model, family)?;
    let base = assemblage(&werner(d, 0.0)?, family)?;
    let top = assemblage(&werner(d, 1.0)?, family)?;
    let (mut num, mut den) = (0.0, 0.0);
    for x in 0..family.n_settings() {
        for a in 0..family.n_outcomes() {
            let slope = top.member(x, a) - base.member(x, a);
            let offset = target.member(x, a) - base.member(x, a);
            num += real_inner(&slope, &offset);
            den += real_inner(&slope, &slope);
        }
    }
    if den == 0.0 {
        return Err(Error::Numeric("probe family does not resolve the Werner parameter".into()));
    }
    let w = num / den;
    Ok((w, werner_residual(d, w, family)?))
}

fn werner_residual(d: usize, w: f64, family: &MeasurementFamily) -> Result<f64> {
    let model = LhsModel::new(d)?;
    let target = predicted_assemblage_exact(&model, family)?;
    let state = werner(d, w).map_err(|_| Error::WernerMismatch { w, residual: f64::INFINITY })?;
    Ok(assemblage(&state, family)?.max_abs_diff(&target))
}

/// Computational basis plus the discrete Fourier basis.
fn probe_family(d: usize) -> Result<MeasurementFamily> {
    let df = d as f64;
    let fourier = CMat::from_fn(d, d, |j, k| {
        let phase = 2.0 * std::f64::consts::PI * (j * k) as f64 / df;
        num_complex::Complex64::from_polar(1.0 / df.sqrt(), phase)
    });
    MeasurementFamily::with_label(
        vec![Povm::projective(&CMat::identity(d, d))?, Povm::projective(&fourier)?],
        format!("computational+fourier({d})"),
    )
}

/// Three Haar-random bases from a fixed seed, independent of the probe.
fn verification_family(d: usize) -> Result<MeasurementFamily> {
    let mut rng = rng_from_seed(0x5eed_0000 + d as u64);
    let settings = (0..3)
        .map(|_| Povm::projective(&crate::random::haar_unitary(d, &mut rng)))
        .collect::<Result<Vec<_>>>()?;
    MeasurementFamily::with_label(settings, format!("haar-bases({d})"))
}

/// Finds the Werner parameter whose quantum assemblage the model reproduces,
/// fitted on one projective family and verified on another.
pub fn match_werner_parameter(d: usize) -> Result<WernerMatch> {
    if d < 2 {
        return Err(Error::Domain(format!("dimension must be at least 2, got {d}")));
    }
    let (w, fit_residual) = fit_werner_parameter(d, &probe_family(d)?)?;
    let residual = werner_residual(d, w, &verification_family(d)?)?;
    if fit_residual.max(residual) > WERNER_MATCH_TOL {
        return Err(Error::WernerMismatch {
            w,
            residual: fit_residual.max(residual),
        });
    }
    Ok(WernerMatch {
        d,
        w,
        fit_residual,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meas::{standard_family, FamilyKind};
    use crate::random::{random_povm_elements, random_unit_vector};
    use crate::states::ket;

    fn closed_form(d: usize, part: &Rank1Part) -> HermitianOperator {
        // (alpha/(d-1)^2) [c I + P/(d(d+1))], c = 1 - 2/d + 1/(d(d+1)).
        let df = d as f64;
        let cid = 1.0 - 2.0 / df + 1.0 / (df * (df + 1.0));
        let inner = &HermitianOperator::identity(d).scale(cid) + &part.projector().scale(1.0 / (df * (df + 1.0)));
        inner.scale(part.weight / ((df - 1.0) * (df - 1.0)))
    }

    #[test]
    fn response_edge_cases() {
        let part = Rank1Part {
            weight: 0.8,
            vector: ket(3, 1),
        };
        assert!(barrett_response(&part, &ket(3, 1)).unwrap().abs() < 1e-15);
        assert!((barrett_response(&part, &ket(3, 0)).unwrap() - 0.4).abs() < 1e-15);
        let mut bad = ket(3, 0);
        bad[0] = cr(1.1);
        assert!(barrett_response(&part, &bad).is_err());
    }

    #[test]
    fn responses_normalize_over_refined_povms() {
        let mut rng = rng_from_seed(501);
        for d in 2..=4 {
            let model = LhsModel::new(d).unwrap();
            for _ in 0..30 {
                let povm = Povm::new(random_povm_elements(d, 3, &mut rng)).unwrap();
                let dec = rank1_refine(&povm).unwrap();
                let lambda = random_unit_vector(d, &mut rng);
                let total: f64 = (0..3).map(|a| model.response(&dec, a, &lambda).unwrap()).sum();
                assert!((total - 1.0).abs() < 1e-10);
                for a in 0..3 {
                    let p = model.response(&dec, a, &lambda).unwrap();
                    assert!((-1e-15..=1.0 + 1e-12).contains(&p));
                }
            }
        }
    }

    #[test]
    fn hidden_state_spectrum() {
        let mut rng = rng_from_seed(502);
        let s = barrett_hidden_state(&ket(2, 0)).unwrap();
        assert!(s.max_abs_diff(&HermitianOperator::basis_projector(2, 1)) < 1e-15);
        for d in 2..=4 {
            let lambda = random_unit_vector(d, &mut rng);
            let s = barrett_hidden_state(&lambda).unwrap();
            assert!((s.trace() - 1.0).abs() < 1e-12);
            let ev = s.eigenvalues().unwrap();
            assert!(ev[0].abs() < 1e-12);
            for v in &ev[1..] {
                assert!((v - 1.0 / (d as f64 - 1.0)).abs() < 1e-12);
            }
            let p = HermitianOperator::projector(&lambda);
            assert!(s.trace_product(&p).abs() < 1e-12);
        }
    }

    #[test]
    fn refinement_bookkeeping() {
        let rank1 = Povm::projective(&CMat::identity(2, 2)).unwrap();
        let dec = rank1_refine(&rank1).unwrap();
        assert_eq!(dec.parts()[0].len(), 1);
        assert!((dec.parts()[0][0].weight - 1.0).abs() < 1e-14);
        let trivial = Povm::new(vec![HermitianOperator::identity(2)]).unwrap();
        let dec = rank1_refine(&trivial).unwrap();
        assert_eq!(dec.parts()[0].len(), 2);
        assert!(dec.element(0).max_abs_diff(&HermitianOperator::identity(2)) < 1e-14);
        let mut rng = rng_from_seed(503);
        for _ in 0..20 {
            let povm = Povm::new(random_povm_elements(3, 4, &mut rng)).unwrap();
            let dec = rank1_refine(&povm).unwrap();
            for (a, e) in povm.elements().iter().enumerate() {
                let w: f64 = dec.parts()[a].iter().map(|p| p.weight).sum();
                assert!((w - e.trace()).abs() < 1e-10);
                assert!(dec.element(a).max_abs_diff(e) < 1e-10);
                for p in &dec.parts()[a] {
                    let proj = p.projector();
                    assert!((proj.trace() - 1.0).abs() < 1e-10);
                    let sq = HermitianOperator::hermitize(proj.matrix() * proj.matrix());
                    assert!(sq.max_abs_diff(&proj) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn exact_assemblage_matches_closed_form() {
        let mut rng = rng_from_seed(504);
        for d in 2..=4 {
            let model = LhsModel::new(d).unwrap();
            let fam = MeasurementFamily::new(vec![
                Povm::new(random_povm_elements(d, 2, &mut rng)).unwrap(),
                Povm::new(random_povm_elements(d, 3, &mut rng)).unwrap(),
            ])
            .unwrap();
            let sigma = predicted_assemblage_exact(&model, &fam).unwrap();
            for x in 0..2 {
                let dec = rank1_refine(&fam.settings()[x]).unwrap();
                for (a, parts) in dec.parts().iter().enumerate() {
                    let mut expect = HermitianOperator::zeros(d);
                    for p in parts {
                        expect = &expect + &closed_form(d, p);
                    }
                    assert!(sigma.member(x, a).max_abs_diff(&expect) < 1e-12);
                }
                let marginal = sigma.setting_marginal(x);
                assert!(marginal.max_abs_diff(&HermitianOperator::identity(d).scale(1.0 / d as f64)) < 1e-12);
            }
        }
    }

    #[test]
    fn single_sample_reproduces_response() {
        let model = LhsModel::new(2).unwrap();
        let trivial = MeasurementFamily::new(vec![Povm::new(vec![HermitianOperator::identity(2)]).unwrap()]).unwrap();
        let est = predicted_assemblage_from_samples(&model, &trivial, &[ket(2, 0)]).unwrap();
        let dec = rank1_refine(&trivial.settings()[0]).unwrap();
        let p = model.response(&dec, 0, &ket(2, 0)).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        let expect = HermitianOperator::basis_projector(2, 1).scale(p);
        assert!(est.assemblage.member(0, 0).max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let model = LhsModel::new(2).unwrap();
        let fam = standard_family(&FamilyKind::Pauli3).unwrap();
        let a = predicted_assemblage_mc(&model, &fam, 500, 7).unwrap();
        let b = predicted_assemblage_mc(&model, &fam, 500, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn monte_carlo_within_three_sigma() {
        for d in [2, 3] {
            let model = LhsModel::new(d).unwrap();
            let fam = standard_family(&FamilyKind::Mub { d }).unwrap();
            let exact = predicted_assemblage_exact(&model, &fam).unwrap();
            let est = predicted_assemblage_mc(&model, &fam, 100_000, 11 + d as u64).unwrap();
            for x in 0..fam.n_settings() {
                for a in 0..fam.n_outcomes() {
                    let diff = est.assemblage.member(x, a).matrix() - exact.member(x, a).matrix();
                    for (k, z) in diff.iter().enumerate() {
                        assert!(z.re.abs() <= 3.0 * est.std_err_re[x][a][k] + 1e-15);
                        assert!(z.im.abs() <= 3.0 * est.std_err_im[x][a][k] + 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn werner_match_is_family_independent() {
        for d in 2..=4 {
            let m = match_werner_parameter(d).unwrap();
            assert!(m.residual <= WERNER_MATCH_TOL && m.fit_residual <= WERNER_MATCH_TOL);
            let (w2, r2) = fit_werner_parameter(d, &verification_family(d).unwrap()).unwrap();
            assert!((w2 - m.w).abs() < 1e-9);
            assert!(r2 <= WERNER_MATCH_TOL);
            let state = werner(d, m.w).unwrap();
            let sigma = assemblage(&state, &probe_family(d).unwrap()).unwrap();
            assert!(sigma.marginal().min_eigenvalue().unwrap() >= -1e-12);
        }
    }
}

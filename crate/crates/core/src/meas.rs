//! POVMs, measurement families, assemblages and joint behaviors.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::qmat::{c, cr, tensor, BipartiteState, CMat, CVec, HermitianOperator, Party, PSD_TOL};
use crate::random::{haar_unitary, rng_from_seed};

/// Entrywise tolerance on `sum_a M_a = I`.
pub const POVM_SUM_TOL: f64 = 1e-9;
/// Entrywise tolerance on no-signaling of assemblages and behaviors.
pub const NO_SIGNALING_TOL: f64 = 1e-10;
/// Tolerance on `sum_a tr sigma_{a|x} = 1`.
pub const ASSEMBLAGE_TRACE_TOL: f64 = 1e-9;
pub const BEHAVIOR_NORM_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    dim: usize,
    elements: Vec<HermitianOperator>,
}

impl Povm {
    pub fn new(elements: Vec<HermitianOperator>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::InvalidMeasurement("POVM has no elements".into()))?;
        let dim = first.dim();
        let mut sum = HermitianOperator::zeros(dim);
        for (k, e) in elements.iter().enumerate() {
            if e.dim() != dim {
                return Err(Error::InvalidMeasurement(format!(
                    "element {k} has dimension {}, expected {dim}",
                    e.dim()
                )));
            }
            let min = e.min_eigenvalue()?;
            if min < -PSD_TOL {
                return Err(Error::InvalidMeasurement(format!(
                    "element {k} has negative eigenvalue {min:.3e}"
                )));
            }
            sum = &sum + e;
        }
        let dev = sum.max_abs_diff(&HermitianOperator::identity(dim));
        if dev > POVM_SUM_TOL {
            return Err(Error::InvalidMeasurement(format!(
                "elements sum to identity only within {dev:.3e}"
            )));
        }
        Ok(Self { dim, elements })
    }

    /// Rank-one projective measurement onto the columns of a unitary.
    pub fn projective(basis: &CMat) -> Result<Self> {
        let elements = (0..basis.ncols())
            .map(|k| HermitianOperator::projector(&basis.column(k).into_owned()))
            .collect();
        Self::new(elements)
    }

    /// Two-outcome qubit measurement `(I +- n.sigma)/2` for a unit Bloch vector.
    pub fn qubit_axis(n: [f64; 3]) -> Result<Self> {
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasurement(format!("Bloch vector has norm {norm}")));
        }
        let [x, y, z] = n;
        let plus = CMat::from_row_slice(2, 2, &[cr(0.5 * (1.0 + z)), c(0.5 * x, -0.5 * y), c(0.5 * x, 0.5 * y), cr(0.5 * (1.0 - z))]);
        let minus = CMat::identity(2, 2) - &plus;
        Self::new(vec![HermitianOperator::new(plus)?, HermitianOperator::new(minus)?])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn outcomes(&self) -> usize {
        self.elements.len()
    }

    /// Embeds the POVM into `dim + extra` dimensions, with one additional
    /// outcome projecting onto the appended levels.
    pub fn with_flag_outcome(&self, extra: usize) -> Povm {
        let d = self.dim + extra;
        let iso = crate::qmat::embedding(self.dim, d);
        let mut elements: Vec<_> = self.elements.iter().map(|e| e.conjugate_by(&iso)).collect();
        let flag = HermitianOperator::from_real_diagonal(&(0..d).map(|i| if i >= self.dim { 1.0 } else { 0.0 }).collect::<Vec<_>>());
        elements.push(flag);
        Povm { dim: d, elements }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementFamily {
    settings: Vec<Povm>,
    label: String,
}

impl MeasurementFamily {
    pub fn new(settings: Vec<Povm>) -> Result<Self> {
        Self::with_label(settings, "custom")
    }

    pub fn with_label(settings: Vec<Povm>, label: impl Into<String>) -> Result<Self> {
        let first = settings
            .first()
            .ok_or_else(|| Error::InvalidMeasurement("measurement family is empty".into()))?;
        let dim = first.dim();
        if let Some((x, p)) = settings.iter().enumerate().find(|(_, p)| p.dim() != dim) {
            return Err(Error::InvalidMeasurement(format!(
                "setting {x} has dimension {}, expected {dim}",
                p.dim()
            )));
        }
        Ok(Self {
            settings,
            label: label.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.settings[0].dim()
    }

    pub fn settings(&self) -> &[Povm] {
        &self.settings
    }

    pub fn n_settings(&self) -> usize {
        self.settings.len()
    }

    /// Outcome count of the padded rectangular grid.
    pub fn n_outcomes(&self) -> usize {
        self.settings.iter().map(Povm::outcomes).max().unwrap_or(0)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `M_{a|x}`, or the zero operator for padded outcomes.
    pub fn element(&self, x: usize, a: usize) -> HermitianOperator {
        self.settings[x]
            .elements()
            .get(a)
            .cloned()
            .unwrap_or_else(|| HermitianOperator::zeros(self.dim()))
    }

    /// The first `k` settings.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.settings.len() {
            return Err(Error::InvalidMeasurement(format!(
                "cannot keep {k} of {} settings",
                self.settings.len()
            )));
        }
        Self::with_label(self.settings[..k].to_vec(), format!("{}[..{k}]", self.label))
    }

    pub fn with_flag_outcome(&self, extra: usize) -> Self {
        Self {
            settings: self.settings.iter().map(|p| p.with_flag_outcome(extra)).collect(),
            label: format!("{}+flag", self.label),
        }
    }
}

/// Named measurement families.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyKind {
    /// Eigenbases of Z, X and Y, in that order.
    Pauli3,
    /// Complete set of mutually unbiased bases; `d` in {2, 3}.
    Mub { d: usize },
    /// Haar-random projective bases.
    SphereSample { settings: usize, dim: usize, seed: u64 },
    /// The symmetric three-outcome qubit POVM.
    TrinePovm,
    /// Qubit axes through the six pairs of opposite icosahedron vertices.
    Icosahedral,
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyKind::Pauli3 => write!(f, "pauli3"),
            FamilyKind::Mub { d } => write!(f, "mub{d}"),
            FamilyKind::SphereSample { settings, dim, seed } => write!(f, "sphere{dim}:{settings}@seed{seed}"),
            FamilyKind::TrinePovm => write!(f, "trine"),
            FamilyKind::Icosahedral => write!(f, "icosa6"),
        }
    }
}

pub fn standard_family(kind: &FamilyKind) -> Result<MeasurementFamily> {
    let label = kind.to_string();
    match *kind {
        FamilyKind::Pauli3 => MeasurementFamily::with_label(pauli3_settings()?, label),
        FamilyKind::Mub { d: 2 } => MeasurementFamily::with_label(pauli3_settings()?, label),
        FamilyKind::Mub { d: 3 } => {
            let omega = |k: usize| {
                let t = 2.0 * PI * (k % 3) as f64 / 3.0;
                c(t.cos(), t.sin())
            };
            let mut settings = vec![Povm::projective(&CMat::identity(3, 3))?];
            for j in 0..3 {
                let basis = CMat::from_fn(3, 3, |n, k| omega(j * n * n + k * n) / 3f64.sqrt());
                settings.push(Povm::projective(&basis)?);
            }
            MeasurementFamily::with_label(settings, label)
        }
        FamilyKind::Mub { d } => Err(Error::Domain(format!(
            "mutually unbiased bases are only provided for d in {{2, 3}}, got {d}"
        ))),
        FamilyKind::SphereSample { settings, dim, seed } => {
            if settings == 0 || dim < 2 {
                return Err(Error::Domain(format!(
                    "sphere sample needs at least one setting and dimension >= 2, got {settings} settings in dimension {dim}"
                )));
            }
            let mut rng = rng_from_seed(seed);
            let povms = (0..settings)
                .map(|_| Povm::projective(&haar_unitary(dim, &mut rng)))
                .collect::<Result<Vec<_>>>()?;
            MeasurementFamily::with_label(povms, label)
        }
        FamilyKind::TrinePovm => {
            let elements = (0..3)
                .map(|k| {
                    let t = PI * k as f64 / 3.0;
                    let v = CVec::from_vec(vec![cr(t.cos()), cr(t.sin())]);
                    HermitianOperator::projector(&v).scale(2.0 / 3.0)
                })
                .collect();
            MeasurementFamily::with_label(vec![Povm::new(elements)?], label)
        }
        FamilyKind::Icosahedral => {
            let phi = (1.0 + 5f64.sqrt()) / 2.0;
            let norm = (1.0 + phi * phi).sqrt();
            let (u, v) = (1.0 / norm, phi / norm);
            let axes = [[0.0, u, v], [0.0, -u, v], [u, v, 0.0], [-u, v, 0.0], [v, 0.0, u], [-v, 0.0, u]];
            let povms = axes.into_iter().map(Povm::qubit_axis).collect::<Result<Vec<_>>>()?;
            MeasurementFamily::with_label(povms, label)
        }
    }
}

fn pauli3_settings() -> Result<Vec<Povm>> {
    [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
        .into_iter()
        .map(Povm::qubit_axis)
        .collect()
}

/// Alice measures Z then X; Bob measures `(Z+X)/sqrt2` then `(Z-X)/sqrt2`.
pub fn chsh_families() -> Result<(MeasurementFamily, MeasurementFamily)> {
    let s = FRAC_1_SQRT_2;
    let a = MeasurementFamily::with_label(
        vec![Povm::qubit_axis([0.0, 0.0, 1.0])?, Povm::qubit_axis([1.0, 0.0, 0.0])?],
        "chsh-alice",
    )?;
    let b = MeasurementFamily::with_label(
        vec![Povm::qubit_axis([s, 0.0, s])?, Povm::qubit_axis([-s, 0.0, s])?],
        "chsh-bob",
    )?;
    Ok((a, b))
}

/// Conditional states `sigma_{a|x}`, stored as `members[x][a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Assemblage {
    n_settings: usize,
    n_outcomes: usize,
    dim_b: usize,
    members: Vec<Vec<HermitianOperator>>,
}

impl Assemblage {
    pub fn new(members: Vec<Vec<HermitianOperator>>) -> Result<Self> {
        let n_settings = members.len();
        if n_settings == 0 {
            return Err(Error::InvalidAssemblage("no settings".into()));
        }
        let n_outcomes = members[0].len();
        if n_outcomes == 0 {
            return Err(Error::InvalidAssemblage("no outcomes".into()));
        }
        let dim_b = members[0][0].dim();
        for (x, row) in members.iter().enumerate() {
            if row.len() != n_outcomes {
                return Err(Error::InvalidAssemblage(format!(
                    "setting {x} has {} outcomes, expected {n_outcomes}",
                    row.len()
                )));
            }
            for (a, m) in row.iter().enumerate() {
                if m.dim() != dim_b {
                    return Err(Error::InvalidAssemblage(format!(
                        "member ({x}, {a}) has dimension {}, expected {dim_b}",
                        m.dim()
                    )));
                }
                let min = m.min_eigenvalue()?;
                if min < -PSD_TOL {
                    return Err(Error::InvalidAssemblage(format!(
                        "member ({x}, {a}) has negative eigenvalue {min:.3e}"
                    )));
                }
            }
        }
        let out = Self {
            n_settings,
            n_outcomes,
            dim_b,
            members,
        };
        let reference = out.setting_marginal(0);
        let tr = reference.trace();
        if (tr - 1.0).abs() > ASSEMBLAGE_TRACE_TOL {
            return Err(Error::InvalidAssemblage(format!("total trace is {tr}, expected 1")));
        }
        for x in 1..n_settings {
            let dev = out.setting_marginal(x).max_abs_diff(&reference);
            if dev > NO_SIGNALING_TOL {
                return Err(Error::InvalidAssemblage(format!(
                    "no-signaling violated at setting {x} by {dev:.3e}"
                )));
            }
        }
        Ok(out)
    }

    pub fn n_settings(&self) -> usize {
        self.n_settings
    }

    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn member(&self, x: usize, a: usize) -> &HermitianOperator {
        &self.members[x][a]
    }

    pub fn members(&self) -> &[Vec<HermitianOperator>] {
        &self.members
    }

    /// `sum_a sigma_{a|x}`.
    pub fn setting_marginal(&self, x: usize) -> HermitianOperator {
        let mut acc = HermitianOperator::zeros(self.dim_b);
        for m in &self.members[x] {
            acc = &acc + m;
        }
        acc
    }

    /// Bob's reduced state, taken from the first setting.
    pub fn marginal(&self) -> HermitianOperator {
        self.setting_marginal(0)
    }

    pub fn max_abs_diff(&self, other: &Assemblage) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.members
            .iter()
            .flatten()
            .zip(other.members.iter().flatten())
            .map(|(p, q)| p.max_abs_diff(q))
            .fold(0.0, f64::max)
    }

    /// `(n_settings, n_outcomes, dim_b)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_settings, self.n_outcomes, self.dim_b)
    }

    /// Convex combination `weight * self + (1 - weight) * other`.
    pub fn mix(&self, other: &Assemblage, weight: f64) -> Result<Assemblage> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension("cannot mix assemblages of different shapes".into()));
        }
        let members = self
            .members
            .iter()
            .zip(&other.members)
            .map(|(r, s)| r.iter().zip(s).map(|(p, q)| &p.scale(weight) + &q.scale(1.0 - weight)).collect())
            .collect();
        Assemblage::new(members)
    }
}

/// `sigma_{a|x} = tr_A[(M_{a|x} (x) I) rho]`.
pub fn assemblage(rho: &BipartiteState, family: &MeasurementFamily) -> Result<Assemblage> {
    if family.dim() != rho.dim_a() {
        return Err(Error::Dimension(format!(
            "family acts on dimension {}, state has dim_A = {}",
            family.dim(),
            rho.dim_a()
        )));
    }
    let id_b = HermitianOperator::identity(rho.dim_b());
    let members = (0..family.n_settings())
        .map(|x| {
            (0..family.n_outcomes())
                .map(|a| {
                    let m = tensor(&family.element(x, a), &id_b);
                    let prod = HermitianOperator::hermitize(m.matrix() * rho.matrix());
                    crate::qmat::partial_trace(&prod, rho.dims(), Party::A).expect("dims checked")
                })
                .collect()
        })
        .collect();
    Assemblage::new(members)
}

/// Joint distribution `p(ab|xy)`, indexed `[x][y][a][b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Behavior {
    shape: BehaviorShape,
    table: Vec<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BehaviorShape {
    pub n_x: usize,
    pub n_y: usize,
    pub n_a: usize,
    pub n_b: usize,
}

impl BehaviorShape {
    fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        ((x * self.n_y + y) * self.n_a + a) * self.n_b + b
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_y * self.n_a * self.n_b
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Behavior {
    /// Builds from `p[x][y][a][b]`.
    pub fn new(p: Vec<Vec<Vec<Vec<f64>>>>) -> Result<Self> {
        let n_x = p.len();
        let n_y = p.first().map_or(0, Vec::len);
        let n_a = p.first().and_then(|r| r.first()).map_or(0, Vec::len);
        let n_b = p.first().and_then(|r| r.first()).and_then(|r| r.first()).map_or(0, Vec::len);
        let shape = BehaviorShape { n_x, n_y, n_a, n_b };
        if shape.is_empty() {
            return Err(Error::InvalidBehavior("empty probability table".into()));
        }
        let mut table = Vec::with_capacity(shape.len());
        for (x, px) in p.iter().enumerate() {
            if px.len() != n_y {
                return Err(Error::InvalidBehavior(format!("ragged table at x = {x}")));
            }
            for (y, pxy) in px.iter().enumerate() {
                if pxy.len() != n_a {
                    return Err(Error::InvalidBehavior(format!("ragged table at (x, y) = ({x}, {y})")));
                }
                for (a, row) in pxy.iter().enumerate() {
                    if row.len() != n_b {
                        return Err(Error::InvalidBehavior(format!("ragged table at (x, y, a) = ({x}, {y}, {a})")));
                    }
                    table.extend_from_slice(row);
                }
            }
        }
        Self::from_flat(shape, table)
    }

    fn from_flat(shape: BehaviorShape, table: Vec<f64>) -> Result<Self> {
        let out = Self { shape, table };
        if let Some(v) = out.table.iter().find(|v| !v.is_finite() || **v < -BEHAVIOR_NORM_TOL) {
            return Err(Error::InvalidBehavior(format!("invalid probability {v}")));
        }
        for x in 0..shape.n_x {
            for y in 0..shape.n_y {
                let total: f64 = (0..shape.n_a)
                    .flat_map(|a| (0..shape.n_b).map(move |b| (a, b)))
                    .map(|(a, b)| out.p(a, b, x, y))
                    .sum();
                if (total - 1.0).abs() > BEHAVIOR_NORM_TOL {
                    return Err(Error::InvalidBehavior(format!("p(.|{x}{y}) sums to {total}")));
                }
            }
        }
        for x in 0..shape.n_x {
            for a in 0..shape.n_a {
                let reference = out.marginal_a(a, x, 0);
                for y in 1..shape.n_y {
                    if (out.marginal_a(a, x, y) - reference).abs() > NO_SIGNALING_TOL {
                        return Err(Error::InvalidBehavior(format!("Alice's marginal for (a, x) = ({a}, {x}) depends on y")));
                    }
                }
            }
        }
        for y in 0..shape.n_y {
            for b in 0..shape.n_b {
                let reference = out.marginal_b(b, y, 0);
                for x in 1..shape.n_x {
                    if (out.marginal_b(b, y, x) - reference).abs() > NO_SIGNALING_TOL {
                        return Err(Error::InvalidBehavior(format!("Bob's marginal for (b, y) = ({b}, {y}) depends on x")));
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn shape(&self) -> BehaviorShape {
        self.shape
    }

    pub fn p(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.table[self.shape.index(a, b, x, y)]
    }

    /// `p_A(a|x)` computed from the row with Bob's setting `y`.
    pub fn marginal_a(&self, a: usize, x: usize, y: usize) -> f64 {
        (0..self.shape.n_b).map(|b| self.p(a, b, x, y)).sum()
    }

    pub fn marginal_b(&self, b: usize, y: usize, x: usize) -> f64 {
        (0..self.shape.n_a).map(|a| self.p(a, b, x, y)).sum()
    }

    /// The table as `p[x][y][a][b]`.
    pub fn to_nested(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        let s = self.shape;
        (0..s.n_x)
            .map(|x| {
                (0..s.n_y)
                    .map(|y| (0..s.n_a).map(|a| (0..s.n_b).map(|b| self.p(a, b, x, y)).collect()).collect())
                    .collect()
            })
            .collect()
    }

    /// Uniform distribution over outcomes for every setting pair.
    pub fn uniform(shape: BehaviorShape) -> Self {
        let v = 1.0 / (shape.n_a * shape.n_b) as f64;
        Self {
            shape,
            table: vec![v; shape.len()],
        }
    }

    /// `sum_{abxy} coeff(a,b,x,y) p(ab|xy)` for a table of the same layout.
    pub fn dot(&self, coeffs: &[f64]) -> f64 {
        assert_eq!(coeffs.len(), self.table.len(), "functional/behavior size mismatch");
        self.table.iter().zip(coeffs).map(|(p, c)| p * c).sum()
    }

    pub fn flat(&self) -> &[f64] {
        &self.table
    }
}

/// `p(ab|xy) = tr[rho (M_{a|x} (x) M_{b|y})]`.
pub fn behavior(rho: &BipartiteState, fam_a: &MeasurementFamily, fam_b: &MeasurementFamily) -> Result<Behavior> {
    if fam_a.dim() != rho.dim_a() || fam_b.dim() != rho.dim_b() {
        return Err(Error::Dimension(format!(
            "families act on {}x{}, state is {}x{}",
            fam_a.dim(),
            fam_b.dim(),
            rho.dim_a(),
            rho.dim_b()
        )));
    }
    let shape = BehaviorShape {
        n_x: fam_a.n_settings(),
        n_y: fam_b.n_settings(),
        n_a: fam_a.n_outcomes(),
        n_b: fam_b.n_outcomes(),
    };
    let mut table = vec![0.0; shape.len()];
    for x in 0..shape.n_x {
        for y in 0..shape.n_y {
            for a in 0..shape.n_a {
                for b in 0..shape.n_b {
                    let joint = tensor(&fam_a.element(x, a), &fam_b.element(y, b));
                    table[shape.index(a, b, x, y)] = rho.op().trace_product(&joint);
                }
            }
        }
    }
    Behavior::from_flat(shape, table)
}

/// `E_xy = sum_ab (-1)^(a+b) p(ab|xy)` for binary outcomes.
pub fn correlator(p: &Behavior, x: usize, y: usize) -> f64 {
    let mut e = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
            e += sign * p.p(a, b, x, y);
        }
    }
    e
}

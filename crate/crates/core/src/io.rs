//! JSON encodings of states, assemblages, behaviors and steering
//! functionals.
//!
//! Complex matrices are row-major lists of rows of `[re, im]` pairs, with
//! bipartite indices in A-major order (`index = a * dim_b + b`):
//!
//! ```json
//! {"dims": [2, 2], "matrix": [[[0.5, 0.0], [0.0, 0.0], ...], ...]}
//! {"nX": 3, "nA": 2, "dimB": 2, "members": [[matrix, matrix], ...]}
//! {"nX": 2, "nY": 2, "nA": 2, "nB": 2, "p": [[[[p(00|00), ...]]]]}
//! ```
//!
//! Decoding errors name the offending member and entry.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::ineq::SteeringFunctional;
use crate::meas::{Assemblage, Behavior};
use crate::qmat::{c, BipartiteState, CMat, HermitianOperator, HERMITICITY_TOL};

pub type MatrixJson = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateJson {
    pub dims: [usize; 2],
    pub matrix: MatrixJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssemblageJson {
    #[serde(rename = "nX")]
    pub n_x: usize,
    #[serde(rename = "nA")]
    pub n_a: usize,
    #[serde(rename = "dimB")]
    pub dim_b: usize,
    pub members: Vec<Vec<MatrixJson>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorJson {
    #[serde(rename = "nX")]
    pub n_x: usize,
    #[serde(rename = "nY")]
    pub n_y: usize,
    #[serde(rename = "nA")]
    pub n_a: usize,
    #[serde(rename = "nB")]
    pub n_b: usize,
    /// `p[x][y][a][b]`.
    pub p: Vec<Vec<Vec<Vec<f64>>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalJson {
    #[serde(rename = "nX")]
    pub n_x: usize,
    #[serde(rename = "nA")]
    pub n_a: usize,
    #[serde(rename = "dimB")]
    pub dim_b: usize,
    pub operators: Vec<Vec<MatrixJson>>,
}

pub fn matrix_to_json(m: &CMat) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// Decodes a Hermitian matrix, reporting problems under `location`.
pub fn matrix_from_json(rows: &MatrixJson, location: &str) -> Result<HermitianOperator> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Parse(format!("{location}: empty matrix")));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Parse(format!(
                "{location}: row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|z| !z[0].is_finite() || !z[1].is_finite()) {
            return Err(Error::Parse(format!("{location}: entry ({i}, {j}) is not finite")));
        }
    }
    let m = CMat::from_fn(n, n, |i, j| c(rows[i][j][0], rows[i][j][1]));
    HermitianOperator::new(m).map_err(|e| match e {
        Error::NotHermitian { row, col, deviation } => Error::Parse(format!(
            "{location}: entry ({row}, {col}) deviates from Hermitian by {deviation:.3e} (tolerance {HERMITICITY_TOL:e})"
        )),
        other => Error::Parse(format!("{location}: {other}")),
    })
}

pub fn state_to_json(rho: &BipartiteState) -> StateJson {
    StateJson {
        dims: [rho.dim_a(), rho.dim_b()],
        matrix: matrix_to_json(rho.matrix()),
    }
}

pub fn state_from_json(s: &StateJson) -> Result<BipartiteState> {
    let op = matrix_from_json(&s.matrix, "matrix")?;
    let [da, db] = s.dims;
    if da * db != op.dim() {
        return Err(Error::Parse(format!(
            "dims: {da}x{db} does not match matrix dimension {}",
            op.dim()
        )));
    }
    BipartiteState::new(op, da, db).map_err(|e| Error::Parse(format!("state: {e}")))
}

fn grid_to_json(ops: &[Vec<HermitianOperator>]) -> Vec<Vec<MatrixJson>> {
    ops.iter().map(|row| row.iter().map(|m| matrix_to_json(m.matrix())).collect()).collect()
}

fn grid_from_json(
    grid: &[Vec<MatrixJson>],
    n_x: usize,
    n_a: usize,
    dim: usize,
    field: &str,
) -> Result<Vec<Vec<HermitianOperator>>> {
    if grid.len() != n_x {
        return Err(Error::Parse(format!("{field}: {} settings listed, nX = {n_x}", grid.len())));
    }
    grid.iter()
        .enumerate()
        .map(|(x, row)| {
            if row.len() != n_a {
                return Err(Error::Parse(format!("{field}[{x}]: {} outcomes listed, nA = {n_a}", row.len())));
            }
            row.iter()
                .enumerate()
                .map(|(a, m)| {
                    let loc = format!("{field}[{x}][{a}]");
                    let op = matrix_from_json(m, &loc)?;
                    if op.dim() != dim {
                        return Err(Error::Parse(format!("{loc}: dimension {} but dimB = {dim}", op.dim())));
                    }
                    Ok(op)
                })
                .collect()
        })
        .collect()
}

pub fn assemblage_to_json(sigma: &Assemblage) -> AssemblageJson {
    let (n_x, n_a, dim_b) = sigma.shape();
    AssemblageJson {
        n_x,
        n_a,
        dim_b,
        members: grid_to_json(sigma.members()),
    }
}

pub fn assemblage_from_json(s: &AssemblageJson) -> Result<Assemblage> {
    let members = grid_from_json(&s.members, s.n_x, s.n_a, s.dim_b, "members")?;
    Assemblage::new(members).map_err(|e| Error::Parse(format!("assemblage: {e}")))
}

pub fn behavior_to_json(p: &Behavior) -> BehaviorJson {
    let sh = p.shape();
    BehaviorJson {
        n_x: sh.n_x,
        n_y: sh.n_y,
        n_a: sh.n_a,
        n_b: sh.n_b,
        p: p.to_nested(),
    }
}

pub fn behavior_from_json(s: &BehaviorJson) -> Result<Behavior> {
    let declared = (s.n_x, s.n_y, s.n_a, s.n_b);
    let found = (
        s.p.len(),
        s.p.first().map_or(0, Vec::len),
        s.p.first().and_then(|r| r.first()).map_or(0, Vec::len),
        s.p.first().and_then(|r| r.first()).and_then(|r| r.first()).map_or(0, Vec::len),
    );
    if declared != found {
        return Err(Error::Parse(format!(
            "p: table shape {found:?} does not match declared (nX, nY, nA, nB) = {declared:?}"
        )));
    }
    Behavior::new(s.p.clone()).map_err(|e| Error::Parse(format!("behavior: {e}")))
}

pub fn functional_to_json(g: &SteeringFunctional) -> FunctionalJson {
    let (n_x, n_a, dim_b) = g.shape();
    FunctionalJson {
        n_x,
        n_a,
        dim_b,
        operators: grid_to_json(g.operators()),
    }
}

pub fn functional_from_json(s: &FunctionalJson) -> Result<SteeringFunctional> {
    let ops = grid_from_json(&s.operators, s.n_x, s.n_a, s.dim_b, "operators")?;
    SteeringFunctional::new(ops).map_err(|e| Error::Parse(format!("functional: {e}")))
}

/// A decoded input file.
#[derive(Clone, Debug, PartialEq)]
pub enum Document {
    State(BipartiteState),
    Assemblage(Assemblage),
    Behavior(Behavior),
}

/// Parses a state, assemblage or behavior, recognized by its keys.
pub fn parse_document(text: &str) -> Result<Document> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("invalid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Parse("top level must be a JSON object".into()))?;
    let decode = |kind: &str, e: serde_json::Error| Error::Parse(format!("{kind}: {e}"));
    if obj.contains_key("members") {
        let s: AssemblageJson = serde_json::from_value(value).map_err(|e| decode("assemblage", e))?;
        assemblage_from_json(&s).map(Document::Assemblage)
    } else if obj.contains_key("p") {
        let s: BehaviorJson = serde_json::from_value(value).map_err(|e| decode("behavior", e))?;
        behavior_from_json(&s).map(Document::Behavior)
    } else if obj.contains_key("matrix") {
        let s: StateJson = serde_json::from_value(value).map_err(|e| decode("state", e))?;
        state_from_json(&s).map(Document::State)
    } else {
        Err(Error::Parse(
            "unrecognized document: expected a state (\"matrix\"), assemblage (\"members\") or behavior (\"p\")".into(),
        ))
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meas::{assemblage, behavior, chsh_families, standard_family, FamilyKind};
    use crate::random::{random_state, rng_from_seed};
    use crate::states::singlet;

    #[test]
    fn assemblage_round_trip_is_byte_identical() {
        let mut rng = rng_from_seed(601);
        let sigma = assemblage(&random_state(2, 3, &mut rng), &standard_family(&FamilyKind::Pauli3).unwrap()).unwrap();
        let first = to_json_string(&assemblage_to_json(&sigma)).unwrap();
        let Document::Assemblage(back) = parse_document(&first).unwrap() else {
            panic!("wrong document kind");
        };
        assert_eq!(back, sigma);
        assert_eq!(to_json_string(&assemblage_to_json(&back)).unwrap(), first);
    }

    #[test]
    fn state_and_behavior_round_trip() {
        let rho = singlet();
        let text = to_json_string(&state_to_json(&rho)).unwrap();
        assert_eq!(parse_document(&text).unwrap(), Document::State(rho.clone()));
        let (fa, fb) = chsh_families().unwrap();
        let p = behavior(&rho, &fa, &fb).unwrap();
        let text = to_json_string(&behavior_to_json(&p)).unwrap();
        assert_eq!(parse_document(&text).unwrap(), Document::Behavior(p));
    }

    #[test]
    fn non_hermitian_member_is_located() {
        let sigma = assemblage(&singlet(), &standard_family(&FamilyKind::Pauli3).unwrap()).unwrap();
        let mut js = assemblage_to_json(&sigma);
        js.members[2][1][0][1][1] += 1e-3;
        let err = parse_document(&serde_json::to_string(&js).unwrap()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("members[2][1]") && msg.contains("(0, 1)"), "{msg}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_document("{\"dims\": [2, 2], \"matrix\": [[[1, 0]],,]}").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let text = r#"{"dims": [1, 2], "matrix": [[[0.5, 0], [0, 0]], [[0, 0]]]}"#;
        let msg = parse_document(text).unwrap_err().to_string();
        assert!(msg.contains("row 1"), "{msg}");
    }
}

//! JSON shapes of the library types. Complex numbers are `[re, im]` pairs,
//! matrices are row-major nested arrays.

use qfl_core::fields::KernelModel;
use qfl_core::{
    Complex64, ComplexMatrix, ComplexVector, DilationSpec, GaussianState, HamiltonianTerm, LindbladTerm,
    QuasifreePair, RealMatrix, RealVector,
};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CliResult};

pub type Cx = [f64; 2];

pub fn cx(z: Complex64) -> Cx {
    [z.re, z.im]
}

pub fn complex_vector(v: &[Cx]) -> ComplexVector {
    ComplexVector::from_iterator(v.len(), v.iter().map(|&[re, im]| Complex64::new(re, im)))
}

pub fn complex_vector_dto(v: &ComplexVector) -> Vec<Cx> {
    v.iter().map(|z| cx(*z)).collect()
}

fn rows_of<T: Clone>(rows: &[Vec<T>], what: &str) -> CliResult<(usize, usize)> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(invalid(format!("{what}: rows have different lengths")));
    }
    Ok((r, c))
}

pub fn real_matrix(rows: &[Vec<f64>], what: &str) -> CliResult<RealMatrix> {
    let (r, c) = rows_of(rows, what)?;
    Ok(RealMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn real_matrix_dto(m: &RealMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn complex_matrix(rows: &[Vec<Cx>], what: &str) -> CliResult<ComplexMatrix> {
    let (r, c) = rows_of(rows, what)?;
    Ok(ComplexMatrix::from_fn(r, c, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

pub fn complex_matrix_dto(m: &ComplexMatrix) -> Vec<Vec<Cx>> {
    m.row_iter().map(|r| r.iter().map(|z| cx(*z)).collect()).collect()
}

fn check_n(n: usize, len: usize, what: &str) -> CliResult<()> {
    if n != len {
        return Err(invalid(format!("{what} has length {len}, but n = {n}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianStateDto {
    pub n: usize,
    pub l: Vec<f64>,
    pub m: Vec<f64>,
    #[serde(rename = "S")]
    pub s: Vec<Vec<f64>>,
}

impl GaussianStateDto {
    pub fn to_state(&self) -> CliResult<GaussianState> {
        check_n(self.n, self.l.len(), "l")?;
        check_n(self.n, self.m.len(), "m")?;
        Ok(GaussianState::new(
            RealVector::from_vec(self.l.clone()),
            RealVector::from_vec(self.m.clone()),
            real_matrix(&self.s, "S")?,
        )?)
    }

    pub fn from_state(st: &GaussianState) -> Self {
        Self {
            n: st.modes(),
            l: st.momentum_mean().iter().copied().collect(),
            m: st.position_mean().iter().copied().collect(),
            s: real_matrix_dto(st.covariance()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairDto {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
}

impl PairDto {
    pub fn to_pair(&self, psd_tol: f64) -> CliResult<QuasifreePair> {
        let k = real_matrix(&self.k, "K")?;
        let c = real_matrix(&self.c, "C")?;
        check_n(2 * self.n, k.nrows(), "K")?;
        Ok(QuasifreePair::with_tolerance(k, c, psd_tol)?)
    }

    pub fn from_matrices(k: &RealMatrix, c: &RealMatrix) -> Self {
        Self { n: k.nrows() / 2, k: real_matrix_dto(k), c: real_matrix_dto(c) }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LindbladDto {
    pub b: Vec<Cx>,
    pub c: Vec<Cx>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianDto {
    pub lambda: f64,
    pub w: Vec<Cx>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DilationDto {
    pub n: usize,
    pub lindblad: Vec<LindbladDto>,
    pub hamiltonian: Vec<HamiltonianDto>,
    #[serde(rename = "Kprime")]
    pub k_prime: Vec<Vec<f64>>,
}

impl DilationDto {
    pub fn to_spec(&self) -> CliResult<DilationSpec> {
        let lindblad = self
            .lindblad
            .iter()
            .map(|t| Ok(LindbladTerm::new(complex_vector(&t.b), complex_vector(&t.c))?))
            .collect::<CliResult<Vec<_>>>()?;
        let hamiltonian = self
            .hamiltonian
            .iter()
            .map(|t| {
                if t.lambda == 0.0 || !t.lambda.is_finite() {
                    return Err(invalid("Hamiltonian terms need a finite nonzero lambda"));
                }
                Ok(HamiltonianTerm { lambda: t.lambda, w: complex_vector(&t.w) })
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok(DilationSpec::from_parts(self.n, lindblad, hamiltonian, real_matrix(&self.k_prime, "Kprime")?)?)
    }

    pub fn from_spec(spec: &DilationSpec) -> Self {
        Self {
            n: spec.n,
            lindblad: spec
                .lindblad_terms
                .iter()
                .map(|t| LindbladDto { b: complex_vector_dto(&t.b), c: complex_vector_dto(&t.c) })
                .collect(),
            hamiltonian: spec
                .hamiltonian_terms
                .iter()
                .map(|t| HamiltonianDto { lambda: t.lambda, w: complex_vector_dto(&t.w) })
                .collect(),
            k_prime: real_matrix_dto(&spec.k_prime),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelDto {
    pub points: Vec<serde_json::Value>,
    #[serde(rename = "K")]
    pub k: Vec<Vec<Cx>>,
    #[serde(default)]
    pub group: Vec<Vec<usize>>,
}

impl KernelDto {
    /// Permutations may be written 0-based or 1-based; a listed index equal
    /// to the number of points, or no zero anywhere, means 1-based.
    pub fn to_model(&self) -> CliResult<KernelModel> {
        let n = self.points.len();
        let all: Vec<usize> = self.group.iter().flatten().copied().collect();
        let one_based = !all.is_empty() && (all.contains(&n) || !all.contains(&0));
        let group = if one_based {
            if all.contains(&0) {
                return Err(invalid("group mixes 0-based and 1-based indices"));
            }
            self.group.iter().map(|p| p.iter().map(|j| j - 1).collect()).collect()
        } else {
            self.group.clone()
        };
        let points = self
            .points
            .iter()
            .map(|p| match p {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .collect();
        Ok(KernelModel::new(points, complex_matrix(&self.k, "K")?, group)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn kernel(group: serde_json::Value) -> KernelDto {
        serde_json::from_value(json!({
            "points": ["x", 2, "z"],
            "K": [[[1, 0], [0, 0], [0, 0]], [[0, 0], [1, 0], [0, 0]], [[0, 0], [0, 0], [1, 0]]],
            "group": group
        }))
        .unwrap()
    }

    #[test]
    fn permutation_base_detected() {
        let zero = kernel(json!([[1, 2, 0]])).to_model().unwrap();
        let one = kernel(json!([[2, 3, 1]])).to_model().unwrap();
        assert_eq!(zero.group(), one.group());
        assert_eq!(zero.points()[1], "2");
        assert!(kernel(json!([[0, 1, 3]])).to_model().is_err());
    }

    #[test]
    fn state_and_pair_round_trip() {
        let st = GaussianState::coherent(&ComplexVector::from_vec(vec![Complex64::new(0.3, -0.7)])).unwrap();
        let back = GaussianStateDto::from_state(&st).to_state().unwrap();
        assert_eq!(back.phase_vector(), st.phase_vector());
        assert_eq!(back.covariance(), st.covariance());
        let dto: GaussianStateDto =
            serde_json::from_value(json!({ "n": 2, "l": [0, 0], "m": [0], "S": [[0.5, 0], [0, 0.5]] })).unwrap();
        assert!(dto.to_state().is_err());
        let pair = PairDto::from_matrices(&(RealMatrix::identity(2, 2) * -0.5), &RealMatrix::identity(2, 2));
        assert!(pair.to_pair(1e-9).is_ok());
    }

    #[test]
    fn ragged_matrices_rejected() {
        assert!(real_matrix(&[vec![1.0, 2.0], vec![3.0]], "M").is_err());
        assert_eq!(real_matrix(&[], "M").unwrap().nrows(), 0);
    }
}

//! Real and complex dense linear algebra for the phase-space picture.
//!
//! Phase space of `n` modes is `ℝ²ⁿ` with coordinates `(x; y) = (Re z; Im z)`
//! and symplectic form `J = [0 −I; I 0]`. Multiplication by `i` on `ℂⁿ` is `J`
//! on `ℝ²ⁿ`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use num_traits::Float;

use crate::error::{invalid, shape, Error, Result};

pub type RealMatrix = DMatrix<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;
pub type RealVector = DVector<f64>;
pub type ComplexVector = DVector<Complex64>;

/// Default relative tolerance of [`psd_check`].
pub const DEFAULT_PSD_TOL: f64 = 1e-9;

/// `J₂ₙ = [0 −Iₙ; Iₙ 0]`.
pub fn symplectic_form(n: usize) -> Result<RealMatrix> {
    if n == 0 {
        return Err(invalid("symplectic form needs at least one mode"));
    }
    let mut j = RealMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(k, n + k)] = -1.0;
        j[(n + k, k)] = 1.0;
    }
    Ok(j)
}

/// Stacks `(Re z; Im z)`.
pub fn real_embed(z: &ComplexVector) -> RealVector {
    let n = z.len();
    RealVector::from_fn(2 * n, |i, _| if i < n { z[i].re } else { z[i - n].im })
}

/// Inverse of [`real_embed`].
pub fn real_extract(r: &RealVector) -> Result<ComplexVector> {
    if r.len() % 2 != 0 {
        return Err(shape(format!(
            "real phase-space vector must have even length, got {}",
            r.len()
        )));
    }
    let n = r.len() / 2;
    Ok(ComplexVector::from_fn(n, |i, _| Complex64::new(r[i], r[n + i])))
}

pub fn complexify(m: &RealMatrix) -> ComplexMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// `⟨u|v⟩`, antilinear in the first slot.
pub fn inner(u: &ComplexVector, v: &ComplexVector) -> Complex64 {
    u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()
}

pub fn ensure_square<T: nalgebra::Scalar>(m: &DMatrix<T>, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(shape(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

pub fn ensure_dims<T: nalgebra::Scalar>(
    m: &DMatrix<T>,
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(shape(format!(
            "{what} must be {rows}x{cols}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Largest entrywise deviation from symmetry, `max |Mᵢⱼ − Mⱼᵢ|`.
pub fn symmetry_defect(m: &RealMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Largest entrywise deviation from Hermiticity, `max |Hᵢⱼ − conj(Hⱼᵢ)|`.
pub fn hermiticity_defect(h: &ComplexMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..h.nrows() {
        for j in i..h.ncols() {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn symmetrize(m: &RealMatrix) -> RealMatrix {
    (m + m.transpose()) * 0.5
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues descending.
///
/// Column `k` of the returned matrix is the unit eigenvector of eigenvalue `k`.
pub fn symmetric_eigen(m: &RealMatrix) -> (Vec<f64>, RealMatrix) {
    let eig = SymmetricEigen::new(symmetrize(m));
    sort_descending(eig.eigenvalues.as_slice(), &eig.eigenvectors)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
pub fn hermitian_eigen(h: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    sort_descending(eig.eigenvalues.as_slice(), &eig.eigenvectors)
}

fn sort_descending<T: nalgebra::Scalar + Copy>(
    values: &[f64],
    vectors: &DMatrix<T>,
) -> (Vec<f64>, DMatrix<T>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let sorted = order.iter().map(|&k| values[k]).collect();
    let columns = DMatrix::from_fn(vectors.nrows(), order.len(), |i, k| vectors[(i, order[k])]);
    (sorted, columns)
}

/// Outcome of a positive-semidefiniteness test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdReport {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
}

/// Tests `H ⪰ 0`: true iff `λ_min ≥ −tol·(1 + ‖H‖₂)`.
///
/// Inputs whose Hermiticity defect exceeds `tol·(1 + ‖H‖_F)` are rejected.
pub fn psd_check(h: &ComplexMatrix, tol: f64) -> Result<PsdReport> {
    ensure_square(h, "PSD test input")?;
    if !(tol >= 0.0) {
        return Err(invalid("PSD tolerance must be nonnegative"));
    }
    let defect = hermiticity_defect(h);
    if defect > tol.max(1e-12) * (1.0 + h.norm()) {
        return Err(Error::NotHermitian { defect });
    }
    if h.nrows() == 0 {
        return Ok(PsdReport { is_psd: true, min_eigenvalue: 0.0 });
    }
    let (values, _) = hermitian_eigen(h);
    let min_eigenvalue = *values.last().unwrap();
    let spectral = values[0].abs().max(min_eigenvalue.abs());
    Ok(PsdReport {
        is_psd: min_eigenvalue >= -tol * (1.0 + spectral),
        min_eigenvalue,
    })
}

/// Real-matrix convenience wrapper around [`psd_check`].
pub fn psd_check_real(m: &RealMatrix, tol: f64) -> Result<PsdReport> {
    psd_check(&complexify(m), tol)
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
// Largest 1-norms for which the degree-m Padé approximant is accurate to
// double precision without scaling.
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152e0;

fn one_norm<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.clone().modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a Padé approximant.
pub fn expm<T>(a: &DMatrix<T>) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let dim = ensure_square(a, "matrix exponential argument")?;
    if dim == 0 {
        return Ok(a.clone());
    }
    if a.iter().any(|x| !x.modulus().is_finite()) {
        return Err(invalid("matrix exponential argument has non-finite entries"));
    }
    let norm = one_norm(a);
    let ident = DMatrix::<T>::identity(dim, dim);
    let scal = |c: f64| T::from_real(c);

    for &(m, theta) in THETA.iter() {
        if norm <= theta {
            let b: &[f64] = match m {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let a2 = a * a;
            let mut power = ident.clone();
            let mut u_even = &ident * scal(b[1]);
            let mut v = &ident * scal(b[0]);
            for k in 1..=(m / 2) {
                power = &power * &a2;
                u_even += &power * scal(b[2 * k + 1]);
                v += &power * scal(b[2 * k]);
            }
            let u = a * u_even;
            return pade_solve(u, v);
        }
    }

    let s = if norm > THETA13 {
        Float::ceil(Float::log2(norm / THETA13)) as i32
    } else {
        0
    };
    let scaled = a * scal(Float::powi(0.5_f64, s));
    let b = &PADE13;
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * scal(b[13]) + &a4 * scal(b[11]) + &a2 * scal(b[9]))
        + &a6 * scal(b[7])
        + &a4 * scal(b[5])
        + &a2 * scal(b[3])
        + &ident * scal(b[1]);
    let u = &scaled * inner_u;
    let v = &a6 * (&a6 * scal(b[12]) + &a4 * scal(b[10]) + &a2 * scal(b[8]))
        + &a6 * scal(b[6])
        + &a4 * scal(b[4])
        + &a2 * scal(b[2])
        + &ident * scal(b[0]);
    let mut r = pade_solve(u, v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_solve<T>(u: DMatrix<T>, v: DMatrix<T>) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let p = &v + &u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| invalid("Padé denominator is singular"))
}

/// `A_t = e^{tK}` together with the Gram integral `B_t = ∫₀ᵗ e^{sKᵀ} C e^{sK} ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    pub a: RealMatrix,
    pub b: RealMatrix,
}

/// Computes `(e^{tK}, B_t)` from one exponential of the block matrix
/// `t·[−Kᵀ C; 0 K]`, whose upper-right block is `e^{−tKᵀ} B_t`.
pub fn propagator(k: &RealMatrix, c: &RealMatrix, t: f64) -> Result<Propagator> {
    let dim = ensure_square(k, "K")?;
    ensure_dims(c, dim, dim, "C")?;
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let defect = symmetry_defect(c);
    if defect > 1e-10 * (1.0 + c.norm()) {
        return Err(invalid(format!("C must be symmetric (defect {defect:.3e})")));
    }
    let mut block = RealMatrix::zeros(2 * dim, 2 * dim);
    block.view_mut((0, 0), (dim, dim)).copy_from(&(-k.transpose() * t));
    block.view_mut((0, dim), (dim, dim)).copy_from(&(c * t));
    block.view_mut((dim, dim), (dim, dim)).copy_from(&(k * t));
    let e = expm(&block)?;
    let a = e.view((dim, dim), (dim, dim)).into_owned();
    let upper = e.view((0, dim), (dim, dim)).into_owned();
    let b = symmetrize(&(a.transpose() * upper));
    Ok(Propagator { a, b })
}

/// `B_t = ∫₀ᵗ e^{sKᵀ} C e^{sK} ds` by the block-exponential method.
pub fn gram_integral(k: &RealMatrix, c: &RealMatrix, t: f64) -> Result<RealMatrix> {
    propagator(k, c, t).map(|p| p.b)
}

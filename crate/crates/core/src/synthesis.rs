//! Dilation data for a quasifree semigroup.
//!
//! A single coupling `L = a(u) + a†(v)` produces the Lindblad generator
//! `−½{L†L W + W L†L − 2L†WL}` on Weyl operators, which is quasifree with the
//! pair `(K(u,v), C(u,v))` fixed by
//!
//! ```text
//! R⁻¹K(u,v)Rz = (conj(λ(z))·v − λ(z)·u)/2,   (Rz)ᵀC(u,v)(Rz) = |λ(z)|²,   λ(z) = ⟨u|z⟩ + ⟨z|v⟩.
//! ```
//!
//! Its noise matrix is the rank-one projector onto `w = (u + v̄; −i(u − v̄))`.
//! Conversely [`decompose`] splits an admissible `(K, C)` into rank-one
//! couplings from the spectral decomposition of `D = C + i(KᵀJ + JK)`, a
//! residual `K′ ∈ sp(2n)` and the quadratic Hamiltonian
//! `H = ¼Σ λⱼ (a(wⱼ) + a†(wⱼ))²` built from `N = JK′`, which satisfies
//! `−i[H, W(z)] = {a†(g) − a(g) + ½(⟨g|z⟩ − ⟨z|g⟩)}W(z)` with `g = R⁻¹K′Rz`.
//!
//! Note the Heisenberg-picture unitary part is `−i[H, ·]`, so the
//! Schrödinger-picture Hamiltonian of the dilation is `−H`; see
//! [`crate::fock::lindblad_evolve`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{invalid, shape, Error, Result};
use crate::linalg::{
    hermitian_eigen, inner, real_embed, real_extract, symmetric_eigen, symplectic_form,
    ComplexVector, RealMatrix, RealVector, DEFAULT_PSD_TOL,
};
use crate::quasifree::{admissible, GeneratorCoefficients};

pub use crate::quasifree::noise_matrix;

/// Default relative eigenvalue cut used by [`decompose`].
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

fn check_pair_lengths(u: &ComplexVector, v: &ComplexVector) -> Result<usize> {
    if u.len() != v.len() || u.is_empty() {
        return Err(shape(format!(
            "coupling vectors must have equal nonzero length, got {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(u.len())
}

/// `λ(z) = ⟨u|z⟩ + ⟨z|v⟩`.
pub fn lambda_form(u: &ComplexVector, v: &ComplexVector, z: &ComplexVector) -> Result<Complex64> {
    let n = check_pair_lengths(u, v)?;
    if z.len() != n {
        return Err(shape(format!("z has length {}, expected {n}", z.len())));
    }
    Ok(inner(u, z) + inner(z, v))
}

/// `w = (u + v̄; −i(u − v̄))`; `D(K(u,v), C(u,v)) = w w†`.
pub fn coupling_vector(u: &ComplexVector, v: &ComplexVector) -> Result<ComplexVector> {
    let n = check_pair_lengths(u, v)?;
    Ok(ComplexVector::from_fn(2 * n, |i, _| {
        if i < n {
            u[i] + v[i].conj()
        } else {
            (u[i - n] - v[i - n].conj()) * -Complex64::i()
        }
    }))
}

/// The quasifree pair `(K(u,v), C(u,v))` of the coupling `L = a(u) + a†(v)`.
///
/// `K` is assembled column by column from the generator-matching relation on
/// the real basis `{e_k, i·e_k}`; `C = Re(w w†)`.
pub fn pair_from_coupling(u: &ComplexVector, v: &ComplexVector) -> Result<(RealMatrix, RealMatrix)> {
    let n = check_pair_lengths(u, v)?;
    let gain = |z: &ComplexVector| -> ComplexVector {
        let lam = inner(u, z) + inner(z, v);
        (v * lam.conj() - u * lam) * Complex64::new(0.5, 0.0)
    };
    let mut k = RealMatrix::zeros(2 * n, 2 * n);
    for col in 0..n {
        let mut e = ComplexVector::zeros(n);
        e[col] = Complex64::new(1.0, 0.0);
        k.set_column(col, &real_embed(&gain(&e)));
        e[col] = Complex64::i();
        k.set_column(n + col, &real_embed(&gain(&e)));
    }
    let w = coupling_vector(u, v)?;
    let c = (&w * w.adjoint()).map(|x| x.re);
    Ok((k, c))
}

/// A Lindblad operator `L = a(u) + a†(v)` stored through its noise-matrix
/// column `(b; c)` with `b = u + v̄`, `c = −i(u − v̄)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladTerm {
    pub b: ComplexVector,
    pub c: ComplexVector,
}

impl LindbladTerm {
    pub fn new(b: ComplexVector, c: ComplexVector) -> Result<Self> {
        check_pair_lengths(&b, &c)?;
        Ok(Self { b, c })
    }

    pub fn from_coupling(u: &ComplexVector, v: &ComplexVector) -> Result<Self> {
        let w = coupling_vector(u, v)?;
        let n = u.len();
        Ok(Self {
            b: w.rows(0, n).into_owned(),
            c: w.rows(n, n).into_owned(),
        })
    }

    /// `u = (b + ic)/2`.
    pub fn u(&self) -> ComplexVector {
        (&self.b + &self.c * Complex64::i()) * Complex64::new(0.5, 0.0)
    }

    /// `v = conj((b − ic)/2)`.
    pub fn v(&self) -> ComplexVector {
        ((&self.b - &self.c * Complex64::i()) * Complex64::new(0.5, 0.0)).map(|x| x.conj())
    }

    pub fn pair(&self) -> (RealMatrix, RealMatrix) {
        pair_from_coupling(&self.u(), &self.v()).expect("lengths checked at construction")
    }

    pub fn generator_action(&self, z: &ComplexVector) -> Result<GeneratorCoefficients> {
        let (k, c) = self.pair();
        generator_from_pair(&k, &c, z)
    }
}

fn generator_from_pair(k: &RealMatrix, c: &RealMatrix, z: &ComplexVector) -> Result<GeneratorCoefficients> {
    if 2 * z.len() != k.nrows() {
        return Err(shape(format!("z has length {}, expected {}", z.len(), k.nrows() / 2)));
    }
    let r = real_embed(z);
    let gain = real_extract(&(k * &r))?;
    let quad = r.dot(&(c * &r));
    let scalar = (inner(&gain, z) - inner(z, &gain) - Complex64::new(quad, 0.0)) * 0.5;
    Ok(GeneratorCoefficients { gain, scalar })
}

/// One term `¼λ(a(w) + a†(w))²` of the quadratic Hamiltonian, `w = β + iγ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianTerm {
    pub lambda: f64,
    pub w: ComplexVector,
}

impl HamiltonianTerm {
    /// `λ(β; γ)(β; γ)ᵀ`, this term's contribution to `N = JK′`.
    pub fn symmetric_part(&self) -> RealMatrix {
        let r = real_embed(&self.w);
        &r * r.transpose() * self.lambda
    }
}

/// `−i[H, W(z)]` for `H = ¼Σλⱼ(a(wⱼ) + a†(wⱼ))²`: gain `R⁻¹K′Rz`, scalar
/// `½(⟨g|z⟩ − ⟨z|g⟩)`.
///
/// `k_prime` must equal `−J·Σλⱼ(βⱼ;γⱼ)(βⱼ;γⱼ)ᵀ` for the supplied terms, as
/// produced by [`decompose`].
pub fn hamiltonian_action(
    hterms: &[HamiltonianTerm],
    k_prime: &RealMatrix,
    z: &ComplexVector,
) -> Result<GeneratorCoefficients> {
    let n = z.len();
    if k_prime.nrows() != 2 * n || k_prime.ncols() != 2 * n {
        return Err(shape(format!("K' must be {0}x{0}", 2 * n)));
    }
    if let Some(t) = hterms.iter().find(|t| t.w.len() != n) {
        return Err(shape(format!("Hamiltonian vector has length {}, expected {n}", t.w.len())));
    }
    let r = real_embed(z);
    let gain = real_extract(&(k_prime * &r))?;
    let scalar = (inner(&gain, z) - inner(z, &gain)) * 0.5;
    Ok(GeneratorCoefficients { gain, scalar })
}

/// Lindblad couplings, quadratic Hamiltonian and symplectic residual of a
/// quasifree pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DilationSpec {
    pub n: usize,
    pub lindblad_terms: Vec<LindbladTerm>,
    pub hamiltonian_terms: Vec<HamiltonianTerm>,
    pub k_prime: RealMatrix,
    pub source_k: RealMatrix,
    pub source_c: RealMatrix,
}

/// Residuals of the identities a decomposition must satisfy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionResiduals {
    /// `max |K − ΣK(uⱼ,vⱼ) − K′|`
    pub k_residual: f64,
    /// `max |C − ΣC(uⱼ,vⱼ)|`
    pub c_residual: f64,
    /// `max |K′ᵀJ + JK′|`
    pub symplectic_defect: f64,
    /// `max |JK′ − Σλⱼ(βⱼ;γⱼ)(βⱼ;γⱼ)ᵀ|`
    pub hamiltonian_residual: f64,
}

impl DilationSpec {
    /// Assembles a spec from its parts; the source pair is reconstructed.
    pub fn from_parts(
        n: usize,
        lindblad_terms: Vec<LindbladTerm>,
        hamiltonian_terms: Vec<HamiltonianTerm>,
        k_prime: RealMatrix,
    ) -> Result<Self> {
        if n == 0 {
            return Err(invalid("a dilation needs at least one mode"));
        }
        if k_prime.nrows() != 2 * n || k_prime.ncols() != 2 * n {
            return Err(shape(format!("K' must be {0}x{0}", 2 * n)));
        }
        if lindblad_terms.iter().any(|t| t.b.len() != n) {
            return Err(shape("Lindblad coupling of wrong length"));
        }
        if hamiltonian_terms.iter().any(|t| t.w.len() != n) {
            return Err(shape("Hamiltonian vector of wrong length"));
        }
        let mut spec = Self {
            n,
            lindblad_terms,
            hamiltonian_terms,
            source_k: k_prime.clone(),
            source_c: RealMatrix::zeros(2 * n, 2 * n),
            k_prime,
        };
        let (ks, cs) = spec.lindblad_sum();
        spec.source_k += ks;
        spec.source_c = cs;
        Ok(spec)
    }

    pub fn rank(&self) -> usize {
        self.lindblad_terms.len()
    }

    /// `(ΣK(uⱼ,vⱼ), ΣC(uⱼ,vⱼ))`.
    pub fn lindblad_sum(&self) -> (RealMatrix, RealMatrix) {
        let dim = 2 * self.n;
        self.lindblad_terms.iter().fold(
            (RealMatrix::zeros(dim, dim), RealMatrix::zeros(dim, dim)),
            |(ka, ca), t| {
                let (k, c) = t.pair();
                (ka + k, ca + c)
            },
        )
    }

    /// `Σλⱼ(βⱼ;γⱼ)(βⱼ;γⱼ)ᵀ`.
    pub fn hamiltonian_matrix(&self) -> RealMatrix {
        let dim = 2 * self.n;
        self.hamiltonian_terms
            .iter()
            .fold(RealMatrix::zeros(dim, dim), |acc, t| acc + t.symmetric_part())
    }

    pub fn residuals(&self) -> DecompositionResiduals {
        let j = symplectic_form(self.n).expect("n >= 1");
        let (ks, cs) = self.lindblad_sum();
        DecompositionResiduals {
            k_residual: (&self.source_k - ks - &self.k_prime).camax(),
            c_residual: (&self.source_c - cs).camax(),
            symplectic_defect: (self.k_prime.transpose() * &j + &j * &self.k_prime).camax(),
            hamiltonian_residual: (&j * &self.k_prime - self.hamiltonian_matrix()).camax(),
        }
    }

    pub fn hamiltonian_action(&self, z: &ComplexVector) -> Result<GeneratorCoefficients> {
        hamiltonian_action(&self.hamiltonian_terms, &self.k_prime, z)
    }

    /// Sum of every Lindblad term's generator and the Hamiltonian part.
    pub fn generator_action(&self, z: &ComplexVector) -> Result<GeneratorCoefficients> {
        let mut acc = self.hamiltonian_action(z)?;
        for t in &self.lindblad_terms {
            acc = acc + t.generator_action(z)?;
        }
        Ok(acc)
    }

    pub fn report(&self) -> DilationReport {
        DilationReport::new(self)
    }
}

fn fix_phase(v: &mut ComplexVector) {
    let scale = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if let Some(first) = v.iter().find(|x| x.norm() > 1e-12 * scale).copied() {
        let phase = first.conj() / first.norm();
        *v *= phase;
    }
}

fn fix_sign(v: &mut RealVector) {
    let scale = v.camax();
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * scale).copied() {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

/// Splits an admissible pair into Lindblad couplings, a quadratic
/// Hamiltonian and a symplectic residual.
///
/// Eigenvalues of `D` (resp. `N`) are kept when they exceed
/// `rank_tol·max(λ_max, ‖K‖_F + ‖C‖_F)`, so that a `D` made only of rounding
/// noise has rank zero.
pub fn decompose(k: &RealMatrix, c: &RealMatrix, rank_tol: f64) -> Result<DilationSpec> {
    if !(rank_tol > 0.0) {
        return Err(invalid("rank tolerance must be positive"));
    }
    let adm = admissible(k, c, DEFAULT_PSD_TOL)?;
    if !adm.is_admissible {
        return Err(Error::Inadmissible {
            min_eigenvalue: adm.min_eigenvalue,
        });
    }
    let n = k.nrows() / 2;
    let scale = k.norm() + c.norm();

    let d = noise_matrix(k, c)?;
    let (vals, vecs) = hermitian_eigen(&d);
    let cut = rank_tol * vals[0].max(scale);
    let mut lindblad_terms = Vec::new();
    for (idx, &lam) in vals.iter().enumerate() {
        if lam <= cut {
            break;
        }
        let mut col: ComplexVector = vecs.column(idx).into_owned();
        fix_phase(&mut col);
        let col = col * Complex64::new(lam.sqrt(), 0.0);
        lindblad_terms.push(LindbladTerm {
            b: col.rows(0, n).into_owned(),
            c: col.rows(n, n).into_owned(),
        });
    }

    let mut spec = DilationSpec {
        n,
        lindblad_terms,
        hamiltonian_terms: Vec::new(),
        k_prime: RealMatrix::zeros(2 * n, 2 * n),
        source_k: k.clone(),
        source_c: c.clone(),
    };
    let (ks, _) = spec.lindblad_sum();
    spec.k_prime = k - ks;

    let j = symplectic_form(n)?;
    let jk = &j * k;
    let sym = (&jk + jk.transpose()) * 0.5;
    let (nvals, nvecs) = symmetric_eigen(&sym);
    let nmax = nvals.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let ncut = rank_tol * nmax.max(k.norm());
    for (idx, &lam) in nvals.iter().enumerate() {
        if lam.abs() <= ncut {
            continue;
        }
        let mut col: RealVector = nvecs.column(idx).into_owned();
        fix_sign(&mut col);
        spec.hamiltonian_terms.push(HamiltonianTerm {
            lambda: lam,
            w: real_extract(&col)?,
        });
    }
    Ok(spec)
}

/// Human-readable and structured summary of the dilating noisy Schrödinger
/// equation `dU = {Σ(LⱼdAⱼ† − Lⱼ†dAⱼ) − (iH_S + ½ΣLⱼ†Lⱼ)dt}U`.
#[derive(Debug, Clone, PartialEq)]
pub struct DilationReport {
    pub modes: usize,
    /// Number of independent noise channels `r`.
    pub noise_dimension: usize,
    /// `(u_j, v_j)` with `L_j = a(u_j) + a†(v_j)`.
    pub couplings: Vec<(ComplexVector, ComplexVector)>,
    pub hamiltonian: Vec<HamiltonianTerm>,
    pub k_prime: RealMatrix,
    pub residuals: DecompositionResiduals,
}

impl DilationReport {
    fn new(spec: &DilationSpec) -> Self {
        Self {
            modes: spec.n,
            noise_dimension: spec.rank(),
            couplings: spec.lindblad_terms.iter().map(|t| (t.u(), t.v())).collect(),
            hamiltonian: spec.hamiltonian_terms.clone(),
            k_prime: spec.k_prime.clone(),
            residuals: spec.residuals(),
        }
    }

    /// True when there is neither noise nor Hamiltonian.
    pub fn is_trivial(&self) -> bool {
        self.noise_dimension == 0 && self.hamiltonian.is_empty()
    }

    /// True when the dilation is an ordinary Schrödinger equation (`r = 0`).
    pub fn is_closed(&self) -> bool {
        self.noise_dimension == 0
    }
}

fn fmt_complex(z: Complex64) -> String {
    let re = z.re + 0.0;
    if z.im.is_sign_negative() && z.im != 0.0 {
        format!("{re:.6}-{:.6}i", -z.im)
    } else {
        format!("{re:.6}+{:.6}i", z.im.abs())
    }
}

fn fmt_vector(v: &ComplexVector) -> String {
    let parts: Vec<String> = v.iter().map(|x| fmt_complex(*x)).collect();
    format!("({})", parts.join(", "))
}

impl fmt::Display for DilationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "modes: {}", self.modes)?;
        writeln!(f, "noise dimension r: {}", self.noise_dimension)?;
        if self.is_trivial() {
            writeln!(f, "trivial evolution: U(t) = I")?;
        } else if self.is_closed() {
            writeln!(f, "no noise: the dilation reduces to dU = -i H_S U dt")?;
        }
        for (j, (u, v)) in self.couplings.iter().enumerate() {
            writeln!(f, "L_{} = a(u) + a†(v), u = {}, v = {}", j + 1, fmt_vector(u), fmt_vector(v))?;
        }
        for (j, t) in self.hamiltonian.iter().enumerate() {
            writeln!(f, "H term {}: (1/4)·{:.6}·(a(w) + a†(w))², w = {}", j + 1, t.lambda, fmt_vector(&t.w))?;
        }
        if !self.hamiltonian.is_empty() {
            writeln!(f, "system Hamiltonian of the dilation: H_S = -H")?;
        }
        writeln!(
            f,
            "residuals: |C - ΣC_j| = {:.3e}, |K'ᵀJ + JK'| = {:.3e}, |JK' - N_H| = {:.3e}",
            self.residuals.c_residual, self.residuals.symplectic_defect, self.residuals.hamiltonian_residual
        )
    }
}

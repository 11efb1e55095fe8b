//! Truncated Fock-space oracle.
//!
//! Each mode keeps the occupation levels `0 … cutoff−1`; the `n`-mode space is
//! the mode-major tensor product (mode 0 is the most significant digit of a
//! basis index). Ladder operators are stored sparse, states and Weyl
//! operators dense. Everything here is a brute-force check on the
//! closed-form phase-space formulas of [`crate::quasifree`] and
//! [`crate::synthesis`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{invalid, shape, Error, Result};
use crate::gaussian::GaussianState;
use crate::linalg::{expm, hermitian_eigen, hermiticity_defect, ComplexMatrix, ComplexVector, RealMatrix, RealVector};
use crate::quasifree::{GeneratorCoefficients, QuasifreePair};
use crate::synthesis::{decompose, DilationSpec, HamiltonianTerm, LindbladTerm, DEFAULT_RANK_TOL};

/// Largest total dimension [`FockRep::build`] accepts.
pub const DEFAULT_DIM_CAP: usize = 4096;
/// Top-level population below which oracle results are trusted.
pub const TRUSTED_LEAKAGE: f64 = 1e-8;
/// Top-level population above which [`oracle_compare`] refuses to run.
pub const MAX_LEAKAGE: f64 = 1e-6;
/// Default RK4 resolution of the master-equation integrator.
pub const DEFAULT_STEPS_PER_UNIT: usize = 2000;
/// Trace drift that aborts an integration.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Square complex matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseOp {
    /// Sums duplicate entries and drops exact zeros.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < dim && c < dim);
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let op = Self { dim, row_ptr, cols, vals };
        op.pruned()
    }

    fn pruned(self) -> Self {
        if self.vals.iter().all(|v| *v != ZERO) {
            return self;
        }
        let mut triplets = Vec::with_capacity(self.vals.len());
        for r in 0..self.dim {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[idx] != ZERO {
                    triplets.push((r, self.cols[idx], self.vals[idx]));
                }
            }
        }
        let mut row_ptr = vec![0; self.dim + 1];
        for &(r, _, _) in &triplets {
            row_ptr[r + 1] += 1;
        }
        for r in 0..self.dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            dim: self.dim,
            row_ptr,
            cols: triplets.iter().map(|t| t.1).collect(),
            vals: triplets.iter().map(|t| t.2).collect(),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_triplets(dim, Vec::new())
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, ONE)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |idx| (r, self.cols[idx], self.vals[idx]))
        })
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (r, c, v * s)).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "sparse operator dimensions differ");
        Self::from_triplets(self.dim, self.triplets().chain(other.triplets()).collect())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect())
    }

    /// `self · other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "sparse operator dimensions differ");
        let mut acc = vec![ZERO; self.dim];
        let mut touched = vec![false; self.dim];
        let mut list = Vec::new();
        let mut triplets = Vec::new();
        for r in 0..self.dim {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                let (k, a) = (self.cols[idx], self.vals[idx]);
                for jdx in other.row_ptr[k]..other.row_ptr[k + 1] {
                    let c = other.cols[jdx];
                    if !touched[c] {
                        touched[c] = true;
                        list.push(c);
                    }
                    acc[c] += a * other.vals[jdx];
                }
            }
            for &c in &list {
                triplets.push((r, c, acc[c]));
                acc[c] = ZERO;
                touched[c] = false;
            }
            list.clear();
        }
        Self::from_triplets(self.dim, triplets)
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// `self · m` for a dense `m`.
    pub fn mul_dense(&self, m: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, m.nrows(), "dimension mismatch in sparse product");
        let mut out = ComplexMatrix::zeros(self.dim, m.ncols());
        let n = self.dim;
        for (src, dst) in m.as_slice().chunks_exact(n).zip(out.as_mut_slice().chunks_exact_mut(n)) {
            for (r, d) in dst.iter_mut().enumerate() {
                let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
                *d = self.vals[lo..hi].iter().zip(&self.cols[lo..hi]).map(|(v, &c)| v * src[c]).sum();
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &ComplexVector) -> ComplexVector {
        assert_eq!(self.dim, v.len(), "dimension mismatch in sparse product");
        ComplexVector::from_fn(self.dim, |r, _| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(|idx| self.vals[idx] * v[self.cols[idx]]).sum()
        })
    }

    /// `Tr(self · m)`.
    pub fn trace_product(&self, m: &ComplexMatrix) -> Complex64 {
        self.triplets().map(|(r, c, v)| v * m[(c, r)]).sum()
    }
}

/// Truncated `n`-mode Fock representation.
#[derive(Debug, Clone)]
pub struct FockRep {
    n: usize,
    cutoff: usize,
    dim: usize,
    a: Vec<SparseOp>,
    adag: Vec<SparseOp>,
}

impl FockRep {
    pub fn build(n: usize, cutoff: usize) -> Result<Self> {
        Self::build_with_cap(n, cutoff, DEFAULT_DIM_CAP)
    }

    pub fn build_with_cap(n: usize, cutoff: usize, cap: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("Fock representation needs at least one mode"));
        }
        if cutoff < 2 {
            return Err(invalid(format!("cutoff must be at least 2, got {cutoff}")));
        }
        let dim = (0..n).try_fold(1usize, |d, _| d.checked_mul(cutoff)).unwrap_or(usize::MAX);
        if dim > cap {
            return Err(Error::DimensionCap { dim, cap });
        }
        let mut a = Vec::with_capacity(n);
        for j in 0..n {
            let stride = cutoff.pow((n - 1 - j) as u32);
            let mut triplets = Vec::new();
            for idx in 0..dim {
                let level = (idx / stride) % cutoff;
                if level > 0 {
                    triplets.push((idx - stride, idx, Complex64::new((level as f64).sqrt(), 0.0)));
                }
            }
            a.push(SparseOp::from_triplets(dim, triplets));
        }
        let adag = a.iter().map(SparseOp::adjoint).collect();
        Ok(Self { n, cutoff, dim, a, adag })
    }

    pub fn modes(&self) -> usize {
        self.n
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a(&self, j: usize) -> &SparseOp {
        &self.a[j]
    }

    pub fn adag(&self, j: usize) -> &SparseOp {
        &self.adag[j]
    }

    /// Occupation of mode `j` in basis state `idx`.
    pub fn level(&self, idx: usize, j: usize) -> usize {
        (idx / self.cutoff.pow((self.n - 1 - j) as u32)) % self.cutoff
    }

    fn check_len(&self, u: &ComplexVector) -> Result<()> {
        if u.len() != self.n {
            return Err(shape(format!("vector has length {}, expected {}", u.len(), self.n)));
        }
        Ok(())
    }

    /// `a(u) = Σ ūⱼ aⱼ` (antilinear in `u`).
    pub fn annihilation(&self, u: &ComplexVector) -> Result<SparseOp> {
        self.check_len(u)?;
        Ok((0..self.n).fold(SparseOp::zero(self.dim), |acc, j| acc.add(&self.a[j].scale(u[j].conj()))))
    }

    /// `a†(u) = Σ uⱼ aⱼ†`.
    pub fn creation(&self, u: &ComplexVector) -> Result<SparseOp> {
        self.check_len(u)?;
        Ok((0..self.n).fold(SparseOp::zero(self.dim), |acc, j| acc.add(&self.adag[j].scale(u[j]))))
    }

    /// `qⱼ = (aⱼ + aⱼ†)/√2`.
    pub fn position(&self, j: usize) -> SparseOp {
        self.a[j].add(&self.adag[j]).scale(Complex64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0))
    }

    /// `pⱼ = (aⱼ − aⱼ†)/(i√2)`.
    pub fn momentum(&self, j: usize) -> SparseOp {
        self.a[j]
            .add(&self.adag[j].scale(-ONE))
            .scale(Complex64::new(0.0, -core::f64::consts::FRAC_1_SQRT_2))
    }

    pub fn number(&self, j: usize) -> SparseOp {
        self.adag[j].mul(&self.a[j])
    }

    /// The observables `(p₁ … pₙ, −q₁ … −qₙ)` in covariance order.
    pub fn phase_observables(&self) -> Vec<SparseOp> {
        (0..self.n)
            .map(|j| self.momentum(j))
            .chain((0..self.n).map(|j| self.position(j).scale(-ONE)))
            .collect()
    }

    fn single_mode_ladder(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cutoff, self.cutoff, |r, c| {
            if c == r + 1 {
                Complex64::new((c as f64).sqrt(), 0.0)
            } else {
                ZERO
            }
        })
    }

    /// `W(z) = exp(a†(z) − a(z))`, as a Kronecker product of single-mode exponentials.
    pub fn weyl_matrix(&self, z: &ComplexVector) -> Result<ComplexMatrix> {
        self.check_len(z)?;
        let a = self.single_mode_ladder();
        let adag = a.adjoint();
        let mut w = ComplexMatrix::identity(1, 1);
        for j in 0..self.n {
            let gen = &adag * z[j] - &a * z[j].conj();
            w = w.kronecker(&expm(&gen)?);
        }
        let mut vac = ComplexVector::zeros(self.dim);
        vac[0] = ONE;
        let leak = self.leakage_of_vector(&(&w * vac));
        if leak > TRUSTED_LEAKAGE {
            warn!("Weyl operator at |z| = {:.3} leaks {leak:.2e} to the top Fock level", z.norm());
        }
        Ok(w)
    }

    /// `ψ(α) = e^{−‖α‖²/2} e(α)`, truncated.
    pub fn coherent_vector(&self, alpha: &ComplexVector) -> Result<ComplexVector> {
        self.check_len(alpha)?;
        let mut psi = ComplexVector::from_element(1, ONE);
        for j in 0..self.n {
            let mut single = ComplexVector::zeros(self.cutoff);
            let mut term = Complex64::new((-alpha[j].norm_sqr() / 2.0).exp(), 0.0);
            for k in 0..self.cutoff {
                single[k] = term;
                term *= alpha[j] / (k as f64 + 1.0).sqrt();
            }
            psi = psi.kronecker(&single);
        }
        let leak = self.leakage_of_vector(&psi);
        if leak > TRUSTED_LEAKAGE {
            warn!("coherent vector |α| = {:.3} leaks {leak:.2e} to the top Fock level", alpha.norm());
        }
        Ok(psi)
    }

    /// Basis vector of the given occupation numbers.
    pub fn number_state(&self, levels: &[usize]) -> Result<ComplexVector> {
        if levels.len() != self.n || levels.iter().any(|&k| k >= self.cutoff) {
            return Err(invalid("occupation numbers out of range"));
        }
        let idx = levels.iter().fold(0, |acc, &k| acc * self.cutoff + k);
        let mut v = ComplexVector::zeros(self.dim);
        v[idx] = ONE;
        Ok(v)
    }

    fn leakage_of_vector(&self, psi: &ComplexVector) -> f64 {
        (0..self.n)
            .map(|j| {
                (0..self.dim)
                    .filter(|&i| self.level(i, j) == self.cutoff - 1)
                    .map(|i| psi[i].norm_sqr())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Largest top-level population over all modes.
    pub fn leakage(&self, rho: &DensityMatrix) -> f64 {
        (0..self.n)
            .map(|j| {
                (0..self.dim)
                    .filter(|&i| self.level(i, j) == self.cutoff - 1)
                    .map(|i| rho.0[(i, i)].re)
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// `L = a(u) + a†(v)` for a Lindblad term.
    pub fn lindblad_operator(&self, term: &LindbladTerm) -> Result<SparseOp> {
        Ok(self.annihilation(&term.u())?.add(&self.creation(&term.v())?))
    }

    /// `H = ¼Σλⱼ(a(wⱼ) + a†(wⱼ))²`.
    pub fn hamiltonian(&self, terms: &[HamiltonianTerm]) -> Result<SparseOp> {
        let mut h = SparseOp::zero(self.dim);
        for t in terms {
            let q = self.annihilation(&t.w)?.add(&self.creation(&t.w)?);
            h = h.add(&q.mul(&q).scale(Complex64::new(0.25 * t.lambda, 0.0)));
        }
        Ok(h)
    }

    /// `{a†(g) − a(g) + scalar}·W(z)`, the operator a generator produces on `W(z)`.
    pub fn generator_matrix(&self, coeffs: &GeneratorCoefficients, z: &ComplexVector) -> Result<ComplexMatrix> {
        let field = self
            .creation(&coeffs.gain)?
            .add(&self.annihilation(&coeffs.gain)?.scale(-ONE))
            .add(&SparseOp::identity(self.dim).scale(coeffs.scalar));
        Ok(field.mul_dense(&self.weyl_matrix(z)?))
    }
}

/// `⟨φ|M|ψ⟩`.
pub fn matrix_element(phi: &ComplexVector, m: &ComplexMatrix, psi: &ComplexVector) -> Complex64 {
    phi.dotc(&(m * psi))
}

/// Density matrix on a truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

/// Trace, Hermiticity and positivity diagnostics of a density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityCheck {
    pub trace_error: f64,
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
}

impl DensityCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.trace_error <= tol && self.hermiticity_defect <= tol && self.min_eigenvalue >= -tol
    }
}

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        crate::linalg::ensure_square(&m, "density matrix")?;
        Ok(Self(m))
    }

    /// `|ψ⟩⟨ψ|/⟨ψ|ψ⟩`.
    pub fn from_pure(psi: &ComplexVector) -> Self {
        let norm = psi.norm_squared();
        Self(psi * psi.adjoint() / Complex64::new(norm, 0.0))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    /// `Tr ρ M`.
    pub fn expectation(&self, m: &ComplexMatrix) -> Complex64 {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|k| self.0[(i, k)] * m[(k, i)]).sum::<Complex64>())
            .sum()
    }

    pub fn check(&self) -> DensityCheck {
        let (vals, _) = hermitian_eigen(&self.0);
        DensityCheck {
            trace_error: (self.trace() - ONE).norm(),
            hermiticity_defect: hermiticity_defect(&self.0),
            min_eigenvalue: vals.last().copied().unwrap_or(0.0),
        }
    }
}

/// Precomputed right-hand side `ρ ↦ Gρ + ρG† + ΣLρL†` of the master equation.
struct MasterEquation {
    drift: SparseOp,
    jumps: Vec<SparseOp>,
}

impl MasterEquation {
    fn new(rep: &FockRep, spec: &DilationSpec) -> Result<Self> {
        if spec.n != rep.modes() {
            return Err(shape(format!("dilation acts on {} modes, representation has {}", spec.n, rep.modes())));
        }
        let jumps = spec
            .lindblad_terms
            .iter()
            .map(|t| rep.lindblad_operator(t))
            .collect::<Result<Vec<_>>>()?;
        // Schrödinger-picture Hamiltonian is −H, so −i(−H) = +iH.
        let mut drift = rep.hamiltonian(&spec.hamiltonian_terms)?.scale(Complex64::i());
        for l in &jumps {
            drift = drift.add(&l.adjoint().mul(l).scale(Complex64::new(-0.5, 0.0)));
        }
        Ok(Self { drift, jumps })
    }

    fn rhs(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let x = self.drift.mul_dense(rho);
        let mut out = &x + x.adjoint();
        for l in &self.jumps {
            let lr = l.mul_dense(rho);
            out += l.mul_dense(&lr.adjoint());
        }
        out
    }
}

/// Integrates `dρ/dt = i[H, ρ] + Σ(LⱼρLⱼ† − ½{Lⱼ†Lⱼ, ρ})` with fixed-step RK4.
///
/// `H` and `Lⱼ = a(uⱼ) + a†(vⱼ)` come from `spec`; `steps` is the total
/// number of steps over `[0, t]`. A trace drift beyond
/// [`TRACE_DRIFT_LIMIT`] or a Frobenius norm above one (impossible for a
/// state) aborts with [`Error::Unstable`].
pub fn lindblad_evolve(
    rep: &FockRep,
    rho0: &DensityMatrix,
    spec: &DilationSpec,
    t: f64,
    steps: usize,
) -> Result<DensityMatrix> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    if rho0.dim() != rep.dim() {
        return Err(shape(format!("density matrix is {0}x{0}, representation has dimension {1}", rho0.dim(), rep.dim())));
    }
    let trace0 = rho0.trace();
    if (trace0 - ONE).norm() > 1e-9 || hermiticity_defect(rho0.matrix()) > 1e-9 {
        return Err(invalid("initial density matrix must be Hermitian with unit trace"));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    if steps == 0 {
        return Err(invalid("need at least one integration step"));
    }
    let eq = MasterEquation::new(rep, spec)?;
    integrate(&eq, rho0.0.clone(), t, steps).map(DensityMatrix)
}

fn integrate(eq: &MasterEquation, mut rho: ComplexMatrix, t: f64, steps: usize) -> Result<ComplexMatrix> {
    let trace0 = rho.trace();
    let h = t / steps as f64;
    let half = Complex64::new(h / 2.0, 0.0);
    let full = Complex64::new(h, 0.0);
    let sixth = Complex64::new(h / 6.0, 0.0);
    let two = Complex64::new(2.0, 0.0);
    for step in 0..steps {
        let k1 = eq.rhs(&rho);
        let k2 = eq.rhs(&(&rho + &k1 * half));
        let k3 = eq.rhs(&(&rho + &k2 * half));
        let k4 = eq.rhs(&(&rho + &k3 * full));
        rho += (k1 + k2 * two + k3 * two + k4) * sixth;
        // the right-hand side assumes ρ = ρ†; drop the rounding drift
        rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
        let drift = (rho.trace() - trace0).norm();
        if !(drift <= TRACE_DRIFT_LIMIT) {
            return Err(Error::Unstable(format!("trace drift {drift:.3e} after step {}", step + 1)));
        }
        let norm = rho.norm();
        if !(norm <= 1.0 + 1e-6) {
            return Err(Error::Unstable(format!(
                "Frobenius norm {norm:.3e} after step {}; step size {h:.3e} too large",
                step + 1
            )));
        }
    }
    Ok(rho)
}

/// Means and symmetrised covariance of `(p, −q)` in the state `ρ`.
pub fn state_moments(rep: &FockRep, rho: &DensityMatrix) -> Result<GaussianState> {
    if rho.dim() != rep.dim() {
        return Err(shape("density matrix does not match the representation"));
    }
    let n = rep.modes();
    let obs = rep.phase_observables();
    let means: Vec<f64> = obs.iter().map(|x| x.trace_product(rho.matrix()).re).collect();
    let products: Vec<ComplexMatrix> = obs.iter().map(|x| x.mul_dense(rho.matrix())).collect();
    let mut s = RealMatrix::zeros(2 * n, 2 * n);
    for i in 0..2 * n {
        for j in i..2 * n {
            let second = obs[i].trace_product(&products[j]).re;
            let v = second - means[i] * means[j];
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    GaussianState::from_phase_vector(&RealVector::from_vec(means), s)
}

/// Fock density matrix of a Gaussian state, for the states the oracle can
/// prepare exactly: displaced products of thermal states, i.e. covariance
/// `S = diag(s₁ … sₙ, s₁ … sₙ)` with `sⱼ ≥ ½`.
pub fn gaussian_density(rep: &FockRep, state: &GaussianState) -> Result<DensityMatrix> {
    let n = state.modes();
    if n != rep.modes() {
        return Err(shape(format!("state has {n} modes, representation has {}", rep.modes())));
    }
    state.ensure_valid()?;
    let s = state.covariance();
    let mut occupations = Vec::with_capacity(n);
    for i in 0..2 * n {
        for j in 0..2 * n {
            let expected = if i == j { s[(i % n, i % n)] } else { 0.0 };
            if (s[(i, j)] - expected).abs() > 1e-12 * (1.0 + s.camax()) {
                return Err(invalid(
                    "the Fock oracle prepares displaced thermal states only (covariance diag(s, s))",
                ));
            }
        }
    }
    for j in 0..n {
        occupations.push((s[(j, j)] - 0.5).max(0.0));
    }
    let alpha = ComplexVector::from_fn(n, |j, _| {
        Complex64::new(state.position_mean()[j], state.momentum_mean()[j]) * core::f64::consts::FRAC_1_SQRT_2
    });

    if occupations.iter().all(|&nb| nb < 1e-14) {
        return Ok(DensityMatrix::from_pure(&rep.coherent_vector(&alpha)?));
    }
    let mut diag = ComplexVector::from_element(1, ONE);
    for &nb in &occupations {
        let ratio = nb / (nb + 1.0);
        let single = ComplexVector::from_fn(rep.cutoff(), |k, _| {
            Complex64::new(ratio.powi(k as i32) / (nb + 1.0), 0.0)
        });
        diag = diag.kronecker(&single);
    }
    let thermal = ComplexMatrix::from_diagonal(&diag);
    let w = rep.weyl_matrix(&alpha)?;
    let m = &w * thermal * w.adjoint();
    let tr = m.trace();
    Ok(DensityMatrix(m / tr))
}

/// Max-norm discrepancies between the phase-space closed forms and the
/// master-equation oracle at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub t: f64,
    pub mean_error: f64,
    pub cov_error: f64,
    pub weyl_error: f64,
    pub leakage: f64,
}

impl OracleReport {
    pub fn max_error(&self) -> f64 {
        self.mean_error.max(self.cov_error).max(self.weyl_error)
    }
}

/// One sample of an oracle run: closed-form and oracle moments at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSample {
    pub report: OracleReport,
    pub closed_form: GaussianState,
    pub oracle: GaussianState,
}

/// Runs the closed-form evolution and the truncated master equation side by
/// side at every time in `times` (integrating incrementally).
pub fn oracle_trajectory(
    state: &GaussianState,
    pair: &QuasifreePair,
    times: &[f64],
    cutoff: usize,
    steps_per_unit: usize,
    weyl_points: &[ComplexVector],
) -> Result<Vec<OracleSample>> {
    if times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::NegativeTime(times.iter().copied().fold(f64::NAN, f64::min)));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("oracle times must be nondecreasing"));
    }
    if steps_per_unit == 0 {
        return Err(invalid("steps per unit time must be positive"));
    }
    if pair.modes() != state.modes() {
        return Err(shape("state and pair act on different numbers of modes"));
    }
    let rep = FockRep::build(state.modes(), cutoff)?;
    let rho0 = gaussian_density(&rep, state)?;
    let leak0 = rep.leakage(&rho0);
    if leak0 > MAX_LEAKAGE {
        return Err(Error::Leakage { population: leak0, threshold: MAX_LEAKAGE });
    }
    let spec = decompose(pair.k(), pair.c(), DEFAULT_RANK_TOL)?;
    let eq = MasterEquation::new(&rep, &spec)?;
    let weyls = weyl_points.iter().map(|z| rep.weyl_matrix(z)).collect::<Result<Vec<_>>>()?;

    let mut out = Vec::with_capacity(times.len());
    let mut rho = rho0.0.clone();
    let mut now = 0.0;
    for &t in times {
        let span = t - now;
        if span > 0.0 {
            let steps = ((span * steps_per_unit as f64).ceil() as usize).max(1);
            rho = integrate(&eq, rho, span, steps)?;
            now = t;
        }
        let current = DensityMatrix(rho.clone());
        let leakage = rep.leakage(&current);
        if leakage > MAX_LEAKAGE {
            return Err(Error::Leakage { population: leakage, threshold: MAX_LEAKAGE });
        }
        let oracle = state_moments(&rep, &current)?;
        let closed_form = pair.evolve_state(state, t)?;
        let mean_error = (oracle.phase_vector() - closed_form.phase_vector()).camax();
        let cov_error = (oracle.covariance() - closed_form.covariance()).camax();
        let mut weyl_error = 0.0_f64;
        for (z, w) in weyl_points.iter().zip(&weyls) {
            let exact = closed_form.weyl_transform_unchecked(z)?;
            weyl_error = weyl_error.max((current.expectation(w) - exact).norm());
        }
        out.push(OracleSample {
            report: OracleReport { t, mean_error, cov_error, weyl_error, leakage },
            closed_form,
            oracle,
        });
    }
    Ok(out)
}

/// [`oracle_trajectory`] at a single time.
pub fn oracle_compare(
    state: &GaussianState,
    pair: &QuasifreePair,
    t: f64,
    cutoff: usize,
    steps_per_unit: usize,
    weyl_points: &[ComplexVector],
) -> Result<OracleReport> {
    let samples = oracle_trajectory(state, pair, &[t], cutoff, steps_per_unit, weyl_points)?;
    Ok(samples[0].report)
}

/// Dense `[a, a†]` for mode `j`, exposed for truncation diagnostics.
pub fn ccr_defect(rep: &FockRep, j: usize) -> ComplexMatrix {
    let a = rep.a(j).to_dense();
    let ad = rep.adag(j).to_dense();
    &a * &ad - &ad * &a - DMatrix::identity(rep.dim(), rep.dim())
}

//! Classical random fields read off from vacuum and coherent states.
//!
//! * Gaussian fields `p(u)`, `q(u)` in a coherent state `ψ(u₀)`.
//! * The compound-Poisson law of `λ(H)` in `ψ(u)`.
//! * GNS factorisation of an invariant positive definite kernel on a finite
//!   point set, together with the vacuum normal law of its field.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::Cholesky;
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{invalid, shape, Error, Result};
use crate::linalg::{
    hermitian_eigen, hermiticity_defect, inner, psd_check, symmetric_eigen, ComplexMatrix, ComplexVector, RealMatrix,
    RealVector,
};

/// Negative eigenvalues down to this are clipped to zero before sampling.
pub const PSD_REPAIR_TOL: f64 = 1e-12;
/// Tolerance on imaginary Gram entries for a commuting field family.
pub const REAL_GRAM_TOL: f64 = 1e-12;
/// Relative tolerance on kernel positivity and invariance.
pub const KERNEL_TOL: f64 = 1e-10;

/// Positive definite kernel on `N` labelled points with a finite symmetry group.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    points: Vec<alloc::string::String>,
    k: ComplexMatrix,
    /// `group[g][j]` is the image of point `j` (0-based).
    group: Vec<Vec<usize>>,
}

impl KernelModel {
    pub fn new(points: Vec<alloc::string::String>, k: ComplexMatrix, group: Vec<Vec<usize>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(invalid("kernel needs at least one point"));
        }
        if k.shape() != (n, n) {
            return Err(shape(format!("kernel is {}x{}, expected {n}x{n}", k.nrows(), k.ncols())));
        }
        let scale = 1.0 + k.norm();
        let hd = hermiticity_defect(&k);
        if hd > KERNEL_TOL * scale {
            return Err(Error::NotHermitian { defect: hd });
        }
        let psd = psd_check(&k, KERNEL_TOL)?;
        if !psd.is_psd {
            return Err(Error::NotPsd { min_eigenvalue: psd.min_eigenvalue });
        }
        for perm in &group {
            let mut seen = alloc::vec![false; n];
            if perm.len() != n || perm.iter().any(|&j| j >= n || core::mem::replace(&mut seen[j], true)) {
                return Err(invalid("group elements must be permutations of the points"));
            }
            let defect = (0..n)
                .flat_map(|a| (0..n).map(move |b| (a, b)))
                .map(|(a, b)| (k[(perm[a], perm[b])] - k[(a, b)]).norm())
                .fold(0.0, f64::max);
            if defect > KERNEL_TOL * scale {
                return Err(invalid(format!("kernel is not invariant under {perm:?} (defect {defect:.3e})")));
            }
        }
        Ok(Self { points, k, group })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[alloc::string::String] {
        &self.points
    }

    pub fn kernel(&self) -> &ComplexMatrix {
        &self.k
    }

    pub fn group(&self) -> &[Vec<usize>] {
        &self.group
    }
}

/// Vectors `λ(α_j)` (columns of `vectors`) with `⟨λ(α_i)|λ(α_j)⟩ = K_ij`,
/// and the unitaries `π(g)` with `π(g)λ(α) = λ(gα)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GnsFactor {
    pub vectors: ComplexMatrix,
    pub representation: Vec<ComplexMatrix>,
}

impl GnsFactor {
    pub fn rank(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vector(&self, j: usize) -> ComplexVector {
        self.vectors.column(j).into_owned()
    }

    pub fn gram(&self) -> ComplexMatrix {
        self.vectors.adjoint() * &self.vectors
    }
}

pub fn gns_factor(model: &KernelModel) -> Result<GnsFactor> {
    let n = model.len();
    let (vals, vecs) = hermitian_eigen(&model.k);
    let top = vals.first().copied().unwrap_or(0.0).max(0.0);
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i] > top * 1e-13 && vals[i] > 0.0).collect();
    let r = keep.len();
    let vectors = ComplexMatrix::from_fn(r, n, |row, j| {
        let k = keep[row];
        vecs[(j, k)].conj() * vals[k].sqrt()
    });
    let mut representation = Vec::with_capacity(model.group.len());
    for perm in &model.group {
        let u = ComplexMatrix::from_fn(r, r, |a, b| {
            let (ka, kb) = (keep[a], keep[b]);
            let overlap: Complex64 = (0..n).map(|j| vecs[(perm[j], ka)].conj() * vecs[(j, kb)]).sum();
            // π(g) = F P F⁺ with F = Λ^{1/2} V†
            overlap * (vals[ka] / vals[kb]).sqrt()
        });
        representation.push(u);
    }
    Ok(GnsFactor { vectors, representation })
}

/// Vacuum variance `½ z†Kz` of `Z = Σ(x_j q(α_j) + y_j p(α_j))`.
pub fn vacuum_field_variance(z: &ComplexVector, model: &KernelModel) -> Result<f64> {
    if z.len() != model.len() {
        return Err(shape(format!("z has length {}, kernel has {} points", z.len(), model.len())));
    }
    Ok((0.5 * z.dotc(&(&model.k * z)).re).max(0.0))
}

/// Mean and covariance of a Gaussian random vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldLaw {
    pub mean: RealVector,
    pub covariance: RealMatrix,
}

/// Which quadrature family the coherent field is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `p(u)`, mean `2 Im⟨u₀|u⟩`
    P,
    /// `q(u)`, mean `2 Re⟨u₀|u⟩`
    Q,
}

/// Law of `(p(u₁) … p(u_k))` (or the `q` family) in the coherent state `ψ(u₀)`.
pub fn coherent_gaussian_field(u0: &ComplexVector, us: &[ComplexVector], family: Family) -> Result<FieldLaw> {
    if us.is_empty() {
        return Err(invalid("need at least one field vector"));
    }
    if us.iter().any(|u| u.len() != u0.len()) {
        return Err(shape("field vectors and u0 must have the same length"));
    }
    let k = us.len();
    let mut covariance = RealMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let g = inner(&us[i], &us[j]);
            let scale = 1.0 + us[i].norm() * us[j].norm();
            if g.im.abs() > REAL_GRAM_TOL * scale {
                return Err(invalid(format!(
                    "⟨u_{i}|u_{j}⟩ has imaginary part {:.3e}; the fields do not commute",
                    g.im
                )));
            }
            covariance[(i, j)] = g.re;
        }
    }
    let mean = RealVector::from_fn(k, |j, _| {
        let c = inner(u0, &us[j]);
        match family {
            Family::P => 2.0 * c.im,
            Family::Q => 2.0 * c.re,
        }
    });
    Ok(FieldLaw { mean, covariance })
}

impl FieldLaw {
    pub fn new(mean: RealVector, covariance: RealMatrix) -> Result<Self> {
        if covariance.shape() != (mean.len(), mean.len()) {
            return Err(shape("covariance does not match the mean"));
        }
        Ok(Self { mean, covariance })
    }

    /// `A` with `AAᵀ = covariance`: Cholesky when it succeeds, otherwise an
    /// eigen-factor after clipping eigenvalues in `[−PSD_REPAIR_TOL, 0)`.
    pub fn factor(&self) -> Result<RealMatrix> {
        let sym = crate::linalg::symmetrize(&self.covariance);
        if let Some(ch) = Cholesky::new(sym.clone()) {
            return Ok(ch.l());
        }
        let (vals, vecs) = symmetric_eigen(&sym);
        let min = vals.last().copied().unwrap_or(0.0);
        if min < -PSD_REPAIR_TOL {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        let roots = RealVector::from_iterator(vals.len(), vals.iter().map(|v| v.max(0.0).sqrt()));
        Ok(vecs * RealMatrix::from_diagonal(&roots))
    }

    /// `count` draws, one per row.
    pub fn sample(&self, count: usize, seed: u64) -> Result<RealMatrix> {
        if count == 0 {
            return Err(invalid("count must be at least 1"));
        }
        let a = self.factor()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = self.mean.len();
        let mut out = RealMatrix::zeros(count, k);
        for row in 0..count {
            let g = RealVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = &self.mean + &a * g;
            out.row_mut(row).copy_from(&x.transpose());
        }
        Ok(out)
    }
}

/// Compound-Poisson law with finitely many atoms `(x_k, mass_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyLaw {
    pub atoms: Vec<(f64, f64)>,
}

/// Eigenvalues closer than this (relative) are merged into one atom.
const ATOM_MERGE_TOL: f64 = 1e-10;

/// Lévy measure `E ↦ ⟨u|P^H(E)|u⟩` of `λ(H)` in `ψ(u)`.
pub fn levy_law(h: &ComplexMatrix, u: &ComplexVector) -> Result<LevyLaw> {
    if !h.is_square() || h.nrows() != u.len() {
        return Err(shape("H must be square and match the length of u"));
    }
    let hd = hermiticity_defect(h);
    if hd > 1e-10 * (1.0 + h.norm()) {
        return Err(Error::NotHermitian { defect: hd });
    }
    let (vals, vecs) = hermitian_eigen(h);
    let scale = 1.0 + vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for (k, &x) in vals.iter().enumerate() {
        let mass = vecs.column(k).dotc(u).norm_sqr();
        match atoms.last_mut() {
            Some((x0, m0)) if (*x0 - x).abs() <= ATOM_MERGE_TOL * scale => *m0 += mass,
            _ => atoms.push((x, mass)),
        }
    }
    atoms.retain(|&(_, m)| m > 1e-300);
    Ok(LevyLaw { atoms })
}

impl LevyLaw {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.iter().any(|&(x, m)| !x.is_finite() || !(m >= 0.0) || !m.is_finite()) {
            return Err(invalid("atoms need finite positions and nonnegative masses"));
        }
        Ok(Self { atoms })
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// `exp Σ (e^{itx} − 1)·mass`.
    pub fn characteristic_function(&self, t: f64) -> Complex64 {
        self.atoms
            .iter()
            .map(|&(x, m)| (Complex64::new(0.0, t * x).exp() - 1.0) * m)
            .sum::<Complex64>()
            .exp()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(x, m)| x * m).sum()
    }

    pub fn variance(&self) -> f64 {
        self.atoms.iter().map(|&(x, m)| x * x * m).sum()
    }

    /// `Σ x_k N_k` with independent `N_k ~ Poisson(mass_k)`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<f64>> {
        if count == 0 {
            return Err(invalid("count must be at least 1"));
        }
        let dists = self
            .atoms
            .iter()
            .filter(|a| a.1 > 0.0)
            .map(|&(x, m)| Poisson::new(m).map(|p| (x, p)).map_err(|e| invalid(format!("{e}"))))
            .collect::<Result<Vec<_>>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..count)
            .map(|_| dists.iter().map(|(x, p)| x * p.sample(&mut rng)).sum())
            .collect())
    }
}

/// Empirical characteristic function `mean_k e^{itX_k}`.
pub fn empirical_characteristic_function(samples: &[f64], t: f64) -> Complex64 {
    let n = samples.len().max(1) as f64;
    samples.iter().map(|&x| Complex64::new(0.0, t * x).exp()).sum::<Complex64>() / n
}

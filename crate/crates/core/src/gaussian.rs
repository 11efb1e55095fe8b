//! Gaussian states in `(ℓ, m, S)` coordinates.
//!
//! Quadratures are `q = (a + a†)/√2`, `p = (a − a†)/(i√2)` and the Weyl
//! operator is `W(z) = exp(a†(z) − a(z))`. With `(x; y) = (Re z; Im z)` the
//! quantum Fourier transform of a Gaussian state is
//!
//! ```text
//! Tr ρ W(z) = exp{ −i√2(ℓᵀx − mᵀy) − (x; y)ᵀ S (x; y) }
//! ```
//!
//! where `ℓ = ⟨p⟩`, `m = ⟨q⟩` and `S` is the symmetrised covariance of
//! `(p₁ … pₙ, −q₁ … −qₙ)`.

use alloc::format;

use num_complex::Complex64;

use crate::error::{invalid, shape, Error, Result};
use crate::linalg::{
    complexify, ensure_dims, psd_check, real_embed, symmetric_eigen, symmetry_defect,
    symplectic_form, ComplexVector, RealMatrix, RealVector, DEFAULT_PSD_TOL,
};

/// Sign relating the momentum mean to the coherent amplitude:
/// `ℓ = MOMENTUM_SIGN·√2·Im α`. Pinned by the truncated-Fock oracle.
pub const MOMENTUM_SIGN: f64 = 1.0;

/// Relative symmetry tolerance on the covariance matrix.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    n: usize,
    /// `ℓ = Tr pρ`
    momentum_mean: RealVector,
    /// `m = Tr qρ`
    position_mean: RealVector,
    /// covariance of `(p, −q)`
    covariance: RealMatrix,
}

/// Diagnostic returned by [`GaussianState::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validity {
    pub is_valid: bool,
    /// Smallest eigenvalue of `2S + iJ`.
    pub min_eigenvalue: f64,
    pub symmetry_defect: f64,
}

impl GaussianState {
    /// Builds a state after checking shapes only; see [`validate`](Self::validate).
    pub fn new(
        momentum_mean: RealVector,
        position_mean: RealVector,
        covariance: RealMatrix,
    ) -> Result<Self> {
        let n = momentum_mean.len();
        if n == 0 {
            return Err(invalid("a Gaussian state needs at least one mode"));
        }
        if position_mean.len() != n {
            return Err(shape(format!(
                "position mean has length {}, expected {n}",
                position_mean.len()
            )));
        }
        ensure_dims(&covariance, 2 * n, 2 * n, "covariance")?;
        if momentum_mean.iter().chain(position_mean.iter()).chain(covariance.iter()).any(|x| !x.is_finite()) {
            return Err(invalid("Gaussian state has non-finite entries"));
        }
        Ok(Self { n, momentum_mean, position_mean, covariance })
    }

    /// Vacuum: zero means, `S = ½I`.
    pub fn vacuum(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("a Gaussian state needs at least one mode"));
        }
        Ok(Self {
            n,
            momentum_mean: RealVector::zeros(n),
            position_mean: RealVector::zeros(n),
            covariance: RealMatrix::identity(2 * n, 2 * n) * 0.5,
        })
    }

    /// Coherent state `ψ(α)`: `m = √2 Re α`, `ℓ = √2 Im α`, `S = ½I`.
    pub fn coherent(alpha: &ComplexVector) -> Result<Self> {
        let mut state = Self::vacuum(alpha.len())?;
        let r2 = core::f64::consts::SQRT_2;
        state.position_mean = alpha.map(|a| r2 * a.re);
        state.momentum_mean = alpha.map(|a| MOMENTUM_SIGN * r2 * a.im);
        Ok(state)
    }

    /// Rebuilds a state from the phase vector `(ℓ; −m)` and a covariance.
    pub fn from_phase_vector(mu: &RealVector, covariance: RealMatrix) -> Result<Self> {
        if mu.len() % 2 != 0 {
            return Err(shape("phase vector must have even length"));
        }
        let n = mu.len() / 2;
        Self::new(
            mu.rows(0, n).into_owned(),
            -mu.rows(n, n).into_owned(),
            covariance,
        )
    }

    pub fn modes(&self) -> usize {
        self.n
    }

    pub fn momentum_mean(&self) -> &RealVector {
        &self.momentum_mean
    }

    pub fn position_mean(&self) -> &RealVector {
        &self.position_mean
    }

    pub fn covariance(&self) -> &RealMatrix {
        &self.covariance
    }

    /// `(ℓ; −m)`, the mean of `(p, −q)`.
    pub fn phase_vector(&self) -> RealVector {
        let n = self.n;
        RealVector::from_fn(2 * n, |i, _| {
            if i < n {
                self.momentum_mean[i]
            } else {
                -self.position_mean[i - n]
            }
        })
    }

    /// Checks symmetry of `S` and `2S + iJ ⪰ 0`.
    pub fn validate(&self, tol: f64) -> Result<Validity> {
        let symmetry_defect = symmetry_defect(&self.covariance);
        let j = symplectic_form(self.n)?;
        let s = crate::linalg::symmetrize(&self.covariance);
        let m = complexify(&(s * 2.0)) + complexify(&j) * Complex64::i();
        let psd = psd_check(&m, tol)?;
        let symmetric = symmetry_defect <= SYMMETRY_TOL * (1.0 + self.covariance.norm());
        Ok(Validity {
            is_valid: symmetric && psd.is_psd,
            min_eigenvalue: psd.min_eigenvalue,
            symmetry_defect,
        })
    }

    pub(crate) fn ensure_valid(&self) -> Result<()> {
        let v = self.validate(DEFAULT_PSD_TOL)?;
        if v.is_valid {
            Ok(())
        } else {
            Err(Error::InvalidState {
                min_eigenvalue: v.min_eigenvalue,
                symmetry_defect: v.symmetry_defect,
            })
        }
    }

    /// `Tr ρ W(z)`. Rejects states failing [`validate`](Self::validate).
    pub fn weyl_transform(&self, z: &ComplexVector) -> Result<Complex64> {
        self.ensure_valid()?;
        self.weyl_transform_unchecked(z)
    }

    pub(crate) fn weyl_transform_unchecked(&self, z: &ComplexVector) -> Result<Complex64> {
        if z.len() != self.n {
            return Err(shape(format!(
                "Weyl argument has length {}, expected {}",
                z.len(),
                self.n
            )));
        }
        let r = real_embed(z);
        let phase = -core::f64::consts::SQRT_2 * self.phase_vector().dot(&r);
        let quad = r.dot(&(&self.covariance * &r));
        Ok(Complex64::new(-quad, phase).exp())
    }

    /// Symplectic congruence `S ↦ OᵀSO`, `μ ↦ Oᵀμ` for an orthogonal symplectic `O`.
    pub fn transformed(&self, o: &RealMatrix) -> Result<Self> {
        ensure_dims(o, 2 * self.n, 2 * self.n, "phase-space transformation")?;
        let mu = o.transpose() * self.phase_vector();
        let s = o.transpose() * &self.covariance * o;
        Self::from_phase_vector(&mu, s)
    }

    /// Smallest eigenvalue of `S` itself; handy when deciding Fock cutoffs.
    pub fn min_covariance_eigenvalue(&self) -> f64 {
        let (vals, _) = symmetric_eigen(&self.covariance);
        *vals.last().unwrap_or(&0.0)
    }
}

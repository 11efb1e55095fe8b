//! Quasifree completely positive semigroups `{T_t}` generated by a real pair `(K, C)`.
//!
//! On Weyl operators
//!
//! ```text
//! T_t(W(z)) = W(R⁻¹ e^{tK} R z) · exp{−½ (Rz)ᵀ B_t (Rz)},   B_t = ∫₀ᵗ e^{sKᵀ} C e^{sK} ds
//! ```
//!
//! with `R z = (Re z; Im z)`. The predual maps the Gaussian state
//! `(ℓ, m, S)` to `(ℓ_t, m_t, S_t)` with `(ℓ_t; −m_t) = e^{tKᵀ}(ℓ; −m)` and
//! `S_t = e^{tKᵀ} S e^{tK} + ½B_t`. The pair must satisfy
//! `C + i(KᵀJ + JK) ⪰ 0`.

use alloc::format;

use num_complex::Complex64;

use crate::error::{invalid, shape, Error, Result};
use crate::gaussian::GaussianState;
use crate::linalg::{
    complexify, ensure_dims, ensure_square, inner, propagator, psd_check, real_embed,
    real_extract, symmetrize, symmetry_defect, symplectic_form, ComplexMatrix, ComplexVector,
    RealMatrix, DEFAULT_PSD_TOL,
};

/// `D = C + i(KᵀJ + JK)`.
pub fn noise_matrix(k: &RealMatrix, c: &RealMatrix) -> Result<ComplexMatrix> {
    let dim = ensure_square(k, "K")?;
    if dim % 2 != 0 || dim == 0 {
        return Err(shape(format!("K must be 2n x 2n with n >= 1, got {dim}x{dim}")));
    }
    ensure_dims(c, dim, dim, "C")?;
    let j = symplectic_form(dim / 2)?;
    let a = k.transpose() * &j + &j * k;
    Ok(complexify(c) + complexify(&a) * Complex64::i())
}

/// Verdict of the admissibility test `C + i(KᵀJ + JK) ⪰ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    pub is_admissible: bool,
    pub min_eigenvalue: f64,
}

pub fn admissible(k: &RealMatrix, c: &RealMatrix, tol: f64) -> Result<Admissibility> {
    let d = noise_matrix(k, c)?;
    let defect = symmetry_defect(c);
    if defect > 1e-10 * (1.0 + c.norm()) {
        return Err(invalid(format!("C must be symmetric (defect {defect:.3e})")));
    }
    let r = psd_check(&d, tol)?;
    Ok(Admissibility {
        is_admissible: r.is_psd,
        min_eigenvalue: r.min_eigenvalue,
    })
}

/// Result of applying `T_t` to `W(z)`: `T_t(W(z)) = W(z_out)·exp(−damping_exponent)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylAction {
    pub z_out: ComplexVector,
    pub damping_exponent: f64,
}

/// `ℒ(W(z)) = {a†(g) − a(g) + scalar}·W(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorCoefficients {
    pub gain: ComplexVector,
    pub scalar: Complex64,
}

impl GeneratorCoefficients {
    pub fn zero(n: usize) -> Self {
        Self {
            gain: ComplexVector::zeros(n),
            scalar: Complex64::new(0.0, 0.0),
        }
    }

    /// Largest deviation between two coefficient sets.
    pub fn max_difference(&self, other: &Self) -> f64 {
        let g = (&self.gain - &other.gain).iter().map(|x| x.norm()).fold(0.0, f64::max);
        g.max((self.scalar - other.scalar).norm())
    }
}

impl core::ops::Add for GeneratorCoefficients {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            gain: self.gain + rhs.gain,
            scalar: self.scalar + rhs.scalar,
        }
    }
}

/// An admissible pair `(K, C)`; admissibility is verified once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasifreePair {
    n: usize,
    k: RealMatrix,
    c: RealMatrix,
    admissibility: Admissibility,
}

impl QuasifreePair {
    pub fn new(k: RealMatrix, c: RealMatrix) -> Result<Self> {
        Self::with_tolerance(k, c, DEFAULT_PSD_TOL)
    }

    pub fn with_tolerance(k: RealMatrix, c: RealMatrix, tol: f64) -> Result<Self> {
        let admissibility = admissible(&k, &c, tol)?;
        if !admissibility.is_admissible {
            return Err(Error::Inadmissible {
                min_eigenvalue: admissibility.min_eigenvalue,
            });
        }
        let c = symmetrize(&c);
        Ok(Self {
            n: k.nrows() / 2,
            k,
            c,
            admissibility,
        })
    }

    pub fn modes(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> &RealMatrix {
        &self.k
    }

    pub fn c(&self) -> &RealMatrix {
        &self.c
    }

    pub fn admissibility(&self) -> Admissibility {
        self.admissibility
    }

    pub fn noise_matrix(&self) -> ComplexMatrix {
        noise_matrix(&self.k, &self.c).expect("shapes checked at construction")
    }

    fn check_len(&self, z: &ComplexVector) -> Result<()> {
        if z.len() != self.n {
            return Err(shape(format!(
                "Weyl argument has length {}, expected {}",
                z.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// `T_t(W(z))`.
    pub fn weyl_action(&self, t: f64, z: &ComplexVector) -> Result<WeylAction> {
        self.check_len(z)?;
        let p = propagator(&self.k, &self.c, t)?;
        let r = real_embed(z);
        Ok(WeylAction {
            z_out: real_extract(&(&p.a * &r))?,
            damping_exponent: 0.5 * r.dot(&(&p.b * &r)),
        })
    }

    /// Predual action `T′_t` on a Gaussian state.
    pub fn evolve_state(&self, state: &GaussianState, t: f64) -> Result<GaussianState> {
        if state.modes() != self.n {
            return Err(shape(format!(
                "state has {} modes, pair acts on {}",
                state.modes(),
                self.n
            )));
        }
        state.ensure_valid()?;
        let p = propagator(&self.k, &self.c, t)?;
        let at = p.a.transpose();
        let mu = &at * state.phase_vector();
        let s = symmetrize(&(&at * state.covariance() * &p.a + &p.b * 0.5));
        GaussianState::from_phase_vector(&mu, s)
    }

    /// Generator coefficients: `g = R⁻¹KRz`, `scalar = ½(⟨g|z⟩ − ⟨z|g⟩ − (Rz)ᵀC(Rz))`.
    pub fn generator_action(&self, z: &ComplexVector) -> Result<GeneratorCoefficients> {
        self.check_len(z)?;
        let r = real_embed(z);
        let gain = real_extract(&(&self.k * &r))?;
        let quad = r.dot(&(&self.c * &r));
        let scalar = (inner(&gain, z) - inner(z, &gain) - Complex64::new(quad, 0.0)) * 0.5;
        Ok(GeneratorCoefficients { gain, scalar })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn attenuation() -> QuasifreePair {
        QuasifreePair::new(RealMatrix::identity(2, 2) * -0.5, RealMatrix::identity(2, 2)).unwrap()
    }

    #[test]
    fn admissibility_examples() {
        let a = admissible(&(RealMatrix::identity(2, 2) * -0.5), &RealMatrix::identity(2, 2), DEFAULT_PSD_TOL).unwrap();
        assert!(a.is_admissible);
        assert_abs_diff_eq!(a.min_eigenvalue, 0.0, epsilon = 1e-12);
        let d = noise_matrix(&(RealMatrix::identity(2, 2) * -0.5), &RealMatrix::identity(2, 2)).unwrap();
        let want = ComplexMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(1.0, 0.0)]);
        assert!((d - want).camax() < 1e-15);

        let j = symplectic_form(1).unwrap();
        let a = admissible(&j, &RealMatrix::zeros(2, 2), DEFAULT_PSD_TOL).unwrap();
        assert!(a.is_admissible);
        assert_eq!(noise_matrix(&j, &RealMatrix::zeros(2, 2)).unwrap(), ComplexMatrix::zeros(2, 2));

        let a = admissible(&RealMatrix::identity(2, 2), &RealMatrix::zeros(2, 2), DEFAULT_PSD_TOL).unwrap();
        assert!(!a.is_admissible);
        assert_abs_diff_eq!(a.min_eigenvalue, -2.0, epsilon = 1e-12);
        assert!(matches!(
            QuasifreePair::new(RealMatrix::identity(2, 2), RealMatrix::zeros(2, 2)),
            Err(Error::Inadmissible { .. })
        ));
    }

    #[test]
    fn asymmetric_c_rejected() {
        let mut cm = RealMatrix::identity(2, 2);
        cm[(0, 1)] = 0.5;
        assert!(matches!(admissible(&RealMatrix::zeros(2, 2), &cm, 1e-9), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn weyl_action_examples() {
        let z = ComplexVector::from_vec(alloc::vec![c(0.4, -0.3)]);
        let p = attenuation();
        let w = p.weyl_action(0.0, &z).unwrap();
        assert!((&w.z_out - &z).norm() < 1e-15);
        assert_eq!(w.damping_exponent, 0.0);

        let diffusion = QuasifreePair::new(RealMatrix::zeros(2, 2), RealMatrix::identity(2, 2)).unwrap();
        let w = diffusion.weyl_action(2.0, &z).unwrap();
        assert!((&w.z_out - &z).norm() < 1e-14);
        assert_abs_diff_eq!(w.damping_exponent, 2.0 * z.norm_squared() / 2.0, epsilon = 1e-14);

        let one = ComplexVector::from_vec(alloc::vec![c(1.0, 0.0)]);
        let w = p.weyl_action(4f64.ln(), &one).unwrap();
        assert_abs_diff_eq!(w.z_out[0].re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(w.z_out[0].im, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w.damping_exponent, 0.375, epsilon = 1e-14);

        assert!(matches!(p.weyl_action(-0.1, &one), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn evolve_examples() {
        let p = attenuation();
        let alpha = ComplexVector::from_vec(alloc::vec![c(1.0, 0.0)]);
        let s0 = GaussianState::coherent(&alpha).unwrap();
        assert_eq!(p.evolve_state(&s0, 0.0).unwrap(), s0);
        for &t in &[0.3, 1.0, 4.0] {
            let st = p.evolve_state(&s0, t).unwrap();
            assert_abs_diff_eq!(st.position_mean()[0], 2f64.sqrt() * (-t / 2.0).exp(), epsilon = 1e-13);
            assert_abs_diff_eq!(st.momentum_mean()[0], 0.0, epsilon = 1e-13);
            assert!((st.covariance() - RealMatrix::identity(2, 2) * 0.5).camax() < 1e-13);
        }

        let omega = 0.7;
        let j = symplectic_form(1).unwrap();
        let rot = QuasifreePair::new(&j * omega, RealMatrix::zeros(2, 2)).unwrap();
        let t = 1.3;
        let st = rot.evolve_state(&s0, t).unwrap();
        let want = crate::linalg::expm(&(j.transpose() * (omega * t))).unwrap() * s0.phase_vector();
        assert!((st.phase_vector() - want).norm() < 1e-13);
        assert!((st.covariance() - RealMatrix::identity(2, 2) * 0.5).camax() < 1e-13);
    }

    #[test]
    fn generator_examples() {
        let zero = QuasifreePair::new(RealMatrix::zeros(2, 2), RealMatrix::zeros(2, 2)).unwrap();
        let z = ComplexVector::from_vec(alloc::vec![c(0.2, 0.9)]);
        assert_eq!(zero.generator_action(&z).unwrap(), GeneratorCoefficients::zero(1));

        let one = ComplexVector::from_vec(alloc::vec![c(1.0, 0.0)]);
        let g = attenuation().generator_action(&one).unwrap();
        assert_abs_diff_eq!(g.gain[0].re, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g.gain[0].im, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.scalar.re, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g.scalar.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn generator_is_derivative_of_weyl_action() {
        let k = RealMatrix::from_row_slice(2, 2, &[-0.6, 0.4, -0.1, -0.3]);
        let d = noise_matrix(&k, &RealMatrix::zeros(2, 2)).unwrap();
        let (vals, _) = crate::linalg::hermitian_eigen(&d);
        let cm = RealMatrix::identity(2, 2) * (-vals[1]).max(0.0) + RealMatrix::identity(2, 2) * 0.1;
        let p = QuasifreePair::new(k, cm).unwrap();
        let z = ComplexVector::from_vec(alloc::vec![c(0.3, -0.8)]);
        let h = 1e-5;
        let wp = p.weyl_action(h, &z).unwrap();
        let g = p.generator_action(&z).unwrap();
        let dz = (&wp.z_out - &z) / Complex64::new(h, 0.0);
        assert!((dz - &g.gain).norm() < 1e-4);
        let quad = real_embed(&z).dot(&(p.c() * real_embed(&z)));
        assert_abs_diff_eq!(wp.damping_exponent / h, 0.5 * quad, epsilon = 1e-4);
    }
}

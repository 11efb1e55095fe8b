#![allow(dead_code)]

use qfl_core::linalg::{expm, symplectic_form};
use qfl_core::synthesis::pair_from_coupling;
use qfl_core::{Complex64, ComplexMatrix, ComplexVector, GaussianState, QuasifreePair, RealMatrix, RealVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn cnormal(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(normal(rng), normal(rng))
}

/// Uniform direction, norm uniform in `[0, radius]`.
pub fn complex_vector(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> ComplexVector {
    let v = ComplexVector::from_fn(n, |_, _| cnormal(rng));
    let r = radius * rng.random::<f64>();
    &v * Complex64::new(r / v.norm(), 0.0)
}

pub fn real_vector(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> RealVector {
    let v = RealVector::from_fn(n, |_, _| normal(rng));
    let r = radius * rng.random::<f64>();
    let scale = r / v.norm();
    v * scale
}

pub fn symmetric(rng: &mut ChaCha8Rng, dim: usize) -> RealMatrix {
    let g = RealMatrix::from_fn(dim, dim, |_, _| normal(rng));
    (&g + g.transpose()) * 0.5
}

/// `−J·N` with `N` symmetric, spectral norm at most `max_norm`.
pub fn symplectic_generator(rng: &mut ChaCha8Rng, n: usize, max_norm: f64) -> RealMatrix {
    let j = symplectic_form(n).unwrap();
    let k = -(&j * symmetric(rng, 2 * n));
    let norm = k.clone().svd(false, false).singular_values.max();
    k * (max_norm * rng.random::<f64>() / norm)
}

/// Sum of `couplings` random `(u, v)` pairs (‖u‖ ≤ 1, ‖v‖ ≤ ½), a random
/// symplectic `K′` (‖K′‖ ≤ 1) and, if `extra_noise`, a random PSD addition to `C`.
pub fn random_pair_with(rng: &mut ChaCha8Rng, n: usize, couplings: usize, extra_noise: bool) -> QuasifreePair {
    let mut k = symplectic_generator(rng, n, 1.0);
    let mut c = RealMatrix::zeros(2 * n, 2 * n);
    for _ in 0..couplings {
        let u = complex_vector(rng, n, 1.0);
        let v = complex_vector(rng, n, 0.5);
        let (kj, cj) = pair_from_coupling(&u, &v).unwrap();
        k += kj;
        c += cj;
    }
    if extra_noise {
        let g = RealMatrix::from_fn(2 * n, 2 * n, |_, _| normal(rng) * 0.3);
        c += &g * g.transpose();
    }
    QuasifreePair::new(k, c).unwrap()
}

pub fn random_pair(rng: &mut ChaCha8Rng, n: usize) -> QuasifreePair {
    let couplings = 1 + rng.random_range(0..2);
    let extra = rng.random::<bool>();
    random_pair_with(rng, n, couplings, extra)
}

/// `OᵀSO` for a thermal `S` and a random symplectic `O`, displaced at random.
pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> GaussianState {
    let nu: Vec<f64> = (0..n).map(|_| 0.5 + rng.random::<f64>()).collect();
    let thermal = RealMatrix::from_fn(2 * n, 2 * n, |i, j| if i == j { nu[i % n] } else { 0.0 });
    let o = expm(&symplectic_generator(rng, n, 0.8)).unwrap();
    let s = o.transpose() * thermal * &o;
    let s = (&s + s.transpose()) * 0.5;
    let mu = real_vector(rng, 2 * n, 2.0);
    GaussianState::from_phase_vector(&mu, s).unwrap()
}

/// Haar-ish unitary from the QR factor of a complex Gaussian matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| cnormal(rng));
    g.qr().q()
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| cnormal(rng));
    (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, dim, |_, _| cnormal(rng) * scale)
}

/// Draws pairs until the Fock oracle accepts one (top-level population
/// below its refusal threshold over all `times`); returns the samples and
/// the number of redraws.
pub fn oracle_ready_pair(
    rng: &mut ChaCha8Rng,
    n: usize,
    couplings: usize,
    state: &GaussianState,
    times: &[f64],
    cutoff: usize,
    weyl_points: &[ComplexVector],
) -> (QuasifreePair, Vec<qfl_core::fock::OracleSample>, usize) {
    let mut redraws = 0;
    loop {
        let pair = random_pair_with(rng, n, couplings, false);
        match qfl_core::fock::oracle_trajectory(
            state,
            &pair,
            times,
            cutoff,
            qfl_core::fock::DEFAULT_STEPS_PER_UNIT,
            weyl_points,
        ) {
            Ok(samples) => return (pair, samples, redraws),
            Err(qfl_core::Error::Leakage { .. }) => redraws += 1,
            Err(e) => panic!("oracle failed: {e}"),
        }
    }
}

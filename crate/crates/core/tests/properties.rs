mod common;

use proptest::prelude::*;
use qfl_core::fields::{
    coherent_gaussian_field, empirical_characteristic_function, gns_factor, levy_law, Family, KernelModel,
};
use qfl_core::ito::{
    flow_generator, flow_generator_ito, hp_coefficients, ito_product, leibniz, poisson_differential,
    quadrature_differential, unitarity_check, Coefficient, ItoDifferential, Poly,
};
use qfl_core::linalg::{
    expm, gram_integral, inner, psd_check_real, real_embed, real_extract, symmetry_defect, symplectic_form,
    DEFAULT_PSD_TOL,
};
use qfl_core::synthesis::{decompose, pair_from_coupling, LindbladTerm, DEFAULT_RANK_TOL};
use qfl_core::{Complex64, ComplexMatrix, ComplexVector, RealMatrix};
use rand::Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn poly_gap(x: &ItoDifferential<Poly>, y: &ItoDifferential<Poly>) -> f64 {
    let zero = Poly::zero();
    x.terms()
        .chain(y.terms())
        .map(|(&(a, b), _)| {
            x.coefficient(a, b).unwrap_or(&zero).distance(y.coefficient(a, b).unwrap_or(&zero))
        })
        .fold(0.0, f64::max)
}

fn random_differential(rng: &mut rand_chacha::ChaCha8Rng, d: usize) -> ItoDifferential<Poly> {
    let mut out = ItoDifferential::zero(d);
    for a in 0..=d {
        for b in 0..=d {
            if rng.random::<f64>() < 0.5 {
                let c = Poly::constant(common::normal(rng)).add(&Poly::atom("x").scale(common::normal(rng)));
                out = out.add(&ItoDifferential::term(d, a, b, c).unwrap()).unwrap();
            }
        }
    }
    out
}

/// Circulant kernel `K_ab = c[(b − a) mod N]` from a nonnegative spectrum.
fn circulant_model(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> KernelModel {
    let spectrum: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random() }).collect();
    let mut c: Vec<Complex64> = (0..n)
        .map(|k| {
            spectrum
                .iter()
                .enumerate()
                .map(|(m, s)| {
                    Complex64::from_polar(*s / n as f64, 2.0 * std::f64::consts::PI * (m * k) as f64 / n as f64)
                })
                .sum()
        })
        .collect();
    c[0].im = 0.0;
    for k in 1..n {
        if n - k > k {
            c[n - k] = c[k].conj();
        } else if n - k == k {
            c[k].im = 0.0;
        }
    }
    let k = ComplexMatrix::from_fn(n, n, |a, b| c[(b + n - a) % n]);
    let group = (0..n).map(|s| (0..n).map(|j| (j + s) % n).collect()).collect();
    KernelModel::new((0..n).map(|j| format!("x{j}")).collect(), k, group).unwrap()
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn real_embed_is_linear_and_intertwines_j(
        re in proptest::collection::vec(-5.0f64..5.0, 6),
        im in proptest::collection::vec(-5.0f64..5.0, 6),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let z = ComplexVector::from_fn(3, |i, _| Complex64::new(re[i], im[i]));
        let w = ComplexVector::from_fn(3, |i, _| Complex64::new(re[i + 3], im[i + 3]));
        let lhs = real_embed(&(&z * Complex64::new(a, 0.0) + &w * Complex64::new(b, 0.0)));
        let rhs = real_embed(&z) * a + real_embed(&w) * b;
        prop_assert!((lhs - rhs).camax() < 1e-12);
        prop_assert_eq!(real_extract(&real_embed(&z)).unwrap(), z.clone());
        let j = symplectic_form(3).unwrap();
        prop_assert!((real_embed(&(&z * Complex64::i())) - &j * real_embed(&z)).camax() < 1e-15);
    }

    #[test]
    fn gram_integral_symmetric_and_psd(seed in any::<u64>(), t in 0.0f64..3.0) {
        let mut rng = common::rng(seed);
        let n = 1 + rng.random_range(0..3);
        let pair = common::random_pair(&mut rng, n);
        let b = gram_integral(pair.k(), pair.c(), t).unwrap();
        prop_assert!(symmetry_defect(&b) <= 1e-12);
        prop_assert!(psd_check_real(&b, DEFAULT_PSD_TOL).unwrap().is_psd);
    }

    #[test]
    fn expm_of_commuting_sum_factorises(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let dim = 1 + rng.random_range(0..5);
        let a = RealMatrix::from_fn(dim, dim, |_, _| common::normal(&mut rng) * 0.4);
        let b = &a * &a * 0.3 - &a * 0.5 + RealMatrix::identity(dim, dim) * common::normal(&mut rng);
        let lhs = expm(&(&a + &b)).unwrap();
        let rhs = expm(&a).unwrap() * expm(&b).unwrap();
        prop_assert!((&lhs - &rhs).camax() <= 1e-10 * (1.0 + lhs.camax()));
    }

    #[test]
    fn weyl_transform_bounded_and_conjugate_symmetric(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = 1 + rng.random_range(0..3);
        let st = common::random_state(&mut rng, n);
        let z = common::complex_vector(&mut rng, n, 3.0);
        let w = st.weyl_transform(&z).unwrap();
        prop_assert!(w.norm() <= 1.0 + 1e-14);
        prop_assert!((st.weyl_transform(&-&z).unwrap() - w.conj()).norm() < 1e-14);
    }

    #[test]
    fn coherent_states_are_valid(re in -4.0f64..4.0, im in -4.0f64..4.0, n in 1usize..4) {
        let alpha = ComplexVector::from_element(n, Complex64::new(re, im));
        let st = qfl_core::GaussianState::coherent(&alpha).unwrap();
        prop_assert!(st.validate(DEFAULT_PSD_TOL).unwrap().is_valid);
        prop_assert!(qfl_core::GaussianState::vacuum(n).unwrap().validate(DEFAULT_PSD_TOL).unwrap().is_valid);
    }

    #[test]
    fn phase_rotation_preserves_validity(seed in any::<u64>(), theta in -6.0f64..6.0) {
        let mut rng = common::rng(seed);
        let n = 1 + rng.random_range(0..3);
        let st = common::random_state(&mut rng, n);
        let o = expm(&(symplectic_form(n).unwrap() * theta)).unwrap();
        prop_assert!(st.transformed(&o).unwrap().validate(DEFAULT_PSD_TOL).unwrap().is_valid);
    }

    #[test]
    fn semigroup_composition(seed in any::<u64>(), s in 0.0f64..2.0, t in 0.0f64..2.0) {
        let mut rng = common::rng(seed);
        let n = 1 + rng.random_range(0..3);
        let pair = common::random_pair(&mut rng, n);
        let st = common::random_state(&mut rng, n);
        let two = pair.evolve_state(&pair.evolve_state(&st, s).unwrap(), t).unwrap();
        let one = pair.evolve_state(&st, s + t).unwrap();
        prop_assert!((two.phase_vector() - one.phase_vector()).camax() <= 1e-9);
        prop_assert!((two.covariance() - one.covariance()).camax() <= 1e-9);
    }

    #[test]
    fn damping_nondecreasing_in_time(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = 1 + rng.random_range(0..3);
        let pair = common::random_pair(&mut rng, n);
        let z = common::complex_vector(&mut rng, n, 2.0);
        let mut prev = 0.0;
        for i in 0..=20 {
            let d = pair.weyl_action(0.15 * i as f64, &z).unwrap().damping_exponent;
            prop_assert!(d >= prev - 1e-12, "{} after {}", d, prev);
            prev = d;
        }
    }

    #[test]
    fn state_and_weyl_pictures_are_dual(seed in any::<u64>(), t in 0.0f64..3.0) {
        let mut rng = common::rng(seed);
        let n = 1 + rng.random_range(0..3);
        let pair = common::random_pair(&mut rng, n);
        let st = common::random_state(&mut rng, n);
        let z = common::complex_vector(&mut rng, n, 1.5);
        let lhs = pair.evolve_state(&st, t).unwrap().weyl_transform(&z).unwrap();
        let action = pair.weyl_action(t, &z).unwrap();
        let rhs = st.weyl_transform(&action.z_out).unwrap() * (-action.damping_exponent).exp();
        prop_assert!((lhs - rhs).norm() <= 1e-9, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn decomposition_round_trip(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = 1 + rng.random_range(0..3);
        let pair = common::random_pair(&mut rng, n);
        let spec = decompose(pair.k(), pair.c(), DEFAULT_RANK_TOL).unwrap();
        let r = spec.residuals();
        prop_assert!(r.k_residual <= 1e-8 && r.c_residual <= 1e-8, "{:?}", r);
        prop_assert!(r.symplectic_defect <= 1e-10 && r.hamiltonian_residual <= 1e-8, "{:?}", r);
        let z = common::complex_vector(&mut rng, n, 1.0);
        let gap = spec.generator_action(&z).unwrap().max_difference(&pair.generator_action(&z).unwrap());
        prop_assert!(gap <= 1e-8);
    }

    #[test]
    fn single_coupling_is_recovered(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = 1 + rng.random_range(0..3);
        let u = common::complex_vector(&mut rng, n, 1.0);
        let v = common::complex_vector(&mut rng, n, 1.0);
        prop_assume!(u.norm() + v.norm() > 1e-3);
        let (k, c) = pair_from_coupling(&u, &v).unwrap();
        let spec = decompose(&k, &c, DEFAULT_RANK_TOL).unwrap();
        prop_assert_eq!(spec.rank(), 1);
        let z = common::complex_vector(&mut rng, n, 1.0);
        let want = LindbladTerm::from_coupling(&u, &v).unwrap().generator_action(&z).unwrap();
        prop_assert!(spec.generator_action(&z).unwrap().max_difference(&want) <= 1e-9);
    }

    #[test]
    fn ito_product_distributes(seed in any::<u64>(), d in 1usize..4) {
        let mut rng = common::rng(seed);
        let x = random_differential(&mut rng, d);
        let y = random_differential(&mut rng, d);
        let z = random_differential(&mut rng, d);
        let s = Poly::constant(common::normal(&mut rng));
        let right = ito_product(&x, &y.add(&z).unwrap()).unwrap();
        let split = ito_product(&x, &y).unwrap().add(&ito_product(&x, &z).unwrap()).unwrap();
        prop_assert!(poly_gap(&right, &split) < 1e-12);
        let left = ito_product(&x.add(&y).unwrap(), &z).unwrap();
        let split = ito_product(&x, &z).unwrap().add(&ito_product(&y, &z).unwrap()).unwrap();
        prop_assert!(poly_gap(&left, &split) < 1e-12);
        let scaled = ito_product(&x.left_mul(&s), &y).unwrap();
        prop_assert!(poly_gap(&scaled, &ito_product(&x, &y).unwrap().left_mul(&s)) < 1e-12);
    }

    #[test]
    fn hp_pipeline_is_unitary(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let d = 1 + rng.random_range(0..3);
        let m = 1 + rng.random_range(0..3);
        let s = common::random_unitary(&mut rng, d * m);
        let l: Vec<_> = (0..d).map(|_| common::random_matrix(&mut rng, m, 1.0)).collect();
        let h = common::random_hermitian(&mut rng, m);
        let report = unitarity_check(&hp_coefficients(&s, &l, &h).unwrap(), 1e-12);
        prop_assert!(report.holds, "{:?}", report);
    }

    #[test]
    fn flow_generator_matches_ito_route(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let d = 1 + rng.random_range(0..3);
        let m = 1 + rng.random_range(0..3);
        let s = common::random_unitary(&mut rng, d * m);
        let l: Vec<_> = (0..d).map(|_| common::random_matrix(&mut rng, m, 1.0)).collect();
        let h = common::random_hermitian(&mut rng, m);
        let x = common::random_matrix(&mut rng, m, 1.0);
        let direct = flow_generator(&s, &l, &h, &x).unwrap();
        let ito = flow_generator_ito(&hp_coefficients(&s, &l, &h).unwrap(), &x).unwrap();
        for a in 0..=d {
            for b in 0..=d {
                prop_assert!((&direct[a][b] - &ito[a][b]).camax() < 1e-10, "theta^{}_{}", a, b);
            }
        }
        let adj = flow_generator(&s, &l, &h, &x.adjoint()).unwrap();
        prop_assert!((&adj[0][0] - direct[0][0].adjoint()).camax() < 1e-12);
        let id = flow_generator(&s, &l, &h, &ComplexMatrix::identity(m, m)).unwrap();
        prop_assert!(id[0][0].camax() < 1e-12);
    }

    #[test]
    fn gns_factor_reproduces_kernel(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = common::rng(seed);
        let model = circulant_model(&mut rng, n);
        let f = gns_factor(&model).unwrap();
        prop_assert!((f.gram() - model.kernel()).camax() <= 1e-10);
        for (perm, u) in model.group().iter().zip(&f.representation) {
            for a in 0..n {
                for b in 0..n {
                    prop_assert_eq!(model.kernel()[(perm[a], perm[b])], model.kernel()[(a, b)]);
                }
                prop_assert!((u * f.vector(a) - f.vector(perm[a])).camax() <= 1e-9);
            }
            let r = f.rank();
            prop_assert!((u.adjoint() * u - ComplexMatrix::identity(r, r)).camax() <= 1e-9);
        }
    }

    #[test]
    fn field_covariance_is_gram_matrix(seed in any::<u64>(), k in 1usize..5) {
        let mut rng = common::rng(seed);
        let u0 = common::complex_vector(&mut rng, 3, 2.0);
        let phase = Complex64::from_polar(1.0, rng.random::<f64>() * 6.0);
        let us: Vec<ComplexVector> = (0..k)
            .map(|_| ComplexVector::from_fn(3, |_, _| phase * common::normal(&mut rng)))
            .collect();
        for family in [Family::P, Family::Q] {
            let law = coherent_gaussian_field(&u0, &us, family).unwrap();
            for i in 0..k {
                for j in 0..k {
                    prop_assert_eq!(law.covariance[(i, j)], inner(&us[i], &us[j]).re);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(config(8))]

    #[test]
    fn levy_characteristic_function(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let dim = 1 + rng.random_range(0..4);
        let h = common::random_hermitian(&mut rng, dim);
        let u = common::complex_vector(&mut rng, dim, 1.5);
        let law = levy_law(&h, &u).unwrap();
        let count = 20_000;
        let samples = law.sample(count, seed).unwrap();
        let bound = 5.0 / (count as f64).sqrt();
        for i in 0..25 {
            let t = -3.0 + 0.25 * i as f64;
            let gap = (empirical_characteristic_function(&samples, t) - law.characteristic_function(t)).norm();
            prop_assert!(gap <= bound, "t = {}: {}", t, gap);
        }
    }

    #[test]
    fn empirical_field_covariance_converges(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let k = 1 + rng.random_range(0..4);
        let u0 = common::complex_vector(&mut rng, 2, 1.0);
        let us: Vec<ComplexVector> = (0..k)
            .map(|_| ComplexVector::from_fn(2, |_, _| Complex64::new(common::normal(&mut rng), 0.0)))
            .collect();
        let law = coherent_gaussian_field(&u0, &us, Family::Q).unwrap();
        let count = 20_000;
        let draws = law.sample(count, seed).unwrap();
        let mean = draws.row_mean();
        let centred = RealMatrix::from_fn(count, k, |r, c| draws[(r, c)] - mean[c]);
        let emp = centred.transpose() * &centred / (count as f64 - 1.0);
        prop_assert!((emp - &law.covariance).norm() <= 5.0 * law.covariance.norm() / (count as f64).sqrt());
    }
}

/// All `(α, β)` units for noise dimension `d`.
fn fundamentals(d: usize) -> Vec<ItoDifferential<Poly>> {
    (0..=d)
        .flat_map(|a| (0..=d).map(move |b| (a, b)))
        .map(|(a, b)| ItoDifferential::term(d, a, b, Poly::constant(1.0)).unwrap())
        .collect()
}

#[test]
fn ito_product_associative_on_fundamentals() {
    for d in 1..=3 {
        let basis = fundamentals(d);
        for x in &basis {
            for y in &basis {
                let xy = ito_product(x, y).unwrap();
                for z in &basis {
                    let lhs = ito_product(&xy, z).unwrap();
                    let rhs = ito_product(x, &ito_product(y, z).unwrap()).unwrap();
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }
}

#[test]
fn leibniz_on_quadratures_and_counting() {
    for d in 1..=3 {
        for i in 1..=d {
            for j in 1..=d {
                let (qi, qj) = (Poly::atom("Qi"), Poly::atom("Qj"));
                let dqi = quadrature_differential(d, i).unwrap();
                let dqj = quadrature_differential(d, j).unwrap();
                let got = leibniz(&qi, &dqi, &qj, &dqj).unwrap();
                let mut want = dqj.left_mul(&qi).add(&dqi.left_mul(&qj)).unwrap();
                if i == j {
                    want = want.add(&ItoDifferential::time(d, Poly::constant(1.0))).unwrap();
                }
                assert!(poly_gap(&got, &want) == 0.0, "d = {d}, ({i}, {j})");
            }
        }
    }
    let s = Poly::atom("s");
    let dn = poisson_differential(1, 1, &s).unwrap();
    let n = Poly::atom("N");
    let got = leibniz(&n, &dn, &n, &dn).unwrap();
    let want = dn.left_mul(&n.scale(2.0)).add(&dn).unwrap();
    assert_eq!(poly_gap(&got, &want), 0.0);
}

#[test]
fn fundamental_table_entries() {
    let d = 2;
    let da = |i| ItoDifferential::annihilation(d, i, Poly::constant(1.0)).unwrap();
    let dad = |i| ItoDifferential::creation(d, i, Poly::constant(1.0)).unwrap();
    let dl = |i, j| ItoDifferential::conservation(d, i, j, Poly::constant(1.0)).unwrap();
    let dt = ItoDifferential::time(d, Poly::constant(1.0));
    assert_eq!(ito_product(&da(1), &dad(1)).unwrap(), dt);
    assert!(ito_product(&da(1), &dad(2)).unwrap().is_zero());
    assert!(ito_product(&dad(1), &da(1)).unwrap().is_zero());
    assert_eq!(ito_product(&dl(1, 2), &dl(2, 1)).unwrap(), dl(2, 2));
    assert!(ito_product(&dl(1, 2), &dl(1, 2)).unwrap().is_zero());
    assert_eq!(ito_product(&dl(1, 2), &dad(1)).unwrap(), dad(2));
    assert!(ito_product(&dl(1, 2), &dad(2)).unwrap().is_zero());
    assert_eq!(ito_product(&da(1), &dl(2, 1)).unwrap(), da(2));
    assert!(ito_product(&dt, &dt).unwrap().is_zero());
}

//! Randomized invariants across the library.

use lptlab::lindblad_engine::{apply_adjoint, apply_lindbladian, vectorize, LindbladModel};
use lptlab::linalg::{self, CMat};
use lptlab::meanfield_dynamics::{
    check_npt_symmetry, ddm_meanfield, find_fixed_points, jacobian_fd, lmg_meanfield, MeanFieldSystem,
};
use lptlab::model_zoo::*;
use lptlab::observables::{fidelity, negativity_dense, pt_asymmetry, squeeze};
use lptlab::spectral_analysis::{dense_gap, eigenvalues, full_spectrum, iterative_gap, pt_mode_measure, ArnoldiOptions};
use lptlab::spin_algebra::{collective_spin, Operator, PTOperator, SpinAxis, SpinBasis};
use lptlab::third_quantization::{beta_am, beta_fm, build_structure_matrix, hp_reduce_two_spin, TwoSpinPhase};
use lptlab::C64;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(d: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((d, d), |_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn random_hermitian(d: usize, seed: u64) -> Operator {
    Operator::new(linalg::hermitian_part(&random_matrix(d, seed))).unwrap()
}

fn random_state(d: usize, seed: u64) -> Operator {
    let a = random_matrix(d, seed);
    let rho = a.dot(&linalg::dagger(&a));
    let tr = linalg::trace(&rho);
    Operator::new(linalg::hermitian_part(&rho.mapv(|z| z / tr))).unwrap()
}

fn product_state(a: &Operator, b: &Operator) -> Operator {
    a.kron(b)
}

/// Every model family at small size with the given seed-driven parameters.
fn zoo(seed: u64) -> Vec<LindbladModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |a: f64, b: f64| a + (b - a) * rng.random::<f64>();
    vec![
        build_ddm(&DdmParams { spin: 2.5, g: u(0.2, 2.0), kappa: u(0.0, 2.0) }).unwrap(),
        build_lmg(&LmgParams { spin: 2.0, chi_x: u(-2.0, 2.0), chi_y: u(-4.0, 2.0), kappa: u(0.1, 2.0) }).unwrap(),
        build_two_spin(&TwoSpinParams { spin: 1.0, g: u(0.2, 2.0), gamma_gain: u(0.0, 2.0), gamma_loss: u(0.0, 2.0) }).unwrap(),
        build_kac_chain(&KacChainParams { n_sites: 3, eta: u(0.0, 3.0), field: u(0.2, 2.0) }).unwrap(),
        build_xxz(&XxzParams { n_sites: 3, anisotropy: u(-1.0, 1.0), gamma: u(0.0, 1.0) }).unwrap(),
        build_kerr(&KerrParams { detuning: u(-2.0, 2.0), kerr: u(0.0, 2.0), pump: u(0.0, 1.0), gamma: u(0.5, 2.0), scale: 5.0, fock_cutoff: 20 })
            .unwrap(),
    ]
}

fn coherent_state(basis: SpinBasis, theta: f64, phi: f64) -> Operator {
    let d = basis.dim();
    let sy = collective_spin(basis, SpinAxis::Y);
    let sz = collective_spin(basis, SpinAxis::Z);
    let u = linalg::expm_hermitian(sz.mat(), phi).unwrap().dot(&linalg::expm_hermitian(sy.mat(), theta).unwrap());
    let mut top = Array2::<C64>::zeros((d, d));
    top[[0, 0]] = C64::new(1.0, 0.0);
    Operator::new(u.dot(&top).dot(&linalg::dagger(&u))).unwrap()
}

/// |⟨L̂†(S_α/S)⟩ − g_α(M)| maximized over α for a spin-coherent state.
fn meanfield_mismatch(model: &LindbladModel, sys: &MeanFieldSystem, basis: SpinBasis, theta: f64, phi: f64) -> f64 {
    let rho = coherent_state(basis, theta, phi);
    let s = basis.spin();
    let axes = [SpinAxis::X, SpinAxis::Y, SpinAxis::Z];
    let m: Vec<f64> = axes.iter().map(|&a| collective_spin(basis, a).expect(&rho).re / s).collect();
    let g = sys.rhs(&m);
    axes.iter()
        .zip(&g)
        .map(|(&a, gi)| {
            let o = collective_spin(basis, a).scaled(C64::new(1.0 / s, 0.0));
            (apply_adjoint(model, &o).unwrap().expect(&rho).re - gi).abs()
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn su2_algebra_and_casimir(twice_s in 1u32..=100) {
        let b = SpinBasis::from_twice(twice_s).unwrap();
        let [sx, sy, sz, sp, sm] = [SpinAxis::X, SpinAxis::Y, SpinAxis::Z, SpinAxis::Plus, SpinAxis::Minus].map(|a| collective_spin(b, a));
        let comm = |a: &Operator, c: &Operator| a.dot(c).sub(&c.dot(a));
        prop_assert!(linalg::max_abs(comm(&sz, &sp).sub(&sp).mat()) <= 1e-12 * b.spin().max(1.0));
        prop_assert!(linalg::max_abs(comm(&sz, &sm).add(&sm).mat()) <= 1e-12 * b.spin().max(1.0));
        prop_assert!(linalg::max_abs(comm(&sp, &sm).sub(&sz.scaled(C64::new(2.0, 0.0))).mat()) <= 1e-12 * b.spin().powi(2).max(1.0));
        let s = b.spin();
        let cas = sx.dot(&sx).add(&sy.dot(&sy)).add(&sz.dot(&sz)).sub(&Operator::identity(b.dim()).scaled(C64::new(s * (s + 1.0), 0.0)));
        prop_assert!(linalg::max_abs(cas.mat()) <= 1e-10 * s.powi(2).max(1.0));
    }

    #[test]
    fn generators_preserve_trace_and_hermiticity(seed in any::<u64>()) {
        for model in zoo(seed) {
            let d = model.dim();
            let rho = random_hermitian(d, seed ^ 0xabc);
            let out = apply_lindbladian(&model, &rho).unwrap();
            prop_assert!(out.trace().norm() <= 1e-10 * d as f64, "{}: trace {}", model.label, out.trace());
            prop_assert!(linalg::max_abs(&(out.mat() - &linalg::dagger(out.mat()))) <= 1e-10, "{}", model.label);
        }
    }

    #[test]
    fn spectra_are_conjugation_closed_and_non_positive(seed in any::<u64>()) {
        for model in zoo(seed) {
            let mat = vectorize(&model).unwrap();
            let spec = full_spectrum(&mat).unwrap();
            let conj: Vec<C64> = spec.eigenvalues.iter().map(|z| z.conj()).collect();
            let scale = mat.matrix().max_abs().max(1.0);
            let dist = linalg::multiset_distance(&spec.eigenvalues, &conj);
            prop_assert!(dist <= 1e-8 * scale, "{}: conjugate mismatch {dist:e}, scale {scale}", model.label);
            prop_assert!(spec.max_real() <= 1e-8 * scale, "{}: max Re {}", model.label, spec.max_real());
            prop_assert!(spec.max_residual() <= 1e-8 * scale, "{}: residual {}", model.label, spec.max_residual());
        }
    }

    #[test]
    fn dense_and_iterative_gaps_agree(twice_s in 2u32..=20, kappa in 0.1f64..2.0) {
        let mat = vectorize(&build_ddm(&DdmParams { spin: twice_s as f64 / 2.0, g: 1.0, kappa }).unwrap()).unwrap();
        let (gap, _) = dense_gap(&mat).unwrap();
        let omega = eigenvalues(&mat).unwrap().iter().map(|z| z.im.abs()).fold(0.0, f64::max) + 0.5;
        let scan = iterative_gap(&mat, omega, ArnoldiOptions::default()).unwrap();
        prop_assert!((scan.gap.unwrap() - gap).abs() <= 1e-6, "dense {gap} iterative {:?}", scan.gap);
    }

    #[test]
    fn r_opt_is_bounded_and_vanishes_on_pt_eigenmodes(seed in any::<u64>(), twice_s in 1u32..=12) {
        let spin = twice_s as f64 / 2.0;
        let pt: PTOperator = spin_parity(spin).unwrap();
        let d = pt.dim();
        let a = Operator::new(random_matrix(d, seed)).unwrap();
        let (r, _) = pt_mode_measure(&a, &pt).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert!(r > 1e-10);
        let sym = a.add(&pt.conjugate(&a));
        let (r0, _) = pt_mode_measure(&sym, &pt).unwrap();
        prop_assert!(r0 <= 1e-10, "R = {r0}");
    }

    #[test]
    fn meanfield_is_the_large_spin_limit(theta in 0.2f64..2.9, phi in 0.0f64..6.28, kappa in 0.1f64..2.0, chi_y in -4.0f64..-0.5) {
        for (build, sys) in [
            (Box::new(move |s: f64| build_ddm(&DdmParams { spin: s, g: 1.0, kappa }).unwrap()) as Box<dyn Fn(f64) -> LindbladModel>, ddm_meanfield(1.0, kappa)),
            (Box::new(move |s: f64| build_lmg(&LmgParams { spin: s, chi_x: 1.0, chi_y, kappa }).unwrap()), lmg_meanfield(1.0, chi_y, kappa)),
        ] {
            let e: Vec<f64> = [10.0, 20.0, 40.0].iter().map(|&s| meanfield_mismatch(&build(s), &sys, SpinBasis::new(s).unwrap(), theta, phi)).collect();
            if e[0] > 1e-10 {
                prop_assert!((e[0] / e[1] - 2.0).abs() < 0.05 && (e[1] / e[2] - 2.0).abs() < 0.05, "{}: {e:?}", sys.label);
            }
        }
    }

    #[test]
    fn fixed_points_come_in_pt_pairs(kappa in 0.05f64..3.0, chi_y in -5.0f64..-0.5, use_lmg in any::<bool>()) {
        let sys = if use_lmg { lmg_meanfield(1.0, chi_y, kappa) } else { ddm_meanfield(1.0, kappa) };
        let fps = find_fixed_points(&sys, 0).unwrap();
        prop_assert!(!fps.is_empty());
        for f in &fps {
            let m = &f.location;
            let pm = [m[0], m[1], -m[2]];
            let res = sys.rhs(&pm).iter().map(|x| x.abs()).fold(0.0, f64::max);
            prop_assert!(res <= 1e-8, "P̃M not fixed: {res}");
            let partner = fps.iter().find(|g| g.location.iter().zip(&pm).all(|(a, b)| (a - b).abs() < 1e-6));
            prop_assert!(partner.is_some(), "partner of {m:?} not found");
            let neg: Vec<C64> = f.excitation_eigs.iter().map(|z| -z).collect();
            prop_assert!(linalg::multiset_distance(&partner.unwrap().excitation_eigs, &neg) <= 1e-6,
                "{:?} vs {:?}", partner.unwrap().excitation_eigs, f.excitation_eigs);
            let jfd = jacobian_fd(&sys, m, 1e-5);
            let ja = sys.jacobian(m);
            prop_assert!((&ja - &jfd).iter().map(|x| x.abs()).fold(0.0, f64::max) <= 1e-6);
        }
    }

    #[test]
    fn npt_parity_structure(kappa in 0.0f64..3.0, chi_x in -3.0f64..3.0, chi_y in -5.0f64..3.0) {
        for sys in [ddm_meanfield(1.0, kappa), lmg_meanfield(chi_x, chi_y, kappa)] {
            let c = check_npt_symmetry(&sys, 1000, 1e-12);
            prop_assert!(c.pass, "{}: {}", sys.label, c.max_violation);
        }
    }

    #[test]
    fn closed_form_rapidities(gg in 0.01f64..3.0, gl in 0.01f64..3.0, g in 0.1f64..3.0) {
        prop_assume!(((gg + gl).powi(2) - 4.0 * g * g).abs() > 1e-3);
        let p = TwoSpinParams { spin: 1.0, g, gamma_gain: gg, gamma_loss: gl };
        let fm = build_structure_matrix(&hp_reduce_two_spin(&p, TwoSpinPhase::FmUp)).unwrap();
        let am = build_structure_matrix(&hp_reduce_two_spin(&p, TwoSpinPhase::Am)).unwrap();
        for b in beta_fm(gg, gl, g) {
            prop_assert!(fm.rapidities.iter().any(|w| (w - b).norm() <= 1e-10), "FM β {b} not in {:?}", fm.rapidities);
        }
        for b in beta_am(gg, gl, g) {
            prop_assert!(am.rapidities.iter().any(|w| (w - C64::new(b, 0.0)).norm() <= 1e-10), "AM β {b} not in {:?}", am.rapidities);
        }
    }

    #[test]
    fn fidelity_symmetric_and_monotone_under_depolarizing(seed in any::<u64>(), d in 2usize..8) {
        let rho = random_state(d, seed);
        let sigma = random_state(d, seed.wrapping_add(1));
        let f = fidelity(&rho, &sigma).unwrap();
        prop_assert!((f - fidelity(&sigma, &rho).unwrap()).abs() <= 1e-10);
        let white = Operator::identity(d).scaled(C64::new(1.0 / d as f64, 0.0));
        let depol = |a: &Operator, p: f64| a.scaled(C64::new(1.0 - p, 0.0)).add(&white.scaled(C64::new(p, 0.0)));
        let mut last = f;
        for p in [0.25, 0.5, 0.75, 1.0] {
            let fp = fidelity(&depol(&rho, p), &depol(&sigma, p)).unwrap();
            prop_assert!(fp >= last - 1e-10, "fidelity fell from {last} to {fp}");
            last = fp;
        }
        prop_assert!((last - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn pt_asymmetry_invariant_under_pt(seed in any::<u64>(), twice_s in 1u32..=10) {
        let pt = spin_parity(twice_s as f64 / 2.0).unwrap();
        let rho = random_state(pt.dim(), seed);
        let (a, _) = pt_asymmetry(&rho, &pt).unwrap();
        let (b, _) = pt_asymmetry(&pt.conjugate(&rho), &pt).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn wineland_ku_identity(seed in any::<u64>(), twice_s in 2u32..=20) {
        let b = SpinBasis::from_twice(twice_s).unwrap();
        let rho = random_state(b.dim(), seed);
        if let Ok(q) = squeeze(&rho, b) {
            let s = b.spin();
            let len2: f64 = [SpinAxis::X, SpinAxis::Y, SpinAxis::Z].iter().map(|&a| collective_spin(b, a).expect(&rho).re.powi(2)).sum();
            prop_assert!((q.xi2_w - q.xi2_ku * s * s / len2).abs() <= 1e-9 * q.xi2_w.abs().max(1.0));
        }
    }
}

#[test]
fn negativity_vanishes_on_separable_corpus() {
    let mut corpus = Vec::new();
    for k in 0..10u64 {
        corpus.push(product_state(&random_state(2, k), &random_state(3, 100 + k)));
    }
    for k in 0..10u64 {
        let w = 0.1 + 0.08 * k as f64;
        let a = product_state(&random_state(2, 200 + k), &random_state(3, 300 + k));
        let b = product_state(&random_state(2, 400 + k), &random_state(3, 500 + k));
        corpus.push(a.scaled(C64::new(w, 0.0)).add(&b.scaled(C64::new(1.0 - w, 0.0))));
    }
    assert_eq!(corpus.len(), 20);
    for rho in &corpus {
        let n = negativity_dense(rho, (2, 3)).unwrap();
        assert!(n.abs() <= 1e-10, "negativity {n}");
    }
}

#[test]
fn normalized_commutator_scaling() {
    let mut prev = None;
    for s in [10.0, 20.0, 40.0] {
        let b = SpinBasis::new(s).unwrap();
        let x = collective_spin(b, SpinAxis::X).scaled(C64::new(1.0 / s, 0.0));
        let y = collective_spin(b, SpinAxis::Y).scaled(C64::new(1.0 / s, 0.0));
        let c = linalg::max_abs(x.dot(&y).sub(&y.dot(&x)).mat());
        if let Some(p) = prev {
            let ratio: f64 = p / c;
            assert!((ratio - 2.0).abs() <= 0.1, "ratio {ratio}");
        }
        prev = Some(c);
    }
}

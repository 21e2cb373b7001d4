use bzdos::linalg::{ComplexMatrix, C64};
use bzdos::model::{
    band_eval, bloch_gradient, bloch_hamiltonian, bloch_hessian, AnalyticBandModel, BandFn, Closure, Domain,
    HoppingTerm, KPoint, Model, TightBindingModel,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random Hermitian-closed model with hoppings up to range 2.
fn random_model(seed: u64) -> TightBindingModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.gen_range(1..=3);
    let norb = rng.gen_range(1..=4);
    let rand_mat = |rng: &mut ChaCha8Rng| {
        ComplexMatrix::from_fn(norb, norb, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    };
    let a = rand_mat(&mut rng);
    let onsite = (&a + &a.adjoint()).scale(C64::new(0.5, 0.0));
    let mut terms = vec![HoppingTerm::new([0, 0, 0], onsite)];
    let mut seen = std::collections::HashSet::new();
    for _ in 0..rng.gen_range(1..6) {
        let mut r = [0i32; 3];
        for c in r.iter_mut().take(dim) {
            *c = rng.gen_range(-2..=2);
        }
        // keep one representative of each +-R pair
        let first = r.iter().copied().find(|&c| c != 0);
        match first {
            None => continue,
            Some(c) if c < 0 => r.iter_mut().for_each(|c| *c = -*c),
            _ => {}
        }
        if !seen.insert(r) {
            continue;
        }
        terms.push(HoppingTerm::new(r, rand_mat(&mut rng)));
    }
    TightBindingModel::new(dim, norb, terms, Closure::Complete).unwrap()
}

fn random_k(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect()
}

#[test]
fn hermitian_on_fifty_models() {
    for seed in 0..50 {
        let m = random_model(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        for _ in 0..10 {
            let k = random_k(&mut rng, m.dim());
            let h = bloch_hamiltonian(&m, &KPoint::new(&k).unwrap()).unwrap();
            assert!(h.hermiticity_defect() <= 1e-12 * h.max_abs().max(1e-300), "seed {seed}");
        }
    }
}

#[test]
fn derivatives_match_finite_differences() {
    for seed in 0..20 {
        let m = random_model(seed);
        let d = m.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = random_k(&mut rng, d);
        let grad = m.gradient(&k, None);
        let hess = m.hessian(&k, None);
        for j in 0..d {
            let step = 1e-5;
            let mut kp = k.clone();
            let mut km = k.clone();
            kp[j] += step;
            km[j] -= step;
            let fd = (&m.hamiltonian(&kp, None) - &m.hamiltonian(&km, None)).scale(C64::new(0.5 / step, 0.0));
            let scale = grad[j].max_abs().max(1.0);
            assert!((&fd - &grad[j]).max_abs() <= 1e-6 * scale, "seed {seed} grad {j}");

            let step = 1e-4;
            let mut kp = k.clone();
            let mut km = k.clone();
            kp[j] += step;
            km[j] -= step;
            let gp = m.gradient(&kp, None);
            let gm = m.gradient(&km, None);
            for i in 0..d {
                let fd = (&gp[i] - &gm[i]).scale(C64::new(0.5 / step, 0.0));
                let exact = &hess[i * d + j];
                let scale = exact.max_abs().max(1.0);
                assert!((&fd - exact).max_abs() <= 1e-4 * scale, "seed {seed} hess {i}{j}");
            }
        }
        for i in 0..d {
            for j in 0..d {
                assert_eq!(hess[i * d + j], hess[j * d + i]);
            }
        }
    }
}

#[test]
fn complex_shift_converges_linearly() {
    let m = random_model(5);
    let d = m.dim();
    let k = vec![0.13; d];
    let h0 = m.hamiltonian(&k, None);
    let errs: Vec<f64> = [1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&s| {
            let h = vec![s; d];
            (&m.hamiltonian(&k, Some(&h)) - &h0).max_abs()
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 10.0).abs() < 0.1, "ratio {ratio}");
    }
}

#[test]
fn bloch_wrappers_check_dimension() {
    let m = random_model(2);
    let wrong = KPoint::new(&vec![0.0; m.dim() % 3 + 1]).unwrap();
    assert!(bloch_hamiltonian(&m, &wrong).is_err());
    assert!(bloch_gradient(&m, &wrong).is_err());
    assert!(bloch_hessian(&m, &wrong).is_err());
}

#[test]
fn chain_spec_values() {
    let t = ComplexMatrix::from_real_rows(&[vec![1.0]]).unwrap();
    let chain = TightBindingModel::new(
        1,
        1,
        vec![HoppingTerm::new([1, 0, 0], t.clone()), HoppingTerm::new([-1, 0, 0], t)],
        Closure::Strict,
    )
    .unwrap();
    let at = |k: f64| bloch_hamiltonian(&chain, &KPoint::new(&[k]).unwrap()).unwrap()[(0, 0)];
    assert!((at(0.0) - C64::new(2.0, 0.0)).norm() < 1e-15);
    assert!(at(0.25).norm() < 1e-15);
    let shifted = bloch_hamiltonian(&chain, &KPoint::with_shift(&[0.0], &[0.1]).unwrap()).unwrap()[(0, 0)];
    let expect = 2.0 * (0.2 * std::f64::consts::PI).cosh();
    assert!((shifted.re - expect).abs() < 1e-13 && shifted.im.abs() < 1e-13);
    assert!((expect - 2.40794).abs() < 1e-5);
    let g = bloch_gradient(&chain, &KPoint::new(&[0.25]).unwrap()).unwrap();
    assert!((g[0][(0, 0)].re + 4.0 * std::f64::consts::PI).abs() < 1e-12);
    let hs = bloch_hessian(&chain, &KPoint::new(&[0.0]).unwrap()).unwrap();
    assert!((hs[0][(0, 0)].re + 8.0 * std::f64::consts::PI.powi(2)).abs() < 1e-11);
}

#[test]
fn band_model_spec_values() {
    let gas = AnalyticBandModel::new(
        1,
        vec![BandFn::Parabolic {
            offset: vec![0.0],
            scale: 1.0,
        }],
        Domain::Periodic,
    )
    .unwrap();
    let e = band_eval(&gas, 0, &KPoint::new(&[0.3]).unwrap()).unwrap();
    assert!((e - C64::new(0.09, 0.0)).norm() < 1e-15);
    let e = band_eval(&gas, 0, &KPoint::with_shift(&[0.3], &[0.1]).unwrap()).unwrap();
    assert!((e - C64::new(0.08, 0.06)).norm() < 1e-15);
    let toy = AnalyticBandModel::new(
        1,
        vec![BandFn::Linear {
            slope: vec![1.0],
            constant: 0.0,
        }],
        Domain::Interval { half_width: 1.0 },
    )
    .unwrap();
    assert_eq!(band_eval(&toy, 0, &KPoint::new(&[0.2]).unwrap()).unwrap(), C64::new(0.2, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn periodic_in_every_direction(seed in 0u64..200, k in prop::array::uniform3(-0.5f64..0.5)) {
        let m = random_model(seed);
        let d = m.dim();
        let h0 = m.hamiltonian(&k[..d], None);
        for j in 0..d {
            let mut kj = k;
            kj[j] += 1.0;
            let h1 = m.hamiltonian(&kj[..d], None);
            prop_assert!((&h1 - &h0).max_abs() <= 1e-13 * h0.max_abs().max(1.0));
        }
    }

    #[test]
    fn hamiltonian_hermitian_and_real_spectrum(seed in 0u64..200, k in prop::array::uniform3(-0.5f64..0.5)) {
        let m = random_model(seed);
        let d = m.dim();
        let h = m.hamiltonian(&k[..d], None);
        prop_assert!(h.hermiticity_defect() <= 1e-12 * h.max_abs().max(1e-300));
        let e = m.energies(&k[..d]);
        prop_assert_eq!(e.len(), m.num_bands());
        prop_assert!(e.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn band_extension_agrees_on_real_axis(g in -3i32..=3, k in -0.5f64..0.5, s in 0.1f64..3.0) {
        let b = BandFn::Parabolic { offset: vec![g as f64], scale: s };
        let c = b.eval_complex(&[k], &[0.0]);
        prop_assert_eq!(c.im, 0.0);
        prop_assert!((c.re - b.eval(&[k])).abs() <= 1e-14 * c.re.abs().max(1.0));
        let l = BandFn::Linear { slope: vec![s], constant: g as f64 };
        prop_assert!((l.eval_complex(&[k], &[0.0]).re - l.eval(&[k])).abs() < 1e-14);
    }

    #[test]
    fn shift_cap_enforced(h in -1.0f64..1.0) {
        let r = KPoint::with_shift(&[0.0], &[h]);
        prop_assert_eq!(r.is_ok(), h.abs() <= 0.25);
    }
}

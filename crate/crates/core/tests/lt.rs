use bzdos::iai::{adaptive_1d, AdaptiveConfig};
use bzdos::lt::{kuhn_simplices, lt_dos, simplex_dos};
use bzdos::linalg::{ComplexMatrix, C64};
use bzdos::model::{AnalyticBandModel, BandFn, Closure, Domain, HoppingTerm, Model, TightBindingModel};
use bzdos::systems::{make_chain, make_free_gas, make_graphene, make_two_block_toy};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two-orbital model without symmetries, so no simplex is flat. A flat
/// simplex carries a delta function that the half-open regimes drop.
fn generic_model(dim: usize, seed: u64) -> TightBindingModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mat = || ComplexMatrix::from_fn(2, 2, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let a = mat();
    let mut terms = vec![HoppingTerm::new([0, 0, 0], (&a + &a.adjoint()).scale(C64::new(0.5, 0.0)))];
    for axis in 0..dim {
        let mut r = [0; 3];
        r[axis] = 1;
        terms.push(HoppingTerm::new(r, mat()));
    }
    TightBindingModel::new(dim, 2, terms, Closure::Complete).unwrap()
}

/// Sorted, deduplicated band energies at every grid node: the kinks of the
/// tetrahedron DOS.
fn corner_energies<M: Model + ?Sized>(model: &M, n: usize) -> Vec<f64> {
    let d = model.dim();
    let mut out = Vec::new();
    for idx in 0..n.pow(d as u32) {
        let mut rest = idx;
        let k: Vec<f64> = (0..d)
            .map(|_| {
                let i = rest % n;
                rest /= n;
                i as f64 / n as f64 - 0.5
            })
            .collect();
        out.extend(model.energies(&k));
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    out
}

/// Integral of the tetrahedron DOS over `[lo, hi]`, one Gauss-Kronrod panel
/// per interval between kinks. The DOS is a polynomial of degree `d - 1` on
/// each of them, so every panel is exact.
fn integrate<M: Model + ?Sized>(model: &M, n: usize, kinks: &[f64], lo: f64, hi: f64) -> f64 {
    let mut pts: Vec<f64> = kinks.iter().copied().filter(|&e| e > lo && e < hi).collect();
    pts.insert(0, lo);
    pts.push(hi);
    let cfg = AdaptiveConfig::new(1e-13, 1e-15, 1000).unwrap();
    pts.windows(2)
        .map(|w| adaptive_1d(|e| lt_dos(model, e, n).unwrap().value, w[0], w[1], &cfg).unwrap().value)
        .sum()
}

#[test]
fn energy_integral_counts_bands() {
    let cases: Vec<(Box<dyn Model>, usize)> = vec![
        (Box::new(make_chain(1.0).unwrap().model), 8),
        (Box::new(generic_model(2, 1)), 6),
        (Box::new(generic_model(2, 2)), 5),
        (Box::new(generic_model(3, 3)), 4),
    ];
    for (m, n) in cases {
        let kinks = corner_energies(m.as_ref(), n);
        let lo = kinks[0] - 0.1;
        let hi = kinks[kinks.len() - 1] + 0.1;
        let total = integrate(m.as_ref(), n, &kinks, lo, hi);
        let bands = m.num_bands() as f64;
        assert!((total - bands).abs() < 1e-10 * bands, "dim {} n {n}: {total}", m.dim());
    }
}

#[test]
fn toy_integral_is_domain_length() {
    let toy = make_two_block_toy(1.0, 2.0, 3.0).unwrap();
    let cfg = AdaptiveConfig::new(1e-13, 1e-15, 1000).unwrap();
    let mut total = 0.0;
    for w in [-7.0, -6.0, -3.0, 0.0, 3.0, 6.0, 7.0].windows(2) {
        total += adaptive_1d(|e| lt_dos(&toy.model, e, 10).unwrap().value, w[0], w[1], &cfg).unwrap().value;
    }
    assert!((total - 12.0).abs() < 1e-10, "{total}");
}

#[test]
fn continuous_across_kinks_in_two_and_three_dimensions() {
    let cases: Vec<(Box<dyn Model>, usize)> = vec![
        (Box::new(generic_model(2, 4)), 7),
        (Box::new(generic_model(3, 5)), 4),
    ];
    let delta = 1e-10;
    for (m, n) in cases {
        for &e in &corner_energies(m.as_ref(), n) {
            let a = lt_dos(m.as_ref(), e - delta, n).unwrap().value;
            let b = lt_dos(m.as_ref(), e + delta, n).unwrap().value;
            assert!((a - b).abs() < 1e-6, "dim {} at {e}: {a} vs {b}", m.dim());
        }
    }
}

#[test]
fn cumulative_dos_is_monotone() {
    let g = make_graphene(1.0).unwrap();
    let n = 5;
    let kinks = corner_energies(&g.model, n);
    let grid: Vec<f64> = (0..=40).map(|i| -3.2 + 0.16 * i as f64).collect();
    let mut prev = 0.0;
    let mut cum = 0.0;
    for w in grid.windows(2) {
        cum += integrate(&g.model, n, &kinks, w[0], w[1]);
        assert!(cum >= prev - 1e-14);
        prev = cum;
    }
    // symmetric points give flat triangles, whose weight is dropped
    assert!(cum <= 2.0 + 1e-12 && cum > 1.8, "{cum}");
}

#[test]
fn single_tetrahedron_matches_monte_carlo() {
    // volume fraction below E from uniform samples, against the integrated formula
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = AdaptiveConfig::new(1e-13, 1e-15, 1000).unwrap();
    for _ in 0..4 {
        let mut c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        c.sort_by(f64::total_cmp);
        let samples = 400_000;
        let probes: Vec<f64> = (1..8).map(|i| c[0] + (c[3] - c[0]) * i as f64 / 8.0).collect();
        let mut below = vec![0usize; probes.len()];
        for _ in 0..samples {
            // uniform barycentric weights: normalized exponential variates
            let x: Vec<f64> = (0..4).map(|_| -rng.gen::<f64>().ln()).collect();
            let s: f64 = x.iter().sum();
            let e: f64 = x.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() / s;
            for (cnt, &p) in below.iter_mut().zip(&probes) {
                if e < p {
                    *cnt += 1;
                }
            }
        }
        for (cnt, &p) in below.iter().zip(&probes) {
            let mut fraction = 0.0;
            for w in [c[0], c[1], c[2], c[3]].windows(2) {
                let (a, b) = (w[0], w[1].min(p));
                if b > a {
                    fraction += adaptive_1d(|e| simplex_dos(&c, e, 1.0), a, b, &cfg).unwrap().value;
                }
            }
            let mc = *cnt as f64 / samples as f64;
            assert!((fraction - mc).abs() < 4e-3, "corners {c:?} at {p}: {fraction} vs {mc}");
        }
    }
}

#[test]
fn near_top_of_degenerate_tetrahedron() {
    let v = simplex_dos(&[0.0, 1.0, 1.0, 1.0], 1.0 - 1e-9, 1.0);
    assert!((v - 3.0).abs() < 1e-7);
}

#[test]
fn kuhn_simplices_tile_the_cube() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for d in 1..=3 {
        let simplices = kuhn_simplices(d);
        let vertex = |mask: usize| -> Vec<f64> { (0..d).map(|a| ((mask >> a) & 1) as f64).collect() };
        for _ in 0..2000 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            let mut hits = 0;
            for s in &simplices {
                // in a Kuhn simplex the coordinates are ordered along the permutation
                let path: Vec<usize> = s
                    .windows(2)
                    .map(|w| {
                        let bit = w[1] ^ w[0];
                        bit.trailing_zeros() as usize
                    })
                    .collect();
                let inside = path.windows(2).all(|p| x[p[0]] >= x[p[1]]);
                // every vertex is a corner of the unit cube
                assert!(s.iter().all(|&m| vertex(m).iter().all(|&c| c == 0.0 || c == 1.0)));
                if inside {
                    hits += 1;
                }
            }
            assert_eq!(hits, 1, "d={d} x={x:?}");
        }
    }
}

#[test]
fn linear_band_exact_on_any_grid() {
    let m = AnalyticBandModel::new(
        1,
        vec![BandFn::Linear {
            slope: vec![2.5],
            constant: 0.3,
        }],
        Domain::Interval { half_width: 1.0 },
    )
    .unwrap();
    for n in [2, 3, 17, 200] {
        for e in [-1.9, 0.0, 0.3, 2.6] {
            let v = lt_dos(&m, e, n).unwrap().value;
            assert!((v - 0.4).abs() < 1e-13, "n={n} e={e}: {v}");
        }
    }
}

#[test]
fn free_gas_2d_matches_closed_form() {
    let g = make_free_gas(2, 1).unwrap();
    for e in [0.05, 0.1, 0.2] {
        let v = lt_dos(&g.model, e, 400).unwrap().value;
        let exact = g.exact_dos(e).unwrap();
        assert!((v - exact).abs() < 2e-3 * exact, "E={e}: {v} vs {exact}");
    }
}

#[test]
fn chain_error_is_second_order_at_band_centre() {
    let chain = make_chain(1.0).unwrap();
    let ns = [64.0, 128.0, 256.0, 512.0, 1024.0, 2048.0, 4096.0];
    let e = 0.0;
    let exact = chain.exact_dos(e).unwrap();
    let logs: Vec<(f64, f64)> = ns
        .iter()
        .map(|&n| (f64::ln(n), (lt_dos(&chain.model, e, n as usize).unwrap().value - exact).abs().ln()))
        .collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let s = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / logs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((s + 2.0).abs() < 0.3, "slope {s}");
}

#[test]
fn rejects_bad_input() {
    let chain = make_chain(1.0).unwrap();
    assert!(lt_dos(&chain.model, 0.0, 1).is_err());
    assert!(lt_dos(&chain.model, f64::NAN, 10).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nonnegative(e in -4.0f64..4.0, n in 2usize..12) {
        let g = make_graphene(1.0).unwrap();
        prop_assert!(lt_dos(&g.model, e, n).unwrap().value >= 0.0);
    }

    #[test]
    fn simplex_weight_integrates_to_volume(c in prop::collection::vec(-2.0f64..2.0, 2..=4), vol in 0.01f64..3.0) {
        let mut c = c;
        c.sort_by(f64::total_cmp);
        prop_assume!(c.windows(2).all(|w| w[1] - w[0] > 1e-3));
        let cfg = AdaptiveConfig::new(1e-13, 1e-15, 1000).unwrap();
        let total: f64 = c.windows(2)
            .map(|w| adaptive_1d(|e| simplex_dos(&c, e, vol), w[0], w[1], &cfg).unwrap().value)
            .sum();
        prop_assert!((total - vol).abs() < 1e-11 * vol.max(1.0));
    }
}

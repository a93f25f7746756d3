use nntuck::estimate::MONOTONE_SLACK;
use nntuck::ndarray::Array2;
use nntuck::synth::{sample, sample_rates, PlantedScenario};
use nntuck::{fit, fit_from, fit_once, fit_sca_once, Error, FitConfig, Mask3, ModelSpec, NNTuckModel, RegimeKind, ScaStrategy, Tensor3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random_range(0.05..1.0))
}

/// A random model satisfying `spec` on `n` nodes and `l` layers.
fn random_model(spec: ModelSpec, n: usize, l: usize, seed: u64) -> NNTuckModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = spec.k();
    let c = spec.c(l);
    let u = random_matrix(&mut rng, n, k);
    let v = if spec.symmetric() { u.clone() } else { random_matrix(&mut rng, n, k) };
    let y = match spec.kind() {
        RegimeKind::Independent => Array2::eye(l),
        RegimeKind::Redundant => Array2::ones((l, 1)),
        RegimeKind::Dependent => random_matrix(&mut rng, l, c),
        RegimeKind::Sca => u.clone(),
    };
    let g = Tensor3::from_fn([k, k, c], |a, b, s| {
        let (lo, hi) = if spec.symmetric() { (a.min(b), a.max(b)) } else { (a, b) };
        0.5 + ((lo * 7 + hi * 3 + s * 5) % 11) as f64 / 5.0
    })
    .unwrap();
    NNTuckModel::new(u, v, y, g).unwrap()
}

fn regimes(l: usize) -> Vec<ModelSpec> {
    let mut out = vec![
        ModelSpec::independent(2),
        ModelSpec::redundant(2),
        ModelSpec::independent(2).with_symmetric(true),
        ModelSpec::redundant(2).with_symmetric(true),
    ];
    if l >= 3 {
        out.push(ModelSpec::dependent(2, 2));
        out.push(ModelSpec::dependent(2, 2).with_symmetric(true));
    }
    out
}

fn symmetric_counts(a: &Tensor3) -> Tensor3 {
    Tensor3::from_fn(a.dims(), |i, j, k| a.get(i.min(j), i.max(j), k)).unwrap()
}

#[test]
fn exact_data_is_a_fixed_point() {
    for spec in regimes(4).into_iter().chain([ModelSpec::sca(2)]) {
        let truth = random_model(spec, 4, 4, 1);
        let a = truth.reconstruct();
        let mask = Mask3::full(a.dims());
        let cfg = FitConfig::new(spec).with_max_iters(50);
        let r = fit_from(&a, &mask, &cfg, truth.clone()).unwrap();
        assert!(r.final_kl < 1e-8, "{spec}: KL {}", r.final_kl);
        for (name, got, want) in [("U", r.model.u(), truth.u()), ("Y", r.model.y(), truth.y())] {
            let diff = (got - want).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(diff < 1e-8, "{spec}: {name} moved by {diff}");
        }
        assert!(r.model.core().max_abs_diff(truth.core()) < 1e-8, "{spec}: core moved");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn standard_regimes_are_monotone_and_keep_constraints(n in 3usize..9, l in 2usize..7, seed in any::<u64>()) {
        let rates = Tensor3::from_fn([n, n, l], |i, j, k| 0.2 + ((i * 3 + j * 5 + k * 7) % 4) as f64 * 0.4).unwrap();
        let counts = sample_rates(&rates, seed);
        for spec in regimes(l) {
            let a = if spec.symmetric() { symmetric_counts(&counts) } else { counts.clone() };
            let cfg = FitConfig::new(spec).with_max_iters(300);
            let r = fit_once(&a, &Mask3::structural(n, l, false), &cfg, seed).unwrap();
            let worst = r.kl_trace.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(worst <= MONOTONE_SLACK, "{spec}: KL rose by {worst}");
            prop_assert!(r.monotone);
            prop_assert!(r.model.validate(&spec).is_empty(), "{spec}: {:?}", r.model.validate(&spec));
            prop_assert!(r.model.u().iter().chain(r.model.y().iter()).chain(r.model.core().values()).all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn masked_cells_never_matter(n in 3usize..7, l in 3usize..6, seed in any::<u64>(), junk in 0u32..50) {
        let spec = ModelSpec::dependent(2, 2);
        let truth = random_model(spec, n, l, seed);
        let a = sample(&truth, seed);
        let mask = Mask3::from_fn(a.dims(), |i, j, k| (i + 2 * j + k) % 3 != 0);
        let perturbed = Tensor3::from_fn(a.dims(), |i, j, k| {
            if mask.get(i, j, k) { a.get(i, j, k) } else { f64::from(junk) }
        }).unwrap();
        let cfg = FitConfig::new(spec).with_max_iters(100);
        let r1 = fit_once(&a, &mask, &cfg, seed).unwrap();
        let r2 = fit_once(&perturbed, &mask, &cfg, seed).unwrap();
        prop_assert_eq!(r1, r2);
    }

    #[test]
    fn rescaling_u_against_the_core_keeps_the_reconstruction(seed in any::<u64>(), s in 0.1f64..10.0) {
        let m = random_model(ModelSpec::dependent(3, 2), 5, 4, seed);
        let scaled_u = m.u() * s;
        let scaled_g = Tensor3::new(m.core().dims(), m.core().values().iter().map(|x| x / s).collect()).unwrap();
        let m2 = NNTuckModel::new(scaled_u, m.v().clone(), m.y().clone(), scaled_g).unwrap();
        let (a, b) = (m.reconstruct(), m2.reconstruct());
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}

#[test]
fn identical_seeds_give_identical_results() {
    let truth = random_model(ModelSpec::dependent(2, 2), 6, 4, 3);
    let a = sample(&truth, 3);
    let mask = Mask3::structural(6, 4, false);
    let cfg = FitConfig::new(ModelSpec::dependent(2, 2)).with_restarts(4).with_seed(11);
    assert_eq!(fit(&a, &mask, &cfg).unwrap(), fit(&a, &mask, &cfg).unwrap());
    assert_eq!(fit_once(&a, &mask, &cfg, 5).unwrap(), fit_once(&a, &mask, &cfg, 5).unwrap());
}

#[test]
fn single_restart_equals_fit_once_and_more_restarts_do_not_hurt() {
    let truth = random_model(ModelSpec::dependent(2, 2), 6, 4, 8);
    let a = sample(&truth, 8);
    let mask = Mask3::structural(6, 4, false);
    let one = FitConfig::new(ModelSpec::dependent(2, 2)).with_restarts(1).with_seed(2);
    let best1 = fit(&a, &mask, &one).unwrap();
    let mut direct = fit_once(&a, &mask, &one, best1.restart_seeds[0]).unwrap();
    direct.restart_seeds = best1.restart_seeds.clone();
    assert_eq!(best1, direct);
    let best20 = fit(&a, &mask, &one.clone().with_restarts(20)).unwrap();
    assert_eq!(best20.restart_seeds[0], best1.restart_seeds[0]);
    assert!(best20.final_loglik >= best1.final_loglik);
}

#[test]
fn independent_fits_at_least_as_well_as_dependent() {
    for seed in 0..4 {
        let truth = random_model(ModelSpec::dependent(2, 2), 7, 5, seed);
        let a = sample(&truth, seed);
        let mask = Mask3::structural(7, 5, false);
        let cfg = FitConfig::new(ModelSpec::dependent(2, 2)).with_restarts(10).with_seed(seed);
        let dep = fit(&a, &mask, &cfg).unwrap();
        let ind = fit(&a, &mask, &cfg.for_spec(ModelSpec::independent(2))).unwrap();
        assert!(ind.final_kl <= dep.final_kl * (1.0 + 1e-6), "seed {seed}: {} > {}", ind.final_kl, dep.final_kl);
    }
}

#[test]
fn sca_returns_the_trajectory_minimum_with_u_equal_y() {
    for strategy in [ScaStrategy::AveragedFactors, ScaStrategy::Naive, ScaStrategy::AveragedUpdates] {
        let scenario = PlantedScenario::balanced(8, 8, ModelSpec::sca(2), 3.0, 0.5, 4).unwrap();
        let a = scenario.sample().unwrap();
        let cfg = FitConfig::new(ModelSpec::sca(2)).with_sca_strategy(strategy).with_max_iters(300);
        let r = fit_sca_once(&a, &Mask3::structural(8, 8, false), &cfg, 9).unwrap();
        assert_eq!(r.model.u(), r.model.y());
        let min = r.kl_trace.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(r.kl_trace.iter().all(|&k| r.final_kl <= k), "{strategy:?}");
        assert!((r.final_kl - min).abs() <= 1e-9 * min.max(1.0));
    }
}

#[test]
fn sca_truth_is_a_fixed_point() {
    let truth = random_model(ModelSpec::sca(2), 5, 5, 2);
    let a = truth.reconstruct();
    let cfg = FitConfig::new(ModelSpec::sca(2)).with_max_iters(30);
    let r = fit_from(&a, &Mask3::full(a.dims()), &cfg, truth).unwrap();
    assert!(r.final_kl < 1e-8, "KL {}", r.final_kl);
}

#[test]
fn fit_errors() {
    let a = Tensor3::zeros([3, 3, 2]);
    let empty = Mask3::from_fn([3, 3, 2], |_, _, _| false);
    let cfg = FitConfig::new(ModelSpec::redundant(1)).with_restarts(1);
    assert!(matches!(fit(&a, &empty, &cfg), Err(Error::Estimation(_))));
    let err = fit(&a, &Mask3::full([3, 3, 2]), &FitConfig::new(ModelSpec::sca(1))).unwrap_err();
    assert!(err.to_string().contains("SCA requires L=N"), "{err}");
    assert!(fit_sca_once(&a, &Mask3::full([3, 3, 2]), &cfg, 0).is_err());
    assert!(fit(&a, &Mask3::full([3, 3, 2]), &cfg.clone().with_restarts(0)).is_err());
    assert!(fit(&a, &Mask3::full([3, 3, 2]), &FitConfig::new(ModelSpec::redundant(4))).is_err());
}

#[test]
fn restart_records_and_init_scale() {
    let a = Tensor3::from_fn([4, 4, 3], |i, j, k| ((i + j + k) % 3) as f64).unwrap();
    let mask = Mask3::structural(4, 3, false);
    let cfg = FitConfig::new(ModelSpec::redundant(2)).with_restarts(3).with_seed(1);
    let r = fit(&a, &mask, &cfg).unwrap();
    assert_eq!(r.restart_seeds.len(), 3);
    assert!(r.best_restart < 3);
    assert_eq!(r.seed_used, r.restart_seeds[r.best_restart]);
    assert!(r.init_scale > 0.0);
    let fixed = FitConfig { init_scale: Some(0.25), ..cfg };
    assert_eq!(fit(&a, &mask, &fixed).unwrap().init_scale, 0.25);
}

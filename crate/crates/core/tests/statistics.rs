//! Monte Carlo checks of the tests and of cross-validation on planted data.

use nntuck::modelselect::{choose, cv_score, make_folds, sweep, FoldMode, FoldPlan};
use nntuck::ndarray::Array2;
use nntuck::stats::{lrt_from_fits, split_lrt, standard_lrt, Decision, TestKind, TestSpec};
use nntuck::synth::{binarize, sample_rates, PlantedScenario};
use nntuck::{fit, fit_from, FitConfig, Mask3, ModelSpec, NNTuckModel, RegimeKind, Tensor3};

fn planted(n: usize, l: usize, spec: ModelSpec, within: f64, between: f64, seed: u64) -> (NNTuckModel, Tensor3) {
    let scenario = PlantedScenario::balanced(n, l, spec, within, between, seed).unwrap();
    (scenario.model().unwrap(), scenario.sample().unwrap())
}

fn permute_layers(a: &Tensor3, perm: &[usize]) -> Tensor3 {
    Tensor3::from_fn(a.dims(), |i, j, k| a.get(i, j, perm[k])).unwrap()
}

fn permute_model(m: &NNTuckModel, perm: &[usize]) -> NNTuckModel {
    let y = Array2::from_shape_fn(m.y().dim(), |(r, c)| m.y()[[perm[r], c]]);
    NNTuckModel::new(m.u().clone(), m.v().clone(), y, m.core().clone()).unwrap()
}

#[test]
fn standard_lrt_rejects_planted_layer_structure() {
    let spec = TestSpec::new(ModelSpec::redundant(2), ModelSpec::dependent(2, 2), 0.05, TestKind::StandardLrt);
    let mut rejections = 0;
    for seed in 0..50 {
        let (_, a) = planted(10, 6, ModelSpec::dependent(2, 2), 3.0, 0.2, seed);
        let cfg = FitConfig::new(ModelSpec::redundant(2)).with_restarts(3).with_seed(seed);
        let r = standard_lrt(&a, &Mask3::structural(10, 6, false), &spec, &cfg).unwrap();
        assert_eq!(r.df, Some(2 * 2 + 2 * 6));
        rejections += usize::from(r.decision == Decision::Reject);
    }
    assert!(rejections >= 48, "rejected {rejections} of 50");
}

#[test]
fn fits_from_the_truth_give_a_null_statistic() {
    let truth = PlantedScenario::balanced(8, 5, ModelSpec::redundant(2), 2.0, 0.4, 0).unwrap().model().unwrap();
    let a = truth.reconstruct();
    let mask = Mask3::structural(8, 5, false);
    let g = truth.core();
    let embedded = NNTuckModel::new(
        truth.u().clone(),
        truth.v().clone(),
        Array2::from_elem((5, 2), 0.5),
        Tensor3::from_fn([2, 2, 2], |p, q, _| g.get(p, q, 0)).unwrap(),
    )
    .unwrap();
    let null_fit = fit_from(&a, &mask, &FitConfig::new(ModelSpec::redundant(2)), truth).unwrap();
    let alt_fit = fit_from(&a, &mask, &FitConfig::new(ModelSpec::dependent(2, 2)), embedded).unwrap();
    let spec = TestSpec::new(ModelSpec::redundant(2), ModelSpec::dependent(2, 2), 0.05, TestKind::StandardLrt);
    let r = lrt_from_fits(&spec, null_fit, alt_fit, 8, 5).unwrap();
    assert!(r.statistic < 1e-6, "statistic {}", r.statistic);
    assert_eq!(r.decision, Decision::FailToReject);
}

#[test]
fn lrt_statistic_follows_layer_relabeling() {
    let (_, a) = planted(8, 5, ModelSpec::dependent(2, 2), 3.0, 0.3, 7);
    let mask = Mask3::structural(8, 5, false);
    let perm = [3usize, 1, 4, 0, 2];
    let spec = TestSpec::new(ModelSpec::redundant(2), ModelSpec::dependent(2, 2), 0.05, TestKind::StandardLrt);
    let cfg = FitConfig::new(ModelSpec::redundant(2)).with_restarts(3).with_seed(2);
    let null_fit = fit(&a, &mask, &cfg).unwrap();
    let alt_fit = fit(&a, &mask, &cfg.for_spec(ModelSpec::dependent(2, 2))).unwrap();
    let b = permute_layers(&a, &perm);
    let alt_cfg = cfg.for_spec(ModelSpec::dependent(2, 2));
    let null_a = fit_from(&a, &mask, &cfg, null_fit.model.clone()).unwrap();
    let alt_a = fit_from(&a, &mask, &alt_cfg, alt_fit.model.clone()).unwrap();
    let null_b = fit_from(&b, &mask, &cfg, permute_model(&null_fit.model, &perm)).unwrap();
    let alt_b = fit_from(&b, &mask, &alt_cfg, permute_model(&alt_fit.model, &perm)).unwrap();
    let original = lrt_from_fits(&spec, null_a, alt_a, 8, 5).unwrap();
    let relabeled = lrt_from_fits(&spec, null_b, alt_b, 8, 5).unwrap();
    let tol = 1e-9 * original.statistic.max(1.0);
    assert!((original.statistic - relabeled.statistic).abs() < tol, "{} vs {}", original.statistic, relabeled.statistic);
}

#[test]
fn split_lrt_holds_its_level_under_the_null() {
    let spec = TestSpec::new(ModelSpec::redundant(2), ModelSpec::dependent(2, 2), 0.05, TestKind::SplitLrt);
    let mut rejections = 0;
    for seed in 0..100 {
        let (_, a) = planted(10, 6, ModelSpec::redundant(2), 2.5, 0.3, 1000 + seed);
        let cfg = FitConfig::new(ModelSpec::redundant(2)).with_restarts(2).with_seed(seed);
        let r = split_lrt(&a, &Mask3::structural(10, 6, false), &spec, &cfg, seed).unwrap();
        assert_eq!(r.threshold, Some(20.0));
        rejections += usize::from(r.decision == Decision::Reject);
    }
    assert!(rejections <= 8, "rejected {rejections} of 100");
}

#[test]
fn exact_planted_data_is_predicted_well() {
    let spec = ModelSpec::dependent(2, 2);
    let (truth, _) = planted(12, 6, spec, 1.0, 0.0, 0);
    let a = truth.reconstruct();
    let plan = make_folds(12, 6, 5, 3).unwrap();
    let score = cv_score(&a, &spec, &plan, &FitConfig::new(spec).with_restarts(3).with_seed(1)).unwrap();
    assert!(score.mean_auc.unwrap() >= 0.95, "{:?}", score.mean_auc);
}

#[test]
fn undersized_spec_scores_below_truth() {
    let spec = ModelSpec::dependent(2, 2);
    let (_, counts) = planted(16, 6, spec, 3.0, 0.3, 4);
    let a = binarize(&counts);
    let plan = make_folds(16, 6, 5, 4).unwrap();
    let cfg = FitConfig::new(spec).with_restarts(3).with_seed(4);
    let truth = cv_score(&a, &spec, &plan, &cfg).unwrap().mean_auc.unwrap();
    let small = cv_score(&a, &ModelSpec::dependent(1, 1), &plan, &cfg).unwrap().mean_auc.unwrap();
    assert!(small < truth, "K=C=1 {small} vs truth {truth}");
}

#[test]
fn unstructured_data_scores_near_one_half() {
    let rates = Tensor3::from_fn([30, 30, 4], |_, _, _| 0.4).unwrap();
    let a = binarize(&sample_rates(&rates, 5));
    let plan = make_folds(30, 4, 5, 5).unwrap();
    let spec = ModelSpec::redundant(2);
    let score = cv_score(&a, &spec, &plan, &FitConfig::new(spec).with_restarts(2).with_seed(5)).unwrap();
    let mean = score.mean_auc.unwrap();
    assert!((mean - 0.5).abs() <= 0.05, "mean AUC {mean}");
}

#[test]
fn iid_fold_sizes_fluctuate_binomially() {
    let (n, b) = (20usize, 4usize);
    let tubes = (n * n - n) as f64;
    let (p, expected) = (1.0 / b as f64, tubes / b as f64);
    let sd = (tubes * p * (1.0 - p)).sqrt();
    for seed in 0..30 {
        let plan = FoldPlan::new(n, 2, b, seed, FoldMode::Iid, false).unwrap();
        for f in 0..b {
            let size = plan.test_tube_count(f) as f64;
            assert!((size - expected).abs() <= 4.0 * sd, "seed {seed} fold {f}: {size}");
        }
        assert_eq!(plan, FoldPlan::new(n, 2, b, seed, FoldMode::Iid, false).unwrap());
    }
}

#[test]
fn single_cell_sweep_chooses_it() {
    let (_, a) = planted(8, 4, ModelSpec::redundant(2), 2.0, 0.2, 1);
    let plan = make_folds(8, 4, 3, 1).unwrap();
    let cfg = FitConfig::new(ModelSpec::redundant(1)).with_restarts(1);
    let result = sweep(&a, &[RegimeKind::Redundant], &[2], &[], &plan, &cfg).unwrap();
    assert_eq!(result.grid.len(), 1);
    let chosen = result.chosen.unwrap();
    assert_eq!((chosen.index, chosen.spec), (0, ModelSpec::redundant(2)));
    assert_eq!(choose(&result.grid).unwrap(), choose(&result.grid).unwrap());
}

#[test]
fn sweep_grid_is_lexicographic() {
    let (_, a) = planted(6, 4, ModelSpec::redundant(1), 1.0, 1.0, 2);
    let plan = make_folds(6, 4, 2, 2).unwrap();
    let cfg = FitConfig::new(ModelSpec::redundant(1)).with_restarts(1).with_max_iters(20);
    let regimes = [RegimeKind::Redundant, RegimeKind::Independent, RegimeKind::Dependent];
    let result = sweep(&a, &regimes, &[2, 1], &[3, 1, 2, 9], &plan, &cfg).unwrap();
    let keys: Vec<(String, usize, usize)> = result.grid.iter().map(|c| (c.regime.as_str().to_string(), c.k, c.c)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(keys.len(), 2 * 3 + 2 + 2);
    assert!(result.skipped.iter().any(|s| s.contains("9")));
}

#[test]
fn sweep_recovers_planted_dimensions() {
    let (k_true, c_true) = (2usize, 2usize);
    let mut hits = 0;
    for seed in 0..20 {
        let (_, counts) = planted(14, 6, ModelSpec::dependent(k_true, c_true), 3.0, 0.2, 500 + seed);
        let a = binarize(&counts);
        let plan = make_folds(14, 6, 4, seed).unwrap();
        let cfg = FitConfig::new(ModelSpec::redundant(1)).with_restarts(2).with_seed(seed);
        let result = sweep(&a, &[RegimeKind::Dependent], &[1, 2, 3], &[1, 2, 3], &plan, &cfg).unwrap();
        let chosen = &result.grid[result.chosen.unwrap().index];
        hits += usize::from(chosen.k.abs_diff(k_true) <= 1 && chosen.c.abs_diff(c_true) <= 1);
    }
    assert!(hits >= 16, "{hits} of 20 within one");
}

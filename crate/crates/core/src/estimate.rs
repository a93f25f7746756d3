//! Maximum-likelihood estimation by KL multiplicative updates.
//!
//! Standard regimes run the alternating Kim–Choi updates for `U`, `V`, `Y`
//! and the core, refreshing the reconstruction after every factor so each
//! step is a majorize–minimize step and the masked KL never increases.
//! The SCA regime ties `U = Y` with one of three heuristics and returns the
//! lowest-KL iterate of its trajectory.

use ndarray::{Array2, Zip};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, NNTuckModel, RegimeKind};
use crate::rng::{derive_seed, domain, stream};
use crate::tensor::{check_dims, kl_div_unchecked, poisson_loglik_unchecked, Mask3, Tensor3, RATE_FLOOR};

/// Lower clamp on every multiplicative-update denominator.
pub const DENOMINATOR_FLOOR: f64 = 1e-10;

/// Slack allowed on a per-iteration KL increase before a trajectory is
/// reported as non-monotone.
pub const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaStrategy {
    /// Update `U` then `Y`, then set both to their average.
    #[default]
    AveragedFactors,
    /// Copy `U` into `Y` after the `U` step and `Y` into `U` after the `Y` step.
    Naive,
    /// Multiply the shared factor by the mean of the `U` and `Y` update ratios.
    AveragedUpdates,
}

impl std::str::FromStr for ScaStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "averaged-factors" => Ok(Self::AveragedFactors),
            "naive" => Ok(Self::Naive),
            "averaged-updates" => Ok(Self::AveragedUpdates),
            other => Err(Error::arg(format!(
                "unknown SCA strategy `{other}` (expected averaged-factors, naive or averaged-updates)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub spec: ModelSpec,
    pub rel_tol: f64,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
    pub sca_strategy: ScaStrategy,
    /// Upper end of the uniform initialization. `None` rescales the initial
    /// core so the initial reconstruction has the observed data mean.
    pub init_scale: Option<f64>,
}

impl FitConfig {
    pub fn new(spec: ModelSpec) -> Self {
        Self {
            spec,
            rel_tol: 1e-6,
            max_iters: 2000,
            restarts: if spec.kind() == RegimeKind::Sca { 50 } else { 20 },
            seed: 0,
            sca_strategy: ScaStrategy::default(),
            init_scale: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_sca_strategy(mut self, strategy: ScaStrategy) -> Self {
        self.sca_strategy = strategy;
        self
    }

    /// Same settings, different model.
    pub fn for_spec(&self, spec: ModelSpec) -> Self {
        Self { spec, ..self.clone() }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::arg("rel_tol must be positive"));
        }
        if self.restarts == 0 {
            return Err(Error::arg("restarts must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::arg("max_iters must be at least 1"));
        }
        if let Some(s) = self.init_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::arg("init_scale must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub model: NNTuckModel,
    /// KL after initialization followed by one value per iteration.
    pub kl_trace: Vec<f64>,
    /// Masked KL of the returned model.
    pub final_kl: f64,
    /// Masked Poisson log-likelihood of the returned model.
    pub final_loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seed_used: u64,
    /// Seeds of every restart considered, in restart order.
    pub restart_seeds: Vec<u64>,
    pub best_restart: usize,
    pub monotone: bool,
    /// Multiplier applied to the initial core (or the explicit init scale).
    pub init_scale: f64,
    /// SCA iterations where a shared column collapsed below the rate floor.
    pub flagged_iterations: Vec<usize>,
}

/// One random restart.
pub fn fit_once(a: &Tensor3, mask: &Mask3, cfg: &FitConfig, seed: u64) -> Result<FitResult> {
    let problem = Problem::new(a, mask, &cfg.spec)?;
    cfg.check()?;
    let (init, scale) = problem.initialize(cfg, seed);
    problem.run(cfg, init, seed, scale)
}

/// SCA restart; identical to [`fit_once`] on an SCA spec.
pub fn fit_sca_once(a: &Tensor3, mask: &Mask3, cfg: &FitConfig, seed: u64) -> Result<FitResult> {
    if cfg.spec.kind() != RegimeKind::Sca {
        return Err(Error::arg(format!("fit_sca_once needs an SCA spec, got {}", cfg.spec)));
    }
    fit_once(a, mask, cfg, seed)
}

/// Runs the updates from a caller-supplied starting point.
pub fn fit_from(a: &Tensor3, mask: &Mask3, cfg: &FitConfig, init: NNTuckModel) -> Result<FitResult> {
    let problem = Problem::new(a, mask, &cfg.spec)?;
    cfg.check()?;
    let violations = init.validate(&cfg.spec);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::arg(format!("initial model violates {}: {}", cfg.spec, list.join(", "))));
    }
    if init.n() != problem.n || init.l() != problem.l {
        return Err(Error::arg("initial model does not match the data dims"));
    }
    problem.run(cfg, init, cfg.seed, 1.0)
}

/// Best of `cfg.restarts` restarts by masked training log-likelihood.
///
/// Restart `r` uses seed `derive_seed(cfg.seed, r)`; ties go to the lowest
/// restart index. Errors surface only when every restart fails.
pub fn fit(a: &Tensor3, mask: &Mask3, cfg: &FitConfig) -> Result<FitResult> {
    cfg.check()?;
    let seeds: Vec<u64> = (0..cfg.restarts as u64)
        .map(|r| derive_seed(cfg.seed, domain::RESTART + r))
        .collect();
    let runs: Vec<Result<FitResult>> = seeds.par_iter().map(|&s| fit_once(a, mask, cfg, s)).collect();
    let mut best: Option<(usize, FitResult)> = None;
    let mut first_err = None;
    for (idx, run) in runs.into_iter().enumerate() {
        match run {
            Ok(r) => {
                let better = match &best {
                    None => true,
                    Some((_, b)) => r.final_loglik > b.final_loglik,
                };
                if better {
                    best = Some((idx, r));
                }
            }
            Err(e) => {
                log::warn!("restart {idx} failed: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some((idx, mut r)) => {
            r.restart_seeds = seeds;
            r.best_restart = idx;
            Ok(r)
        }
        None => Err(first_err.expect("at least one restart ran")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LayerFactor {
    Identity,
    Ones,
    Free,
}

struct Problem<'a> {
    a: &'a Tensor3,
    mask: &'a Mask3,
    mask_t: Tensor3,
    spec: ModelSpec,
    n: usize,
    l: usize,
    layer: LayerFactor,
}

impl<'a> Problem<'a> {
    fn new(a: &'a Tensor3, mask: &'a Mask3, spec: &ModelSpec) -> Result<Self> {
        let [n, n2, l] = a.dims();
        if n != n2 {
            return Err(Error::arg(format!("network tensor must be N × N × L, got {:?}", a.dims())));
        }
        check_dims(a.dims(), mask.dims())?;
        spec.check(n, l)?;
        if mask.observed_count() == 0 {
            return Err(Error::Estimation("every cell is masked; nothing to fit".into()));
        }
        let layer = match spec.kind() {
            RegimeKind::Independent => LayerFactor::Identity,
            RegimeKind::Redundant => LayerFactor::Ones,
            RegimeKind::Dependent | RegimeKind::Sca => LayerFactor::Free,
        };
        Ok(Self {
            a,
            mask,
            mask_t: mask.to_tensor(),
            spec: *spec,
            n,
            l,
            layer,
        })
    }

    fn initialize(&self, cfg: &FitConfig, seed: u64) -> (NNTuckModel, f64) {
        let (n, l, k) = (self.n, self.l, self.spec.k());
        let c = self.spec.c(l);
        let mut rng = stream(seed, 0);
        let explicit = cfg.init_scale.unwrap_or(1.0);
        // uniform on (0, s]
        let mut draw = |rows: usize, cols: usize| {
            Array2::from_shape_simple_fn((rows, cols), || explicit * (1.0 - rng.random::<f64>()))
        };
        let mut u = draw(n, k);
        let mut v = draw(n, k);
        let mut y = draw(l, c);
        let core_draw = draw(k, k * c);
        let mut g = Tensor3::from_raw([k, k, c], core_draw.into_iter().collect());

        if self.spec.symmetric() {
            v = u.clone();
            g = symmetric_square_slices(&g);
        }
        match self.spec.kind() {
            RegimeKind::Independent => y = Array2::eye(l),
            RegimeKind::Redundant => y = Array2::ones((l, 1)),
            RegimeKind::Sca => u = y.clone(),
            RegimeKind::Dependent => {}
        }
        let mut model = NNTuckModel { u, v, y, g };
        let mut scale = explicit;
        if cfg.init_scale.is_none() {
            let ahat = self.reconstruct(&model);
            let (mut data, mut fitted) = (0.0, 0.0);
            for ((&x, &r), &m) in self.a.values().iter().zip(ahat.values()).zip(self.mask.bits()) {
                if m {
                    data += x;
                    fitted += r;
                }
            }
            if data > 0.0 && fitted > 0.0 {
                scale = data / fitted;
                model.g.values_mut().iter_mut().for_each(|x| *x *= scale);
            }
        }
        (model, scale)
    }

    fn reconstruct(&self, m: &NNTuckModel) -> Tensor3 {
        let partial = m.g.mode_product_view(m.u.view(), 1).mode_product_view(m.v.view(), 2);
        match self.layer {
            LayerFactor::Identity => partial,
            _ => partial.mode_product_view(m.y.view(), 3),
        }
    }

    fn kl(&self, ahat: &Tensor3) -> f64 {
        kl_div_unchecked(self.a.values(), ahat.values(), self.mask.bits())
    }

    /// `M ∘ A / Â` with masked cells exactly zero.
    fn ratio(&self, ahat: &Tensor3) -> Tensor3 {
        let values = self
            .a
            .values()
            .iter()
            .zip(ahat.values())
            .zip(self.mask.bits())
            .map(|((&x, &r), &m)| if m && x > 0.0 { x / r.max(RATE_FLOOR) } else { 0.0 })
            .collect();
        Tensor3::from_raw(ahat.dims(), values)
    }

    /// Numerator and denominator of the mode-1 (sender) update.
    fn sender_terms(&self, m: &NNTuckModel, r: &Tensor3) -> (Array2<f64>, Array2<f64>) {
        let b = m.g.mode_product_view(m.v.view(), 2);
        let b = match self.layer {
            LayerFactor::Identity => b,
            _ => b.mode_product_view(m.y.view(), 3),
        };
        (r.mode_gram(&b, 1), self.mask_t.mode_gram(&b, 1))
    }

    /// Numerator and denominator of the mode-2 (receiver) update.
    fn receiver_terms(&self, m: &NNTuckModel, r: &Tensor3) -> (Array2<f64>, Array2<f64>) {
        let b = m.g.mode_product_view(m.u.view(), 1);
        let b = match self.layer {
            LayerFactor::Identity => b,
            _ => b.mode_product_view(m.y.view(), 3),
        };
        (r.mode_gram(&b, 2), self.mask_t.mode_gram(&b, 2))
    }

    /// Numerator and denominator of the mode-3 (layer) update.
    fn layer_terms(&self, m: &NNTuckModel, r: &Tensor3) -> (Array2<f64>, Array2<f64>) {
        let b = m.g.mode_product_view(m.u.view(), 1).mode_product_view(m.v.view(), 2);
        (r.mode_gram(&b, 3), self.mask_t.mode_gram(&b, 3))
    }

    /// Numerator and denominator of the core update, `X ×₁ Uᵀ ×₂ Vᵀ ×₃ Yᵀ`.
    fn core_terms(&self, m: &NNTuckModel, r: &Tensor3) -> (Tensor3, Tensor3) {
        let project = |x: &Tensor3| {
            let x = match self.layer {
                LayerFactor::Identity => x.clone(),
                _ => x.mode_product_view(m.y.t(), 3),
            };
            x.mode_product_view(m.u.t(), 1).mode_product_view(m.v.t(), 2)
        };
        (project(r), project(&self.mask_t))
    }

    fn update_core(&self, m: &mut NNTuckModel, r: &Tensor3) {
        let (num, den) = self.core_terms(m, r);
        let k = m.k();
        let c = m.c();
        let ratio = |idx: usize| num.values()[idx] / den.values()[idx].max(DENOMINATOR_FLOOR);
        let mut updated = m.g.values().to_vec();
        if self.spec.symmetric() {
            // tied entries (k1, k2) and (k2, k1) share one update
            for a in 0..k {
                for b in 0..k {
                    for s in 0..c {
                        let ab = (a * k + b) * c + s;
                        let ba = (b * k + a) * c + s;
                        let (lo, hi) = if a <= b { (ab, ba) } else { (ba, ab) };
                        let tied_num = num.values()[lo] + num.values()[hi];
                        let tied_den = (den.values()[lo] + den.values()[hi]).max(DENOMINATOR_FLOOR);
                        updated[ab] = m.g.values()[lo] * (tied_num / tied_den);
                    }
                }
            }
        } else {
            for (idx, g) in updated.iter_mut().enumerate() {
                *g *= ratio(idx);
            }
        }
        m.g = Tensor3::from_raw(m.g.dims(), updated);
    }

    fn run(&self, cfg: &FitConfig, init: NNTuckModel, seed: u64, scale: f64) -> Result<FitResult> {
        if self.spec.kind() == RegimeKind::Sca {
            return self.run_sca(cfg, init, seed, scale);
        }
        let mut model = init;
        let mut ahat = self.reconstruct(&model);
        let mut trace = vec![self.kl(&ahat)];
        let mut converged = false;
        let mut iterations = 0;
        for it in 1..=cfg.max_iters {
            // sender memberships (tied with receivers when symmetric)
            let r = self.ratio(&ahat);
            let (mut num, mut den) = self.sender_terms(&model, &r);
            if self.spec.symmetric() {
                let (num_v, den_v) = self.receiver_terms(&model, &r);
                num += &num_v;
                den += &den_v;
            }
            apply_ratio(&mut model.u, &num, &den);
            if self.spec.symmetric() {
                model.v = model.u.clone();
            }
            ahat = self.reconstruct(&model);

            if !self.spec.symmetric() {
                let r = self.ratio(&ahat);
                let (num, den) = self.receiver_terms(&model, &r);
                apply_ratio(&mut model.v, &num, &den);
                ahat = self.reconstruct(&model);
            }

            if self.layer == LayerFactor::Free {
                let r = self.ratio(&ahat);
                let (num, den) = self.layer_terms(&model, &r);
                apply_ratio(&mut model.y, &num, &den);
                ahat = self.reconstruct(&model);
            }

            let r = self.ratio(&ahat);
            self.update_core(&mut model, &r);
            ahat = self.reconstruct(&model);

            let kl = self.kl(&ahat);
            check_finite(&model, kl, it)?;
            let prev = *trace.last().unwrap();
            trace.push(kl);
            iterations = it;
            if relative_change(prev, kl) < cfg.rel_tol {
                converged = true;
                break;
            }
        }
        let monotone = is_monotone(&trace);
        Ok(self.finish(model, &ahat, trace, iterations, converged, seed, scale, monotone, Vec::new()))
    }

    fn run_sca(&self, cfg: &FitConfig, init: NNTuckModel, seed: u64, scale: f64) -> Result<FitResult> {
        let mut model = init;
        let mut ahat = self.reconstruct(&model);
        let mut trace = vec![self.kl(&ahat)];
        let mut best = (trace[0], model.clone(), ahat.clone());
        let mut flagged = Vec::new();
        let mut converged = false;
        let mut iterations = 0;
        for it in 1..=cfg.max_iters {
            let r = self.ratio(&ahat);
            let (num, den) = self.receiver_terms(&model, &r);
            apply_ratio(&mut model.v, &num, &den);
            ahat = self.reconstruct(&model);

            match cfg.sca_strategy {
                ScaStrategy::AveragedFactors => {
                    let r = self.ratio(&ahat);
                    let (num, den) = self.sender_terms(&model, &r);
                    apply_ratio(&mut model.u, &num, &den);
                    ahat = self.reconstruct(&model);
                    let r = self.ratio(&ahat);
                    let (num, den) = self.layer_terms(&model, &r);
                    apply_ratio(&mut model.y, &num, &den);
                    let shared = (&model.u + &model.y) * 0.5;
                    model.u = shared.clone();
                    model.y = shared;
                }
                ScaStrategy::Naive => {
                    let r = self.ratio(&ahat);
                    let (num, den) = self.sender_terms(&model, &r);
                    apply_ratio(&mut model.u, &num, &den);
                    model.y = model.u.clone();
                    ahat = self.reconstruct(&model);
                    let r = self.ratio(&ahat);
                    let (num, den) = self.layer_terms(&model, &r);
                    apply_ratio(&mut model.y, &num, &den);
                    model.u = model.y.clone();
                }
                ScaStrategy::AveragedUpdates => {
                    let r = self.ratio(&ahat);
                    let (num_u, den_u) = self.sender_terms(&model, &r);
                    let (num_y, den_y) = self.layer_terms(&model, &r);
                    let mut shared = model.u.clone();
                    Zip::from(&mut shared)
                        .and(&num_u)
                        .and(&den_u)
                        .and(&num_y)
                        .and(&den_y)
                        .for_each(|x, &nu, &du, &ny, &dy| {
                            let avg = 0.5 * (nu / du.max(DENOMINATOR_FLOOR) + ny / dy.max(DENOMINATOR_FLOOR));
                            *x *= avg;
                        });
                    model.u = shared.clone();
                    model.y = shared;
                }
            }
            if has_collapsed_column(&model.u) {
                flagged.push(it);
            }
            ahat = self.reconstruct(&model);

            let r = self.ratio(&ahat);
            self.update_core(&mut model, &r);
            ahat = self.reconstruct(&model);

            let kl = self.kl(&ahat);
            check_finite(&model, kl, it)?;
            let prev = *trace.last().unwrap();
            trace.push(kl);
            iterations = it;
            if kl < best.0 {
                best = (kl, model.clone(), ahat.clone());
            }
            if relative_change(prev, kl) < cfg.rel_tol {
                converged = true;
                break;
            }
        }
        let monotone = is_monotone(&trace);
        let (_, model, ahat) = best;
        Ok(self.finish(model, &ahat, trace, iterations, converged, seed, scale, monotone, flagged))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        model: NNTuckModel,
        ahat: &Tensor3,
        kl_trace: Vec<f64>,
        iterations: usize,
        converged: bool,
        seed: u64,
        init_scale: f64,
        monotone: bool,
        flagged_iterations: Vec<usize>,
    ) -> FitResult {
        FitResult {
            spec: self.spec,
            final_kl: self.kl(ahat),
            final_loglik: poisson_loglik_unchecked(self.a.values(), ahat.values(), self.mask.bits()),
            model,
            kl_trace,
            iterations,
            converged,
            seed_used: seed,
            restart_seeds: vec![seed],
            best_restart: 0,
            monotone,
            init_scale,
            flagged_iterations,
        }
    }
}

fn apply_ratio(factor: &mut Array2<f64>, num: &Array2<f64>, den: &Array2<f64>) {
    Zip::from(factor).and(num).and(den).for_each(|x, &nu, &de| {
        *x *= nu / de.max(DENOMINATOR_FLOOR);
    });
}

/// `Gₛ ← Gₛᵀ Gₛ` for every frontal slice.
fn symmetric_square_slices(g: &Tensor3) -> Tensor3 {
    let [k, _, c] = g.dims();
    let mut out = vec![0.0; k * k * c];
    for s in 0..c {
        for a in 0..k {
            for b in 0..k {
                let mut acc = 0.0;
                for r in 0..k {
                    acc += g.get(r, a, s) * g.get(r, b, s);
                }
                out[(a * k + b) * c + s] = acc;
            }
        }
    }
    Tensor3::from_raw([k, k, c], out)
}

fn has_collapsed_column(m: &Array2<f64>) -> bool {
    m.columns().into_iter().any(|col| col.iter().all(|&x| x < RATE_FLOOR))
}

fn relative_change(prev: f64, current: f64) -> f64 {
    if current <= 0.0 {
        return 0.0;
    }
    (prev - current).abs() / current
}

pub(crate) fn is_monotone(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] - w[0] <= MONOTONE_SLACK)
}

fn check_finite(m: &NNTuckModel, kl: f64, iteration: usize) -> Result<()> {
    let bad = |x: &Array2<f64>| x.iter().any(|v| !v.is_finite());
    if kl.is_nan() || bad(&m.u) || bad(&m.v) || bad(&m.y) || m.g.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            iteration,
            detail: "non-finite value in factors or KL".into(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn config_checks() {
        let cfg = FitConfig::new(ModelSpec::redundant(1));
        assert!(cfg.check().is_ok());
        assert!(cfg.clone().with_rel_tol(0.0).check().is_err());
        assert!(cfg.clone().with_rel_tol(f64::NAN).check().is_err());
        assert!(cfg.clone().with_restarts(0).check().is_err());
        assert!(cfg.clone().with_max_iters(0).check().is_err());
        assert!(FitConfig { init_scale: Some(-1.0), ..cfg.clone() }.check().is_err());
        assert!(FitConfig { init_scale: Some(f64::INFINITY), ..cfg }.check().is_err());
    }

    #[test]
    fn ratio_update_floors_the_denominator() {
        let mut f = array![[1.0, 2.0], [3.0, 4.0]];
        apply_ratio(&mut f, &array![[2.0, 1.0], [0.0, 1e-12]], &array![[1.0, 2.0], [1.0, 0.0]]);
        assert_eq!(f, array![[2.0, 1.0], [0.0, 4.0 * 1e-12 / DENOMINATOR_FLOOR]]);
    }

    #[test]
    fn squared_slices_are_symmetric() {
        let g = Tensor3::from_fn([3, 3, 2], |a, b, s| (a * 5 + b * 2 + s) as f64 + 0.5).unwrap();
        let sym = symmetric_square_slices(&g);
        for s in 0..2 {
            for a in 0..3 {
                for b in 0..3 {
                    assert_eq!(sym.get(a, b, s), sym.get(b, a, s));
                    assert!(sym.get(a, b, s) > 0.0);
                }
            }
        }
    }

    #[test]
    fn collapse_and_monotonicity_helpers() {
        assert!(has_collapsed_column(&array![[1.0, 0.0], [2.0, 1e-12]]));
        assert!(!has_collapsed_column(&array![[1.0, 0.0], [2.0, 1e-3]]));
        assert!(is_monotone(&[3.0, 2.0, 2.0 + 0.5 * MONOTONE_SLACK, 1.0]));
        assert!(!is_monotone(&[3.0, 2.0, 2.1]));
        assert_eq!(relative_change(2.0, 1.0), 1.0);
        assert_eq!(relative_change(1.0, 0.0), 0.0);
    }

    #[test]
    fn non_finite_factors_are_numerical_errors() {
        let m = NNTuckModel {
            u: array![[f64::NAN]],
            v: array![[1.0]],
            y: array![[1.0]],
            g: Tensor3::from_raw([1, 1, 1], vec![1.0]),
        };
        assert!(matches!(check_finite(&m, 0.0, 4), Err(Error::Numerical { iteration: 4, .. })));
    }
}

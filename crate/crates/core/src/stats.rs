//! Likelihood-ratio tests between nested regimes.
//!
//! The standard test compares twice the log-likelihood gap against a
//! chi-squared tail with the parameter-count difference as degrees of
//! freedom. The split test (universal inference) fits the alternative on one
//! half of the observed cells, the null on the other, and rejects when the
//! held-out likelihood ratio exceeds `1/α`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{fit, FitConfig, FitResult};
use crate::model::{param_count, ModelSpec, RegimeKind};
use crate::rng::{derive_seed, domain, stream};
use crate::special::gamma_q;
use crate::tensor::{poisson_loglik, Mask3, Tensor3};

/// Attempts at drawing a split in which every layer keeps observed cells on
/// both sides.
pub const SPLIT_ATTEMPTS: u64 = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    #[default]
    StandardLrt,
    SplitLrt,
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard-lrt" => Ok(Self::StandardLrt),
            "split-lrt" => Ok(Self::SplitLrt),
            other => Err(Error::arg(format!("unknown test kind `{other}` (expected standard-lrt or split-lrt)"))),
        }
    }
}

/// How observed cells are divided between the two halves of a split test.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitGranularity {
    /// Each observed cell independently.
    #[default]
    Entry,
    /// Each dyad `(i, j)` with all of its layers.
    Tube,
}

impl FromStr for SplitGranularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entry" => Ok(Self::Entry),
            "tube" => Ok(Self::Tube),
            other => Err(Error::arg(format!("unknown split granularity `{other}` (expected entry or tube)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    pub null_spec: ModelSpec,
    pub alt_spec: ModelSpec,
    pub alpha: f64,
    pub kind: TestKind,
    /// Probability that an observed cell (or tube) lands in the fitting half.
    pub split_fraction: f64,
    pub split_granularity: SplitGranularity,
}

impl TestSpec {
    pub fn new(null_spec: ModelSpec, alt_spec: ModelSpec, alpha: f64, kind: TestKind) -> Self {
        Self {
            null_spec,
            alt_spec,
            alpha,
            kind,
            split_fraction: 0.5,
            split_granularity: SplitGranularity::Entry,
        }
    }

    pub fn with_split(mut self, fraction: f64, granularity: SplitGranularity) -> Self {
        self.split_fraction = fraction;
        self.split_granularity = granularity;
        self
    }

    pub fn check(&self, n: usize, l: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::arg(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::arg(format!(
                "split_fraction must lie in (0, 1), got {}",
                self.split_fraction
            )));
        }
        df_between(&self.null_spec, &self.alt_spec, n, l).map(|_| ())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Reject,
    FailToReject,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Reject => "reject H0",
            Decision::FailToReject => "fail to reject H0",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub kind: TestKind,
    pub null_spec: ModelSpec,
    pub alt_spec: ModelSpec,
    pub alpha: f64,
    /// `2 (ℓ_alt − ℓ_null)` for the standard test; the held-out log
    /// likelihood ratio for the split test.
    pub statistic: f64,
    pub df: Option<usize>,
    pub p_value: Option<f64>,
    /// `1/α` on the likelihood-ratio scale (split test only).
    pub threshold: Option<f64>,
    pub decision: Decision,
    /// The raw standard statistic was negative and has been set to 0.
    pub floored: bool,
    pub null_config: FitConfig,
    pub alt_config: FitConfig,
    pub null_fit: FitResult,
    pub alt_fit: FitResult,
    pub seed: u64,
    /// Seed of the accepted split and the number of rejected draws before it.
    pub split_seed: Option<u64>,
    pub split_redraws: u64,
    pub warnings: Vec<String>,
}

impl TestResult {
    /// One line in the style `redundant:3 vs dependent:3:2  stat ...  reject H0`.
    pub fn summary_line(&self) -> String {
        let detail = match self.kind {
            TestKind::StandardLrt => format!(
                "LRT = {:.4}, df = {}, p = {:.4e}",
                self.statistic,
                self.df.unwrap_or(0),
                self.p_value.unwrap_or(f64::NAN)
            ),
            TestKind::SplitLrt => format!(
                "log ratio = {:.4}, threshold 1/alpha = {}",
                self.statistic,
                self.threshold.unwrap_or(f64::NAN)
            ),
        };
        format!(
            "{} vs {} (alpha = {}): {} -> {}",
            self.null_spec, self.alt_spec, self.alpha, detail, self.decision
        )
    }
}

/// Degrees of freedom `param_count(alt) − param_count(null)`.
///
/// The null is nested in the alternative when it has no more node or layer
/// communities, its layer factor is at least as constrained, it is
/// symmetric whenever the alternative is, and it has strictly fewer
/// parameters.
pub fn df_between(null: &ModelSpec, alt: &ModelSpec, n: usize, l: usize) -> Result<usize> {
    null.check(n, l)?;
    alt.check(n, l)?;
    let reject = |why: &str| Err(Error::arg(format!("{null} is not nested in {alt}: {why}")));
    use RegimeKind::*;
    let regimes_nest = match (null.kind(), alt.kind()) {
        (a, b) if a == b => true,
        (Redundant, Dependent | Independent) => true,
        (Dependent, Independent) => true,
        (Sca, Dependent | Independent) => true,
        _ => false,
    };
    if !regimes_nest {
        return reject("layer factor regimes do not nest");
    }
    if alt.symmetric() && !null.symmetric() {
        return reject("a directed null cannot nest in a symmetric alternative");
    }
    if null.k() > alt.k() {
        return reject("the null has more node communities");
    }
    if null.c(l) > alt.c(l) {
        return reject("the null has more layer communities");
    }
    let (p0, p1) = (param_count(null, n, l), param_count(alt, n, l));
    if p0 >= p1 {
        return reject(&format!("parameter counts {p0} vs {p1} are not increasing"));
    }
    Ok(p1 - p0)
}

/// `(L − C) K² − L C`: dependent `C` against independent, same `K`.
pub fn df_independence(l: usize, k: usize, c: usize) -> i64 {
    let (l, k, c) = (l as i64, k as i64, c as i64);
    (l - c) * k * k - l * c
}

/// `K² + 2L`: redundant against dependent with `C = 2`, same `K`.
pub fn df_redundance(l: usize, k: usize) -> i64 {
    let (l, k) = (l as i64, k as i64);
    k * k + 2 * l
}

/// `2N(K' − K) + K'² C' + C' N − K³`: SCA with `K` against dependent `(K', C')`.
pub fn df_agreement(n: usize, k: usize, k_alt: usize, c_alt: usize) -> i64 {
    let (n, k, ka, ca) = (n as i64, k as i64, k_alt as i64, c_alt as i64);
    2 * n * (ka - k) + ka * ka * ca + ca * n - k * k * k
}

/// Chi-squared survival function `P(X > x)` for `df` degrees of freedom.
pub fn chi2_sf(x: f64, df: usize) -> f64 {
    assert!(df > 0, "chi2_sf needs df > 0");
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(df as f64 / 2.0, x / 2.0)
}

fn no_optimality_warning(spec: &TestSpec) -> Option<String> {
    (spec.null_spec.kind() == RegimeKind::Sca).then(|| {
        "SCA fits are heuristic: no optimality guarantee, interpret the decision with caution".to_string()
    })
}

fn sub_configs(spec: &TestSpec, cfg: &FitConfig) -> (FitConfig, FitConfig) {
    let mut null_cfg = cfg.for_spec(spec.null_spec);
    let mut alt_cfg = cfg.for_spec(spec.alt_spec);
    null_cfg.seed = derive_seed(cfg.seed, domain::NULL_FIT);
    alt_cfg.seed = derive_seed(cfg.seed, domain::ALT_FIT);
    (null_cfg, alt_cfg)
}

/// Standard LRT on the observed cells of `mask`.
///
/// Both models are fitted with `cfg`'s settings; their seeds are derived from
/// `cfg.seed`.
pub fn standard_lrt(a: &Tensor3, mask: &Mask3, spec: &TestSpec, cfg: &FitConfig) -> Result<TestResult> {
    let [n, _, l] = a.dims();
    spec.check(n, l)?;
    let (null_cfg, alt_cfg) = sub_configs(spec, cfg);
    let null_fit = fit(a, mask, &null_cfg)?;
    let alt_fit = fit(a, mask, &alt_cfg)?;
    let mut result = lrt_from_fits(spec, null_fit, alt_fit, n, l)?;
    result.null_config = null_cfg;
    result.alt_config = alt_cfg;
    result.seed = cfg.seed;
    Ok(result)
}

/// Standard LRT from two existing fits on the same data and mask.
pub fn lrt_from_fits(spec: &TestSpec, null_fit: FitResult, alt_fit: FitResult, n: usize, l: usize) -> Result<TestResult> {
    spec.check(n, l)?;
    if null_fit.spec != spec.null_spec || alt_fit.spec != spec.alt_spec {
        return Err(Error::arg("fits do not match the specs of the test"));
    }
    let df = df_between(&spec.null_spec, &spec.alt_spec, n, l)?;
    let raw = 2.0 * (alt_fit.final_loglik - null_fit.final_loglik);
    let floored = raw < 0.0;
    let mut warnings = Vec::new();
    if floored {
        log::warn!("LRT statistic {raw:.6} floored at 0: the alternative fit is below the null fit");
        warnings.push(format!(
            "statistic {raw} floored at 0; the alternative optimum was not reached"
        ));
    }
    warnings.extend(no_optimality_warning(spec));
    let statistic = raw.max(0.0);
    let p = chi2_sf(statistic, df);
    Ok(TestResult {
        kind: TestKind::StandardLrt,
        null_spec: spec.null_spec,
        alt_spec: spec.alt_spec,
        alpha: spec.alpha,
        statistic,
        df: Some(df),
        p_value: Some(p),
        threshold: None,
        decision: if p < spec.alpha { Decision::Reject } else { Decision::FailToReject },
        floored,
        null_config: FitConfig::new(spec.null_spec).with_seed(null_fit.seed_used),
        alt_config: FitConfig::new(spec.alt_spec).with_seed(alt_fit.seed_used),
        null_fit,
        alt_fit,
        seed: 0,
        split_seed: None,
        split_redraws: 0,
        warnings,
    })
}

/// Divides the observed cells of `mask` into a fitting half `D0` and an
/// evaluation half `D1`. Returns `None` when some layer that has observed
/// cells ends up with none on one side.
pub fn draw_split(
    mask: &Mask3,
    fraction: f64,
    granularity: SplitGranularity,
    seed: u64,
) -> Option<(Mask3, Mask3)> {
    let [n, m, l] = mask.dims();
    let mut rng = stream(seed, 0);
    let in_d0: Vec<bool> = match granularity {
        SplitGranularity::Entry => (0..n * m * l).map(|_| rng.random::<f64>() < fraction).collect(),
        SplitGranularity::Tube => {
            let tubes: Vec<bool> = (0..n * m).map(|_| rng.random::<f64>() < fraction).collect();
            (0..n * m * l).map(|idx| tubes[idx / l]).collect()
        }
    };
    let d0 = Mask3::from_fn([n, m, l], |i, j, k| {
        let idx = (i * m + j) * l + k;
        mask.bits()[idx] && in_d0[idx]
    });
    let d1 = Mask3::from_fn([n, m, l], |i, j, k| {
        let idx = (i * m + j) * l + k;
        mask.bits()[idx] && !in_d0[idx]
    });
    let layer_counts = |mk: &Mask3| {
        let mut counts = vec![0usize; l];
        for (idx, &b) in mk.bits().iter().enumerate() {
            if b {
                counts[idx % l] += 1;
            }
        }
        counts
    };
    let (c, c0, c1) = (layer_counts(mask), layer_counts(&d0), layer_counts(&d1));
    let ok = (0..l).all(|k| c[k] == 0 || (c0[k] > 0 && c1[k] > 0));
    ok.then_some((d0, d1))
}

/// Split likelihood-ratio test.
///
/// The alternative is fitted on `D0`, the null on `D1`, and the statistic is
/// `ℓ_{D1}(θ̂_alt) − ℓ_{D1}(θ̂_null)`; the test rejects when it exceeds
/// `ln(1/α)`. The split is drawn from `seed`, fits use `cfg.seed`.
pub fn split_lrt(a: &Tensor3, mask: &Mask3, spec: &TestSpec, cfg: &FitConfig, seed: u64) -> Result<TestResult> {
    let [n, _, l] = a.dims();
    spec.check(n, l)?;
    if mask.dims() != a.dims() {
        return Err(Error::arg("mask dims differ from the data dims"));
    }
    let mut drawn = None;
    for attempt in 0..SPLIT_ATTEMPTS {
        let split_seed = derive_seed(seed, domain::SPLIT + attempt);
        if let Some(halves) = draw_split(mask, spec.split_fraction, spec.split_granularity, split_seed) {
            drawn = Some((attempt, split_seed, halves));
            break;
        }
        log::debug!("split attempt {attempt} left a layer empty; redrawing");
    }
    let (redraws, split_seed, (d0, d1)) = drawn.ok_or_else(|| {
        Error::Estimation(format!(
            "no split in {SPLIT_ATTEMPTS} draws kept observed cells of every layer on both sides"
        ))
    })?;
    let (null_cfg, alt_cfg) = sub_configs(spec, cfg);
    let alt_fit = fit(a, &d0, &alt_cfg)?;
    let null_fit = fit(a, &d1, &null_cfg)?;
    let ll_alt = poisson_loglik(a, &alt_fit.model.reconstruct(), &d1)?;
    let ll_null = poisson_loglik(a, &null_fit.model.reconstruct(), &d1)?;
    let statistic = ll_alt - ll_null;
    let threshold = 1.0 / spec.alpha;
    let mut warnings: Vec<String> = no_optimality_warning(spec).into_iter().collect();
    if redraws > 0 {
        warnings.push(format!("split redrawn {redraws} time(s) to keep every layer on both sides"));
    }
    Ok(TestResult {
        kind: TestKind::SplitLrt,
        null_spec: spec.null_spec,
        alt_spec: spec.alt_spec,
        alpha: spec.alpha,
        statistic,
        df: None,
        p_value: None,
        threshold: Some(threshold),
        decision: split_decision(statistic, spec.alpha),
        floored: false,
        null_config: null_cfg,
        alt_config: alt_cfg,
        null_fit,
        alt_fit,
        seed,
        split_seed: Some(split_seed),
        split_redraws: redraws,
        warnings,
    })
}

/// Rejects when the log likelihood ratio exceeds `ln(1/α)`.
pub fn split_decision(log_ratio: f64, alpha: f64) -> Decision {
    if log_ratio > (1.0 / alpha).ln() {
        Decision::Reject
    } else {
        Decision::FailToReject
    }
}

/// Runs the test kind named in `spec`.
pub fn run_test(a: &Tensor3, mask: &Mask3, spec: &TestSpec, cfg: &FitConfig) -> Result<TestResult> {
    match spec.kind {
        TestKind::StandardLrt => standard_lrt(a, mask, spec, cfg),
        TestKind::SplitLrt => split_lrt(a, mask, spec, cfg, cfg.seed),
    }
}

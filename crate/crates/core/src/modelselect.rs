//! Tubular cross-validation and the rank/regime sweep.
//!
//! A fold holds out whole dyads: if `(i, j)` is a test tube, every layer's
//! copy of it is hidden from training. Held-out cells are scored by the
//! fitted rates and summarised by AUC against the labels `a > 0`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{fit, FitConfig};
use crate::model::{param_count, ModelSpec, RegimeKind};
use crate::rng::{derive_seed, domain, stream};
use crate::tensor::{Mask3, Tensor3};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FoldMode {
    /// Shuffle the tubes and deal them round-robin into `b` folds.
    #[default]
    Balanced,
    /// Each tube picks its fold uniformly and independently.
    Iid,
}

impl FromStr for FoldMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(Self::Balanced),
            "iid" => Ok(Self::Iid),
            other => Err(Error::arg(format!("unknown fold mode `{other}` (expected balanced or iid)"))),
        }
    }
}

/// Assignment of every eligible tube `(i, j)` to one test fold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n: usize,
    pub l: usize,
    pub b: usize,
    pub seed: u64,
    pub mode: FoldMode,
    pub include_self_ties: bool,
    /// Row-major `n × n`; `None` for excluded diagonal tubes.
    pub tube_fold: Vec<Option<usize>>,
}

/// Balanced `b`-fold plan over the off-diagonal tubes.
pub fn make_folds(n: usize, l: usize, b: usize, seed: u64) -> Result<FoldPlan> {
    FoldPlan::new(n, l, b, seed, FoldMode::Balanced, false)
}

impl FoldPlan {
    pub fn new(n: usize, l: usize, b: usize, seed: u64, mode: FoldMode, include_self_ties: bool) -> Result<Self> {
        if b < 2 {
            return Err(Error::arg(format!("need at least 2 folds, got {b}")));
        }
        if n < 2 || l == 0 {
            return Err(Error::arg("cross-validation needs N >= 2 and L >= 1"));
        }
        let eligible: Vec<usize> = (0..n * n)
            .filter(|&t| include_self_ties || t / n != t % n)
            .collect();
        if b > eligible.len() {
            return Err(Error::arg(format!("{b} folds exceed the {} available tubes", eligible.len())));
        }
        let mut rng = stream(derive_seed(seed, domain::FOLDS), 0);
        let mut tube_fold = vec![None; n * n];
        match mode {
            FoldMode::Balanced => {
                let mut order = eligible;
                order.shuffle(&mut rng);
                for (pos, t) in order.into_iter().enumerate() {
                    tube_fold[t] = Some(pos % b);
                }
            }
            FoldMode::Iid => {
                for t in eligible {
                    tube_fold[t] = Some(rng.random_range(0..b));
                }
            }
        }
        Ok(Self {
            n,
            l,
            b,
            seed,
            mode,
            include_self_ties,
            tube_fold,
        })
    }

    pub fn fold_of(&self, i: usize, j: usize) -> Option<usize> {
        self.tube_fold[i * self.n + j]
    }

    /// Training mask of fold `f`: every eligible tube outside fold `f`.
    pub fn train_mask(&self, f: usize) -> Mask3 {
        Mask3::from_fn([self.n, self.n, self.l], |i, j, _| {
            matches!(self.fold_of(i, j), Some(g) if g != f)
        })
    }

    /// Held-out mask of fold `f`.
    pub fn test_mask(&self, f: usize) -> Mask3 {
        Mask3::from_fn([self.n, self.n, self.l], |i, j, _| self.fold_of(i, j) == Some(f))
    }

    /// Training masks of all folds, in fold order.
    pub fn masks(&self) -> Vec<Mask3> {
        (0..self.b).map(|f| self.train_mask(f)).collect()
    }

    pub fn test_tube_count(&self, f: usize) -> usize {
        self.tube_fold.iter().filter(|&&g| g == Some(f)).count()
    }
}

/// Area under the ROC curve with ties counted as one half.
///
/// `None` when the labels contain only one class.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "auc needs one label per score");
    let positives = labels.iter().filter(|&&y| y).count() as u128;
    let negatives = labels.len() as u128 - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&x, &y| scores[x].total_cmp(&scores[y]));
    // twice the concordant count plus the tied count, kept in integers
    let mut doubled: u128 = 0;
    let mut negatives_below: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && scores[order[end]].total_cmp(&scores[order[start]]).is_eq() {
            end += 1;
        }
        let p = order[start..end].iter().filter(|&&idx| labels[idx]).count() as u128;
        let q = (end - start) as u128 - p;
        doubled += 2 * p * negatives_below + p * q;
        negatives_below += q;
        start = end;
    }
    Some(doubled as f64 / (2 * positives * negatives) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub auc: Option<f64>,
    pub train_loglik: f64,
    pub test_cells: usize,
    pub positives: usize,
    pub fit_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub spec: ModelSpec,
    /// Mean over folds with a defined AUC; `None` if there are none.
    pub mean_auc: Option<f64>,
    /// Sample standard deviation over the defined folds (0 for a single one).
    pub std_auc: f64,
    pub mean_train_loglik: f64,
    pub folds: Vec<FoldScore>,
    pub notes: Vec<String>,
}

impl CvScore {
    pub fn folds_defined(&self) -> usize {
        self.folds.iter().filter(|f| f.auc.is_some()).count()
    }
}

/// Fits `spec` on each training mask and scores the held-out cells.
///
/// Fold `f` fits with seed `derive_seed(cfg.seed, FOLD_FIT + f)`.
pub fn cv_score(a: &Tensor3, spec: &ModelSpec, plan: &FoldPlan, cfg: &FitConfig) -> Result<CvScore> {
    let [n, _, l] = a.dims();
    if n != plan.n || l != plan.l {
        return Err(Error::arg(format!(
            "fold plan is for N = {}, L = {} but the data has N = {n}, L = {l}",
            plan.n, plan.l
        )));
    }
    spec.check(n, l)?;
    let folds: Vec<Result<FoldScore>> = (0..plan.b)
        .into_par_iter()
        .map(|f| {
            let fit_seed = derive_seed(cfg.seed, domain::FOLD_FIT + f as u64);
            let fold_cfg = cfg.for_spec(*spec);
            let fold_cfg = FitConfig { seed: fit_seed, ..fold_cfg };
            let result = fit(a, &plan.train_mask(f), &fold_cfg)?;
            let rates = result.model.reconstruct();
            let test = plan.test_mask(f);
            let (mut scores, mut labels) = (Vec::new(), Vec::new());
            for (idx, &held_out) in test.bits().iter().enumerate() {
                if held_out {
                    scores.push(rates.values()[idx]);
                    labels.push(a.values()[idx] > 0.0);
                }
            }
            Ok(FoldScore {
                fold: f,
                auc: auc(&scores, &labels),
                train_loglik: result.final_loglik,
                test_cells: scores.len(),
                positives: labels.iter().filter(|&&y| y).count(),
                fit_seed,
            })
        })
        .collect();
    let folds = folds.into_iter().collect::<Result<Vec<_>>>()?;
    let notes = folds
        .iter()
        .filter(|f| f.auc.is_none())
        .map(|f| format!("fold {} dropped: held-out labels are a single class", f.fold))
        .collect();
    let defined: Vec<f64> = folds.iter().filter_map(|f| f.auc).collect();
    let (mean_auc, std_auc) = mean_std(&defined);
    let mean_train_loglik = folds.iter().map(|f| f.train_loglik).sum::<f64>() / folds.len() as f64;
    Ok(CvScore {
        spec: *spec,
        mean_auc,
        std_auc,
        mean_train_loglik,
        folds,
        notes,
    })
}

fn mean_std(xs: &[f64]) -> (Option<f64>, f64) {
    if xs.is_empty() {
        return (None, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (Some(mean), 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (Some(mean), var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub regime: RegimeKind,
    pub k: usize,
    /// Effective number of layer communities (`L` for independent, `1` for
    /// redundant, `K` for SCA).
    pub c: usize,
    pub spec: ModelSpec,
    pub mean_auc: Option<f64>,
    pub std_auc: f64,
    pub mean_train_loglik: f64,
    pub param_count: usize,
    pub folds_defined: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub index: usize,
    pub spec: ModelSpec,
    pub note: String,
    /// Grid indices of cells within one std of the best mean AUC that have
    /// fewer parameters.
    pub parsimonious_alternatives: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: Vec<GridCell>,
    pub chosen: Option<Choice>,
    /// Requested cells that are not valid for the data dims.
    pub skipped: Vec<String>,
}

/// Column order of [`SweepResult::to_csv`].
pub const SWEEP_CSV_HEADER: &str = "regime,k,c,mean_auc,std_auc,mean_train_loglik,param_count,folds_defined";

impl SweepResult {
    /// One row per grid cell; undefined AUCs are written as `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for cell in &self.grid {
            let mean = cell.mean_auc.map_or_else(|| "NA".to_string(), |x| x.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                cell.regime, cell.k, cell.c, mean, cell.std_auc, cell.mean_train_loglik, cell.param_count, cell.folds_defined
            );
        }
        out
    }
}

/// The valid specs of a sweep in output order: regime name, then `K`, then `C`.
pub fn sweep_specs(regimes: &[RegimeKind], ks: &[usize], cs: &[usize], n: usize, l: usize) -> (Vec<ModelSpec>, Vec<String>) {
    let mut keyed: BTreeMap<(&'static str, usize, usize), ModelSpec> = BTreeMap::new();
    let mut skipped = Vec::new();
    for &regime in regimes {
        for &k in ks {
            let candidates: Vec<ModelSpec> = match regime {
                RegimeKind::Dependent => cs.iter().map(|&c| ModelSpec::dependent(k, c)).collect(),
                RegimeKind::Independent => vec![ModelSpec::independent(k)],
                RegimeKind::Redundant => vec![ModelSpec::redundant(k)],
                RegimeKind::Sca => vec![ModelSpec::sca(k)],
            };
            for spec in candidates {
                match spec.check(n, l) {
                    Ok(()) => {
                        keyed.insert((regime.as_str(), k, spec.c(l)), spec);
                    }
                    Err(e) => skipped.push(format!("{spec}: {e}")),
                }
            }
        }
    }
    skipped.sort();
    skipped.dedup();
    (keyed.into_values().collect(), skipped)
}

/// Cross-validates every valid `(regime, K, C)` cell and picks the best.
pub fn sweep(
    a: &Tensor3,
    regimes: &[RegimeKind],
    ks: &[usize],
    cs: &[usize],
    plan: &FoldPlan,
    cfg: &FitConfig,
) -> Result<SweepResult> {
    if regimes.is_empty() || ks.is_empty() || (regimes.contains(&RegimeKind::Dependent) && cs.is_empty()) {
        return Err(Error::arg("sweep ranges must be nonempty"));
    }
    let [n, _, l] = a.dims();
    let (specs, skipped) = sweep_specs(regimes, ks, cs, n, l);
    for s in &skipped {
        log::info!("sweep skips {s}");
    }
    let scores: Vec<Result<CvScore>> = specs.par_iter().map(|spec| cv_score(a, spec, plan, cfg)).collect();
    let mut grid = Vec::with_capacity(specs.len());
    for (spec, score) in specs.iter().zip(scores) {
        let score = score?;
        grid.push(GridCell {
            regime: spec.kind(),
            k: spec.k(),
            c: spec.c(l),
            spec: *spec,
            mean_auc: score.mean_auc,
            std_auc: score.std_auc,
            mean_train_loglik: score.mean_train_loglik,
            param_count: param_count(spec, n, l),
            folds_defined: score.folds_defined(),
        });
    }
    let chosen = choose(&grid);
    Ok(SweepResult { grid, chosen, skipped })
}

/// Highest mean AUC (first in grid order on ties), plus the cheaper cells
/// within one standard deviation of it.
pub fn choose(grid: &[GridCell]) -> Option<Choice> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, cell) in grid.iter().enumerate() {
        if let Some(m) = cell.mean_auc {
            if best.map_or(true, |(_, b)| m > b) {
                best = Some((idx, m));
            }
        }
    }
    let (index, top) = best?;
    let chosen = &grid[index];
    let floor = top - chosen.std_auc;
    let alternatives: Vec<usize> = grid
        .iter()
        .enumerate()
        .filter(|(_, c)| c.param_count < chosen.param_count && c.mean_auc.is_some_and(|m| m >= floor))
        .map(|(idx, _)| idx)
        .collect();
    let mut note = format!(
        "highest mean test AUC {top:.4} (std {:.4}) at {}",
        chosen.std_auc, chosen.spec
    );
    if alternatives.is_empty() {
        note.push_str("; no cheaper cell within one std");
    } else {
        let names: Vec<String> = alternatives
            .iter()
            .map(|&i| format!("{} ({:.4}, {} params)", grid[i].spec, grid[i].mean_auc.unwrap_or(f64::NAN), grid[i].param_count))
            .collect();
        let _ = write!(note, "; within one std with fewer parameters: {}", names.join(", "));
    }
    Some(Choice {
        index,
        spec: chosen.spec,
        note,
        parsimonious_alternatives: alternatives,
    })
}

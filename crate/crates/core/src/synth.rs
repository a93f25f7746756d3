//! Seeded sampling from the generative model and planted block scenarios.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, NNTuckModel, RegimeKind};
use crate::tensor::Tensor3;

/// Draws `A(i, j, ℓ) ~ Poisson(Â(i, j, ℓ))` independently.
///
/// Cell `(i, j, ℓ)` reads its own ChaCha20 stream whose id is the cell's
/// row-major offset, so any single cell can be regenerated from the seed.
pub fn sample(m: &NNTuckModel, seed: u64) -> Tensor3 {
    sample_rates(&m.reconstruct(), seed)
}

pub fn sample_rates(rates: &Tensor3, seed: u64) -> Tensor3 {
    let base = ChaCha20Rng::seed_from_u64(seed);
    let values = rates
        .values()
        .iter()
        .enumerate()
        .map(|(idx, &rate)| {
            if rate <= 0.0 {
                return 0.0;
            }
            let mut rng = base.clone();
            rng.set_stream(idx as u64);
            Poisson::new(rate).expect("positive finite rate").sample(&mut rng)
        })
        .collect();
    Tensor3::from_raw(rates.dims(), values)
}

/// Maps every positive entry to 1.
pub fn binarize(a: &Tensor3) -> Tensor3 {
    let values = a.values().iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }).collect();
    Tensor3::from_raw(a.dims(), values)
}

/// Hard-membership block model used by tests and the `simulate` command.
///
/// Nodes sit in `K` blocks and layers in `C` groups. Every core slice puts
/// `within_rate` on the diagonal block pairs and `between_rate` elsewhere;
/// when `C ≥ 2`, the slice of layer group `s` additionally drops block
/// `s mod K` to `between_rate`, so layer groups perceive different parts of
/// the block structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedScenario {
    pub n: usize,
    pub l: usize,
    pub spec: ModelSpec,
    pub node_blocks: Vec<usize>,
    pub layer_groups: Vec<usize>,
    pub within_rate: f64,
    pub between_rate: f64,
    pub seed: u64,
}

impl PlantedScenario {
    /// Contiguous, balanced blocks and groups.
    pub fn balanced(n: usize, l: usize, spec: ModelSpec, within_rate: f64, between_rate: f64, seed: u64) -> Result<Self> {
        spec.check(n, l)?;
        let k = spec.k();
        let groups = match spec.kind() {
            RegimeKind::Sca => k,
            RegimeKind::Redundant => 1,
            RegimeKind::Dependent => spec.c(l),
            // each layer keeps its own slice, but the slices follow C = min(K, L) groups
            RegimeKind::Independent => k.min(l),
        };
        let scenario = Self {
            n,
            l,
            spec,
            node_blocks: (0..n).map(|i| i * k / n).collect(),
            layer_groups: (0..l).map(|ell| ell * groups / l).collect(),
            within_rate,
            between_rate,
            seed,
        };
        scenario.check()?;
        Ok(scenario)
    }

    pub fn check(&self) -> Result<()> {
        self.spec.check(self.n, self.l)?;
        let k = self.spec.k();
        if self.node_blocks.len() != self.n || self.node_blocks.iter().any(|&b| b >= k) {
            return Err(Error::arg("node_blocks must assign each of the N nodes to a block below K"));
        }
        if self.layer_groups.len() != self.l {
            return Err(Error::arg("layer_groups must have one entry per layer"));
        }
        if !(self.within_rate >= 0.0 && self.between_rate >= 0.0) {
            return Err(Error::arg("rates must be nonnegative"));
        }
        if self.spec.kind() == RegimeKind::Sca && self.layer_groups != self.node_blocks {
            return Err(Error::arg("SCA scenarios need layer_groups equal to node_blocks"));
        }
        Ok(())
    }

    fn group_count(&self) -> usize {
        self.layer_groups.iter().copied().max().map_or(1, |g| g + 1)
    }

    fn slice_rate(&self, group: usize, groups: usize, a: usize, b: usize) -> f64 {
        let k = self.spec.k();
        if a != b || (groups >= 2 && a == group % k) {
            self.between_rate
        } else {
            self.within_rate
        }
    }

    pub fn model(&self) -> Result<NNTuckModel> {
        self.check()?;
        let (l, k) = (self.l, self.spec.k());
        let u = one_hot(&self.node_blocks, k);
        let groups = self.group_count();
        let (y, g) = match self.spec.kind() {
            RegimeKind::Independent => {
                let g = Tensor3::from_fn([k, k, l], |a, b, ell| self.slice_rate(self.layer_groups[ell], groups, a, b))?;
                (Array2::eye(l), g)
            }
            RegimeKind::Redundant => {
                let g = Tensor3::from_fn([k, k, 1], |a, b, _| self.slice_rate(0, 1, a, b))?;
                (Array2::ones((l, 1)), g)
            }
            RegimeKind::Dependent | RegimeKind::Sca => {
                let c = self.spec.c(l);
                if self.layer_groups.iter().any(|&s| s >= c) {
                    return Err(Error::arg("layer_groups must be below C"));
                }
                let g = Tensor3::from_fn([k, k, c], |a, b, s| self.slice_rate(s, c, a, b))?;
                (one_hot(&self.layer_groups, c), g)
            }
        };
        NNTuckModel::new(u.clone(), u, y, g)
    }

    pub fn sample(&self) -> Result<Tensor3> {
        Ok(sample(&self.model()?, self.seed))
    }
}

fn one_hot(labels: &[usize], width: usize) -> Array2<f64> {
    let mut m = Array2::zeros((labels.len(), width));
    for (row, &label) in labels.iter().enumerate() {
        m[[row, label]] = 1.0;
    }
    m
}

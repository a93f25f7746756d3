//! Shared inputs for the benchmarks.

use nntuck::synth::PlantedScenario;
use nntuck::{Mask3, ModelSpec, NNTuckModel, Tensor3};

/// Planted dependent `K = C = 3` data on `n` nodes and `n` layers.
pub fn planted(n: usize, seed: u64) -> (NNTuckModel, Tensor3, Mask3) {
    let scenario = PlantedScenario::balanced(n, n, ModelSpec::dependent(3, 3), 2.5, 0.5, seed).expect("valid scenario");
    let model = scenario.model().expect("valid model");
    let data = scenario.sample().expect("valid sample");
    (model, data, Mask3::structural(n, n, false))
}

//! Nonnegative Tucker decomposition (NNTuck) of multilayer networks.
//!
//! A network tensor `A` of shape `N × N × L` (sender × receiver × layer) is
//! modelled as Poisson with rates `G ×₁ U ×₂ V ×₃ Y`. For a cognitive social
//! structure the layers are the perceivers, so `Y` groups people by how they
//! perceive the network and `U`, `V` group them by how they tie.
//!
//! The crate covers the tensor kernel ([`tensor`]), the constraint regimes
//! and model containers ([`model`]), multiplicative-update estimation
//! ([`estimate`]), likelihood-ratio tests ([`stats`]), tubular
//! cross-validation ([`modelselect`]), interpretive transforms
//! ([`analysis`]), seeded simulation ([`synth`]) and file formats ([`io`]).

pub mod analysis;
pub mod error;
pub mod estimate;
pub mod io;
pub mod model;
pub mod modelselect;
pub mod rng;
pub mod special;
pub mod stats;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use estimate::{fit, fit_from, fit_once, fit_sca_once, FitConfig, FitResult, ScaStrategy};
pub use model::{param_count, ModelDocument, ModelSpec, NNTuckModel, RegimeKind, Violation};
pub use analysis::{consensus, locally_aggregated, proportional_membership, select_basis_layers, to_relative, RelativeSpace};
pub use io::{CssDataset, DataFormat};
pub use modelselect::{auc, cv_score, make_folds, sweep, CvScore, FoldMode, FoldPlan, SweepResult};
pub use stats::{chi2_sf, df_between, split_lrt, standard_lrt, Decision, TestKind, TestResult, TestSpec};
pub use synth::PlantedScenario;
pub use tensor::{kl_div, poisson_loglik, Mask3, Tensor3};

pub use ndarray;

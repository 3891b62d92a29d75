//! GeNeX: genetic model-pool generation with prototype expert fusion, plus a
//! validation-overfitting-aware evaluation protocol.
//!
//! - [`learner`]: base-learner contract, reference MLP, checkpoints.
//! - [`numerics`]: divergences, diagonal GMM, silhouette model selection,
//!   PCA reduction, simplex-constrained weighting, input perturbation.
//! - [`gene`]: the genetic pool generator (zero validation access).
//! - [`protonex`]: behavioural clustering, expert election, prototype fusion
//!   and convex ensemble weighting.
//! - [`voaware`]: JSD-guided splitting, GM / VO / TO metrics, optimism and
//!   label-shift checks, Single and Inc-Ens baselines.

pub mod error;
pub mod gene;
pub mod learner;
pub mod numerics;
pub mod protonex;
pub mod seed;
pub mod synthetic;
pub mod trace;
pub mod voaware;

pub use error::{GenexError, Result};
pub use learner::{
    Classifier, ConfigSpace, Dataset, LearnerConfig, Lineage, ModelRecord, NamedParamSet,
};
pub use trace::{DataSplit, Stage, Trace, TraceEvent};

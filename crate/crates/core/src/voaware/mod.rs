//! Validation-overfitting-aware evaluation: guided splitting, GM / VO / TO
//! metrics, optimism and label-shift checks, and the comparison baselines.

mod baselines;
mod metrics;
mod optimism;
mod split;

pub use baselines::{baseline_inc_ens, baseline_single, IncEnsOutcome, SingleOutcome};
pub use metrics::{evaluate_gm, geometric_mean_score, to_gap, vo_gap};
pub use optimism::{label_shift_bound_check, simulate_optimism, ClassPriors, OptimismEstimate, OptimismSimConfig};
pub use split::{jsd_guided_split, random_split, SplitConfig, SplitIndices};

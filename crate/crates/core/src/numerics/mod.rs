//! Shared numerical kernels.

mod clustering;
mod divergence;
mod gmm;
mod perturb;
mod reduce;
mod simplex;

pub use clustering::{adjusted_rand_index, select_k_by_silhouette, silhouette_score, KCandidate};
pub use divergence::{js_divergence, js_unchecked, kl_divergence, kl_unchecked, KL_FLOOR};
pub use gmm::{gmm_assign, gmm_fit, gmm_fit_with, GmmModel, GmmOptions, VARIANCE_FLOOR};
pub use perturb::perturb_inputs;
pub use reduce::{reduce_dim, Pca, PcaFit, Reducer};
pub use simplex::{
    convex_combination, mixture_cross_entropy, optimize_simplex_weights, project_to_simplex, SimplexFit,
    SimplexWeights,
};

//! Expectation-maximization over the latent branching structure.

pub mod branching;
pub mod config;
pub mod fit;
pub mod mstep;

pub use branching::{complete_data_loglik, e_step, Attribution, BranchingStructure, DEFAULT_FLOOR};
pub use config::{FitConfig, Mode};
pub use fit::{fit, m_step, to_full_rank, FitReport};
pub use mstep::{
    frb_temporal_weights, frb_update, rescale_exertions, update_beta_sq, update_gamma, update_influence_points,
    update_kappa, update_mu, update_xi, BranchingStats, FitNotes, GammaPrior, BETA_SQ_FLOOR,
};

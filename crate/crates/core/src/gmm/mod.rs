//! Mixture likelihoods, the φ_ξ surrogate, and the lift to subspace mixtures.

pub mod cost;
pub mod lift;
pub mod model;
pub mod smm;

#[cfg(test)]
pub(crate) mod testing;

pub use cost::{neg_log_likelihood, phi_cost, point_nll, point_phi, z_normalizer, PhiConfig, ZNormalizer};
pub use lift::{embed_point, embed_set, lift_to_smm, LiftWitness};
pub use model::{Component, GmmJson, GmmModel};
pub use smm::{cost_inf, dist_inf, linf_cost_constant, smm_cost, SmmModel};

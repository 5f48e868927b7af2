use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::GmmModel;
use crate::error::{ensure_dim, Error, Result};
use crate::geom::linalg::neg_log_sum_exp;
use crate::geom::WeightedPointSet;

pub const DEFAULT_XI: f64 = 0.01;
const PAR_THRESHOLD: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiConfig {
    xi: f64,
}

impl PhiConfig {
    pub fn new(xi: f64) -> Result<Self> {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::InvalidParameter(format!("xi must be positive, got {xi}")));
        }
        Ok(PhiConfig { xi })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Eigenvalue bound `e^ξ / (2π)` above which `Z(θ) <= 1`.
    pub fn xi_prime(&self) -> f64 {
        self.xi.exp() / (2.0 * std::f64::consts::PI)
    }

    /// Eigenvalue bound that forces `Z(θ) <= 1` in dimension `d`.
    ///
    /// `ξ'` is enough for `d >= 2`; in one dimension `e^{2ξ}/(2π)` is needed.
    pub fn z_safe_eigen_bound(&self, d: usize) -> f64 {
        let needed = (2.0 * self.xi / d.max(1) as f64).exp() / (2.0 * std::f64::consts::PI);
        needed.max(self.xi_prime())
    }
}

impl Default for PhiConfig {
    fn default() -> Self {
        PhiConfig { xi: DEFAULT_XI }
    }
}

/// `Z(θ)` together with the reweighted mixture weights `ω'`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZNormalizer {
    pub log_z: f64,
    pub z: f64,
    pub reweighted: Vec<f64>,
}

/// Sums `w(p) f(p)` in input order; evaluation runs in parallel on large sets.
pub(crate) fn weighted_sum<F>(set: &WeightedPointSet, f: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if set.len() >= PAR_THRESHOLD {
        let vals: Vec<f64> = (0..set.len())
            .into_par_iter()
            .map(|i| set.weight(i) * f(set.point(i)))
            .collect();
        vals.iter().sum()
    } else {
        set.iter().map(|(p, w)| w * f(p)).sum()
    }
}

/// `-ln Σ ω_i N(p | μ_i, Σ_i)`.
pub fn point_nll(p: &[f64], theta: &GmmModel) -> f64 {
    let terms: Vec<f64> = theta.components().iter().map(|c| c.log_weighted_density(p)).collect();
    neg_log_sum_exp(&terms)
}

/// Weighted negative log-likelihood of the set.
pub fn neg_log_likelihood(set: &WeightedPointSet, theta: &GmmModel) -> Result<f64> {
    ensure_dim(theta.dim(), set.dim())?;
    Ok(weighted_sum(set, |p| point_nll(p, theta)))
}

pub fn z_normalizer(theta: &GmmModel, cfg: &PhiConfig) -> ZNormalizer {
    let logs: Vec<f64> = theta
        .components()
        .iter()
        .map(|c| c.weight().ln() + cfg.xi() - 0.5 * c.log_det_2pi_cov())
        .collect();
    let log_z = -neg_log_sum_exp(&logs);
    let reweighted = logs.iter().map(|l| (l - log_z).exp()).collect();
    ZNormalizer {
        log_z,
        z: log_z.exp(),
        reweighted,
    }
}

/// `-ln Σ ω'_i exp(-½ M_i(p) - ξ)` with `ω'` taken from `z`.
pub fn point_phi(p: &[f64], theta: &GmmModel, z: &ZNormalizer, cfg: &PhiConfig) -> f64 {
    let terms: Vec<f64> = theta
        .components()
        .iter()
        .zip(&z.reweighted)
        .map(|(c, w)| w.ln() - 0.5 * c.mahalanobis(p) - cfg.xi())
        .collect();
    neg_log_sum_exp(&terms)
}

pub fn phi_cost(set: &WeightedPointSet, theta: &GmmModel, cfg: &PhiConfig) -> Result<f64> {
    ensure_dim(theta.dim(), set.dim())?;
    let z = z_normalizer(theta, cfg);
    Ok(weighted_sum(set, |p| point_phi(p, theta, &z, cfg)))
}

use crate::error::{ensure_dim, Error, Result};
use crate::geom::linalg::neg_log_sum_exp;
use crate::geom::{AffineSubspace, WeightedPointSet};

const WEIGHT_SUM_TOL: f64 = 1e-10;

/// Subspace mixture `(W, ω, S_1..S_k)`.
#[derive(Debug, Clone)]
pub struct SmmModel {
    w: f64,
    mixture_weights: Vec<f64>,
    subspaces: Vec<AffineSubspace>,
}

impl SmmModel {
    pub fn new(w: f64, mixture_weights: Vec<f64>, subspaces: Vec<AffineSubspace>) -> Result<Self> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale W must be positive, got {w}")));
        }
        if mixture_weights.is_empty() || mixture_weights.len() != subspaces.len() {
            return Err(Error::InvalidParameter(format!(
                "{} mixture weights for {} subspaces",
                mixture_weights.len(),
                subspaces.len()
            )));
        }
        if mixture_weights.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::InvalidParameter("mixture weights must be non-negative".into()));
        }
        let total: f64 = mixture_weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {total}, not 1")));
        }
        let dim = subspaces[0].ambient_dim();
        for s in &subspaces {
            ensure_dim(dim, s.ambient_dim())?;
        }
        Ok(SmmModel {
            w,
            mixture_weights,
            subspaces,
        })
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn mixture_weights(&self) -> &[f64] {
        &self.mixture_weights
    }

    pub fn subspaces(&self) -> &[AffineSubspace] {
        &self.subspaces
    }

    pub fn ambient_dim(&self) -> usize {
        self.subspaces[0].ambient_dim()
    }

    pub fn k(&self) -> usize {
        self.subspaces.len()
    }
}

/// `-ln Σ ω_i exp(-W dist²(p, S_i))`.
pub fn smm_cost(p: &[f64], y: &SmmModel) -> Result<f64> {
    ensure_dim(y.ambient_dim(), p.len())?;
    let mut terms = Vec::with_capacity(y.k());
    for (w, s) in y.mixture_weights.iter().zip(&y.subspaces) {
        terms.push(w.ln() - y.w * s.dist_squared(p)?);
    }
    Ok(neg_log_sum_exp(&terms))
}

/// Largest per-point cost; weights are ignored.
pub fn cost_inf(set: &WeightedPointSet, y: &SmmModel) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut best = f64::NEG_INFINITY;
    for (p, _) in set.iter() {
        best = best.max(smm_cost(p, y)?);
    }
    Ok(best)
}

/// Largest distance from a point to its nearest subspace.
pub fn dist_inf(set: &WeightedPointSet, subspaces: &[AffineSubspace]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut best = 0.0f64;
    for (p, _) in set.iter() {
        best = best.max(crate::geom::subspace::dist_to_set(p, subspaces)?);
    }
    Ok(best)
}

/// The constant relating ℓ∞ subspace coresets to ℓ∞ mixture coresets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinfCostConstant {
    /// `h(k) = (z + g²)(1 + ε)^{k-1}`.
    pub h: f64,
    /// `e (z + g²)`, valid for every `r > 0`.
    pub general_bound: f64,
    /// `2e g²`, valid once `r² >= ξ/2`.
    pub closed_bound: f64,
}

/// Evaluates `h(k)` at coreset cost `r` for the given `ξ`.
pub fn linf_cost_constant(k: usize, r: f64, xi: f64) -> Result<LinfCostConstant> {
    if k == 0 || !(r > 0.0) || !(xi > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need k >= 1, r > 0 and xi > 0 (k={k}, r={r}, xi={xi})"
        )));
    }
    let kf = k as f64;
    let eps = -(-(-kf / r).exp()).ln_1p() / r;
    let z = 1.0 + kf / (r * r);
    let g2 = 1.0 + 2.0 * kf / xi;
    Ok(LinfCostConstant {
        h: (z + g2) * (1.0 + eps).powi(k as i32 - 1),
        general_bound: std::f64::consts::E * (z + g2),
        closed_bound: 2.0 * std::f64::consts::E * g2,
    })
}

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::geom::linalg::{cholesky_lower, forward_substitute, spd_inverse};
use crate::geom::PsdMatrix;

const WEIGHT_SUM_TOL: f64 = 1e-10;

/// One Gaussian component with its factorizations cached.
#[derive(Debug, Clone)]
pub struct Component {
    weight: f64,
    mean: DVector<f64>,
    cov: PsdMatrix,
    chol: DMatrix<f64>,
    precision: DMatrix<f64>,
    log_det_2pi_cov: f64,
}

impl Component {
    pub fn new(weight: f64, mean: Vec<f64>, cov: PsdMatrix) -> Result<Self> {
        ensure_dim(mean.len(), cov.dim())?;
        if !(weight > 0.0 && weight <= 1.0 + WEIGHT_SUM_TOL) {
            return Err(Error::InvalidParameter(format!("mixture weight {weight} outside (0, 1]")));
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("mean has non-finite entries".into()));
        }
        let chol = cholesky_lower(cov.entries())?;
        let precision = spd_inverse(cov.entries())?;
        let d = mean.len() as f64;
        let log_det: f64 = chol.diagonal().iter().map(|x| 2.0 * x.ln()).sum();
        Ok(Component {
            weight,
            mean: DVector::from_vec(mean),
            cov,
            chol,
            precision,
            log_det_2pi_cov: d * (2.0 * std::f64::consts::PI).ln() + log_det,
        })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &PsdMatrix {
        &self.cov
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// `ln det(2πΣ)`.
    pub fn log_det_2pi_cov(&self) -> f64 {
        self.log_det_2pi_cov
    }

    /// `(p-μ)ᵀ Σ⁻¹ (p-μ)` through a triangular solve.
    pub fn mahalanobis(&self, p: &[f64]) -> f64 {
        let diff: Vec<f64> = p.iter().zip(self.mean.iter()).map(|(a, b)| a - b).collect();
        forward_substitute(&self.chol, &diff).iter().map(|x| x * x).sum()
    }

    /// `ln ω + ln N(p | μ, Σ)`.
    pub fn log_weighted_density(&self, p: &[f64]) -> f64 {
        self.weight.ln() - 0.5 * self.mahalanobis(p) - 0.5 * self.log_det_2pi_cov
    }
}

/// A k-component Gaussian mixture in R^d.
#[derive(Debug, Clone)]
pub struct GmmModel {
    dim: usize,
    components: Vec<Component>,
}

impl GmmModel {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let dim = components
            .first()
            .map(|c| c.mean.len())
            .ok_or_else(|| Error::InvalidParameter("mixture needs at least one component".into()))?;
        for c in &components {
            ensure_dim(dim, c.mean.len())?;
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(GmmModel { dim, components })
    }

    /// Convenience constructor from raw parts; covariances are clamped at `eigen_floor`.
    pub fn from_parts(
        weights: &[f64],
        means: &[Vec<f64>],
        covariances: &[DMatrix<f64>],
        eigen_floor: f64,
    ) -> Result<Self> {
        if weights.len() != means.len() || weights.len() != covariances.len() {
            return Err(Error::InvalidParameter("component part lists differ in length".into()));
        }
        let comps = weights
            .iter()
            .zip(means)
            .zip(covariances)
            .map(|((w, m), c)| Component::new(*w, m.clone(), PsdMatrix::new(c.clone(), eigen_floor)?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Smallest covariance eigenvalue over all components.
    pub fn eigen_lower_bound(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.cov.min_eigenvalue())
            .fold(f64::INFINITY, f64::min)
    }

    /// Membership in the family whose covariance eigenvalues are all >= `xi_prime`.
    pub fn in_family(&self, xi_prime: f64) -> bool {
        self.eigen_lower_bound() >= xi_prime
    }

    pub fn to_json(&self) -> GmmJson {
        GmmJson {
            k: self.k(),
            d: self.dim,
            components: self
                .components
                .iter()
                .map(|c| ComponentJson {
                    weight: c.weight,
                    mean: c.mean.iter().copied().collect(),
                    covariance: c.cov.entries().transpose().iter().copied().collect(),
                })
                .collect(),
        }
    }

    pub fn from_json(json: &GmmJson, eigen_floor: f64) -> Result<Self> {
        if json.components.len() != json.k {
            return Err(Error::Parse(format!(
                "model declares k={} but lists {} components",
                json.k,
                json.components.len()
            )));
        }
        let d = json.d;
        let mut comps = Vec::with_capacity(json.k);
        for c in &json.components {
            ensure_dim(d, c.mean.len())?;
            ensure_dim(d * d, c.covariance.len())?;
            let cov = DMatrix::from_row_slice(d, d, &c.covariance);
            comps.push(Component::new(c.weight, c.mean.clone(), PsdMatrix::new(cov, eigen_floor)?)?);
        }
        Self::new(comps)
    }

    pub fn load(path: &std::path::Path, eigen_floor: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let json: GmmJson = serde_json::from_str(&text)?;
        Self::from_json(&json, eigen_floor)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json())?)?;
        Ok(())
    }
}

/// On-disk form of a mixture; covariances are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmJson {
    pub k: usize,
    pub d: usize,
    pub components: Vec<ComponentJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentJson {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::DEFAULT_EIGEN_FLOOR;

    fn two_component() -> GmmModel {
        GmmModel::from_parts(
            &[0.25, 0.75],
            &[vec![0.0, 1.0], vec![2.0, -1.0]],
            &[
                DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
                DMatrix::identity(2, 2) * 0.5,
            ],
            DEFAULT_EIGEN_FLOOR,
        )
        .unwrap()
    }

    #[test]
    fn weights_must_sum_to_one() {
        let r = GmmModel::from_parts(
            &[0.5, 0.4],
            &[vec![0.0], vec![1.0]],
            &[DMatrix::identity(1, 1), DMatrix::identity(1, 1)],
            DEFAULT_EIGEN_FLOOR,
        );
        assert!(r.is_err());
    }

    #[test]
    fn mahalanobis_matches_explicit_inverse() {
        let m = two_component();
        let c = &m.components()[0];
        let p = [1.5, -0.5];
        let diff = DVector::from_column_slice(&p) - c.mean();
        let inv = c.covariance().entries().clone().try_inverse().unwrap();
        let direct = (diff.transpose() * inv * &diff)[(0, 0)];
        assert!((c.mahalanobis(&p) - direct).abs() < 1e-12);
    }

    #[test]
    fn family_membership_uses_smallest_eigenvalue() {
        let m = two_component();
        assert!((m.eigen_lower_bound() - 0.5).abs() < 1e-12);
        assert!(m.in_family(0.5));
        assert!(!m.in_family(0.51));
    }

    #[test]
    fn json_round_trip() {
        let m = two_component();
        let text = serde_json::to_string(&m.to_json()).unwrap();
        let back = GmmModel::from_json(&serde_json::from_str(&text).unwrap(), DEFAULT_EIGEN_FLOOR).unwrap();
        assert_eq!(back.to_json(), m.to_json());
    }
}

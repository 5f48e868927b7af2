use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::cost::{z_normalizer, PhiConfig};
use super::model::GmmModel;
use super::smm::SmmModel;
use crate::error::{Error, Result};
use crate::geom::linalg::{cholesky, orthonormal_complement};
use crate::geom::{AffineSubspace, PsdMatrix, WeightedPointSet};

/// Per-component pieces of the lift.
#[derive(Debug, Clone)]
pub struct LiftComponent {
    /// Lower-triangular `A` with `AᵀA = Σ⁻¹ / (2W)`.
    pub a: DMatrix<f64>,
    /// `U = [Aᵀ; Lᵀ]` with `LLᵀ = I - AAᵀ`; orthonormal columns in R^{2d}.
    pub u: DMatrix<f64>,
    /// `E μ`, the mean padded to R^{2d}.
    pub translation: DVector<f64>,
    /// Offset `√(ξ/W)` along the last axis.
    pub extra_offset: f64,
}

/// A mixture lifted to a subspace mixture in R^{2d+1}.
#[derive(Debug, Clone)]
pub struct LiftWitness {
    pub smm: SmmModel,
    pub components: Vec<LiftComponent>,
    dim: usize,
}

impl LiftWitness {
    /// `(p | 0, …, 0)` in R^{2d+1}.
    pub fn embed(&self, p: &[f64]) -> Vec<f64> {
        embed_point(p, self.dim)
    }
}

pub fn embed_point(p: &[f64], dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * dim + 1);
    out.extend_from_slice(p);
    out.resize(2 * dim + 1, 0.0);
    out
}

/// Pads every point with `d + 1` zeros.
pub fn embed_set(set: &WeightedPointSet) -> WeightedPointSet {
    set.pad_zeros(set.dim() + 1)
}

/// Scale `W` of the lift: half the largest of `σ²` and `σ` over components,
/// where `σ` is the top singular value of `Σ⁻¹`.
pub fn lift_scale(theta: &GmmModel) -> f64 {
    theta
        .components()
        .iter()
        .map(|c| {
            let sigma = 1.0 / c.covariance().min_eigenvalue();
            sigma.max(sigma * sigma) / 2.0
        })
        .fold(0.0, f64::max)
}

pub fn lift_to_smm(theta: &GmmModel, cfg: &PhiConfig) -> Result<LiftWitness> {
    let d = theta.dim();
    let w = lift_scale(theta);
    let z = z_normalizer(theta, cfg);
    let extra_offset = (cfg.xi() / w).sqrt();

    let mut components = Vec::with_capacity(theta.k());
    let mut subspaces = Vec::with_capacity(theta.k());
    for c in theta.components() {
        let scaled = PsdMatrix::new(c.precision() / (2.0 * w), 0.0)?;
        let a = cholesky(&scaled)?;

        let gap = DMatrix::identity(d, d) - &a * a.transpose();
        let eig = SymmetricEigen::new((&gap + gap.transpose()) * 0.5);
        let l = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|x| x.max(0.0).sqrt()));

        let mut u = DMatrix::zeros(2 * d, d);
        u.view_mut((0, 0), (d, d)).copy_from(&a.transpose());
        u.view_mut((d, 0), (d, d)).copy_from(&l.transpose());
        let t = orthonormal_complement(&u);
        if t.ncols() != d {
            return Err(Error::InvalidParameter(format!(
                "lift complement has {} columns, expected {d}",
                t.ncols()
            )));
        }

        let mut basis = DMatrix::zeros(2 * d + 1, d);
        basis.view_mut((0, 0), (2 * d, d)).copy_from(&t);
        let mut offset = DVector::zeros(2 * d + 1);
        offset.rows_mut(0, d).copy_from(c.mean());
        offset[2 * d] = extra_offset;
        subspaces.push(AffineSubspace::new(basis, offset)?);

        let mut translation = DVector::zeros(2 * d);
        translation.rows_mut(0, d).copy_from(c.mean());
        components.push(LiftComponent {
            a,
            u,
            translation,
            extra_offset,
        });
    }
    let total: f64 = z.reweighted.iter().sum();
    let weights = z.reweighted.iter().map(|x| x / total).collect();
    Ok(LiftWitness {
        smm: SmmModel::new(w, weights, subspaces)?,
        components,
        dim: d,
    })
}

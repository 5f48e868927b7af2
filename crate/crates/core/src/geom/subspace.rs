use nalgebra::{DMatrix, DVector};

use super::linalg::orthonormalize;
use crate::error::{ensure_dim, Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-10;

/// Affine subspace `offset + span(basis)` in R^D with an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSubspace {
    basis: DMatrix<f64>,
    offset: DVector<f64>,
}

impl AffineSubspace {
    /// `basis` holds the spanning vectors as columns (D×j, j < D).
    pub fn new(basis: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let ambient = offset.len();
        ensure_dim(ambient, basis.nrows())?;
        if basis.ncols() >= ambient {
            return Err(Error::InvalidParameter(format!(
                "subspace of dimension {} is not proper in R^{ambient}",
                basis.ncols()
            )));
        }
        let gram = basis.transpose() * &basis;
        let err = (gram - DMatrix::identity(basis.ncols(), basis.ncols())).amax();
        if basis.ncols() > 0 && err > ORTHONORMAL_TOL {
            return Err(Error::InvalidParameter(format!(
                "basis is not orthonormal (gram error {err:e})"
            )));
        }
        Ok(AffineSubspace { basis, offset })
    }

    pub fn point(offset: DVector<f64>) -> Self {
        let ambient = offset.len();
        AffineSubspace {
            basis: DMatrix::zeros(ambient, 0),
            offset,
        }
    }

    /// Affine hull of the given points, with the first point as offset.
    ///
    /// Directions that are numerically dependent are dropped, so the
    /// result may have lower dimension than `points.len() - 1`.
    pub fn from_spanning(points: &[&[f64]]) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptySet)?;
        let offset = DVector::from_column_slice(first);
        let mut dirs = Vec::with_capacity(points.len() - 1);
        for p in &points[1..] {
            ensure_dim(offset.len(), p.len())?;
            dirs.push(DVector::from_column_slice(p) - &offset);
        }
        let cols = orthonormalize(&dirs, 1e-12);
        let cols = &cols[..cols.len().min(offset.len().saturating_sub(1))];
        let basis = if cols.is_empty() {
            DMatrix::zeros(offset.len(), 0)
        } else {
            DMatrix::from_columns(cols)
        };
        Ok(AffineSubspace { basis, offset })
    }

    pub fn ambient_dim(&self) -> usize {
        self.offset.len()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    fn residual(&self, p: &[f64]) -> Result<DVector<f64>> {
        ensure_dim(self.ambient_dim(), p.len())?;
        let r = DVector::from_column_slice(p) - &self.offset;
        if self.dim() == 0 {
            return Ok(r);
        }
        let coeffs = self.basis.tr_mul(&r);
        Ok(r - &self.basis * coeffs)
    }

    pub fn dist(&self, p: &[f64]) -> Result<f64> {
        Ok(self.residual(p)?.norm())
    }

    pub fn dist_squared(&self, p: &[f64]) -> Result<f64> {
        Ok(self.residual(p)?.norm_squared())
    }

    /// Closest point of the subspace to `p`.
    pub fn project(&self, p: &[f64]) -> Result<DVector<f64>> {
        let r = self.residual(p)?;
        Ok(DVector::from_column_slice(p) - r)
    }

    pub fn translate(&self, v: &[f64]) -> Result<Self> {
        ensure_dim(self.ambient_dim(), v.len())?;
        Ok(AffineSubspace {
            basis: self.basis.clone(),
            offset: &self.offset + DVector::from_column_slice(v),
        })
    }
}

/// Distance from `p` to the nearest subspace of the set.
pub fn dist_to_set(p: &[f64], subspaces: &[AffineSubspace]) -> Result<f64> {
    let mut best = f64::INFINITY;
    for s in subspaces {
        best = best.min(s.dist(p)?);
    }
    if subspaces.is_empty() {
        return Err(Error::InvalidParameter("query has no subspaces".into()));
    }
    Ok(best)
}

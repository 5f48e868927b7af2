use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_dim, Error, Result};

pub const DEFAULT_EIGEN_FLOOR: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-10;

/// Symmetric matrix whose eigenvalues are all at least `eigen_floor`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMatrix {
    entries: DMatrix<f64>,
    eigen_floor: f64,
}

impl PsdMatrix {
    /// Builds the matrix, clamping eigenvalues below `eigen_floor` up to it.
    ///
    /// Entries are averaged with their transpose; asymmetry beyond a
    /// relative 1e-10 is rejected.
    pub fn new(entries: DMatrix<f64>, eigen_floor: f64) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::InvalidParameter(format!(
                "covariance must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if !(eigen_floor >= 0.0 && eigen_floor.is_finite()) {
            return Err(Error::InvalidParameter(format!("eigen floor {eigen_floor} must be >= 0")));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
        }
        let scale = entries.amax().max(1.0);
        let asym = (&entries - entries.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::InvalidParameter(format!(
                "matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let sym = (&entries + entries.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let entries = if eig.eigenvalues.min() >= eigen_floor {
            sym
        } else {
            let clamped = eig.eigenvalues.map(|l| l.max(eigen_floor));
            let m = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
            (&m + m.transpose()) * 0.5
        };
        Ok(PsdMatrix {
            entries,
            eigen_floor,
        })
    }

    pub fn with_default_floor(entries: DMatrix<f64>) -> Result<Self> {
        Self::new(entries, DEFAULT_EIGEN_FLOOR)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::with_default_floor(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn eigen_floor(&self) -> f64 {
        self.eigen_floor
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        SymmetricEigen::new(self.entries.clone()).eigenvalues
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().min()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().max()
    }
}

/// Standard lower Cholesky factor `L` with `L Lᵀ = M`.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    ensure_dim(n, m.ncols())?;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut pivot = m[(j, j)];
        for p in 0..j {
            pivot -= l[(j, p)] * l[(j, p)];
        }
        if !(pivot > 0.0) {
            return Err(Error::NotPositiveDefinite { row: j, pivot });
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Lower-triangular `A` with `Aᵀ A = M`.
///
/// Obtained from the standard factorization of the index-reversed matrix.
pub fn cholesky(m: &PsdMatrix) -> Result<DMatrix<f64>> {
    cholesky_transposed(m.entries())
}

pub(crate) fn cholesky_transposed(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let rev = |i: usize| n - 1 - i;
    let flipped = DMatrix::from_fn(n, n, |i, j| m[(rev(i), rev(j))]);
    let l = cholesky_lower(&flipped).map_err(|e| match e {
        Error::NotPositiveDefinite { row, pivot } => Error::NotPositiveDefinite {
            row: rev(row),
            pivot,
        },
        other => other,
    })?;
    Ok(DMatrix::from_fn(n, n, |i, j| l[(rev(j), rev(i))]))
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn forward_substitute(l: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut x = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l[(i, j)] * x[j];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Inverse of a symmetric positive definite matrix through its Cholesky factor.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = cholesky_lower(m)?;
    let n = m.nrows();
    let mut inv = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for c in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[c] = 1.0;
        let y = forward_substitute(&l, &e);
        // back substitution with Lᵀ
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= l[(j, i)] * x[j];
            }
            x[i] = s / l[(i, i)];
        }
        for r in 0..n {
            inv[(r, c)] = x[r];
        }
    }
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Columns completing the orthonormal columns of `u` to a basis of R^D.
///
/// Candidates are the standard basis vectors, orthogonalized twice
/// against everything accepted so far; the most independent one is taken
/// at each step.
pub fn orthonormal_complement(u: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = u.nrows();
    let mut basis: Vec<DVector<f64>> = u.column_iter().map(|c| c.into_owned()).collect();
    let start = basis.len();
    while basis.len() < dim {
        let mut best: Option<DVector<f64>> = None;
        let mut best_norm = 0.0;
        for e in 0..dim {
            let mut v = DVector::zeros(dim);
            v[e] = 1.0;
            for _ in 0..2 {
                for b in &basis {
                    let dot = b.dot(&v);
                    v.axpy(-dot, b, 1.0);
                }
            }
            let norm = v.norm();
            if norm > best_norm + 1e-12 {
                best_norm = norm;
                best = Some(v);
            }
        }
        match best {
            Some(v) => basis.push(v / best_norm),
            None => break,
        }
    }
    DMatrix::from_columns(&basis[start..])
}

/// Orthonormalizes columns in order with two Gram–Schmidt passes, dropping
/// columns whose residual falls below `tol`.
pub fn orthonormalize(columns: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(columns.len());
    for c in columns {
        let mut v = c.clone();
        let scale = v.norm();
        for _ in 0..2 {
            for b in &out {
                let dot = b.dot(&v);
                v.axpy(-dot, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > tol * scale.max(1.0) {
            out.push(v / norm);
        }
    }
    out
}

/// `j` orthonormal columns in R^D drawn from the rotation-invariant distribution.
pub fn random_orthonormal_frame<R: Rng + ?Sized>(rng: &mut R, dim: usize, j: usize) -> DMatrix<f64> {
    assert!(j <= dim, "frame of {j} vectors does not fit in dimension {dim}");
    let mut cols = Vec::with_capacity(j);
    while cols.len() < j {
        let g = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut trial = cols.clone();
        trial.push(g);
        let ortho = orthonormalize(&trial, 1e-8);
        if ortho.len() == trial.len() {
            cols = ortho;
        }
    }
    if cols.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// `-ln Σ exp(a_i)`, shifted by the largest exponent.
pub fn neg_log_sum_exp(exponents: &[f64]) -> f64 {
    let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = exponents.iter().map(|a| (a - max).exp()).sum();
    -(max + s.ln())
}

use nalgebra::DMatrix;
use rand::Rng;

use super::model::GmmModel;
use crate::geom::linalg::random_orthonormal_frame;

/// Random mixture whose smallest covariance eigenvalue is exactly `min_eig`
/// (up to rounding) and whose eigenvalue ratio stays below 20.
pub(crate) fn random_gmm<R: Rng>(rng: &mut R, k: usize, d: usize, min_eig: f64) -> GmmModel {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let means: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let covs: Vec<DMatrix<f64>> = (0..k)
        .map(|i| {
            let q = random_orthonormal_frame(rng, d, d);
            let eig: Vec<f64> = (0..d)
                .map(|j| if i == 0 && j == 0 { min_eig } else { min_eig * rng.random_range(1.0..20.0) })
                .collect();
            let m = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eig)) * q.transpose();
            (&m + m.transpose()) * 0.5
        })
        .collect();
    GmmModel::from_parts(&weights, &means, &covs, 0.0).expect("random mixture is valid")
}

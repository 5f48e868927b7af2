use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::linalg::{cholesky_lower, random_orthonormal_frame};
use crate::geom::{PsdMatrix, WeightedPointSet};
use crate::gmm::{Component, GmmModel};

/// Ground-truth mixture generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub k: usize,
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    /// Largest over smallest covariance eigenvalue within a component.
    #[serde(default = "default_ratio")]
    pub eigen_ratio: f64,
    /// Smallest covariance eigenvalue.
    #[serde(default = "default_scale")]
    pub min_eigen: f64,
    /// Means are drawn from `[-spread, spread]^d`.
    #[serde(default = "default_spread")]
    pub spread: f64,
    /// Mixture weights decay geometrically by this factor.
    #[serde(default = "default_decay")]
    pub weight_decay: f64,
}

fn default_ratio() -> f64 {
    100.0
}
fn default_scale() -> f64 {
    0.01
}
fn default_spread() -> f64 {
    3.0
}
fn default_decay() -> f64 {
    0.3
}

impl SynthConfig {
    pub fn new(k: usize, d: usize, n: usize, seed: u64) -> Self {
        SynthConfig {
            k,
            d,
            n,
            seed,
            eigen_ratio: default_ratio(),
            min_eigen: default_scale(),
            spread: default_spread(),
            weight_decay: default_decay(),
        }
    }
}

pub struct Synthetic {
    pub model: GmmModel,
    pub data: WeightedPointSet,
    pub labels: Vec<usize>,
}

pub fn ground_truth(cfg: &SynthConfig, rng: &mut ChaCha20Rng) -> Result<GmmModel> {
    if cfg.k == 0 || cfg.d == 0 || !(cfg.eigen_ratio >= 1.0) || !(cfg.min_eigen > 0.0) {
        return Err(Error::InvalidParameter("synth needs k, d >= 1, eigen_ratio >= 1 and min_eigen > 0".into()));
    }
    if !(cfg.weight_decay > 0.0 && cfg.weight_decay <= 1.0) {
        return Err(Error::InvalidParameter("weight_decay must lie in (0, 1]".into()));
    }
    let raw: Vec<f64> = (0..cfg.k).map(|j| cfg.weight_decay.powi(j as i32)).collect();
    let total: f64 = raw.iter().sum();
    let mut comps = Vec::with_capacity(cfg.k);
    for &w in &raw {
        let mean: Vec<f64> = (0..cfg.d).map(|_| rng.random_range(-cfg.spread..=cfg.spread)).collect();
        let q = random_orthonormal_frame(rng, cfg.d, cfg.d);
        let eig: Vec<f64> = (0..cfg.d)
            .map(|a| match a {
                0 => cfg.min_eigen,
                1 => cfg.min_eigen * cfg.eigen_ratio,
                _ => cfg.min_eigen * cfg.eigen_ratio.powf(rng.random::<f64>()),
            })
            .collect();
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eig));
        let mut cov = &q * lam * q.transpose();
        cov = (&cov + cov.transpose()) * 0.5;
        comps.push(Component::new(w / total, mean, PsdMatrix::new(cov, 0.0)?)?);
    }
    GmmModel::new(comps)
}

pub fn sample_gmm(model: &GmmModel, n: usize, rng: &mut ChaCha20Rng) -> Result<(WeightedPointSet, Vec<usize>)> {
    let factors = model
        .components()
        .iter()
        .map(|c| cholesky_lower(c.covariance().entries()))
        .collect::<Result<Vec<_>>>()?;
    let d = model.dim();
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut j = model.k() - 1;
        for (t, c) in model.components().iter().enumerate() {
            acc += c.weight();
            if u < acc {
                j = t;
                break;
            }
        }
        let z = nalgebra::DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let x = model.components()[j].mean() + &factors[j] * z;
        points.push(x.iter().copied().collect());
        labels.push(j);
    }
    Ok((WeightedPointSet::unweighted(points)?, labels))
}

pub fn synthesize(cfg: &SynthConfig) -> Result<Synthetic> {
    if cfg.n == 0 {
        return Err(Error::EmptySet);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let model = ground_truth(cfg, &mut rng)?;
    let (data, labels) = sample_gmm(&model, cfg.n, &mut rng)?;
    Ok(Synthetic { model, data, labels })
}

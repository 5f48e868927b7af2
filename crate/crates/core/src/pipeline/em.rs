use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::linalg::{neg_log_sum_exp, squared_distance};
use crate::geom::{PsdMatrix, WeightedPointSet, DEFAULT_EIGEN_FLOOR};
use crate::gmm::{point_nll, Component, GmmModel};
use crate::seed::mix;

/// Components whose responsibility mass falls below this share are reseeded.
const DEGENERATE_MASS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub eigen_floor: f64,
    pub seed: u64,
}

impl EmConfig {
    pub fn new(k: usize) -> Self {
        EmConfig {
            k,
            restarts: 3,
            max_iters: 200,
            tol: 1e-7,
            eigen_floor: DEFAULT_EIGEN_FLOOR,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub model: GmmModel,
    /// Weighted negative log-likelihood of the input under `model`.
    pub nll: f64,
    /// Weighted NLL after each E-step of the winning run.
    pub trace: Vec<f64>,
    pub iterations: usize,
}

/// Picks the index where the running sum of `mass` first exceeds `u·Σmass`.
fn cumulative_pick(mass: &[f64], u: f64) -> usize {
    let total: f64 = mass.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    for (i, m) in mass.iter().enumerate() {
        acc += m;
        if acc > target {
            return i;
        }
    }
    mass.iter().rposition(|&m| m > 0.0).unwrap_or(0)
}

/// Weighted k-means++ centres, one uniform draw per centre.
fn seed_centres(set: &WeightedPointSet, k: usize, rng: &mut ChaCha20Rng) -> Vec<Vec<f64>> {
    let n = set.len();
    let first = cumulative_pick(set.weights(), rng.random::<f64>());
    let mut centres = vec![set.point(first).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| squared_distance(set.point(i), &centres[0])).collect();
    while centres.len() < k {
        let mass: Vec<f64> = (0..n).map(|i| set.weight(i) * d2[i]).collect();
        let u = rng.random::<f64>();
        let pick = if mass.iter().sum::<f64>() > 0.0 {
            cumulative_pick(&mass, u)
        } else {
            cumulative_pick(set.weights(), u)
        };
        let c = set.point(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_distance(set.point(i), &c));
        }
        centres.push(c);
    }
    centres
}

fn weighted_covariance(set: &WeightedPointSet, resp: Option<(&[f64], usize, usize)>, mean: &[f64]) -> (DMatrix<f64>, f64) {
    let d = set.dim();
    let mut s = DMatrix::zeros(d, d);
    let mut mass = 0.0;
    for i in 0..set.len() {
        let r = match resp {
            Some((r, k, j)) => r[i * k + j],
            None => 1.0,
        };
        let w = set.weight(i) * r;
        if w == 0.0 {
            continue;
        }
        mass += w;
        let p = set.point(i);
        for a in 0..d {
            let da = p[a] - mean[a];
            for b in 0..=a {
                s[(a, b)] += w * da * (p[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            s[(b, a)] = s[(a, b)];
        }
    }
    if mass > 0.0 {
        s /= mass;
    }
    (s, mass)
}

fn weighted_mean(set: &WeightedPointSet) -> Vec<f64> {
    let mut m = vec![0.0; set.dim()];
    for (p, w) in set.iter() {
        for (a, x) in p.iter().enumerate() {
            m[a] += w * x;
        }
    }
    let t = set.total_weight();
    m.iter_mut().for_each(|x| *x /= t);
    m
}

/// E-step: fills `resp` (row-major n×k) and returns the weighted NLL.
fn e_step(set: &WeightedPointSet, model: &GmmModel, resp: &mut [f64]) -> f64 {
    let k = model.k();
    let parts: Vec<f64> = resp
        .par_chunks_mut(k)
        .enumerate()
        .with_min_len(256)
        .map(|(i, row)| {
            let p = set.point(i);
            for (j, c) in model.components().iter().enumerate() {
                row[j] = c.log_weighted_density(p);
            }
            let nll = neg_log_sum_exp(row);
            for r in row.iter_mut() {
                *r = (*r + nll).exp();
            }
            set.weight(i) * nll
        })
        .collect();
    parts.iter().sum()
}

fn build_model(weights: Vec<f64>, means: Vec<Vec<f64>>, covs: Vec<DMatrix<f64>>, floor: f64) -> Result<GmmModel> {
    let total: f64 = weights.iter().sum();
    let comps = weights
        .into_iter()
        .zip(means)
        .zip(covs)
        .map(|((w, m), c)| Component::new(w / total, m, PsdMatrix::new(c, floor)?))
        .collect::<Result<Vec<_>>>()?;
    GmmModel::new(comps)
}

fn single_run(set: &WeightedPointSet, cfg: &EmConfig, seed: u64) -> Result<EmFit> {
    let n = set.len();
    let k = cfg.k;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let global_mean = weighted_mean(set);
    let (global_cov, _) = weighted_covariance(set, None, &global_mean);
    let centres = seed_centres(set, k, &mut rng);
    let mut model = build_model(vec![1.0; k], centres, vec![global_cov.clone(); k], cfg.eigen_floor)?;
    let mut resp = vec![0.0; n * k];
    let mut trace = Vec::new();
    let mut reseeded = vec![false; k];
    let total_w = set.total_weight();
    let mut nll = e_step(set, &model, &mut resp);
    trace.push(nll);
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let mut weights = Vec::with_capacity(k);
        let mut means = Vec::with_capacity(k);
        let mut covs = Vec::with_capacity(k);
        for j in 0..k {
            let mut mass = 0.0;
            let mut mean = vec![0.0; set.dim()];
            for i in 0..n {
                let w = set.weight(i) * resp[i * k + j];
                mass += w;
                for (a, x) in set.point(i).iter().enumerate() {
                    mean[a] += w * x;
                }
            }
            if mass < DEGENERATE_MASS * total_w {
                if reseeded[j] {
                    return Err(Error::DegenerateComponent { component: j });
                }
                reseeded[j] = true;
                // restart the component at the worst explained point
                let worst = (0..n)
                    .map(|i| point_nll(set.point(i), &model))
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
                    .0;
                weights.push(1.0 / k as f64 * total_w);
                means.push(set.point(worst).to_vec());
                covs.push(global_cov.clone());
                continue;
            }
            mean.iter_mut().for_each(|x| *x /= mass);
            let (cov, _) = weighted_covariance(set, Some((&resp, k, j)), &mean);
            weights.push(mass);
            means.push(mean);
            covs.push(cov);
        }
        model = build_model(weights, means, covs, cfg.eigen_floor)?;
        let next = e_step(set, &model, &mut resp);
        trace.push(next);
        let gain = nll - next;
        nll = next;
        if gain.abs() <= cfg.tol * (1.0 + nll.abs()) {
            break;
        }
    }
    Ok(EmFit {
        model,
        nll,
        trace,
        iterations,
    })
}

/// Weighted EM with k-means++ seeding; keeps the best of `restarts` runs.
pub fn em_fit_weighted(set: &WeightedPointSet, cfg: &EmConfig) -> Result<EmFit> {
    if cfg.k == 0 || cfg.restarts == 0 {
        return Err(Error::InvalidParameter("EM needs k >= 1 and at least one restart".into()));
    }
    if set.len() < cfg.k {
        return Err(Error::TooFewPoints {
            needed: cfg.k,
            got: set.len(),
        });
    }
    let runs: Vec<Result<EmFit>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| single_run(set, cfg, mix(&[cfg.seed, r as u64])))
        .collect();
    let mut best: Option<EmFit> = None;
    let mut last_err = None;
    for run in runs {
        match run {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.nll < b.nll) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one restart ran"))
}

//! Sensitivity-proportional importance sampling.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::WeightedPointSet;
use crate::sensitivity::SensitivityMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub m: usize,
    pub seed: u64,
    pub vc_dimension: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// Constant in the sample size advice.
    pub c: f64,
    /// Draw only `m` minus the number of forced points, so `|C| <= m`.
    #[serde(default)]
    pub cap_total: bool,
}

impl SamplerConfig {
    pub fn new(m: usize, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("sample size m must be at least 1".into()));
        }
        Ok(SamplerConfig {
            m,
            seed,
            vc_dimension: 1,
            epsilon: 0.2,
            delta: 0.1,
            c: 1.0,
            cap_total: false,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ImportanceSample {
    /// Indices into the input, ascending.
    pub indices: Vec<usize>,
    pub set: WeightedPointSet,
    /// Weights before the final rescale.
    pub raw_weights: Vec<f64>,
    /// Number of points taken without sampling.
    pub forced: usize,
}

/// `⌈c(t+1)/ε² · (d′·ln(t+2) + ln(1/δ))⌉`.
pub fn advised_sample_size(t: f64, cfg: &SamplerConfig) -> Result<usize> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("total sensitivity must be finite and non-negative, got {t}")));
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0) || !(cfg.delta > 0.0 && cfg.delta < 1.0) || !(cfg.c > 0.0) {
        return Err(Error::InvalidParameter("size advice needs ε in (0,1], δ in (0,1) and c > 0".into()));
    }
    let v = cfg.c * (t + 1.0) / (cfg.epsilon * cfg.epsilon)
        * (cfg.vc_dimension as f64 * (t + 2.0).ln() + (1.0 / cfg.delta).ln());
    Ok(v.ceil().max(1.0) as usize)
}

pub fn importance_sample(set: &WeightedPointSet, s: &SensitivityMap, cfg: &SamplerConfig) -> Result<ImportanceSample> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    if s.len() != set.len() {
        return Err(Error::DimensionMismatch {
            expected: set.len(),
            got: s.len(),
        });
    }
    if cfg.m == 0 {
        return Err(Error::InvalidParameter("sample size m must be at least 1".into()));
    }
    if s.values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter("sensitivities must be finite and non-negative".into()));
    }
    let total_w = set.total_weight();
    let s_prime: Vec<f64> = s.values.iter().zip(set.weights()).map(|(v, w)| v + w / total_w).collect();
    let total_s: f64 = s_prime.iter().sum();
    if !(total_s > 0.0) {
        return Err(Error::ZeroTotalSensitivity);
    }
    let m = cfg.m as f64;

    let mut raw: BTreeMap<usize, f64> = BTreeMap::new();
    let mut rest = Vec::new();
    for (i, sp) in s_prime.iter().enumerate() {
        if sp / total_s >= 1.0 / m {
            raw.insert(i, set.weight(i));
        } else {
            rest.push(i);
        }
    }
    let forced = raw.len();
    let draws = if cfg.cap_total { cfg.m.saturating_sub(forced) } else { cfg.m };
    if !rest.is_empty() && draws > 0 {
        let rest_s: Vec<f64> = rest.iter().map(|&i| s_prime[i]).collect();
        let rest_total: f64 = rest_s.iter().sum();
        let dist = WeightedIndex::new(&rest_s).map_err(|_| Error::ZeroTotalSensitivity)?;
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        for _ in 0..draws {
            let j = dist.sample(&mut rng);
            let q = rest[j];
            let pr = rest_s[j] / rest_total;
            *raw.entry(q).or_insert(0.0) += set.weight(q) / (m * pr);
        }
    }

    let raw_sum: f64 = raw.values().sum();
    let scale = total_w / raw_sum;
    let indices: Vec<usize> = raw.keys().copied().collect();
    let raw_weights: Vec<f64> = raw.values().copied().collect();
    let weights: Vec<f64> = raw_weights.iter().map(|u| u * scale).collect();
    let out = set.reweighted_subset(&indices, weights)?;
    Ok(ImportanceSample {
        indices,
        set: out,
        raw_weights,
        forced,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn smap(values: Vec<f64>) -> SensitivityMap {
        let total = values.iter().sum();
        SensitivityMap {
            values,
            total,
            round_sizes: Vec::new(),
        }
    }

    fn line(n: usize) -> WeightedPointSet {
        WeightedPointSet::unweighted((0..n).map(|i| vec![i as f64]).collect()).unwrap()
    }

    #[test]
    fn advice_examples() {
        let mut cfg = SamplerConfig::new(1, 0).unwrap();
        cfg.epsilon = 1.0;
        cfg.delta = (-1.0f64).exp();
        assert_eq!(advised_sample_size(0.0, &cfg).unwrap(), 2);

        cfg.epsilon = 0.1;
        cfg.delta = 0.01;
        cfg.vc_dimension = 16;
        let want = (11.0 / 0.01 * (16.0 * 12f64.ln() + 100f64.ln())).ceil() as usize;
        assert_eq!(advised_sample_size(10.0, &cfg).unwrap(), want);
    }

    #[test]
    fn doubling_vc_dimension_doubles_its_term() {
        let mut cfg = SamplerConfig::new(1, 0).unwrap();
        cfg.epsilon = 0.5;
        cfg.delta = 0.5;
        cfg.vc_dimension = 1000;
        let a = advised_sample_size(3.0, &cfg).unwrap() as f64;
        cfg.vc_dimension = 2000;
        let b = advised_sample_size(3.0, &cfg).unwrap() as f64;
        let base = 4.0 / 0.25 * 2f64.ln();
        let term = 4.0 / 0.25 * 1000.0 * 5f64.ln();
        assert!((a - (base + term)).abs() <= 1.0);
        assert!((b - (base + 2.0 * term)).abs() <= 1.0);
    }

    #[test]
    fn saturated_sampling_keeps_everything() {
        let set = line(8);
        let cfg = SamplerConfig::new(8, 3).unwrap();
        let out = importance_sample(&set, &smap(vec![1.0; 8]), &cfg).unwrap();
        assert_eq!(out.indices, (0..8).collect::<Vec<_>>());
        assert_eq!(out.forced, 8);
        assert!((out.set.total_weight() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn dominant_point_is_forced() {
        let set = line(20);
        let mut s = vec![0.001; 20];
        s[7] = 99.0;
        let out = importance_sample(&set, &smap(s), &SamplerConfig::new(10, 1).unwrap()).unwrap();
        let pos = out.indices.iter().position(|&i| i == 7).unwrap();
        assert_eq!(out.raw_weights[pos], 1.0);
    }

    #[test]
    fn three_point_hand_trace() {
        let set = line(3);
        // s′ = s + 1/3 must come out as (0.5, 0.25, 0.25)·Σs′ with Σs′ = 4
        let s = vec![2.0 - 1.0 / 3.0, 1.0 - 1.0 / 3.0, 1.0 - 1.0 / 3.0];
        let out = importance_sample(&set, &smap(s), &SamplerConfig::new(2, 9).unwrap()).unwrap();
        assert_eq!(out.forced, 1);
        assert_eq!(out.indices[0], 0);
        assert_eq!(out.raw_weights[0], 1.0);
        // each draw from {1,2} has probability 1/2 and adds 1/(2·½) = 1
        let drawn: f64 = out.raw_weights[1..].iter().sum();
        assert!((drawn - 2.0).abs() < 1e-12);
        assert!((out.set.total_weight() - 3.0).abs() <= 3.0 * 1e-12);
    }

    #[test]
    fn capped_total_never_exceeds_m() {
        let set = line(50);
        let mut cfg = SamplerConfig::new(10, 4).unwrap();
        cfg.cap_total = true;
        let mut s = vec![0.01; 50];
        s[0] = 5.0;
        s[1] = 5.0;
        let out = importance_sample(&set, &smap(s), &cfg).unwrap();
        assert!(out.indices.len() <= 10);
    }

    #[test]
    fn errors() {
        let set = line(3);
        assert!(importance_sample(&set, &smap(vec![1.0; 2]), &SamplerConfig::new(2, 0).unwrap()).is_err());
        assert!(SamplerConfig::new(0, 0).is_err());
        assert!(importance_sample(&set, &smap(vec![-1.0, 1.0, 1.0]), &SamplerConfig::new(2, 0).unwrap()).is_err());
    }

    #[test]
    fn sampled_part_is_unbiased() {
        let set = WeightedPointSet::new(
            (0..10).map(|i| vec![i as f64]).collect(),
            (0..10).map(|i| 1.0 + i as f64 * 0.3).collect(),
        )
        .unwrap();
        let s = smap((0..10).map(|i| 0.05 + 0.01 * i as f64).collect());
        let cost = |i: usize| (i as f64 - 3.0).powi(2) + 0.5;
        let reps = 2000;
        let mut estimates = Vec::with_capacity(reps);
        let mut target = 0.0;
        for r in 0..reps {
            let out = importance_sample(&set, &s, &SamplerConfig::new(4, r as u64).unwrap()).unwrap();
            assert_eq!(out.forced, 0);
            if r == 0 {
                target = (0..10).map(|i| set.weight(i) * cost(i)).sum();
            }
            estimates.push(out.indices.iter().zip(&out.raw_weights).map(|(&i, u)| u * cost(i)).sum::<f64>());
        }
        let mean = estimates.iter().sum::<f64>() / reps as f64;
        let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!((mean - target).abs() <= 3.0 * se, "mean {mean} target {target} se {se}");
    }

    proptest! {
        #[test]
        fn weight_is_conserved(n in 1usize..60, m in 1usize..40, seed in 0u64..10_000) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>()]).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..100.0)).collect();
            let set = WeightedPointSet::new(pts, w).unwrap();
            let s = smap((0..n).map(|_| rng.random_range(0.0..2.0)).collect());
            let out = importance_sample(&set, &s, &SamplerConfig::new(m, seed).unwrap()).unwrap();
            let tw = set.total_weight();
            prop_assert!((out.set.total_weight() - tw).abs() <= 1e-12 * tw);
            prop_assert!(out.indices.windows(2).all(|p| p[0] < p[1]));
            prop_assert!(out.indices.iter().all(|&i| i < n));
            prop_assert!(out.indices.len() <= out.forced + m);
            prop_assert!(out.set.weights().iter().all(|&u| u > 0.0));
            let again = importance_sample(&set, &s, &SamplerConfig::new(m, seed).unwrap()).unwrap();
            prop_assert_eq!(out.indices, again.indices);
            prop_assert_eq!(out.raw_weights, again.raw_weights);
        }
    }
}

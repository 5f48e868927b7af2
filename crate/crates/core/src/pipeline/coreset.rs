use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::WeightedPointSet;
use crate::gmm::embed_set;
use crate::projclust::{GridConfig, LinfScheme, ProjectiveParams, SchemeKind};
use crate::sampler::{advised_sample_size, importance_sample, SamplerConfig};
use crate::sensitivity::{sensitivity_weighted, SensitivityConfig, SensitivityMap, DEFAULT_PEEL_EPSILON};
use crate::streaming::Reducer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeChoice {
    Projective,
    Kcenter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgmmConfig {
    pub k: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub m_override: Option<usize>,
    pub scheme: SchemeChoice,
    pub seed: u64,
    /// Defaults to `d⁴k⁴`.
    pub vc_dimension: Option<usize>,
    pub peel_epsilon: f64,
    /// Round the padded points to the integer grid before the projective scheme.
    pub quantize: bool,
    /// Keep `|C| <= m`, counting forced points against the draws.
    pub cap_total: bool,
}

impl KgmmConfig {
    pub fn new(k: usize, scheme: SchemeChoice) -> Self {
        KgmmConfig {
            k,
            epsilon: 0.2,
            delta: 0.1,
            m_override: None,
            scheme,
            seed: 0,
            vc_dimension: None,
            peel_epsilon: DEFAULT_PEEL_EPSILON,
            quantize: false,
            cap_total: false,
        }
    }

    fn scheme_kind(&self, padded: &WeightedPointSet) -> SchemeKind {
        match self.scheme {
            SchemeChoice::Kcenter => SchemeKind::Kcenter { k: self.k },
            SchemeChoice::Projective => {
                let mut p = ProjectiveParams::new(self.k, self.peel_epsilon);
                if self.quantize {
                    let refs: Vec<&[f64]> = (0..padded.len()).map(|i| padded.point(i)).collect();
                    p.grid = Some(GridConfig::fit(&refs, true));
                }
                SchemeKind::Projective(p)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct KgmmCoreset {
    pub set: WeightedPointSet,
    pub indices: Vec<usize>,
    pub m: usize,
    pub total_sensitivity: f64,
}

/// Sensitivities of `set` for `k`-GMM costs, from ℓ∞ coresets of the padded
/// points.
pub fn gmm_sensitivities(set: &WeightedPointSet, cfg: &KgmmConfig) -> Result<SensitivityMap> {
    if cfg.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let padded = embed_set(set);
    let scheme = cfg.scheme_kind(&padded);
    let scfg = SensitivityConfig::new(cfg.peel_epsilon, cfg.delta).map_err(|e| e.at_stage("sensitivity"))?;
    sensitivity_weighted(&padded, &scfg, &scheme as &dyn LinfScheme).map_err(|e| e.at_stage("sensitivity"))
}

/// Draws the coreset from precomputed sensitivities.
pub fn sample_with_sensitivities(
    set: &WeightedPointSet,
    s: &SensitivityMap,
    cfg: &KgmmConfig,
) -> Result<KgmmCoreset> {
    let d = set.dim();
    let mut scfg = SamplerConfig::new(1, cfg.seed)?;
    scfg.epsilon = cfg.epsilon;
    scfg.delta = cfg.delta;
    scfg.cap_total = cfg.cap_total;
    scfg.vc_dimension = cfg.vc_dimension.unwrap_or_else(|| (d.pow(4)).saturating_mul(cfg.k.pow(4)));
    scfg.m = match cfg.m_override {
        Some(m) => m,
        None => advised_sample_size(s.total, &scfg).map_err(|e| e.at_stage("sample size"))?,
    };
    if scfg.m >= set.len() && cfg.m_override.is_some() {
        return Ok(KgmmCoreset {
            set: set.clone(),
            indices: (0..set.len()).collect(),
            m: scfg.m,
            total_sensitivity: s.total,
        });
    }
    let out = importance_sample(set, s, &scfg).map_err(|e| e.at_stage("sampling"))?;
    Ok(KgmmCoreset {
        set: out.set,
        indices: out.indices,
        m: scfg.m,
        total_sensitivity: s.total,
    })
}

/// Padded ℓ∞ coresets, weighted sensitivities, then importance sampling.
pub fn kgmm_coreset(set: &WeightedPointSet, cfg: &KgmmConfig) -> Result<KgmmCoreset> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    if let Some(m) = cfg.m_override {
        if set.len() <= m {
            return Ok(KgmmCoreset {
                set: set.clone(),
                indices: (0..set.len()).collect(),
                m,
                total_sensitivity: f64::NAN,
            });
        }
    }
    let s = gmm_sensitivities(set, cfg)?;
    sample_with_sensitivities(set, &s, cfg)
}

/// Merge-reduce node: a k-GMM coreset of at most `m` points.
pub struct KgmmReducer {
    pub config: KgmmConfig,
    pub m: usize,
}

impl Reducer for KgmmReducer {
    fn reduce(&self, set: &WeightedPointSet, epsilon: f64, delta: f64, seed: u64) -> Result<WeightedPointSet> {
        if set.len() <= self.m {
            return Ok(set.clone());
        }
        let mut cfg = self.config.clone();
        cfg.epsilon = epsilon.min(1.0);
        cfg.delta = delta;
        cfg.seed = seed;
        cfg.m_override = Some(self.m);
        cfg.cap_total = true;
        Ok(kgmm_coreset(set, &cfg)?.set)
    }
}

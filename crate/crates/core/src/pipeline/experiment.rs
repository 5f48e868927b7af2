use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::WeightedPointSet;
use crate::gmm::{neg_log_likelihood, phi_cost, GmmModel, PhiConfig};
use crate::seed::{mix, tag};
use crate::sensitivity::SensitivityMap;

use super::coreset::{gmm_sensitivities, sample_with_sensitivities, KgmmConfig, SchemeChoice};
use super::em::{em_fit_weighted, EmConfig};
use super::io::read_points_csv;
use super::synth::{synthesize, SynthConfig};
use super::uniform::uniform_baseline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    /// Projective ℓ∞ coresets feeding the sensitivity bound.
    Ours,
    Uniform,
    /// The same pipeline with Gonzalez k-center in place of the projective
    /// scheme.
    KcenterOurs,
}

impl SchemeName {
    pub fn label(self) -> &'static str {
        match self {
            SchemeName::Ours => "ours",
            SchemeName::Uniform => "uniform",
            SchemeName::KcenterOurs => "kcenter-ours",
        }
    }

    fn choice(self) -> Option<SchemeChoice> {
        match self {
            SchemeName::Ours => Some(SchemeChoice::Projective),
            SchemeName::KcenterOurs => Some(SchemeChoice::Kcenter),
            SchemeName::Uniform => None,
        }
    }
}

fn default_restarts() -> usize {
    3
}
fn default_target_restarts() -> usize {
    5
}
fn default_iters() -> usize {
    200
}
fn default_tol() -> f64 {
    1e-7
}
fn default_xi() -> f64 {
    0.01
}
fn default_floor() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    /// Used when no dataset is given.
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    pub k: usize,
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub schemes: Vec<SchemeName>,
    #[serde(default = "default_restarts")]
    pub em_restarts: usize,
    /// Restarts for the target fit on the full data.
    #[serde(default = "default_target_restarts")]
    pub target_restarts: usize,
    #[serde(default = "default_iters")]
    pub em_iters: usize,
    #[serde(default = "default_tol")]
    pub em_tol: f64,
    #[serde(default = "default_floor")]
    pub eigen_floor: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_xi")]
    pub xi: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::InvalidParameter("no schemes to compare".into()));
        }
        if self.sizes.is_empty() || self.sizes.windows(2).any(|w| w[0] >= w[1]) || self.sizes[0] == 0 {
            return Err(Error::InvalidParameter("sizes must be positive and strictly increasing".into()));
        }
        if self.trials == 0 || self.k == 0 || self.em_restarts == 0 || self.target_restarts == 0 {
            return Err(Error::InvalidParameter("k, trials and restart counts must be at least 1".into()));
        }
        if self.dataset.is_none() && self.synth.is_none() {
            return Err(Error::InvalidParameter("give a dataset path or a synth block".into()));
        }
        PhiConfig::new(self.xi)?;
        Ok(())
    }

    fn em(&self, restarts: usize, seed: u64) -> EmConfig {
        EmConfig {
            k: self.k,
            restarts,
            max_iters: self.em_iters,
            tol: self.em_tol,
            eigen_floor: self.eigen_floor,
            seed,
        }
    }

    pub fn load_data(&self) -> Result<WeightedPointSet> {
        match (&self.dataset, &self.synth) {
            (Some(path), _) => read_points_csv(path),
            (None, Some(s)) => Ok(synthesize(s)?.data),
            (None, None) => Err(Error::InvalidParameter("no data source".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub scheme: SchemeName,
    pub size: usize,
    pub trial: usize,
    pub build_ms: f64,
    pub fit_ms: f64,
    /// Mean NLL of the full data under the model fitted on the coreset.
    pub nll_full: f64,
    /// `|ℓ_opt − nll_full|`.
    pub error: f64,
    /// `nll_full − ℓ(G_trg)`.
    pub excess: f64,
    /// Mean `φ_ξ` of the full data.
    pub phi_full: f64,
    pub coreset_points: usize,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: SchemeName,
    pub size: usize,
    pub succeeded: usize,
    pub median_error: f64,
    pub q1_error: f64,
    pub q3_error: f64,
    pub median_excess: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub n: usize,
    pub dim: usize,
    pub l_org: f64,
    pub l_trg: f64,
    pub l_opt: f64,
    pub sensitivity_ms: BTreeMap<String, f64>,
    pub cells: Vec<CellResult>,
    pub summary: Vec<SummaryRow>,
}

impl FitReport {
    pub fn row(&self, scheme: SchemeName, size: usize) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.scheme == scheme && r.size == size)
    }
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn mean_nll(data: &WeightedPointSet, model: &GmmModel) -> Result<f64> {
    Ok(neg_log_likelihood(data, model)? / data.total_weight())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<FitReport> {
    cfg.validate()?;
    let data = cfg.load_data()?;
    let report = run_on(cfg, &data)?;
    if let Some(dir) = &cfg.output_dir {
        write_report(&report, dir)?;
    }
    Ok(report)
}

/// Runs the comparison on already loaded data. Cell failures are recorded,
/// not returned.
pub fn run_on(cfg: &ExperimentConfig, data: &WeightedPointSet) -> Result<FitReport> {
    cfg.validate()?;
    let xi = PhiConfig::new(cfg.xi)?;
    let org = em_fit_weighted(data, &cfg.em(1, mix(&[cfg.seed, tag("org")]))).map_err(|e| e.at_stage("full fit"))?;
    let trg = em_fit_weighted(data, &cfg.em(cfg.target_restarts, mix(&[cfg.seed, tag("trg")])))
        .map_err(|e| e.at_stage("target fit"))?;
    let l_org = mean_nll(data, &org.model)?;
    let l_trg = mean_nll(data, &trg.model)?;
    let l_opt = (l_org - l_trg).abs();

    let mut sens: BTreeMap<SchemeName, std::result::Result<SensitivityMap, String>> = BTreeMap::new();
    let mut sensitivity_ms = BTreeMap::new();
    for &scheme in &cfg.schemes {
        if let Some(choice) = scheme.choice() {
            let t = Instant::now();
            let kc = KgmmConfig::new(cfg.k, choice);
            sens.insert(scheme, gmm_sensitivities(data, &kc).map_err(|e| e.to_string()));
            sensitivity_ms.insert(scheme.label().to_string(), t.elapsed().as_secs_f64() * 1e3);
        }
    }

    let jobs: Vec<(SchemeName, usize, usize)> = cfg
        .schemes
        .iter()
        .flat_map(|&s| cfg.sizes.iter().flat_map(move |&m| (0..cfg.trials).map(move |t| (s, m, t))))
        .collect();
    let cells: Vec<CellResult> = jobs
        .par_iter()
        .map(|&(scheme, size, trial)| {
            let seed = mix(&[cfg.seed, tag(scheme.label()), size as u64, trial as u64]);
            let mut cell = CellResult {
                scheme,
                size,
                trial,
                build_ms: 0.0,
                fit_ms: 0.0,
                nll_full: f64::NAN,
                error: f64::NAN,
                excess: f64::NAN,
                phi_full: f64::NAN,
                coreset_points: 0,
                failure: None,
            };
            let outcome = (|| -> Result<()> {
                let t = Instant::now();
                let coreset = match scheme.choice() {
                    None => uniform_baseline(data, size, seed)?,
                    Some(choice) => {
                        let s = match &sens[&scheme] {
                            Ok(s) => s,
                            Err(msg) => return Err(Error::SchemeFailure(msg.clone())),
                        };
                        let mut kc = KgmmConfig::new(cfg.k, choice);
                        kc.m_override = Some(size);
                        kc.seed = seed;
                        kc.cap_total = true;
                        sample_with_sensitivities(data, s, &kc)?.set
                    }
                };
                cell.build_ms = t.elapsed().as_secs_f64() * 1e3;
                cell.coreset_points = coreset.len();
                let t = Instant::now();
                let fit = em_fit_weighted(&coreset, &cfg.em(cfg.em_restarts, seed))?;
                cell.fit_ms = t.elapsed().as_secs_f64() * 1e3;
                cell.nll_full = mean_nll(data, &fit.model)?;
                cell.error = (l_opt - cell.nll_full).abs();
                cell.excess = cell.nll_full - l_trg;
                cell.phi_full = phi_cost(data, &fit.model, &xi)? / data.total_weight();
                Ok(())
            })();
            if let Err(e) = outcome {
                cell.failure = Some(e.to_string());
            }
            cell
        })
        .collect();

    let mut summary = Vec::new();
    for &scheme in &cfg.schemes {
        for &size in &cfg.sizes {
            let ok: Vec<&CellResult> = cells
                .iter()
                .filter(|c| c.scheme == scheme && c.size == size && c.failure.is_none())
                .collect();
            let mut errs: Vec<f64> = ok.iter().map(|c| c.error).collect();
            let mut exc: Vec<f64> = ok.iter().map(|c| c.excess).collect();
            errs.sort_by(f64::total_cmp);
            exc.sort_by(f64::total_cmp);
            summary.push(SummaryRow {
                scheme,
                size,
                succeeded: ok.len(),
                median_error: quantile(&errs, 0.5),
                q1_error: quantile(&errs, 0.25),
                q3_error: quantile(&errs, 0.75),
                median_excess: quantile(&exc, 0.5),
            });
        }
    }
    Ok(FitReport {
        n: data.len(),
        dim: data.dim(),
        l_org,
        l_trg,
        l_opt,
        sensitivity_ms,
        cells,
        summary,
    })
}

/// `report.csv`, `summary.json` and `plot.csv` (size against median error).
pub fn write_report(report: &FitReport, dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("report.csv"))?;
    w.write_record([
        "scheme", "size", "trial", "build_ms", "fit_ms", "nll_full", "error", "excess", "phi_full", "failure",
    ])?;
    for c in &report.cells {
        w.write_record([
            c.scheme.label().to_string(),
            c.size.to_string(),
            c.trial.to_string(),
            format!("{:.3}", c.build_ms),
            format!("{:.3}", c.fit_ms),
            c.nll_full.to_string(),
            c.error.to_string(),
            c.excess.to_string(),
            c.phi_full.to_string(),
            c.failure.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    let mut p = csv::Writer::from_path(dir.join("plot.csv"))?;
    p.write_record(["scheme", "size", "median_error", "q1_error", "q3_error"])?;
    for r in &report.summary {
        p.write_record([
            r.scheme.label().to_string(),
            r.size.to_string(),
            r.median_error.to_string(),
            r.q1_error.to_string(),
            r.q3_error.to_string(),
        ])?;
    }
    p.flush()?;
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(report)?)?;
    Ok(())
}

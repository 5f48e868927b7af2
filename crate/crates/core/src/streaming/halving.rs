use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bucket size `s(h)` of the merge-reduce tree with index `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HalvingFunction {
    Constant {
        size: usize,
    },
    /// `sizes[h-1]`, repeating the last entry.
    Table {
        sizes: Vec<usize>,
    },
    /// `(h/ε²)·ln(h/ε)·ln²(1/δ)·ln^{2g} M`.
    Theoretical {
        epsilon: f64,
        delta: f64,
        g: f64,
        m_bound: f64,
    },
}

impl HalvingFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            HalvingFunction::Constant { size } if *size == 0 => {
                Err(Error::InvalidParameter("bucket size must be positive".into()))
            }
            HalvingFunction::Table { sizes } if sizes.is_empty() || sizes.contains(&0) => {
                Err(Error::InvalidParameter("halving table needs positive entries".into()))
            }
            HalvingFunction::Table { sizes } if sizes.windows(2).any(|w| w[1] < w[0]) => {
                Err(Error::InvalidParameter("halving table must be non-decreasing".into()))
            }
            HalvingFunction::Theoretical {
                epsilon,
                delta,
                g,
                m_bound,
            } if !(*epsilon > 0.0 && *epsilon < 1.0 && *delta > 0.0 && *delta < 1.0 && *g >= 0.0 && *m_bound >= 2.0) => {
                Err(Error::InvalidParameter(
                    "theoretical halving needs ε, δ in (0,1), g >= 0 and M >= 2".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, h: usize) -> f64 {
        let h = h.max(1);
        match self {
            HalvingFunction::Constant { size } => *size as f64,
            HalvingFunction::Table { sizes } => sizes[(h - 1).min(sizes.len() - 1)] as f64,
            HalvingFunction::Theoretical {
                epsilon,
                delta,
                g,
                m_bound,
            } => {
                let hf = h as f64;
                hf / (epsilon * epsilon)
                    * (hf / epsilon).ln()
                    * (1.0 / delta).ln().powi(2)
                    * m_bound.ln().powf(2.0 * g)
            }
        }
    }

    /// `⌈s(h)⌉` as a bucket size.
    pub fn size(&self, h: usize) -> Result<usize> {
        let v = self.value(h).ceil();
        if !(v >= 1.0 && v < 2f64.powi(52)) {
            return Err(Error::InvalidParameter(format!("bucket size s({h}) = {v} is not usable")));
        }
        Ok(v as usize)
    }

    /// A degree `r` for which `s(Δh) <= Δ^r s(h)` holds for `Δ, h >= e`.
    pub fn log_lipschitz_degree(&self) -> f64 {
        match self {
            HalvingFunction::Constant { .. } => 0.0,
            HalvingFunction::Table { sizes } => {
                let first = sizes[0] as f64;
                let last = *sizes.last().unwrap() as f64;
                (last / first).ln().max(0.0) / std::f64::consts::E.ln()
            }
            HalvingFunction::Theoretical { .. } => 2.0,
        }
    }
}

/// `u(h) = ((ln M)^g · 4h⁵/ε² · ln(4/δ))^{1/2}` from the GMM streaming proof.
pub fn gmm_u(h: usize, epsilon: f64, delta: f64, g: f64, m_bound: f64) -> f64 {
    let hf = h as f64;
    (m_bound.ln().powf(g) * 4.0 * hf.powi(5) / (epsilon * epsilon) * (4.0 / delta).ln()).sqrt()
}

/// Checks `s(h) >= 10u³(h) >= (4u ln 4u)²` for the theoretical bucket size.
pub fn check_gmm_halving(s: &HalvingFunction, h: usize) -> Result<()> {
    let HalvingFunction::Theoretical {
        epsilon,
        delta,
        g,
        m_bound,
    } = s
    else {
        return Err(Error::InvalidParameter("strict mode needs the theoretical halving function".into()));
    };
    let u = gmm_u(h, *epsilon, *delta, *g, *m_bound);
    let ten_u3 = 10.0 * u.powi(3);
    let corollary = (4.0 * u * (4.0 * u).ln()).powi(2);
    let value = s.value(h);
    let required = ten_u3.max(corollary);
    if value < required {
        return Err(Error::HalvingCheck { h, value, required });
    }
    Ok(())
}

//! ℓ∞ coresets for projective clustering and the k-center shortcut.

pub mod gonzalez;
pub mod grid;
pub mod oracle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gonzalez::gonzalez_kcenter_coreset;
pub use grid::{linf_projective_coreset, subspace_coreset_base, BandMode, GridConfig, ProjectiveParams};
pub use oracle::{brute_force_linf_check, linf_ratio, OracleReport, QuerySampler, RandomFlats};

/// A construction that returns an ℓ∞ coreset as indices into its input.
pub trait LinfScheme: Sync {
    /// `delta` is the failure probability allotted to this call; the
    /// deterministic schemes here ignore it.
    fn coreset(&self, points: &[&[f64]], delta: f64) -> Result<Vec<usize>>;

    fn name(&self) -> &'static str;

    /// Worst-case output size for `n` input points, when known in closed form.
    fn size_bound(&self, n: usize) -> Option<usize>;

    fn time_descriptor(&self) -> &'static str;

    /// Runs the scheme and checks that the output is a non-empty subset.
    fn checked_coreset(&self, points: &[&[f64]], delta: f64) -> Result<Vec<usize>> {
        let out = self.coreset(points, delta)?;
        if !points.is_empty() && out.is_empty() {
            return Err(Error::SchemeFailure(format!("{} returned nothing", self.name())));
        }
        if let Some(bad) = out.iter().find(|&&i| i >= points.len()) {
            return Err(Error::SchemeFailure(format!(
                "{} returned index {bad} for {} points",
                self.name(),
                points.len()
            )));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SchemeKind {
    Projective(ProjectiveParams),
    Kcenter { k: usize },
    Full,
}

impl LinfScheme for SchemeKind {
    fn coreset(&self, points: &[&[f64]], _delta: f64) -> Result<Vec<usize>> {
        match self {
            SchemeKind::Projective(p) => linf_projective_coreset(points, p),
            SchemeKind::Kcenter { k } => Ok(gonzalez_kcenter_coreset(points, *k)),
            SchemeKind::Full => Ok((0..points.len()).collect()),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            SchemeKind::Projective(_) => "projective",
            SchemeKind::Kcenter { .. } => "kcenter",
            SchemeKind::Full => "full",
        }
    }

    fn size_bound(&self, n: usize) -> Option<usize> {
        match self {
            SchemeKind::Projective(_) => None,
            SchemeKind::Kcenter { k } => Some((k + 1).min(n)),
            SchemeKind::Full => Some(n),
        }
    }

    fn time_descriptor(&self) -> &'static str {
        match self {
            SchemeKind::Projective(_) => "exponential in d and k; bounded by the node budget",
            SchemeKind::Kcenter { .. } => "O(nk d)",
            SchemeKind::Full => "O(n)",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refs(pts: &[Vec<f64>]) -> Vec<&[f64]> {
        pts.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn kcenter_output_size_is_exact() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        for k in 0..12 {
            let s = SchemeKind::Kcenter { k };
            let c = s.checked_coreset(&refs(&pts), 0.1).unwrap();
            assert_eq!(c.len(), (k + 1).min(10));
            assert_eq!(Some(c.len()), s.size_bound(10));
        }
    }

    #[test]
    fn full_scheme_returns_everything() {
        let pts: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        assert_eq!(SchemeKind::Full.checked_coreset(&refs(&pts), 0.1).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn scheme_kinds_serialize_with_a_tag() {
        let s = SchemeKind::Kcenter { k: 3 };
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"kind":"kcenter","k":3}"#);
        assert_eq!(serde_json::from_str::<SchemeKind>(&text).unwrap(), s);
    }
}

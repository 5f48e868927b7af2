use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::linalg::random_orthonormal_frame;
use crate::geom::subspace::dist_to_set;
use crate::geom::AffineSubspace;
use crate::seed::mix;

/// Axis-aligned box spanned by the data; query offsets are drawn from it.
#[derive(Debug, Clone)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn of(points: &[&[f64]]) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptySet)?;
        let mut lo = first.to_vec();
        let mut hi = first.to_vec();
        for p in points {
            for (j, x) in p.iter().enumerate() {
                lo[j] = lo[j].min(*x);
                hi[j] = hi[j].max(*x);
            }
        }
        Ok(BoundingBox { lo, hi })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(self.lo.len(), |j, _| {
            if self.hi[j] > self.lo[j] {
                rng.random_range(self.lo[j]..=self.hi[j])
            } else {
                self.lo[j]
            }
        })
    }
}

pub trait QuerySampler: Sync {
    fn sample(&self, rng: &mut ChaCha20Rng, bbox: &BoundingBox) -> Result<Vec<AffineSubspace>>;
}

/// `k` flats with rotation-invariant random bases and offsets uniform in
/// the data box. Flat dimensions are drawn from `0..=max_dim`.
#[derive(Debug, Clone)]
pub struct RandomFlats {
    pub k: usize,
    pub ambient: usize,
    pub max_dim: usize,
}

impl RandomFlats {
    /// Flats of every proper dimension.
    pub fn new(k: usize, ambient: usize) -> Self {
        RandomFlats {
            k,
            ambient,
            max_dim: ambient.saturating_sub(1),
        }
    }

    /// Point queries.
    pub fn points(k: usize, ambient: usize) -> Self {
        RandomFlats { k, ambient, max_dim: 0 }
    }
}

impl QuerySampler for RandomFlats {
    fn sample(&self, rng: &mut ChaCha20Rng, bbox: &BoundingBox) -> Result<Vec<AffineSubspace>> {
        (0..self.k)
            .map(|_| {
                let j = rng.random_range(0..=self.max_dim);
                let basis = random_orthonormal_frame(rng, self.ambient, j);
                AffineSubspace::new(basis, bbox.sample(rng))
            })
            .collect()
    }
}

/// Fixed list of queries, cycled through.
pub struct FixedQueries(pub Vec<Vec<AffineSubspace>>);

impl QuerySampler for FixedQueries {
    fn sample(&self, rng: &mut ChaCha20Rng, _: &BoundingBox) -> Result<Vec<AffineSubspace>> {
        let i = rng.random_range(0..self.0.len());
        Ok(self.0[i].clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub max_ratio: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

/// `dist_inf(P, S) / dist_inf(C, S)`; `0/0` counts as 1.
pub fn linf_ratio(points: &[&[f64]], coreset: &[usize], query: &[AffineSubspace]) -> Result<f64> {
    let mut full = 0.0f64;
    for p in points {
        full = full.max(dist_to_set(p, query)?);
    }
    let mut part = 0.0f64;
    for &i in coreset {
        part = part.max(dist_to_set(points[i], query)?);
    }
    Ok(if full == 0.0 {
        1.0
    } else if part == 0.0 {
        f64::INFINITY
    } else {
        full / part
    })
}

/// Largest ratio over `trials` sampled queries. Query `i` uses a seed
/// derived from `(seed, i)`, so the result does not depend on threading.
/// Queries the sampler cannot build are skipped and counted.
pub fn brute_force_linf_check<S: QuerySampler>(
    points: &[&[f64]],
    coreset: &[usize],
    sampler: &S,
    trials: usize,
    seed: u64,
) -> Result<OracleReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("oracle needs at least one trial".into()));
    }
    if coreset.iter().any(|&i| i >= points.len()) {
        return Err(Error::InvalidParameter("coreset index outside the point set".into()));
    }
    let bbox = BoundingBox::of(points)?;
    let ratios: Vec<Option<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha20Rng::seed_from_u64(mix(&[seed, t as u64]));
            let query = sampler.sample(&mut rng, &bbox).ok()?;
            linf_ratio(points, coreset, &query).ok()
        })
        .collect();
    let evaluated = ratios.iter().flatten().count();
    Ok(OracleReport {
        max_ratio: ratios.iter().flatten().copied().fold(1.0, f64::max),
        evaluated,
        skipped: trials - evaluated,
    })
}

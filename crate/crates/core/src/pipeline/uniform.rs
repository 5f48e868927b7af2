use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::geom::WeightedPointSet;

/// `m` i.i.d. uniform draws, each carrying `Σw/m`. Repeated draws merge.
pub fn uniform_baseline(set: &WeightedPointSet, m: usize, seed: u64) -> Result<WeightedPointSet> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    if m == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let share = set.total_weight() / m as f64;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for _ in 0..m {
        *counts.entry(rng.random_range(0..set.len())).or_insert(0) += 1;
    }
    let idx: Vec<usize> = counts.keys().copied().collect();
    let w = counts.values().map(|&c| c as f64 * share).collect();
    set.reweighted_subset(&idx, w)
}

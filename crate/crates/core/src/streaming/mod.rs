//! Merge-reduce coresets over a stream.

pub mod halving;
pub mod lambert;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::WeightedPointSet;
use crate::seed::mix;

pub use halving::{check_gmm_halving, gmm_u, HalvingFunction};
pub use lambert::{halving_threshold, lambert_w_minus1, HalvingThreshold};

const DELTA_FLOOR: f64 = 1e-300;

/// Coreset construction used at every tree node and for the final query.
/// Must return a set with the same total weight as its input.
pub trait Reducer: Sync {
    fn reduce(&self, set: &WeightedPointSet, epsilon: f64, delta: f64, seed: u64) -> Result<WeightedPointSet>;
}

/// Returns its input unchanged.
pub struct Identity;

impl Reducer for Identity {
    fn reduce(&self, set: &WeightedPointSet, _: f64, _: f64, _: u64) -> Result<WeightedPointSet> {
        Ok(set.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub halving: HalvingFunction,
    /// Close tree `h` after `2^{h-1}·s(h)` points and start tree `h+1`.
    pub rollover: bool,
    /// Check the GMM halving condition whenever a tree starts.
    pub strict: bool,
    pub seed: u64,
}

impl StreamConfig {
    pub fn new(epsilon: f64, delta: f64, halving: HalvingFunction) -> Result<Self> {
        let cfg = StreamConfig {
            epsilon,
            delta,
            halving,
            rollover: true,
            strict: false,
            seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) || !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter("stream needs ε > 0 and δ in (0,1)".into()));
        }
        self.halving.validate()
    }
}

/// Merge-reduce buckets. After a reducer error the buckets consumed by the
/// failed merge are gone, so the state should be discarded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamState {
    pub config: StreamConfig,
    dim: Option<usize>,
    /// Index of the tree under construction, from 1.
    h: usize,
    bucket_size: usize,
    /// `buckets[0]` is the input buffer, `buckets[i]` a level-`i` coreset.
    buckets: Vec<Option<WeightedPointSet>>,
    roots: Vec<WeightedPointSet>,
    points_seen: u64,
    weight_seen: f64,
    tree_points: u64,
    nodes_built: u64,
    peak_stored: usize,
}

impl StreamState {
    pub fn new(config: StreamConfig) -> Result<Self> {
        config.validate()?;
        let mut st = StreamState {
            bucket_size: 0,
            config,
            dim: None,
            h: 0,
            buckets: Vec::new(),
            roots: Vec::new(),
            points_seen: 0,
            weight_seen: 0.0,
            tree_points: 0,
            nodes_built: 0,
            peak_stored: 0,
        };
        st.start_tree()?;
        Ok(st)
    }

    fn start_tree(&mut self) -> Result<()> {
        self.h += 1;
        if self.config.strict {
            check_gmm_halving(&self.config.halving, self.h)?;
        }
        self.bucket_size = self.config.halving.size(self.h)?;
        self.tree_points = 0;
        Ok(())
    }

    fn tree_budget(&self) -> u64 {
        let shift = (self.h - 1).min(63) as u32;
        (self.bucket_size as u64).saturating_mul(1u64 << shift)
    }

    pub fn tree_index(&self) -> usize {
        self.h
    }

    pub fn points_seen(&self) -> u64 {
        self.points_seen
    }

    pub fn bucket_size(&self) -> usize {
        self.bucket_size
    }

    pub fn peak_stored(&self) -> usize {
        self.peak_stored
    }

    /// Levels holding a non-empty set, level 0 being the buffer.
    pub fn live_levels(&self) -> Vec<usize> {
        self.buckets
            .iter()
            .enumerate()
            .filter(|(_, b)| b.as_ref().is_some_and(|s| !s.is_empty()))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn bucket(&self, level: usize) -> Option<&WeightedPointSet> {
        self.buckets.get(level).and_then(Option::as_ref)
    }

    pub fn roots(&self) -> &[WeightedPointSet] {
        &self.roots
    }

    pub fn stored_points(&self) -> usize {
        self.buckets.iter().flatten().map(WeightedPointSet::len).sum::<usize>()
            + self.roots.iter().map(WeightedPointSet::len).sum::<usize>()
    }

    pub fn stored_weight(&self) -> f64 {
        self.buckets.iter().flatten().map(WeightedPointSet::total_weight).sum::<f64>()
            + self.roots.iter().map(WeightedPointSet::total_weight).sum::<f64>()
    }

    pub fn weight_seen(&self) -> f64 {
        self.weight_seen
    }

    pub fn insert<R: Reducer + ?Sized>(&mut self, p: &[f64], reducer: &R) -> Result<Option<usize>> {
        self.insert_weighted(p, 1.0, reducer)
    }

    /// Adds one point. Returns the level that received a new coreset when
    /// the buffer filled up.
    pub fn insert_weighted<R: Reducer + ?Sized>(&mut self, p: &[f64], w: f64, reducer: &R) -> Result<Option<usize>> {
        let dim = *self.dim.get_or_insert(p.len());
        if self.buckets.is_empty() {
            self.buckets.push(None);
        }
        if self.buckets[0].is_none() {
            self.buckets[0] = Some(WeightedPointSet::empty(dim)?);
        }
        self.buckets[0].as_mut().expect("just filled").push(p, w)?;
        self.points_seen += 1;
        self.weight_seen += w;
        self.tree_points += 1;
        self.peak_stored = self.peak_stored.max(self.stored_points());

        let mut placed = None;
        if self.buckets[0].as_ref().map_or(0, WeightedPointSet::len) >= self.bucket_size {
            placed = Some(self.cascade(reducer)?);
        }
        if self.config.rollover && self.tree_points >= self.tree_budget() {
            self.close_tree(reducer)?;
        }
        Ok(placed)
    }

    fn level_params(&self) -> (f64, f64) {
        let h = self.h as f64;
        let delta = (self.config.delta / 4f64.powf(h)).max(DELTA_FLOOR);
        (self.config.epsilon / h, delta)
    }

    fn cascade<R: Reducer + ?Sized>(&mut self, reducer: &R) -> Result<usize> {
        let (eps, delta) = self.level_params();
        let dim = self.dim.expect("set on first insert");
        let mut carry: Option<WeightedPointSet> = None;
        let mut i = 0;
        while let Some(Some(bucket)) = self.buckets.get_mut(i).map(Option::take) {
            let merged = match carry.take() {
                Some(c) => c.union(&bucket)?,
                None => bucket,
            };
            let seed = mix(&[self.config.seed, self.h as u64, i as u64, self.nodes_built]);
            self.nodes_built += 1;
            let out = reducer.reduce(&merged, eps, delta, seed).map_err(|e| Error::InnerScheme {
                tree: self.h,
                level: i,
                source: Box::new(e),
            })?;
            carry = Some(out);
            i += 1;
        }
        if self.buckets.len() <= i {
            self.buckets.resize(i + 1, None);
        }
        self.buckets[i] = match carry {
            Some(c) => Some(c),
            None => Some(WeightedPointSet::empty(dim)?),
        };
        self.peak_stored = self.peak_stored.max(self.stored_points());
        Ok(i)
    }

    /// Freezes the current tree into one root and starts the next tree.
    fn close_tree<R: Reducer + ?Sized>(&mut self, reducer: &R) -> Result<()> {
        let live: Vec<WeightedPointSet> = self.buckets.iter_mut().filter_map(Option::take).filter(|s| !s.is_empty()).collect();
        self.buckets.clear();
        let root = match live.len() {
            0 => None,
            1 => live.into_iter().next(),
            _ => {
                let (eps, delta) = self.level_params();
                let mut it = live.into_iter();
                let first = it.next().unwrap();
                let merged = it.try_fold(first, |acc, s| acc.union(&s))?;
                let seed = mix(&[self.config.seed, self.h as u64, u64::MAX, self.nodes_built]);
                self.nodes_built += 1;
                Some(reducer.reduce(&merged, eps, delta, seed).map_err(|e| Error::InnerScheme {
                    tree: self.h,
                    level: usize::MAX,
                    source: Box::new(e),
                })?)
            }
        };
        if let Some(r) = root {
            self.roots.push(r);
        }
        self.start_tree()
    }

    /// Everything stored, unreduced.
    pub fn summary(&self) -> Result<WeightedPointSet> {
        let dim = self.dim.ok_or(Error::EmptyStream)?;
        let mut out = WeightedPointSet::empty(dim)?;
        for s in self.roots.iter().chain(self.buckets.iter().flatten()) {
            out = out.union(s)?;
        }
        Ok(out)
    }

    /// One final reduction over all roots and live buckets at `(ε, δ)`.
    pub fn query<R: Reducer + ?Sized>(&self, reducer: &R) -> Result<WeightedPointSet> {
        if self.points_seen == 0 {
            return Err(Error::EmptyStream);
        }
        let all = self.summary()?;
        let seed = mix(&[self.config.seed, u64::MAX, self.points_seen]);
        reducer
            .reduce(&all, self.config.epsilon, self.config.delta, seed)
            .map_err(|e| Error::InnerScheme {
                tree: self.h,
                level: usize::MAX,
                source: Box::new(e),
            })
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let st: StreamState = serde_json::from_str(&text)?;
        st.config.validate()?;
        Ok(st)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Keeps the first half (rounded up), doubling weights, and gives the
    /// rounding leftover to the first point.
    struct KeepFirstHalf;

    impl Reducer for KeepFirstHalf {
        fn reduce(&self, set: &WeightedPointSet, _: f64, _: f64, _: u64) -> Result<WeightedPointSet> {
            let keep = set.len().div_ceil(2);
            let idx: Vec<usize> = (0..keep).collect();
            let sub: f64 = idx.iter().map(|&i| set.weight(i)).sum();
            let scale = set.total_weight() / sub;
            let w = idx.iter().map(|&i| set.weight(i) * scale).collect();
            set.reweighted_subset(&idx, w)
        }
    }

    /// Identity with an injected multiplicative weight error.
    struct Inflate;

    impl Reducer for Inflate {
        fn reduce(&self, set: &WeightedPointSet, eps: f64, _: f64, _: u64) -> Result<WeightedPointSet> {
            let mut out = set.clone();
            out.scale_weights(1.0 + eps)?;
            Ok(out)
        }
    }

    struct Fails;

    impl Reducer for Fails {
        fn reduce(&self, _: &WeightedPointSet, _: f64, _: f64, _: u64) -> Result<WeightedPointSet> {
            Err(Error::SchemeFailure("boom".into()))
        }
    }

    fn constant(size: usize, rollover: bool) -> StreamState {
        let mut cfg = StreamConfig::new(0.2, 0.1, HalvingFunction::Constant { size }).unwrap();
        cfg.rollover = rollover;
        StreamState::new(cfg).unwrap()
    }

    #[test]
    fn one_point() {
        let mut st = constant(4, true);
        assert_eq!(st.insert(&[1.0, 2.0], &Identity).unwrap(), None);
        assert_eq!(st.live_levels(), vec![0]);
        let q = st.query(&Identity).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q.weight(0), 1.0);
        assert_eq!(q.point(0), &[1.0, 2.0]);
    }

    #[test]
    fn empty_stream_query_fails() {
        assert!(matches!(constant(3, true).query(&Identity), Err(Error::EmptyStream)));
    }

    #[test]
    fn eight_points_leave_one_level_two_bucket() {
        let mut st = constant(4, false);
        for i in 0..8 {
            st.insert(&[i as f64], &KeepFirstHalf).unwrap();
        }
        assert_eq!(st.live_levels(), vec![2]);
        assert_eq!(st.bucket(2).unwrap().len(), 2);
        assert!((st.stored_weight() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn binary_counter_law() {
        for s in [1usize, 3, 5] {
            let mut st = constant(s, false);
            for n in 1..=200u64 {
                st.insert(&[n as f64], &KeepFirstHalf).unwrap();
                let blocks = n / s as u64;
                let want: Vec<usize> = (0..64).filter(|b| blocks >> b & 1 == 1).map(|b| b + 1).collect();
                let mut got = st.live_levels();
                if n % s as u64 != 0 {
                    assert_eq!(got.remove(0), 0);
                }
                assert_eq!(got, want, "s={s} n={n}");
                assert!(st.bucket(0).map_or(0, |b| b.len()) < s);
            }
        }
    }

    #[test]
    fn identity_passthrough_is_lossless() {
        let mut st = constant(3, true);
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, (i % 7) as f64]).collect();
        for p in &pts {
            st.insert(p, &Identity).unwrap();
        }
        let q = st.query(&Identity).unwrap();
        let mut got: Vec<Vec<f64>> = q.iter().map(|(p, w)| {
            assert_eq!(w, 1.0);
            p.to_vec()
        }).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, pts);
        assert!(st.tree_index() > 1);
    }

    #[test]
    fn trees_roll_over_on_budget() {
        let mut st = constant(2, true);
        // tree h takes 2^{h-1}·2 points: 2, 4, 8, ...
        for _ in 0..2 {
            st.insert(&[0.0], &KeepFirstHalf).unwrap();
        }
        assert_eq!((st.tree_index(), st.roots().len()), (2, 1));
        for _ in 0..4 {
            st.insert(&[0.0], &KeepFirstHalf).unwrap();
        }
        assert_eq!((st.tree_index(), st.roots().len()), (3, 2));
        for _ in 0..8 {
            st.insert(&[0.0], &KeepFirstHalf).unwrap();
        }
        assert_eq!((st.tree_index(), st.roots().len()), (4, 3));
        assert_eq!(st.live_levels(), Vec::<usize>::new());
        assert!((st.stored_weight() - 14.0).abs() < 1e-12);
    }

    #[test]
    fn weight_is_conserved_through_reductions() {
        let mut st = constant(4, true);
        for n in 1..=300 {
            st.insert(&[n as f64, 1.0], &KeepFirstHalf).unwrap();
            let q = st.query(&KeepFirstHalf).unwrap();
            assert!((q.total_weight() - n as f64).abs() <= 1e-9 * n as f64);
        }
        // memory stays logarithmic
        assert!(st.peak_stored() <= 4 * (st.tree_index() + 2) * 2);
    }

    #[test]
    fn per_level_error_compounds_below_two_epsilon() {
        for eps in [0.1, 0.25, 0.5] {
            let mut cfg = StreamConfig::new(eps, 0.1, HalvingFunction::Constant { size: 2 }).unwrap();
            cfg.rollover = true;
            let mut st = StreamState::new(cfg).unwrap();
            for n in 1..=2000u64 {
                st.insert(&[0.0], &Inflate).unwrap();
                let ratio = st.stored_weight() / n as f64;
                assert!(ratio <= 1.0 + 2.0 * eps + 1e-12, "eps={eps} n={n} ratio={ratio}");
            }
        }
    }

    #[test]
    fn inner_failures_name_the_tree_and_level() {
        let mut st = constant(2, false);
        st.insert(&[0.0], &Fails).unwrap();
        match st.insert(&[0.0], &Fails) {
            Err(Error::InnerScheme { tree: 1, level: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn strict_mode_rejects_the_stated_bucket_size() {
        let mut cfg = StreamConfig::new(
            0.1,
            0.1,
            HalvingFunction::Theoretical {
                epsilon: 0.1,
                delta: 0.1,
                g: 1.0,
                m_bound: 100.0,
            },
        )
        .unwrap();
        cfg.strict = true;
        assert!(matches!(StreamState::new(cfg), Err(Error::HalvingCheck { h: 1, .. })));
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        let mut a = constant(3, true);
        for i in 0..17 {
            a.insert(&[i as f64, -(i as f64)], &KeepFirstHalf).unwrap();
        }
        a.save_checkpoint(&path).unwrap();
        let mut b = StreamState::load_checkpoint(&path).unwrap();
        assert_eq!(a, b);
        for i in 17..40 {
            a.insert(&[i as f64, 0.5], &KeepFirstHalf).unwrap();
            b.insert(&[i as f64, 0.5], &KeepFirstHalf).unwrap();
        }
        assert_eq!(a.query(&KeepFirstHalf).unwrap(), b.query(&KeepFirstHalf).unwrap());
    }
}

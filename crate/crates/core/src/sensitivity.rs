//! Sensitivity bounds obtained by repeatedly peeling ℓ∞ coresets.
//!
//! Callers pass points already mapped into the space where the scheme's
//! guarantee holds (for GMMs, the padded points in `R^{2d+1}`).

use crate::error::{Error, Result};
use crate::geom::WeightedPointSet;
use crate::projclust::LinfScheme;

pub const DEFAULT_PEEL_EPSILON: f64 = 1.0 / 3.0;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Largest duplication count accepted by the weighted peel. Above this the
/// virtual clock loses integer precision as an `f64`.
const MAX_COPIES: f64 = 9.007_199_254_740_992e15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityConfig {
    pub epsilon: f64,
    pub delta: f64,
}

impl SensitivityConfig {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("peel epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0,1), got {delta}")));
        }
        Ok(SensitivityConfig { epsilon, delta })
    }
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            epsilon: DEFAULT_PEEL_EPSILON,
            delta: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMap {
    pub values: Vec<f64>,
    pub total: f64,
    /// Size of the ℓ∞ coreset returned in each peel round.
    pub round_sizes: Vec<usize>,
}

impl SensitivityMap {
    fn from_values(values: Vec<f64>, round_sizes: Vec<usize>) -> Self {
        let total = values.iter().sum();
        SensitivityMap {
            values,
            total,
            round_sizes,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_round_size(&self) -> usize {
        self.round_sizes.iter().copied().max().unwrap_or(0)
    }
}

/// `ln(m/(i-1)) + 1/(2m) - 1/(2(i-1)) + 1/(i-1)^2`, an upper estimate of
/// `Σ_{j=i}^{m} 1/j`.
pub fn harmonic_window(i: u64, m: u64) -> Result<f64> {
    if i < 2 || m < i {
        return Err(Error::InvalidRange { i, m });
    }
    let a = (i - 1) as f64;
    let mf = m as f64;
    let span = (m - i + 1) as f64;
    Ok((span / a).ln_1p() + 0.5 / mf - 0.5 / a + 1.0 / (a * a))
}

/// Upper estimate of `H_m` used for the first virtual round.
fn first_window(m: u64) -> f64 {
    let mf = m as f64;
    mf.ln() + EULER_GAMMA + 0.5 / mf
}

/// Doubly linked list over `0..n` supporting O(1) removal.
struct Alive {
    next: Vec<usize>,
    prev: Vec<usize>,
    head: usize,
    len: usize,
}

impl Alive {
    const NIL: usize = usize::MAX;

    fn new(n: usize) -> Self {
        Alive {
            next: (1..=n).map(|i| if i == n { Self::NIL } else { i }).collect(),
            prev: (0..n).map(|i| if i == 0 { Self::NIL } else { i - 1 }).collect(),
            head: if n == 0 { Self::NIL } else { 0 },
            len: n,
        }
    }

    fn remove(&mut self, i: usize) {
        let (p, q) = (self.prev[i], self.next[i]);
        if p == Self::NIL {
            self.head = q;
        } else {
            self.next[p] = q;
        }
        if q != Self::NIL {
            self.prev[q] = p;
        }
        self.len -= 1;
    }

    fn indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len);
        let mut i = self.head;
        while i != Self::NIL {
            out.push(i);
            i = self.next[i];
        }
        out
    }
}

/// Runs the scheme on the live points and maps its answer back to global
/// indices, deduplicated and sorted.
fn peel_round<S: LinfScheme + ?Sized>(
    points: &[&[f64]],
    live: &[usize],
    scheme: &S,
    delta: f64,
) -> Result<Vec<usize>> {
    let view: Vec<&[f64]> = live.iter().map(|&i| points[i]).collect();
    let mut picked: Vec<usize> = scheme.checked_coreset(&view, delta)?.into_iter().map(|j| live[j]).collect();
    picked.sort_unstable();
    picked.dedup();
    Ok(picked)
}

/// Peels coresets off an unweighted set; points removed in round `i` get
/// `(1+ε)/i`.
pub fn sensitivity_unweighted<S: LinfScheme + ?Sized>(
    points: &[&[f64]],
    cfg: &SensitivityConfig,
    scheme: &S,
) -> Result<SensitivityMap> {
    if points.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = points.len();
    let delta = cfg.delta / n as f64;
    let mut alive = Alive::new(n);
    let mut values = vec![0.0; n];
    let mut sizes = Vec::new();
    let mut round = 1u64;
    while alive.len > 0 {
        let picked = peel_round(points, &alive.indices(), scheme, delta)?;
        let s = (1.0 + cfg.epsilon) / round as f64;
        for &p in &picked {
            values[p] = s;
            alive.remove(p);
        }
        sizes.push(picked.len());
        round += 1;
    }
    Ok(SensitivityMap::from_values(values, sizes))
}

/// Duplication counts `⌈w(p)/(ε·w_min)⌉`.
pub fn copy_counts(set: &WeightedPointSet, epsilon: f64) -> Result<Vec<u64>> {
    let w_min = set.min_weight()?;
    set.weights()
        .iter()
        .map(|&w| {
            let h = (w / (epsilon * w_min)).ceil();
            if h > MAX_COPIES {
                Err(Error::InvalidParameter(format!(
                    "weight ratio too large: {h} copies for one point"
                )))
            } else {
                Ok(h.max(1.0) as u64)
            }
        })
        .collect()
}

/// Simulates the unweighted peel on the multiset holding `h(p)` copies of
/// each point, fast-forwarding over runs of rounds with the same coreset.
pub fn sensitivity_weighted<S: LinfScheme + ?Sized>(
    set: &WeightedPointSet,
    cfg: &SensitivityConfig,
    scheme: &S,
) -> Result<SensitivityMap> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = set.len();
    let mut h = copy_counts(set, cfg.epsilon)?;
    let points: Vec<&[f64]> = (0..n).map(|i| set.point(i)).collect();
    let delta = cfg.delta / n as f64;
    let factor = (1.0 + cfg.epsilon).powi(2);
    let mut alive = Alive::new(n);
    let mut values = vec![0.0; n];
    let mut sizes = Vec::new();
    let mut i = 1u64;
    while alive.len > 0 {
        let picked = peel_round(&points, &alive.indices(), scheme, delta)?;
        let q = *picked.iter().min_by_key(|&&p| (h[p], p)).expect("checked non-empty");
        let hq = h[q];
        let m = i + hq - 1;
        let inc = factor * if i == 1 { first_window(m) } else { harmonic_window(i, m)? };
        for &p in &picked {
            values[p] += inc;
            h[p] -= hq;
            if h[p] == 0 {
                alive.remove(p);
            }
        }
        sizes.push(picked.len());
        i = m + 1;
    }
    Ok(SensitivityMap::from_values(values, sizes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::testing::random_gmm;
    use crate::gmm::{embed_set, lift_to_smm, phi_cost, point_phi, z_normalizer, PhiConfig};
    use crate::projclust::{ProjectiveParams, SchemeKind};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    /// Returns the first live point only.
    struct OneAtATime;

    impl LinfScheme for OneAtATime {
        fn coreset(&self, points: &[&[f64]], _: f64) -> Result<Vec<usize>> {
            Ok(if points.is_empty() { Vec::new() } else { vec![0] })
        }
        fn name(&self) -> &'static str {
            "one"
        }
        fn size_bound(&self, _: usize) -> Option<usize> {
            Some(1)
        }
        fn time_descriptor(&self) -> &'static str {
            "O(1)"
        }
    }

    fn direct_sum(i: u64, m: u64) -> f64 {
        (i..=m).rev().map(|j| 1.0 / j as f64).sum()
    }

    fn harmonic(n: usize) -> f64 {
        direct_sum(1, n as u64)
    }

    fn line(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| vec![i as f64, ((i * 37) % 11) as f64]).collect()
    }

    fn refs(pts: &[Vec<f64>]) -> Vec<&[f64]> {
        pts.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn window_rejects_bad_ranges() {
        assert!(harmonic_window(1, 5).is_err());
        assert!(harmonic_window(5, 4).is_err());
        assert!(harmonic_window(2, 2).is_ok());
    }

    #[test]
    fn window_small_cases() {
        let w = harmonic_window(2, 2).unwrap();
        let f = w - 1.0;
        let err = f - 0.5;
        assert!(err > -1.0 && err <= 0.25);
        let w = harmonic_window(7, 7).unwrap();
        assert!(w >= 1.0 / 7.0);
    }

    #[test]
    fn window_long_range_is_close() {
        let f = harmonic_window(2, 10_000).unwrap() - 1.0;
        let err = f - direct_sum(2, 10_000);
        assert!(err > -1.0 && err <= 1e-8);
        // Euler–Maclaurin puts the gap near 1/(12(i-1)^2) - 1/(12 m^2)
        assert!((err + 1.0 / 12.0).abs() < 1e-2, "err={err}");
    }

    #[test]
    fn first_window_bounds_harmonic_numbers() {
        for m in 1..2000u64 {
            let hm = direct_sum(1, m);
            let est = first_window(m);
            assert!(est >= hm && est - hm <= 1.0 / (m * m) as f64 + 1e-12, "m={m}");
        }
    }

    #[test]
    fn whole_set_in_one_round() {
        let pts = line(9);
        let cfg = SensitivityConfig::new(0.5, 0.1).unwrap();
        let s = sensitivity_unweighted(&refs(&pts), &cfg, &SchemeKind::Full).unwrap();
        assert!(s.values.iter().all(|&v| v == 1.5));
        assert!((s.total - 13.5).abs() < 1e-12);
        assert_eq!(s.round_sizes, vec![9]);
    }

    #[test]
    fn singleton_rounds_give_the_harmonic_chain() {
        let pts = line(20);
        let cfg = SensitivityConfig::new(0.25, 0.1).unwrap();
        let s = sensitivity_unweighted(&refs(&pts), &cfg, &OneAtATime).unwrap();
        for (i, v) in s.values.iter().enumerate() {
            assert!((v - 1.25 / (i + 1) as f64).abs() < 1e-15);
        }
        assert!((s.total - 1.25 * harmonic(20)).abs() < 1e-12);
    }

    #[test]
    fn gonzalez_one_center_total() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let cfg = SensitivityConfig::default();
        let s = sensitivity_unweighted(&refs(&pts), &cfg, &SchemeKind::Kcenter { k: 1 }).unwrap();
        assert_eq!(s.max_round_size(), 2);
        assert!(s.total <= 2.0 * (1.0 + cfg.epsilon) * harmonic(100) + 1e-9);
        assert!(s.values.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn heavy_point_dominates() {
        let mut pts = Vec::new();
        let mut w = Vec::new();
        for i in 0..30 {
            pts.push(vec![i as f64, (i % 4) as f64]);
            w.push(1.0);
        }
        w[13] = 1e6;
        let set = WeightedPointSet::new(pts, w).unwrap();
        let s = sensitivity_weighted(&set, &SensitivityConfig::default(), &SchemeKind::Kcenter { k: 2 }).unwrap();
        let top = (0..30).max_by(|&a, &b| s.values[a].total_cmp(&s.values[b])).unwrap();
        assert_eq!(top, 13);
    }

    #[test]
    fn single_point_hand_trace() {
        let set = WeightedPointSet::new(vec![vec![1.0, 2.0]], vec![3.0]).unwrap();
        let cfg = SensitivityConfig::new(0.5, 0.1).unwrap();
        let s = sensitivity_weighted(&set, &cfg, &SchemeKind::Full).unwrap();
        // h = ceil(3 / 1.5) = 2, one round covering virtual rounds 1..=2
        let want = 2.25 * (2f64.ln() + EULER_GAMMA + 0.25);
        assert!((s.values[0] - want).abs() < 1e-12);
    }

    #[test]
    fn zero_copies_are_impossible() {
        let set = WeightedPointSet::new(vec![vec![0.0], vec![1.0]], vec![1.0, 1e-3]).unwrap();
        let h = copy_counts(&set, 0.5).unwrap();
        assert_eq!(h, vec![2000, 2]);
    }

    /// The unweighted peel run on the explicit multiset, the scheme seeing one copy
    /// of each distinct live point. Returns `Σ_copies 1/round` per point.
    fn explicit_multiset(set: &WeightedPointSet, eps: f64, scheme: &dyn LinfScheme) -> Vec<f64> {
        let mut copies = copy_counts(set, eps).unwrap();
        let n = set.len();
        let points: Vec<&[f64]> = (0..n).map(|i| set.point(i)).collect();
        let mut acc = vec![0.0; n];
        let mut round = 1u64;
        loop {
            let live: Vec<usize> = (0..n).filter(|&i| copies[i] > 0).collect();
            if live.is_empty() {
                return acc;
            }
            for p in peel_round(&points, &live, scheme, 0.1).unwrap() {
                acc[p] += 1.0 / round as f64;
                copies[p] -= 1;
            }
            round += 1;
        }
    }

    fn check_against_multiset(set: &WeightedPointSet, eps: f64, scheme: &dyn LinfScheme) {
        let cfg = SensitivityConfig::new(eps, 0.1).unwrap();
        let fast = sensitivity_weighted(set, &cfg, scheme).unwrap();
        let slow = explicit_multiset(set, eps, scheme);
        let f2 = (1.0 + eps).powi(2);
        // the first round overshoots H_m by at most 1/m^2 <= 1, and each later
        // window by at most 1/(i-1)^2 + 1/m^2, which sums below 2·π²/6
        let slack = f2 * (1.0 + std::f64::consts::PI.powi(2) / 3.0);
        for p in 0..set.len() {
            let lo = f2 * slow[p];
            assert!(fast.values[p] >= lo * (1.0 - 1e-12), "p={p}: {} < {lo}", fast.values[p]);
            assert!(fast.values[p] <= lo + slack, "p={p}: {} > {}", fast.values[p], lo + slack);
        }
    }

    #[test]
    fn equal_weights_singleton_scheme_matches_unweighted() {
        let pts = line(12);
        let set = WeightedPointSet::unweighted(pts.clone()).unwrap();
        check_against_multiset(&set, 0.5, &OneAtATime);
        // ε ≥ 1 gives one copy per point, so the virtual clock is the real one
        let cfg = SensitivityConfig::new(1.0, 0.1).unwrap();
        let w = sensitivity_weighted(&set, &cfg, &OneAtATime).unwrap();
        let u = sensitivity_unweighted(&refs(&pts), &cfg, &OneAtATime).unwrap();
        assert!((w.values[0] - 4.0 * first_window(1)).abs() < 1e-12);
        for p in 1..12 {
            let i = (p + 1) as f64;
            let gap = w.values[p] - 2.0 * u.values[p];
            assert!(gap >= 0.0 && gap <= 4.0 * (1.0 / (p * p) as f64 + 1.0 / (i * i)) + 1e-12);
        }
    }

    #[test]
    fn weighted_agrees_with_explicit_copies() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for trial in 0..6 {
            let n = 8 + trial * 3;
            let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..30.0)).collect();
            let set = WeightedPointSet::new(pts, w).unwrap();
            check_against_multiset(&set, 0.5, &SchemeKind::Kcenter { k: 2 });
            check_against_multiset(&set, 1.0 / 3.0, &OneAtATime);
        }
    }

    #[test]
    fn dominance_for_lifted_gaussian_costs() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let xi = PhiConfig::new(0.05).unwrap();
        let mut checked = 0;
        for _ in 0..10 {
            let n = 25;
            let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)]).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..3.0)).collect();
            let set = WeightedPointSet::new(pts, w).unwrap();
            let lifted = embed_set(&set);
            let scheme = SchemeKind::Projective(ProjectiveParams::new(1, 1.0 / 3.0));
            let s = sensitivity_weighted(&lifted, &SensitivityConfig::default(), &scheme).unwrap();
            for _ in 0..10 {
                let theta = random_gmm(&mut rng, 1, 2, xi.xi_prime() * 1.5);
                let z = z_normalizer(&theta, &xi);
                let total = phi_cost(&set, &theta, &xi).unwrap();
                // the lift has to exist for the query family in use
                lift_to_smm(&theta, &xi).unwrap();
                for p in 0..n {
                    let share = set.weight(p) * point_phi(set.point(p), &theta, &z, &xi) / total;
                    assert!(share <= s.values[p] * (1.0 + 1e-9), "share {share} > s {}", s.values[p]);
                    checked += 1;
                }
            }
        }
        assert!(checked >= 1000);
    }

    #[test]
    fn exhaustive_window_bound() {
        // prefix sums from the top so every window is a difference of two
        let top = 2000u64;
        let mut tail = vec![0.0f64; top as usize + 2];
        for j in (1..=top).rev() {
            tail[j as usize] = tail[j as usize + 1] + 1.0 / j as f64;
        }
        for i in 2..=top {
            for m in i..=top {
                let sum = tail[i as usize] - tail[m as usize + 1];
                let a = (i - 1) as f64;
                let err = harmonic_window(i, m).unwrap() - 1.0 / (a * a) - sum;
                assert!(err > -1.0 / (a * a) - 1e-12 && err <= 1.0 / (m * m) as f64 + 1e-12, "i={i} m={m}");
            }
        }
    }

    proptest! {
        #[test]
        fn unweighted_values_are_peel_fractions(n in 1usize..40, k in 0usize..4, seed in 0u64..1000) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
            let cfg = SensitivityConfig::new(0.5, 0.1).unwrap();
            let s = sensitivity_unweighted(&refs(&pts), &cfg, &SchemeKind::Kcenter { k }).unwrap();
            for v in &s.values {
                let i = 1.5 / v;
                prop_assert!(*v > 0.0);
                prop_assert!((i - i.round()).abs() < 1e-9 && i.round() >= 1.0);
            }
            prop_assert!((s.total - s.values.iter().sum::<f64>()).abs() <= 1e-10);
            prop_assert!(s.total <= 1.5 * s.max_round_size() as f64 * harmonic(n) + 1e-9);
            prop_assert!(s.round_sizes.len() <= n);
        }

        #[test]
        fn weighted_values_positive(n in 1usize..30, seed in 0u64..1000) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>()]).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
            let set = WeightedPointSet::new(pts, w).unwrap();
            let s = sensitivity_weighted(&set, &SensitivityConfig::default(), &SchemeKind::Kcenter { k: 1 }).unwrap();
            prop_assert!(s.values.iter().all(|&v| v > 0.0));
            prop_assert!((s.total - s.values.iter().sum::<f64>()).abs() <= 1e-10 * s.total.max(1.0));
        }
    }
}

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PASSTHROUGH: usize = 64;
pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;

/// Integer grid the projective construction runs on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Coordinates must lie in `[-bound, bound]`.
    pub bound: i64,
    /// Round coordinates to the nearest integer before construction.
    pub quantize: bool,
}

impl GridConfig {
    pub fn new(bound: i64, quantize: bool) -> Result<Self> {
        if bound < 2 {
            return Err(Error::InvalidParameter(format!("grid bound must be >= 2, got {bound}")));
        }
        Ok(GridConfig { bound, quantize })
    }

    /// Smallest bound (at least 2) that contains every coordinate.
    pub fn fit(points: &[&[f64]], quantize: bool) -> Self {
        let max = points
            .iter()
            .flat_map(|p| p.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()));
        let max = if quantize { max.round() } else { max.ceil() };
        GridConfig {
            bound: (max as i64).max(2),
            quantize,
        }
    }

    /// Applies quantization and checks the bound.
    pub fn prepare(&self, points: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let limit = self.bound as f64;
        points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let q: Vec<f64> = if self.quantize {
                    p.iter().map(|x| x.round()).collect()
                } else {
                    p.to_vec()
                };
                if q.iter().any(|x| x.abs() > limit) {
                    Err(Error::GridBoundExceeded {
                        index: i,
                        bound: self.bound,
                    })
                } else {
                    Ok(q)
                }
            })
            .collect()
    }
}

/// How many distance bands a single-subspace node recurses into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandMode {
    /// Only the outermost band extends the frame; inner bands contribute
    /// their representative point.
    Outermost,
    /// Every non-empty band extends the frame.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectiveParams {
    pub k: usize,
    pub epsilon: f64,
    pub grid: Option<GridConfig>,
    pub passthrough: usize,
    pub node_budget: usize,
    pub band_mode: BandMode,
}

impl ProjectiveParams {
    pub fn new(k: usize, epsilon: f64) -> Self {
        ProjectiveParams {
            k,
            epsilon,
            grid: None,
            passthrough: DEFAULT_PASSTHROUGH,
            node_budget: DEFAULT_NODE_BUDGET,
            band_mode: BandMode::Outermost,
        }
    }
}

/// ℓ∞ coreset for `k` affine subspaces. Returns sorted indices into `points`.
pub fn linf_projective_coreset(points: &[&[f64]], params: &ProjectiveParams) -> Result<Vec<usize>> {
    validate(params)?;
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let grid = params.grid.unwrap_or_else(|| GridConfig::fit(points, false));
    let prepared = grid.prepare(points)?;
    let mut ctx = Ctx::new(&prepared, grid.bound, params);
    let all: Vec<usize> = (0..points.len()).collect();
    Ok(ctx.coreset(&all, params.k)?.into_iter().collect())
}

/// ℓ∞ coreset for a single affine subspace. Returns sorted indices.
pub fn subspace_coreset_base(points: &[&[f64]], params: &ProjectiveParams) -> Result<Vec<usize>> {
    linf_projective_coreset(points, &ProjectiveParams { k: 1, ..*params })
}

fn validate(params: &ProjectiveParams) -> Result<()> {
    if params.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if !(params.epsilon > 0.0 && params.epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon {} outside (0, 1)", params.epsilon)));
    }
    Ok(())
}

/// Orthogonal frame through `V = {v_0, …, v_t}`.
struct Frame {
    members: Vec<usize>,
    origin: DVector<f64>,
    dirs: Vec<DVector<f64>>,
    lens: Vec<f64>,
}

impl Frame {
    fn new(pts: &[Vec<f64>], members: &[usize]) -> Frame {
        let origin = DVector::from_column_slice(&pts[members[0]]);
        let mut frame = Frame {
            members: vec![members[0]],
            origin,
            dirs: Vec::new(),
            lens: Vec::new(),
        };
        for &v in &members[1..] {
            frame.push(pts, v);
        }
        frame
    }

    fn t(&self) -> usize {
        self.dirs.len()
    }

    fn residual(&self, p: &[f64]) -> DVector<f64> {
        let mut r = DVector::from_column_slice(p) - &self.origin;
        for _ in 0..2 {
            for e in &self.dirs {
                let c = e.dot(&r);
                r.axpy(-c, e, 1.0);
            }
        }
        r
    }

    fn push(&mut self, pts: &[Vec<f64>], v: usize) {
        let r = self.residual(&pts[v]);
        let len = r.norm();
        if len > 0.0 {
            self.members.push(v);
            self.dirs.push(r / len);
            self.lens.push(len);
        }
    }

    fn with(&self, pts: &[Vec<f64>], v: usize) -> Frame {
        let mut members = self.members.clone();
        members.push(v);
        Frame::new(pts, &members)
    }

    fn dist(&self, p: &[f64]) -> f64 {
        self.residual(p).norm()
    }

    /// Coordinates along the frame, each axis scaled by its `‖u_i‖`.
    fn coords(&self, p: &[f64]) -> Vec<f64> {
        let r = DVector::from_column_slice(p) - &self.origin;
        self.dirs.iter().zip(&self.lens).map(|(e, l)| e.dot(&r) / l).collect()
    }

    /// Lower bound on the width of the simplex `conv(V)` in normalized
    /// coordinates, over all unit directions.
    fn width_lower_bound(&self, pts: &[Vec<f64>]) -> f64 {
        let t = self.t();
        let z = DMatrix::from_fn(t, t, |i, j| self.coords(&pts[self.members[i + 1]])[j]);
        let sigma = z.svd(false, false).singular_values.min();
        sigma / (t as f64).sqrt()
    }
}

struct Ctx<'a> {
    pts: &'a [Vec<f64>],
    dim: usize,
    eps: f64,
    base_radius: f64,
    bands: usize,
    passthrough: usize,
    budget: usize,
    used: usize,
    band_mode: BandMode,
}

impl<'a> Ctx<'a> {
    fn new(pts: &'a [Vec<f64>], bound: i64, params: &ProjectiveParams) -> Self {
        let dim = pts[0].len();
        let d = dim as f64;
        let m = bound as f64;
        let log2_inv_c = 1.5 * (d + 1.0) * d.log2();
        let c = (-log2_inv_c * std::f64::consts::LN_2).exp();
        let base_radius = c / m.powf(d + 1.0);
        let bands = (8.0 * d * m.log2() + log2_inv_c).ceil().max(1.0) as usize;
        Ctx {
            pts,
            dim,
            eps: params.epsilon,
            base_radius,
            bands,
            passthrough: params.passthrough,
            budget: params.node_budget,
            used: 0,
            band_mode: params.band_mode,
        }
    }

    fn tick(&mut self) -> Result<()> {
        self.used += 1;
        if self.used > self.budget {
            Err(Error::RecursionBudgetExceeded { budget: self.budget })
        } else {
            Ok(())
        }
    }

    /// Band of a point at distance `dist` from the current flat.
    fn band(&self, dist: f64) -> usize {
        if dist < self.base_radius {
            0
        } else {
            let j = (dist / self.base_radius).log2().floor() as usize + 1;
            j.min(self.bands)
        }
    }

    fn split_bands(&self, frame: &Frame, idx: &[usize]) -> (Vec<Vec<usize>>, Vec<f64>) {
        let mut bands = vec![Vec::new(); self.bands + 1];
        let mut dists = Vec::with_capacity(idx.len());
        for &i in idx {
            let d = frame.dist(&self.pts[i]);
            bands[self.band(d)].push(i);
            dists.push(d);
        }
        (bands, dists)
    }

    fn coreset(&mut self, idx: &[usize], k: usize) -> Result<BTreeSet<usize>> {
        self.tick()?;
        if idx.is_empty() {
            return Ok(BTreeSet::new());
        }
        match k {
            0 => Ok(BTreeSet::from([idx[0]])),
            1 => {
                if idx.len() <= self.passthrough {
                    return Ok(idx.iter().copied().collect());
                }
                let frame = Frame::new(self.pts, &[idx[0]]);
                self.single(idx, frame)
            }
            _ => {
                let mut c = self.coreset(idx, k - 1)?;
                let seeds: Vec<usize> = c.iter().copied().collect();
                for v0 in seeds {
                    let frame = Frame::new(self.pts, &[v0]);
                    c.extend(self.recurse(idx, k, frame)?);
                }
                Ok(c)
            }
        }
    }

    /// The recursive step for `k >= 2` around the frame `V`.
    fn recurse(&mut self, idx: &[usize], k: usize, frame: Frame) -> Result<BTreeSet<usize>> {
        if k == 1 {
            if idx.len() <= self.passthrough {
                self.tick()?;
                return Ok(idx.iter().copied().collect());
            }
            return self.single(idx, frame);
        }
        self.tick()?;
        let mut c = BTreeSet::new();
        let t = frame.t();
        if t >= 1 {
            // cells of side 2ε in normalized coordinates, extended past R[V] as needed
            let mut cells: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
            for &i in idx {
                let key = frame
                    .coords(&self.pts[i])
                    .iter()
                    .map(|a| ((a + 1.0) / (2.0 * self.eps)).floor() as i64)
                    .collect();
                cells.entry(key).or_default().push(i);
            }
            for cell in cells.values() {
                c.extend(self.coreset(cell, k - 1)?);
            }
        }
        if t < self.dim {
            let (bands, _) = self.split_bands(&frame, idx);
            let mut prefix: Vec<usize> = bands[0].clone();
            for band in bands.iter().skip(1) {
                if band.is_empty() {
                    continue;
                }
                prefix.extend_from_slice(band);
                prefix.sort_unstable();
                let reps = self.coreset(band, k - 1)?;
                for &v in &reps {
                    let next = frame.with(self.pts, v);
                    c.extend(self.recurse(&prefix, k - 1, next)?);
                }
                c.extend(reps);
            }
        }
        Ok(c)
    }

    /// Single-subspace coreset: extend the frame through distance bands
    /// until it spans the points, then keep column extremes on a grid.
    fn single(&mut self, idx: &[usize], frame: Frame) -> Result<BTreeSet<usize>> {
        self.tick()?;
        if idx.len() <= self.passthrough {
            return Ok(idx.iter().copied().collect());
        }
        let (bands, dists) = self.split_bands(&frame, idx);
        if frame.t() >= self.dim || bands[0].len() == idx.len() {
            return Ok(self.kernel(idx, &frame));
        }
        let mut c = BTreeSet::new();
        let mut reps = Vec::new();
        for (j, band) in bands.iter().enumerate().skip(1) {
            if band.is_empty() {
                continue;
            }
            let rep = farthest(band, idx, &dists);
            c.insert(rep);
            reps.push((j, rep));
        }
        match self.band_mode {
            BandMode::Outermost => {
                let &(_, rep) = reps.last().expect("some band is non-empty");
                let next = frame.with(self.pts, rep);
                c.extend(self.single(idx, next)?);
            }
            BandMode::All => {
                let mut prefix = bands[0].clone();
                let mut last = 0;
                for (j, rep) in reps {
                    for band in &bands[last + 1..=j] {
                        prefix.extend_from_slice(band);
                    }
                    last = j;
                    prefix.sort_unstable();
                    let next = frame.with(self.pts, rep);
                    c.extend(self.single(&prefix, next)?);
                }
            }
        }
        Ok(c)
    }

    /// Column extremes along the last frame axis.
    ///
    /// The column width keeps every directional extent of the points
    /// within a factor `1 - ε/(1+ε)`, which bounds the distance to any
    /// flat by the same factor.
    fn kernel(&self, idx: &[usize], frame: &Frame) -> BTreeSet<usize> {
        let t = frame.t();
        if t == 0 {
            return BTreeSet::from([idx[0]]);
        }
        let eps_k = self.eps / (2.0 * (1.0 + self.eps));
        let cell = if t >= 2 {
            eps_k * frame.width_lower_bound(self.pts) / (t as f64).sqrt()
        } else {
            f64::INFINITY
        };
        let mut columns: BTreeMap<Vec<i64>, (usize, f64, usize, f64)> = BTreeMap::new();
        for &i in idx {
            let a = frame.coords(&self.pts[i]);
            let key: Vec<i64> = if t >= 2 {
                a[..t - 1].iter().map(|x| (x / cell).floor() as i64).collect()
            } else {
                Vec::new()
            };
            let h = a[t - 1];
            columns
                .entry(key)
                .and_modify(|e| {
                    if h < e.1 {
                        e.0 = i;
                        e.1 = h;
                    }
                    if h > e.3 {
                        e.2 = i;
                        e.3 = h;
                    }
                })
                .or_insert((i, h, i, h));
        }
        columns.values().flat_map(|&(lo, _, hi, _)| [lo, hi]).collect()
    }
}

/// Farthest member of `band`; ties go to the lowest index.
fn farthest(band: &[usize], idx: &[usize], dists: &[f64]) -> usize {
    // `idx` is sorted and `dists` is parallel to it
    let mut best = band[0];
    let mut best_d = f64::NEG_INFINITY;
    for &i in band {
        let pos = idx.binary_search(&i).expect("band member comes from idx");
        let d = dists[pos];
        if d > best_d || (d == best_d && i < best) {
            best = i;
            best_d = d;
        }
    }
    best
}

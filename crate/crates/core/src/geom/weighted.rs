use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

/// An ordered multiset of points in R^d with strictly positive weights.
///
/// Coordinates are stored row-major in one flat buffer. An empty set is
/// allowed (it keeps its dimension) so that buckets and intermediate
/// results can be represented uniformly; operations that need points
/// report [`Error::EmptySet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SetRepr", into = "SetRepr")]
pub struct WeightedPointSet {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SetRepr {
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<SetRepr> for WeightedPointSet {
    type Error = Error;

    fn try_from(repr: SetRepr) -> Result<Self> {
        let mut set = WeightedPointSet::empty(repr.dim)?;
        if repr.points.len() != repr.weights.len() {
            return Err(Error::InvalidParameter(format!(
                "{} points but {} weights",
                repr.points.len(),
                repr.weights.len()
            )));
        }
        for (p, w) in repr.points.iter().zip(&repr.weights) {
            set.push(p, *w)?;
        }
        Ok(set)
    }
}

impl From<WeightedPointSet> for SetRepr {
    fn from(set: WeightedPointSet) -> Self {
        SetRepr {
            dim: set.dim,
            points: set.iter().map(|(p, _)| p.to_vec()).collect(),
            weights: set.weights,
        }
    }
}

impl WeightedPointSet {
    pub fn empty(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(WeightedPointSet {
            dim,
            coords: Vec::new(),
            weights: Vec::new(),
        })
    }

    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let dim = points.first().map(Vec::len).ok_or(Error::EmptySet)?;
        Self::try_from(SetRepr {
            dim,
            points,
            weights,
        })
    }

    /// Every point gets weight 1.
    pub fn unweighted(points: Vec<Vec<f64>>) -> Result<Self> {
        let weights = vec![1.0; points.len()];
        Self::new(points, weights)
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if coords.len() != dim * weights.len() {
            return Err(Error::InvalidParameter(format!(
                "flat buffer of length {} does not hold {} points of dimension {dim}",
                coords.len(),
                weights.len()
            )));
        }
        check_weights(&weights)?;
        if let Some(bad) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite coordinate in point {}",
                bad / dim
            )));
        }
        Ok(WeightedPointSet {
            dim,
            coords,
            weights,
        })
    }

    pub fn push(&mut self, point: &[f64], weight: f64) -> Result<()> {
        ensure_dim(self.dim, point.len())?;
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::NonPositiveWeight {
                index: self.len(),
                weight,
            });
        }
        if point.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite coordinate in point {}",
                self.len()
            )));
        }
        self.coords.extend_from_slice(point);
        self.weights.push(weight);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.coords
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn min_weight(&self) -> Result<f64> {
        self.weights
            .iter()
            .copied()
            .reduce(f64::min)
            .ok_or(Error::EmptySet)
    }

    /// Total weight divided by the smallest weight; always >= 1.
    pub fn normalized_average_weight(&self) -> Result<f64> {
        let min = self.min_weight()?;
        Ok(self.total_weight() / min)
    }

    /// Points at `indices` (in that order) with their original weights.
    pub fn subset(&self, indices: &[usize]) -> WeightedPointSet {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        let mut weights = Vec::with_capacity(indices.len());
        for &i in indices {
            coords.extend_from_slice(self.point(i));
            weights.push(self.weights[i]);
        }
        WeightedPointSet {
            dim: self.dim,
            coords,
            weights,
        }
    }

    /// Points at `indices` with replacement weights.
    pub fn reweighted_subset(&self, indices: &[usize], weights: Vec<f64>) -> Result<WeightedPointSet> {
        if indices.len() != weights.len() {
            return Err(Error::InvalidParameter("index and weight lists differ in length".into()));
        }
        check_weights(&weights)?;
        let mut out = self.subset(indices);
        out.weights = weights;
        Ok(out)
    }

    /// Multiset union; both sets must share a dimension.
    pub fn union(&self, other: &WeightedPointSet) -> Result<WeightedPointSet> {
        ensure_dim(self.dim, other.dim)?;
        let mut out = self.clone();
        out.coords.extend_from_slice(&other.coords);
        out.weights.extend_from_slice(&other.weights);
        Ok(out)
    }

    /// Appends `extra` zero coordinates to every point.
    pub fn pad_zeros(&self, extra: usize) -> WeightedPointSet {
        let dim = self.dim + extra;
        let mut coords = Vec::with_capacity(self.len() * dim);
        for p in self.coords.chunks_exact(self.dim) {
            coords.extend_from_slice(p);
            coords.extend(std::iter::repeat_n(0.0, extra));
        }
        WeightedPointSet {
            dim,
            coords,
            weights: self.weights.clone(),
        }
    }

    pub fn scale_weights(&mut self, factor: f64) -> Result<()> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidParameter(format!("weight scale {factor} must be positive")));
        }
        self.weights.iter_mut().for_each(|w| *w *= factor);
        Ok(())
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    match weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
        Some(index) => Err(Error::NonPositiveWeight {
            index,
            weight: weights[index],
        }),
        None => Ok(()),
    }
}

//! Items, datasets, weight vectors, rankings and regions of interest.

mod ingest;
mod roi;
mod synthetic;

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use ingest::{load_dataset, load_dataset_path, normalize_column, AttrSpec, ColumnExpr, Schema, Transform};
pub use roi::{Constraint, RegionOfInterest, Relation, RoiKind};
pub use synthetic::{generate_synthetic, SyntheticMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Item<T> {
    pub id: String,
    pub attrs: Vec<T>,
}

impl<T> Item<T> {
    pub fn new(id: impl Into<String>, attrs: Vec<T>) -> Self {
        Self { id: id.into(), attrs }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherPreferred,
    LowerPreferred,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttrMeta {
    pub name: String,
    pub direction: Direction,
    pub raw_min: f64,
    pub raw_max: f64,
}

impl AttrMeta {
    /// Metadata for an attribute that is already on the unit scale.
    pub fn unit(name: impl Into<String>) -> Self {
        Self { name: name.into(), direction: Direction::HigherPreferred, raw_min: 0.0, raw_max: 1.0 }
    }
}

/// An immutable collection of `n` items over `d` normalized attributes.
#[derive(Clone, Debug)]
pub struct Dataset<T> {
    items: Vec<Item<T>>,
    dim: usize,
    attr_meta: Vec<AttrMeta>,
    /// Position of each item in ascending id order; the global tie-break key.
    id_rank: Vec<u32>,
    by_id: HashMap<String, usize>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(items: Vec<Item<T>>, attr_meta: Vec<AttrMeta>) -> Result<Self> {
        let dim = attr_meta.len();
        if dim < 2 {
            return Err(Error::Validation(format!("at least two scoring attributes are required, got {dim}")));
        }
        if items.is_empty() {
            return Err(Error::Validation("dataset has no items".into()));
        }
        if items.len() > u32::MAX as usize {
            return Err(Error::Validation("too many items".into()));
        }
        let mut by_id = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if item.attrs.len() != dim {
                return Err(Error::Validation(format!(
                    "item `{}` has {} attributes, expected {dim}",
                    item.id,
                    item.attrs.len()
                )));
            }
            if let Some(v) = item.attrs.iter().find(|v| !v.is_finite() || **v < T::zero() || **v > T::one()) {
                return Err(Error::Validation(format!("item `{}` has attribute value {v} outside [0, 1]", item.id)));
            }
            if by_id.insert(item.id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate id `{}`", item.id)));
            }
        }
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.sort_by(|&a, &b| items[a].id.cmp(&items[b].id));
        let mut id_rank = vec![0u32; items.len()];
        for (pos, &i) in order.iter().enumerate() {
            id_rank[i] = pos as u32;
        }
        Ok(Self { items, dim, attr_meta, id_rank, by_id })
    }

    /// Dataset over attributes already on the unit scale, named `x1..xd`.
    pub fn from_items(items: Vec<Item<T>>) -> Result<Self> {
        let dim = items.first().map(|i| i.attrs.len()).unwrap_or(0);
        let meta = (1..=dim).map(|j| AttrMeta::unit(format!("x{j}"))).collect();
        Self::new(items, meta)
    }

    /// Convenience constructor from `(id, attrs)` pairs given as `f64`.
    pub fn from_rows(rows: &[(&str, &[f64])]) -> Result<Self> {
        let items = rows.iter().map(|(id, attrs)| Item::new(*id, attrs.iter().map(|&v| T::lit(v)).collect())).collect();
        Self::from_items(items)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn items(&self) -> &[Item<T>] {
        &self.items
    }

    pub fn item(&self, index: usize) -> &Item<T> {
        &self.items[index]
    }

    pub fn attrs(&self, index: usize) -> &[T] {
        &self.items[index].attrs
    }

    pub fn id(&self, index: usize) -> &str {
        &self.items[index].id
    }

    pub fn attr_meta(&self) -> &[AttrMeta] {
        &self.attr_meta
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    /// Rank of the item's id among all ids in ascending lexicographic order.
    pub fn id_rank(&self, index: usize) -> u32 {
        self.id_rank[index]
    }

    /// Inverse of [`Dataset::id_rank`].
    pub fn index_by_id_rank(&self) -> Vec<usize> {
        let mut inv = vec![0usize; self.len()];
        for (i, &r) in self.id_rank.iter().enumerate() {
            inv[r as usize] = i;
        }
        inv
    }

    #[inline]
    pub fn score(&self, index: usize, weights: &[T]) -> T {
        crate::scalar::dot(&self.items[index].attrs, weights)
    }

    fn check_weights(&self, weights: &[T]) -> Result<()> {
        if weights.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: weights.len() });
        }
        Ok(())
    }

    fn cmp_by(&self, scores: &[T], a: usize, b: usize) -> Ordering {
        scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal).then(self.id_rank[a].cmp(&self.id_rank[b]))
    }

    /// Item indices ordered by descending score under `weights`, ties by id.
    ///
    /// The weights are not validated beyond their length, so callers on hot
    /// paths can pass raw sample buffers.
    pub fn rank_indices(&self, weights: &[T]) -> Vec<usize> {
        debug_assert_eq!(weights.len(), self.dim);
        let scores: Vec<T> = (0..self.len()).map(|i| self.score(i, weights)).collect();
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_unstable_by(|&a, &b| self.cmp_by(&scores, a, b));
        idx
    }

    /// The first `k` entries of [`Dataset::rank_indices`] in O(n + k log k).
    pub fn top_indices(&self, weights: &[T], k: usize) -> Vec<usize> {
        debug_assert!(k >= 1 && k <= self.len());
        let scores: Vec<T> = (0..self.len()).map(|i| self.score(i, weights)).collect();
        let mut idx: Vec<usize> = (0..self.len()).collect();
        if k < idx.len() {
            idx.select_nth_unstable_by(k - 1, |&a, &b| self.cmp_by(&scores, a, b));
            idx.truncate(k);
        }
        idx.sort_unstable_by(|&a, &b| self.cmp_by(&scores, a, b));
        idx
    }

    /// Resolve a list of ids into item indices, requiring a full permutation.
    pub fn permutation_of(&self, ids: &[String]) -> Result<Vec<usize>> {
        if ids.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "ranking lists {} items but the dataset has {}",
                ids.len(),
                self.len()
            )));
        }
        let mut seen = vec![false; self.len()];
        ids.iter()
            .map(|id| {
                let i = self.index_of(id).ok_or_else(|| Error::UnknownItem(id.clone()))?;
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidArgument(format!("item `{id}` listed twice")));
                }
                Ok(i)
            })
            .collect()
    }
}

/// Non-negative, nonzero weight vector of a linear scoring function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector<T>(Vec<T>);

impl<T: Scalar> WeightVector<T> {
    pub fn new(w: Vec<T>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidArgument("empty weight vector".into()));
        }
        if w.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
        }
        if w.iter().all(|v| v.is_zero()) {
            return Err(Error::InvalidArgument("weights must not all be zero".into()));
        }
        Ok(Self(w))
    }

    pub fn from_f64(w: &[f64]) -> Result<Self> {
        Self::new(w.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    /// Unit-length copy; ranking is invariant under positive scaling.
    pub fn normalized(&self) -> Self {
        let n = crate::scalar::norm(&self.0);
        Self(self.0.iter().map(|&v| v / n).collect())
    }

    /// Construct without validation. For vectors known to be in the quadrant.
    pub(crate) fn from_unchecked(w: Vec<T>) -> Self {
        Self(w)
    }
}

impl<T> AsRef<[T]> for WeightVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.0
    }
}

/// `d - 1` polar angles of a ray inside the positive quadrant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AngleVector<T>(Vec<T>);

impl<T: Scalar> AngleVector<T> {
    pub fn new(angles: Vec<T>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::InvalidArgument("angle vector needs d-1 >= 1 angles".into()));
        }
        let half_pi = T::FRAC_PI_2();
        let slack = T::geom_eps();
        if angles.iter().any(|a| !a.is_finite() || *a < -slack || *a > half_pi + slack) {
            return Err(Error::InvalidArgument("polar angles must lie in [0, pi/2]".into()));
        }
        Ok(Self(angles.into_iter().map(|a| a.max(T::zero()).min(half_pi)).collect()))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    /// Dimension of the ambient space, `len + 1`.
    pub fn dim(&self) -> usize {
        self.0.len() + 1
    }
}

/// A permutation of item ids, highest score first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ranking {
    pub order: Vec<String>,
}

impl Ranking {
    pub fn from_indices<T: Scalar>(dataset: &Dataset<T>, indices: &[usize]) -> Self {
        Self { order: indices.iter().map(|&i| dataset.id(i).to_owned()).collect() }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

impl std::fmt::Display for Ranking {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "<{}>", self.order.join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopKMode {
    Set,
    Ranked,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TopKResult {
    pub mode: TopKMode,
    pub k: usize,
    /// Id-sorted for `Set`, rank order for `Ranked`.
    pub members: Vec<String>,
}

/// Order the dataset under `w`: descending score, ties by ascending id.
pub fn rank<T: Scalar>(dataset: &Dataset<T>, w: &WeightVector<T>) -> Result<Ranking> {
    dataset.check_weights(w.as_slice())?;
    Ok(Ranking::from_indices(dataset, &dataset.rank_indices(w.as_slice())))
}

pub fn top_k(ranking: &Ranking, k: usize, mode: TopKMode) -> Result<TopKResult> {
    if k == 0 || k > ranking.len() {
        return Err(Error::InvalidArgument(format!("k must be in [1, {}], got {k}", ranking.len())));
    }
    let mut members = ranking.order[..k].to_vec();
    if mode == TopKMode::Set {
        members.sort();
    }
    Ok(TopKResult { mode, k, members })
}

//! Ranking regions in any dimension: verification as a half-space
//! intersection, exchange-hyperplane enumeration, and a lazy best-first
//! construction of the arrangement whose region volumes are estimated from a
//! shared, in-place partitioned sample store.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact2d::{Infeasibility, Verified};
use crate::geometry::{dominates, exchange_hyperplane, HalfSpace, Hyperplane, Sign};
use crate::lp::{has_interior, interior_point};
use crate::model::{Dataset, Ranking, RegionOfInterest, WeightVector};
use crate::randomized::StabilityEstimate;
use crate::rng::RngStream;
use crate::sampler::RoiSampler;
use crate::scalar::Scalar;
use crate::threads::thread_pool;

const DRAW_CHUNK: usize = 4096;

/// Default window size at or below which the exact fallback kicks in.
pub const DEFAULT_TINY_WINDOW: usize = 16;

/// Weight vectors drawn uniformly from a region of interest, stored flat.
///
/// The arrangement engine reorders samples in place; the multiset never changes.
#[derive(Clone, Debug)]
pub struct SampleStore<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> SampleStore<T> {
    /// Draw `n` samples; chunk `c` uses substream `c` of `seed`, so the store
    /// does not depend on the thread count.
    pub fn draw(sampler: &RoiSampler<T>, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample count must be positive".into()));
        }
        let d = sampler.dim();
        let root = RngStream::new(seed);
        let mut data = vec![T::zero(); n * d];
        thread_pool().install(|| {
            data.par_chunks_mut(DRAW_CHUNK * d).enumerate().try_for_each(|(c, chunk)| {
                let mut rng = root.split(c as u64);
                chunk.chunks_exact_mut(d).try_for_each(|w| sampler.sample_into(w, &mut rng))
            })
        })?;
        Ok(Self { dim: d, data })
    }

    /// Wrap existing samples given row by row.
    pub fn from_samples(dim: usize, samples: &[Vec<T>]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let mut data = Vec::with_capacity(samples.len() * dim);
        for s in samples {
            if s.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: s.len() });
            }
            data.extend_from_slice(s);
        }
        Ok(Self { dim, data })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn sample(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    fn window(&self, w: Range<usize>) -> impl Iterator<Item = &[T]> + '_ {
        self.data[w.start * self.dim..w.end * self.dim].chunks_exact(self.dim)
    }

    fn swap(&mut self, i: usize, j: usize) {
        if i != j {
            let d = self.dim;
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            let (head, tail) = self.data.split_at_mut(b * d);
            head[a * d..(a + 1) * d].swap_with_slice(&mut tail[..d]);
        }
    }
}

/// Exchange hyperplanes meeting the region of interest, in pair-id order.
#[derive(Clone, Debug, PartialEq)]
pub struct ExchangeSet<T> {
    planes: Vec<Hyperplane<T>>,
}

impl<T> ExchangeSet<T> {
    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    pub fn get(&self, i: usize) -> &Hyperplane<T> {
        &self.planes[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Hyperplane<T>> {
        self.planes.iter()
    }
}

fn check_store<T: Scalar>(dataset: &Dataset<T>, roi: &RegionOfInterest<T>, store: &SampleStore<T>) -> Result<()> {
    roi.check_dim(dataset.dim())?;
    if store.dim() != dataset.dim() {
        return Err(Error::DimensionMismatch { expected: dataset.dim(), actual: store.dim() });
    }
    if store.is_empty() {
        return Err(Error::InvalidArgument("sample store is empty".into()));
    }
    Ok(())
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

/// All non-dominated pairs whose exchange hyperplane crosses `roi`.
///
/// A pair qualifies when the store has samples strictly on both sides; with
/// one-sided evidence a linear feasibility check decides.
pub fn exchange_hyperplanes<T: Scalar>(
    dataset: &Dataset<T>,
    roi: &RegionOfInterest<T>,
    store: &SampleStore<T>,
) -> Result<ExchangeSet<T>> {
    check_store(dataset, roi, store)?;
    let by_rank = dataset.index_by_id_rank();
    let n = by_rank.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let found: Vec<Option<Hyperplane<T>>> = thread_pool().install(|| {
        pairs
            .par_iter()
            .map(|&(a, b)| {
                let Some(h) = exchange_hyperplane(dataset, by_rank[a], by_rank[b]) else {
                    return Ok(None);
                };
                let (mut pos, mut neg) = (false, false);
                for w in store.iter() {
                    let v = h.eval(w);
                    pos |= v > T::zero();
                    neg |= v < T::zero();
                    if pos && neg {
                        return Ok(Some(h));
                    }
                }
                Ok(has_interior(roi, &[], Some(&to_f64(&h.coeffs)))?.then_some(h))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ExchangeSet { planes: found.into_iter().flatten().collect() })
}

/// Fraction of samples satisfying every half-space, or the size of a
/// partitioned window relative to the store.
pub fn stability_oracle<T: Scalar>(
    constraints: &[HalfSpace<T>],
    store: &SampleStore<T>,
    window: Option<Range<usize>>,
    alpha: f64,
) -> Result<StabilityEstimate<T>> {
    let count = match window {
        Some(w) => {
            if w.end > store.len() || w.start > w.end {
                return Err(Error::InvalidArgument(format!("window {w:?} outside a store of {} samples", store.len())));
            }
            w.len()
        }
        None => store.iter().filter(|s| constraints.iter().all(|h| h.contains(s))).count(),
    };
    StabilityEstimate::from_count(count as u64, store.len() as u64, alpha)
}

/// Partition `window` so that samples with `h < 0` come first and return
/// the start of the non-negative part, or `None` when one side is empty.
///
/// Scores tied on `h` go to the non-negative side, matching the id
/// tie-break of [`Dataset::rank_indices`] for planes built by
/// [`exchange_hyperplane`].
pub fn pass_through<T: Scalar>(h: &Hyperplane<T>, window: Range<usize>, store: &mut SampleStore<T>) -> Option<usize> {
    let mut mid = window.start;
    for j in window.clone() {
        if h.eval(store.sample(j)) < T::zero() {
            store.swap(mid, j);
            mid += 1;
        }
    }
    (mid > window.start && mid < window.end).then_some(mid)
}

/// A ranking region in `R^d` and its stability estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionMd<T> {
    pub constraints: Vec<HalfSpace<T>>,
    pub stability: StabilityEstimate<T>,
}

/// Half-spaces of `ranking` and their sampled stability.
///
/// A zero estimate is followed by a feasibility check so that an empty
/// region is reported as such rather than as a tiny one.
pub fn verify_md<T: Scalar>(
    dataset: &Dataset<T>,
    ranking: &Ranking,
    roi: &RegionOfInterest<T>,
    store: &SampleStore<T>,
    alpha: f64,
) -> Result<Verified<RegionMd<T>>> {
    check_store(dataset, roi, store)?;
    let order = dataset.permutation_of(&ranking.order)?;
    let mut constraints = Vec::new();
    for pair in order.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (t, u) = (dataset.attrs(a), dataset.attrs(b));
        if dominates(u, t) || (t == u && dataset.id_rank(a) > dataset.id_rank(b)) {
            return Ok(Verified::Infeasible(Infeasibility::Dominated {
                above: dataset.id(a).to_owned(),
                below: dataset.id(b).to_owned(),
            }));
        }
        if let Some(plane) = exchange_hyperplane(dataset, a, b) {
            let sign = if plane.pair.0 == a { Sign::Pos } else { Sign::Neg };
            constraints.push(HalfSpace { plane, sign });
        }
    }
    let stability = stability_oracle(&constraints, store, None, alpha)?;
    if stability.value == T::zero() {
        let rows: Vec<Vec<f64>> = constraints.iter().map(|h| to_f64(&h.normal())).collect();
        if !has_interior(roi, &rows, None)? {
            let quadrant = RegionOfInterest::<T>::full(dataset.dim());
            let reason = if has_interior(&quadrant, &rows, None)? {
                Infeasibility::OutsideRoi
            } else {
                Infeasibility::EmptyRegion
            };
            return Ok(Verified::Infeasible(reason));
        }
    }
    Ok(Verified::Feasible(RegionMd { constraints, stability }))
}

/// Tuning of [`ArrangementState`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MdOptions {
    /// Decide splits of near-empty regions exactly and keep empty children.
    pub exact_fallback: bool,
    /// Window size at or below which the exact check applies.
    pub tiny_window: usize,
    /// Significance level of reported confidence errors.
    pub alpha: f64,
}

impl Default for MdOptions {
    fn default() -> Self {
        Self { exact_fallback: false, tiny_window: DEFAULT_TINY_WINDOW, alpha: 0.05 }
    }
}

/// A cell of the partially built arrangement.
#[derive(Clone, Debug)]
pub struct Region {
    constraints: Vec<(u32, Sign)>,
    pending: usize,
    window: Range<usize>,
    seq: u64,
}

impl Region {
    /// Index of the next exchange hyperplane to try.
    pub fn pending(&self) -> usize {
        self.pending
    }

    /// Samples of the store inside this region.
    pub fn window(&self) -> Range<usize> {
        self.window.clone()
    }

    /// Half-spaces as `(exchange-set index, side)`.
    pub fn constraint_indices(&self) -> &[(u32, Sign)] {
        &self.constraints
    }

    fn key(&self) -> (usize, Reverse<u64>) {
        (self.window.len(), Reverse(self.seq))
    }
}

impl PartialEq for Region {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Region {}

impl PartialOrd for Region {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Region {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// A region produced by [`ArrangementState::get_next_md`].
#[derive(Clone, Debug, PartialEq)]
pub struct NextMd<T> {
    pub ranking: Ranking,
    pub stability: StabilityEstimate<T>,
    /// Normalized mean of the region's samples, or an interior point when
    /// the region holds none.
    pub weights: WeightVector<T>,
    pub constraints: Vec<HalfSpace<T>>,
    pub window: Range<usize>,
}

/// Lazily refined arrangement of exchange hyperplanes inside a region of
/// interest, handing out ranking regions by decreasing stability.
#[derive(Clone, Debug)]
pub struct ArrangementState<T> {
    roi: RegionOfInterest<T>,
    store: SampleStore<T>,
    planes: ExchangeSet<T>,
    heap: BinaryHeap<Region>,
    options: MdOptions,
    next_seq: u64,
    shape: (usize, usize),
    returned: usize,
}

impl<T: Scalar> ArrangementState<T> {
    /// Draw `samples` weight vectors from `roi` and collect the exchange set.
    pub fn new(
        dataset: &Dataset<T>,
        roi: RegionOfInterest<T>,
        samples: usize,
        seed: u64,
        options: MdOptions,
    ) -> Result<Self> {
        let sampler = RoiSampler::new(roi.clone())?;
        let store = SampleStore::draw(&sampler, samples, seed)?;
        Self::with_store(dataset, roi, store, options)
    }

    pub fn with_store(
        dataset: &Dataset<T>,
        roi: RegionOfInterest<T>,
        store: SampleStore<T>,
        options: MdOptions,
    ) -> Result<Self> {
        crate::randomized::z_value(options.alpha)?;
        let planes = exchange_hyperplanes(dataset, &roi, &store)?;
        if planes.len() > u32::MAX as usize {
            return Err(Error::InvalidArgument("too many exchange hyperplanes".into()));
        }
        let mut heap = BinaryHeap::new();
        heap.push(Region { constraints: Vec::new(), pending: 0, window: 0..store.len(), seq: 0 });
        Ok(Self { roi, store, planes, heap, options, next_seq: 1, shape: (dataset.len(), dataset.dim()), returned: 0 })
    }

    pub fn store(&self) -> &SampleStore<T> {
        &self.store
    }

    pub fn exchange_set(&self) -> &ExchangeSet<T> {
        &self.planes
    }

    pub fn roi(&self) -> &RegionOfInterest<T> {
        &self.roi
    }

    pub fn options(&self) -> MdOptions {
        self.options
    }

    /// Regions on the heap, refined or not.
    pub fn open_regions(&self) -> usize {
        self.heap.len()
    }

    pub fn returned_count(&self) -> usize {
        self.returned
    }

    /// Windows of the regions on the heap.
    pub fn open_windows(&self) -> Vec<Range<usize>> {
        self.heap.iter().map(|r| r.window.clone()).collect()
    }

    fn half_spaces(&self, region: &Region) -> Vec<HalfSpace<T>> {
        region
            .constraints
            .iter()
            .map(|&(i, sign)| HalfSpace { plane: self.planes.get(i as usize).clone(), sign })
            .collect()
    }

    fn rows(&self, region: &Region) -> Vec<Vec<f64>> {
        self.half_spaces(region).iter().map(|h| to_f64(&h.normal())).collect()
    }

    fn child(&mut self, parent: &Region, plane: usize, sign: Sign, window: Range<usize>) -> Region {
        let mut constraints = Vec::with_capacity(parent.constraints.len() + 1);
        constraints.extend_from_slice(&parent.constraints);
        constraints.push((plane as u32, sign));
        let seq = self.next_seq;
        self.next_seq += 1;
        Region { constraints, pending: parent.pending + 1, window, seq }
    }

    /// Exact two-sided test for a one-sided sample split.
    fn splits_exactly(&self, region: &Region, plane: usize) -> Result<bool> {
        let rows = self.rows(region);
        let h = to_f64(&self.planes.get(plane).coeffs);
        let neg: Vec<f64> = h.iter().map(|v| -v).collect();
        for side in [h, neg] {
            let mut r = rows.clone();
            r.push(side);
            if !has_interior(&self.roi, &r, None)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn representative(&self, region: &Region) -> Result<Vec<T>> {
        let d = self.store.dim();
        if !region.window.is_empty() {
            let mut mean = vec![T::zero(); d];
            for w in self.store.window(region.window.clone()) {
                for (m, &x) in mean.iter_mut().zip(w) {
                    *m = *m + x;
                }
            }
            let n = crate::scalar::norm(&mean);
            return Ok(mean.into_iter().map(|x| x / n).collect());
        }
        match interior_point(&self.roi, &self.rows(region), None)? {
            Some((x, _)) => {
                let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                Ok(x.iter().map(|v| T::lit(v / n)).collect())
            }
            None => Err(Error::Solver("no interior point for a nonempty region".into())),
        }
    }

    /// Refine the most stable region until it is a single ranking region and
    /// return it; `None` once every region has been returned.
    pub fn get_next_md(&mut self, dataset: &Dataset<T>) -> Result<Option<NextMd<T>>> {
        if (dataset.len(), dataset.dim()) != self.shape {
            return Err(Error::InvalidArgument(format!(
                "state was built for {} items in {} dimensions",
                self.shape.0, self.shape.1
            )));
        }
        'regions: while let Some(mut region) = self.heap.pop() {
            while region.pending < self.planes.len() {
                let p = region.pending;
                let window = region.window.clone();
                let split = pass_through(self.planes.get(p), window.clone(), &mut self.store);
                let mid = match split {
                    Some(mid) => Some(mid),
                    None if self.options.exact_fallback
                        && window.len() <= self.options.tiny_window
                        && self.splits_exactly(&region, p)? =>
                    {
                        // All samples sit on one side; find which.
                        let all_neg = window
                            .clone()
                            .next()
                            .is_some_and(|i| self.planes.get(p).eval(self.store.sample(i)) < T::zero());
                        Some(if all_neg { window.end } else { window.start })
                    }
                    None => None,
                };
                match mid {
                    Some(mid) => {
                        let neg = self.child(&region, p, Sign::Neg, window.start..mid);
                        let pos = self.child(&region, p, Sign::Pos, mid..window.end);
                        self.heap.push(neg);
                        self.heap.push(pos);
                        continue 'regions;
                    }
                    None => region.pending += 1,
                }
            }
            let weights = self.representative(&region)?;
            let ranking = Ranking::from_indices(dataset, &dataset.rank_indices(&weights));
            let stability = stability_oracle(&[], &self.store, Some(region.window.clone()), self.options.alpha)?;
            self.returned += 1;
            return Ok(Some(NextMd {
                ranking,
                stability,
                weights: WeightVector::from_unchecked(weights),
                constraints: self.half_spaces(&region),
                window: region.window,
            }));
        }
        Ok(None)
    }
}

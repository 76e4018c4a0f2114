//! Monte-Carlo discovery of stable rankings and top-k results.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, PartialEstimate, Result};
use crate::model::{Dataset, Ranking, TopKMode, TopKResult, WeightVector};
use crate::rng::RngStream;
use crate::sampler::RoiSampler;
use crate::scalar::Scalar;
use crate::threads::thread_pool;

/// Samples per deterministic substream.
const CHUNK: usize = 1024;

/// Default per-call sample cap of the fixed-error variant.
pub const DEFAULT_SAMPLE_CAP: u64 = 10_000_000;

/// Default minimum sample count before the fixed-error stopping rule applies.
pub const DEFAULT_MIN_SAMPLES: u64 = 30;

/// Stability value with its normal-approximation confidence error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StabilityEstimate<T> {
    pub value: T,
    pub confidence_error: T,
    pub confidence_level: T,
    pub samples: u64,
}

impl<T: Scalar> StabilityEstimate<T> {
    /// Estimate from `count` hits among `samples` draws.
    pub fn from_count(count: u64, samples: u64, alpha: f64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidArgument("no samples".into()));
        }
        let m = count as f64 / samples as f64;
        Ok(Self {
            value: T::lit(m),
            confidence_error: T::lit(confidence_error(m, samples, alpha)?),
            confidence_level: T::lit(1.0 - alpha),
            samples,
        })
    }
}

/// Two-sided standard normal quantile `Z(1 - alpha/2)`.
pub fn z_value(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(1.0 - alpha / 2.0))
}

/// `Z(1 - alpha/2) * sqrt(m (1 - m) / n)`.
pub fn confidence_error(m: f64, n: u64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::InvalidArgument(format!("stability must be in [0, 1], got {m}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    Ok(z_value(alpha)? * (m * (1.0 - m) / n as f64).sqrt())
}

/// Mean and variance of the number of draws until a region of stability `s` is hit.
pub fn expected_samples_to_observe(s: f64) -> Result<(f64, f64)> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidArgument(format!("stability must be in (0, 1] to be observable, got {s}")));
    }
    Ok((1.0 / s, (1.0 - s) / (s * s)))
}

/// What a sample counts toward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "mode", content = "k", rename_all = "kebab-case")]
pub enum ResultMode {
    Full,
    TopkSet(usize),
    TopkRanked(usize),
}

impl ResultMode {
    /// Parse `full`, `topk-set` or `topk-ranked`; top-k modes need `k`.
    pub fn parse(mode: &str, k: Option<usize>) -> Result<Self> {
        let need_k = || k.ok_or_else(|| Error::InvalidArgument(format!("mode `{mode}` needs k")));
        match mode {
            "full" => Ok(ResultMode::Full),
            "topk-set" | "topk_set" | "set" => Ok(ResultMode::TopkSet(need_k()?)),
            "topk-ranked" | "topk_ranked" | "ranked" => Ok(ResultMode::TopkRanked(need_k()?)),
            other => Err(Error::InvalidArgument(format!("unknown mode `{other}`"))),
        }
    }

    fn check<T: Scalar>(&self, dataset: &Dataset<T>) -> Result<()> {
        match *self {
            ResultMode::TopkSet(k) | ResultMode::TopkRanked(k) if k == 0 || k > dataset.len() => {
                Err(Error::InvalidArgument(format!("k must be in [1, {}], got {k}", dataset.len())))
            }
            _ => Ok(()),
        }
    }

    /// Canonical key of the result under `w`: id ranks of the members.
    pub(crate) fn key<T: Scalar>(&self, dataset: &Dataset<T>, w: &[T]) -> Vec<u32> {
        let idx = match *self {
            ResultMode::Full => dataset.rank_indices(w),
            ResultMode::TopkSet(k) | ResultMode::TopkRanked(k) => dataset.top_indices(w, k),
        };
        let mut key: Vec<u32> = idx.iter().map(|&i| dataset.id_rank(i)).collect();
        if let ResultMode::TopkSet(_) = self {
            key.sort_unstable();
        }
        key
    }
}

/// A full ranking or a top-k result.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(untagged)]
pub enum ResultKey {
    Ranking(Ranking),
    TopK(TopKResult),
}

impl ResultKey {
    pub fn members(&self) -> &[String] {
        match self {
            ResultKey::Ranking(r) => &r.order,
            ResultKey::TopK(t) => &t.members,
        }
    }
}

/// One answer of a Monte-Carlo get-next call.
#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloResult<T> {
    pub key: ResultKey,
    pub estimate: StabilityEstimate<T>,
    /// First sampled weight vector that produced this result.
    pub weights: WeightVector<T>,
    /// Samples drawn during this call.
    pub new_samples: u64,
}

#[derive(Clone, Debug)]
struct Entry<T> {
    count: u64,
    witness: Vec<T>,
}

/// Accumulated counts of a Monte-Carlo get-next session.
#[derive(Clone, Debug)]
pub struct MonteCarloState<T> {
    mode: ResultMode,
    counts: HashMap<Vec<u32>, Entry<T>>,
    n_total: u64,
    returned: Vec<Vec<u32>>,
    returned_set: HashSet<Vec<u32>>,
    rng: RngStream,
    chunks_used: u64,
}

/// Parameters of [`MonteCarloState::get_next_fixed_error`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedError {
    pub target: f64,
    pub alpha: f64,
    /// Per-call cap on new samples.
    pub max_samples: u64,
    /// Total samples required before the stopping rule may fire; guards the
    /// zero-variance estimate of a lone first observation.
    pub min_samples: u64,
}

impl FixedError {
    pub fn new(target: f64, alpha: f64) -> Self {
        Self { target, alpha, max_samples: DEFAULT_SAMPLE_CAP, min_samples: DEFAULT_MIN_SAMPLES }
    }
}

impl<T: Scalar> MonteCarloState<T> {
    pub fn new(mode: ResultMode, seed: u64) -> Self {
        Self {
            mode,
            counts: HashMap::new(),
            n_total: 0,
            returned: Vec::new(),
            returned_set: HashSet::new(),
            rng: RngStream::new(seed),
            chunks_used: 0,
        }
    }

    pub fn mode(&self) -> ResultMode {
        self.mode
    }

    pub fn total_samples(&self) -> u64 {
        self.n_total
    }

    pub fn distinct_results(&self) -> usize {
        self.counts.len()
    }

    pub fn returned_count(&self) -> usize {
        self.returned.len()
    }

    /// Sum of all counts; equals [`MonteCarloState::total_samples`].
    pub fn count_sum(&self) -> u64 {
        self.counts.values().map(|e| e.count).sum()
    }

    /// Occurrence count of a result given by its member ids.
    pub fn count_of<S: AsRef<str>>(&self, dataset: &Dataset<T>, members: &[S]) -> Option<u64> {
        let mut key = members
            .iter()
            .map(|id| dataset.index_of(id.as_ref()).map(|i| dataset.id_rank(i)))
            .collect::<Option<Vec<u32>>>()?;
        if let ResultMode::TopkSet(_) = self.mode {
            key.sort_unstable();
        }
        self.counts.get(&key).map(|e| e.count)
    }

    /// All observed results with their counts, in canonical key order.
    pub fn counts(&self, dataset: &Dataset<T>) -> Vec<(ResultKey, u64)> {
        let by_rank = dataset.index_by_id_rank();
        let mut keys: Vec<&Vec<u32>> = self.counts.keys().collect();
        keys.sort();
        keys.into_iter().map(|k| (self.decode(dataset, &by_rank, k), self.counts[k].count)).collect()
    }

    fn decode(&self, dataset: &Dataset<T>, by_rank: &[usize], key: &[u32]) -> ResultKey {
        let members: Vec<String> = key.iter().map(|&r| dataset.id(by_rank[r as usize]).to_owned()).collect();
        match self.mode {
            ResultMode::Full => ResultKey::Ranking(Ranking { order: members }),
            ResultMode::TopkSet(k) => ResultKey::TopK(TopKResult { mode: TopKMode::Set, k, members }),
            ResultMode::TopkRanked(k) => ResultKey::TopK(TopKResult { mode: TopKMode::Ranked, k, members }),
        }
    }

    fn check(&self, dataset: &Dataset<T>, sampler: &RoiSampler<T>) -> Result<()> {
        self.mode.check(dataset)?;
        if sampler.dim() != dataset.dim() {
            return Err(Error::DimensionMismatch { expected: dataset.dim(), actual: sampler.dim() });
        }
        Ok(())
    }

    fn record(&mut self, key: Vec<u32>, count: u64, witness: &[T]) -> u64 {
        let e = self.counts.entry(key).or_insert_with(|| Entry { count: 0, witness: witness.to_vec() });
        e.count += count;
        e.count
    }

    /// Most frequent result not returned yet, ties to the smaller key.
    fn best_new(&self) -> Option<(&Vec<u32>, u64)> {
        self.counts
            .iter()
            .filter(|(k, _)| !self.returned_set.contains(*k))
            .map(|(k, e)| (k, e.count))
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
    }

    fn emit(
        &mut self,
        dataset: &Dataset<T>,
        key: Vec<u32>,
        alpha: f64,
        new_samples: u64,
    ) -> Result<MonteCarloResult<T>> {
        let entry = &self.counts[&key];
        let estimate = StabilityEstimate::from_count(entry.count, self.n_total, alpha)?;
        let weights = WeightVector::from_unchecked(entry.witness.clone());
        let result = MonteCarloResult {
            key: self.decode(dataset, &dataset.index_by_id_rank(), &key),
            estimate,
            weights,
            new_samples,
        };
        self.returned_set.insert(key.clone());
        self.returned.push(key);
        Ok(result)
    }

    /// Draw `budget` new samples, then return the most frequent result not
    /// returned before; `None` when every observed result was returned.
    pub fn get_next_fixed_budget(
        &mut self,
        dataset: &Dataset<T>,
        sampler: &RoiSampler<T>,
        budget: u64,
        alpha: f64,
    ) -> Result<Option<MonteCarloResult<T>>> {
        self.check(dataset, sampler)?;
        z_value(alpha)?;
        if budget == 0 {
            return Err(Error::InvalidArgument("sample budget must be positive".into()));
        }
        let chunks = budget.div_ceil(CHUNK as u64);
        let first = self.chunks_used;
        let mode = self.mode;
        let rng = &self.rng;
        let partials: Vec<HashMap<Vec<u32>, Entry<T>>> = thread_pool().install(|| {
            (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let size = (budget - c * CHUNK as u64).min(CHUNK as u64);
                    let mut stream = rng.split(first + c);
                    let mut local: HashMap<Vec<u32>, Entry<T>> = HashMap::new();
                    let mut w = vec![T::zero(); dataset.dim()];
                    for _ in 0..size {
                        sampler.sample_into(&mut w, &mut stream)?;
                        let key = mode.key(dataset, &w);
                        local.entry(key).or_insert_with(|| Entry { count: 0, witness: w.clone() }).count += 1;
                    }
                    Ok(local)
                })
                .collect::<Result<Vec<_>>>()
        })?;
        self.chunks_used += chunks;
        self.n_total += budget;
        for local in partials {
            for (key, e) in local {
                self.record(key, e.count, &e.witness);
            }
        }
        match self.best_new() {
            Some((key, _)) => {
                let key = key.clone();
                self.emit(dataset, key, alpha, budget).map(Some)
            }
            None => Ok(None),
        }
    }

    /// Sample one draw at a time until the best new result's confidence error
    /// reaches the target.
    ///
    /// On hitting the sample cap the counts gathered so far stay in the state
    /// and an [`Error::BudgetExceeded`] describes the best candidate.
    pub fn get_next_fixed_error(
        &mut self,
        dataset: &Dataset<T>,
        sampler: &RoiSampler<T>,
        params: FixedError,
    ) -> Result<MonteCarloResult<T>> {
        self.check(dataset, sampler)?;
        z_value(params.alpha)?;
        if params.target.is_nan() || params.target <= 0.0 {
            return Err(Error::InvalidArgument("error target must be positive".into()));
        }
        let mut best: Option<(Vec<u32>, u64)> = self.best_new().map(|(k, c)| (k.clone(), c));
        let mut used = 0u64;
        let mut w = vec![T::zero(); dataset.dim()];
        let mut stream = self.rng.split(self.chunks_used);
        let mut in_chunk = 0usize;
        self.chunks_used += 1;
        let done = |best: &Option<(Vec<u32>, u64)>, n: u64| -> Result<bool> {
            match best {
                Some((_, c)) if n >= params.min_samples.max(1) => {
                    Ok(confidence_error(*c as f64 / n as f64, n, params.alpha)? <= params.target)
                }
                _ => Ok(false),
            }
        };
        while !done(&best, self.n_total)? {
            if used >= params.max_samples {
                let candidate = best.map(|(key, c)| {
                    let m = c as f64 / self.n_total as f64;
                    PartialEstimate {
                        members: self.decode(dataset, &dataset.index_by_id_rank(), &key).members().to_vec(),
                        stability: m,
                        confidence_error: confidence_error(m, self.n_total, params.alpha).unwrap_or(f64::NAN),
                    }
                });
                return Err(Error::BudgetExceeded { samples: used, total_samples: self.n_total, candidate });
            }
            if in_chunk == CHUNK {
                stream = self.rng.split(self.chunks_used);
                self.chunks_used += 1;
                in_chunk = 0;
            }
            sampler.sample_into(&mut w, &mut stream)?;
            in_chunk += 1;
            used += 1;
            self.n_total += 1;
            let key = self.mode.key(dataset, &w);
            let count = self.record(key.clone(), 1, &w);
            if !self.returned_set.contains(&key) {
                let better = match &best {
                    None => true,
                    Some((bk, bc)) => count > *bc || (count == *bc && key < *bk) || key == *bk,
                };
                if better {
                    best = Some((key, count));
                }
            }
        }
        let (key, _) = best.expect("stopping rule needs a candidate");
        self.emit(dataset, key, params.alpha, used)
    }
}

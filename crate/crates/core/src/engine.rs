//! One front end over the three get-next engines and the two verifiers,
//! producing plain `f64` records for command-line and HTTP callers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact2d::{get_next_2d, ray_sweep_roi, verify_2d, RegionHeap, Verified};
use crate::exactmd::{verify_md, ArrangementState, MdOptions, SampleStore, DEFAULT_TINY_WINDOW};
use crate::geometry::HalfSpace;
use crate::model::{Dataset, Ranking, RegionOfInterest, TopKResult, WeightVector};
use crate::randomized::{FixedError, MonteCarloState, ResultKey, ResultMode, DEFAULT_MIN_SAMPLES, DEFAULT_SAMPLE_CAP};
use crate::sampler::RoiSampler;
use crate::scalar::Scalar;

/// Default size of the sample store behind d-dimensional estimates.
pub const DEFAULT_STORE_SAMPLES: usize = 100_000;

/// Default per-call budget of the Monte-Carlo engine.
pub const DEFAULT_BUDGET: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EngineKind {
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "md")]
    Md,
    #[serde(rename = "random")]
    Random,
}

impl FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2d" => Ok(EngineKind::TwoD),
            "md" => Ok(EngineKind::Md),
            "random" => Ok(EngineKind::Random),
            other => Err(Error::InvalidArgument(format!("unknown engine `{other}` (2d, md, random)"))),
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::TwoD => "2d",
            EngineKind::Md => "md",
            EngineKind::Random => "random",
        })
    }
}

/// Everything needed to start a get-next stream.
#[derive(Clone, Debug, PartialEq)]
pub struct EngineParams {
    pub engine: EngineKind,
    pub mode: ResultMode,
    /// Store size of the d-dimensional engine.
    pub samples: usize,
    /// Samples per call of the Monte-Carlo engine (fixed-budget variant).
    pub budget: Option<u64>,
    /// Target confidence error of the Monte-Carlo engine (fixed-error variant).
    pub error: Option<f64>,
    pub alpha: f64,
    pub seed: u64,
    pub exact_fallback: bool,
    pub max_samples: u64,
    pub min_samples: u64,
}

impl EngineParams {
    pub fn new(engine: EngineKind) -> Self {
        Self {
            engine,
            mode: ResultMode::Full,
            samples: DEFAULT_STORE_SAMPLES,
            budget: None,
            error: None,
            alpha: 0.05,
            seed: 0,
            exact_fallback: false,
            max_samples: DEFAULT_SAMPLE_CAP,
            min_samples: DEFAULT_MIN_SAMPLES,
        }
    }

    fn check<T: Scalar>(&self, dataset: &Dataset<T>) -> Result<()> {
        crate::randomized::z_value(self.alpha)?;
        if self.engine != EngineKind::Random && self.mode != ResultMode::Full {
            return Err(Error::InvalidArgument(format!(
                "engine `{}` enumerates full rankings only; use the random engine for top-k",
                self.engine
            )));
        }
        if self.engine == EngineKind::TwoD && dataset.dim() != 2 {
            return Err(Error::InvalidArgument(format!(
                "engine `2d` needs two attributes, the dataset has {}",
                dataset.dim()
            )));
        }
        if self.engine == EngineKind::Random && self.budget.is_some() && self.error.is_some() {
            return Err(Error::InvalidArgument("give either a sample budget or an error target, not both".into()));
        }
        if self.engine != EngineKind::Random && (self.budget.is_some() || self.error.is_some()) {
            return Err(Error::InvalidArgument("budget and error apply to the random engine only".into()));
        }
        Ok(())
    }
}

/// One side of an exchange: `above` outranks `below` throughout the region.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairOrder {
    pub above: String,
    pub below: String,
}

/// Geometry of a returned or verified region.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionReport {
    /// Angle range of a two-attribute region.
    Interval { lo: f64, hi: f64, quadrant_stability: f64 },
    /// Intersection of exchange half-spaces.
    HalfSpaces { half_spaces: Vec<PairOrder> },
}

impl RegionReport {
    fn from_half_spaces<T: Scalar>(dataset: &Dataset<T>, hs: &[HalfSpace<T>]) -> Self {
        let half_spaces = hs
            .iter()
            .map(|h| {
                let (above, below) = h.winner_loser(dataset);
                PairOrder { above: above.to_owned(), below: below.to_owned() }
            })
            .collect();
        RegionReport::HalfSpaces { half_spaces }
    }
}

/// One result of a get-next stream.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NextRecord {
    /// Zero-based position in the stream.
    pub index: usize,
    /// One-based: the `rank`-th most stable result.
    pub rank: usize,
    pub stability: f64,
    /// `None` for exact results.
    pub confidence_error: Option<f64>,
    pub weights: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranking: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topk: Option<TopKResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionReport>,
    /// Samples behind the estimate, for sampled engines.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
}

impl NextRecord {
    /// Members of the ranking or top-k result.
    pub fn members(&self) -> &[String] {
        match (&self.ranking, &self.topk) {
            (Some(r), _) => r,
            (None, Some(t)) => &t.members,
            (None, None) => &[],
        }
    }
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

// One state per session; variant size is irrelevant.
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug)]
enum State<T> {
    TwoD(RegionHeap<T>),
    Md(ArrangementState<T>),
    Random { state: MonteCarloState<T>, sampler: RoiSampler<T> },
}

/// A running get-next stream over one dataset.
#[derive(Clone, Debug)]
pub struct Engine<T> {
    params: EngineParams,
    state: State<T>,
    produced: usize,
    exhausted: bool,
}

impl<T: Scalar> Engine<T> {
    /// Validate the parameters and build the engine state: the full sweep for
    /// `2d`, the sample store and exchange set for `md`, nothing for `random`.
    pub fn new(dataset: &Dataset<T>, roi: &RegionOfInterest<T>, params: EngineParams) -> Result<Self> {
        params.check(dataset)?;
        roi.check_dim(dataset.dim())?;
        let state = match params.engine {
            EngineKind::TwoD => State::TwoD(ray_sweep_roi(dataset, roi)?),
            EngineKind::Md => {
                let opts = MdOptions {
                    exact_fallback: params.exact_fallback,
                    tiny_window: DEFAULT_TINY_WINDOW,
                    alpha: params.alpha,
                };
                State::Md(ArrangementState::new(dataset, roi.clone(), params.samples, params.seed, opts)?)
            }
            EngineKind::Random => State::Random {
                state: MonteCarloState::new(params.mode, params.seed),
                sampler: RoiSampler::new(roi.clone())?,
            },
        };
        Ok(Self { params, state, produced: 0, exhausted: false })
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    /// Number of results handed out so far.
    pub fn produced(&self) -> usize {
        self.produced
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    /// Total number of regions, when the engine knows it upfront.
    pub fn region_count(&self) -> Option<usize> {
        match &self.state {
            State::TwoD(heap) => Some(heap.len()),
            _ => None,
        }
    }

    /// The next most stable result, or `None` once the engine is exhausted.
    pub fn next(&mut self, dataset: &Dataset<T>) -> Result<Option<NextRecord>> {
        if self.exhausted {
            return Ok(None);
        }
        let index = self.produced;
        let record = match &mut self.state {
            State::TwoD(heap) => get_next_2d(heap, dataset).map(|n| NextRecord {
                index,
                rank: index + 1,
                stability: n.stability.to_f64_lossy(),
                confidence_error: None,
                weights: to_f64(n.weights.as_slice()),
                ranking: Some(n.ranking.order),
                topk: None,
                region: Some(RegionReport::Interval {
                    lo: n.interval.lo.to_f64_lossy(),
                    hi: n.interval.hi.to_f64_lossy(),
                    quadrant_stability: (n.interval.width() / T::FRAC_PI_2()).to_f64_lossy(),
                }),
                samples: None,
            }),
            State::Md(state) => state.get_next_md(dataset)?.map(|n| NextRecord {
                index,
                rank: index + 1,
                stability: n.stability.value.to_f64_lossy(),
                confidence_error: Some(n.stability.confidence_error.to_f64_lossy()),
                weights: to_f64(n.weights.as_slice()),
                ranking: Some(n.ranking.order),
                topk: None,
                region: Some(RegionReport::from_half_spaces(dataset, &n.constraints)),
                samples: Some(n.stability.samples),
            }),
            State::Random { state, sampler } => {
                let result = match self.params.error {
                    Some(target) => {
                        let fe = FixedError {
                            target,
                            alpha: self.params.alpha,
                            max_samples: self.params.max_samples,
                            min_samples: self.params.min_samples,
                        };
                        Some(state.get_next_fixed_error(dataset, sampler, fe)?)
                    }
                    None => state.get_next_fixed_budget(
                        dataset,
                        sampler,
                        self.params.budget.unwrap_or(DEFAULT_BUDGET),
                        self.params.alpha,
                    )?,
                };
                result.map(|r| {
                    let (ranking, topk) = match r.key {
                        ResultKey::Ranking(rk) => (Some(rk.order), None),
                        ResultKey::TopK(t) => (None, Some(t)),
                    };
                    NextRecord {
                        index,
                        rank: index + 1,
                        stability: r.estimate.value.to_f64_lossy(),
                        confidence_error: Some(r.estimate.confidence_error.to_f64_lossy()),
                        weights: to_f64(r.weights.as_slice()),
                        ranking,
                        topk,
                        region: None,
                        samples: Some(r.estimate.samples),
                    }
                })
            }
        };
        match record {
            Some(_) => self.produced += 1,
            None => self.exhausted = true,
        }
        Ok(record)
    }
}

/// Settings of [`verify`] for datasets with more than two attributes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub samples: usize,
    pub seed: u64,
    pub alpha: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { samples: DEFAULT_STORE_SAMPLES, seed: 0, alpha: 0.05 }
    }
}

/// Outcome of a feasible verification.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub ranking: Vec<String>,
    pub stability: f64,
    /// `None` for exact results.
    pub confidence_error: Option<f64>,
    pub region: RegionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
}

/// Stability of `ranking` inside `roi`: exact for two attributes, sampled otherwise.
pub fn verify<T: Scalar>(
    dataset: &Dataset<T>,
    ranking: &Ranking,
    roi: &RegionOfInterest<T>,
    opts: VerifyOptions,
) -> Result<Verified<VerifyReport>> {
    roi.check_dim(dataset.dim())?;
    if dataset.dim() == 2 {
        let scope = (!roi.is_full()).then_some(roi);
        return Ok(match verify_2d(dataset, ranking, scope)? {
            Verified::Feasible(r) => Verified::Feasible(VerifyReport {
                ranking: ranking.order.clone(),
                stability: r.stability.to_f64_lossy(),
                confidence_error: None,
                region: RegionReport::Interval {
                    lo: r.interval.lo.to_f64_lossy(),
                    hi: r.interval.hi.to_f64_lossy(),
                    quadrant_stability: r.quadrant_stability.to_f64_lossy(),
                },
                samples: None,
            }),
            Verified::Infeasible(why) => Verified::Infeasible(why),
        });
    }
    let sampler = RoiSampler::new(roi.clone())?;
    let store = SampleStore::draw(&sampler, opts.samples, opts.seed)?;
    Ok(match verify_md(dataset, ranking, roi, &store, opts.alpha)? {
        Verified::Feasible(r) => Verified::Feasible(VerifyReport {
            ranking: ranking.order.clone(),
            stability: r.stability.value.to_f64_lossy(),
            confidence_error: Some(r.stability.confidence_error.to_f64_lossy()),
            region: RegionReport::from_half_spaces(dataset, &r.constraints),
            samples: Some(r.stability.samples),
        }),
        Verified::Infeasible(why) => Verified::Infeasible(why),
    })
}

/// [`verify`] on the ranking induced by `weights`.
pub fn verify_weights<T: Scalar>(
    dataset: &Dataset<T>,
    weights: &WeightVector<T>,
    roi: &RegionOfInterest<T>,
    opts: VerifyOptions,
) -> Result<Verified<VerifyReport>> {
    let ranking = crate::model::rank(dataset, weights)?;
    verify(dataset, &ranking, roi, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::toy;

    #[test]
    fn toy_streams() {
        let ds = toy::<f64>();
        let roi = RegionOfInterest::full(2);
        let mut e = Engine::new(&ds, &roi, EngineParams::new(EngineKind::TwoD)).unwrap();
        assert_eq!(e.region_count(), Some(11));
        let first = e.next(&ds).unwrap().unwrap();
        assert!((first.stability - 0.3948).abs() < 1e-3);
        assert_eq!((first.index, first.rank), (0, 1));
        assert!(first.confidence_error.is_none());
        let mut n = 1;
        while e.next(&ds).unwrap().is_some() {
            n += 1;
        }
        assert_eq!(n, 11);
        assert!(e.is_exhausted());

        let mut md =
            Engine::new(&ds, &roi, EngineParams { samples: 20_000, ..EngineParams::new(EngineKind::Md) }).unwrap();
        let m = md.next(&ds).unwrap().unwrap();
        assert_eq!(m.ranking, first.ranking);

        let params =
            EngineParams { mode: ResultMode::TopkSet(2), budget: Some(5000), ..EngineParams::new(EngineKind::Random) };
        let mut r = Engine::new(&ds, &roi, params).unwrap();
        let a = r.next(&ds).unwrap().unwrap();
        let b = r.next(&ds).unwrap().unwrap();
        assert_ne!(a.topk, b.topk);
        assert_eq!(a.samples, Some(5000));
    }

    #[test]
    fn incompatible_params() {
        let ds = toy::<f64>();
        let roi = RegionOfInterest::full(2);
        let topk = EngineParams { mode: ResultMode::TopkSet(2), ..EngineParams::new(EngineKind::TwoD) };
        assert!(Engine::new(&ds, &roi, topk).is_err());
        let both = EngineParams { budget: Some(10), error: Some(0.1), ..EngineParams::new(EngineKind::Random) };
        assert!(Engine::new(&ds, &roi, both).is_err());
        let ds3 = crate::generate_synthetic::<f64>(5, 3, crate::SyntheticMode::Independent, 1).unwrap();
        assert!(Engine::new(&ds3, &RegionOfInterest::full(3), EngineParams::new(EngineKind::TwoD)).is_err());
    }

    #[test]
    fn verify_routes_by_dimension() {
        let ds = toy::<f64>();
        let w = WeightVector::from_f64(&[1.0, 1.0]).unwrap();
        let v = verify_weights(&ds, &w, &RegionOfInterest::full(2), VerifyOptions::default()).unwrap();
        let r = v.feasible().unwrap();
        assert!((r.stability - 0.0880).abs() < 1e-3);
        assert_eq!(r.ranking, ["t2", "t4", "t3", "t5", "t1"]);

        let ds3 = Dataset::<f64>::from_rows(&[("a", &[0.9, 0.9, 0.9]), ("b", &[0.1, 0.2, 0.3])]).unwrap();
        let roi3 = RegionOfInterest::full(3);
        let bad = Ranking { order: vec!["b".into(), "a".into()] };
        let opts = VerifyOptions { samples: 1000, ..VerifyOptions::default() };
        match verify(&ds3, &bad, &roi3, opts).unwrap() {
            Verified::Infeasible(why) => assert!(why.to_string().contains("`a` outranks `b`")),
            other => panic!("{other:?}"),
        }
    }
}

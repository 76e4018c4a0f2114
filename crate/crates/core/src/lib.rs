//! Stability analysis of rankings produced by linear scoring functions.
//!
//! A ranking of multi-attribute items is *stable* when a large share of the
//! acceptable weight vectors produce it. The crate offers three engines:
//!
//! * [`exact2d`]: exact verification and enumeration for two attributes;
//! * [`exactmd`]: lazy best-first arrangement construction for any dimension,
//!   with Monte-Carlo volume estimates;
//! * [`randomized`]: pure Monte-Carlo discovery of full rankings or top-k results.
//!
//! Everything is generic over the scalar type ([`Scalar`]); the `*64` and
//! `*32` aliases below fix it for the common cases.

pub mod engine;
pub mod error;
pub mod exact2d;
pub mod exactmd;
pub mod geometry;
mod lp;
pub mod model;
pub mod randomized;
pub mod rng;
pub mod sampler;
pub mod scalar;
mod threads;

pub use error::{Error, Result};
pub use geometry::{AngleInterval, Cone, HalfSpace, Hyperplane, Sign};
pub use model::{
    generate_synthetic, load_dataset, rank, top_k, AngleVector, AttrMeta, Constraint, Dataset, Direction, Item,
    Ranking, RegionOfInterest, Relation, RoiKind, Schema, SyntheticMode, TopKMode, TopKResult, WeightVector,
};

pub use randomized::{ResultMode, StabilityEstimate};
pub use rng::RngStream;
pub use scalar::Scalar;
pub use threads::thread_pool;

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type WeightVector64 = WeightVector<f64>;
pub type WeightVector32 = WeightVector<f32>;
pub type Roi64 = RegionOfInterest<f64>;
pub type Roi32 = RegionOfInterest<f32>;
pub type RegionHeap64 = exact2d::RegionHeap<f64>;
pub type ArrangementState64 = exactmd::ArrangementState<f64>;
pub type MonteCarloState64 = randomized::MonteCarloState<f64>;

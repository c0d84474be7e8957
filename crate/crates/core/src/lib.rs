//! Behavioral monitoring engine for IoT network traffic.
//!
//! The pipeline goes: packet records -> per-device flow counters
//! ([`flowtable`]) -> multi-timescale attribute instances ([`attributes`]) ->
//! Z-score/PCA preprocessing ([`preprocess`]) -> per-device one-class
//! clustering models ([`oneclass`]) -> conflict resolution and consistency
//! scoring ([`monitor`]). Supervised baselines (Naive Bayes Multinomial,
//! random forest, two-stage hierarchy) live in [`supervised`], and byte-level
//! payload entropy analysis in [`entropy`].

pub mod attributes;
pub mod entropy;
mod error;
pub mod flowtable;
pub mod ingest;
mod mac;
pub mod monitor;
pub mod oneclass;
pub mod preprocess;
pub mod supervised;

pub use error::Error;
pub use mac::Mac;

pub type Result<T> = std::result::Result<T, Error>;

//! Network-telemetry toolkit: handover-driven clustering of base stations
//! onto controllers, and local- vs cluster-based forecasting of per-station
//! active-user counts, evaluated on synthetic mobility traces.
//!
//! The crate is organized around the pipeline stages:
//!
//! * [`telemetry`] — event/series data model, trace ingestion, binning.
//! * [`mobsim`] — seeded synthetic trace generator with mobility corridors.
//! * [`cluster`] — transition graph, spectral embedding, size-constrained
//!   K-means, and the geographic baseline.
//! * [`eval`] — intra/inter handover ratios, periodic re-clustering
//!   experiments, fiber propagation delays.
//! * [`forecast`] — feature construction, scaling, BRR/GPR/RFR/ARMA
//!   regressors, expanding-window cross-validation, experiment driver.
//! * [`routes`] — prediction-driven route metrics and ranking.

pub mod cluster;
pub mod eval;
pub mod forecast;
pub mod geo;
pub mod mobsim;
pub mod routes;
pub mod telemetry;

/// Derives an independent stream seed from a base seed and a stream tag
/// (splitmix64 finalizer). Used everywhere a subsystem needs its own RNG.
pub fn stream_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

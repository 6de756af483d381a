//! Finitely supported measures, convolution powers, return probabilities
//! and trajectory estimators.

mod cache;
mod distribution;
mod measure;
mod monte_carlo;
mod series;

pub use cache::{CacheSidecar, DistributionCache, CACHE_ENV};
pub use distribution::{
    convolution_powers, convolve, SparseDistribution, DEFAULT_PRUNE_EPS, DEFAULT_SUPPORT_CAP,
};
pub use measure::{make_measure, FiniteMeasure, MeasureSpec, Parity, DEFAULT_ADMISSIBILITY_RADIUS};
pub use monte_carlo::{
    entropy_estimate, escape_rate, green_cocycle_rate, sample_endpoints, sample_path, Estimate,
};
pub use series::{
    return_sequence, return_sequence_cached, return_sequence_capped, spectral_radius_estimate, ReturnSeries,
    SpectralDiagnostics,
};

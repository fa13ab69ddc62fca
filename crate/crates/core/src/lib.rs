//! Smoothness outlier detection for histograms over shared bins.
//!
//! Each histogram is summarised by its discrete total variation (DTV), the
//! sum of absolute differences between adjacent bins. Across a set of
//! histograms the DTV is modelled as `a N + b sqrt(N)` in the sample size
//! `N`, and histograms far from the fit relative to `sqrt(N)` are flagged.

pub mod baseline;
pub mod distribution;
pub mod edtv;
pub mod error;
pub mod experiments;
pub mod hist;
pub mod io;
pub mod model;
pub mod numeric;
pub mod rng;

pub use distribution::DistributionSpec;
pub use error::{Result, TvorError};
pub use hist::{circular_dtv, dtv, Histogram};
pub use rng::RngSeed;

//! Multifractal time-series analysis for daily price data.
//!
//! - [`ingest`]: CSV loading of daily closes
//! - [`transform`]: returns, absolute returns, volatility increments, jackknife statistics
//! - [`mfdfa`]: multifractal detrended fluctuation analysis and generalized Hurst exponents
//! - [`spectrum`]: singularity spectrum, Δh, Δα and the market deficiency measure
//! - [`rolling`]: rolling-window evolution, event annotation, period summaries
//! - [`synth`]: white noise, fractional Gaussian noise, binomial cascades, shuffling
//! - [`hurstscale`]: finite-sample Hurst correction
//! - [`pipeline`]: the full batch run with a reproducibility manifest
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the `*F64`/`*F32`
//! aliases below name the common instantiations.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hurstscale;
pub mod ingest;
pub mod io;
pub mod mfdfa;
pub mod pipeline;
pub mod regress;
pub mod rolling;
pub mod scalar;
pub mod spectrum;
pub mod synth;
pub mod transform;

pub use error::{Error, ErrorClass, Result};
pub use mfdfa::{mfdfa, GheCurve, MfdfaConfig, MfdfaError};
pub use scalar::Scalar;
pub use transform::{DerivedSeries, SeriesKind};

pub type PriceSeriesF64 = ingest::PriceSeries<f64>;
pub type PriceSeriesF32 = ingest::PriceSeries<f32>;
pub type DerivedSeriesF64 = DerivedSeries<f64>;
pub type DerivedSeriesF32 = DerivedSeries<f32>;
pub type MfdfaConfigF64 = MfdfaConfig<f64>;
pub type MfdfaConfigF32 = MfdfaConfig<f32>;
pub type GheCurveF64 = GheCurve<f64>;
pub type GheCurveF32 = GheCurve<f32>;
pub type AlphaCurveF64 = spectrum::AlphaCurve<f64>;
pub type AlphaCurveF32 = spectrum::AlphaCurve<f32>;
pub type RollingResultF64 = rolling::RollingResult<f64>;
pub type RollingResultF32 = rolling::RollingResult<f32>;
pub type ScalingFitF64 = hurstscale::ScalingFit<f64>;
pub type ScalingFitF32 = hurstscale::ScalingFit<f32>;

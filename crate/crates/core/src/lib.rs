//! Finite-alphabet channels with random state: exact information measures,
//! Gel'fand-Pinsker capacity solvers, information-spectrum estimators, random
//! coding simulation and the coded-state rate region.
//!
//! Exact computations are generic over the scalar ([`scalar::Real`], for
//! `f32` and `f64`); Monte Carlo paths run in `f64`. All logarithms are
//! natural and all rates are in nats.

pub mod capacity;
pub mod coding;
pub mod error;
pub mod info;
pub mod mixed;
mod optimize;
pub mod prob;
pub mod region;
pub mod rng;
pub mod scalar;
pub mod spec_file;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Pmf64 = prob::Pmf<f64>;
pub type Pmf32 = prob::Pmf<f32>;
pub type ConditionalPmf64 = prob::ConditionalPmf<f64>;
pub type ConditionalPmf32 = prob::ConditionalPmf<f32>;
pub type ChannelKernel64 = prob::ChannelKernel<f64>;
pub type ChannelKernel32 = prob::ChannelKernel<f32>;
pub type GpPolicy64 = prob::GpPolicy<f64>;
pub type GpPolicy32 = prob::GpPolicy<f32>;
pub type Table64 = prob::Table<f64>;
pub type Table32 = prob::Table<f32>;
pub type CapacityResult64 = capacity::CapacityResult<f64>;
pub type CapacityResult32 = capacity::CapacityResult<f32>;
pub type MixtureSpec64 = mixed::MixtureSpec<f64>;
pub type MixtureSpec32 = mixed::MixtureSpec<f32>;
pub type RegionPoint64 = region::RegionPoint<f64>;
pub type RegionPoint32 = region::RegionPoint<f32>;

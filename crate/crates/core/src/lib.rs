//! Wavelet-subband CycleGAN denoising for multi-band rasters.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision used by the pipelines.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod flows;
pub mod metrics;
pub mod nn;
pub mod noise;
pub mod plane;
pub mod raster;
pub mod scalar;
pub mod train;
pub mod wavelet;

pub use error::{Error, Result};
pub use plane::Plane;
pub use raster::MultiBandRaster;
pub use scalar::Scalar;

pub type Plane32 = Plane<f32>;
pub type Plane64 = Plane<f64>;
pub type Raster = MultiBandRaster<f32>;
pub type Raster64 = MultiBandRaster<f64>;
pub type Tensor32 = nn::Tensor<f32>;
pub type Tensor64 = nn::Tensor<f64>;
pub type Pyramid32 = wavelet::WaveletPyramid<f32>;
pub type Store = data::DomainStore<f32>;

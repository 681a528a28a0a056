//! Render-and-compare viewpoint alignment.
//!
//! The crate is generic over the floating point type through [`Scalar`];
//! `*F64` / `*F32` aliases are provided for the common instantiations.

pub mod alignment;
pub mod correspondence;
pub mod datagen;
pub mod error;
pub mod estimator;
pub mod grid;
pub mod harness;
pub mod mulaw;
pub mod renderer;
pub mod scalar;
pub mod viewpoint;

pub use error::{Error, Result};
pub use grid::{Cell, Mask};
pub use scalar::Scalar;

pub type ViewpointF64 = viewpoint::Viewpoint<f64>;
pub type ViewpointF32 = viewpoint::Viewpoint<f32>;
pub type ViewpointDeltaF64 = viewpoint::ViewpointDelta<f64>;
pub type ViewpointDeltaF32 = viewpoint::ViewpointDelta<f32>;
pub type BinningSchemeF64 = mulaw::BinningScheme<f64>;
pub type BinningSchemeF32 = mulaw::BinningScheme<f32>;
pub type FeatureMapF64 = correspondence::FeatureMap<f64>;
pub type FeatureMapF32 = correspondence::FeatureMap<f32>;
pub type CorrelationTensorF64 = correspondence::CorrelationTensor<f64>;
pub type CorrelationTensorF32 = correspondence::CorrelationTensor<f32>;
pub type RenderF64 = renderer::Render<f64>;
pub type RenderF32 = renderer::Render<f32>;
pub type AlignmentTrajectoryF64 = alignment::AlignmentTrajectory<f64>;
pub type AlignmentTrajectoryF32 = alignment::AlignmentTrajectory<f32>;

//! Simulation and surrogate modelling of thermal interface material (TIM)
//! spreading under compression.
//!
//! The pipeline is: a [`pattern::DispensePattern`] is rasterized onto a
//! [`grid::TimGrid`] by [`raster::discretize`], compressed either by the
//! height-relaxation heuristic ([`heuristic::compress`]) or by a trained
//! convolutional surrogate ([`surrogate::SurrogateModel`]), and compared with
//! the error and timing tools in [`metrics`].

pub mod dataset;
pub mod grid;
pub mod heuristic;
pub mod metrics;
pub mod pattern;
pub mod raster;
pub mod surrogate;

pub use grid::{GridSpec, TimGrid};
pub use heuristic::{compress, Boundary, CompressionConfig, CompressionResult, Schedule};
pub use pattern::DispensePattern;
pub use raster::discretize;

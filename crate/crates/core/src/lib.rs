//! Streaming traffic-matrix analysis.
//!
//! Packet records are grouped into windows of a fixed number of valid
//! packets ([`ingest`]), aggregated into sparse origin-destination matrices
//! ([`matrix`]), decomposed into topology categories ([`topology`]), and
//! reduced to log-binned degree distributions ([`distributions`]) that are
//! fitted with a two-parameter modified Zipf–Mandelbrot model
//! ([`zm_model`], [`zm_fit`]). [`synth`] produces planted streams for
//! testing.
//!
//! The probability and model code is generic over [`Scalar`] (`f32` or
//! `f64`); the aliases below fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod ingest;
pub mod matrix;
pub mod pipeline;
pub mod scalar;
pub mod synth;
pub mod topology;
pub mod zm_fit;
pub mod zm_model;

pub use scalar::Scalar;

pub use ingest::{PacketRecord, Protocol, ValidityPolicy};
pub use matrix::{Quantity, TrafficMatrix};
pub use topology::{Category, TopologyDecomposition};

pub type ZmParams = zm_model::ZmParams<f64>;
pub type ZmFit = zm_fit::ZmFit<f64>;
pub type BinnedDistribution = distributions::BinnedDistribution<f64>;
pub type WindowSummary = pipeline::WindowSummary<f64>;

pub type ZmParams32 = zm_model::ZmParams<f32>;
pub type ZmFit32 = zm_fit::ZmFit<f32>;
pub type BinnedDistribution32 = distributions::BinnedDistribution<f32>;

//! Explainable one-step-ahead forecasting on empirical mode decompositions.
//!
//! A series is decomposed into intrinsic mode functions ([`emd`]), windowed
//! into a multichannel dataset ([`series`]), fitted with an MLP or LSTM
//! forecaster ([`nn`]) and explained per channel with DeepSHAP
//! ([`attribution`]). [`pipeline`] ties the stages together and writes the
//! run artifacts.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attribution;
pub mod emd;
pub mod error;
pub mod fixtures;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod seed;
pub mod series;

pub use error::{Error, Result};

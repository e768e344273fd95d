//! Unsupervised spiking neural network pipeline for UWB LOS/NLOS channel
//! estimation.
//!
//! The pipeline turns raw UWB channel records (RF diagnostic registers plus a
//! channel impulse response) into Poisson rate-coded spike trains, expands
//! them through fixed-weight recurrent LIF reservoirs ("liquids"), and
//! classifies the resulting spike-count patterns with an STDP-trained spiking
//! self-organizing map. No labels are used anywhere in training; labels enter
//! only when naming the map's neurons after the fact.
//!
//! Modules follow the data path: [`dataset`] → [`features`] → [`encoding`] →
//! [`liquid`] (built from [`lif`] neurons) → [`som`] → [`metrics`], with
//! [`pipeline`] wiring the ten ablation strategies together and [`synthetic`]
//! providing a constructed separable dataset for data-free runs.

pub mod config;
pub mod dataset;
pub mod encoding;
pub mod error;
pub mod features;
pub mod lif;
pub mod liquid;
pub mod metrics;
pub mod pipeline;
pub mod seeds;
pub mod som;
pub mod synthetic;

pub use error::{Error, Result};

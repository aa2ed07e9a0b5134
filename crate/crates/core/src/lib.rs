//! Keyword spotting for microcontroller-class targets.
//!
//! The crate covers the whole inference stack without training:
//!
//! * [`features`]: MFCC frontend, WAV decoding and posterior smoothing.
//! * [`model`]: the layer-graph model, its compact text notation and shape inference.
//! * [`kernels`]: floating-point reference kernels for every layer family and full-model inference.
//! * [`quant`]: 8-bit fixed-point formats, progressive per-layer quantization and integer inference.
//! * [`estimator`]: memory/operation accounting and the S/M/L constraint classes.
//! * [`search`]: hyperparameter grid enumeration, Pareto fronts and the DS-CNN scalability ladder.
//! * [`runtime`]: the clip and streaming pipelines used by the `kws` binary.

pub mod config;
pub mod container;
pub mod error;
pub mod estimator;
pub mod features;
pub mod kernels;
pub mod model;
pub mod quant;
pub mod runtime;
pub mod search;

pub use error::{Error, Result};

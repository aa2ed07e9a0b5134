//! 8-bit fixed-point quantization.
//!
//! A code `B` in `[-128, 127]` with fraction length `N` stands for `B · 2^-N`.
//! `N` may be negative and is kept within `[-16, 16]`.

mod fixed;
mod infer;
mod model;
mod progressive;

use serde::Serialize;

use crate::error::{Error, Result};

pub use fixed::{gate_index, requantize, round_shift, GATE_INPUT_FRAC, GATE_OUTPUT_FORMAT};
pub use infer::{q_model_forward, q_model_logits, QLogits};
pub use model::{ActivationFormats, QuantizedModel};
pub use progressive::{
    argmax, calibration_metric, collect_activation_ranges, quantize_model_progressive, quantize_model_range,
    CalibrationSample, LayerReport, QuantReport, SEARCH_RADIUS,
};

/// Fraction length of an 8-bit fixed-point value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct QFormat(i8);

impl QFormat {
    pub const MIN_N: i32 = -16;
    pub const MAX_N: i32 = 16;

    pub fn new(n: i32) -> Result<Self> {
        if (Self::MIN_N..=Self::MAX_N).contains(&n) {
            Ok(QFormat(n as i8))
        } else {
            Err(Error::Quant(format!("fraction length {n} outside [{}, {}]", Self::MIN_N, Self::MAX_N)))
        }
    }

    /// Clamps `n` into the supported range.
    pub fn clamped(n: i32) -> Self {
        QFormat(n.clamp(Self::MIN_N, Self::MAX_N) as i8)
    }

    pub fn n(self) -> i32 {
        self.0 as i32
    }

    pub fn step(self) -> f64 {
        2f64.powi(-self.n())
    }

    pub fn min_value(self) -> f64 {
        q_dequantize(i8::MIN, self)
    }

    pub fn max_value(self) -> f64 {
        q_dequantize(i8::MAX, self)
    }

    /// Every `N` in the supported range, ascending.
    pub fn all() -> impl DoubleEndedIterator<Item = QFormat> {
        (Self::MIN_N..=Self::MAX_N).map(|n| QFormat(n as i8))
    }
}

/// 8-bit tensor with one fraction length.
#[derive(Debug, Clone, PartialEq)]
pub struct QTensor {
    pub dims: Vec<usize>,
    pub data: Vec<i8>,
    pub format: QFormat,
}

impl QTensor {
    /// Quantizes with the range-optimal fraction length.
    pub fn from_values(dims: Vec<usize>, values: &[f64]) -> Result<Self> {
        if dims.iter().product::<usize>() != values.len() {
            return Err(Error::DimMismatch(format!("dims {dims:?} given {} values", values.len())));
        }
        let format = choose_fraction_length(values, Objective::Range)?;
        Ok(QTensor { dims, data: values.iter().map(|&v| q_quantize(v, format)).collect(), format })
    }

    pub fn dequantize(&self) -> Vec<f64> {
        self.data.iter().map(|&c| q_dequantize(c, self.format)).collect()
    }
}

pub fn q_dequantize(code: i8, fmt: QFormat) -> f64 {
    code as f64 * fmt.step()
}

/// Round-half-to-even of `value · 2^N`, saturated to `[-128, 127]`. NaN maps to 0.
pub fn q_quantize(value: f64, fmt: QFormat) -> i8 {
    let scaled = (value * 2f64.powi(fmt.n())).round_ties_even();
    if scaled.is_nan() {
        0
    } else {
        scaled.clamp(i8::MIN as f64, i8::MAX as f64) as i8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Objective {
    /// Largest `N` that represents every value without saturation.
    Range,
    /// `N` minimising the squared quantization error.
    Sqnr,
}

/// Picks a fraction length for `values`. All-zero input yields `N = 7`.
/// Ties under [`Objective::Sqnr`] go to the larger `N`.
pub fn choose_fraction_length(values: &[f64], objective: Objective) -> Result<QFormat> {
    if values.is_empty() {
        return Err(Error::Quant("cannot choose a fraction length for no values".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Quant("values must be finite".into()));
    }
    if values.iter().all(|&v| v == 0.0) {
        return Ok(QFormat(7));
    }
    match objective {
        Objective::Range => {
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            Ok(QFormat::all()
                .rev()
                .find(|&f| hi <= f.max_value() && lo >= f.min_value())
                .unwrap_or(QFormat(QFormat::MIN_N as i8)))
        }
        Objective::Sqnr => {
            let mut best = (f64::INFINITY, QFormat(0));
            for f in QFormat::all() {
                let err: f64 = values
                    .iter()
                    .map(|&v| {
                        let d = v - q_dequantize(q_quantize(v, f), f);
                        d * d
                    })
                    .sum();
                if err <= best.0 {
                    best = (err, f);
                }
            }
            Ok(best.1)
        }
    }
}

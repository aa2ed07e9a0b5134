//! Memory and operation accounting for 8-bit deployment.
//!
//! * Parameters and activations take one byte each.
//! * Activation memory is reused between layers, so the activation term is
//!   the largest `input + output` working set of any single layer.
//!   Recurrent layers hold their whole input sequence, the previous and
//!   current state and the step output.
//! * Operations count the multiply-adds of matrix products as two
//!   operations and bias additions as one. Gate nonlinearities, softmax
//!   and folded batch norm are free.
//! * KB means 1000 bytes.

mod classes;

use serde::Serialize;

use crate::error::Result;
use crate::model::{Layer, LayerShape, ModelSpec};

pub use classes::{classify, ConstraintClass, SizeClass};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerCost {
    pub name: String,
    pub param_count: u64,
    pub param_bytes: u64,
    pub act_in_elems: u64,
    pub act_out_elems: u64,
    pub ops: u64,
}

impl LayerCost {
    fn new(name: String, params: u64, act_in: u64, act_out: u64, ops: u64) -> Self {
        LayerCost {
            name,
            param_count: params,
            param_bytes: params,
            act_in_elems: act_in,
            act_out_elems: act_out,
            ops,
        }
    }

    pub fn act_bytes(&self) -> u64 {
        self.act_in_elems + self.act_out_elems
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceReport {
    pub layers: Vec<LayerCost>,
    pub param_bytes: u64,
    pub activation_bytes: u64,
    pub memory_bytes: u64,
    pub ops: u64,
    pub class: Option<SizeClass>,
}

impl ResourceReport {
    pub fn memory_kb(&self) -> f64 {
        self.memory_bytes as f64 / 1000.0
    }

    /// One-line summary such as `80.0 KB, 158.8 KOps, class S`.
    pub fn summary(&self) -> String {
        let class = self.class.map_or("none (exceeds L)".to_string(), |c| c.to_string());
        format!("{:.1} KB, {}, class {class}", self.memory_kb(), format_ops(self.ops))
    }
}

/// Operation count with a decimal prefix, one decimal place.
pub fn format_ops(ops: u64) -> String {
    let v = ops as f64;
    if v >= 1e6 {
        format!("{:.1} MOps", v / 1e6)
    } else if v >= 1e3 {
        format!("{:.1} KOps", v / 1e3)
    } else {
        format!("{ops} Ops")
    }
}

fn u(v: usize) -> u64 {
    v as u64
}

/// Per-layer cost rows. Separable convolutions produce a depthwise and a pointwise row.
pub fn layer_costs(model: &ModelSpec) -> Vec<LayerCost> {
    let mut rows = Vec::with_capacity(model.layers().len() + 4);
    for (layer, shape) in model.layers().iter().zip(model.shapes()) {
        let LayerShape { input, output, mid } = *shape;
        let name = layer.to_string();
        match *layer {
            Layer::FullyConnected { units } | Layer::LowRankLinear { units } | Layer::Logits { classes: units } => {
                let (n_in, n) = (u(input.elems()), u(units));
                rows.push(LayerCost::new(name, n_in * n + n, n_in, n, 2 * n_in * n + n));
            }
            Layer::Conv2d { features, kernel_t, kernel_f, .. } => {
                let taps = u(kernel_t * kernel_f * input.c);
                let params = taps * u(features) + u(features);
                let ops = u(output.elems()) * (2 * taps + 1);
                rows.push(LayerCost::new(name, params, u(input.elems()), u(output.elems()), ops));
            }
            Layer::DepthwiseSeparable { features, kernel, .. } => {
                let mid = u(mid.expect("separable layers carry a depthwise shape").elems());
                let (c_in, k2) = (u(input.c), u(kernel * kernel));
                rows.push(LayerCost::new(
                    format!("{name}/dw"),
                    k2 * c_in + c_in,
                    u(input.elems()),
                    mid,
                    mid * (2 * k2 + 1),
                ));
                rows.push(LayerCost::new(
                    format!("{name}/pw"),
                    c_in * u(features) + u(features),
                    mid,
                    u(output.elems()),
                    u(output.elems()) * (2 * c_in + 1),
                ));
            }
            Layer::AvgPool => {
                rows.push(LayerCost::new(name, 0, u(input.elems()), u(output.c), u(input.elems() + output.c)))
            }
            Layer::Gru { cells } => {
                let (steps, n_in, n) = (u(input.t), u(input.f * input.c), u(cells));
                let params = 3 * (n_in + n) * n + 3 * n;
                let ops = steps * (2 * 3 * (n_in + n) * n + 3 * n);
                rows.push(LayerCost::new(name, params, u(input.elems()), 2 * n + n, ops));
            }
            Layer::BasicLstm { cells } => {
                let (steps, n_in, n) = (u(input.t), u(input.f * input.c), u(cells));
                let params = 4 * (n_in + n) * n + 4 * n;
                let ops = steps * (2 * 4 * (n_in + n) * n + 4 * n);
                rows.push(LayerCost::new(name, params, u(input.elems()), 2 * (2 * n) + n, ops));
            }
            Layer::Lstm { cells, projection } => {
                let (steps, n_in, n) = (u(input.t), u(input.f * input.c), u(cells));
                let proj = projection.map_or(0, u);
                let h = if proj > 0 { proj } else { n };
                let gate_macs = 4 * n * (n_in + h);
                let params = gate_macs + 4 * n + 3 * n + n * proj;
                let ops = steps * (2 * (gate_macs + n * proj) + 4 * n + 2 * 3 * n);
                rows.push(LayerCost::new(name, params, u(input.elems()), 2 * (n + h) + h, ops));
            }
            Layer::BatchNorm | Layer::Softmax { .. } => rows.push(LayerCost::new(name, 0, 0, 0, 0)),
        }
    }
    rows
}

/// Total operations per inference and the per-layer breakdown.
pub fn count_ops(model: &ModelSpec) -> (Vec<u64>, u64) {
    let per: Vec<u64> = layer_costs(model).iter().map(|c| c.ops).collect();
    let total = per.iter().sum();
    (per, total)
}

/// Total memory in bytes: all parameters plus the peak activation working set.
pub fn count_memory(model: &ModelSpec) -> u64 {
    let rows = layer_costs(model);
    rows.iter().map(|c| c.param_bytes).sum::<u64>()
        + rows.iter().map(LayerCost::act_bytes).max().unwrap_or(0)
}

pub fn estimate(model: &ModelSpec) -> ResourceReport {
    let layers = layer_costs(model);
    let param_bytes = layers.iter().map(|c| c.param_bytes).sum();
    let activation_bytes = layers.iter().map(LayerCost::act_bytes).max().unwrap_or(0);
    let ops = layers.iter().map(|c| c.ops).sum();
    let memory_bytes = param_bytes + activation_bytes;
    ResourceReport {
        layers,
        param_bytes,
        activation_bytes,
        memory_bytes,
        ops,
        class: classify(memory_bytes, ops).map(|c| c.size),
    }
}

/// Estimates a model given as notation, for callers that only have text.
pub fn estimate_dsl(
    text: &str,
    family: crate::model::Family,
    frames: usize,
    coeffs: usize,
) -> Result<ResourceReport> {
    let model = crate::model::parse_model_dsl(text, family, frames, coeffs, crate::model::DEFAULT_CLASSES)?;
    Ok(estimate(&model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_model_dsl, Family};

    #[test]
    fn dnn_small_exact() {
        let m = parse_model_dsl("FC(144)-FC(144)-FC(144)", Family::Dnn, 25, 10, 12).unwrap();
        let r = estimate(&m);
        assert_eq!(r.param_bytes, 79_644);
        assert_eq!(r.activation_bytes, 250 + 144);
        assert_eq!(r.memory_bytes, 80_038);
        assert_eq!(r.ops, 158_844);
        assert_eq!(r.class, Some(SizeClass::S));
        assert_eq!(r.summary(), "80.0 KB, 158.8 KOps, class S");
    }

    #[test]
    fn ops_formatting() {
        assert_eq!(format_ops(999), "999 Ops");
        assert_eq!(format_ops(56_940_000), "56.9 MOps");
    }

    #[test]
    fn ops_are_additive_and_memory_matches() {
        let m = parse_model_dsl("C(48,10,4,2,2)-GRU(60)-GRU(60)-FC(84)", Family::Crnn, 49, 10, 12).unwrap();
        let (per, total) = count_ops(&m);
        assert_eq!(per.iter().sum::<u64>(), total);
        assert_eq!(count_memory(&m), estimate(&m).memory_bytes);
    }

    #[test]
    fn separable_rows_split() {
        let m = parse_model_dsl("C(64,10,4,2,2)-DSC(64,3,1)-AvgPool", Family::DsCnn, 49, 10, 12).unwrap();
        let names: Vec<_> = layer_costs(&m).into_iter().map(|c| c.name).collect();
        assert_eq!(names[1], "DSC(64,3,1)/dw");
        assert_eq!(names[2], "DSC(64,3,1)/pw");
    }

    #[test]
    fn batchnorm_is_free() {
        let a = parse_model_dsl("C(8,3,3,1,1)-FC(16)", Family::Cnn, 25, 10, 12).unwrap();
        let b = parse_model_dsl("C(8,3,3,1,1)-BN-FC(16)-BN", Family::Cnn, 25, 10, 12).unwrap();
        let (ra, rb) = (estimate(&a), estimate(&b));
        assert_eq!((ra.memory_bytes, ra.ops), (rb.memory_bytes, rb.ops));
    }

    #[test]
    fn gru_state_accounting() {
        let m = parse_model_dsl("GRU(154)", Family::Gru, 25, 10, 12).unwrap();
        let r = estimate(&m);
        assert_eq!(r.activation_bytes, 250 + 3 * 154);
        assert_eq!(r.memory_bytes, 78_802);
    }
}

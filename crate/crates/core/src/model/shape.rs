use serde::Serialize;

use super::{Layer, Padding, Shape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LayerShape {
    pub input: Shape,
    pub output: Shape,
    /// Depthwise-stage output of a separable convolution.
    pub mid: Option<Shape>,
}

/// Output length of a convolution along one axis, `None` when it would be empty.
pub fn conv_output_len(input: usize, kernel: usize, stride: usize, padding: Padding) -> Option<usize> {
    if stride == 0 || kernel == 0 || input == 0 {
        return None;
    }
    match padding {
        Padding::Valid => input.checked_sub(kernel).map(|d| d / stride + 1),
        Padding::Same => Some(input.div_ceil(stride)),
    }
}

fn checked_shape(t: usize, f: usize, c: usize) -> Option<Shape> {
    t.checked_mul(f)?.checked_mul(c)?;
    Some(Shape::new(t, f, c))
}

/// Infers per-layer input/output shapes for a layer chain.
///
/// Recurrent layers read `t` steps of `f·c` features and emit the full
/// output sequence only when the next non-normalisation layer is also
/// recurrent; otherwise they emit the last step.
pub fn infer_shapes(input: Shape, layers: &[Layer]) -> Result<Vec<LayerShape>> {
    let mut shapes = Vec::with_capacity(layers.len());
    let mut cur = input;
    for (i, layer) in layers.iter().enumerate() {
        let name = || format!("{i} ({layer})");
        let overflow = || Error::shape(name(), "activation size overflows");
        let mut mid = None;
        let out = match *layer {
            Layer::FullyConnected { units } | Layer::LowRankLinear { units } => Shape::vector(units),
            Layer::Logits { classes } => Shape::vector(classes),
            Layer::Softmax { classes } => {
                if cur != Shape::vector(classes) {
                    return Err(Error::shape(name(), format!("softmax expects {classes} logits, got {cur}")));
                }
                cur
            }
            Layer::Conv2d { features, kernel_t, kernel_f, stride_t, stride_f, padding } => {
                let t = conv_output_len(cur.t, kernel_t, stride_t, padding);
                let f = conv_output_len(cur.f, kernel_f, stride_f, padding);
                match (t, f) {
                    (Some(t), Some(f)) => checked_shape(t, f, features).ok_or_else(overflow)?,
                    _ => {
                        return Err(Error::shape(
                            name(),
                            format!("kernel {kernel_t}×{kernel_f} does not fit input {cur}"),
                        ))
                    }
                }
            }
            Layer::DepthwiseSeparable { features, kernel, stride } => {
                let t = conv_output_len(cur.t, kernel, stride, Padding::Same);
                let f = conv_output_len(cur.f, kernel, stride, Padding::Same);
                let (t, f) = t.zip(f).ok_or_else(|| Error::shape(name(), "empty output"))?;
                mid = Some(checked_shape(t, f, cur.c).ok_or_else(overflow)?);
                checked_shape(t, f, features).ok_or_else(overflow)?
            }
            Layer::AvgPool => Shape::vector(cur.c),
            Layer::BatchNorm => cur,
            Layer::BasicLstm { .. } | Layer::Lstm { .. } | Layer::Gru { .. } => {
                let width = layer.recurrent_output().unwrap();
                cur.f.checked_mul(cur.c).ok_or_else(overflow)?;
                let next_recurrent = layers[i + 1..]
                    .iter()
                    .find(|l| **l != Layer::BatchNorm)
                    .is_some_and(Layer::is_recurrent);
                if next_recurrent {
                    checked_shape(cur.t, 1, width).ok_or_else(overflow)?
                } else {
                    Shape::vector(width)
                }
            }
        };
        if out.elems() == 0 {
            return Err(Error::shape(name(), "empty output"));
        }
        shapes.push(LayerShape { input: cur, output: out, mid });
        cur = out;
    }
    Ok(shapes)
}

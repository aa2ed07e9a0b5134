use super::{
    avg_pool_global, conv2d_forward, depthwise_forward, fc_forward, gru_step, lstm_step, pointwise_forward, LayerParams,
    ModelWeights, Real, RnnState, Tensor,
};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::model::{Layer, ModelSpec, Shape};

/// Where an activation is observed during a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SiteKind {
    /// Model input, reported once with `layer = 0`.
    Input,
    /// Depthwise-stage output of a separable convolution, or an LSTM cell state.
    Mid,
    /// Layer output. Recurrent layers report the output state after every step.
    Out,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActivationSite {
    pub layer: usize,
    pub kind: SiteKind,
}

/// Numerically stable softmax in `f64`.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<f64> {
    let max = logits.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|v| (v.as_f64() - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Class posteriors for one feature matrix.
pub fn model_forward<T: Real>(spec: &ModelSpec, weights: &ModelWeights<T>, features: &FeatureMatrix) -> Result<Vec<f64>> {
    let logits = model_forward_observed(spec, weights, features, |_, _| {})?;
    Ok(softmax(&logits))
}

/// Runs the model up to the logits, handing every activation to `hook`,
/// which may rewrite it in place (used for calibration and fake quantization).
pub fn model_forward_observed<T: Real>(
    spec: &ModelSpec,
    weights: &ModelWeights<T>,
    features: &FeatureMatrix,
    mut hook: impl FnMut(ActivationSite, &mut [T]),
) -> Result<Vec<T>> {
    let input = spec.input();
    if features.rows != input.t || features.cols != input.f {
        return Err(Error::DimMismatch(format!(
            "model expects {}×{} features, got {}×{}",
            input.t, input.f, features.rows, features.cols
        )));
    }
    if weights.layers.len() != spec.layers().len() {
        return Err(Error::DimMismatch(format!(
            "weights cover {} layers, model has {}",
            weights.layers.len(),
            spec.layers().len()
        )));
    }
    let mut x = Tensor::new(input, features.data.iter().map(|&v| T::lit(v)).collect())?;
    hook(ActivationSite { layer: 0, kind: SiteKind::Input }, &mut x.data);
    for (i, ((layer, params), shape)) in spec.layers().iter().zip(&weights.layers).zip(spec.shapes()).enumerate() {
        let site = |kind| ActivationSite { layer: i, kind };
        let mismatch = || Error::shape(format!("{i} ({layer})"), "weights do not match the layer");
        x = match (layer, params) {
            (Layer::BatchNorm, _) | (Layer::Softmax { .. }, _) => continue,
            (Layer::FullyConnected { .. } | Layer::LowRankLinear { .. } | Layer::Logits { .. }, LayerParams::Dense { w, b }) => {
                let relu = matches!(layer, Layer::FullyConnected { .. });
                Tensor::new(shape.output, fc_forward(&x.data, w, b, relu)?)?
            }
            (&Layer::Conv2d { stride_t, stride_f, padding, .. }, LayerParams::Conv { w, b }) => {
                conv2d_forward(&x, w, b, (stride_t, stride_f), padding, true)?
            }
            (&Layer::DepthwiseSeparable { stride, .. }, LayerParams::Separable { dw, dw_b, pw, pw_b }) => {
                let mut mid = depthwise_forward(&x, dw, dw_b, stride)?;
                hook(site(SiteKind::Mid), &mut mid.data);
                pointwise_forward(&mid, pw, pw_b, true)?
            }
            (Layer::AvgPool, _) => Tensor::new(shape.output, avg_pool_global(&x)?)?,
            (Layer::Gru { .. }, LayerParams::Gru(w)) => {
                let steps = split_steps(&x, w.input_size).ok_or_else(mismatch)?;
                let mut h = RnnState::<T>::gru(w.cells).h;
                let mut seq = Vec::with_capacity(steps.len() * w.cells);
                for xt in steps {
                    h = gru_step(xt, &h, w)?;
                    hook(site(SiteKind::Out), &mut h);
                    seq.extend_from_slice(&h);
                }
                sequence_output(shape.output, seq, w.cells)?
            }
            (Layer::BasicLstm { .. } | Layer::Lstm { .. }, LayerParams::Lstm(w)) => {
                let steps = split_steps(&x, w.input_size).ok_or_else(mismatch)?;
                let out = w.output_size();
                let mut state = RnnState::lstm(w.cells, out);
                let mut seq = Vec::with_capacity(steps.len() * out);
                for xt in steps {
                    state = lstm_step(xt, &state, w)?;
                    hook(site(SiteKind::Mid), &mut state.c);
                    hook(site(SiteKind::Out), &mut state.h);
                    seq.extend_from_slice(&state.h);
                }
                sequence_output(shape.output, seq, out)?
            }
            _ => return Err(mismatch()),
        };
        if x.shape != shape.output {
            return Err(Error::shape(format!("{i} ({layer})"), format!("produced {}, expected {}", x.shape, shape.output)));
        }
        if !matches!(layer, Layer::Gru { .. } | Layer::BasicLstm { .. } | Layer::Lstm { .. }) {
            hook(site(SiteKind::Out), &mut x.data);
        }
    }
    Ok(x.data)
}

/// Splits a `t × f × c` tensor into `t` steps of `f·c` features.
fn split_steps<T: Real>(x: &Tensor<T>, width: usize) -> Option<Vec<&[T]>> {
    (x.shape.f * x.shape.c == width && width > 0).then(|| x.data.chunks_exact(width).collect())
}

/// Keeps the whole sequence when the next layer is recurrent, otherwise the last step.
fn sequence_output<T: Real>(shape: Shape, seq: Vec<T>, width: usize) -> Result<Tensor<T>> {
    if shape.elems() == seq.len() {
        Tensor::new(shape, seq)
    } else {
        let last = seq[seq.len().saturating_sub(width)..].to_vec();
        Tensor::new(shape, last)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_model_dsl, Family};

    fn input(t: usize, f: usize, seed: u64) -> FeatureMatrix {
        let mut m = FeatureMatrix::zeros(t, f);
        for (k, v) in m.data.iter_mut().enumerate() {
            *v = (((k as u64 * 2654435761 + seed) % 1000) as f64 / 500.0) - 1.0;
        }
        m
    }

    #[test]
    fn every_family_produces_a_distribution() {
        for (dsl, fam) in [
            ("FC(16)-FC(16)", Family::Dnn),
            ("C(4,5,3,1,1)-C(4,3,3,2,1)-L(6)-FC(8)", Family::Cnn),
            ("LSTM(8)", Family::BasicLstm),
            ("LSTM(8), Projection(5)", Family::Lstm),
            ("GRU(6)-GRU(6)", Family::Gru),
            ("C(4,5,3,2,1)-GRU(6)-FC(8)", Family::Crnn),
            ("C(4,5,3,2,2)-DSC(4,3,1)-DSC(6,3,2)-AvgPool", Family::DsCnn),
        ] {
            let m = parse_model_dsl(dsl, fam, 9, 6, 4).unwrap();
            let w = ModelWeights::<f64>::random_scaled(&m, 3);
            let p = model_forward(&m, &w, &input(9, 6, 1)).unwrap();
            assert_eq!(p.len(), 4, "{dsl}");
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{dsl}");
        }
    }

    #[test]
    fn hook_sees_every_site() {
        let m = parse_model_dsl("C(4,5,3,2,2)-DSC(4,3,1)-AvgPool", Family::DsCnn, 9, 6, 3).unwrap();
        let w = ModelWeights::<f32>::random_scaled(&m, 1);
        let mut seen = Vec::new();
        model_forward_observed(&m, &w, &input(9, 6, 2), |s, _| seen.push(s)).unwrap();
        let kinds: Vec<_> = seen.iter().map(|s| (s.layer, s.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                (0, SiteKind::Input),
                (0, SiteKind::Out),
                (1, SiteKind::Mid),
                (1, SiteKind::Out),
                (2, SiteKind::Out),
                (3, SiteKind::Out)
            ]
        );
    }

    #[test]
    fn rejects_wrong_input_and_weights() {
        let m = parse_model_dsl("FC(8)", Family::Dnn, 5, 4, 3).unwrap();
        let w = ModelWeights::<f64>::zeros(&m);
        assert!(model_forward(&m, &w, &input(5, 3, 0)).is_err());
        let other = parse_model_dsl("FC(9)", Family::Dnn, 5, 4, 3).unwrap();
        assert!(model_forward(&other, &w, &input(5, 4, 0)).is_err());
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&[1000.0f64, 1000.0]);
        assert_eq!(p, vec![0.5, 0.5]);
    }
}

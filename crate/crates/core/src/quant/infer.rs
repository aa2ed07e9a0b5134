//! Integer inference. Products of 8-bit codes accumulate in `i32`; rescaling
//! and combining terms of different fraction lengths happen in `i128` with
//! round-half-to-even shifts, so only the final requantization saturates.

use super::fixed::{align, div_round, gate_index, lookup, requantize, sigmoid_table, tanh_table};
use super::{q_quantize, QFormat, QuantizedModel, GATE_OUTPUT_FORMAT};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::kernels::{same_padding_offset, softmax, GruWeights, LayerParams, LstmWeights, Matrix};
use crate::model::{conv_output_len, Layer, ModelSpec, Padding, Shape};

/// Largest dot-product length; keeps `i32` accumulators of `i8 × i8` products exact.
const MAX_FAN_IN: usize = 1 << 16;

struct QAct {
    shape: Shape,
    data: Vec<i8>,
    fmt: QFormat,
}

fn check_fan_in(n: usize) -> Result<()> {
    if n > MAX_FAN_IN {
        return Err(Error::Quant(format!("fan-in {n} exceeds {MAX_FAN_IN}; the 32-bit accumulator could overflow")));
    }
    Ok(())
}

fn dot(w: &[i8], x: &[i8]) -> i128 {
    w.iter().zip(x).map(|(&a, &b)| a as i32 * b as i32).sum::<i32>() as i128
}

fn relu(c: i8) -> i8 {
    c.max(0)
}

/// Sums `(value, fraction length)` terms at the largest fraction length.
fn combine(terms: &[(i128, i32)]) -> (i128, i32) {
    let s = terms.iter().map(|t| t.1).max().unwrap_or(0);
    (terms.iter().map(|&(v, n)| align(v, n, s)).sum(), s)
}

fn dense(x: &QAct, w: &Matrix<i8>, b: &[i8], fw: QFormat, fb: QFormat, out: QFormat, act: bool) -> Result<Vec<i8>> {
    check_fan_in(w.cols)?;
    let s = fw.n() + x.fmt.n();
    Ok((0..w.rows)
        .map(|r| {
            let v = dot(w.row(r), &x.data) + align(b[r] as i128, fb.n(), s);
            let c = requantize(v, s, out);
            if act {
                relu(c)
            } else {
                c
            }
        })
        .collect())
}

struct Axis {
    out: usize,
    stride: usize,
    offset: usize,
    len: usize,
}

impl Axis {
    fn new(len: usize, k: usize, stride: usize, padding: Padding) -> Result<Self> {
        let out = conv_output_len(len, k, stride, padding)
            .ok_or_else(|| Error::DimMismatch(format!("kernel {k} stride {stride} does not fit {len}")))?;
        let offset = match padding {
            Padding::Valid => 0,
            Padding::Same => same_padding_offset(len, k, stride),
        };
        Ok(Axis { out, stride, offset, len })
    }

    fn source(&self, o: usize, k: usize) -> Option<usize> {
        (o * self.stride + k).checked_sub(self.offset).filter(|&i| i < self.len)
    }
}

#[allow(clippy::too_many_arguments)]
fn conv(
    x: &QAct,
    w: &[i8],
    (kt, kf, cout): (usize, usize, usize),
    b: &[i8],
    (fw, fb, out): (QFormat, QFormat, QFormat),
    stride: (usize, usize),
    padding: Padding,
) -> Result<QAct> {
    let cin = x.shape.c;
    check_fan_in(kt * kf * cin)?;
    let at = Axis::new(x.shape.t, kt, stride.0, padding)?;
    let af = Axis::new(x.shape.f, kf, stride.1, padding)?;
    let s = fw.n() + x.fmt.n();
    let mut data = Vec::with_capacity(at.out * af.out * cout);
    let mut acc = vec![0i32; cout];
    for to in 0..at.out {
        for fo in 0..af.out {
            acc.iter_mut().for_each(|a| *a = 0);
            for i in 0..kt {
                let Some(ti) = at.source(to, i) else { continue };
                for j in 0..kf {
                    let Some(fi) = af.source(fo, j) else { continue };
                    let xs = &x.data[(ti * x.shape.f + fi) * cin..][..cin];
                    for (ci, &xv) in xs.iter().enumerate() {
                        let ws = &w[((i * kf + j) * cin + ci) * cout..][..cout];
                        for (a, &wv) in acc.iter_mut().zip(ws) {
                            *a += wv as i32 * xv as i32;
                        }
                    }
                }
            }
            data.extend(
                acc.iter()
                    .zip(b)
                    .map(|(&a, &bv)| relu(requantize(a as i128 + align(bv as i128, fb.n(), s), s, out))),
            );
        }
    }
    Ok(QAct { shape: Shape::new(at.out, af.out, cout), data, fmt: out })
}

fn depthwise(x: &QAct, w: &[i8], k: usize, b: &[i8], (fw, fb, out): (QFormat, QFormat, QFormat), stride: usize) -> Result<QAct> {
    let c = x.shape.c;
    let at = Axis::new(x.shape.t, k, stride, Padding::Same)?;
    let af = Axis::new(x.shape.f, k, stride, Padding::Same)?;
    let s = fw.n() + x.fmt.n();
    let mut data = Vec::with_capacity(at.out * af.out * c);
    let mut acc = vec![0i32; c];
    for to in 0..at.out {
        for fo in 0..af.out {
            acc.iter_mut().for_each(|a| *a = 0);
            for i in 0..k {
                let Some(ti) = at.source(to, i) else { continue };
                for j in 0..k {
                    let Some(fi) = af.source(fo, j) else { continue };
                    let xs = &x.data[(ti * x.shape.f + fi) * c..][..c];
                    let ws = &w[(i * k + j) * c..][..c];
                    for ((a, &xv), &wv) in acc.iter_mut().zip(xs).zip(ws) {
                        *a += wv as i32 * xv as i32;
                    }
                }
            }
            data.extend(acc.iter().zip(b).map(|(&a, &bv)| requantize(a as i128 + align(bv as i128, fb.n(), s), s, out)));
        }
    }
    Ok(QAct { shape: Shape::new(at.out, af.out, c), data, fmt: out })
}

fn pointwise(x: &QAct, w: &Matrix<i8>, b: &[i8], (fw, fb, out): (QFormat, QFormat, QFormat)) -> Result<QAct> {
    check_fan_in(w.cols)?;
    let s = fw.n() + x.fmt.n();
    let mut data = Vec::with_capacity(x.shape.t * x.shape.f * w.rows);
    for px in x.data.chunks_exact(w.cols) {
        data.extend((0..w.rows).map(|r| relu(requantize(dot(w.row(r), px) + align(b[r] as i128, fb.n(), s), s, out))));
    }
    Ok(QAct { shape: Shape::new(x.shape.t, x.shape.f, w.rows), data, fmt: out })
}

fn avg_pool(x: &QAct, out: QFormat) -> Vec<i8> {
    let c = x.shape.c;
    let positions = (x.shape.t * x.shape.f) as i128;
    let up = (out.n() - x.fmt.n()).max(0) as u32;
    let down = (x.fmt.n() - out.n()).max(0) as u32;
    (0..c)
        .map(|ch| {
            let sum: i128 = x.data.iter().skip(ch).step_by(c).map(|&v| v as i128).sum();
            let v = div_round(sum << up, positions << down);
            v.clamp(i8::MIN as i128, i8::MAX as i128) as i8
        })
        .collect()
}

/// Lookup index of the gate pre-activation `W [x, h] + b (+ extra)`.
#[allow(clippy::too_many_arguments)]
fn gate_code(w: &Matrix<i8>, fw: QFormat, b: i8, fb: QFormat, r: usize, x: &QAct, h: &[i8], fh: QFormat, extra: Option<(i128, i32)>) -> i32 {
    let row = w.row(r);
    let (wx, wh) = row.split_at(x.data.len());
    let mut terms = vec![(dot(wx, &x.data), fw.n() + x.fmt.n()), (dot(wh, h), fw.n() + fh.n())];
    terms.extend(extra);
    let (v, s) = combine(&terms);
    gate_index(v + align(b as i128, fb.n(), s), s)
}

const ONE: i128 = 1 << GATE_OUTPUT_FORMAT.0;
const G: i32 = GATE_OUTPUT_FORMAT.0 as i32;

fn gru_layer(xs: &[QAct], w: &GruWeights<i8>, f: &[QFormat], out: QFormat) -> Result<Vec<Vec<i8>>> {
    check_fan_in(w.input_size + w.cells)?;
    let (fz, fr, fhw, fbz, fbr, fbh) = (f[0], f[1], f[2], f[3], f[4], f[5]);
    let n = w.cells;
    let mut h = vec![0i8; n];
    let mut seq = Vec::with_capacity(xs.len());
    for x in xs {
        let z: Vec<i8> = (0..n).map(|r| lookup(sigmoid_table(), gate_code(&w.w_z, fz, w.b_z[r], fbz, r, x, &h, out, None))).collect();
        let rg: Vec<i8> = (0..n).map(|r| lookup(sigmoid_table(), gate_code(&w.w_r, fr, w.b_r[r], fbr, r, x, &h, out, None))).collect();
        let rh: Vec<i8> = rg.iter().zip(&h).map(|(&a, &b)| requantize(a as i128 * b as i128, G + out.n(), out)).collect();
        let cand: Vec<i8> =
            (0..n).map(|r| lookup(tanh_table(), gate_code(&w.w_h, fhw, w.b_h[r], fbh, r, x, &rh, out, None))).collect();
        h = (0..n)
            .map(|k| {
                let (v, s) = combine(&[((ONE - z[k] as i128) * cand[k] as i128, 2 * G), (z[k] as i128 * h[k] as i128, G + out.n())]);
                requantize(v, s, out)
            })
            .collect();
        seq.push(h.clone());
    }
    Ok(seq)
}

/// Peephole term `p_k · c_k`.
fn peek(coef: Option<(&[i8], QFormat)>, k: usize, c: &[i8], cell: QFormat) -> Option<(i128, i32)> {
    coef.map(|(p, fp)| (p[k] as i128 * c[k] as i128, fp.n() + cell.n()))
}

fn lstm_layer(xs: &[QAct], w: &LstmWeights<i8>, f: &[QFormat], out: QFormat, cell: QFormat) -> Result<Vec<Vec<i8>>> {
    let n = w.cells;
    check_fan_in(w.input_size + w.output_size())?;
    if let Some(p) = &w.projection {
        check_fan_in(p.cols)?;
    }
    let (fwi, fwf, fwg, fwo, fbi, fbf, fbg, fbo) = (f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7]);
    let peep = w.peephole.as_ref().map(|p| (p, f[8], f[9], f[10]));
    let fproj = w.projection.as_ref().map(|_| f[f.len() - 1]);
    let mut h = vec![0i8; w.output_size()];
    let mut c = vec![0i8; n];
    let mut seq = Vec::with_capacity(xs.len());
    for x in xs {
        let pi = peep.map(|(p, fi, _, _)| (&p.input[..], fi));
        let pf = peep.map(|(p, _, ff, _)| (&p.forget[..], ff));
        let po = peep.map(|(p, _, _, fo)| (&p.output[..], fo));
        let mut c_new = vec![0i8; n];
        let mut m = vec![0i128; n];
        for k in 0..n {
            let i = lookup(sigmoid_table(), gate_code(&w.w_i, fwi, w.b_i[k], fbi, k, x, &h, out, peek(pi, k, &c, cell)));
            let fg = lookup(sigmoid_table(), gate_code(&w.w_f, fwf, w.b_f[k], fbf, k, x, &h, out, peek(pf, k, &c, cell)));
            let g = lookup(tanh_table(), gate_code(&w.w_g, fwg, w.b_g[k], fbg, k, x, &h, out, None));
            let (v, s) = combine(&[(fg as i128 * c[k] as i128, G + cell.n()), (i as i128 * g as i128, 2 * G)]);
            c_new[k] = requantize(v, s, cell);
            let o = lookup(sigmoid_table(), gate_code(&w.w_o, fwo, w.b_o[k], fbo, k, x, &h, out, peek(po, k, &c_new, cell)));
            let tc = lookup(tanh_table(), gate_index(c_new[k] as i128, cell.n()));
            m[k] = o as i128 * tc as i128;
        }
        h = match (&w.projection, fproj) {
            (Some(p), Some(fp)) => {
                let m8: Vec<i8> = m.iter().map(|&v| requantize(v, 2 * G, GATE_OUTPUT_FORMAT)).collect();
                (0..p.rows).map(|r| requantize(dot(p.row(r), &m8), fp.n() + G, out)).collect()
            }
            _ => m.iter().map(|&v| requantize(v, 2 * G, out)).collect(),
        };
        c = c_new;
        seq.push(h.clone());
    }
    Ok(seq)
}

fn steps(x: &QAct) -> Vec<QAct> {
    let w = x.shape.f * x.shape.c;
    x.data
        .chunks_exact(w)
        .map(|d| QAct { shape: Shape::vector(w), data: d.to_vec(), fmt: x.fmt })
        .collect()
}

/// Logits from the integer path: accumulator values at fraction length `frac`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QLogits {
    pub values: Vec<i64>,
    pub frac: i32,
}

impl QLogits {
    pub fn dequantize(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64 * 2f64.powi(-self.frac)).collect()
    }
}

fn logits(x: &QAct, w: &Matrix<i8>, b: &[i8], fw: QFormat, fb: QFormat) -> Result<QLogits> {
    check_fan_in(w.cols)?;
    let frac = fw.n() + x.fmt.n();
    let values = (0..w.rows)
        .map(|r| {
            let v = dot(w.row(r), &x.data) + align(b[r] as i128, fb.n(), frac);
            i64::try_from(v).map_err(|_| Error::Quant("logit accumulator exceeds 64 bits".into()))
        })
        .collect::<Result<_>>()?;
    Ok(QLogits { values, frac })
}

/// Runs the integer path up to the logits.
pub fn q_model_logits(spec: &ModelSpec, q: &QuantizedModel, features: &FeatureMatrix) -> Result<QLogits> {
    q.check(spec)?;
    let input = spec.input();
    if features.rows != input.t || features.cols != input.f {
        return Err(Error::DimMismatch(format!(
            "model expects {}×{} features, got {}×{}",
            input.t, input.f, features.rows, features.cols
        )));
    }
    let fin = q.activations.input;
    let mut x = QAct { shape: input, data: features.data.iter().map(|&v| q_quantize(v, fin)).collect(), fmt: fin };
    for (i, ((layer, params), shape)) in spec.layers().iter().zip(&q.weights.layers).zip(spec.shapes()).enumerate() {
        let f = &q.formats[i];
        let out = q.activations.out[i];
        let mid = q.activations.mid[i];
        let missing = || Error::Quant(format!("layer {i} ({layer}) has no activation format"));
        x = match (layer, params) {
            (Layer::BatchNorm | Layer::Softmax { .. }, _) => continue,
            (Layer::Logits { .. }, LayerParams::Dense { w, b }) => return logits(&x, w, b, f[0], f[1]),
            (Layer::FullyConnected { .. } | Layer::LowRankLinear { .. }, LayerParams::Dense { w, b }) => {
                let out = out.ok_or_else(missing)?;
                let act = matches!(layer, Layer::FullyConnected { .. });
                QAct { shape: shape.output, data: dense(&x, w, b, f[0], f[1], out, act)?, fmt: out }
            }
            (&Layer::Conv2d { stride_t, stride_f, padding, .. }, LayerParams::Conv { w, b }) => conv(
                &x,
                &w.data,
                (w.kernel_t, w.kernel_f, w.c_out),
                b,
                (f[0], f[1], out.ok_or_else(missing)?),
                (stride_t, stride_f),
                padding,
            )?,
            (&Layer::DepthwiseSeparable { kernel, stride, .. }, LayerParams::Separable { dw, dw_b, pw, pw_b }) => {
                let m = depthwise(&x, &dw.data, kernel, dw_b, (f[0], f[1], mid.ok_or_else(missing)?), stride)?;
                pointwise(&m, pw, pw_b, (f[2], f[3], out.ok_or_else(missing)?))?
            }
            (Layer::AvgPool, _) => {
                let out = out.ok_or_else(missing)?;
                QAct { shape: shape.output, data: avg_pool(&x, out), fmt: out }
            }
            (Layer::Gru { .. }, LayerParams::Gru(w)) => {
                let out = out.ok_or_else(missing)?;
                let seq = gru_layer(&steps(&x), w, f, out)?;
                sequence(shape.output, seq, out)
            }
            (Layer::BasicLstm { .. } | Layer::Lstm { .. }, LayerParams::Lstm(w)) => {
                let out = out.ok_or_else(missing)?;
                let seq = lstm_layer(&steps(&x), w, f, out, mid.ok_or_else(missing)?)?;
                sequence(shape.output, seq, out)
            }
            _ => return Err(Error::shape(format!("{i} ({layer})"), "weights do not match the layer")),
        };
        if x.shape != shape.output || x.data.len() != shape.output.elems() {
            return Err(Error::shape(format!("{i} ({layer})"), format!("produced {}, expected {}", x.shape, shape.output)));
        }
    }
    Err(Error::shape(spec.layers().len().to_string(), "model has no logits layer"))
}

fn sequence(shape: Shape, seq: Vec<Vec<i8>>, fmt: QFormat) -> QAct {
    let data = if seq.iter().map(Vec::len).sum::<usize>() == shape.elems() {
        seq.concat()
    } else {
        seq.last().cloned().unwrap_or_default()
    };
    QAct { shape, data, fmt }
}

/// Class posteriors from the integer path; softmax runs on dequantized logits.
pub fn q_model_forward(spec: &ModelSpec, q: &QuantizedModel, features: &FeatureMatrix) -> Result<Vec<f64>> {
    Ok(softmax(&q_model_logits(spec, q, features)?.dequantize()))
}

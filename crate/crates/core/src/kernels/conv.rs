use super::{check_len, relu_in_place, Matrix, Real, Tensor};
use crate::error::{Error, Result};
use crate::model::{conv_output_len, Padding, Shape};

/// Convolution weights laid out `[kernel_t][kernel_f][c_in][c_out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel<T> {
    pub kernel_t: usize,
    pub kernel_f: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub data: Vec<T>,
}

impl<T: Copy> ConvKernel<T> {
    pub fn new(kernel_t: usize, kernel_f: usize, c_in: usize, c_out: usize, data: Vec<T>) -> Result<Self> {
        check_len("conv kernel", data.len(), kernel_t * kernel_f * c_in * c_out)?;
        Ok(ConvKernel { kernel_t, kernel_f, c_in, c_out, data })
    }

    pub fn index(&self, i: usize, j: usize, ci: usize, co: usize) -> usize {
        ((i * self.kernel_f + j) * self.c_in + ci) * self.c_out + co
    }
}

/// Per-channel depthwise weights laid out `[kernel_t][kernel_f][channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthwiseKernel<T> {
    pub kernel_t: usize,
    pub kernel_f: usize,
    pub channels: usize,
    pub data: Vec<T>,
}

impl<T: Copy> DepthwiseKernel<T> {
    pub fn new(kernel_t: usize, kernel_f: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        check_len("depthwise kernel", data.len(), kernel_t * kernel_f * channels)?;
        Ok(DepthwiseKernel { kernel_t, kernel_f, channels, data })
    }

    pub fn index(&self, i: usize, j: usize, c: usize) -> usize {
        (i * self.kernel_f + j) * self.channels + c
    }
}

/// Leading zero-padding of a same-padded axis; any odd remainder goes after the data.
pub fn same_padding_offset(input: usize, kernel: usize, stride: usize) -> usize {
    let out = input.div_ceil(stride);
    ((out - 1) * stride + kernel).saturating_sub(input) / 2
}

struct Window {
    out: usize,
    stride: usize,
    offset: usize,
}

fn window(input: usize, kernel: usize, stride: usize, padding: Padding, axis: &str) -> Result<Window> {
    let out = conv_output_len(input, kernel, stride, padding).ok_or_else(|| {
        Error::DimMismatch(format!("{axis} kernel {kernel} stride {stride} does not fit input {input}"))
    })?;
    let offset = match padding {
        Padding::Valid => 0,
        Padding::Same => same_padding_offset(input, kernel, stride),
    };
    Ok(Window { out, stride, offset })
}

/// Input coordinate for output position `o` and tap `k`, `None` inside the padding.
fn source(w: &Window, o: usize, k: usize, input: usize) -> Option<usize> {
    (o * w.stride + k).checked_sub(w.offset).filter(|&i| i < input)
}

/// 2-D cross-correlation with bias and optional ReLU.
pub fn conv2d_forward<T: Real>(
    x: &Tensor<T>,
    w: &ConvKernel<T>,
    b: &[T],
    stride: (usize, usize),
    padding: Padding,
    relu: bool,
) -> Result<Tensor<T>> {
    check_len("conv input channels", x.shape.c, w.c_in)?;
    check_len("conv bias", b.len(), w.c_out)?;
    let wt = window(x.shape.t, w.kernel_t, stride.0, padding, "time")?;
    let wf = window(x.shape.f, w.kernel_f, stride.1, padding, "frequency")?;
    let shape = Shape::new(wt.out, wf.out, w.c_out);
    let mut out = Vec::with_capacity(shape.elems());
    let mut acc = vec![T::zero(); w.c_out];
    for to in 0..wt.out {
        for fo in 0..wf.out {
            acc.copy_from_slice(b);
            for i in 0..w.kernel_t {
                let Some(ti) = source(&wt, to, i, x.shape.t) else { continue };
                for j in 0..w.kernel_f {
                    let Some(fi) = source(&wf, fo, j, x.shape.f) else { continue };
                    let xs = &x.data[x.index(ti, fi, 0)..][..w.c_in];
                    for (ci, &xv) in xs.iter().enumerate() {
                        let ws = &w.data[w.index(i, j, ci, 0)..][..w.c_out];
                        for (a, &wv) in acc.iter_mut().zip(ws) {
                            *a = *a + wv * xv;
                        }
                    }
                }
            }
            out.extend_from_slice(&acc);
        }
    }
    if relu {
        relu_in_place(&mut out);
    }
    Tensor::new(shape, out)
}

/// Per-channel convolution, same padding, no nonlinearity.
pub fn depthwise_forward<T: Real>(x: &Tensor<T>, w: &DepthwiseKernel<T>, b: &[T], stride: usize) -> Result<Tensor<T>> {
    check_len("depthwise input channels", x.shape.c, w.channels)?;
    check_len("depthwise bias", b.len(), w.channels)?;
    let wt = window(x.shape.t, w.kernel_t, stride, Padding::Same, "time")?;
    let wf = window(x.shape.f, w.kernel_f, stride, Padding::Same, "frequency")?;
    let c = w.channels;
    let shape = Shape::new(wt.out, wf.out, c);
    let mut out = Vec::with_capacity(shape.elems());
    for to in 0..wt.out {
        for fo in 0..wf.out {
            let start = out.len();
            out.extend_from_slice(b);
            let acc = &mut out[start..];
            for i in 0..w.kernel_t {
                let Some(ti) = source(&wt, to, i, x.shape.t) else { continue };
                for j in 0..w.kernel_f {
                    let Some(fi) = source(&wf, fo, j, x.shape.f) else { continue };
                    let xs = &x.data[x.index(ti, fi, 0)..][..c];
                    let ws = &w.data[w.index(i, j, 0)..][..c];
                    for ((a, &xv), &wv) in acc.iter_mut().zip(xs).zip(ws) {
                        *a = *a + wv * xv;
                    }
                }
            }
        }
    }
    Tensor::new(shape, out)
}

/// 1×1 convolution: `w` maps `c_in` channels (columns) to `c_out` (rows) at every position.
pub fn pointwise_forward<T: Real>(x: &Tensor<T>, w: &Matrix<T>, b: &[T], relu: bool) -> Result<Tensor<T>> {
    check_len("pointwise input channels", x.shape.c, w.cols)?;
    check_len("pointwise bias", b.len(), w.rows)?;
    let shape = Shape::new(x.shape.t, x.shape.f, w.rows);
    let mut out = Vec::with_capacity(shape.elems());
    for px in x.data.chunks_exact(w.cols) {
        out.extend(
            (0..w.rows).map(|r| w.row(r).iter().zip(px).map(|(&a, &v)| a * v).sum::<T>() + b[r]),
        );
    }
    if relu {
        relu_in_place(&mut out);
    }
    Tensor::new(shape, out)
}

/// Depthwise `k × k` stage (strided, same padding) then pointwise 1×1 and ReLU.
/// Batch norm is expected to be folded into both stages already.
pub fn ds_conv_forward<T: Real>(
    x: &Tensor<T>,
    depthwise: &DepthwiseKernel<T>,
    depthwise_bias: &[T],
    pointwise: &Matrix<T>,
    pointwise_bias: &[T],
    stride: usize,
) -> Result<Tensor<T>> {
    let mid = depthwise_forward(x, depthwise, depthwise_bias, stride)?;
    pointwise_forward(&mid, pointwise, pointwise_bias, true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub eps: T,
}

/// Folds per-output-channel batch norm into convolution weights and bias:
/// `W' = W·γ/√(σ²+ε)`, `b' = (b−μ)·γ/√(σ²+ε) + β`.
pub fn fold_batchnorm<T: Real>(
    w: &ConvKernel<T>,
    b: &[T],
    bn: &BatchNormParams<T>,
) -> Result<(ConvKernel<T>, Vec<T>)> {
    let n = w.c_out;
    check_len("conv bias", b.len(), n)?;
    for (what, v) in [("gamma", &bn.gamma), ("beta", &bn.beta), ("mean", &bn.mean), ("var", &bn.var)] {
        check_len(what, v.len(), n)?;
    }
    if bn.var.iter().any(|&v| v < T::zero() || v.is_nan()) {
        return Err(Error::InvalidInput("batch-norm variance must be non-negative".into()));
    }
    let scale: Vec<T> = bn
        .gamma
        .iter()
        .zip(&bn.var)
        .map(|(&g, &v)| g / (v + bn.eps).sqrt())
        .collect();
    if scale.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("batch-norm scale is not finite (σ²+ε = 0?)".into()));
    }
    let mut folded = w.clone();
    for (k, v) in folded.data.iter_mut().enumerate() {
        *v = *v * scale[k % n];
    }
    let bias = (0..n).map(|c| (b[c] - bn.mean[c]) * scale[c] + bn.beta[c]).collect();
    Ok((folded, bias))
}

//! Floating-point reference kernels.
//!
//! Every kernel is generic over [`Real`] so the deployment path runs in
//! `f32` while tests drive the same code in `f64` against naive loops.
//! Activations are stored time-major, channels last: element `(t, f, c)`
//! of a `T × F × C` tensor lives at `(t * F + f) * C + c`.

mod conv;
mod dense;
mod forward;
mod pool;
mod recurrent;
mod weights;

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::Shape;

pub use conv::{
    conv2d_forward, depthwise_forward, ds_conv_forward, fold_batchnorm, pointwise_forward,
    same_padding_offset, BatchNormParams, ConvKernel, DepthwiseKernel,
};
pub use dense::fc_forward;
pub use forward::{model_forward, model_forward_observed, softmax, ActivationSite, SiteKind};
pub use pool::avg_pool_global;
pub use recurrent::{gru_step, lstm_step, sigmoid, GruWeights, LstmWeights, Peephole, RnnState};
pub use weights::{param_layout, LayerParams, ModelWeights};

pub trait Real: Float + Sum + Debug + Default + Send + Sync + 'static {
    fn lit(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn lit(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Real for f64 {
    fn lit(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Row-major matrix; `y = W x` maps `cols` inputs to `rows` outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimMismatch(format!(
                "matrix {rows}×{cols} given {} values",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }
}

impl<T: Real> Matrix<T> {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = T::one();
        }
        Matrix { rows: n, cols: n, data }
    }
}

/// Dense activation tensor, see the module docs for the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Shape,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.elems() {
            return Err(Error::DimMismatch(format!("tensor {shape} given {} values", data.len())));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor { shape, data: vec![T::zero(); shape.elems()] }
    }

    pub fn filled(shape: Shape, v: T) -> Self {
        Tensor { shape, data: vec![v; shape.elems()] }
    }

    pub fn index(&self, t: usize, f: usize, c: usize) -> usize {
        (t * self.shape.f + f) * self.shape.c + c
    }

    pub fn at(&self, t: usize, f: usize, c: usize) -> T {
        self.data[self.index(t, f, c)]
    }
}

pub(crate) fn relu_in_place<T: Real>(xs: &mut [T]) {
    for x in xs {
        *x = x.max(T::zero());
    }
}

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::DimMismatch(format!("{what}: expected {want}, got {got}")))
    }
}

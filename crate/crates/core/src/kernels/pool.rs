use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Per-channel mean over time and frequency.
pub fn avg_pool_global<T: Real>(x: &Tensor<T>) -> Result<Vec<T>> {
    let c = x.shape.c;
    let positions = x.shape.t * x.shape.f;
    if positions == 0 || c == 0 {
        return Err(Error::InvalidInput("average pool over an empty tensor".into()));
    }
    let mut acc = vec![T::zero(); c];
    for px in x.data.chunks_exact(c) {
        for (a, &v) in acc.iter_mut().zip(px) {
            *a = *a + v;
        }
    }
    let n = T::lit(positions as f64);
    Ok(acc.into_iter().map(|a| a / n).collect())
}

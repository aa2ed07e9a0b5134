use std::collections::VecDeque;

use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-6;

/// Element-wise mean of a window of class-probability vectors.
pub fn smooth_posteriors<V: AsRef<[f64]>>(window: &[V]) -> Result<Vec<f64>> {
    let first = window
        .first()
        .ok_or_else(|| Error::InvalidInput("empty posterior window".into()))?
        .as_ref();
    let k = first.len();
    if k == 0 {
        return Err(Error::InvalidInput("empty probability vector".into()));
    }
    let mut acc = vec![0.0; k];
    for (i, v) in window.iter().enumerate() {
        let v = v.as_ref();
        if v.len() != k {
            return Err(Error::InvalidInput(format!(
                "posterior {i} has {} classes, expected {k}",
                v.len()
            )));
        }
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL || v.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidInput(format!("posterior {i} is not a probability vector")));
        }
        for (a, p) in acc.iter_mut().zip(v) {
            *a += p;
        }
    }
    let n = window.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Sliding average over the most recent `capacity` posteriors.
#[derive(Debug, Clone)]
pub struct PosteriorSmoother {
    capacity: usize,
    history: VecDeque<Vec<f64>>,
}

impl PosteriorSmoother {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidParams("smoothing window must hold at least one vector".into()));
        }
        Ok(PosteriorSmoother { capacity, history: VecDeque::with_capacity(capacity) })
    }

    /// Pushes a new posterior and returns the smoothed vector over the current window.
    pub fn push(&mut self, probs: Vec<f64>) -> Result<Vec<f64>> {
        smooth_posteriors(std::slice::from_ref(&probs))?;
        if let Some(prev) = self.history.front() {
            if prev.len() != probs.len() {
                return Err(Error::InvalidInput(format!(
                    "posterior has {} classes, window holds {}",
                    probs.len(),
                    prev.len()
                )));
            }
        }
        if self.history.len() == self.capacity {
            self.history.pop_front();
        }
        self.history.push_back(probs);
        smooth_posteriors(self.history.make_contiguous())
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn reset(&mut self) {
        self.history.clear();
    }
}

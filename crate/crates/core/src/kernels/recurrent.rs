use super::{check_len, Matrix, Real};
use crate::error::{Error, Result};

pub fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Recurrent state carried between steps. `c` is empty for GRU cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnState<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Real> RnnState<T> {
    pub fn gru(cells: usize) -> Self {
        RnnState { h: vec![T::zero(); cells], c: Vec::new() }
    }

    pub fn lstm(cells: usize, output: usize) -> Self {
        RnnState { h: vec![T::zero(); output], c: vec![T::zero(); cells] }
    }
}

/// GRU gate matrices act on the concatenation `[x, h]` (`cells × (input + cells)`).
#[derive(Debug, Clone, PartialEq)]
pub struct GruWeights<T> {
    pub input_size: usize,
    pub cells: usize,
    pub w_z: Matrix<T>,
    pub w_r: Matrix<T>,
    pub w_h: Matrix<T>,
    pub b_z: Vec<T>,
    pub b_r: Vec<T>,
    pub b_h: Vec<T>,
}

/// Peephole weights: diagonal connections from the cell state into the gates.
#[derive(Debug, Clone, PartialEq)]
pub struct Peephole<T> {
    pub input: Vec<T>,
    pub forget: Vec<T>,
    pub output: Vec<T>,
}

/// LSTM gate matrices act on `[x, h]` where `h` has the projection width
/// when a projection is present.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights<T> {
    pub input_size: usize,
    pub cells: usize,
    pub w_i: Matrix<T>,
    pub w_f: Matrix<T>,
    pub w_g: Matrix<T>,
    pub w_o: Matrix<T>,
    pub b_i: Vec<T>,
    pub b_f: Vec<T>,
    pub b_g: Vec<T>,
    pub b_o: Vec<T>,
    pub peephole: Option<Peephole<T>>,
    /// `projection × cells`.
    pub projection: Option<Matrix<T>>,
}

impl<T> LstmWeights<T> {
    pub fn output_size(&self) -> usize {
        self.projection.as_ref().map_or(self.cells, |p| p.rows)
    }
}

/// `W [x, h] + b` without materialising the concatenation.
fn gate<T: Real>(w: &Matrix<T>, b: &[T], x: &[T], h: &[T]) -> Vec<T> {
    (0..w.rows)
        .map(|r| {
            let row = w.row(r);
            let (wx, wh) = row.split_at(x.len());
            wx.iter().zip(x).map(|(&a, &v)| a * v).sum::<T>()
                + wh.iter().zip(h).map(|(&a, &v)| a * v).sum::<T>()
                + b[r]
        })
        .collect()
}

fn check_gate<T>(name: &str, w: &Matrix<T>, b: &[T], rows: usize, cols: usize) -> Result<()> {
    if w.rows != rows || w.cols != cols {
        return Err(Error::DimMismatch(format!(
            "{name}: expected {rows}×{cols}, got {}×{}",
            w.rows, w.cols
        )));
    }
    check_len(name, b.len(), rows)
}

impl<T> GruWeights<T> {
    pub fn check(&self) -> Result<()> {
        let (n, cols) = (self.cells, self.input_size + self.cells);
        check_gate("gru update gate", &self.w_z, &self.b_z, n, cols)?;
        check_gate("gru reset gate", &self.w_r, &self.b_r, n, cols)?;
        check_gate("gru candidate", &self.w_h, &self.b_h, n, cols)
    }
}

impl<T> LstmWeights<T> {
    pub fn check(&self) -> Result<()> {
        let (n, cols) = (self.cells, self.input_size + self.output_size());
        check_gate("lstm input gate", &self.w_i, &self.b_i, n, cols)?;
        check_gate("lstm forget gate", &self.w_f, &self.b_f, n, cols)?;
        check_gate("lstm cell gate", &self.w_g, &self.b_g, n, cols)?;
        check_gate("lstm output gate", &self.w_o, &self.b_o, n, cols)?;
        if let Some(p) = &self.peephole {
            check_len("peephole input", p.input.len(), n)?;
            check_len("peephole forget", p.forget.len(), n)?;
            check_len("peephole output", p.output.len(), n)?;
        }
        if let Some(p) = &self.projection {
            check_len("projection columns", p.cols, n)?;
        }
        Ok(())
    }
}

/// One GRU step (reset gate applied before the candidate matmul):
/// `z = σ(W_z[x,h])`, `r = σ(W_r[x,h])`, `h̃ = tanh(W_h[x, r⊙h])`,
/// `h' = (1−z)⊙h̃ + z⊙h`.
pub fn gru_step<T: Real>(x: &[T], h_prev: &[T], w: &GruWeights<T>) -> Result<Vec<T>> {
    w.check()?;
    check_len("gru input", x.len(), w.input_size)?;
    check_len("gru state", h_prev.len(), w.cells)?;
    let z: Vec<T> = gate(&w.w_z, &w.b_z, x, h_prev).into_iter().map(sigmoid).collect();
    let r: Vec<T> = gate(&w.w_r, &w.b_r, x, h_prev).into_iter().map(sigmoid).collect();
    let rh: Vec<T> = r.iter().zip(h_prev).map(|(&a, &b)| a * b).collect();
    let cand = gate(&w.w_h, &w.b_h, x, &rh);
    Ok(z
        .iter()
        .zip(cand)
        .zip(h_prev)
        .map(|((&z, c), &h)| (T::one() - z) * c.tanh() + z * h)
        .collect())
}

/// One LSTM step. With peepholes the input and forget gates see `c_{t−1}`
/// and the output gate sees `c_t`; with a projection `h_t = P (o ⊙ tanh c_t)`.
pub fn lstm_step<T: Real>(x: &[T], state: &RnnState<T>, w: &LstmWeights<T>) -> Result<RnnState<T>> {
    w.check()?;
    check_len("lstm input", x.len(), w.input_size)?;
    check_len("lstm output state", state.h.len(), w.output_size())?;
    check_len("lstm cell state", state.c.len(), w.cells)?;
    let (h, c_prev) = (&state.h, &state.c);
    let mut i = gate(&w.w_i, &w.b_i, x, h);
    let mut f = gate(&w.w_f, &w.b_f, x, h);
    let g = gate(&w.w_g, &w.b_g, x, h);
    let mut o = gate(&w.w_o, &w.b_o, x, h);
    if let Some(p) = &w.peephole {
        for k in 0..w.cells {
            i[k] = i[k] + p.input[k] * c_prev[k];
            f[k] = f[k] + p.forget[k] * c_prev[k];
        }
    }
    let c: Vec<T> = (0..w.cells)
        .map(|k| sigmoid(f[k]) * c_prev[k] + sigmoid(i[k]) * g[k].tanh())
        .collect();
    if let Some(p) = &w.peephole {
        for k in 0..w.cells {
            o[k] = o[k] + p.output[k] * c[k];
        }
    }
    let m: Vec<T> = (0..w.cells).map(|k| sigmoid(o[k]) * c[k].tanh()).collect();
    let h = match &w.projection {
        Some(p) => (0..p.rows).map(|r| p.row(r).iter().zip(&m).map(|(&a, &v)| a * v).sum()).collect(),
        None => m,
    };
    Ok(RnnState { h, c })
}

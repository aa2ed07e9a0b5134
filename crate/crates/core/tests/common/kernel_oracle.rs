//! Kernels against naive index-by-index oracles in `f64`.

use kws_core::kernels::{
    conv2d_forward, depthwise_forward, ds_conv_forward, fc_forward, fold_batchnorm, gru_step, lstm_step,
    pointwise_forward, avg_pool_global, BatchNormParams, ConvKernel, DepthwiseKernel, GruWeights, LstmWeights, Matrix,
    Peephole, RnnState, Tensor,
};
use kws_core::model::{Padding, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::uniform_vec;

pub const INSTANCES: u64 = 120;
pub const TOL: f64 = 1e-10;

pub fn close(a: &[f64], b: &[f64]) {
    assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!((x - y).abs() <= TOL * (1.0 + y.abs()), "element {i}: {x} vs {y}");
    }
}

pub fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::new(rows, cols, uniform_vec(rng, rows * cols, 1.0)).unwrap()
}

pub fn tensor(rng: &mut ChaCha8Rng, t: usize, f: usize, c: usize) -> Tensor<f64> {
    Tensor::new(Shape::new(t, f, c), uniform_vec(rng, t * f * c, 2.0)).unwrap()
}

/// Zero-pads a tensor so a valid correlation reproduces `padding` semantics.
pub fn pad(x: &Tensor<f64>, k: (usize, usize), s: (usize, usize), padding: Padding) -> (Vec<f64>, usize, usize) {
    let (t, f, c) = (x.shape.t, x.shape.f, x.shape.c);
    let (bt, at, bf, af) = match padding {
        Padding::Valid => (0, 0, 0, 0),
        Padding::Same => {
            let tot = |n: usize, k: usize, s: usize| ((n.div_ceil(s) - 1) * s + k).saturating_sub(n);
            let (pt, pf) = (tot(t, k.0, s.0), tot(f, k.1, s.1));
            (pt / 2, pt - pt / 2, pf / 2, pf - pf / 2)
        }
    };
    let (tp, fp) = (t + bt + at, f + bf + af);
    let mut out = vec![0.0; tp * fp * c];
    for ti in 0..t {
        for fi in 0..f {
            for ci in 0..c {
                out[((ti + bt) * fp + fi + bf) * c + ci] = x.data[(ti * f + fi) * c + ci];
            }
        }
    }
    (out, tp, fp)
}

pub fn conv_oracle(
    x: &Tensor<f64>,
    w: &[f64],
    (kt, kf, cin, cout): (usize, usize, usize, usize),
    b: &[f64],
    s: (usize, usize),
    padding: Padding,
) -> Vec<f64> {
    let (xp, tp, fp) = pad(x, (kt, kf), s, padding);
    let (ot, of) = ((tp - kt) / s.0 + 1, (fp - kf) / s.1 + 1);
    let mut out = Vec::new();
    for to in 0..ot {
        for fo in 0..of {
            for co in 0..cout {
                let mut acc = b[co];
                for i in 0..kt {
                    for j in 0..kf {
                        for ci in 0..cin {
                            acc += w[((i * kf + j) * cin + ci) * cout + co] * xp[((to * s.0 + i) * fp + fo * s.1 + j) * cin + ci];
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

pub fn relu(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| x.max(0.0)).collect()
}

pub fn fully_connected_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..INSTANCES {
        let (n_in, n_out) = (rng.gen_range(1..40), rng.gen_range(1..40));
        let w = matrix(&mut rng, n_out, n_in);
        let b = uniform_vec(&mut rng, n_out, 1.0);
        let x = uniform_vec(&mut rng, n_in, 2.0);
        let want: Vec<f64> = (0..n_out).map(|r| b[r] + (0..n_in).map(|c| w.data[r * n_in + c] * x[c]).sum::<f64>()).collect();
        close(&fc_forward(&x, &w, &b, false).unwrap(), &want);
        close(&fc_forward(&x, &w, &b, true).unwrap(), &relu(want));
    }
}

pub fn conv2d_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in 0..INSTANCES {
        let padding = if n % 2 == 0 { Padding::Valid } else { Padding::Same };
        let (t, f) = (rng.gen_range(1..14), rng.gen_range(1..11));
        let (kt, kf) = (rng.gen_range(1..=t.min(6)), rng.gen_range(1..=f.min(5)));
        let (cin, cout) = (rng.gen_range(1..4), rng.gen_range(1..6));
        let s = (rng.gen_range(1..4), rng.gen_range(1..4));
        let x = tensor(&mut rng, t, f, cin);
        let w = ConvKernel::new(kt, kf, cin, cout, uniform_vec(&mut rng, kt * kf * cin * cout, 1.0)).unwrap();
        let b = uniform_vec(&mut rng, cout, 1.0);
        let want = conv_oracle(&x, &w.data, (kt, kf, cin, cout), &b, s, padding);
        let got = conv2d_forward(&x, &w, &b, s, padding, false).unwrap();
        close(&got.data, &want);
        close(&conv2d_forward(&x, &w, &b, s, padding, true).unwrap().data, &relu(want));
    }
}

pub fn depthwise_and_pointwise_match_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..INSTANCES {
        let (t, f, c) = (rng.gen_range(1..12), rng.gen_range(1..10), rng.gen_range(1..6));
        let k = rng.gen_range(1..5);
        let s = rng.gen_range(1..3);
        let x = tensor(&mut rng, t, f, c);
        let dw = DepthwiseKernel::new(k, k, c, uniform_vec(&mut rng, k * k * c, 1.0)).unwrap();
        let db = uniform_vec(&mut rng, c, 1.0);
        // A depthwise stage is a full convolution whose kernel is zero off the channel diagonal.
        let mut full = vec![0.0; k * k * c * c];
        for i in 0..k {
            for j in 0..k {
                for ch in 0..c {
                    full[((i * k + j) * c + ch) * c + ch] = dw.data[(i * k + j) * c + ch];
                }
            }
        }
        let mid = depthwise_forward(&x, &dw, &db, s).unwrap();
        close(&mid.data, &conv_oracle(&x, &full, (k, k, c, c), &db, (s, s), Padding::Same));

        let cout = rng.gen_range(1..6);
        let pw = matrix(&mut rng, cout, c);
        let pb = uniform_vec(&mut rng, cout, 1.0);
        let want: Vec<f64> = mid
            .data
            .chunks(c)
            .flat_map(|px| (0..cout).map(|r| pb[r] + (0..c).map(|ci| pw.data[r * c + ci] * px[ci]).sum::<f64>()).collect::<Vec<_>>())
            .collect();
        close(&pointwise_forward(&mid, &pw, &pb, false).unwrap().data, &want);
    }
}

pub fn separable_equals_composed_full_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..INSTANCES {
        let (t, f, c, cout) = (rng.gen_range(1..12), rng.gen_range(1..10), rng.gen_range(1..5), rng.gen_range(1..6));
        let (k, s) = (rng.gen_range(1..5), rng.gen_range(1..3));
        let x = tensor(&mut rng, t, f, c);
        let dw = DepthwiseKernel::new(k, k, c, uniform_vec(&mut rng, k * k * c, 1.0)).unwrap();
        let db = uniform_vec(&mut rng, c, 1.0);
        let pw = matrix(&mut rng, cout, c);
        let pb = uniform_vec(&mut rng, cout, 1.0);
        let mut w = vec![0.0; k * k * c * cout];
        for i in 0..k {
            for j in 0..k {
                for ci in 0..c {
                    for co in 0..cout {
                        w[((i * k + j) * c + ci) * cout + co] = dw.data[(i * k + j) * c + ci] * pw.data[co * c + ci];
                    }
                }
            }
        }
        let b: Vec<f64> = (0..cout).map(|co| pb[co] + (0..c).map(|ci| pw.data[co * c + ci] * db[ci]).sum::<f64>()).collect();
        let want = relu(conv_oracle(&x, &w, (k, k, c, cout), &b, (s, s), Padding::Same));
        close(&ds_conv_forward(&x, &dw, &db, &pw, &pb, s).unwrap().data, &want);
    }
}

pub fn average_pool_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..INSTANCES {
        let (t, f, c) = (rng.gen_range(1..12), rng.gen_range(1..10), rng.gen_range(1..8));
        let x = tensor(&mut rng, t, f, c);
        let want: Vec<f64> = (0..c)
            .map(|ch| {
                let mut s = 0.0;
                for ti in 0..t {
                    for fi in 0..f {
                        s += x.data[(ti * f + fi) * c + ch];
                    }
                }
                s / (t * f) as f64
            })
            .collect();
        close(&avg_pool_global(&x).unwrap(), &want);
    }
}

pub fn folded_batch_norm_equals_conv_then_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..INSTANCES {
        let (t, f, cin, cout) = (rng.gen_range(2..10), rng.gen_range(2..8), rng.gen_range(1..4), rng.gen_range(1..5));
        let (kt, kf) = (rng.gen_range(1..=t), rng.gen_range(1..=f));
        let x = tensor(&mut rng, t, f, cin);
        let w = ConvKernel::new(kt, kf, cin, cout, uniform_vec(&mut rng, kt * kf * cin * cout, 1.0)).unwrap();
        let b = uniform_vec(&mut rng, cout, 1.0);
        let bn = BatchNormParams {
            gamma: uniform_vec(&mut rng, cout, 2.0),
            beta: uniform_vec(&mut rng, cout, 1.0),
            mean: uniform_vec(&mut rng, cout, 1.0),
            var: (0..cout).map(|_| rng.gen_range(0.01..3.0)).collect(),
            eps: 1e-3,
        };
        let (wf, bf) = fold_batchnorm(&w, &b, &bn).unwrap();
        let raw = conv_oracle(&x, &w.data, (kt, kf, cin, cout), &b, (1, 1), Padding::Valid);
        let want: Vec<f64> = raw
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let co = i % cout;
                (v - bn.mean[co]) / (bn.var[co] + bn.eps).sqrt() * bn.gamma[co] + bn.beta[co]
            })
            .collect();
        close(&conv2d_forward(&x, &wf, &bf, (1, 1), Padding::Valid, false).unwrap().data, &want);
    }
}

pub fn gate(w: &Matrix<f64>, b: &[f64], xh: &[f64], r: usize) -> f64 {
    b[r] + xh.iter().enumerate().map(|(j, v)| w.data[r * w.cols + j] * v).sum::<f64>()
}

pub fn random_gru(rng: &mut ChaCha8Rng, n_in: usize, n: usize) -> GruWeights<f64> {
    let cols = n_in + n;
    GruWeights {
        input_size: n_in,
        cells: n,
        w_z: matrix(rng, n, cols),
        w_r: matrix(rng, n, cols),
        w_h: matrix(rng, n, cols),
        b_z: uniform_vec(rng, n, 1.0),
        b_r: uniform_vec(rng, n, 1.0),
        b_h: uniform_vec(rng, n, 1.0),
    }
}

pub fn random_lstm(rng: &mut ChaCha8Rng, n_in: usize, n: usize, peep: bool, proj: Option<usize>) -> LstmWeights<f64> {
    let cols = n_in + proj.unwrap_or(n);
    LstmWeights {
        input_size: n_in,
        cells: n,
        w_i: matrix(rng, n, cols),
        w_f: matrix(rng, n, cols),
        w_g: matrix(rng, n, cols),
        w_o: matrix(rng, n, cols),
        b_i: uniform_vec(rng, n, 1.0),
        b_f: uniform_vec(rng, n, 1.0),
        b_g: uniform_vec(rng, n, 1.0),
        b_o: uniform_vec(rng, n, 1.0),
        peephole: peep.then(|| Peephole {
            input: uniform_vec(rng, n, 1.0),
            forget: uniform_vec(rng, n, 1.0),
            output: uniform_vec(rng, n, 1.0),
        }),
        projection: proj.map(|p| matrix(rng, p, n)),
    }
}

pub fn gru_step_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..INSTANCES {
        let (n_in, n) = (rng.gen_range(1..12), rng.gen_range(1..12));
        let w = random_gru(&mut rng, n_in, n);
        let x = uniform_vec(&mut rng, n_in, 2.0);
        let h = uniform_vec(&mut rng, n, 1.0);
        let xh: Vec<f64> = x.iter().chain(&h).copied().collect();
        let z: Vec<f64> = (0..n).map(|r| sig(gate(&w.w_z, &w.b_z, &xh, r))).collect();
        let rg: Vec<f64> = (0..n).map(|r| sig(gate(&w.w_r, &w.b_r, &xh, r))).collect();
        let xrh: Vec<f64> = x.iter().copied().chain((0..n).map(|k| rg[k] * h[k])).collect();
        let want: Vec<f64> = (0..n).map(|k| (1.0 - z[k]) * gate(&w.w_h, &w.b_h, &xrh, k).tanh() + z[k] * h[k]).collect();
        close(&gru_step(&x, &h, &w).unwrap(), &want);
    }
}

pub fn lstm_step_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for k in 0..INSTANCES {
        let (n_in, n) = (rng.gen_range(1..10), rng.gen_range(1..10));
        let peep = k % 2 == 1;
        let proj = (k % 3 == 2).then(|| rng.gen_range(1..=n));
        let w = random_lstm(&mut rng, n_in, n, peep, proj);
        let out = proj.unwrap_or(n);
        let x = uniform_vec(&mut rng, n_in, 2.0);
        let state = RnnState { h: uniform_vec(&mut rng, out, 1.0), c: uniform_vec(&mut rng, n, 2.0) };
        let xh: Vec<f64> = x.iter().chain(&state.h).copied().collect();
        let p = |sel: fn(&Peephole<f64>) -> &Vec<f64>, r: usize, c: f64| w.peephole.as_ref().map_or(0.0, |pp| sel(pp)[r] * c);
        let mut c_new = vec![0.0; n];
        let mut m = vec![0.0; n];
        for r in 0..n {
            let i = sig(gate(&w.w_i, &w.b_i, &xh, r) + p(|pp| &pp.input, r, state.c[r]));
            let f = sig(gate(&w.w_f, &w.b_f, &xh, r) + p(|pp| &pp.forget, r, state.c[r]));
            let g = gate(&w.w_g, &w.b_g, &xh, r).tanh();
            c_new[r] = f * state.c[r] + i * g;
            let o = sig(gate(&w.w_o, &w.b_o, &xh, r) + p(|pp| &pp.output, r, c_new[r]));
            m[r] = o * c_new[r].tanh();
        }
        let h = match &w.projection {
            Some(pm) => (0..pm.rows).map(|r| (0..n).map(|j| pm.data[r * n + j] * m[j]).sum()).collect(),
            None => m,
        };
        let got = lstm_step(&x, &state, &w).unwrap();
        close(&got.c, &c_new);
        close(&got.h, &h);
    }
}


/// Every kernel-versus-oracle check, each over [`INSTANCES`] seeded instances.
pub const CHECKS: [(&str, fn()); 8] = [
    ("fully connected", fully_connected_matches_oracle),
    ("convolution", conv2d_matches_oracle),
    ("depthwise and pointwise", depthwise_and_pointwise_match_oracles),
    ("separable vs composed convolution", separable_equals_composed_full_convolution),
    ("average pool", average_pool_matches_oracle),
    ("folded batch norm", folded_batch_norm_equals_conv_then_norm),
    ("GRU step", gru_step_matches_oracle),
    ("LSTM step", lstm_step_matches_oracle),
];

#![allow(dead_code)]

pub mod kernel_oracle;
pub mod random_spec;

use std::path::PathBuf;

use kws_core::features::FeatureMatrix;
use kws_core::model::{parse_model_dsl, Family, ModelFile, ModelSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One published model row: file stem, family, frame stride (ms), notation,
/// memory (KB), operations, size class.
pub struct Row {
    pub file: &'static str,
    pub family: Family,
    pub stride_ms: u32,
    pub dsl: &'static str,
    pub memory_kb: f64,
    pub ops: f64,
    pub class: &'static str,
}

const fn row(
    file: &'static str,
    family: Family,
    stride_ms: u32,
    dsl: &'static str,
    memory_kb: f64,
    ops: f64,
    class: &'static str,
) -> Row {
    Row { file, family, stride_ms, dsl, memory_kb, ops, class }
}

/// The LSTM-L operation count is printed as 4.8M in one place and 48.4M in
/// another; 48.4M is consistent with the other class-L recurrent rows.
pub const TABLE: [Row; 21] = [
    row("dnn_s", Family::Dnn, 40, "FC(144)-FC(144)-FC(144)", 80.0, 158.8e3, "S"),
    row("dnn_m", Family::Dnn, 40, "FC(256)-FC(256)-FC(256)", 199.4, 397.1e3, "M"),
    row("dnn_l", Family::Dnn, 40, "FC(436)-FC(436)-FC(436)", 496.6, 990.2e3, "L"),
    row("cnn_s", Family::Cnn, 20, "C(28,10,4,1,1)-C(30,10,4,2,1)-L(16)-FC(128)", 79.0, 5.0e6, "S"),
    row("cnn_m", Family::Cnn, 20, "C(64,10,4,1,1)-C(48,10,4,2,1)-L(16)-FC(128)", 199.4, 17.3e6, "M"),
    row("cnn_l", Family::Cnn, 20, "C(60,10,4,1,1)-C(76,10,4,2,1)-L(58)-FC(128)", 497.8, 25.3e6, "L"),
    row("basic_lstm_s", Family::BasicLstm, 20, "LSTM(118)", 63.3, 5.9e6, "S"),
    row("basic_lstm_m", Family::BasicLstm, 20, "LSTM(214)", 196.5, 18.9e6, "M"),
    row("basic_lstm_l", Family::BasicLstm, 20, "LSTM(344)", 494.5, 47.9e6, "L"),
    row("lstm_s", Family::Lstm, 40, "LSTM(144), Projection(98)", 79.5, 3.9e6, "S"),
    row("lstm_m", Family::Lstm, 20, "LSTM(280), Projection(130)", 198.6, 19.2e6, "M"),
    row("lstm_l", Family::Lstm, 20, "LSTM(500), Projection(188)", 498.8, 48.4e6, "L"),
    row("gru_s", Family::Gru, 40, "GRU(154)", 78.8, 3.8e6, "S"),
    row("gru_m", Family::Gru, 20, "GRU(250)", 200.0, 19.2e6, "M"),
    row("gru_l", Family::Gru, 20, "GRU(400)", 499.7, 48.4e6, "L"),
    row("crnn_s", Family::Crnn, 20, "C(48,10,4,2,2)-GRU(60)-GRU(60)-FC(84)", 79.8, 3.0e6, "S"),
    row("crnn_m", Family::Crnn, 20, "C(128,10,4,2,2)-GRU(76)-GRU(76)-FC(164)", 199.8, 7.6e6, "M"),
    row("crnn_l", Family::Crnn, 20, "C(100,10,4,2,1)-GRU(136)-GRU(136)-FC(188)", 499.5, 19.3e6, "L"),
    row(
        "dscnn_s",
        Family::DsCnn,
        20,
        "C(64,10,4,2,2)-DSC(64,3,1)-DSC(64,3,1)-DSC(64,3,1)-DSC(64,3,1)-AvgPool",
        38.6,
        5.4e6,
        "S",
    ),
    row(
        "dscnn_m",
        Family::DsCnn,
        20,
        "C(172,10,4,2,1)-DSC(172,3,2)-DSC(172,3,1)-DSC(172,3,1)-DSC(172,3,1)-AvgPool",
        189.2,
        19.8e6,
        "M",
    ),
    row(
        "dscnn_l",
        Family::DsCnn,
        20,
        "C(276,10,4,2,1)-DSC(276,3,2)-DSC(276,3,1)-DSC(276,3,1)-DSC(276,3,1)-DSC(276,3,1)-AvgPool",
        497.6,
        56.9e6,
        "L",
    ),
];

impl Row {
    /// Frames for a 1000 ms clip with 40 ms frames.
    pub fn frames(&self) -> usize {
        ((1000 - 40) / self.stride_ms + 1) as usize
    }

    pub fn spec(&self) -> ModelSpec {
        parse_model_dsl(self.dsl, self.family, self.frames(), 10, 12).unwrap()
    }

    pub fn model_path(&self) -> PathBuf {
        models_dir().join(format!("{}.model", self.file))
    }

    pub fn model_file(&self) -> ModelFile {
        ModelFile::load(&self.model_path()).unwrap()
    }
}

pub fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
}

pub fn random_features(rng: &mut ChaCha8Rng, t: usize, f: usize, bound: f64) -> FeatureMatrix {
    FeatureMatrix::new(t, f, uniform_vec(rng, t * f, bound)).unwrap()
}

pub const FAMILIES: [Family; 7] =
    [Family::Dnn, Family::Cnn, Family::BasicLstm, Family::Lstm, Family::Gru, Family::Crnn, Family::DsCnn];

fn conv(rng: &mut ChaCha8Rng, t: usize, f: usize, max_c: usize) -> String {
    let kt = rng.gen_range(1..=t.min(5));
    let kf = rng.gen_range(1..=f.min(4));
    format!("C({},{kt},{kf},{},{})", rng.gen_range(1..=max_c), rng.gen_range(1..=2), rng.gen_range(1..=2))
}

/// Small random notation for `family` on a `t × f` input.
pub fn desk_dsl(rng: &mut ChaCha8Rng, family: Family, t: usize, f: usize) -> String {
    let mut n = |lo: usize, hi: usize| rng.gen_range(lo..=hi);
    match family {
        Family::Dnn => (0..n(1, 3)).map(|_| format!("FC({})", n(8, 48))).collect::<Vec<_>>().join("-"),
        Family::Cnn => {
            let c = conv(rng, t, f, 8);
            let mut n = |lo: usize, hi: usize| rng.gen_range(lo..=hi);
            format!("{c}-L({})-FC({})", n(4, 16), n(8, 32))
        }
        Family::BasicLstm => format!("LSTM({})", n(4, 24)),
        Family::Lstm => {
            let cells = n(4, 24);
            format!("LSTM({cells}), Projection({})", n(2, cells))
        }
        Family::Gru => (0..n(1, 2)).map(|_| format!("GRU({})", n(4, 24))).collect::<Vec<_>>().join("-"),
        Family::Crnn => {
            let c = conv(rng, t, f, 8);
            let mut n = |lo: usize, hi: usize| rng.gen_range(lo..=hi);
            format!("{c}-GRU({})-FC({})", n(4, 16), n(8, 24))
        }
        Family::DsCnn => {
            let w = n(2, 12);
            let blocks = n(1, 3);
            let mut s = format!("C({w},{},{},2,2)", n(2, 5), n(2, 4));
            for _ in 0..blocks {
                s.push_str(&format!("-DSC({w},3,{})", n(1, 2)));
            }
            s.push_str("-AvgPool");
            s
        }
    }
}

pub fn desk_spec(rng: &mut ChaCha8Rng, family: Family, t: usize, f: usize, classes: usize) -> ModelSpec {
    loop {
        let dsl = desk_dsl(rng, family, t, f);
        if let Ok(m) = parse_model_dsl(&dsl, family, t, f, classes) {
            return m;
        }
    }
}

/// Float-versus-integer argmax agreement of `models` seeded random models of
/// `family` (12×10 inputs, 12 classes, weights uniform in ±0.5), each range
/// quantized on 200 inputs and scored on 1000 fresh inputs in ±1.
pub fn agreement_rates(family: Family, models: u64) -> Vec<f64> {
    use kws_core::kernels::{model_forward, ModelWeights};
    use kws_core::quant::{argmax, q_model_forward, quantize_model_range, CalibrationSample};
    use rand::SeedableRng;
    const T: usize = 12;
    const F: usize = 10;
    (0..models)
        .map(|model| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 * family as u64 + model);
            let spec = desk_spec(&mut rng, family, T, F, 12);
            let w = ModelWeights::<f32>::random_uniform(&spec, model, 0.5);
            let calib: Vec<_> = (0..200).map(|_| CalibrationSample::unlabeled(random_features(&mut rng, T, F, 1.0))).collect();
            let q = quantize_model_range(&spec, &w, &calib).unwrap();
            let agree = (0..1000)
                .filter(|_| {
                    let x = random_features(&mut rng, T, F, 1.0);
                    argmax(&model_forward(&spec, &w, &x).unwrap()) == argmax(&q_model_forward(&spec, &q, &x).unwrap())
                })
                .count();
            agree as f64 / 1000.0
        })
        .collect()
}

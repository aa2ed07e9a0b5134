//! Random model descriptions drawn from per-family layer pools.

use kws_core::model::{Family, Layer, ModelSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_layer_stack(rng: &mut ChaCha8Rng, family: Family) -> Vec<Layer> {
    let mut n = |lo: usize, hi: usize| rng.gen_range(lo..=hi);
    let mut layers = Vec::new();
    let conv = |n: &mut dyn FnMut(usize, usize) -> usize| Layer::Conv2d {
        features: n(1, 64),
        kernel_t: n(1, 5),
        kernel_f: n(1, 4),
        stride_t: n(1, 2),
        stride_f: n(1, 2),
        padding: family.conv_padding(),
    };
    match family {
        Family::Dnn => (0..n(1, 4)).for_each(|_| layers.push(Layer::FullyConnected { units: n(1, 300) })),
        Family::Cnn => {
            (0..n(1, 2)).for_each(|_| layers.push(conv(&mut n)));
            if n(0, 1) == 1 {
                layers.push(Layer::LowRankLinear { units: n(1, 64) });
            }
            layers.push(Layer::FullyConnected { units: n(1, 200) });
        }
        Family::BasicLstm => layers.push(Layer::BasicLstm { cells: n(1, 400) }),
        Family::Lstm => {
            let cells = n(1, 400);
            let projection = (n(0, 1) == 1).then(|| n(1, cells));
            layers.push(Layer::Lstm { cells, projection });
        }
        Family::Gru => (0..n(1, 3)).for_each(|_| layers.push(Layer::Gru { cells: n(1, 300) })),
        Family::Crnn => {
            layers.push(conv(&mut n));
            (0..n(1, 2)).for_each(|_| layers.push(Layer::Gru { cells: n(1, 200) }));
            layers.push(Layer::FullyConnected { units: n(1, 200) });
        }
        Family::DsCnn => {
            let w = n(1, 300);
            layers.push(Layer::Conv2d {
                features: w,
                kernel_t: n(1, 5),
                kernel_f: n(1, 4),
                stride_t: n(1, 2),
                stride_f: n(1, 2),
                padding: family.conv_padding(),
            });
            (0..n(1, 6)).for_each(|_| layers.push(Layer::DepthwiseSeparable { features: w, kernel: 3, stride: n(1, 2) }));
            layers.push(Layer::AvgPool);
        }
    }
    if n(0, 3) == 0 {
        let at = n(1, layers.len());
        layers.insert(at, Layer::BatchNorm);
    }
    layers
}

pub fn random_spec(rng: &mut ChaCha8Rng) -> ModelSpec {
    loop {
        let family = Family::ALL[rng.gen_range(0..7)];
        let (t, f, k) = (rng.gen_range(1..60), rng.gen_range(1..41), rng.gen_range(2..20));
        let layers = random_layer_stack(rng, family);
        if let Ok(spec) = ModelSpec::new(family, t, f, k, layers) {
            return spec;
        }
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ConvKernel, DepthwiseKernel, GruWeights, LstmWeights, Matrix, Peephole, Real};
use crate::error::{Error, Result};
use crate::model::{Layer, LayerShape, ModelSpec};

/// Parameters of one layer. Layers without weights hold `Empty`.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams<T> {
    Dense { w: Matrix<T>, b: Vec<T> },
    Conv { w: ConvKernel<T>, b: Vec<T> },
    Separable { dw: DepthwiseKernel<T>, dw_b: Vec<T>, pw: Matrix<T>, pw_b: Vec<T> },
    Gru(GruWeights<T>),
    Lstm(LstmWeights<T>),
    Empty,
}

/// Named tensors a layer expects, in storage order, with their dimensions.
pub fn param_layout(layer: &Layer, shape: &LayerShape) -> Vec<(&'static str, Vec<usize>)> {
    let input = shape.input;
    match *layer {
        Layer::FullyConnected { units } | Layer::LowRankLinear { units } | Layer::Logits { classes: units } => {
            vec![("w", vec![units, input.elems()]), ("b", vec![units])]
        }
        Layer::Conv2d { features, kernel_t, kernel_f, .. } => vec![
            ("w", vec![kernel_t, kernel_f, input.c, features]),
            ("b", vec![features]),
        ],
        Layer::DepthwiseSeparable { features, kernel, .. } => vec![
            ("dw", vec![kernel, kernel, input.c]),
            ("dw_b", vec![input.c]),
            ("pw", vec![features, input.c]),
            ("pw_b", vec![features]),
        ],
        Layer::Gru { cells } => {
            let cols = input.f * input.c + cells;
            let mut v: Vec<(&'static str, Vec<usize>)> =
                ["w_z", "w_r", "w_h"].into_iter().map(|n| (n, vec![cells, cols])).collect();
            v.extend(["b_z", "b_r", "b_h"].into_iter().map(|n| (n, vec![cells])));
            v
        }
        Layer::BasicLstm { cells } | Layer::Lstm { cells, .. } => {
            let out = layer.recurrent_output().unwrap();
            let cols = input.f * input.c + out;
            let mut v: Vec<(&'static str, Vec<usize>)> =
                ["w_i", "w_f", "w_g", "w_o"].into_iter().map(|n| (n, vec![cells, cols])).collect();
            v.extend(["b_i", "b_f", "b_g", "b_o"].into_iter().map(|n| (n, vec![cells])));
            if let Layer::Lstm { projection, .. } = *layer {
                v.extend(["p_i", "p_f", "p_o"].into_iter().map(|n| (n, vec![cells])));
                if let Some(p) = projection {
                    v.push(("proj", vec![p, cells]));
                }
            }
            v
        }
        Layer::AvgPool | Layer::BatchNorm | Layer::Softmax { .. } => Vec::new(),
    }
}

impl<T: Copy> LayerParams<T> {
    /// Builds a layer from tensors given in [`param_layout`] order.
    pub fn assemble(layer: &Layer, shape: &LayerShape, tensors: Vec<Vec<T>>) -> Result<Self> {
        let layout = param_layout(layer, shape);
        if tensors.len() != layout.len() {
            return Err(Error::DimMismatch(format!(
                "layer {layer}: expected {} tensors, got {}",
                layout.len(),
                tensors.len()
            )));
        }
        for ((name, dims), t) in layout.iter().zip(&tensors) {
            let want: usize = dims.iter().product();
            if t.len() != want {
                return Err(Error::DimMismatch(format!(
                    "layer {layer} tensor {name}: expected {want} values, got {}",
                    t.len()
                )));
            }
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().unwrap();
        let mat = |d: &[usize], data| Matrix { rows: d[0], cols: d[1], data };
        Ok(match *layer {
            Layer::FullyConnected { .. } | Layer::LowRankLinear { .. } | Layer::Logits { .. } => {
                LayerParams::Dense { w: mat(&layout[0].1, next()), b: next() }
            }
            Layer::Conv2d { .. } => {
                let d = &layout[0].1;
                LayerParams::Conv {
                    w: ConvKernel { kernel_t: d[0], kernel_f: d[1], c_in: d[2], c_out: d[3], data: next() },
                    b: next(),
                }
            }
            Layer::DepthwiseSeparable { .. } => {
                let d = &layout[0].1;
                LayerParams::Separable {
                    dw: DepthwiseKernel { kernel_t: d[0], kernel_f: d[1], channels: d[2], data: next() },
                    dw_b: next(),
                    pw: mat(&layout[2].1, next()),
                    pw_b: next(),
                }
            }
            Layer::Gru { cells } => {
                let d = &layout[0].1;
                LayerParams::Gru(GruWeights {
                    input_size: d[1] - cells,
                    cells,
                    w_z: mat(d, next()),
                    w_r: mat(d, next()),
                    w_h: mat(d, next()),
                    b_z: next(),
                    b_r: next(),
                    b_h: next(),
                })
            }
            Layer::BasicLstm { cells } | Layer::Lstm { cells, .. } => {
                let d = &layout[0].1;
                let out = layer.recurrent_output().unwrap();
                let (w_i, w_f, w_g, w_o) = (mat(d, next()), mat(d, next()), mat(d, next()), mat(d, next()));
                let (b_i, b_f, b_g, b_o) = (next(), next(), next(), next());
                let (peephole, projection) = match *layer {
                    Layer::Lstm { projection, .. } => (
                        Some(Peephole { input: next(), forget: next(), output: next() }),
                        projection.map(|p| Matrix { rows: p, cols: cells, data: next() }),
                    ),
                    _ => (None, None),
                };
                LayerParams::Lstm(LstmWeights {
                    input_size: d[1] - out,
                    cells,
                    w_i,
                    w_f,
                    w_g,
                    w_o,
                    b_i,
                    b_f,
                    b_g,
                    b_o,
                    peephole,
                    projection,
                })
            }
            Layer::AvgPool | Layer::BatchNorm | Layer::Softmax { .. } => LayerParams::Empty,
        })
    }

    /// Tensors in [`param_layout`] order.
    pub fn tensors(&self) -> Vec<(&'static str, &[T])> {
        match self {
            LayerParams::Dense { w, b } => vec![("w", &w.data), ("b", b)],
            LayerParams::Conv { w, b } => vec![("w", &w.data), ("b", b)],
            LayerParams::Separable { dw, dw_b, pw, pw_b } => {
                vec![("dw", &dw.data), ("dw_b", dw_b), ("pw", &pw.data), ("pw_b", pw_b)]
            }
            LayerParams::Gru(g) => vec![
                ("w_z", &g.w_z.data),
                ("w_r", &g.w_r.data),
                ("w_h", &g.w_h.data),
                ("b_z", &g.b_z),
                ("b_r", &g.b_r),
                ("b_h", &g.b_h),
            ],
            LayerParams::Lstm(l) => {
                let mut v: Vec<(&'static str, &[T])> = vec![
                    ("w_i", &l.w_i.data),
                    ("w_f", &l.w_f.data),
                    ("w_g", &l.w_g.data),
                    ("w_o", &l.w_o.data),
                    ("b_i", &l.b_i),
                    ("b_f", &l.b_f),
                    ("b_g", &l.b_g),
                    ("b_o", &l.b_o),
                ];
                if let Some(p) = &l.peephole {
                    v.extend([("p_i", &p.input[..]), ("p_f", &p.forget[..]), ("p_o", &p.output[..])]);
                }
                if let Some(p) = &l.projection {
                    v.push(("proj", &p.data));
                }
                v
            }
            LayerParams::Empty => Vec::new(),
        }
    }

    /// Rebuilds the layer with every tensor transformed by `f(name, data)`.
    pub fn map<U: Copy>(&self, f: &mut impl FnMut(&str, &[T]) -> Vec<U>) -> LayerParams<U> {
        let mut m = |name: &str, x: &Matrix<T>| Matrix { rows: x.rows, cols: x.cols, data: f(name, &x.data) };
        match self {
            LayerParams::Dense { w, b } => {
                let w = m("w", w);
                LayerParams::Dense { w, b: f("b", b) }
            }
            LayerParams::Conv { w, b } => LayerParams::Conv {
                w: ConvKernel { kernel_t: w.kernel_t, kernel_f: w.kernel_f, c_in: w.c_in, c_out: w.c_out, data: f("w", &w.data) },
                b: f("b", b),
            },
            LayerParams::Separable { dw, dw_b, pw, pw_b } => {
                let dw = DepthwiseKernel { kernel_t: dw.kernel_t, kernel_f: dw.kernel_f, channels: dw.channels, data: f("dw", &dw.data) };
                let dw_b = f("dw_b", dw_b);
                let pw = Matrix { rows: pw.rows, cols: pw.cols, data: f("pw", &pw.data) };
                LayerParams::Separable { dw, dw_b, pw, pw_b: f("pw_b", pw_b) }
            }
            LayerParams::Gru(g) => {
                let (w_z, w_r, w_h) = (m("w_z", &g.w_z), m("w_r", &g.w_r), m("w_h", &g.w_h));
                LayerParams::Gru(GruWeights {
                    input_size: g.input_size,
                    cells: g.cells,
                    w_z,
                    w_r,
                    w_h,
                    b_z: f("b_z", &g.b_z),
                    b_r: f("b_r", &g.b_r),
                    b_h: f("b_h", &g.b_h),
                })
            }
            LayerParams::Lstm(l) => {
                let (w_i, w_f, w_g, w_o) = (m("w_i", &l.w_i), m("w_f", &l.w_f), m("w_g", &l.w_g), m("w_o", &l.w_o));
                let (b_i, b_f, b_g, b_o) = (f("b_i", &l.b_i), f("b_f", &l.b_f), f("b_g", &l.b_g), f("b_o", &l.b_o));
                let peephole = l.peephole.as_ref().map(|p| Peephole {
                    input: f("p_i", &p.input),
                    forget: f("p_f", &p.forget),
                    output: f("p_o", &p.output),
                });
                let projection = l
                    .projection
                    .as_ref()
                    .map(|p| Matrix { rows: p.rows, cols: p.cols, data: f("proj", &p.data) });
                LayerParams::Lstm(LstmWeights {
                    input_size: l.input_size,
                    cells: l.cells,
                    w_i,
                    w_f,
                    w_g,
                    w_o,
                    b_i,
                    b_f,
                    b_g,
                    b_o,
                    peephole,
                    projection,
                })
            }
            LayerParams::Empty => LayerParams::Empty,
        }
    }
}

/// Parameters for every layer of a model, aligned with [`ModelSpec::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights<T> {
    pub layers: Vec<LayerParams<T>>,
}

impl<T: Copy> ModelWeights<T> {
    /// Builds weights by asking `init(layer_index, tensor_name, len)` for each tensor.
    pub fn from_fn(spec: &ModelSpec, mut init: impl FnMut(usize, &str, usize) -> Vec<T>) -> Result<Self> {
        let layers = spec
            .layers()
            .iter()
            .zip(spec.shapes())
            .enumerate()
            .map(|(i, (layer, shape))| {
                let tensors = param_layout(layer, shape)
                    .iter()
                    .map(|(name, dims)| init(i, name, dims.iter().product()))
                    .collect();
                LayerParams::assemble(layer, shape, tensors)
            })
            .collect::<Result<_>>()?;
        Ok(ModelWeights { layers })
    }

    /// Checks that every tensor has the size the model expects.
    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        if self.layers.len() != spec.layers().len() {
            return Err(Error::DimMismatch(format!(
                "weights cover {} layers, model has {}",
                self.layers.len(),
                spec.layers().len()
            )));
        }
        for (i, ((params, layer), shape)) in self.layers.iter().zip(spec.layers()).zip(spec.shapes()).enumerate() {
            let layout = param_layout(layer, shape);
            let got = params.tensors();
            let ok = layout.len() == got.len()
                && layout.iter().zip(&got).all(|((ln, dims), (gn, data))| {
                    ln == gn && dims.iter().product::<usize>() == data.len()
                });
            if !ok {
                return Err(Error::shape(format!("{i} ({layer})"), "weights do not match the layer"));
            }
        }
        Ok(())
    }

    pub fn map<U: Copy>(&self, mut f: impl FnMut(usize, &str, &[T]) -> Vec<U>) -> ModelWeights<U> {
        ModelWeights {
            layers: self
                .layers
                .iter()
                .enumerate()
                .map(|(i, l)| l.map(&mut |name, data| f(i, name, data)))
                .collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().flat_map(|l| l.tensors()).map(|(_, d)| d.len()).sum()
    }
}

impl<T: Real> ModelWeights<T> {
    pub fn zeros(spec: &ModelSpec) -> Self {
        Self::from_fn(spec, |_, _, n| vec![T::zero(); n]).expect("layout sizes are consistent")
    }

    /// Seeded uniform weights in `[-bound, bound]`.
    pub fn random_uniform(spec: &ModelSpec, seed: u64, bound: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::from_fn(spec, |_, _, n| (0..n).map(|_| T::lit(rng.gen_range(-bound..=bound))).collect())
            .expect("layout sizes are consistent")
    }

    /// Seeded uniform weights scaled by `1/√fan_in` per tensor, biases in `[-0.1, 0.1]`.
    ///
    /// Keeps activations of deep random models in a sensible range.
    pub fn random_scaled(spec: &ModelSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layouts: Vec<_> = spec.layers().iter().zip(spec.shapes()).map(|(l, s)| param_layout(l, s)).collect();
        Self::from_fn(spec, |i, name, n| {
            let dims = &layouts[i].iter().find(|(nm, _)| *nm == name).unwrap().1;
            let bound = match (name, dims.len()) {
                ("dw", _) => 1.0 / ((dims[0] * dims[1]) as f64).sqrt(),
                ("w", 4) => 1.0 / ((dims[0] * dims[1] * dims[2]) as f64).sqrt(),
                (_, 2) => 1.0 / (dims[1] as f64).sqrt(),
                (n, _) if n.starts_with("p_") => 0.5,
                _ => 0.1,
            };
            (0..n).map(|_| T::lit(rng.gen_range(-bound..=bound))).collect()
        })
        .expect("layout sizes are consistent")
    }

    pub fn cast<U: Real>(&self) -> ModelWeights<U> {
        self.map(|_, _, d| d.iter().map(|v| U::lit(v.as_f64())).collect())
    }
}

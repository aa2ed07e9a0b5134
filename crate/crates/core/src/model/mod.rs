//! Layer-graph model description.
//!
//! A [`ModelSpec`] is a linear chain of layers over a `T × F × 1` feature
//! input. The hidden layers come from the compact notation handled in
//! [`dsl`]; every model ends with a linear classifier to `k` classes and a
//! softmax, which the notation leaves implicit.

mod dsl;
mod file;
mod shape;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

pub use dsl::{parse_model_dsl, print_model_dsl};
pub use file::{default_labels, ModelFile};
pub use shape::{conv_output_len, infer_shapes, LayerShape};

/// Output classes of the keyword task: ten keywords plus silence and unknown.
pub const DEFAULT_CLASSES: usize = 12;

/// Upper bound on any single layer dimension accepted by the parser.
pub const MAX_DIM: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Family {
    Dnn,
    Cnn,
    BasicLstm,
    Lstm,
    Gru,
    Crnn,
    DsCnn,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Dnn,
        Family::Cnn,
        Family::BasicLstm,
        Family::Lstm,
        Family::Gru,
        Family::Crnn,
        Family::DsCnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Dnn => "DNN",
            Family::Cnn => "CNN",
            Family::BasicLstm => "BasicLSTM",
            Family::Lstm => "LSTM",
            Family::Gru => "GRU",
            Family::Crnn => "CRNN",
            Family::DsCnn => "DSCNN",
        }
    }

    /// Convolution padding convention of the family.
    pub fn conv_padding(self) -> Padding {
        match self {
            Family::DsCnn => Padding::Same,
            _ => Padding::Valid,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        match key.to_ascii_uppercase().as_str() {
            "DNN" => Ok(Family::Dnn),
            "CNN" => Ok(Family::Cnn),
            "BASICLSTM" => Ok(Family::BasicLstm),
            "LSTM" => Ok(Family::Lstm),
            "GRU" => Ok(Family::Gru),
            "CRNN" => Ok(Family::Crnn),
            "DSCNN" => Ok(Family::DsCnn),
            _ => Err(Error::Format(format!("unknown model family '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Padding {
    Valid,
    Same,
}

/// Activation shape: time × frequency × channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Shape {
    pub t: usize,
    pub f: usize,
    pub c: usize,
}

impl Shape {
    pub const fn new(t: usize, f: usize, c: usize) -> Self {
        Shape { t, f, c }
    }

    pub const fn vector(n: usize) -> Self {
        Shape { t: 1, f: 1, c: n }
    }

    pub fn elems(&self) -> usize {
        self.t * self.f * self.c
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}×{}×{}", self.t, self.f, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Layer {
    /// Dense layer with ReLU.
    FullyConnected { units: usize },
    /// 2-D convolution with ReLU.
    Conv2d {
        features: usize,
        kernel_t: usize,
        kernel_f: usize,
        stride_t: usize,
        stride_f: usize,
        padding: Padding,
    },
    /// Dense layer without nonlinearity.
    LowRankLinear { units: usize },
    /// Depthwise `kernel × kernel` (strided, same padding) then pointwise 1×1, ReLU.
    DepthwiseSeparable { features: usize, kernel: usize, stride: usize },
    /// Global average pool over time and frequency.
    AvgPool,
    BasicLstm { cells: usize },
    /// LSTM with peepholes and an optional output projection.
    Lstm { cells: usize, projection: Option<usize> },
    Gru { cells: usize },
    /// Batch normalisation already folded into the previous layer's weights.
    BatchNorm,
    /// Final linear classifier.
    Logits { classes: usize },
    Softmax { classes: usize },
}

impl Layer {
    pub fn is_recurrent(&self) -> bool {
        matches!(self, Layer::BasicLstm { .. } | Layer::Lstm { .. } | Layer::Gru { .. })
    }

    pub fn is_spatial(&self) -> bool {
        matches!(self, Layer::Conv2d { .. } | Layer::DepthwiseSeparable { .. } | Layer::AvgPool)
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, Layer::FullyConnected { .. } | Layer::LowRankLinear { .. })
    }

    /// Output width of a recurrent layer per time step.
    pub fn recurrent_output(&self) -> Option<usize> {
        match *self {
            Layer::BasicLstm { cells } | Layer::Gru { cells } => Some(cells),
            Layer::Lstm { cells, projection } => Some(projection.unwrap_or(cells)),
            _ => None,
        }
    }

    fn dims(&self) -> Vec<usize> {
        match *self {
            Layer::FullyConnected { units } | Layer::LowRankLinear { units } => vec![units],
            Layer::Conv2d { features, kernel_t, kernel_f, stride_t, stride_f, .. } => {
                vec![features, kernel_t, kernel_f, stride_t, stride_f]
            }
            Layer::DepthwiseSeparable { features, kernel, stride } => vec![features, kernel, stride],
            Layer::BasicLstm { cells } | Layer::Gru { cells } => vec![cells],
            Layer::Lstm { cells, projection } => {
                let mut d = vec![cells];
                d.extend(projection);
                d
            }
            Layer::Logits { classes } | Layer::Softmax { classes } => vec![classes],
            Layer::AvgPool | Layer::BatchNorm => vec![],
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Layer::Logits { classes } => write!(f, "Logits({classes})"),
            Layer::Softmax { classes } => write!(f, "Softmax({classes})"),
            ref other => f.write_str(&dsl::print_layer(other)),
        }
    }
}

/// Immutable, validated model description with inferred shapes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    family: Family,
    input: Shape,
    classes: usize,
    layers: Vec<Layer>,
    #[serde(skip)]
    shapes: Vec<LayerShape>,
}

impl ModelSpec {
    /// Builds a model from its hidden layers; the classifier and softmax are appended.
    pub fn new(
        family: Family,
        frames: usize,
        coeffs: usize,
        classes: usize,
        hidden: Vec<Layer>,
    ) -> Result<Self> {
        if frames == 0 || coeffs == 0 {
            return Err(Error::InvalidParams("input must be at least 1×1".into()));
        }
        if !(2..=MAX_DIM).contains(&classes) {
            return Err(Error::InvalidParams(format!("class count {classes} out of range")));
        }
        if hidden.is_empty() {
            return Err(Error::InvalidParams("model has no hidden layers".into()));
        }
        check_layers(family, &hidden)?;
        let mut layers = hidden;
        layers.push(Layer::Logits { classes });
        layers.push(Layer::Softmax { classes });
        let input = Shape::new(frames, coeffs, 1);
        let shapes = infer_shapes(input, &layers)?;
        Ok(ModelSpec { family, input, classes, layers, shapes })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn input(&self) -> Shape {
        self.input
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// All layers including the trailing classifier and softmax.
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Layers written in the compact notation (everything before the classifier).
    pub fn hidden_layers(&self) -> &[Layer] {
        &self.layers[..self.layers.len() - 2]
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn to_dsl(&self) -> String {
        print_model_dsl(self)
    }
}

fn stage(layer: &Layer) -> u8 {
    if layer.is_spatial() {
        0
    } else if layer.is_recurrent() {
        1
    } else {
        2
    }
}

fn check_layers(family: Family, hidden: &[Layer]) -> Result<()> {
    let mut current_stage = 0;
    let mut pooled = false;
    for (i, layer) in hidden.iter().enumerate() {
        let name = || format!("{i} ({layer})");
        if layer.dims().iter().any(|&d| d == 0 || d > MAX_DIM) {
            return Err(Error::shape(name(), format!("dimensions must be in 1..={MAX_DIM}")));
        }
        let allowed = match (family, layer) {
            (_, Layer::BatchNorm) => true,
            (_, Layer::Logits { .. } | Layer::Softmax { .. }) => false,
            (Family::Dnn, l) => matches!(l, Layer::FullyConnected { .. }),
            (Family::Cnn, l) => matches!(l, Layer::Conv2d { .. }) || l.is_dense(),
            (Family::BasicLstm, l) => {
                matches!(l, Layer::BasicLstm { .. } | Layer::FullyConnected { .. })
            }
            (Family::Lstm, l) => matches!(l, Layer::Lstm { .. } | Layer::FullyConnected { .. }),
            (Family::Gru, l) => matches!(l, Layer::Gru { .. } | Layer::FullyConnected { .. }),
            (Family::Crnn, l) => {
                matches!(l, Layer::Conv2d { .. } | Layer::Gru { .. }) || l.is_dense()
            }
            (Family::DsCnn, l) => {
                l.is_spatial() || matches!(l, Layer::FullyConnected { .. })
            }
        };
        if !allowed {
            return Err(Error::shape(name(), format!("layer kind not allowed in a {family} model")));
        }
        if let Layer::Conv2d { padding, .. } = layer {
            if *padding != family.conv_padding() {
                return Err(Error::shape(name(), format!("{family} convolutions use {:?} padding", family.conv_padding())));
            }
        }
        if let Layer::Lstm { cells, projection: Some(p) } = layer {
            if p > cells {
                return Err(Error::shape(name(), "projection larger than cell count"));
            }
        }
        if *layer == Layer::BatchNorm {
            continue;
        }
        let s = stage(layer);
        if s < current_stage || (pooled && layer.is_spatial()) {
            return Err(Error::shape(name(), "layers must run convolutional, then recurrent, then dense"));
        }
        current_stage = s;
        pooled |= *layer == Layer::AvgPool;
    }
    let required = |pred: fn(&Layer) -> bool, what: &str| {
        if hidden.iter().any(pred) {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("a {family} model needs at least one {what} layer")))
        }
    };
    match family {
        Family::Dnn => required(|l| matches!(l, Layer::FullyConnected { .. }), "FC"),
        Family::Cnn => required(|l| matches!(l, Layer::Conv2d { .. }), "convolution"),
        Family::BasicLstm => required(|l| matches!(l, Layer::BasicLstm { .. }), "LSTM"),
        Family::Lstm => required(|l| matches!(l, Layer::Lstm { .. }), "LSTM"),
        Family::Gru => required(|l| matches!(l, Layer::Gru { .. }), "GRU"),
        Family::Crnn => {
            required(|l| matches!(l, Layer::Conv2d { .. }), "convolution")?;
            required(|l| matches!(l, Layer::Gru { .. }), "GRU")
        }
        Family::DsCnn => required(|l| matches!(l, Layer::DepthwiseSeparable { .. }), "DSC"),
    }
}

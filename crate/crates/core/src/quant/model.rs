use super::{q_dequantize, q_quantize, QFormat};
use crate::container::{collect_layers, tensor_name, NamedTensor, TensorData};
use crate::error::{Error, Result};
use crate::kernels::{param_layout, ModelWeights, Real, SiteKind};
use crate::model::{Layer, ModelSpec};

/// Fraction lengths for every activation site of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationFormats {
    pub input: QFormat,
    /// Per layer; `None` for layers without an output of their own.
    pub out: Vec<Option<QFormat>>,
    /// Per layer; separable-convolution depthwise output or LSTM cell state.
    pub mid: Vec<Option<QFormat>>,
}

/// True when `layer` has an 8-bit activation at `kind`. Logits stay at
/// accumulator precision because only the real-valued softmax consumes them.
pub(crate) fn has_site(layer: &Layer, kind: SiteKind) -> bool {
    match kind {
        SiteKind::Input => false,
        SiteKind::Out => !matches!(layer, Layer::BatchNorm | Layer::Logits { .. } | Layer::Softmax { .. }),
        SiteKind::Mid => matches!(layer, Layer::DepthwiseSeparable { .. } | Layer::BasicLstm { .. } | Layer::Lstm { .. }),
    }
}

impl ActivationFormats {
    /// Same format at every site.
    pub fn uniform(spec: &ModelSpec, f: QFormat) -> Self {
        let per = |kind| spec.layers().iter().map(|l| has_site(l, kind).then_some(f)).collect();
        ActivationFormats { input: f, out: per(SiteKind::Out), mid: per(SiteKind::Mid) }
    }

    pub fn get(&self, layer: usize, kind: SiteKind) -> Option<QFormat> {
        match kind {
            SiteKind::Input => Some(self.input),
            SiteKind::Out => self.out.get(layer).copied().flatten(),
            SiteKind::Mid => self.mid.get(layer).copied().flatten(),
        }
    }

    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        let n = spec.layers().len();
        if self.out.len() != n || self.mid.len() != n {
            return Err(Error::Quant(format!("activation formats cover {} layers, model has {n}", self.out.len())));
        }
        for (i, l) in spec.layers().iter().enumerate() {
            for (kind, v) in [(SiteKind::Out, self.out[i]), (SiteKind::Mid, self.mid[i])] {
                if has_site(l, kind) != v.is_some() {
                    return Err(Error::Quant(format!("layer {i} ({l}): activation format for {kind:?} site mismatched")));
                }
            }
        }
        Ok(())
    }
}

/// 8-bit weights with per-tensor fraction lengths plus activation formats.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    pub weights: ModelWeights<i8>,
    /// Per layer, one format per tensor in storage order.
    pub formats: Vec<Vec<QFormat>>,
    pub activations: ActivationFormats,
}

impl QuantizedModel {
    /// Quantizes float weights with the given per-tensor formats.
    pub fn from_float<T: Real>(
        weights: &ModelWeights<T>,
        formats: Vec<Vec<QFormat>>,
        activations: ActivationFormats,
    ) -> Result<Self> {
        if formats.len() != weights.layers.len()
            || formats.iter().zip(&weights.layers).any(|(f, l)| f.len() != l.tensors().len())
        {
            return Err(Error::Quant("weight formats do not match the weights".into()));
        }
        let q = weights.map(|i, name, data| {
            let k = weights.layers[i].tensors().iter().position(|(n, _)| *n == name).unwrap();
            let f = formats[i][k];
            data.iter().map(|v| q_quantize(v.as_f64(), f)).collect()
        });
        Ok(QuantizedModel { weights: q, formats, activations })
    }

    pub fn dequantized<T: Real>(&self) -> ModelWeights<T> {
        self.weights.map(|i, name, data| {
            let k = self.weights.layers[i].tensors().iter().position(|(n, _)| *n == name).unwrap();
            let f = self.formats[i][k];
            data.iter().map(|&c| T::lit(q_dequantize(c, f))).collect()
        })
    }

    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        self.weights.check(spec)?;
        if self.formats.len() != self.weights.layers.len()
            || self.formats.iter().zip(&self.weights.layers).any(|(f, l)| f.len() != l.tensors().len())
        {
            return Err(Error::Quant("weight formats do not match the weights".into()));
        }
        self.activations.check(spec)
    }

    /// Serialises to container tensors; activation formats become empty tensors
    /// named `act.input`, `act.{layer}.out` and `act.{layer}.mid`.
    pub fn to_tensors(&self, spec: &ModelSpec) -> Result<Vec<NamedTensor>> {
        self.check(spec)?;
        let mut out = Vec::new();
        for (i, ((params, layer), shape)) in self.weights.layers.iter().zip(spec.layers()).zip(spec.shapes()).enumerate() {
            for (((name, dims), (_, data)), f) in
                param_layout(layer, shape).into_iter().zip(params.tensors()).zip(&self.formats[i])
            {
                out.push(NamedTensor::new(
                    tensor_name(i, name),
                    dims,
                    TensorData::I8 { frac: f.n() as i8, data: data.to_vec() },
                )?);
            }
        }
        let act = |name: String, f: QFormat| NamedTensor::new(name, vec![0], TensorData::I8 { frac: f.n() as i8, data: vec![] });
        out.push(act("act.input".into(), self.activations.input)?);
        for i in 0..spec.layers().len() {
            if let Some(f) = self.activations.out[i] {
                out.push(act(format!("act.{i}.out"), f)?);
            }
            if let Some(f) = self.activations.mid[i] {
                out.push(act(format!("act.{i}.mid"), f)?);
            }
        }
        Ok(out)
    }

    pub fn from_tensors(spec: &ModelSpec, tensors: &[NamedTensor]) -> Result<Self> {
        let mut flat = Vec::new();
        let weights = collect_layers(spec, tensors, |n| n.starts_with("act."), |t| match &t.data {
            TensorData::I8 { frac, data } => {
                flat.push(QFormat::new(*frac as i32).map_err(|e| Error::Format(format!("tensor {}: {e}", t.name)))?);
                Ok(data.clone())
            }
            TensorData::F32(_) => Err(Error::Format(format!("tensor {} is float, expected 8-bit", t.name))),
        })?;
        let mut it = flat.into_iter();
        let formats = weights.layers.iter().map(|l| it.by_ref().take(l.tensors().len()).collect()).collect();
        let find = |name: &str| -> Result<Option<QFormat>> {
            match tensors.iter().find(|t| t.name == name) {
                None => Ok(None),
                Some(NamedTensor { data: TensorData::I8 { frac, data }, dims, .. }) if data.is_empty() && dims == &[0] => {
                    QFormat::new(*frac as i32).map(Some).map_err(|e| Error::Format(format!("{name}: {e}")))
                }
                Some(_) => Err(Error::Format(format!("{name} must be an empty 8-bit tensor"))),
            }
        };
        let input = find("act.input")?.ok_or_else(|| Error::Format("missing tensor act.input".into()))?;
        let mut out = Vec::new();
        let mut mid = Vec::new();
        let mut known = 1;
        for i in 0..spec.layers().len() {
            let o = find(&format!("act.{i}.out"))?;
            let m = find(&format!("act.{i}.mid"))?;
            known += o.is_some() as usize + m.is_some() as usize;
            out.push(o);
            mid.push(m);
        }
        if known != tensors.iter().filter(|t| t.name.starts_with("act.")).count() {
            return Err(Error::Format("unexpected activation format tensors".into()));
        }
        let q = QuantizedModel { weights, formats, activations: ActivationFormats { input, out, mid } };
        q.activations.check(spec).map_err(|e| Error::Format(e.to_string()))?;
        Ok(q)
    }
}

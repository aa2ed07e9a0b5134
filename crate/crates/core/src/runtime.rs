//! Audio-to-decision pipelines: one decision per clip, or a sliding window
//! with posterior smoothing for continuous audio.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::container::{float_weights_from_tensors, is_quantized, read_container, NamedTensor};
use crate::error::{Error, Result};
use crate::features::wav::read_wav;
use crate::features::{FeatureMatrix, FeatureParams, MfccExtractor, PosteriorSmoother};
use crate::kernels::{model_forward, ModelWeights};
use crate::model::{ModelFile, ModelSpec};
use crate::quant::{argmax, q_model_forward, CalibrationSample, QuantizedModel};

/// Window advance in streaming mode.
pub const DEFAULT_STEP_MS: u32 = 100;
/// Number of most recent windows averaged in streaming mode.
pub const DEFAULT_SMOOTHING: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeywordDecision {
    pub label: String,
    pub class: usize,
    pub probability: f64,
    pub probabilities: Vec<f64>,
    /// Start of the analysed window within the input.
    pub offset_ms: u32,
    /// Wall-clock time of feature extraction and inference; informational.
    pub latency_ms: f64,
}

/// Inference backend: the float kernels or the integer path.
#[derive(Debug, Clone, PartialEq)]
pub enum Engine {
    Float(ModelWeights<f32>),
    Quantized(QuantizedModel),
}

impl Engine {
    /// Builds an engine from container tensors. With `quantized` the container
    /// must hold 8-bit weights; without it 8-bit weights run dequantized on the
    /// float kernels.
    pub fn from_tensors(spec: &ModelSpec, tensors: &[NamedTensor], quantized: bool) -> Result<Self> {
        match (is_quantized(tensors), quantized) {
            (true, true) => Ok(Engine::Quantized(QuantizedModel::from_tensors(spec, tensors)?)),
            (true, false) => Ok(Engine::Float(QuantizedModel::from_tensors(spec, tensors)?.dequantized())),
            (false, false) => Ok(Engine::Float(float_weights_from_tensors(spec, tensors)?)),
            (false, true) => Err(Error::Format("the integer path needs 8-bit weights; this container holds float weights".into())),
        }
    }

    pub fn load(spec: &ModelSpec, path: &Path, quantized: bool) -> Result<Self> {
        let tensors = read_container(path).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Self::from_tensors(spec, &tensors, quantized)
    }

    pub fn posteriors(&self, spec: &ModelSpec, features: &FeatureMatrix) -> Result<Vec<f64>> {
        match self {
            Engine::Float(w) => model_forward(spec, w, features),
            Engine::Quantized(q) => q_model_forward(spec, q, features),
        }
    }
}

/// Feature settings matching a model input of `T × F`: 1 s clips, 40 ms
/// frames and the largest stride that yields `T` frames.
pub fn feature_params_for(spec: &ModelSpec) -> Result<FeatureParams> {
    let input = spec.input();
    let base = FeatureParams { num_mfcc: input.f, num_mel_filters: input.f.max(40), ..FeatureParams::default() };
    let span = base.clip_len_ms - base.frame_len_ms;
    let stride = (1..=base.clip_len_ms)
        .rev()
        .find(|&s| (span / s) as usize + 1 == input.t)
        .ok_or_else(|| Error::DimMismatch(format!("no frame stride gives {} frames per 1 s clip", input.t)))?;
    let params = FeatureParams { frame_stride_ms: stride, ..base };
    params.validate()?;
    Ok(params)
}

#[derive(Debug)]
pub struct Pipeline {
    pub model: ModelFile,
    pub engine: Engine,
    extractor: MfccExtractor,
}

impl Pipeline {
    /// Fails when `params` does not produce the model's input shape.
    pub fn new(model: ModelFile, engine: Engine, params: &FeatureParams) -> Result<Self> {
        let input = model.spec.input();
        let frames = params.frame_count()?;
        if frames != input.t || params.num_mfcc != input.f {
            return Err(Error::DimMismatch(format!(
                "features are {frames}×{}, model expects {}×{}",
                params.num_mfcc, input.t, input.f
            )));
        }
        Ok(Pipeline { model, engine, extractor: MfccExtractor::new(params)? })
    }

    pub fn params(&self) -> &FeatureParams {
        self.extractor.params()
    }

    /// Features of one clip. Shorter audio is zero-padded; longer audio is rejected.
    pub fn features(&self, samples: &[f32]) -> Result<FeatureMatrix> {
        clip_features(&self.extractor, samples)
    }

    pub fn posteriors(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        self.engine.posteriors(&self.model.spec, features)
    }

    fn decide(&self, probabilities: Vec<f64>, offset_ms: u32, start: Instant) -> KeywordDecision {
        let class = argmax(&probabilities);
        KeywordDecision {
            label: self.model.label(class).to_string(),
            class,
            probability: probabilities[class],
            probabilities,
            offset_ms,
            latency_ms: start.elapsed().as_secs_f64() * 1e3,
        }
    }

    pub fn classify_clip(&self, samples: &[f32]) -> Result<KeywordDecision> {
        let start = Instant::now();
        let p = self.posteriors(&self.features(samples)?)?;
        Ok(self.decide(p, 0, start))
    }

    /// One decision per `step_ms`: each window's posterior is averaged with
    /// up to `smoothing - 1` previous ones. Audio shorter than one window is
    /// zero-padded to a single window.
    pub fn stream(&self, samples: &[f32], step_ms: u32, smoothing: usize) -> Result<Vec<KeywordDecision>> {
        let p = self.params();
        let step = (u64::from(step_ms) * u64::from(p.sample_rate_hz) / 1000) as usize;
        if step == 0 {
            return Err(Error::InvalidParams("stream step must cover at least one sample".into()));
        }
        let window = p.clip_samples();
        let count = if samples.len() <= window { 1 } else { (samples.len() - window) / step + 1 };
        let mut smoother = PosteriorSmoother::new(smoothing)?;
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            let start = Instant::now();
            let end = (k * step + window).min(samples.len());
            let posterior = self.posteriors(&self.features(&samples[k * step..end])?)?;
            let smoothed = smoother.push(posterior)?;
            out.push(self.decide(smoothed, k as u32 * step_ms, start));
        }
        Ok(out)
    }
}

fn clip_features(extractor: &MfccExtractor, samples: &[f32]) -> Result<FeatureMatrix> {
    let expected = extractor.params().clip_samples();
    if samples.len() > expected {
        return Err(Error::LengthMismatch { expected, actual: samples.len() });
    }
    if samples.len() == expected {
        return extractor.extract(samples);
    }
    let mut padded = samples.to_vec();
    padded.resize(expected, 0.0);
    extractor.extract(&padded)
}

fn is_wav(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

fn sorted_entries(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut v = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<Vec<_>>>()?;
    v.sort();
    Ok(v)
}

/// Calibration set from a directory: WAV files directly inside are unlabeled,
/// WAV files in a subdirectory are labeled with the subdirectory's name, which
/// must be one of `labels`. Files are read in name order.
pub fn load_calibration(dir: &Path, params: &FeatureParams, labels: &[String]) -> Result<Vec<CalibrationSample>> {
    let extractor = MfccExtractor::new(params)?;
    let mut samples = Vec::new();
    let read = |path: &Path| -> Result<FeatureMatrix> {
        let audio = read_wav(path, params.sample_rate_hz)?;
        clip_features(&extractor, &audio).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    };
    for entry in sorted_entries(dir)? {
        if entry.is_dir() {
            let name = entry.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let label = labels
                .iter()
                .position(|l| l == name)
                .ok_or_else(|| Error::Format(format!("calibration subdirectory '{name}' is not a model label")))?;
            for file in sorted_entries(&entry)?.into_iter().filter(|p| p.is_file() && is_wav(p)) {
                samples.push(CalibrationSample { features: read(&file)?, label: Some(label) });
            }
        } else if is_wav(&entry) {
            samples.push(CalibrationSample::unlabeled(read(&entry)?));
        }
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no WAV files for calibration", dir.display())));
    }
    Ok(samples)
}

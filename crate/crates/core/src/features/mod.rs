//! MFCC frontend.
//!
//! A clip of `L` ms is cut into frames of `l` ms every `s` ms, giving
//! `T = floor((L - l) / s) + 1` frames. Each frame goes through
//! Hann window, zero-padded FFT magnitude, triangular mel filterbank,
//! `ln(x + floor)` and an orthonormal DCT-II, keeping the first `F`
//! coefficients.

mod mel;
mod posterior;
pub mod wav;

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};

pub use mel::{dct2_orthonormal, hann_window, hz_to_mel, mel_filterbank, mel_to_hz};
pub use posterior::{smooth_posteriors, PosteriorSmoother};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureParams {
    pub clip_len_ms: u32,
    pub frame_len_ms: u32,
    pub frame_stride_ms: u32,
    pub num_mfcc: usize,
    pub sample_rate_hz: u32,
    pub num_mel_filters: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub log_floor: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            clip_len_ms: 1000,
            frame_len_ms: 40,
            frame_stride_ms: 20,
            num_mfcc: 40,
            sample_rate_hz: 16_000,
            num_mel_filters: 40,
            fmin_hz: 20.0,
            fmax_hz: 8_000.0,
            log_floor: 1e-6,
        }
    }
}

impl FeatureParams {
    /// Settings used by the compact models: 10 coefficients, 40 ms frames, the given stride.
    pub fn compact(frame_stride_ms: u32) -> Self {
        FeatureParams { num_mfcc: 10, frame_stride_ms, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.frame_len_ms == 0 || self.frame_len_ms > self.clip_len_ms {
            return bad(format!(
                "frame length {} ms must be in 1..={} ms",
                self.frame_len_ms, self.clip_len_ms
            ));
        }
        if self.frame_stride_ms == 0 {
            return bad("frame stride must be at least 1 ms".into());
        }
        if self.num_mfcc == 0 || self.num_mfcc > self.num_mel_filters {
            return bad(format!(
                "num_mfcc {} must be in 1..={} (mel filters)",
                self.num_mfcc, self.num_mel_filters
            ));
        }
        if self.sample_rate_hz == 0 {
            return bad("sample rate must be positive".into());
        }
        let nyquist = f64::from(self.sample_rate_hz) / 2.0;
        if !(self.fmin_hz >= 0.0 && self.fmin_hz < self.fmax_hz && self.fmax_hz <= nyquist) {
            return bad(format!(
                "need 0 <= fmin ({}) < fmax ({}) <= {nyquist}",
                self.fmin_hz, self.fmax_hz
            ));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return bad("log_floor must be positive".into());
        }
        for (what, ms) in [
            ("clip", self.clip_len_ms),
            ("frame", self.frame_len_ms),
            ("stride", self.frame_stride_ms),
        ] {
            if (u64::from(ms) * u64::from(self.sample_rate_hz)) % 1000 != 0 {
                return bad(format!("{what} length {ms} ms is not a whole number of samples"));
            }
        }
        Ok(())
    }

    pub fn frame_count(&self) -> Result<usize> {
        frame_count(self.clip_len_ms, self.frame_len_ms, self.frame_stride_ms)
    }

    fn ms_to_samples(&self, ms: u32) -> usize {
        (u64::from(ms) * u64::from(self.sample_rate_hz) / 1000) as usize
    }

    pub fn clip_samples(&self) -> usize {
        self.ms_to_samples(self.clip_len_ms)
    }

    pub fn frame_samples(&self) -> usize {
        self.ms_to_samples(self.frame_len_ms)
    }

    pub fn stride_samples(&self) -> usize {
        self.ms_to_samples(self.frame_stride_ms)
    }

    pub fn fft_len(&self) -> usize {
        self.frame_samples().next_power_of_two()
    }

    /// Overrides fields from a config; unknown keys are rejected.
    pub fn apply_config(&mut self, cfg: &Config) -> Result<()> {
        let sr_given = cfg.get("sample_rate_hz").is_some();
        for key in cfg.keys() {
            match key {
                "clip_len_ms" => self.clip_len_ms = cfg.get_parsed(key)?.unwrap(),
                "frame_len_ms" => self.frame_len_ms = cfg.get_parsed(key)?.unwrap(),
                "frame_stride_ms" => self.frame_stride_ms = cfg.get_parsed(key)?.unwrap(),
                "num_mfcc" => self.num_mfcc = cfg.get_parsed(key)?.unwrap(),
                "sample_rate_hz" => self.sample_rate_hz = cfg.get_parsed(key)?.unwrap(),
                "num_mel_filters" => self.num_mel_filters = cfg.get_parsed(key)?.unwrap(),
                "fmin_hz" => self.fmin_hz = cfg.get_parsed(key)?.unwrap(),
                "fmax_hz" => self.fmax_hz = cfg.get_parsed(key)?.unwrap(),
                "log_floor" => self.log_floor = cfg.get_parsed(key)?.unwrap(),
                other => return Err(Error::Format(format!("unknown feature key '{other}'"))),
            }
        }
        if sr_given && cfg.get("fmax_hz").is_none() {
            self.fmax_hz = f64::from(self.sample_rate_hz) / 2.0;
        }
        self.validate()
    }
}

/// Number of frames in a clip: `floor((clip - frame) / stride) + 1`.
pub fn frame_count(clip_len_ms: u32, frame_len_ms: u32, frame_stride_ms: u32) -> Result<usize> {
    if frame_stride_ms == 0 {
        return Err(Error::InvalidParams("frame stride must be positive".into()));
    }
    if frame_len_ms > clip_len_ms {
        return Err(Error::InvalidParams(format!(
            "frame length {frame_len_ms} ms exceeds clip length {clip_len_ms} ms"
        )));
    }
    Ok(((clip_len_ms - frame_len_ms) / frame_stride_ms) as usize + 1)
}

/// Row-major `rows × cols` matrix of cepstral coefficients (one row per frame).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimMismatch(format!(
                "feature data has {} values, expected {rows}×{cols}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        FeatureMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub fn get(&self, t: usize, f: usize) -> f64 {
        self.data[t * self.cols + f]
    }
}

/// Reusable MFCC pipeline with precomputed window, FFT plan, filterbank and DCT.
pub struct MfccExtractor {
    params: FeatureParams,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    filterbank: Vec<Vec<f64>>,
    dct: Vec<Vec<f64>>,
}

impl std::fmt::Debug for MfccExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MfccExtractor").field("params", &self.params).finish_non_exhaustive()
    }
}

impl MfccExtractor {
    pub fn new(params: &FeatureParams) -> Result<Self> {
        params.validate()?;
        let nfft = params.fft_len();
        let fft = FftPlanner::new().plan_fft_forward(nfft);
        let filterbank = mel_filterbank(
            params.num_mel_filters,
            nfft,
            f64::from(params.sample_rate_hz),
            params.fmin_hz,
            params.fmax_hz,
        );
        let mut dct = dct2_orthonormal(params.num_mel_filters);
        dct.truncate(params.num_mfcc);
        Ok(MfccExtractor {
            params: params.clone(),
            window: hann_window(params.frame_samples()),
            fft,
            filterbank,
            dct,
        })
    }

    pub fn params(&self) -> &FeatureParams {
        &self.params
    }

    pub fn extract(&self, signal: &[f32]) -> Result<FeatureMatrix> {
        let expected = self.params.clip_samples();
        if signal.len() != expected {
            return Err(Error::LengthMismatch { expected, actual: signal.len() });
        }
        if signal.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput("signal contains non-finite samples".into()));
        }
        let rows = self.params.frame_count()?;
        let stride = self.params.stride_samples();
        let mut data = Vec::with_capacity(rows * self.params.num_mfcc);
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft.len()];
        for t in 0..rows {
            let frame = &signal[t * stride..t * stride + self.window.len()];
            data.extend(self.frame_coefficients(frame, &mut buf));
        }
        FeatureMatrix::new(rows, self.params.num_mfcc, data)
    }

    fn frame_coefficients(&self, frame: &[f32], buf: &mut [Complex<f64>]) -> Vec<f64> {
        buf.fill(Complex::new(0.0, 0.0));
        for ((b, &x), w) in buf.iter_mut().zip(frame).zip(&self.window) {
            b.re = f64::from(x) * w;
        }
        self.fft.process(buf);
        let bins = self.fft.len() / 2 + 1;
        let log_mel: Vec<f64> = self
            .filterbank
            .iter()
            .map(|row| {
                let e: f64 = row.iter().zip(&buf[..bins]).map(|(w, c)| w * c.norm()).sum();
                (e + self.params.log_floor).ln()
            })
            .collect();
        self.dct
            .iter()
            .map(|row| row.iter().zip(&log_mel).map(|(d, v)| d * v).sum())
            .collect()
    }
}

/// One-shot MFCC extraction of a single clip.
pub fn extract_mfcc(signal: &[f32], params: &FeatureParams) -> Result<FeatureMatrix> {
    MfccExtractor::new(params)?.extract(signal)
}

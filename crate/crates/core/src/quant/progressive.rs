use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use super::model::has_site;
use super::{
    choose_fraction_length, q_dequantize, q_model_forward, q_quantize, ActivationFormats, Objective, QFormat, QuantizedModel,
};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::kernels::{model_forward_observed, param_layout, softmax, ActivationSite, ModelWeights, Real, SiteKind};
use crate::model::ModelSpec;

/// Candidate fraction lengths are searched within this distance of the range-optimal one.
pub const SEARCH_RADIUS: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSample {
    pub features: FeatureMatrix,
    pub label: Option<usize>,
}

impl CalibrationSample {
    pub fn unlabeled(features: FeatureMatrix) -> Self {
        CalibrationSample { features, label: None }
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

type Sites = HashMap<ActivationSite, QFormat>;

fn fake_quant<T: Real>(data: &mut [T], f: QFormat) {
    for v in data {
        *v = T::lit(q_dequantize(q_quantize(v.as_f64(), f), f));
    }
}

fn forward_fq(spec: &ModelSpec, w: &ModelWeights<f64>, sites: &Sites, x: &FeatureMatrix) -> Result<Vec<f64>> {
    let logits = model_forward_observed(spec, w, x, |s, d| {
        if let Some(&f) = sites.get(&s) {
            fake_quant(d, f);
        }
    })?;
    Ok(softmax(&logits))
}

/// Calibration metric of `outputs`: accuracy when every sample is labeled,
/// otherwise the negated mean squared error against `reference`.
pub fn calibration_metric(samples: &[CalibrationSample], reference: &[Vec<f64>], outputs: &[Vec<f64>]) -> f64 {
    if samples.iter().all(|s| s.label.is_some()) {
        let hits = samples.iter().zip(outputs).filter(|(s, p)| s.label == Some(argmax(p))).count();
        hits as f64 / samples.len() as f64
    } else {
        let mut total = 0.0;
        let mut n = 0usize;
        for (r, p) in reference.iter().zip(outputs) {
            for (a, b) in r.iter().zip(p) {
                total += (a - b) * (a - b);
                n += 1;
            }
        }
        -total / n.max(1) as f64
    }
}

fn run_all(
    samples: &[CalibrationSample],
    f: impl Fn(&FeatureMatrix) -> Result<Vec<f64>> + Sync,
) -> Result<Vec<Vec<f64>>> {
    samples.par_iter().map(|s| f(&s.features)).collect()
}

fn check_samples(spec: &ModelSpec, samples: &[CalibrationSample]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Quant("calibration set is empty".into()));
    }
    if let Some(l) = samples.iter().filter_map(|s| s.label).find(|&l| l >= spec.classes()) {
        return Err(Error::Quant(format!("calibration label {l} out of range for {} classes", spec.classes())));
    }
    Ok(())
}

/// Observed `(min, max)` at every activation site.
pub fn collect_activation_ranges(
    spec: &ModelSpec,
    weights: &ModelWeights<f64>,
    fixed: &HashMap<ActivationSite, QFormat>,
    samples: &[CalibrationSample],
) -> Result<HashMap<ActivationSite, (f64, f64)>> {
    let per: Vec<HashMap<ActivationSite, (f64, f64)>> = samples
        .par_iter()
        .map(|s| {
            let mut seen: HashMap<ActivationSite, (f64, f64)> = HashMap::new();
            model_forward_observed(spec, weights, &s.features, |site, d| {
                let e = seen.entry(site).or_insert((f64::INFINITY, f64::NEG_INFINITY));
                for &v in d.iter() {
                    e.0 = e.0.min(v);
                    e.1 = e.1.max(v);
                }
                if let Some(&f) = fixed.get(&site) {
                    fake_quant(d, f);
                }
            })?;
            Ok(seen)
        })
        .collect::<Result<_>>()?;
    let mut out: HashMap<ActivationSite, (f64, f64)> = HashMap::new();
    for m in per {
        for (k, (lo, hi)) in m {
            let e = out.entry(k).or_insert((f64::INFINITY, f64::NEG_INFINITY));
            e.0 = e.0.min(lo);
            e.1 = e.1.max(hi);
        }
    }
    Ok(out)
}

fn range_format(r: Option<&(f64, f64)>) -> Result<QFormat> {
    match r {
        Some(&(lo, hi)) if lo.is_finite() && hi.is_finite() => choose_fraction_length(&[lo, hi], Objective::Range),
        Some(_) => Ok(QFormat(7)),
        None => Err(Error::Quant("activation site never observed".into())),
    }
}

/// Activation sites in forward order.
fn site_order(spec: &ModelSpec) -> Vec<ActivationSite> {
    let mut v = vec![ActivationSite { layer: 0, kind: SiteKind::Input }];
    for (i, l) in spec.layers().iter().enumerate() {
        for kind in [SiteKind::Mid, SiteKind::Out] {
            if has_site(l, kind) {
                v.push(ActivationSite { layer: i, kind });
            }
        }
    }
    v
}

fn formats_from_sites(spec: &ModelSpec, sites: &Sites) -> Result<ActivationFormats> {
    let get = |s: ActivationSite| sites.get(&s).copied();
    let per = |kind| {
        spec.layers()
            .iter()
            .enumerate()
            .map(|(i, l)| if has_site(l, kind) { get(ActivationSite { layer: i, kind }) } else { None })
            .collect::<Vec<_>>()
    };
    let a = ActivationFormats {
        input: get(ActivationSite { layer: 0, kind: SiteKind::Input }).ok_or_else(|| Error::Quant("input format missing".into()))?,
        out: per(SiteKind::Out),
        mid: per(SiteKind::Mid),
    };
    a.check(spec)?;
    Ok(a)
}

fn range_weight_formats<T: Real>(weights: &ModelWeights<T>) -> Result<Vec<Vec<QFormat>>> {
    weights
        .layers
        .iter()
        .map(|l| {
            l.tensors()
                .iter()
                .map(|(_, d)| choose_fraction_length(&d.iter().map(|v| v.as_f64()).collect::<Vec<_>>(), Objective::Range))
                .collect()
        })
        .collect()
}

/// Range-optimal formats for every weight tensor and every activation site
/// (activation ranges observed on the float model).
pub fn quantize_model_range<T: Real>(
    spec: &ModelSpec,
    weights: &ModelWeights<T>,
    samples: &[CalibrationSample],
) -> Result<QuantizedModel> {
    check_samples(spec, samples)?;
    weights.check(spec)?;
    let w64: ModelWeights<f64> = weights.cast();
    let ranges = collect_activation_ranges(spec, &w64, &HashMap::new(), samples)?;
    let sites = site_order(spec)
        .into_iter()
        .map(|s| Ok((s, range_format(ranges.get(&s))?)))
        .collect::<Result<Sites>>()?;
    QuantizedModel::from_float(&w64, range_weight_formats(&w64)?, formats_from_sites(spec, &sites)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerReport {
    pub index: usize,
    pub layer: String,
    /// `(tensor, N)` per weight tensor.
    pub weight_formats: Vec<(String, i32)>,
    pub activation_format: Option<i32>,
    pub mid_format: Option<i32>,
    /// Calibration metric before and after this layer's weights were quantized.
    pub metric_before: f64,
    pub metric_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantReport {
    /// `"accuracy"` or `"neg_mse"`.
    pub metric: &'static str,
    pub input_format: i32,
    pub float_metric: f64,
    /// Metric of the integer inference path.
    pub quantized_metric: f64,
    /// Fraction of calibration samples where float and integer argmax agree.
    pub agreement: f64,
    pub layers: Vec<LayerReport>,
}

impl QuantReport {
    /// Loss in percentage points: accuracy drop when labeled, argmax disagreement otherwise.
    pub fn loss_points(&self) -> f64 {
        if self.metric == "accuracy" {
            (self.float_metric - self.quantized_metric) * 100.0
        } else {
            (1.0 - self.agreement) * 100.0
        }
    }
}

impl fmt::Display for QuantReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<4} {:<28} {:<34} {:>5} {:>5} {:>12} {:>12}", "#", "layer", "weight N", "act N", "mid N", "before", "after")?;
        writeln!(f, "{:<4} {:<28} {:<34} {:>5} {:>5}", "-", "input", "", self.input_format, "")?;
        let opt = |v: Option<i32>| v.map_or("-".to_string(), |n| n.to_string());
        for l in &self.layers {
            let w = if l.weight_formats.is_empty() {
                "-".to_string()
            } else {
                l.weight_formats.iter().map(|(n, q)| format!("{n}={q}")).collect::<Vec<_>>().join(" ")
            };
            writeln!(
                f,
                "{:<4} {:<28} {:<34} {:>5} {:>5} {:>12.6} {:>12.6}",
                l.index,
                l.layer,
                w,
                opt(l.activation_format),
                opt(l.mid_format),
                l.metric_before + 0.0,
                l.metric_after + 0.0
            )?;
        }
        writeln!(f, "metric: {}", self.metric)?;
        writeln!(f, "float: {:.6}  quantized: {:.6}  argmax agreement: {:.2}%", self.float_metric + 0.0, self.quantized_metric + 0.0, self.agreement * 100.0)
    }
}

/// Picks the candidate with the best metric; ties go to the larger fraction length.
fn best_of<C: Copy>(cands: impl Iterator<Item = (i32, C)>, mut eval: impl FnMut(C) -> Result<f64>) -> Result<(C, f64)> {
    let mut best: Option<(i32, C, f64)> = None;
    for (key, c) in cands {
        let m = eval(c)?;
        let better = match best {
            None => true,
            Some((bk, _, bm)) => m > bm || (m == bm && key > bk),
        };
        if better {
            best = Some((key, c, m));
        }
    }
    let (_, c, m) = best.ok_or_else(|| Error::Quant("no candidate formats".into()))?;
    Ok((c, m))
}

/// Layer-by-layer quantization. Each layer's weight tensors share an offset
/// `δ ∈ [-SEARCH_RADIUS, SEARCH_RADIUS]` from their own range-optimal fraction
/// length, chosen to maximise the calibration metric with earlier layers
/// already quantized. Activation sites are then fixed one at a time in forward
/// order the same way.
pub fn quantize_model_progressive<T: Real>(
    spec: &ModelSpec,
    weights: &ModelWeights<T>,
    samples: &[CalibrationSample],
) -> Result<(QuantizedModel, QuantReport)> {
    check_samples(spec, samples)?;
    weights.check(spec)?;
    let float: ModelWeights<f64> = weights.cast();
    let none = Sites::new();
    let reference = run_all(samples, |x| forward_fq(spec, &float, &none, x))?;
    let metric_of = |w: &ModelWeights<f64>, sites: &Sites| -> Result<f64> {
        let out = run_all(samples, |x| forward_fq(spec, w, sites, x))?;
        Ok(calibration_metric(samples, &reference, &out))
    };
    let float_metric = metric_of(&float, &none)?;
    let base = range_weight_formats(&float)?;

    let mut current = float.clone();
    let mut formats: Vec<Vec<QFormat>> = Vec::with_capacity(base.len());
    let mut layers = Vec::with_capacity(base.len());
    let mut metric = float_metric;
    for (i, layer) in spec.layers().iter().enumerate() {
        let before = metric;
        if base[i].is_empty() {
            formats.push(Vec::new());
        } else {
            let quantize_layer = |delta: i32| -> (ModelWeights<f64>, Vec<QFormat>) {
                let fs: Vec<QFormat> = base[i].iter().map(|f| QFormat::clamped(f.n() + delta)).collect();
                let mut w = current.clone();
                let mut k = 0;
                w.layers[i] = current.layers[i].map(&mut |_, d: &[f64]| {
                    let f = fs[k];
                    k += 1;
                    d.iter().map(|&v| q_dequantize(q_quantize(v, f), f)).collect()
                });
                (w, fs)
            };
            let (delta, m) = best_of((-SEARCH_RADIUS..=SEARCH_RADIUS).map(|d| (d, d)), |d| metric_of(&quantize_layer(d).0, &none))?;
            let (w, fs) = quantize_layer(delta);
            current = w;
            formats.push(fs);
            metric = m;
        }
        let names = param_layout(layer, &spec.shapes()[i]).into_iter().map(|(n, _)| n.to_string());
        layers.push(LayerReport {
            index: i,
            layer: layer.to_string(),
            weight_formats: names.zip(formats[i].iter().map(|f| f.n())).collect(),
            activation_format: None,
            mid_format: None,
            metric_before: before,
            metric_after: metric,
        });
    }

    let mut sites = Sites::new();
    for site in site_order(spec) {
        let ranges = collect_activation_ranges(spec, &current, &sites, samples)?;
        let base = range_format(ranges.get(&site))?;
        let (f, _) = best_of(
            (-SEARCH_RADIUS..=SEARCH_RADIUS).map(|d| QFormat::clamped(base.n() + d)).map(|f| (f.n(), f)),
            |f| {
                let mut s = sites.clone();
                s.insert(site, f);
                metric_of(&current, &s)
            },
        )?;
        sites.insert(site, f);
    }
    let activations = formats_from_sites(spec, &sites)?;
    for l in &mut layers {
        l.activation_format = activations.out[l.index].map(QFormat::n);
        l.mid_format = activations.mid[l.index].map(QFormat::n);
    }

    let q = QuantizedModel::from_float(&float, formats, activations)?;
    let outputs = run_all(samples, |x| q_model_forward(spec, &q, x))?;
    let agree = outputs.iter().zip(&reference).filter(|(a, b)| argmax(a) == argmax(b)).count();
    let labeled = samples.iter().all(|s| s.label.is_some());
    let report = QuantReport {
        metric: if labeled { "accuracy" } else { "neg_mse" },
        input_format: q.activations.input.n(),
        float_metric,
        quantized_metric: calibration_metric(samples, &reference, &outputs),
        agreement: agree as f64 / samples.len() as f64,
        layers,
    };
    Ok((q, report))
}

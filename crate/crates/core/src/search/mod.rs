//! Hyperparameter grid search under the S/M/L resource budgets.
//!
//! A [`SearchSpace`] pairs feature grids (coefficients per frame, frame
//! stride) with a per-family architecture template whose free parameters are
//! swept over integer grids. Accuracy is not computed here; candidates carry an
//! optional external score keyed by notation, and the default proxy score is
//! the negated operation count.

mod pareto;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::estimator::{estimate, ConstraintClass, ResourceReport, SizeClass};
use crate::features::FeatureParams;
use crate::model::{parse_model_dsl, Family, ModelSpec, DEFAULT_CLASSES};

pub use pareto::{dominates, pareto_front, pareto_indices};

/// Free parameters of each family template, in enumeration order.
pub fn grid_keys(family: Family) -> &'static [&'static str] {
    match family {
        Family::Dnn => &["fc.depth", "fc.width"],
        Family::Cnn => &["conv1.features", "conv2.features", "linear", "fc.width"],
        Family::BasicLstm | Family::Gru => &["cells"],
        Family::Lstm => &["cells", "projection"],
        Family::Crnn => &["conv.features", "conv.stride_f", "gru.cells", "fc.width"],
        Family::DsCnn => &["dsc.depth", "dsc.features", "conv.stride_f", "dsc.first_stride"],
    }
}

fn range(start: usize, end: usize, step: usize) -> Vec<usize> {
    (start..=end).step_by(step).collect()
}

fn default_grid(family: Family, key: &str) -> Vec<usize> {
    match (family, key) {
        (Family::Dnn, "fc.depth") => range(1, 4, 1),
        (Family::Dnn, "fc.width") => range(64, 512, 4),
        (Family::Cnn, "conv1.features" | "conv2.features") => range(16, 80, 8),
        (Family::Cnn, "linear") => range(16, 64, 16),
        (Family::Cnn, "fc.width") => vec![64, 128],
        (Family::BasicLstm | Family::Gru, "cells") => range(64, 512, 4),
        (Family::Lstm, "cells") => range(64, 512, 8),
        (Family::Lstm, "projection") => range(32, 256, 16),
        (Family::Crnn, "conv.features") => range(32, 128, 16),
        (Family::Crnn | Family::DsCnn, "conv.stride_f") => vec![1, 2],
        (Family::Crnn, "gru.cells") => range(32, 160, 16),
        (Family::Crnn, "fc.width") => range(64, 192, 32),
        (Family::DsCnn, "dsc.depth") => range(1, 5, 1),
        (Family::DsCnn, "dsc.features") => range(32, 300, 4),
        (Family::DsCnn, "dsc.first_stride") => vec![1, 2],
        _ => unreachable!("no default grid for {family} {key}"),
    }
}

/// Notation of the family template at one grid point (values in [`grid_keys`] order).
pub fn template_dsl(family: Family, v: &[usize]) -> String {
    match family {
        Family::Dnn => vec![format!("FC({})", v[1]); v[0]].join("-"),
        Family::Cnn => format!("C({},10,4,1,1)-C({},10,4,2,1)-L({})-FC({})", v[0], v[1], v[2], v[3]),
        Family::BasicLstm => format!("LSTM({})", v[0]),
        Family::Lstm => format!("LSTM({}), Projection({})", v[0], v[1]),
        Family::Gru => format!("GRU({})", v[0]),
        Family::Crnn => format!("C({},10,4,2,{})-GRU({g})-GRU({g})-FC({})", v[0], v[1], v[3], g = v[2]),
        Family::DsCnn => {
            let w = v[1];
            let mut s = format!("C({w},10,4,2,{})-DSC({w},3,{})", v[2], v[3]);
            for _ in 1..v[0] {
                s.push_str(&format!("-DSC({w},3,1)"));
            }
            s.push_str("-AvgPool");
            s
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub family: Family,
    /// Coefficients per frame.
    pub coeffs: Vec<usize>,
    pub strides_ms: Vec<u32>,
    pub classes: usize,
    /// One grid per entry of [`grid_keys`].
    pub grids: BTreeMap<&'static str, Vec<usize>>,
}

impl SearchSpace {
    pub fn new(family: Family) -> Self {
        let grids = grid_keys(family).iter().map(|&k| (k, default_grid(family, k))).collect();
        SearchSpace { family, coeffs: vec![10, 20, 40], strides_ms: vec![20, 40], classes: DEFAULT_CLASSES, grids }
    }

    /// Defaults overridden by `coeffs`, `strides_ms`, `classes` and the family's
    /// grid keys; lists use `a,b,c` or `start:end:step`.
    pub fn from_config(family: Family, cfg: &Config) -> Result<Self> {
        let mut s = Self::new(family);
        for key in cfg.keys() {
            match key {
                "coeffs" => s.coeffs = cfg.get_list(key)?.unwrap(),
                "strides_ms" => {
                    s.strides_ms = cfg
                        .get_list(key)?
                        .unwrap()
                        .into_iter()
                        .map(|v| u32::try_from(v).map_err(|_| Error::Format(format!("stride {v} too large"))))
                        .collect::<Result<_>>()?
                }
                "classes" => s.classes = cfg.get_parsed(key)?.unwrap(),
                k => match grid_keys(family).iter().find(|&&g| g == k) {
                    Some(&g) => {
                        s.grids.insert(g, cfg.get_list(k)?.unwrap());
                    }
                    None => return Err(Error::Format(format!("unknown grid key '{k}' for {family}"))),
                },
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let mut all: Vec<(&str, Vec<usize>)> = vec![
            ("coeffs", self.coeffs.clone()),
            ("strides_ms", self.strides_ms.iter().map(|&v| v as usize).collect()),
        ];
        all.extend(grid_keys(self.family).iter().map(|&k| (k, self.grids.get(k).cloned().unwrap_or_default())));
        for (k, v) in all {
            if v.is_empty() {
                return Err(Error::InvalidParams(format!("grid '{k}' is empty")));
            }
            if v.contains(&0) {
                return Err(Error::InvalidParams(format!("grid '{k}' contains 0")));
            }
        }
        if self.classes < 2 {
            return Err(Error::InvalidParams("at least two classes are required".into()));
        }
        Ok(())
    }

    /// Number of raw grid points, including ones whose template is invalid.
    pub fn size(&self) -> usize {
        self.coeffs.len() * self.strides_ms.len() * grid_keys(self.family).iter().map(|k| self.grids[k].len()).product::<usize>()
    }

    /// Grid point `index` in enumeration order: coefficients outermost, then
    /// stride, then the template parameters with the last key fastest.
    fn point(&self, mut index: usize) -> (usize, u32, Vec<usize>) {
        let keys = grid_keys(self.family);
        let mut v = vec![0; keys.len()];
        for (slot, k) in v.iter_mut().zip(keys).rev() {
            let g = &self.grids[k];
            *slot = g[index % g.len()];
            index /= g.len();
        }
        let s = self.strides_ms[index % self.strides_ms.len()];
        index /= self.strides_ms.len();
        (self.coeffs[index], s, v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub spec: ModelSpec,
    pub features: FeatureParams,
    pub report: ResourceReport,
    pub score: Option<f64>,
}

/// Flat view of a candidate for CSV and JSON output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateRow {
    pub dsl: String,
    pub family: String,
    #[serde(rename = "F")]
    pub coeffs: usize,
    #[serde(rename = "S")]
    pub stride_ms: u32,
    pub memory_bytes: u64,
    pub ops: u64,
    pub class: Option<SizeClass>,
    pub score: Option<f64>,
}

impl Candidate {
    pub fn build(family: Family, dsl: &str, coeffs: usize, stride_ms: u32, classes: usize) -> Result<Self> {
        let features = FeatureParams { num_mfcc: coeffs, num_mel_filters: coeffs.max(40), ..FeatureParams::compact(stride_ms) };
        let spec = parse_model_dsl(dsl, family, features.frame_count()?, coeffs, classes)?;
        let report = estimate(&spec);
        Ok(Candidate { spec, features, report, score: None })
    }

    pub fn row(&self) -> CandidateRow {
        CandidateRow {
            dsl: self.spec.to_dsl(),
            family: self.spec.family().to_string(),
            coeffs: self.features.num_mfcc,
            stride_ms: self.features.frame_stride_ms,
            memory_bytes: self.report.memory_bytes,
            ops: self.report.ops,
            class: self.report.class,
            score: self.score,
        }
    }
}

/// Every valid grid point whose resources fit `class`, in enumeration order.
/// Grid points whose template does not fit the input shape are skipped.
pub fn enumerate(space: &SearchSpace, class: ConstraintClass) -> Result<Vec<Candidate>> {
    space.validate()?;
    let found: Vec<Option<Candidate>> = (0..space.size())
        .into_par_iter()
        .map(|i| {
            let (coeffs, stride, v) = space.point(i);
            if space.family == Family::Lstm && v[1] >= v[0] {
                return None;
            }
            let c = Candidate::build(space.family, &template_dsl(space.family, &v), coeffs, stride, space.classes).ok()?;
            class.admits(c.report.memory_bytes, c.report.ops).then_some(c)
        })
        .collect();
    Ok(found.into_iter().flatten().collect())
}

fn normalize(dsl: &str) -> String {
    dsl.chars().filter(|c| !c.is_whitespace()).collect()
}

/// External scores, one `notation<TAB>score` per line; `#` comments and
/// blank lines are ignored. Keys match regardless of whitespace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    scores: HashMap<String, f64>,
}

impl ScoreTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut scores = HashMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("");
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Format(format!("score line {}: {msg}", n + 1));
            let (key, value) = line.split_once('\t').ok_or_else(|| bad("expected notation<TAB>score"))?;
            let score: f64 = value.trim().parse().map_err(|_| bad("score is not a number"))?;
            if !score.is_finite() {
                return Err(bad("score must be finite"));
            }
            let key = normalize(key);
            if key.is_empty() {
                return Err(bad("empty notation"));
            }
            if scores.insert(key, score).is_some() {
                return Err(bad("duplicate notation"));
            }
        }
        Ok(ScoreTable { scores })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = String::from_utf8(std::fs::read(path)?)
            .map_err(|_| Error::Format(format!("{}: score file is not UTF-8", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, dsl: &str) -> Option<f64> {
        self.scores.get(&normalize(dsl)).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Scores from `table`, or the proxy `-ops` without one. Candidates missing
/// from the table stay unscored.
pub fn apply_scores(candidates: &mut [Candidate], table: Option<&ScoreTable>) {
    for c in candidates {
        c.score = match table {
            Some(t) => t.get(&c.spec.to_dsl()),
            None => Some(-(c.report.ops as f64)),
        };
    }
}

/// The `n` best-scoring candidates; ties keep enumeration order and unscored
/// candidates come last.
pub fn top_n(candidates: &[Candidate], n: usize) -> Vec<Candidate> {
    let mut idx: Vec<usize> = (0..candidates.len()).collect();
    idx.sort_by(|&a, &b| {
        let key = |i: usize| candidates[i].score.unwrap_or(f64::NEG_INFINITY);
        key(b).total_cmp(&key(a)).then(candidates[b].score.is_some().cmp(&candidates[a].score.is_some()))
    });
    idx.into_iter().take(n).map(|i| candidates[i].clone()).collect()
}

/// Ladder input: 10 coefficients at a 20 ms stride (49 frames).
pub const LADDER_STRIDE_MS: u32 = 20;
pub const LADDER_COEFFS: usize = 10;
pub const LADDER_WIDTH_STEP: usize = 4;

/// Ladder template: one strided and four unit-stride separable blocks of width `w`.
pub fn ladder_dsl(w: usize) -> String {
    template_dsl(Family::DsCnn, &[5, w, 1, 2])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalabilityLadder {
    pub floor_bytes: u64,
    /// Rungs of increasing width; the first is the largest one under the floor,
    /// the last the largest one that fits class L.
    pub rungs: Vec<Candidate>,
}

/// DS-CNN widths in steps of [`LADDER_WIDTH_STEP`] from the largest model
/// below `floor_bytes` up to the largest that fits class L. Fails when no
/// ladder model is smaller than the floor.
pub fn scalability_sweep(floor_bytes: u64) -> Result<ScalabilityLadder> {
    let mut all = Vec::new();
    for w in (LADDER_WIDTH_STEP..).step_by(LADDER_WIDTH_STEP) {
        let c = Candidate::build(Family::DsCnn, &ladder_dsl(w), LADDER_COEFFS, LADDER_STRIDE_MS, DEFAULT_CLASSES)?;
        if !ConstraintClass::LARGE.admits(c.report.memory_bytes, c.report.ops) {
            break;
        }
        all.push(c);
    }
    let Some(start) = all.iter().rposition(|c| c.report.memory_bytes < floor_bytes) else {
        let smallest = all.first().map_or(0, |c| c.report.memory_bytes);
        return Err(Error::InvalidParams(format!(
            "memory floor {floor_bytes} B is unreachable: the smallest DS-CNN ladder model needs {smallest} B"
        )));
    };
    Ok(ScalabilityLadder { floor_bytes, rungs: all.split_off(start) })
}

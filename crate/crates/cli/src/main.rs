//! `kws`: keyword spotting from the command line.
//!
//! Exit codes: 0 success, 1 usage, 2 malformed input, 3 budget or loss threshold exceeded.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kws_core::config::Config;
use kws_core::container::{float_weights_to_tensors, is_quantized, read_container, write_container};
use kws_core::estimator::{estimate, ConstraintClass, SizeClass};
use kws_core::features::wav::read_wav;
use kws_core::features::{FeatureParams, MfccExtractor};
use kws_core::kernels::ModelWeights;
use kws_core::model::{Family, ModelFile};
use kws_core::quant::{argmax, quantize_model_progressive, QuantizedModel};
use kws_core::runtime::{feature_params_for, load_calibration, Engine, Pipeline, DEFAULT_SMOOTHING, DEFAULT_STEP_MS};
use kws_core::search::{apply_scores, enumerate, pareto_front, scalability_sweep, top_n, Candidate, ScoreTable, SearchSpace};
use serde_json::json;

#[derive(Parser)]
#[command(name = "kws", version, about = "Keyword spotting inference, quantization and resource estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the MFCC matrix of a WAV clip.
    Features(FeaturesArgs),
    /// Classify a WAV file.
    Infer(InferArgs),
    /// Report memory, operations and size class of a model.
    Estimate(EstimateArgs),
    /// Quantize float weights to 8 bits using calibration audio.
    Quantize(QuantizeArgs),
    /// Enumerate architectures that fit a size class.
    Search(SearchArgs),
    /// Run the float and integer paths on the same clip.
    Compare(CompareArgs),
    /// Write seeded random float weights for a model.
    InitWeights(InitArgs),
}

#[derive(Args)]
struct FeatureOpts {
    /// key=value file overriding feature settings.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    wav: PathBuf,
    /// Take coefficient count and stride from this model file.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    coeffs: usize,
    #[arg(long, default_value_t = 20)]
    stride_ms: u32,
    #[command(flatten)]
    features: FeatureOpts,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct InferArgs {
    wav: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    /// Use the integer path (needs 8-bit weights).
    #[arg(long)]
    quantized: bool,
    /// Slide a 1 s window over the whole file.
    #[arg(long)]
    stream: bool,
    #[arg(long, default_value_t = DEFAULT_STEP_MS)]
    step_ms: u32,
    /// Posteriors averaged per streaming decision.
    #[arg(long, default_value_t = DEFAULT_SMOOTHING)]
    smoothing: usize,
    #[command(flatten)]
    features: FeatureOpts,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EstimateArgs {
    model: PathBuf,
    /// Exit with status 3 unless the model fits this class.
    #[arg(long)]
    require_class: Option<SizeClass>,
    /// Print per-layer rows.
    #[arg(long)]
    layers: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct QuantizeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    /// WAV files (unlabeled) or one subdirectory per label.
    #[arg(long)]
    calibration: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Largest accepted loss in percentage points.
    #[arg(long, default_value_t = 1.0)]
    max_loss: f64,
    #[command(flatten)]
    features: FeatureOpts,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    family: Option<Family>,
    #[arg(long, default_value = "L")]
    class: SizeClass,
    /// key=value file overriding the default grids.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// notation<TAB>score lines; without it the score is -ops.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Keep only the N best-scoring candidates.
    #[arg(long)]
    top: Option<usize>,
    /// Write the Pareto set as JSON.
    #[arg(long)]
    pareto_out: Option<PathBuf>,
    /// Run the DS-CNN width ladder down to this memory floor instead.
    #[arg(long)]
    sweep_floor_kb: Option<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CompareArgs {
    wav: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Weights for the float path (float or 8-bit).
    #[arg(long)]
    weights: PathBuf,
    /// 8-bit weights for the integer path.
    #[arg(long)]
    quantized_weights: PathBuf,
    #[command(flatten)]
    features: FeatureOpts,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct InitArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Usage(String),
    Core(kws_core::Error),
    Threshold(String),
}

impl From<kws_core::Error> for Failure {
    fn from(e: kws_core::Error) -> Self {
        Failure::Core(e)
    }
}

type CliResult = Result<(), Failure>;

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn load_model(path: &Path) -> Result<ModelFile, Failure> {
    ModelFile::load(path).map_err(|e| match e {
        kws_core::Error::Io(io) => Failure::Core(kws_core::Error::Format(format!("{}: {io}", path.display()))),
        other => Failure::Core(kws_core::Error::Format(format!("{}: {other}", path.display()))),
    })
}

fn with_config(mut params: FeatureParams, opts: &FeatureOpts) -> Result<FeatureParams, Failure> {
    if let Some(path) = &opts.config {
        params.apply_config(&Config::load(path)?)?;
    }
    Ok(params)
}

fn pipeline(model: ModelFile, engine: Engine, opts: &FeatureOpts) -> Result<Pipeline, Failure> {
    let params = with_config(feature_params_for(&model.spec)?, opts)?;
    Ok(Pipeline::new(model, engine, &params)?)
}

fn features(a: FeaturesArgs) -> CliResult {
    let base = match &a.model {
        Some(m) => feature_params_for(&load_model(m)?.spec)?,
        None => FeatureParams { num_mfcc: a.coeffs, num_mel_filters: a.coeffs.max(40), ..FeatureParams::compact(a.stride_ms) },
    };
    let params = with_config(base, &a.features)?;
    let audio = read_wav(&a.wav, params.sample_rate_hz)?;
    let m = MfccExtractor::new(&params)?.extract(&audio)?;
    if a.json {
        print_json(&json!({ "rows": m.rows, "cols": m.cols, "data": m.data }));
    } else {
        println!("# {} frames x {} coefficients", m.rows, m.cols);
        for t in 0..m.rows {
            println!("{}", m.row(t).iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(" "));
        }
    }
    Ok(())
}

fn infer(a: InferArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let engine = Engine::load(&model.spec, &a.weights, a.quantized)?;
    let p = pipeline(model, engine, &a.features)?;
    let audio = read_wav(&a.wav, p.params().sample_rate_hz)?;
    if a.stream {
        let out = p.stream(&audio, a.step_ms, a.smoothing)?;
        if a.json {
            print_json(&out);
        } else {
            for d in &out {
                println!("{:>6} ms  {:<10} {:.4}", d.offset_ms, d.label, d.probability);
            }
        }
    } else {
        let d = p.classify_clip(&audio)?;
        if a.json {
            print_json(&d);
        } else {
            println!("{} {:.4} ({:.2} ms)", d.label, d.probability, d.latency_ms);
        }
    }
    Ok(())
}

fn estimate_cmd(a: EstimateArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let r = estimate(&model.spec);
    if a.json {
        print_json(&json!({
            "model": model.spec.to_dsl(),
            "family": model.spec.family().to_string(),
            "layers": r.layers,
            "param_bytes": r.param_bytes,
            "activation_bytes": r.activation_bytes,
            "total_memory_bytes": r.memory_bytes,
            "total_ops": r.ops,
            "class": r.class,
            "summary": r.summary(),
        }));
    } else {
        println!("{}", r.summary());
        if a.layers {
            println!("{:<32} {:>10} {:>10} {:>10} {:>12}", "layer", "params", "act in", "act out", "ops");
            for l in &r.layers {
                println!("{:<32} {:>10} {:>10} {:>10} {:>12}", l.name, l.param_bytes, l.act_in_elems, l.act_out_elems, l.ops);
            }
        }
    }
    if let Some(class) = a.require_class {
        if !ConstraintClass::of(class).admits(r.memory_bytes, r.ops) {
            return Err(Failure::Threshold(format!("model does not fit class {class}: {}", r.summary())));
        }
    }
    Ok(())
}

fn quantize(a: QuantizeArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let tensors = read_container(&a.weights)?;
    if is_quantized(&tensors) {
        QuantizedModel::from_tensors(&model.spec, &tensors)?;
        eprintln!("warning: {} already holds 8-bit weights; copying unchanged", a.weights.display());
        std::fs::copy(&a.weights, &a.out).map_err(kws_core::Error::from)?;
        return Ok(());
    }
    if a.max_loss.is_nan() || a.max_loss < 0.0 {
        return Err(Failure::Usage("--max-loss must be a non-negative number".into()));
    }
    let params = with_config(feature_params_for(&model.spec)?, &a.features)?;
    let weights = Engine::from_tensors(&model.spec, &tensors, false)?;
    let Engine::Float(weights) = weights else { unreachable!("float container") };
    let samples = load_calibration(&a.calibration, &params, &model.labels)?;
    let (q, report) = quantize_model_progressive(&model.spec, &weights, &samples)?;
    write_container(&a.out, &q.to_tensors(&model.spec)?)?;
    let loss = report.loss_points();
    if a.json {
        print_json(&json!({ "report": report, "loss_points": loss, "max_loss": a.max_loss, "out": a.out }));
    } else {
        print!("{report}");
        println!("loss: {loss:.3} points (limit {:.3})", a.max_loss);
    }
    if loss > a.max_loss {
        return Err(Failure::Threshold(format!("quantization loss {loss:.3} points exceeds --max-loss {}", a.max_loss)));
    }
    Ok(())
}

fn write_csv(candidates: &[Candidate]) -> CliResult {
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    for c in candidates {
        w.serialize(c.row()).map_err(|e| kws_core::Error::Io(e.into()))?;
    }
    w.flush().map_err(kws_core::Error::from)?;
    Ok(())
}

fn search(a: SearchArgs) -> CliResult {
    if let Some(kb) = a.sweep_floor_kb {
        if a.family.is_some_and(|f| f != Family::DsCnn) {
            return Err(Failure::Usage("the width ladder is defined for DSCNN only".into()));
        }
        if kb.is_nan() || kb < 0.0 {
            return Err(Failure::Usage("--sweep-floor-kb must be a non-negative number".into()));
        }
        let ladder = scalability_sweep((kb * 1000.0).round() as u64).map_err(|e| Failure::Threshold(e.to_string()))?;
        let rows: Vec<_> = ladder.rungs.iter().map(Candidate::row).collect();
        if a.json {
            print_json(&json!({ "floor_bytes": ladder.floor_bytes, "rungs": rows }));
        } else {
            write_csv(&ladder.rungs)?;
        }
        return Ok(());
    }
    let family = a.family.ok_or_else(|| Failure::Usage("--family is required".into()))?;
    let space = match &a.grid {
        Some(path) => SearchSpace::from_config(family, &Config::load(path)?)?,
        None => SearchSpace::new(family),
    };
    let table = a.scores.as_deref().map(ScoreTable::load).transpose()?;
    let mut found = enumerate(&space, ConstraintClass::of(a.class))?;
    apply_scores(&mut found, table.as_ref());
    if let Some(n) = a.top {
        found = top_n(&found, n);
    }
    let front = pareto_front(&found);
    let front_rows: Vec<_> = front.iter().map(Candidate::row).collect();
    if let Some(path) = &a.pareto_out {
        let text = serde_json::to_string_pretty(&front_rows).expect("serializable");
        std::fs::write(path, text + "\n").map_err(kws_core::Error::from)?;
    }
    if a.json {
        let rows: Vec<_> = found.iter().map(Candidate::row).collect();
        print_json(&json!({ "candidates": rows, "pareto": front_rows }));
    } else {
        write_csv(&found)?;
    }
    Ok(())
}

fn compare(a: CompareArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let float = Engine::load(&model.spec, &a.weights, false)?;
    let quant = Engine::load(&model.spec, &a.quantized_weights, true)?;
    let fp = pipeline(model.clone(), float, &a.features)?;
    let qp = pipeline(model, quant, &a.features)?;
    let audio = read_wav(&a.wav, fp.params().sample_rate_hz)?;
    let x = fp.features(&audio)?;
    let (pf, pq) = (fp.posteriors(&x)?, qp.posteriors(&x)?);
    let (cf, cq) = (argmax(&pf), argmax(&pq));
    let max_diff = pf.iter().zip(&pq).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if a.json {
        print_json(&json!({
            "float": { "label": fp.model.label(cf), "probabilities": pf },
            "quantized": { "label": qp.model.label(cq), "probabilities": pq },
            "agree": cf == cq,
            "max_abs_diff": max_diff,
        }));
    } else {
        println!("{:<12} {:>10} {:>10}", "class", "float", "8-bit");
        for (k, (a, b)) in pf.iter().zip(&pq).enumerate() {
            println!("{:<12} {a:>10.6} {b:>10.6}", fp.model.label(k));
        }
        println!("float: {}  8-bit: {}  agree: {}", fp.model.label(cf), qp.model.label(cq), cf == cq);
    }
    Ok(())
}

fn init_weights(a: InitArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let w = ModelWeights::<f32>::random_scaled(&model.spec, a.seed);
    write_container(&a.out, &float_weights_to_tensors(&model.spec, &w)?)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Features(a) => features(a),
        Command::Infer(a) => infer(a),
        Command::Estimate(a) => estimate_cmd(a),
        Command::Quantize(a) => quantize(a),
        Command::Search(a) => search(a),
        Command::Compare(a) => compare(a),
        Command::InitWeights(a) => init_weights(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, kws_core::Error::InvalidParams(_)) { 1 } else { 2 })
        }
        Err(Failure::Threshold(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

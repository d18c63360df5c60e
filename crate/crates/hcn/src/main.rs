use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hcn::config::{DataConfig, RunConfig};
use hcn::experiment::{
    classification_metrics, classify_all, compression, inpaint_all, load_data, measures_compression, train, Data,
    ClassifyMetrics, ENCODE_EPOCHS,
};
use hcn::formats::{read_json, write_json};
use hcn::pbm::{write_pbm, PbmEncoding};
use hcn::{presets, store, Error, Result};
use hcn_core::learn::{encode, TrainedModel};
use serde::Serialize;

/// Hierarchical compositional networks: generate data, learn, classify and
/// complete binary images.
#[derive(Parser)]
#[command(name = "hcn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset and write it as bitmaps plus a manifest.
    Generate(RunArgs),
    /// Learn a model and write its weights, feature images and report.
    Train(RunArgs),
    /// Classify images with a trained model.
    Classify(EvalArgs),
    /// Hide a random block of every image and complete it.
    Inpaint(EvalArgs),
    /// Compression on the training data and classification error.
    Eval(EvalArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (JSON).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named configuration.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Learn online in minibatches.
    #[arg(long)]
    online: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    damping: Option<f64>,
    /// Forgetting factor for online learning.
    #[arg(long)]
    lambda: Option<f64>,
    /// Dataset directory written by `generate`, instead of generating.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Model directory written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Run configuration; defaults to the one the model was trained with.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory written by `generate`.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

const CONFIG_FILE: &str = "config.json";
const METRICS_FILE: &str = "metrics.json";

fn resolve(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => read_json::<RunConfig>(path)?,
        (None, Some(name)) => presets::preset(name)?,
        (None, None) => return Err(Error::Config("either --config or --preset is required".into())),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.online {
        cfg.train.online = true;
    }
    if let Some(e) = args.epochs {
        cfg.hyper.epochs = e;
    }
    if let Some(a) = args.damping {
        cfg.hyper.alpha = a;
    }
    if let Some(l) = args.lambda {
        cfg.hyper.lambda = l;
    }
    if let Some(d) = &args.data {
        cfg.data = DataConfig::Manifest { path: d.clone() };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare(out: &Path, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(out).map_err(|source| Error::Io { path: out.into(), source })?;
    write_json(&out.join(CONFIG_FILE), cfg)
}

#[derive(Serialize)]
struct GenerateMetrics {
    train_images: usize,
    test_images: usize,
}

fn generate(args: &RunArgs) -> Result<()> {
    let cfg = resolve(args)?;
    let data = load_data(&cfg)?;
    prepare(&args.out, &cfg)?;
    store::save_dataset(&args.out, &data, cfg.seed, Some(&cfg.data))?;
    let m = GenerateMetrics { train_images: data.train.len(), test_images: data.test.as_ref().map_or(0, |t| t.len()) };
    write_json(&args.out.join(METRICS_FILE), &m)?;
    println!("wrote {} training and {} test images to {}", m.train_images, m.test_images, args.out.display());
    Ok(())
}

fn write_features(out: &Path, model: &TrainedModel) -> Result<()> {
    let dir = out.join("features");
    fs::create_dir_all(&dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
    for (l, w) in model.weights.iter().enumerate() {
        write_pbm(&dir.join(format!("layer{l}.pbm")), &store::feature_grid(w)?, PbmEncoding::Plain)?;
    }
    Ok(())
}

fn train_cmd(args: &RunArgs) -> Result<()> {
    let cfg = resolve(args)?;
    let data = load_data(&cfg)?;
    prepare(&args.out, &cfg)?;
    let result = train(&cfg, &data.train)?;
    store::save_model(&args.out, &result.model)?;
    write_features(&args.out, &result.model)?;
    let m = result.metrics(data.train.len(), cfg.train.online);
    write_json(&args.out.join(METRICS_FILE), &m)?;
    if !m.converged && !cfg.train.online && cfg.hyper.epochs > 0 {
        log::warn!("learning did not reach a fixed point; the model is the last iterate");
    }
    match m.compression {
        Some(c) => println!("trained in {:.1} s, compression {:.1}%", m.wall_time_s, 100.0 * c),
        None => println!("trained in {:.1} s", m.wall_time_s),
    }
    Ok(())
}

/// Model, resolved configuration and data for the evaluation commands.
fn load_for_eval(args: &EvalArgs) -> Result<(TrainedModel, RunConfig, Data)> {
    let model = store::load_model(&args.model)?;
    let mut cfg: RunConfig = read_json(args.config.as_deref().unwrap_or(&args.model.join(CONFIG_FILE)))?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(d) = &args.data {
        cfg.data = DataConfig::Manifest { path: d.clone() };
    }
    cfg.validate()?;
    let data = load_data(&cfg)?;
    if data.train.images.first().is_some_and(|x| x.dims() != model.arch.image) {
        return Err(Error::Config("the data does not match the model's image size".into()));
    }
    prepare(&args.out, &cfg)?;
    Ok((model, cfg, data))
}

#[derive(Serialize)]
struct ImageScores {
    class: usize,
    template: usize,
    classes: Vec<f64>,
}

fn classify_cmd(args: &EvalArgs) -> Result<()> {
    let (model, cfg, data) = load_for_eval(args)?;
    let test = data.eval_split(cfg.eval.test_images);
    let scores = classify_all(&model, &test.images)?;
    let m = classification_metrics(&scores, &test, &model.arch)?;
    let per_image: Vec<ImageScores> = scores
        .iter()
        .map(|s| ImageScores { class: s.class, template: s.template, classes: s.classes.clone() })
        .collect();
    write_json(&args.out.join("scores.json"), &per_image)?;
    write_json(&args.out.join(METRICS_FILE), &m)?;
    report_classification(&m);
    Ok(())
}

fn report_classification(m: &ClassifyMetrics) {
    if let Some(e) = m.error {
        println!("classification error {:.2}% on {} images", 100.0 * e, m.images);
    }
    if let Some(e) = m.clustering_error {
        println!("template clustering error {:.2}% on {} images", 100.0 * e, m.images);
    }
}

fn inpaint_cmd(args: &EvalArgs) -> Result<()> {
    let (model, cfg, data) = load_for_eval(args)?;
    let test = data.eval_split(cfg.eval.test_images);
    let r = inpaint_all(&model, &test.images, cfg.eval.mask_block, cfg.eval.pool_rounds, cfg.seed)?;
    let dir = args.out.join("completed");
    fs::create_dir_all(&dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
    for (i, (y, m)) in r.completed.iter().zip(&r.masks).enumerate() {
        write_pbm(&dir.join(format!("{i:05}.pbm")), y, PbmEncoding::Raw)?;
        write_pbm(&dir.join(format!("{i:05}-mask.pbm")), m, PbmEncoding::Raw)?;
    }
    write_json(&args.out.join(METRICS_FILE), &r.metrics)?;
    println!(
        "masked-pixel accuracy {:.2}%, observed pixels unchanged in {:.1}% of {} images",
        100.0 * r.metrics.masked_accuracy,
        100.0 * r.metrics.observed_unchanged,
        r.metrics.images
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalMetrics {
    train_images: usize,
    compression: Option<f64>,
    classification: Option<ClassifyMetrics>,
}

fn eval_cmd(args: &EvalArgs) -> Result<()> {
    let (model, cfg, data) = load_for_eval(args)?;
    let compression = if measures_compression(&model.arch) {
        let s = encode(&data.train.images, &model, ENCODE_EPOCHS)?;
        Some(compression(&data.train.images, &s, &model)?)
    } else {
        None
    };
    let classification = if model.arch.classes.is_some() {
        let test = data.eval_split(cfg.eval.test_images);
        let scores = classify_all(&model, &test.images)?;
        Some(classification_metrics(&scores, &test, &model.arch)?)
    } else {
        None
    };
    if let Some(c) = compression {
        println!("compression {:.1}% on {} training images", 100.0 * c, data.train.len());
    }
    if let Some(m) = &classification {
        report_classification(m);
    }
    let m = EvalMetrics { train_images: data.train.len(), compression, classification };
    write_json(&args.out.join(METRICS_FILE), &m)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train_cmd(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Inpaint(a) => inpaint_cmd(a),
        Command::Eval(a) => eval_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}

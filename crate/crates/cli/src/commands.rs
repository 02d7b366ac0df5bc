//! Command-line surface: argument definitions and the subcommand drivers.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use triplet_core::detector::detect_with_mirror_image;

use crate::bench::{self, BenchParams};
use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::manifest::{Manifest, Split};
use crate::model::ModelFile;
use crate::pipeline;
use crate::synth::{self, SynthSpec};
use crate::visualize;

#[derive(Debug, Parser)]
#[command(name = "triplets", version, about = "Mine geometrically constrained patch triplets and classify with them")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "TRIPLETS_WORKERS")]
    pub workers: Option<usize>,
    /// Log progress and per-stage timings.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mine discriminative triplets from the training split.
    Mine(MineArgs),
    /// Train the linear classifier on Bag-of-Triplets descriptors.
    Train(TrainArgs),
    /// Classify the test split and report accuracy.
    Eval(EvalArgs),
    /// Generate a synthetic corpus with landmark annotations.
    SynthGen(SynthArgs),
    /// Localization ablation over annotated landmark pools.
    BenchLocalize(BenchArgs),
    /// Draw top detections and per-class response maps.
    Visualize(VisualizeArgs),
}

/// Overrides for every pipeline setting; unset flags keep the config file or default value.
#[derive(Debug, Default, Args)]
pub struct ConfigArgs {
    /// JSON file with pipeline settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub patch_side: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub target_width: Option<usize>,
    #[arg(long)]
    pub canonical_side: Option<usize>,
    #[arg(long)]
    pub descriptor_side: Option<usize>,
    #[arg(long)]
    pub neighborhood_size: Option<usize>,
    #[arg(long)]
    pub top_locations: Option<usize>,
    #[arg(long)]
    pub triplets_per_class: Option<usize>,
    #[arg(long)]
    pub k_top: Option<usize>,
    #[arg(long)]
    pub eta_o: Option<f64>,
    #[arg(long)]
    pub eta_s: Option<f64>,
    #[arg(long)]
    pub overlap_max: Option<f64>,
    #[arg(long)]
    pub top_m: Option<usize>,
    #[arg(long)]
    pub svm_c: Option<f64>,
    #[arg(long)]
    pub svm_max_epochs: Option<usize>,
    #[arg(long)]
    pub svm_tolerance: Option<f64>,
    #[arg(long)]
    pub rng_seed: Option<u64>,
    #[arg(long)]
    pub negative_class_subsample: Option<usize>,
    #[arg(long)]
    pub eval_negative_classes: Option<usize>,
    #[arg(long)]
    pub ridge_fraction: Option<f64>,
    #[arg(long)]
    pub max_background_patches: Option<usize>,
    #[arg(long)]
    pub discriminative_eps: Option<f64>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                PipelineConfig::from_json(&text)?
            }
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(
            patch_side,
            stride,
            target_width,
            canonical_side,
            descriptor_side,
            neighborhood_size,
            top_locations,
            triplets_per_class,
            k_top,
            eta_o,
            eta_s,
            overlap_max,
            svm_c,
            svm_max_epochs,
            svm_tolerance,
            rng_seed,
            ridge_fraction,
            max_background_patches,
            discriminative_eps
        );
        if self.top_m.is_some() {
            c.top_m = self.top_m;
        }
        if self.negative_class_subsample.is_some() {
            c.negative_class_subsample = self.negative_class_subsample;
        }
        if self.eval_negative_classes.is_some() {
            c.eval_negative_classes = self.eval_negative_classes;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
    /// Mining report (JSON); defaults to `<out>.mining.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Mined model to train.
    #[arg(long)]
    pub model: PathBuf,
    /// Output model file; defaults to overwriting `--model`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svm_c: Option<f64>,
    #[arg(long)]
    pub svm_max_epochs: Option<usize>,
    #[arg(long)]
    pub svm_tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// JSON report path; printed to stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Confusion matrix CSV.
    #[arg(long)]
    pub confusion: Option<PathBuf>,
    /// Directory for per-class mean response CSV and PNG.
    #[arg(long)]
    pub bot_plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory; receives `manifest.jsonl` and `images/`.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with generator settings.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub train_per_class: Option<usize>,
    #[arg(long)]
    pub test_per_class: Option<usize>,
    #[arg(long)]
    pub image_side: Option<usize>,
    #[arg(long)]
    pub distractors: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub pairs: usize,
    #[arg(long, default_value_t = 100)]
    pub triplets_per_pair: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report path.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct VisualizeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Split to draw: train or test.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Number of images to overlay.
    #[arg(long, default_value_t = 4)]
    pub images: usize,
    /// Strongest detections drawn per image.
    #[arg(long, default_value_t = 3)]
    pub triplets: usize,
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("worker count must be positive".into()));
        }
        // a pool may already exist when called repeatedly in one process
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("worker pool already initialized");
        }
    }
    match cli.command {
        Command::Mine(a) => mine(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::SynthGen(a) => synth_gen(&a),
        Command::BenchLocalize(a) => bench_localize(&a),
        Command::Visualize(a) => visualize(&a),
    }
}

fn load_manifest(path: &Path) -> Result<Manifest> {
    let m = Manifest::load(path)?;
    m.check_paths()?;
    Ok(m)
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    match path {
        Some(p) => visualize::save_text(&(text + "\n"), p),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn mine(a: &MineArgs) -> Result<()> {
    let cfg = a.config.resolve()?;
    let manifest = load_manifest(&a.manifest)?;
    let labels = manifest.labels();
    let train = pipeline::load_split(&manifest, Split::Train, &labels, &cfg)?;
    let (model, report) = pipeline::mine(&train, &labels, &cfg)?;
    model.save(&a.out)?;
    let report_path = a.report.clone().unwrap_or_else(|| with_suffix(&a.out, ".mining.json"));
    write_json(&report, Some(&report_path))?;
    log::info!("{} triplets written to {}", model.triplets.len(), a.out.display());
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn train(a: &TrainArgs) -> Result<()> {
    let mut model = ModelFile::load(&a.model)?;
    if let Some(c) = a.svm_c {
        model.config.svm_c = c;
    }
    if let Some(e) = a.svm_max_epochs {
        model.config.svm_max_epochs = e;
    }
    if let Some(t) = a.svm_tolerance {
        model.config.svm_tolerance = t;
    }
    model.config.validate()?;
    let manifest = load_manifest(&a.manifest)?;
    let train = pipeline::load_split(&manifest, Split::Train, &model.labels, &model.config)?;
    let report = pipeline::train(&mut model, &train)?;
    log::info!("train accuracy {:.4} over {} images", report.train_accuracy, report.samples);
    model.save(a.out.as_deref().unwrap_or(&a.model))
}

fn eval(a: &EvalArgs) -> Result<()> {
    let model = ModelFile::load(&a.model)?;
    let manifest = load_manifest(&a.manifest)?;
    let test = pipeline::load_split(&manifest, Split::Test, &model.labels, &model.config)?;
    let (report, bots) = pipeline::evaluate(&model, &test)?;
    if let Some(p) = &a.confusion {
        visualize::save_text(&visualize::confusion_csv(&model.labels, &report.metrics), p)?;
    }
    if let Some(dir) = &a.bot_plot {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let labeled: Vec<(usize, &[f64])> = test
            .iter()
            .zip(&bots)
            .filter_map(|(t, b)| t.label.map(|l| (l, b.as_slice())))
            .collect();
        let means = visualize::class_means(model.labels.len(), &labeled);
        visualize::save_text(&visualize::table_csv(&model.labels, &means), &dir.join("bot_means.csv"))?;
        visualize::save_png(&visualize::heat_map(&means, 4), &dir.join("bot_means.png"))?;
    }
    eprintln!("accuracy {:.2}% over {} images", 100.0 * report.accuracy, report.total);
    write_json(&report, a.report.as_deref())
}

fn synth_gen(a: &SynthArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => SynthSpec::default(),
    };
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = a.$f { spec.$f = v; } )* };
    }
    set!(classes, train_per_class, test_per_class, image_side, distractors, noise, seed);
    let path = synth::write_corpus(&spec, &a.out)?;
    println!("{}", path.display());
    Ok(())
}

fn bench_localize(a: &BenchArgs) -> Result<()> {
    let cfg = a.config.resolve()?;
    let manifest = load_manifest(&a.manifest)?;
    let labels = manifest.labels();
    let images = bench::load_annotated(&manifest, &labels, &cfg)?;
    let params = BenchParams {
        pairs: a.pairs,
        triplets_per_pair: a.triplets_per_pair,
        seed: a.seed,
        ..BenchParams::default()
    };
    let report = bench::run(&images, &cfg, &params)?;
    print!("{}", report.table());
    if let Some(p) = &a.report {
        write_json(&report, Some(p))?;
    }
    Ok(())
}

fn visualize(a: &VisualizeArgs) -> Result<()> {
    let split = match a.split.as_str() {
        "train" => Split::Train,
        "test" => Split::Test,
        other => return Err(CliError::Config(format!("unknown split {other:?}"))),
    };
    let model = ModelFile::load(&a.model)?;
    let manifest = load_manifest(&a.manifest)?;
    let images = pipeline::load_split(&manifest, split, &model.labels, &model.config)?;
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    let cfg = &model.config;
    let params = cfg.detection_params();
    for (n, img) in images.iter().take(a.images).enumerate() {
        let mut found = Vec::new();
        for t in &model.triplets {
            if let Some(d) = detect_with_mirror_image(&img.image, &t.detector, &params, &cfg.hog)? {
                found.push(d);
            }
        }
        found.sort_by(|x, y| y.total.total_cmp(&x.total));
        found.truncate(a.triplets);
        visualize::save_png(&visualize::overlay(&img.image, &found), &a.out.join(format!("overlay_{n:03}.png")))?;
    }
    let (all_bots, labeled): (Vec<_>, Vec<usize>) = {
        let bots = pipeline::descriptors(&model, &images.iter().map(|i| &i.image).collect::<Vec<_>>())?;
        let labels = images.iter().map(|i| i.label).collect::<Vec<_>>();
        let pairs: Vec<_> = bots.into_iter().zip(labels).filter_map(|(b, l)| l.map(|l| (b, l))).collect();
        pairs.into_iter().unzip()
    };
    let rows: Vec<(usize, &[f64])> = labeled.iter().zip(&all_bots).map(|(&l, b)| (l, b.as_slice())).collect();
    let means = visualize::class_means(model.labels.len(), &rows);
    visualize::save_text(&visualize::table_csv(&model.labels, &means), &a.out.join("bot_means.csv"))?;
    visualize::save_png(&visualize::heat_map(&means, 4), &a.out.join("bot_means.png"))?;
    if model.classifier.is_some() {
        let (report, _) = pipeline::evaluate(&model, &images)?;
        visualize::save_text(&visualize::confusion_csv(&model.labels, &report.metrics), &a.out.join("confusion.csv"))?;
    }
    Ok(())
}

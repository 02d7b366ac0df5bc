//! Mining, training and evaluation over loaded images.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use triplet_core::classify::{bot_descriptors, evaluate as evaluate_model, predict, train_svm, BotDescriptor, Metrics, SvmConfig};
use triplet_core::detector::{BackgroundStats, CovarianceAccumulator, ImageFeatures, Ridge, TripletDetector};
use triplet_core::imaging::{preprocess, resize_bilinear, whole_image_descriptor_at, GrayImage, HogGrid, PatchLocation};
use triplet_core::mining::{
    build_neighborhood_among, dedup_candidates, default_top_m, discriminative_map, label_entropy, propose_candidates,
    score_candidates, select_triplets, CandidateTriplet, DescriptorIndex, EvalImage, MinedTriplet,
};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::manifest::{load_gray, Manifest, Split};
use crate::model::ModelFile;

/// A preprocessed image; `label` is `None` for classes outside the model's label table.
#[derive(Clone, Debug)]
pub struct LabeledImage {
    pub label: Option<usize>,
    pub image: GrayImage<f64>,
    pub source: String,
}

/// Loads and preprocesses one split. Unreadable images and bad boxes are skipped with a warning.
pub fn load_split(manifest: &Manifest, split: Split, labels: &[String], cfg: &PipelineConfig) -> Result<Vec<LabeledImage>> {
    let entries = manifest.split(split);
    let loaded: Vec<Option<LabeledImage>> = entries
        .par_iter()
        .map(|e| {
            let path = manifest.resolve(e);
            let image = load_gray(&path).and_then(|raw| Ok(preprocess(&raw, e.rect(), cfg.target_width)?));
            match image {
                Ok(image) => Some(LabeledImage {
                    label: labels.iter().position(|l| *l == e.label),
                    image,
                    source: e.path.clone(),
                }),
                Err(err) => {
                    log::warn!("skipping {}: {err}", path.display());
                    None
                }
            }
        })
        .collect();
    Ok(loaded.into_iter().flatten().collect())
}

const BACKGROUND_CHUNK: usize = 256;

/// Background statistics over evenly subsampled dense windows of the given images.
pub fn background_from_images<'a>(
    images: impl Iterator<Item = &'a GrayImage<f64>>,
    cfg: &PipelineConfig,
) -> Result<BackgroundStats<f64>> {
    let images: Vec<&GrayImage<f64>> = images.collect();
    let grids = images
        .par_iter()
        .map(|im| HogGrid::new(im, &cfg.hog))
        .collect::<triplet_core::Result<Vec<_>>>()?;
    background_from_grids(&grids.iter().collect::<Vec<_>>(), cfg)
}

/// Accumulates in fixed-size chunks merged in order, so the result does not
/// depend on the number of workers.
pub fn background_from_grids(grids: &[&HogGrid<f64>], cfg: &PipelineConfig) -> Result<BackgroundStats<f64>> {
    let grid = cfg.patch_grid();
    let mut windows: Vec<(usize, PatchLocation)> = Vec::new();
    for (i, g) in grids.iter().enumerate() {
        if let Some((cols, rows)) = grid.dims(g.width(), g.height()) {
            for row in 0..rows {
                for col in 0..cols {
                    windows.push((i, grid.location(col, row)));
                }
            }
        }
    }
    let total = windows.len();
    if total > cfg.max_background_patches {
        let keep = cfg.max_background_patches;
        windows = (0..keep).map(|k| windows[k * total / keep]).collect();
    }
    if windows.len() < 2 {
        return Err(CliError::Data(format!("{} background windows; need at least 2", windows.len())));
    }
    let dim = cfg.hog.patch_dim(cfg.patch_side);
    let batch = BACKGROUND_CHUNK * rayon::current_num_threads().max(1);
    let mut acc = CovarianceAccumulator::new(dim);
    for block in windows.chunks(batch) {
        let partials = block
            .par_chunks(BACKGROUND_CHUNK)
            .map(|chunk| {
                let mut part = CovarianceAccumulator::new(dim);
                for &(i, loc) in chunk {
                    part.push(&grids[i].window_feature(loc)?)?;
                }
                Ok(part)
            })
            .collect::<triplet_core::Result<Vec<_>>>()?;
        for p in &partials {
            acc = acc.merge(p)?;
        }
    }
    Ok(acc.finish(Ridge::TraceFraction(cfg.ridge_fraction))?)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ClassMining {
    pub label: String,
    pub images: usize,
    pub candidates: usize,
    pub scored: usize,
    pub selected: usize,
    pub eval_images: usize,
    pub top_m: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MiningReport {
    pub images: usize,
    pub neighborhoods: usize,
    pub proposed: usize,
    pub after_dedup: usize,
    pub classes: Vec<ClassMining>,
    /// Bin edges over `[0, ln(#classes)]` and counts of scored candidate entropies.
    pub entropy_edges: Vec<f64>,
    pub entropy_counts: Vec<usize>,
    pub selected_entropy_counts: Vec<usize>,
}

fn stage(name: &str, start: Instant) {
    log::info!("{name}: {:.2?}", start.elapsed());
}

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The seed class plus `count` other classes drawn without replacement.
fn class_subset(own: usize, classes: &[usize], count: Option<usize>, rng: &mut ChaCha8Rng) -> BTreeSet<usize> {
    match count {
        None => classes.iter().copied().collect(),
        Some(n) => {
            let mut others: Vec<usize> = classes.iter().copied().filter(|&c| c != own).collect();
            others.shuffle(rng);
            others.truncate(n);
            others.push(own);
            others.into_iter().collect()
        }
    }
}

// separate rng streams per use keep the draws independent of each other
const NEIGHBORHOOD_STREAM: u64 = 1 << 32;
const EVAL_STREAM: u64 = 2 << 32;

/// Mines discriminative triplets from labeled training images.
pub fn mine(train: &[LabeledImage], labels: &[String], cfg: &PipelineConfig) -> Result<(ModelFile, MiningReport)> {
    cfg.validate()?;
    let images: Vec<(usize, &GrayImage<f64>)> = train
        .iter()
        .filter_map(|t| t.label.map(|l| (l, &t.image)))
        .collect();
    let classes: Vec<usize> = images.iter().map(|&(l, _)| l).collect::<BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(CliError::Data(format!(
            "mining needs at least two classes in the training split, found {}",
            classes.len()
        )));
    }
    let params = cfg.detection_params();
    let geometry = cfg.geometry();

    let t = Instant::now();
    let features = images
        .par_iter()
        .map(|&(_, im)| ImageFeatures::new(im, &cfg.hog))
        .collect::<triplet_core::Result<Vec<_>>>()?;
    let canonical = images
        .par_iter()
        .map(|&(_, im)| HogGrid::new(&resize_bilinear(im, cfg.canonical_side, cfg.canonical_side), &cfg.hog))
        .collect::<triplet_core::Result<Vec<_>>>()?;
    let descriptors = images
        .par_iter()
        .map(|&(_, im)| whole_image_descriptor_at(im, &cfg.hog, cfg.descriptor_side))
        .collect::<triplet_core::Result<Vec<_>>>()?;
    stage("features", t);

    let t = Instant::now();
    let upright: Vec<&HogGrid<f64>> = features.iter().map(|f| &f.upright).collect();
    let stats = background_from_grids(&upright, cfg)?;
    let whitener = stats.whitener()?;
    stage("background statistics", t);

    let t = Instant::now();
    let mut index = DescriptorIndex::new();
    for (id, (d, &(label, _))) in descriptors.into_iter().zip(&images).enumerate() {
        index.insert(id, label, d)?;
    }
    let labels_of: Vec<usize> = images.iter().map(|&(l, _)| l).collect();
    let proposals = (0..images.len())
        .into_par_iter()
        .map(|seed| {
            let own = labels_of[seed];
            let allowed = class_subset(own, &classes, cfg.negative_class_subsample, &mut seeded(cfg.rng_seed, NEIGHBORHOOD_STREAM + seed as u64));
            let eligible = labels_of.iter().filter(|l| allowed.contains(l)).count();
            let size = cfg.neighborhood_size.min(eligible);
            let nbhd = build_neighborhood_among(seed, &index, size, |l| allowed.contains(&l))?;
            let members: Vec<&HogGrid<f64>> = nbhd.member_ids.iter().map(|&i| &canonical[i]).collect();
            let dmap = discriminative_map(&nbhd.member_labels, &members, params.grid, cfg.discriminative_eps)?;
            Ok(propose_candidates(
                seed,
                &nbhd,
                &members,
                &dmap,
                cfg.top_locations,
                cfg.overlap_max,
                geometry.degeneracy_eps,
            )?)
        })
        .collect::<Result<Vec<Vec<CandidateTriplet<f64>>>>>()?;
    let proposed: usize = proposals.iter().map(Vec::len).sum();
    let candidates = dedup_candidates(proposals.into_iter().flatten().collect());
    log::info!("{proposed} candidates proposed, {} after dedup", candidates.len());
    stage("neighborhoods and proposals", t);

    let t = Instant::now();
    let built = candidates
        .par_iter()
        .map(|c| {
            let weights = [
                whitener.weights(&c.templates[0])?,
                whitener.weights(&c.templates[1])?,
                whitener.weights(&c.templates[2])?,
            ];
            TripletDetector::from_locations(weights, c.locations, c.class_label, geometry)
        })
        .collect::<triplet_core::Result<Vec<_>>>()?;
    stage("detectors", t);

    let t = Instant::now();
    let mut scored_all = Vec::new();
    let mut report_classes = Vec::new();
    for &class in &classes {
        let subset = class_subset(class, &classes, cfg.eval_negative_classes, &mut seeded(cfg.rng_seed, EVAL_STREAM + class as u64));
        let eval: Vec<EvalImage<'_, f64>> = features
            .iter()
            .zip(&labels_of)
            .filter(|(_, l)| subset.contains(l))
            .map(|(f, &label)| EvalImage { label, features: f })
            .collect();
        let top_m = cfg.top_m.unwrap_or_else(|| default_top_m(eval.len())).min(eval.len());
        let idx: Vec<usize> = (0..candidates.len()).filter(|&i| candidates[i].class_label == class).collect();
        let dets: Vec<TripletDetector<f64>> = idx.iter().map(|&i| built[i].clone()).collect();
        let scores = score_candidates(&dets, &eval, top_m, &params)?;
        let mut scored = 0;
        for (&i, (det, s)) in idx.iter().zip(dets.into_iter().zip(scores)) {
            if let Some(s) = s {
                scored += 1;
                scored_all.push(MinedTriplet {
                    id: candidates[i].id,
                    detector: det,
                    locations: candidates[i].locations,
                    entropy: s.entropy,
                    mean_top_score: s.mean_top_score,
                });
            }
        }
        report_classes.push(ClassMining {
            label: labels[class].clone(),
            images: labels_of.iter().filter(|&&l| l == class).count(),
            candidates: idx.len(),
            scored,
            selected: 0,
            eval_images: eval.len(),
            top_m,
        });
    }
    stage("entropy scoring", t);

    let max_h: f64 = label_entropy(&classes);
    let bins = 10;
    let edges: Vec<f64> = (0..=bins).map(|b| max_h * b as f64 / bins as f64).collect();
    let histogram = |ts: &[MinedTriplet<f64>]| {
        let mut counts = vec![0usize; bins];
        for t in ts {
            let b = if max_h > 0.0 { (t.entropy / max_h * bins as f64) as usize } else { 0 };
            counts[b.min(bins - 1)] += 1;
        }
        counts
    };
    let entropy_counts = histogram(&scored_all);
    let selected = select_triplets(scored_all, cfg.triplets_per_class);
    for rc in &mut report_classes {
        let class = labels.iter().position(|l| *l == rc.label).expect("known label");
        rc.selected = selected.iter().filter(|t| t.detector.class_label == class).count();
    }
    let report = MiningReport {
        images: images.len(),
        neighborhoods: images.len(),
        proposed,
        after_dedup: candidates.len(),
        selected_entropy_counts: histogram(&selected),
        classes: report_classes,
        entropy_edges: edges,
        entropy_counts,
    };

    let mut model = ModelFile::new(cfg.clone(), labels.to_vec());
    model.background = Some(stats);
    model.triplets = selected;
    Ok((model, report))
}

fn check_model_dim(model: &ModelFile) -> Result<()> {
    let expected = model.config.hog.patch_dim(model.config.patch_side);
    if model.triplets.is_empty() {
        return Err(CliError::Data("model holds no mined triplets".into()));
    }
    if model.feature_dim() != expected {
        return Err(CliError::Data(format!(
            "model detectors have dimension {} but its configuration implies {expected}",
            model.feature_dim()
        )));
    }
    Ok(())
}

/// Bag-of-Triplets descriptors of preprocessed images under the model's detectors.
pub fn descriptors(model: &ModelFile, images: &[&GrayImage<f64>]) -> Result<Vec<BotDescriptor<f64>>> {
    check_model_dim(model)?;
    let cfg = &model.config;
    let features = images
        .par_iter()
        .map(|im| ImageFeatures::new(im, &cfg.hog))
        .collect::<triplet_core::Result<Vec<_>>>()?;
    Ok(bot_descriptors(&features, &model.detectors(), &cfg.detection_params())?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainReport {
    pub samples: usize,
    pub dim: usize,
    pub epochs: Vec<usize>,
    pub train_accuracy: f64,
}

/// Computes BoTs for the training images and fits the SVM into `model`.
pub fn train(model: &mut ModelFile, train: &[LabeledImage]) -> Result<TrainReport> {
    let labeled: Vec<(usize, &GrayImage<f64>)> = train.iter().filter_map(|t| t.label.map(|l| (l, &t.image))).collect();
    let skipped = train.len() - labeled.len();
    if skipped > 0 {
        log::warn!("{skipped} training images have labels outside the model and are ignored");
    }
    let t = Instant::now();
    let bots = descriptors(model, &labeled.iter().map(|&(_, im)| im).collect::<Vec<_>>())?;
    stage("bag-of-triplets", t);
    let samples: Vec<(usize, &[f64])> = labeled.iter().zip(&bots).map(|(&(l, _), b)| (l, b.as_slice())).collect();
    let cfg = &model.config;
    let svm = SvmConfig {
        c: cfg.svm_c,
        max_epochs: cfg.svm_max_epochs,
        tolerance: cfg.svm_tolerance,
        seed: cfg.rng_seed,
    };
    let t = Instant::now();
    let classifier = train_svm(&samples, model.labels.len(), &svm)?;
    stage("svm", t);
    let metrics = evaluate_model(&classifier, &samples)?;
    let report = TrainReport {
        samples: samples.len(),
        dim: classifier.dim(),
        epochs: classifier.epochs.clone(),
        train_accuracy: metrics.accuracy,
    };
    model.classifier = Some(classifier);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    /// Correct predictions over all test images, unknown labels counting as errors.
    pub accuracy: f64,
    pub total: usize,
    pub unknown_labels: usize,
    pub metrics: Metrics,
    /// `(truth, predicted)` per image; truth is `None` for unknown labels.
    pub predictions: Vec<(Option<usize>, usize)>,
}

/// Classifies test images; also returns their descriptors.
pub fn evaluate(model: &ModelFile, test: &[LabeledImage]) -> Result<(EvalReport, Vec<BotDescriptor<f64>>)> {
    let classifier = model
        .classifier
        .as_ref()
        .ok_or_else(|| CliError::Data("model has no trained classifier; run train first".into()))?;
    if test.is_empty() {
        return Err(CliError::Data("test split is empty".into()));
    }
    let t = Instant::now();
    let bots = descriptors(model, &test.iter().map(|t| &t.image).collect::<Vec<_>>())?;
    stage("bag-of-triplets", t);
    let mut predictions = Vec::with_capacity(test.len());
    for (img, bot) in test.iter().zip(&bots) {
        let (pred, _) = predict(classifier, bot)?;
        if img.label.is_none() {
            log::warn!("{}: label not in the model, counted as an error", img.source);
        }
        predictions.push((img.label, pred));
    }
    let known: Vec<(usize, usize)> = predictions.iter().filter_map(|&(t, p)| t.map(|t| (t, p))).collect();
    let correct = known.iter().filter(|(t, p)| t == p).count();
    let report = EvalReport {
        accuracy: correct as f64 / predictions.len() as f64,
        total: predictions.len(),
        unknown_labels: predictions.len() - known.len(),
        metrics: Metrics::from_predictions(model.labels.len(), &known),
        predictions,
    };
    Ok((report, bots))
}

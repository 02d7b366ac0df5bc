//! Localization ablation on annotated landmark pools.
//!
//! For random same-class image pairs, one-shot LDA detectors are built from
//! three landmark patches of the first image and matched against the pool of
//! landmark and distractor patches of the second. Each mode re-ranks the same
//! pool with different penalty weights.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use triplet_core::detector::{best_combination, BackgroundStats, DegeneratePolicy, LdaWhitener, RoleCandidate};
use triplet_core::geometry::{order_sign, GeometryConfig, OrderSign, TriangleSignature};
use triplet_core::imaging::{extract_hog, preprocess, FeatureVector, GrayImage, HogConfig, PatchLocation};
use triplet_core::{dot, Point64};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::manifest::{load_gray, Manifest};
use crate::pipeline::background_from_images;

/// An image with corresponding landmarks (same index = same part) and distractor positions.
#[derive(Clone, Debug)]
pub struct AnnotatedImage {
    pub label: usize,
    pub image: GrayImage<f64>,
    pub landmarks: Vec<[f64; 2]>,
    pub distractors: Vec<[f64; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BenchParams {
    pub pairs: usize,
    pub triplets_per_pair: usize,
    /// IoU above which a patch counts as the true correspondent.
    pub match_iou: f64,
    pub seed: u64,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            pairs: 1000,
            triplets_per_pair: 100,
            match_iou: 0.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeResult {
    pub mode: String,
    pub eta_o: f64,
    pub eta_s: f64,
    pub correct: usize,
    pub trials: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub pairs: usize,
    pub trials: usize,
    pub modes: Vec<ModeResult>,
}

impl BenchReport {
    pub fn mode(&self, name: &str) -> Option<&ModeResult> {
        self.modes.iter().find(|m| m.mode == name)
    }

    pub fn table(&self) -> String {
        let base = self.modes.first().map_or(0.0, |m| m.accuracy);
        let mut out = format!("{:<16}{:>10}{:>14}{:>12}\n", "mode", "accuracy", "vs baseline", "relative");
        for m in &self.modes {
            let rel = if base > 0.0 { (m.accuracy - base) / base * 100.0 } else { 0.0 };
            out.push_str(&format!(
                "{:<16}{:>9.2}%{:>+13.2}pp{:>+11.1}%\n",
                m.mode,
                100.0 * m.accuracy,
                100.0 * (m.accuracy - base),
                rel
            ));
        }
        out.push_str(&format!("{} pairs, {} triplets\n", self.pairs, self.trials));
        out
    }
}

/// Crops, rescales and annotates every manifest entry that carries landmarks.
pub fn load_annotated(manifest: &Manifest, labels: &[String], cfg: &PipelineConfig) -> Result<Vec<AnnotatedImage>> {
    let mut out = Vec::new();
    for e in &manifest.entries {
        let Some(landmarks) = &e.landmarks else {
            continue;
        };
        let label = labels.iter().position(|l| *l == e.label).expect("labels come from the manifest");
        let path = manifest.resolve(e);
        let raw = match load_gray(&path) {
            Ok(img) => img,
            Err(err) => {
                log::warn!("skipping {}: {err}", path.display());
                continue;
            }
        };
        let image = preprocess(&raw, e.rect(), cfg.target_width)?;
        let scale = cfg.target_width as f64 / e.bbox[2] as f64;
        let map = |p: &[f64; 2]| [(p[0] - e.bbox[0] as f64) * scale, (p[1] - e.bbox[1] as f64) * scale];
        out.push(AnnotatedImage {
            label,
            image,
            landmarks: landmarks.iter().map(map).collect(),
            distractors: e.distractors.iter().flatten().map(map).collect(),
        });
    }
    Ok(out)
}

/// Square patch of `side` centered as closely as possible on `p`, clamped into the image.
pub fn patch_at(p: [f64; 2], side: usize, width: usize, height: usize) -> PatchLocation {
    let place = |c: f64, extent: usize| {
        let max = extent.saturating_sub(side) as f64;
        (c - side as f64 / 2.0).round().clamp(0.0, max) as usize
    };
    PatchLocation::new(place(p[0], width), place(p[1], height), side)
}

/// Pool of one image: landmark patches first (in landmark order), then distractors.
struct Pool {
    locations: Vec<PatchLocation>,
    features: Vec<FeatureVector<f64>>,
    landmarks: usize,
}

impl Pool {
    fn new(img: &AnnotatedImage, side: usize, hog: &HogConfig) -> Result<Self> {
        let (w, h) = (img.image.width(), img.image.height());
        let locations: Vec<_> = img
            .landmarks
            .iter()
            .chain(&img.distractors)
            .map(|&p| patch_at(p, side, w, h))
            .collect();
        let features = locations
            .iter()
            .map(|&l| extract_hog(&img.image, l, hog))
            .collect::<triplet_core::Result<Vec<_>>>()?;
        Ok(Self {
            locations,
            features,
            landmarks: img.landmarks.len(),
        })
    }
}

/// The four ablation modes in report order.
pub fn modes(cfg: &PipelineConfig) -> Vec<(&'static str, f64, f64)> {
    vec![
        ("appearance", 0.0, 0.0),
        ("order", cfg.eta_o, 0.0),
        ("shape", 0.0, cfg.eta_s),
        ("combined", cfg.eta_o, cfg.eta_s),
    ]
}

/// Runs the benchmark. Appearance-only takes the independent argmax per role;
/// the geometric modes search the top `k_top` pool patches per role.
pub fn run(images: &[AnnotatedImage], cfg: &PipelineConfig, params: &BenchParams) -> Result<BenchReport> {
    cfg.validate()?;
    let stats = background_from_images(images.iter().map(|i| &i.image), cfg)?;
    run_with_background(images, cfg, params, &stats)
}

pub fn run_with_background(
    images: &[AnnotatedImage],
    cfg: &PipelineConfig,
    params: &BenchParams,
    stats: &BackgroundStats<f64>,
) -> Result<BenchReport> {
    let classes: Vec<Vec<usize>> = {
        let n = images.iter().map(|i| i.label + 1).max().unwrap_or(0);
        let mut by = vec![Vec::new(); n];
        for (i, img) in images.iter().enumerate() {
            by[img.label].push(i);
        }
        for (c, members) in by.iter().enumerate() {
            if members.len() < 2 {
                log::warn!("class {c}: fewer than two annotated images, skipped");
            }
        }
        by.into_iter().filter(|m| m.len() >= 2).collect()
    };
    if classes.is_empty() {
        return Err(CliError::Data("no class has two annotated images".into()));
    }
    let whitener = stats.whitener()?;
    let pools = images
        .par_iter()
        .map(|img| Pool::new(img, cfg.patch_side, &cfg.hog))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let pairs: Vec<(usize, usize, u64)> = (0..params.pairs)
        .map(|_| {
            let members = classes.choose(&mut rng).expect("non-empty");
            let a = rng.random_range(0..members.len());
            let mut b = rng.random_range(0..members.len() - 1);
            if b >= a {
                b += 1;
            }
            (members[a], members[b], rng.random())
        })
        .collect();

    let modes = modes(cfg);
    let counts = pairs
        .par_iter()
        .map(|&(a, b, pair_seed)| {
            let q = &pools[a];
            let p = &pools[b];
            if q.landmarks != p.landmarks {
                return Err(CliError::Data(format!(
                    "images {a} and {b} share a class but have {} and {} landmarks",
                    q.landmarks, p.landmarks
                )));
            }
            pair_trials(q, p, &whitener, cfg, params, &modes, pair_seed)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut correct = vec![0usize; modes.len()];
    let mut trials = 0;
    for (c, t) in counts {
        trials += t;
        for (acc, v) in correct.iter_mut().zip(c) {
            *acc += v;
        }
    }
    Ok(BenchReport {
        pairs: pairs.len(),
        trials,
        modes: modes
            .iter()
            .zip(correct)
            .map(|(&(name, eta_o, eta_s), c)| ModeResult {
                mode: name.to_string(),
                eta_o,
                eta_s,
                correct: c,
                trials,
                accuracy: if trials == 0 { 0.0 } else { c as f64 / trials as f64 },
            })
            .collect(),
    })
}

fn pair_trials(
    query: &Pool,
    target: &Pool,
    whitener: &LdaWhitener<f64>,
    cfg: &PipelineConfig,
    params: &BenchParams,
    modes: &[(&str, f64, f64)],
    seed: u64,
) -> Result<(Vec<usize>, usize)> {
    let n = query.landmarks;
    // scores[l][p]: detector of query landmark l on target pool patch p
    let scores: Vec<Vec<f64>> = (0..n)
        .map(|l| {
            let w = whitener.weights(&query.features[l])?;
            Ok(target.features.iter().map(|f| dot(&w, f)).collect())
        })
        .collect::<Result<_>>()?;
    let ranked: Vec<Vec<usize>> = scores
        .iter()
        .map(|row| {
            let mut idx: Vec<usize> = (0..row.len()).collect();
            idx.sort_by(|&x, &y| row[y].partial_cmp(&row[x]).expect("finite scores").then(x.cmp(&y)));
            idx
        })
        .collect();
    let centers: Vec<Point64> = target.locations.iter().map(|l| l.center()).collect();
    let geometries: Vec<GeometryConfig<f64>> = modes
        .iter()
        .map(|&(_, o, s)| GeometryConfig::new(o, s))
        .collect::<triplet_core::Result<_>>()?;
    let eps = GeometryConfig::<f64>::default().degeneracy_eps;

    let is_match = |role: usize, p: usize| {
        p == role || target.locations[p].iou(&target.locations[role]) > params.match_iou
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut correct = vec![0usize; modes.len()];
    let mut trials = 0;
    if n < 3 {
        return Ok((correct, 0));
    }
    for _ in 0..params.triplets_per_pair {
        let Some(roles) = sample_triplet(&mut rng, query, n, eps) else {
            continue;
        };
        let [a, b, c] = roles.map(|r| query.locations[r].center::<f64>());
        let signature = TriangleSignature::from_points(a, b, c, eps)?;
        trials += 1;
        let cands: Vec<Vec<RoleCandidate<f64>>> = roles
            .iter()
            .map(|&r| {
                ranked[r]
                    .iter()
                    .take(cfg.k_top)
                    .map(|&p| RoleCandidate {
                        center: centers[p],
                        score: scores[r][p],
                    })
                    .collect()
            })
            .collect();
        for (m, &(name, _, _)) in modes.iter().enumerate() {
            let picks: [usize; 3] = if name == "appearance" {
                roles.map(|r| ranked[r][0])
            } else {
                let combo = best_combination(
                    &signature,
                    &geometries[m],
                    [&cands[0], &cands[1], &cands[2]],
                    |_| true,
                    DegeneratePolicy::MaxPenalty,
                )
                .expect("every combination is admissible");
                let [i, j, l] = combo.indices;
                [ranked[roles[0]][i], ranked[roles[1]][j], ranked[roles[2]][l]]
            };
            if (0..3).all(|k| is_match(roles[k], picks[k])) {
                correct[m] += 1;
            }
        }
    }
    Ok((correct, trials))
}

fn sample_triplet(rng: &mut ChaCha8Rng, query: &Pool, n: usize, eps: f64) -> Option<[usize; 3]> {
    for _ in 0..100 {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let c = rng.random_range(0..n);
        if a == b || b == c || a == c {
            continue;
        }
        let [pa, pb, pc] = [a, b, c].map(|r| query.locations[r].center::<f64>());
        if order_sign(pa, pb, pc, eps) != OrderSign::Degenerate {
            return Some([a, b, c]);
        }
    }
    None
}

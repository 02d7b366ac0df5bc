//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//! Runs without the libtest harness so the summary is always printed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use triplet_cli::bench::{self, AnnotatedImage, BenchParams};
use triplet_cli::manifest::{Manifest, Split};
use triplet_cli::model::ModelFile;
use triplet_cli::pipeline;
use triplet_cli::synth::{self, SynthSpec};
use triplet_cli::PipelineConfig;
use triplet_core::detector::{
    detect_triplet, fit_background, lda_weights, score_grid, BackgroundStats, DetectionParams, ImageFeatures, Matrix,
    Ridge, TripletDetector,
};
use triplet_core::geometry::{
    order_penalty, order_sign, shape_penalty, triangle_angles, GeometryConfig, OrderSign, Point,
    TriangleSignature,
};
use triplet_core::imaging::{FeatureVector, GrayImage, HogConfig, HogGrid, PatchGrid, PatchLocation};
use triplet_core::mining::{entropy_score, select_triplets, CandidateId, EvalImage, MinedTriplet};
use triplet_core::{norm, Point64};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed < budget, format!("took {elapsed:.2?}, budget {budget:?}"))
}

// 1. geometry

fn geometry_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let eps = 1e-6;
    let mut checked = 0;
    for _ in 0..2000 {
        let p = [0, 1, 2].map(|_| Point64::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0)));
        let s = order_sign(p[0], p[1], p[2], eps);
        if s == OrderSign::Degenerate {
            continue;
        }
        checked += 1;
        ensure(order_sign(p[1], p[0], p[2], eps) == s.flipped(), "swap of two vertices must flip the sign")?;
        ensure(order_sign(p[0], p[2], p[1], eps) == s.flipped(), "swap of two vertices must flip the sign")?;
        let m = p.map(|q| Point::new(-q.x, q.y));
        ensure(order_sign(m[0], m[1], m[2], eps) == s.flipped(), "mirroring must flip the sign")?;

        let eta_o = rng.random_range(0.0..=1.0);
        let eta_s = rng.random_range(0.0..=1.0);
        let cfg = GeometryConfig::new(eta_o, eta_s).unwrap();
        let q = [0, 1, 2].map(|_| Point64::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0)));
        let (Ok(a), Ok(b)) = (triangle_angles(p[0], p[1], p[2]), triangle_angles(q[0], q[1], q[2])) else {
            continue;
        };
        let ps = shape_penalty(&a, &b, &cfg);
        ensure(ps >= 1.0 - eta_s - 1e-12 && ps <= 1.0, format!("shape penalty {ps} outside [1 - {eta_s}, 1]"))?;
        let po = order_penalty(s, order_sign(q[0], q[1], q[2], eps), &cfg);
        ensure(po == 1.0 || po == 1.0 - eta_o, format!("order penalty {po} for eta_o {eta_o}"))?;
    }
    // equilateral against right isoceles, cosines from the law of cosines
    let cosines = |p: [(f64, f64); 3]| {
        let d = |i: usize, j: usize| ((p[i].0 - p[j].0).powi(2) + (p[i].1 - p[j].1).powi(2)).sqrt();
        let (a, b, c) = (d(1, 2), d(0, 2), d(0, 1));
        [
            (b * b + c * c - a * a) / (2.0 * b * c),
            (a * a + c * c - b * b) / (2.0 * a * c),
            (a * a + b * b - c * c) / (2.0 * a * b),
        ]
    };
    let equi_pts = [(0.0, 0.0), (2.0, 0.0), (1.0, 3f64.sqrt())];
    let right_pts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
    let (ce, cr) = (cosines(equi_pts), cosines(right_pts));
    let oracle = 1.0 - ce.iter().zip(&cr).map(|(x, y)| (x - y).abs()).sum::<f64>() / 6.0;
    let pt = |p: (f64, f64)| Point64::new(p.0, p.1);
    let equi = triangle_angles(pt(equi_pts[0]), pt(equi_pts[1]), pt(equi_pts[2])).unwrap();
    let right = triangle_angles(pt(right_pts[0]), pt(right_pts[1]), pt(right_pts[2])).unwrap();
    let got = shape_penalty(&equi, &right, &GeometryConfig::new(0.5, 1.0).unwrap());
    ensure((got - 0.8476).abs() <= 1e-4, format!("shape penalty {got}, expected 0.8476"))?;
    ensure((got - oracle).abs() <= 1e-12, format!("shape penalty {got}, oracle {oracle}"))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{checked} triangles, shape penalty {got:.4}, {:.2?}", start.elapsed()))
}

// 2. greedy search against brute force

fn brute_force(
    det: &TripletDetector<f64>,
    maps: [&[f64]; 3],
    locs: &[PatchLocation],
    overlap_max: f64,
) -> Option<(f64, [PatchLocation; 3])> {
    let mut best: Option<(f64, [PatchLocation; 3])> = None;
    for a in 0..locs.len() {
        for b in 0..locs.len() {
            for c in 0..locs.len() {
                let t = [locs[a], locs[b], locs[c]];
                if t[0].iou(&t[1]) > overlap_max || t[0].iou(&t[2]) > overlap_max || t[1].iou(&t[2]) > overlap_max {
                    continue;
                }
                let [pa, pb, pc] = t.map(|l| l.center::<f64>());
                let sign = order_sign(pa, pb, pc, det.geometry.degeneracy_eps);
                let Ok(angles) = triangle_angles(pa, pb, pc) else { continue };
                if sign == OrderSign::Degenerate {
                    continue;
                }
                let (po, ps) = det.signature.penalties(&TriangleSignature { order: sign, angles }, &det.geometry);
                let total = (maps[0][a] + maps[1][b] + maps[2][c]) * po * ps;
                if best.map_or(true, |(s, _)| total > s) {
                    best = Some((total, t));
                }
            }
        }
    }
    best
}

fn greedy_vs_exhaustive() -> Outcome {
    let start = Instant::now();
    let hog = HogConfig {
        cell_size: 4,
        ..HogConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let families = [(32, 16, PatchGrid::new(8, 8), 0.25), (16, 12, PatchGrid::new(8, 4), 1.0), (24, 16, PatchGrid::new(8, 8), 0.25)];
    let mut instances = 0;
    let mut detections = 0;
    for round in 0..150 {
        let (w, h, grid, overlap_max) = families[round % families.len()];
        let dim = hog.patch_dim(grid.side);
        let image = GrayImage::from_fn(w, h, |_, _| rng.random::<f64>());
        let weights = [0, 1, 2].map(|_| FeatureVector::new((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()));
        let geometry = GeometryConfig::new(rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0)).unwrap();
        let signature = loop {
            let p = [0, 1, 2].map(|_| Point64::new(rng.random_range(0.0..32.0), rng.random_range(0.0..32.0)));
            if let Ok(s) = TriangleSignature::from_points(p[0], p[1], p[2], 1e-6) {
                break s;
            }
        };
        let det = TripletDetector::new(weights, signature, 0, geometry).unwrap();
        let maps = det.weights.clone().map(|wt| score_grid(&image, &wt, grid, &hog).unwrap());
        let n = maps[0].len();
        ensure(n <= 8, format!("{n} windows"))?;
        let locs: Vec<PatchLocation> = maps[0].locations().collect();
        let params = DetectionParams { grid, k: n, overlap_max };
        let greedy = detect_triplet(&image, &det, &params, &hog).unwrap();
        let oracle = brute_force(&det, [&maps[0].values, &maps[1].values, &maps[2].values], &locs, overlap_max);
        match (greedy, oracle) {
            (Some(g), Some((score, at))) => {
                ensure(g.total == score && g.locations == at, format!("instance {round}: greedy {g:?}, oracle {score} at {at:?}"))?;
                detections += 1;
            }
            (None, None) => {}
            (g, o) => return Err(format!("instance {round}: greedy {g:?}, oracle {o:?}")),
        }
        instances += 1;
    }
    ensure(detections >= 100, format!("only {detections} instances had a detection"))?;
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("{instances} instances, {detections} with detections, all exact, {:.2?}", start.elapsed()))
}

// 3. LDA residual

fn lda_residual() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let dim = rng.random_range(1..=64);
        let lambda = rng.random_range(1e-3..0.1);
        let a: Vec<f64> = (0..dim * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        // raw covariance A A^T, regularized copy handed to the solver
        let raw = |i: usize, j: usize| (0..dim).map(|k| a[i * dim + k] * a[j * dim + k]).sum::<f64>();
        let mut sigma = Matrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                sigma.set(i, j, raw(i, j) + if i == j { lambda } else { 0.0 });
            }
        }
        let mean = FeatureVector::new((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
        let template: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let stats = BackgroundStats { mean: mean.clone(), sigma, lambda, count: 2 * dim };
        let w = lda_weights(&template, &stats).map_err(|e| e.to_string())?;
        let centered: Vec<f64> = template.iter().zip(mean.iter()).map(|(t, m)| t - m).collect();
        let r: Vec<f64> = (0..dim)
            .map(|i| (0..dim).map(|j| raw(i, j) * w[j]).sum::<f64>() + lambda * w[i] - centered[i])
            .collect();
        let rel = norm(&r) / norm(&centered);
        ensure(rel <= 1e-6, format!("dim {dim}: relative residual {rel:e}"))?;
        worst = worst.max(rel);
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("100 covariances, worst relative residual {worst:.1e}, {:.2?}", start.elapsed()))
}

// 4. localization ablation

fn small_frame(side: usize) -> PipelineConfig {
    PipelineConfig {
        patch_side: 32,
        target_width: side,
        canonical_side: side,
        descriptor_side: 64,
        ..PipelineConfig::default()
    }
}

fn localization_ablation() -> Outcome {
    let start = Instant::now();
    let spec = SynthSpec {
        train_per_class: 10,
        test_per_class: 10,
        seed: 4,
        ..SynthSpec::default()
    };
    let images: Vec<AnnotatedImage> = synth::generate(&spec)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|s| AnnotatedImage {
            label: s.class,
            image: s.to_gray(),
            landmarks: s.landmarks.clone(),
            distractors: s.distractors.clone(),
        })
        .collect();
    let cfg = small_frame(spec.image_side);
    let params = BenchParams {
        pairs: 1000,
        triplets_per_pair: 100,
        seed: 4,
        ..BenchParams::default()
    };
    let report = bench::run(&images, &cfg, &params).map_err(|e| e.to_string())?;
    let acc = |m: &str| report.mode(m).map(|r| r.accuracy).unwrap_or(f64::NAN);
    let (app, order, shape, comb) = (acc("appearance"), acc("order"), acc("shape"), acc("combined"));
    let summary = format!(
        "appearance {:.1}%, order {:.1}%, shape {:.1}%, combined {:.1}% over {} triplets",
        100.0 * app,
        100.0 * order,
        100.0 * shape,
        100.0 * comb,
        report.trials
    );
    ensure(report.pairs >= 1000 && report.trials >= 100_000, format!("too few trials: {summary}"))?;
    ensure(comb >= shape && shape >= order && order >= app, format!("mode ordering violated: {summary}"))?;
    ensure(comb - app >= 0.05, format!("combined gains under 5 points: {summary}"))?;
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!("{summary}, {:.1?}", start.elapsed()))
}

// 5. end-to-end classification

fn classify_run(manifest: &Manifest, cfg: &PipelineConfig) -> Result<f64, String> {
    let labels = manifest.labels();
    let train = pipeline::load_split(manifest, Split::Train, &labels, cfg).map_err(|e| e.to_string())?;
    let test = pipeline::load_split(manifest, Split::Test, &labels, cfg).map_err(|e| e.to_string())?;
    let (mut model, _) = pipeline::mine(&train, &labels, cfg).map_err(|e| e.to_string())?;
    ensure(model.triplets.len() == 4 * cfg.triplets_per_class, format!("{} triplets mined", model.triplets.len()))?;
    pipeline::train(&mut model, &train).map_err(|e| e.to_string())?;
    let (report, _) = pipeline::evaluate(&model, &test).map_err(|e| e.to_string())?;
    Ok(report.accuracy)
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SynthSpec::default();
    let path = synth::write_corpus(&spec, dir.path()).map_err(|e| e.to_string())?;
    let manifest = Manifest::load(&path).map_err(|e| e.to_string())?;
    let geo = PipelineConfig {
        triplets_per_class: 10,
        ..small_frame(spec.image_side)
    };
    let flat = PipelineConfig {
        eta_o: 0.0,
        eta_s: 0.0,
        ..geo.clone()
    };
    let with_geo = classify_run(&manifest, &geo)?;
    let without_geo = classify_run(&manifest, &flat)?;
    let summary = format!("with geometry {:.1}%, without {:.1}%", 100.0 * with_geo, 100.0 * without_geo);
    ensure(with_geo >= 0.9, format!("accuracy below 90%: {summary}"))?;
    ensure(with_geo >= without_geo, format!("geometry lowered accuracy: {summary}"))?;
    within(start.elapsed(), Duration::from_secs(600))?;
    Ok(format!("{summary}, {:.1?}", start.elapsed()))
}

// 6. entropy sanity

const NOISE_SIDE: usize = 96;

/// Planted pattern: three diagonal strokes at fixed spots on an obtuse triangle.
const PLANT: [(f64, f64); 3] = [(16.0, 16.0), (80.0, 32.0), (40.0, 40.0)];

/// Best shape penalty of a layout against the planted triangle over all
/// vertex orders; degenerate layouts count as unlike.
fn shape_likeness(layout: [(f64, f64); 3]) -> f64 {
    let angles = |p: [(f64, f64); 3]| {
        let [a, b, c] = p.map(|q| Point64::new(q.0, q.1));
        triangle_angles(a, b, c).ok().map(|t| {
            let mut v = t.0;
            v.sort_by(f64::total_cmp);
            v
        })
    };
    match (angles(layout), angles(PLANT)) {
        (Some(x), Some(y)) => 1.0 - x.iter().zip(&y).map(|(p, q)| (p - q).abs()).sum::<f64>() / 6.0,
        _ => 0.0,
    }
}

/// Noise image with three strokes; planted images use the fixed layout, the
/// others put their strokes at random lattice points.
fn fixture_image(rng: &mut ChaCha8Rng, planted: bool) -> GrayImage<f64> {
    let layout: [(f64, f64); 3] = if planted {
        PLANT
    } else {
        let mut picks: Vec<(f64, f64)> = Vec::new();
        for _ in 0..50 {
            if picks.len() == 3 {
                break;
            }
            let p = (8.0 * rng.random_range(2..=10) as f64, 8.0 * rng.random_range(2..=10) as f64);
            if picks.iter().all(|q| (q.0 - p.0).abs().max((q.1 - p.1).abs()) >= 24.0) {
                picks.push(p);
            }
        }
        if picks.len() < 3 {
            return fixture_image(rng, planted);
        }
        let layout = [picks[0], picks[1], picks[2]];
        if shape_likeness(layout) > 0.75 {
            return fixture_image(rng, planted);
        }
        layout
    };
    let shift = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
    let spots = layout.map(|(x, y)| (x + shift[0], y + shift[1]));
    let mut img = GrayImage::from_fn(NOISE_SIDE, NOISE_SIDE, |_, _| rng.random_range(0.47..0.53));
    for y in 0..NOISE_SIDE {
        for x in 0..NOISE_SIDE {
            let on = spots.iter().any(|&(cx, cy)| {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                (dx - dy).abs() < 2.0 && dx.abs() < 5.0
            });
            if on {
                img.set(x, y, 0.95);
            }
        }
    }
    img
}

fn entropy_sanity() -> Outcome {
    let start = Instant::now();
    let classes = 4;
    let per_class = 150;
    let hog = HogConfig::default();
    let side = 16;
    let params = DetectionParams {
        grid: PatchGrid::new(side, 8),
        k: 5,
        overlap_max: 0.25,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut labels = Vec::new();
    let mut features = Vec::new();
    for i in 0..classes * per_class {
        let label = i % classes;
        features.push(ImageFeatures::new(&fixture_image(&mut rng, label == 0), &hog).map_err(|e| e.to_string())?);
        labels.push(label);
    }
    let grid = params.grid;
    let (cols, rows) = grid.dims(NOISE_SIDE, NOISE_SIDE).unwrap();
    let background: Vec<FeatureVector<f64>> = features
        .iter()
        .take(40)
        .flat_map(|f| {
            (0..rows).flat_map(move |r| (0..cols).map(move |c| f.upright.window_feature(grid.location(c, r)).unwrap()))
        })
        .collect();
    let stats = fit_background(background.iter().map(|v| v.as_slice()), Ridge::TraceFraction(0.01)).map_err(|e| e.to_string())?;
    let whitener = stats.whitener().map_err(|e| e.to_string())?;
    let geometry = GeometryConfig::default();
    let loc_at = |(x, y): (f64, f64)| PatchLocation::new((x - side as f64 / 2.0) as usize, (y - side as f64 / 2.0) as usize, side);

    let mut clean = ChaCha8Rng::seed_from_u64(60);
    let reference = HogGrid::new(&fixture_image(&mut clean, true), &hog).map_err(|e| e.to_string())?;
    let plant_locs = PLANT.map(loc_at);
    let plant_w = plant_locs.map(|l| whitener.weights(&extract_hog_grid(&reference, l)).unwrap());
    let planted = TripletDetector::from_locations(plant_w, plant_locs, 0, geometry).map_err(|e| e.to_string())?;

    let mut detectors = vec![planted];
    while detectors.len() < 7 {
        let noise = GrayImage::from_fn(NOISE_SIDE, NOISE_SIDE, |_, _| rng.random_range(0.47..0.53));
        let src = HogGrid::new(&noise, &hog).map_err(|e| e.to_string())?;
        let locs = [0, 1, 2].map(|_| grid.location(rng.random_range(0..cols), rng.random_range(0..rows)));
        let w = locs.map(|l| whitener.weights(&extract_hog_grid(&src, l)).unwrap());
        // no geometry, so the stroke layout that marks class 0 cannot favor it
        if let Ok(d) = TripletDetector::from_locations(w, locs, 0, GeometryConfig::appearance_only()) {
            detectors.push(d);
        }
    }
    let eval: Vec<EvalImage<'_, f64>> = features
        .iter()
        .zip(&labels)
        .map(|(f, &label)| EvalImage { label, features: f })
        .collect();
    let top_m = per_class;
    let max_h = (classes as f64).ln();
    let mut mined = Vec::new();
    let mut noise_h = Vec::new();
    for (i, det) in detectors.iter().enumerate() {
        let s = entropy_score(det, &eval, top_m, &params).map_err(|e| e.to_string())?;
        if i > 0 {
            noise_h.push(s.entropy);
        }
        mined.push(MinedTriplet {
            id: CandidateId {
                neighborhood: 0,
                combination: i,
            },
            detector: det.clone(),
            locations: plant_locs,
            entropy: s.entropy,
            mean_top_score: s.mean_top_score,
        });
    }
    let planted_h = mined[0].entropy;
    let selected = select_triplets(mined, 3);
    let summary = format!(
        "planted {planted_h:.3}, noise {} (ln 4 = {max_h:.3})",
        noise_h.iter().map(|h| format!("{h:.3}")).collect::<Vec<_>>().join(" ")
    );
    ensure(planted_h <= 0.1, format!("planted entropy too high: {summary}"))?;
    ensure(selected.iter().any(|t| t.id.combination == 0), format!("planted triplet not selected: {summary}"))?;
    for h in &noise_h {
        ensure((h - max_h).abs() <= 0.05 * max_h, format!("noise entropy off: {summary}"))?;
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("{summary}, {:.2?}", start.elapsed()))
}

fn extract_hog_grid(grid: &HogGrid<f64>, loc: PatchLocation) -> FeatureVector<f64> {
    grid.window_feature(loc).unwrap()
}

// 7. determinism through the command line

fn run_cli(args: &[&str], workers: &str) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_triplets"))
        .args(args)
        .env("TRIPLETS_WORKERS", workers)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        out.status.success(),
        format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)),
    )
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = |p: &str| dir.path().join(p).to_string_lossy().into_owned();
    run_cli(
        &["synth-gen", "--out", &d("corpus"), "--classes", "3", "--train-per-class", "6", "--test-per-class", "2", "--image-side", "96", "--seed", "7"],
        "1",
    )?;
    let manifest = d("corpus/manifest.jsonl");
    let flags = [
        "--patch-side", "32", "--target-width", "96", "--canonical-side", "96", "--descriptor-side", "64",
        "--triplets-per-class", "5", "--neighborhood-size", "8", "--rng-seed", "11",
    ];
    let mut files = Vec::new();
    for (run, workers) in [("a", "1"), ("b", "2")] {
        let model = d(&format!("model_{run}.bin"));
        let mut mine = vec!["mine", "--manifest", &manifest, "--out", &model];
        mine.extend_from_slice(&flags);
        run_cli(&mine, workers)?;
        run_cli(&["train", "--manifest", &manifest, "--model", &model], workers)?;
        files.push(std::fs::read(&model).map_err(|e| e.to_string())?);
    }
    ensure(files[0] == files[1], "model files differ between runs")?;
    let model = ModelFile::from_bytes(&files[0]).map_err(|e| e.to_string())?;
    ensure(model.classifier.is_some(), "trained model lacks a classifier")?;
    Ok(format!("{} byte models identical across 1 and 2 workers, {:.1?}", files[0].len(), start.elapsed()))
}

// 8. descriptor dimension

fn dimensions() -> Outcome {
    let start = Instant::now();
    let spec = SynthSpec {
        classes: 14,
        train_per_class: 25,
        test_per_class: 1,
        image_side: 64,
        seed: 8,
        ..SynthSpec::default()
    };
    let images = synth::generate(&spec).map_err(|e| e.to_string())?;
    let labels: Vec<String> = (0..spec.classes).map(synth::class_name).collect();
    let train: Vec<pipeline::LabeledImage> = images
        .iter()
        .filter(|i| i.split == Split::Train)
        .map(|i| pipeline::LabeledImage {
            label: Some(i.class),
            image: i.to_gray(),
            source: i.file_name(),
        })
        .collect();
    let cfg = PipelineConfig {
        triplets_per_class: 300,
        top_locations: 8,
        negative_class_subsample: Some(3),
        eval_negative_classes: Some(1),
        patch_side: 16,
        ..small_frame(spec.image_side)
    };
    let (model, _) = pipeline::mine(&train, &labels, &cfg).map_err(|e| e.to_string())?;
    let probe = images.iter().find(|i| i.split == Split::Test).unwrap().to_gray();
    let bot = pipeline::descriptors(&model, &[&probe]).map_err(|e| e.to_string())?;
    let dim = bot[0].dim();
    for c in 0..spec.classes {
        let n = model.triplets.iter().filter(|t| t.detector.class_label == c).count();
        ensure(n == 300, format!("class {c} has {n} triplets"))?;
    }
    let grouped = model.triplets.windows(2).all(|w| w[0].detector.class_label <= w[1].detector.class_label);
    ensure(grouped, "descriptor entries are not grouped by class")?;
    ensure(dim == 4200, format!("descriptor dimension {dim}"))?;
    Ok(format!("14 classes x 300 triplets -> dimension {dim}, {:.1?}", start.elapsed()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("geometry suite", geometry_suite),
        ("greedy equals exhaustive", greedy_vs_exhaustive),
        ("LDA residual", lda_residual),
        ("localization ablation", localization_ablation),
        ("end-to-end classification", end_to_end),
        ("entropy sanity", entropy_sanity),
        ("determinism", determinism),
        ("descriptor dimension", dimensions),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

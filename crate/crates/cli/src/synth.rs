//! Synthetic fine-grained corpus: every class shares a base layout of
//! landmark glyphs (mirror-symmetric pairs plus glyphs on the vertical axis)
//! and adds three class-specific marks. Each image gets its own pose, per-glyph
//! jitter, pixel noise and distractor glyphs that copy landmark appearance at
//! unrelated positions.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use triplet_core::imaging::GrayImage;

use crate::error::{CliError, Result};
use crate::manifest::{Manifest, ManifestEntry, Split};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub image_side: usize,
    /// Mirror-symmetric landmark pairs in the base layout.
    pub twin_pairs: usize,
    /// Base landmarks on the vertical symmetry axis.
    pub axis_landmarks: usize,
    /// Glyph radius as a fraction of the image side.
    pub glyph_radius: f64,
    /// Minimum landmark spacing as a fraction of the image side.
    pub min_spacing: f64,
    /// Global translation jitter, fraction of the side (uniform, per axis).
    pub position_jitter: f64,
    /// Global rotation jitter in radians (uniform).
    pub rotation_jitter: f64,
    /// Relative global scale jitter (uniform).
    pub scale_jitter: f64,
    /// Independent per-landmark displacement, fraction of the side (uniform, per axis).
    pub landmark_jitter: f64,
    /// Per-glyph rotation jitter in radians on top of the global rotation.
    pub glyph_rotation_jitter: f64,
    /// Standard deviation of additive pixel noise (intensities in `[0, 1]`).
    pub noise: f64,
    /// Uniform jitter of the glyph ink intensity.
    pub intensity_jitter: f64,
    pub distractors: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: 4,
            train_per_class: 20,
            test_per_class: 20,
            image_side: 128,
            twin_pairs: 3,
            axis_landmarks: 2,
            glyph_radius: 0.05,
            min_spacing: 0.15,
            position_jitter: 0.02,
            rotation_jitter: 0.08,
            scale_jitter: 0.04,
            landmark_jitter: 0.012,
            glyph_rotation_jitter: 0.1,
            noise: 0.03,
            intensity_jitter: 0.05,
            distractors: 3,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        if self.classes == 0 || self.train_per_class + self.test_per_class == 0 {
            return bad("synthetic corpus needs at least one class and one image per class");
        }
        if self.image_side < 32 {
            return bad("image_side must be at least 32");
        }
        if self.twin_pairs * 2 + self.axis_landmarks + 3 < 3 {
            return bad("too few landmarks");
        }
        let fractions = [
            self.glyph_radius,
            self.min_spacing,
            self.position_jitter,
            self.scale_jitter,
            self.landmark_jitter,
        ];
        if fractions.iter().any(|f| !(0.0..0.5).contains(f)) || !(self.glyph_radius > 0.0) {
            return bad("relative sizes and jitters must lie in [0, 0.5), glyph_radius above 0");
        }
        for v in [self.rotation_jitter, self.glyph_rotation_jitter, self.noise, self.intensity_jitter] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad("rotation, noise and intensity jitters must be non-negative");
            }
        }
        Ok(())
    }

    pub fn base_landmarks(&self) -> usize {
        2 * self.twin_pairs + self.axis_landmarks
    }

    /// Landmarks per image: the base layout followed by the three class marks.
    pub fn landmarks_per_image(&self) -> usize {
        self.base_landmarks() + 3
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Glyph {
    Ring,
    Disc,
    Plus,
    Cross,
    Square,
    HBar,
    VBar,
    Triangle,
    Diamond,
    Tee,
    DoubleBar,
    Ell,
}

impl Glyph {
    pub const ALL: [Glyph; 12] = [
        Glyph::Ring,
        Glyph::Disc,
        Glyph::Plus,
        Glyph::Cross,
        Glyph::Square,
        Glyph::HBar,
        Glyph::VBar,
        Glyph::Triangle,
        Glyph::Diamond,
        Glyph::Tee,
        Glyph::DoubleBar,
        Glyph::Ell,
    ];

    /// Glyphs unchanged by a horizontal flip.
    pub const SYMMETRIC: [Glyph; 11] = [
        Glyph::Ring,
        Glyph::Disc,
        Glyph::Plus,
        Glyph::Cross,
        Glyph::Square,
        Glyph::HBar,
        Glyph::VBar,
        Glyph::Triangle,
        Glyph::Diamond,
        Glyph::Tee,
        Glyph::DoubleBar,
    ];

    /// Signed distance (pixels) from a glyph of radius `r` centered at the origin.
    fn sdf(self, x: f64, y: f64, r: f64) -> f64 {
        let t = (0.28 * r).max(1.2);
        match self {
            Glyph::Ring => ((x * x + y * y).sqrt() - 0.75 * r).abs() - t / 2.0,
            Glyph::Disc => (x * x + y * y).sqrt() - 0.6 * r,
            Glyph::Plus => sd_box(x, y, r, t / 2.0).min(sd_box(x, y, t / 2.0, r)),
            Glyph::Cross => {
                let (u, v) = ((x + y) * FRAC_1_SQRT_2, (y - x) * FRAC_1_SQRT_2);
                sd_box(u, v, r, t / 2.0).min(sd_box(u, v, t / 2.0, r))
            }
            Glyph::Square => sd_box(x, y, 0.7 * r, 0.7 * r).abs() - t / 2.0,
            Glyph::HBar => sd_box(x, y, r, 0.7 * t),
            Glyph::VBar => sd_box(x, y, 0.7 * t, r),
            Glyph::Triangle => sd_triangle(x, y + 0.15 * r, 0.85 * r),
            Glyph::Diamond => (x.abs() + y.abs() - 0.85 * r) * FRAC_1_SQRT_2,
            Glyph::Tee => sd_box(x, y + 0.75 * r, r, t / 2.0).min(sd_box(x, y, t / 2.0, r)),
            Glyph::DoubleBar => sd_box(x, y - 0.45 * r, r, t / 2.0).min(sd_box(x, y + 0.45 * r, r, t / 2.0)),
            Glyph::Ell => sd_box(x + 0.7 * r, y, t / 2.0, r).min(sd_box(x, y - 0.7 * r, r, t / 2.0)),
        }
    }
}

fn sd_box(x: f64, y: f64, hx: f64, hy: f64) -> f64 {
    let (dx, dy) = (x.abs() - hx, y.abs() - hy);
    let outside = (dx.max(0.0).powi(2) + dy.max(0.0).powi(2)).sqrt();
    outside + dx.max(dy).min(0.0)
}

/// Upward-pointing equilateral triangle with circumradius-like size `r`.
fn sd_triangle(x: f64, y: f64, r: f64) -> f64 {
    let k = 3f64.sqrt();
    let mut px = x.abs() - r;
    let mut py = -y + r / k;
    if px + k * py > 0.0 {
        let (qx, qy) = ((px - k * py) / 2.0, (-k * px - py) / 2.0);
        px = qx;
        py = qy;
    }
    px -= px.clamp(-2.0 * r, 0.0);
    -(px * px + py * py).sqrt() * py.signum()
}

/// Class-independent part of the corpus plus the per-class marks, in unit coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub base: Vec<([f64; 2], Glyph)>,
    pub marks: Vec<[([f64; 2], Glyph); 3]>,
}

impl Layout {
    pub fn generate(spec: &SynthSpec) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let (lo, hi) = (0.17, 0.83);
        for _attempt in 0..1000 {
            let mut base: Vec<([f64; 2], Glyph)> = Vec::new();
            let mut ok = true;
            for _ in 0..spec.twin_pairs {
                let glyph = Glyph::SYMMETRIC[rng.random_range(0..Glyph::SYMMETRIC.len())];
                let placed = place(&mut rng, 200, |rng| {
                    let dx = rng.random_range(0.5 * spec.min_spacing.max(0.02)..hi - 0.5);
                    let y = rng.random_range(lo..hi);
                    let pair = [[0.5 - dx, y], [0.5 + dx, y]];
                    let clear = pair
                        .iter()
                        .all(|p| base.iter().all(|(q, _)| dist(*p, *q) >= spec.min_spacing));
                    (clear && 2.0 * dx >= spec.min_spacing).then_some(pair)
                });
                match placed {
                    Some([l, r]) => {
                        base.push((l, glyph));
                        base.push((r, glyph));
                    }
                    None => ok = false,
                }
            }
            for _ in 0..spec.axis_landmarks {
                let glyph = Glyph::SYMMETRIC[rng.random_range(0..Glyph::SYMMETRIC.len())];
                let placed = place(&mut rng, 200, |rng| {
                    let p = [0.5, rng.random_range(lo..hi)];
                    base.iter().all(|(q, _)| dist(p, *q) >= spec.min_spacing).then_some(p)
                });
                match placed {
                    Some(p) => base.push((p, glyph)),
                    None => ok = false,
                }
            }
            if !ok {
                continue;
            }
            let mut marks = Vec::with_capacity(spec.classes);
            for _ in 0..spec.classes {
                let mut class_marks: Vec<([f64; 2], Glyph)> = Vec::new();
                for _ in 0..3 {
                    let glyph = Glyph::ALL[rng.random_range(0..Glyph::ALL.len())];
                    let placed = place(&mut rng, 500, |rng| {
                        let p = [rng.random_range(lo..hi), rng.random_range(lo..hi)];
                        base.iter()
                            .chain(&class_marks)
                            .all(|(q, _)| dist(p, *q) >= spec.min_spacing)
                            .then_some(p)
                    });
                    match placed {
                        Some(p) => class_marks.push((p, glyph)),
                        None => ok = false,
                    }
                }
                if !ok {
                    break;
                }
                let [a, b, c] = [class_marks[0].0, class_marks[1].0, class_marks[2].0];
                let area = ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs();
                if area < spec.min_spacing * spec.min_spacing {
                    ok = false;
                    break;
                }
                marks.push([class_marks[0], class_marks[1], class_marks[2]]);
            }
            if ok {
                return Ok(Self { base, marks });
            }
        }
        Err(CliError::Config(
            "cannot fit the requested landmarks at this spacing; lower min_spacing or the landmark count".into(),
        ))
    }

    /// All landmarks of a class in correspondence order.
    pub fn class_landmarks(&self, class: usize) -> Vec<([f64; 2], Glyph)> {
        let mut out = self.base.clone();
        out.extend_from_slice(&self.marks[class]);
        out
    }

    fn glyph_pool(&self) -> Vec<Glyph> {
        let mut pool: Vec<Glyph> = Vec::new();
        for g in self.base.iter().map(|b| b.1).chain(self.marks.iter().flatten().map(|m| m.1)) {
            if !pool.contains(&g) {
                pool.push(g);
            }
        }
        pool
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn place<T>(rng: &mut ChaCha8Rng, tries: usize, mut f: impl FnMut(&mut ChaCha8Rng) -> Option<T>) -> Option<T> {
    (0..tries).find_map(|_| f(rng))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthImage {
    pub class: usize,
    pub split: Split,
    /// Index within its class and split.
    pub index: usize,
    pub pixels: Vec<u8>,
    pub side: usize,
    pub landmarks: Vec<[f64; 2]>,
    pub distractors: Vec<[f64; 2]>,
}

impl SynthImage {
    pub fn to_gray(&self) -> GrayImage<f64> {
        GrayImage::from_luma8(self.side, self.side, &self.pixels).expect("buffer matches side")
    }

    pub fn label(&self) -> String {
        class_name(self.class)
    }

    pub fn file_name(&self) -> String {
        let split = match self.split {
            Split::Train => "train",
            Split::Test => "test",
        };
        format!("{split}_{:02}_{:03}.png", self.class, self.index)
    }
}

pub fn class_name(class: usize) -> String {
    format!("class_{class:02}")
}

const BACKGROUND: f64 = 0.55;
const INK: f64 = 0.12;

/// Renders every image of the corpus in a fixed order: class, then train before test, then index.
pub fn generate(spec: &SynthSpec) -> Result<Vec<SynthImage>> {
    spec.validate()?;
    let layout = Layout::generate(spec)?;
    let mut out = Vec::with_capacity(spec.classes * (spec.train_per_class + spec.test_per_class));
    let mut stream = 0u64;
    for class in 0..spec.classes {
        for (split, count) in [(Split::Train, spec.train_per_class), (Split::Test, spec.test_per_class)] {
            for index in 0..count {
                stream += 1;
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                rng.set_stream(stream);
                out.push(render(spec, &layout, class, split, index, &mut rng));
            }
        }
    }
    Ok(out)
}

fn render(
    spec: &SynthSpec,
    layout: &Layout,
    class: usize,
    split: Split,
    index: usize,
    rng: &mut ChaCha8Rng,
) -> SynthImage {
    let side = spec.image_side as f64;
    let sym = |rng: &mut ChaCha8Rng, a: f64| if a > 0.0 { rng.random_range(-a..=a) } else { 0.0 };
    let theta = sym(rng, spec.rotation_jitter);
    let scale = 1.0 + sym(rng, spec.scale_jitter);
    let shift = [sym(rng, spec.position_jitter), sym(rng, spec.position_jitter)];
    let (sin, cos) = theta.sin_cos();
    let pose = |p: [f64; 2]| {
        let (dx, dy) = (p[0] - 0.5, p[1] - 0.5);
        [
            0.5 + scale * (cos * dx - sin * dy) + shift[0],
            0.5 + scale * (sin * dx + cos * dy) + shift[1],
        ]
    };

    let radius = spec.glyph_radius * side * scale;
    let mut glyphs: Vec<([f64; 2], Glyph, f64, f64)> = Vec::new();
    let mut landmarks = Vec::new();
    for (p, g) in layout.class_landmarks(class) {
        let q = pose(p);
        let q = [
            (q[0] + sym(rng, spec.landmark_jitter)) * side,
            (q[1] + sym(rng, spec.landmark_jitter)) * side,
        ];
        let rot = theta + sym(rng, spec.glyph_rotation_jitter);
        let ink = INK + sym(rng, spec.intensity_jitter);
        glyphs.push((q, g, rot, ink));
        landmarks.push(q);
    }

    let pool = layout.glyph_pool();
    let mut distractors = Vec::new();
    let (lo, hi) = (0.12 * side, 0.88 * side);
    let keep_out = 0.75 * spec.min_spacing.max(2.0 * spec.glyph_radius) * side;
    for _ in 0..spec.distractors {
        let spot = place(rng, 200, |rng| {
            let p = [rng.random_range(lo..hi), rng.random_range(lo..hi)];
            landmarks
                .iter()
                .chain(&distractors)
                .all(|q| dist(p, *q) >= keep_out)
                .then_some(p)
        });
        let g = pool[rng.random_range(0..pool.len())];
        let rot = theta + sym(rng, spec.glyph_rotation_jitter);
        let ink = INK + sym(rng, spec.intensity_jitter);
        if let Some(p) = spot {
            glyphs.push((p, g, rot, ink));
            distractors.push(p);
        }
    }

    let n = spec.image_side;
    let mut values = vec![BACKGROUND; n * n];
    let reach = radius * 1.5 + 2.0;
    for &(c, g, rot, ink) in &glyphs {
        let (s, co) = rot.sin_cos();
        let x0 = (c[0] - reach).floor().max(0.0) as usize;
        let x1 = ((c[0] + reach).ceil() as usize).min(n - 1);
        let y0 = (c[1] - reach).floor().max(0.0) as usize;
        let y1 = ((c[1] + reach).ceil() as usize).min(n - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                // pixel centers sit at integer + 0.5
                let (dx, dy) = (x as f64 + 0.5 - c[0], y as f64 + 0.5 - c[1]);
                let (u, v) = (co * dx + s * dy, -s * dx + co * dy);
                let cover = (0.5 - g.sdf(u, v, radius)).clamp(0.0, 1.0);
                let px = &mut values[y * n + x];
                *px = *px * (1.0 - cover) + ink * cover;
            }
        }
    }
    let noise = (spec.noise > 0.0).then(|| Normal::new(0.0, spec.noise).expect("finite sigma"));
    let pixels = values
        .into_iter()
        .map(|v| {
            let v = v + noise.as_ref().map_or(0.0, |d| d.sample(rng));
            (v.clamp(0.0, 1.0) * 255.0).round() as u8
        })
        .collect();
    SynthImage {
        class,
        split,
        index,
        pixels,
        side: n,
        landmarks,
        distractors,
    }
}

/// Manifest describing `images` stored under `images/`.
pub fn manifest_for(images: &[SynthImage], root: &Path) -> Manifest {
    let entries = images
        .iter()
        .map(|im| ManifestEntry {
            path: format!("images/{}", im.file_name()),
            label: im.label(),
            bbox: [0, 0, im.side, im.side],
            split: Some(im.split),
            landmarks: Some(im.landmarks.clone()),
            distractors: Some(im.distractors.clone()),
        })
        .collect();
    Manifest {
        root: root.to_path_buf(),
        entries,
    }
}

/// Writes PNGs under `dir/images/` and `dir/manifest.jsonl`; returns the manifest path.
pub fn write_corpus(spec: &SynthSpec, dir: &Path) -> Result<std::path::PathBuf> {
    let images = generate(spec)?;
    let img_dir = dir.join("images");
    fs::create_dir_all(&img_dir).map_err(|e| CliError::io(&img_dir, e))?;
    for im in &images {
        let path = img_dir.join(im.file_name());
        image::GrayImage::from_raw(im.side as u32, im.side as u32, im.pixels.clone())
            .expect("buffer matches side")
            .save(&path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    let manifest_path = dir.join("manifest.jsonl");
    manifest_for(&images, dir).save(&manifest_path)?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn still() -> SynthSpec {
        SynthSpec {
            position_jitter: 0.0,
            rotation_jitter: 0.0,
            scale_jitter: 0.0,
            landmark_jitter: 0.0,
            glyph_rotation_jitter: 0.0,
            noise: 0.0,
            intensity_jitter: 0.0,
            distractors: 0,
            train_per_class: 3,
            test_per_class: 2,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn seeded_corpus_is_reproducible() {
        let spec = SynthSpec {
            train_per_class: 2,
            test_per_class: 1,
            ..SynthSpec::default()
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = generate(&SynthSpec { seed: 1, ..spec.clone() }).unwrap();
        assert_ne!(generate(&spec).unwrap(), other);
    }

    #[test]
    fn still_corpus_repeats_within_class() {
        let images = generate(&still()).unwrap();
        for class in 0..4 {
            let same: Vec<_> = images.iter().filter(|i| i.class == class).collect();
            assert_eq!(same.len(), 5);
            for im in &same[1..] {
                assert_eq!(im.pixels, same[0].pixels);
                assert_eq!(im.landmarks, same[0].landmarks);
            }
        }
        let first = |c| images.iter().find(|i| i.class == c).unwrap();
        assert_ne!(first(0).pixels, first(1).pixels);
    }

    #[test]
    fn layout_respects_spacing_and_symmetry() {
        let spec = SynthSpec::default();
        let layout = Layout::generate(&spec).unwrap();
        assert_eq!(layout.base.len(), spec.base_landmarks());
        for pair in layout.base[..2 * spec.twin_pairs].chunks(2) {
            assert_eq!(pair[0].1, pair[1].1);
            assert!((pair[0].0[0] + pair[1].0[0] - 1.0).abs() < 1e-12);
            assert_eq!(pair[0].0[1], pair[1].0[1]);
        }
        for class in 0..spec.classes {
            let pts = layout.class_landmarks(class);
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    assert!(dist(pts[i].0, pts[j].0) >= spec.min_spacing - 1e-12);
                }
            }
        }
    }

    #[test]
    fn glyphs_are_drawn_at_landmarks() {
        let images = generate(&still()).unwrap();
        let im = &images[0];
        for p in &im.landmarks {
            let (x0, y0) = (p[0] as usize - 6, p[1] as usize - 6);
            let dark = (y0..y0 + 13)
                .flat_map(|y| (x0..x0 + 13).map(move |x| (x, y)))
                .filter(|&(x, y)| im.pixels[y * im.side + x] < 100)
                .count();
            assert!(dark > 5, "no ink near {p:?}");
        }
    }

    #[test]
    fn symmetric_glyphs_are_mirror_invariant() {
        for g in Glyph::SYMMETRIC {
            for (x, y) in [(1.3, -2.0), (3.7, 0.4), (-0.2, 5.1)] {
                assert!((g.sdf(x, y, 6.0) - g.sdf(-x, y, 6.0)).abs() < 1e-12, "{g:?}");
            }
        }
        assert!((Glyph::Ell.sdf(3.0, -4.0, 6.0) - Glyph::Ell.sdf(-3.0, -4.0, 6.0)).abs() > 0.5);
    }

    #[test]
    fn distractors_keep_clear_of_landmarks() {
        let spec = SynthSpec {
            distractors: 4,
            ..SynthSpec::default()
        };
        let images = generate(&SynthSpec { train_per_class: 2, test_per_class: 0, ..spec.clone() }).unwrap();
        for im in &images {
            for d in &im.distractors {
                for l in &im.landmarks {
                    assert!(dist(*d, *l) >= 0.75 * spec.min_spacing * spec.image_side as f64 - 1e-9);
                }
            }
        }
    }
}

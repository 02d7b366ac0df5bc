//! Dalal-Triggs style histograms of oriented gradients.
//!
//! Gradients are central differences over the whole image with clamped
//! borders, so a patch descriptor depends on the one-pixel ring around the
//! patch as well. Cells are accumulated in row-major pixel order and blocks
//! are normalized in the same way whether they come from a single patch
//! ([`extract_hog`]) or from a dense image-wide grid ([`HogGrid`]); a
//! cell-aligned patch therefore yields bit-identical features on both paths.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::image::{resize_bilinear, GrayImage};
use super::{FeatureVector, PatchLocation};
use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

/// Side of the square frame whole-image descriptors are computed on.
pub const DESCRIPTOR_SIDE: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HogConfig {
    /// Cell edge in pixels.
    pub cell_size: usize,
    /// Unsigned orientation bins over `[0, pi)`.
    pub bins: usize,
    /// Block edge in cells.
    pub block_cells: usize,
    /// Block stride in cells.
    pub block_stride: usize,
    pub epsilon: f64,
    pub clip: f64,
}

impl Default for HogConfig {
    fn default() -> Self {
        Self {
            cell_size: 8,
            bins: 9,
            block_cells: 2,
            block_stride: 1,
            epsilon: 1e-6,
            clip: 0.2,
        }
    }
}

impl HogConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cell_size == 0 || self.bins == 0 || self.block_cells == 0 || self.block_stride == 0
        {
            return Err(Error::InvalidConfig(format!("zero-sized HOG parameter in {self:?}")));
        }
        if !(self.epsilon > 0.0) || !(self.clip > 0.0) {
            return Err(Error::InvalidConfig("HOG epsilon and clip must be positive".into()));
        }
        Ok(())
    }

    pub fn block_len(&self) -> usize {
        self.block_cells * self.block_cells * self.bins
    }

    fn blocks_along(&self, cells: usize) -> usize {
        if cells < self.block_cells {
            0
        } else {
            (cells - self.block_cells) / self.block_stride + 1
        }
    }

    /// Descriptor length for a `width` x `height` region.
    pub fn descriptor_len(&self, width: usize, height: usize) -> usize {
        let bx = self.blocks_along(width / self.cell_size);
        let by = self.blocks_along(height / self.cell_size);
        bx * by * self.block_len()
    }

    /// Descriptor length for a square patch.
    pub fn patch_dim(&self, side: usize) -> usize {
        self.descriptor_len(side, side)
    }

    fn check_patch_side(&self, side: usize) -> Result<()> {
        self.validate()?;
        if side % self.cell_size != 0 || self.blocks_along(side / self.cell_size) == 0 {
            return Err(Error::InvalidConfig(format!(
                "patch side {side} must be a multiple of the {} px cell and hold one block",
                self.cell_size
            )));
        }
        Ok(())
    }
}

/// Per-cell orientation histograms for a grid of cells whose top-left cell starts at `(x0, y0)`.
fn cell_histograms<T: Scalar>(
    image: &GrayImage<T>,
    x0: usize,
    y0: usize,
    cells_x: usize,
    cells_y: usize,
    cfg: &HogConfig,
) -> Vec<T> {
    let (w, h) = (image.width(), image.height());
    let cs = cfg.cell_size;
    let bins = cfg.bins;
    let bin_width = PI / bins as f64;
    let mut hist = vec![T::zero(); cells_x * cells_y * bins];
    for cy in 0..cells_y {
        for cx in 0..cells_x {
            let cell = &mut hist[(cy * cells_x + cx) * bins..(cy * cells_x + cx + 1) * bins];
            for py in 0..cs {
                let y = y0 + cy * cs + py;
                let up = image.row(y.saturating_sub(1));
                let down = image.row((y + 1).min(h - 1));
                let row = image.row(y);
                for px in 0..cs {
                    let x = x0 + cx * cs + px;
                    let gx = row[(x + 1).min(w - 1)] - row[x.saturating_sub(1)];
                    let gy = down[x] - up[x];
                    let mag = (gx * gx + gy * gy).sqrt();
                    if mag == T::zero() {
                        continue;
                    }
                    let mut angle = gy.to_f64_lossy().atan2(gx.to_f64_lossy());
                    if angle < 0.0 {
                        angle += PI;
                    }
                    if angle >= PI {
                        angle -= PI;
                    }
                    let pos = angle / bin_width;
                    let lower = pos.floor();
                    let frac = T::lit(pos - lower);
                    let lower = (lower as usize) % bins;
                    let upper = (lower + 1) % bins;
                    cell[lower] = cell[lower] + mag * (T::one() - frac);
                    cell[upper] = cell[upper] + mag * frac;
                }
            }
        }
    }
    hist
}

/// Groups cells into blocks and applies clipped L2 normalization.
fn normalized_blocks<T: Scalar>(
    hist: &[T],
    cells_x: usize,
    cells_y: usize,
    cfg: &HogConfig,
) -> (usize, usize, Vec<T>) {
    let bx_n = cfg.blocks_along(cells_x);
    let by_n = cfg.blocks_along(cells_y);
    let bins = cfg.bins;
    let block_len = cfg.block_len();
    let eps2 = T::lit(cfg.epsilon * cfg.epsilon);
    let clip = T::lit(cfg.clip);
    let mut out = Vec::with_capacity(bx_n * by_n * block_len);
    let mut block = vec![T::zero(); block_len];
    for by in 0..by_n {
        for bx in 0..bx_n {
            let mut k = 0;
            for dy in 0..cfg.block_cells {
                for dx in 0..cfg.block_cells {
                    let cx = bx * cfg.block_stride + dx;
                    let cy = by * cfg.block_stride + dy;
                    let start = (cy * cells_x + cx) * bins;
                    block[k..k + bins].copy_from_slice(&hist[start..start + bins]);
                    k += bins;
                }
            }
            let scale = T::one() / (dot(&block, &block) + eps2).sqrt();
            for v in block.iter_mut() {
                *v = (*v * scale).min(clip);
            }
            let scale = T::one() / (dot(&block, &block) + eps2).sqrt();
            out.extend(block.iter().map(|&v| v * scale));
        }
    }
    (bx_n, by_n, out)
}

/// HOG descriptor of one square patch.
pub fn extract_hog<T: Scalar>(
    image: &GrayImage<T>,
    loc: PatchLocation,
    cfg: &HogConfig,
) -> Result<FeatureVector<T>> {
    if !loc.fits_in(image.width(), image.height()) {
        return Err(Error::InvalidRegion(format!(
            "{loc:?} outside {}x{} image",
            image.width(),
            image.height()
        )));
    }
    cfg.check_patch_side(loc.side)?;
    let cells = loc.side / cfg.cell_size;
    let hist = cell_histograms(image, loc.x, loc.y, cells, cells, cfg);
    let (_, _, blocks) = normalized_blocks(&hist, cells, cells, cfg);
    Ok(FeatureVector::new(blocks))
}

/// Descriptor of the whole image resampled to a `DESCRIPTOR_SIDE` square.
pub fn whole_image_descriptor<T: Scalar>(
    image: &GrayImage<T>,
    cfg: &HogConfig,
) -> Result<FeatureVector<T>> {
    whole_image_descriptor_at(image, cfg, DESCRIPTOR_SIDE)
}

pub fn whole_image_descriptor_at<T: Scalar>(
    image: &GrayImage<T>,
    cfg: &HogConfig,
    side: usize,
) -> Result<FeatureVector<T>> {
    let canonical = resize_bilinear(image, side, side);
    extract_hog(&canonical, PatchLocation::new(0, 0, side), cfg)
}

/// Normalized HOG blocks over an entire image, for dense window scoring.
#[derive(Clone, Debug)]
pub struct HogGrid<T> {
    cfg: HogConfig,
    width: usize,
    height: usize,
    blocks_x: usize,
    blocks_y: usize,
    blocks: Vec<T>,
}

impl<T: Scalar> HogGrid<T> {
    pub fn new(image: &GrayImage<T>, cfg: &HogConfig) -> Result<Self> {
        cfg.validate()?;
        let cells_x = image.width() / cfg.cell_size;
        let cells_y = image.height() / cfg.cell_size;
        let hist = cell_histograms(image, 0, 0, cells_x, cells_y, cfg);
        let (blocks_x, blocks_y, blocks) = normalized_blocks(&hist, cells_x, cells_y, cfg);
        Ok(Self {
            cfg: *cfg,
            width: image.width(),
            height: image.height(),
            blocks_x,
            blocks_y,
            blocks,
        })
    }

    pub fn config(&self) -> &HogConfig {
        &self.cfg
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Whether `loc` lines up with the block lattice of this grid.
    pub fn supports(&self, loc: PatchLocation) -> bool {
        let cs = self.cfg.cell_size;
        loc.fits_in(self.width, self.height)
            && loc.x % cs == 0
            && loc.y % cs == 0
            && (loc.x / cs) % self.cfg.block_stride == 0
            && (loc.y / cs) % self.cfg.block_stride == 0
            && self.cfg.check_patch_side(loc.side).is_ok()
    }

    fn window_blocks(&self, loc: PatchLocation) -> (usize, usize, usize) {
        let cs = self.cfg.cell_size;
        let per_side = self.cfg.blocks_along(loc.side / cs);
        let bx0 = loc.x / cs / self.cfg.block_stride;
        let by0 = loc.y / cs / self.cfg.block_stride;
        (bx0, by0, per_side)
    }

    /// Feature of the window at `loc`; identical to [`extract_hog`] on the source image.
    pub fn window_feature(&self, loc: PatchLocation) -> Result<FeatureVector<T>> {
        if !self.supports(loc) {
            return Err(Error::InvalidRegion(format!(
                "{loc:?} not aligned with the HOG block lattice"
            )));
        }
        let (bx0, by0, n) = self.window_blocks(loc);
        let bl = self.cfg.block_len();
        let mut out = Vec::with_capacity(n * n * bl);
        for by in by0..by0 + n {
            let start = (by * self.blocks_x + bx0) * bl;
            out.extend_from_slice(&self.blocks[start..start + n * bl]);
        }
        Ok(FeatureVector::new(out))
    }

    /// `w . window_feature(loc)` without materializing the feature.
    pub fn window_dot(&self, loc: PatchLocation, w: &[T]) -> Result<T> {
        if !self.supports(loc) {
            return Err(Error::InvalidRegion(format!(
                "{loc:?} not aligned with the HOG block lattice"
            )));
        }
        let (bx0, by0, n) = self.window_blocks(loc);
        let bl = self.cfg.block_len();
        let row_len = n * bl;
        if w.len() != n * row_len {
            return Err(Error::DimensionMismatch {
                expected: n * row_len,
                actual: w.len(),
            });
        }
        let mut total = T::zero();
        for (r, by) in (by0..by0 + n).enumerate() {
            let start = (by * self.blocks_x + bx0) * bl;
            total = total + dot(&w[r * row_len..(r + 1) * row_len], &self.blocks[start..start + row_len]);
        }
        Ok(total)
    }

    pub fn blocks_x(&self) -> usize {
        self.blocks_x
    }

    pub fn blocks_y(&self) -> usize {
        self.blocks_y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::mirror;
    use proptest::prelude::*;

    fn noise(w: usize, h: usize, seed: u64) -> GrayImage<f64> {
        GrayImage::from_fn(w, h, |x, y| {
            let v = (seed ^ ((x as u64) << 32 | y as u64))
                .wrapping_mul(0x9E3779B97F4A7C15)
                .rotate_left(17)
                .wrapping_mul(0xBF58476D1CE4E5B9);
            (v >> 11) as f64 / (1u64 << 53) as f64
        })
    }

    #[test]
    fn constant_patch_has_zero_descriptor() {
        let img = GrayImage::constant(80, 80, 0.7f64);
        let f = extract_hog(&img, PatchLocation::new(8, 8, 64), &HogConfig::default()).unwrap();
        assert_eq!(f.dim(), 1764);
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn default_dimension_counts_blocks() {
        let cfg = HogConfig::default();
        // 8 cells per side, 2x2 blocks with stride 1 -> 7 x 7 blocks of 36 values.
        assert_eq!(cfg.patch_dim(64), 7 * 7 * 4 * 9);
        assert_eq!(cfg.patch_dim(DESCRIPTOR_SIDE), 15 * 15 * 4 * 9);
    }

    #[test]
    fn vertical_step_edge_lands_in_horizontal_bin() {
        let img = GrayImage::from_fn(64, 64, |x, _| if x < 32 { 0.0 } else { 1.0 });
        let cfg = HogConfig::default();
        let f = extract_hog(&img, PatchLocation::new(0, 0, 64), &cfg).unwrap();
        let mut per_bin = vec![0.0; cfg.bins];
        for (i, v) in f.iter().enumerate() {
            per_bin[i % cfg.bins] += v * v;
        }
        let total: f64 = per_bin.iter().sum();
        assert!(per_bin[0] / total >= 0.9, "{per_bin:?}");
    }

    #[test]
    fn out_of_bounds_patch_is_rejected() {
        let img = GrayImage::constant(64, 64, 0.0f64);
        assert!(matches!(
            extract_hog(&img, PatchLocation::new(8, 0, 64), &HogConfig::default()),
            Err(Error::InvalidRegion(_))
        ));
    }

    #[test]
    fn whole_image_descriptor_dimension_and_identity() {
        let img = noise(200, 90, 3);
        let cfg = HogConfig::default();
        let a = whole_image_descriptor(&img, &cfg).unwrap();
        let b = whole_image_descriptor(&img.clone(), &cfg).unwrap();
        assert_eq!(a.dim(), 8100);
        assert_eq!(a, b);
        let m = whole_image_descriptor(&mirror(&img), &cfg).unwrap();
        assert_ne!(a, m);
    }

    #[test]
    fn grid_windows_match_single_patch_extraction() {
        let img = noise(112, 96, 11);
        let cfg = HogConfig::default();
        let grid = HogGrid::new(&img, &cfg).unwrap();
        for &(x, y) in &[(0, 0), (8, 16), (48, 32)] {
            let loc = PatchLocation::new(x, y, 64);
            let direct = extract_hog(&img, loc, &cfg).unwrap();
            assert_eq!(grid.window_feature(loc).unwrap(), direct);
            let w: Vec<f64> = (0..direct.dim()).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
            let via_grid = grid.window_dot(loc, &w).unwrap();
            assert!((via_grid - dot(&w, &direct)).abs() < 1e-9);
        }
        assert!(!grid.supports(PatchLocation::new(4, 0, 64)));
    }

    proptest! {
        #[test]
        fn entries_in_unit_interval_and_offset_invariant(seed in any::<u64>(), offset in -0.5f64..0.5) {
            let img = noise(48, 48, seed);
            let shifted = GrayImage::from_fn(48, 48, |x, y| img.get(x, y) + offset);
            let cfg = HogConfig::default();
            let loc = PatchLocation::new(8, 8, 32);
            let a = extract_hog(&img, loc, &cfg).unwrap();
            let b = extract_hog(&shifted, loc, &cfg).unwrap();
            prop_assert_eq!(a.dim(), cfg.patch_dim(32));
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((0.0..=1.0).contains(x));
                prop_assert!((x - y).abs() < 1e-6);
            }
        }
    }
}

//! Dense sliding-window scoring and greedy non-maximum suppression.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::imaging::{extract_hog, GrayImage, HogConfig, HogGrid, PatchGrid, PatchLocation};
use crate::scalar::{dot, Scalar};

/// Scores laid out on the sliding-window lattice, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMap<T> {
    pub grid: PatchGrid,
    pub cols: usize,
    pub rows: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> ScoreMap<T> {
    pub fn new(grid: PatchGrid, cols: usize, rows: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != cols * rows {
            return Err(Error::DimensionMismatch {
                expected: cols * rows,
                actual: values.len(),
            });
        }
        Ok(Self {
            grid,
            cols,
            rows,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, col: usize, row: usize) -> T {
        self.values[row * self.cols + col]
    }

    pub fn location(&self, index: usize) -> PatchLocation {
        self.grid.location(index % self.cols, index / self.cols)
    }

    pub fn locations(&self) -> impl Iterator<Item = PatchLocation> + '_ {
        (0..self.len()).map(move |i| self.location(i))
    }
}

/// A scored patch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection<T> {
    pub loc: PatchLocation,
    pub score: T,
}

/// `w . hog(window)` at every window of the grid.
pub fn score_grid<T: Scalar>(
    image: &GrayImage<T>,
    w: &[T],
    grid: PatchGrid,
    hog: &HogConfig,
) -> Result<ScoreMap<T>> {
    let aligned = grid.stride % hog.cell_size == 0 && (grid.stride / hog.cell_size) % hog.block_stride == 0;
    if aligned {
        let hog_grid = HogGrid::new(image, hog)?;
        return score_hog_grid(&hog_grid, w, grid);
    }
    let (cols, rows) = window_dims(grid, image.width(), image.height())?;
    let mut values = Vec::with_capacity(cols * rows);
    for row in 0..rows {
        for col in 0..cols {
            let f = extract_hog(image, grid.location(col, row), hog)?;
            if f.dim() != w.len() {
                return Err(Error::DimensionMismatch {
                    expected: f.dim(),
                    actual: w.len(),
                });
            }
            values.push(dot(w, &f));
        }
    }
    ScoreMap::new(grid, cols, rows, values)
}

/// Dense scoring on a precomputed HOG grid; the window lattice must be block-aligned.
pub fn score_hog_grid<T: Scalar>(hog: &HogGrid<T>, w: &[T], grid: PatchGrid) -> Result<ScoreMap<T>> {
    let (cols, rows) = window_dims(grid, hog.width(), hog.height())?;
    let mut values = Vec::with_capacity(cols * rows);
    for row in 0..rows {
        for col in 0..cols {
            values.push(hog.window_dot(grid.location(col, row), w)?);
        }
    }
    ScoreMap::new(grid, cols, rows, values)
}

fn window_dims(grid: PatchGrid, width: usize, height: usize) -> Result<(usize, usize)> {
    grid.dims(width, height).ok_or_else(|| {
        Error::TooSmall(format!(
            "{width}x{height} image cannot hold a {} px patch",
            grid.side
        ))
    })
}

/// Descending score, then ascending index.
pub(crate) fn rank_desc<T: Scalar>(a: (usize, T), b: (usize, T)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or_else(|| a.1.is_nan().cmp(&b.1.is_nan()))
        .then(a.0.cmp(&b.0))
}

/// Greedy NMS: visit windows by descending score and keep one when its IoU with every
/// kept window is at most `overlap_max`, stopping after `k`.
pub fn top_k_nms<T: Scalar>(map: &ScoreMap<T>, k: usize, overlap_max: f64) -> Vec<Detection<T>> {
    let mut order: Vec<usize> = (0..map.len()).collect();
    order.sort_by(|&a, &b| rank_desc((a, map.values[a]), (b, map.values[b])));
    let mut kept: Vec<Detection<T>> = Vec::with_capacity(k);
    for idx in order {
        if kept.len() >= k {
            break;
        }
        let loc = map.location(idx);
        if kept.iter().all(|d| d.loc.iou(&loc) <= overlap_max) {
            kept.push(Detection {
                loc,
                score: map.values[idx],
            });
        }
    }
    kept
}

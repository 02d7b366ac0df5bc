//! Image preprocessing and HOG patch features.

mod hog;
mod image;

pub use self::hog::{
    extract_hog, whole_image_descriptor, whole_image_descriptor_at, HogConfig, HogGrid,
    DESCRIPTOR_SIDE,
};
pub use self::image::{mirror, preprocess, resize_bilinear, GrayImage, Rect, MIN_SIDE};

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Square patch placed in image coordinates (x right, y down).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatchLocation {
    pub x: usize,
    pub y: usize,
    pub side: usize,
}

impl PatchLocation {
    pub fn new(x: usize, y: usize, side: usize) -> Self {
        Self { x, y, side }
    }

    /// Patch center in pixel coordinates.
    pub fn center<T: Scalar>(&self) -> crate::geometry::Point<T> {
        let half = T::from_count(self.side) / T::lit(2.0);
        crate::geometry::Point::new(
            T::from_count(self.x) + half,
            T::from_count(self.y) + half,
        )
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.side > 0 && self.x + self.side <= width && self.y + self.side <= height
    }

    /// Location of the same pixels after a horizontal flip of an image `width` wide.
    pub fn mirrored(&self, width: usize) -> Self {
        Self {
            x: width - self.x - self.side,
            ..*self
        }
    }

    /// Intersection-over-union of two axis-aligned boxes.
    pub fn iou(&self, other: &PatchLocation) -> f64 {
        let ix = (self.x + self.side).min(other.x + other.side) as f64 - self.x.max(other.x) as f64;
        let iy = (self.y + self.side).min(other.y + other.side) as f64 - self.y.max(other.y) as f64;
        if ix <= 0.0 || iy <= 0.0 {
            return 0.0;
        }
        let inter = ix * iy;
        let a = (self.side * self.side) as f64;
        let b = (other.side * other.side) as f64;
        inter / (a + b - inter)
    }
}

/// Fixed-dimension real feature vector.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![T::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Element-wise mean of equally sized vectors. Returns `None` for an empty input.
    pub fn mean<'a, I>(vectors: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a FeatureVector<T>>,
    {
        let mut iter = vectors.into_iter();
        let first = iter.next()?;
        let mut acc = first.values.clone();
        let mut n = 1usize;
        for v in iter {
            assert_eq!(v.dim(), acc.len(), "feature dimension mismatch");
            for (a, &x) in acc.iter_mut().zip(&v.values) {
                *a = *a + x;
            }
            n += 1;
        }
        let inv = T::one() / T::from_count(n);
        acc.iter_mut().for_each(|a| *a = *a * inv);
        Some(Self { values: acc })
    }
}

impl<T> Deref for FeatureVector<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.values
    }
}

impl<T> From<Vec<T>> for FeatureVector<T> {
    fn from(values: Vec<T>) -> Self {
        Self { values }
    }
}

/// Sliding-window layout: square patches of `side` pixels every `stride` pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub side: usize,
    pub stride: usize,
}

impl Default for PatchGrid {
    fn default() -> Self {
        Self { side: 64, stride: 8 }
    }
}

impl PatchGrid {
    pub fn new(side: usize, stride: usize) -> Self {
        Self { side, stride }
    }

    /// Number of window columns and rows for an image of the given size.
    pub fn dims(&self, width: usize, height: usize) -> Option<(usize, usize)> {
        if self.side == 0 || self.stride == 0 || width < self.side || height < self.side {
            return None;
        }
        Some((
            (width - self.side) / self.stride + 1,
            (height - self.side) / self.stride + 1,
        ))
    }

    pub fn location(&self, col: usize, row: usize) -> PatchLocation {
        PatchLocation::new(col * self.stride, row * self.stride, self.side)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_of_boxes_offset_by_one_stride() {
        let a = PatchLocation::new(0, 0, 64);
        let b = PatchLocation::new(8, 0, 64);
        let expected = (56.0 * 64.0) / (2.0 * 64.0 * 64.0 - 56.0 * 64.0);
        assert!((a.iou(&b) - expected).abs() < 1e-12);
        assert_eq!(a.iou(&PatchLocation::new(64, 0, 64)), 0.0);
        assert_eq!(a.iou(&a), 1.0);
    }

    #[test]
    fn diagonal_offset_iou() {
        // 56x56 overlap out of two 64x64 boxes.
        let a = PatchLocation::new(0, 0, 64);
        let b = PatchLocation::new(8, 8, 64);
        let expected = 56.0 * 56.0 / (2.0 * 64.0 * 64.0 - 56.0 * 56.0);
        assert!((a.iou(&b) - expected).abs() < 1e-12);
        assert!((expected - 0.6203).abs() < 1e-3);
    }

    #[test]
    fn grid_dims_match_window_count_formula() {
        let grid = PatchGrid::new(64, 8);
        assert_eq!(grid.dims(500, 300), Some((55, 30)));
        assert_eq!(grid.dims(63, 300), None);
    }

    #[test]
    fn mirrored_location_round_trips() {
        let loc = PatchLocation::new(10, 4, 32);
        assert_eq!(loc.mirrored(100).x, 58);
        assert_eq!(loc.mirrored(100).mirrored(100), loc);
    }

    #[test]
    fn mean_of_one_is_identity() {
        let v = FeatureVector::new(vec![1.5f64, -2.0]);
        assert_eq!(FeatureVector::mean([&v]).unwrap(), v);
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smallest width or height accepted after preprocessing.
pub const MIN_SIDE: usize = 64;

/// Single-channel image, row-major, intensities nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage<T> {
    width: usize,
    height: usize,
    pixels: Vec<T>,
}

impl<T: Scalar> GrayImage<T> {
    pub fn new(width: usize, height: usize, pixels: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRegion(format!("empty image {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn constant(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    /// 8-bit luma samples scaled to `[0, 1]`.
    pub fn from_luma8(width: usize, height: usize, data: &[u8]) -> Result<Self> {
        let scale = T::lit(1.0 / 255.0);
        Self::new(
            width,
            height,
            data.iter().map(|&v| T::from_count(v as usize) * scale).collect(),
        )
    }

    /// Interleaved 8-bit RGB converted with 0.299/0.587/0.114 luma weights.
    pub fn from_rgb8(width: usize, height: usize, data: &[u8]) -> Result<Self> {
        if data.len() != 3 * width * height {
            return Err(Error::DimensionMismatch {
                expected: 3 * width * height,
                actual: data.len(),
            });
        }
        let pixels = data
            .chunks_exact(3)
            .map(|px| {
                let luma = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
                T::lit(luma / 255.0)
            })
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [T] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    pub fn crop(&self, rect: Rect) -> Result<Self> {
        if !rect.fits_in(self.width, self.height) {
            return Err(Error::InvalidRegion(format!(
                "{rect:?} outside {}x{} image",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(rect.width * rect.height);
        for y in rect.y..rect.y + rect.height {
            pixels.extend_from_slice(&self.row(y)[rect.x..rect.x + rect.width]);
        }
        Self::new(rect.width, rect.height, pixels)
    }

    /// Quantizes to 8-bit luma, clamping to `[0, 1]`.
    pub fn to_luma8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| {
                let v = v.to_f64_lossy().clamp(0.0, 1.0);
                (v * 255.0).round() as u8
            })
            .collect()
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Self {
            x,
            y,
            width,
            height,
        }
    }

    pub fn full<T: Scalar>(image: &GrayImage<T>) -> Self {
        Self::new(0, 0, image.width(), image.height())
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.width > 0
            && self.height > 0
            && self.x + self.width <= width
            && self.y + self.height <= height
    }
}

/// Bilinear resampling with pixel-center alignment; a same-size resize is the identity.
pub fn resize_bilinear<T: Scalar>(image: &GrayImage<T>, width: usize, height: usize) -> GrayImage<T> {
    assert!(width > 0 && height > 0, "resize target must be non-empty");
    if width == image.width && height == image.height {
        return image.clone();
    }
    let sample_axis = |dst: usize, src_len: usize, dst_len: usize| -> (usize, usize, T) {
        let scale = src_len as f64 / dst_len as f64;
        let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(src_len - 1);
        (lo, hi, T::lit(pos - lo as f64))
    };
    let cols: Vec<_> = (0..width)
        .map(|x| sample_axis(x, image.width, width))
        .collect();
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        let (y0, y1, fy) = sample_axis(y, image.height, height);
        let r0 = image.row(y0);
        let r1 = image.row(y1);
        for &(x0, x1, fx) in &cols {
            let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
            let bottom = r1[x0] + (r1[x1] - r1[x0]) * fx;
            pixels.push(top + (bottom - top) * fy);
        }
    }
    GrayImage {
        width,
        height,
        pixels,
    }
}

/// Crops `bbox` and rescales it to `target_width`, preserving the aspect ratio.
pub fn preprocess<T: Scalar>(
    image: &GrayImage<T>,
    bbox: Rect,
    target_width: usize,
) -> Result<GrayImage<T>> {
    if target_width < MIN_SIDE {
        return Err(Error::TooSmall(format!(
            "target width {target_width} below {MIN_SIDE}"
        )));
    }
    let crop = image.crop(bbox)?;
    let height = (bbox.height as f64 * target_width as f64 / bbox.width as f64).round() as usize;
    if height < MIN_SIDE {
        return Err(Error::TooSmall(format!(
            "resized height {height} below {MIN_SIDE}"
        )));
    }
    Ok(resize_bilinear(&crop, target_width, height))
}

/// Horizontal flip.
pub fn mirror<T: Scalar>(image: &GrayImage<T>) -> GrayImage<T> {
    let mut pixels = Vec::with_capacity(image.pixels.len());
    for y in 0..image.height {
        pixels.extend(image.row(y).iter().rev().copied());
    }
    GrayImage {
        width: image.width,
        height: image.height,
        pixels,
    }
}

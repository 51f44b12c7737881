//! Single-channel B-scan raster.

use crate::error::{Error, Result};
use crate::sample::Rule;

/// Smallest accepted edge length in pixels.
pub const MIN_DIM: usize = 8;

/// A single-channel B-scan stored row-major, intensities in `[0, 1]`.
///
/// Construction validates shape and range; once built an `Image` is an
/// immutable value and operators always return a new one.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let img = Image {
            height,
            width,
            data,
        };
        match img.violations().into_iter().next() {
            None => Ok(img),
            Some((_, v)) => Err(Error::Input(v)),
        }
    }

    /// Builds an image by evaluating `f(row, col)`; results are clamped to `[0, 1]`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("image generator produced a non-finite value".into()));
        }
        Image::new(height, width, data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Image::new(height, width, vec![value; height * width])
    }

    /// Wraps operator output, clamping every value into `[0, 1]`.
    ///
    /// Callers guarantee the shape and finiteness; only the range is repaired.
    pub(crate) fn from_raw_clamped(height: usize, width: usize, mut data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        for v in &mut data {
            debug_assert!(v.is_finite());
            *v = v.clamp(0.0, 1.0);
        }
        Image {
            height,
            width,
            data,
        }
    }

    #[cfg(test)]
    pub(crate) fn from_raw_unchecked(height: usize, width: usize, data: Vec<f64>) -> Self {
        Image {
            height,
            width,
            data,
        }
    }

    /// Every rule this raster breaks, as human-readable strings.
    pub(crate) fn violations(&self) -> Vec<(Rule, String)> {
        let mut out = Vec::new();
        if self.height < MIN_DIM || self.width < MIN_DIM {
            out.push((
                Rule::Shape,
                format!("{}x{} is below the {MIN_DIM}x{MIN_DIM} minimum", self.height, self.width),
            ));
        }
        if self.data.len() != self.height * self.width {
            out.push((
                Rule::Shape,
                format!("data length {} != height*width {}", self.data.len(), self.height * self.width),
            ));
        }
        if let Some((i, v)) = self
            .data
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || !(0.0..=1.0).contains(*v))
        {
            out.push((Rule::Range, format!("value {v} at index {i} outside [0,1]")));
        }
        out
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    pub fn mean(&self) -> f64 {
        mean_of(&self.data)
    }

    /// Mirror left/right.
    pub fn flip_horizontal(&self) -> Image {
        let mut data = Vec::with_capacity(self.data.len());
        for r in 0..self.height {
            data.extend(self.row(r).iter().rev());
        }
        Image {
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// Bilinear resampling to a new shape (pixel centers aligned at the corners).
    pub fn resize_bilinear(&self, height: usize, width: usize) -> Result<Image> {
        if height < MIN_DIM || width < MIN_DIM {
            return Err(Error::param("shape", format!("{height}x{width} below minimum")));
        }
        if height == self.height && width == self.width {
            return Ok(self.clone());
        }
        let sy = if height > 1 { (self.height - 1) as f64 / (height - 1) as f64 } else { 0.0 };
        let sx = if width > 1 { (self.width - 1) as f64 / (width - 1) as f64 } else { 0.0 };
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(crate::geometric::sample_bilinear(self, c as f64 * sx, r as f64 * sy));
            }
        }
        Ok(Image::from_raw_clamped(height, width, data))
    }
}


/// Arithmetic mean with one correction pass; exact for constant data.
pub(crate) fn mean_of(xs: &[f64]) -> f64 {
    let Some(&first) = xs.first() else { return f64::NAN };
    if xs.iter().all(|&x| x == first) {
        return first;
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    m + xs.iter().map(|x| x - m).sum::<f64>() / n
}

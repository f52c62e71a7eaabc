//! Core raster types shared across the pipeline. Everything is stored
//! row-major with `(x, y)` addressing, `y * width + x`.

use crate::{Error, Result};

/// An RGB video frame with every channel normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl Frame {
    /// Smallest side length the pipeline accepts.
    pub const MIN_DIM: usize = 8;

    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<Self> {
        if width < Self::MIN_DIM || height < Self::MIN_DIM {
            return Err(Error::invalid(format!(
                "frame dimensions {width}x{height} below minimum {min}x{min}",
                min = Self::MIN_DIM
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "frame expects {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if pixels.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::invalid("frame pixel channel outside [0, 1]"));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }
}

/// Dense per-pixel motion vectors between a pair of frames, `(u, v)`
/// displacements in pixels.
///
/// Components are `f32` so that disk round-trips through the 32-bit flow
/// file format are bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    vectors: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, vectors: Vec<[f32; 2]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("flow field dimensions must be positive"));
        }
        if vectors.len() != width * height {
            return Err(Error::invalid(format!(
                "flow field expects {} vectors, got {}",
                width * height,
                vectors.len()
            )));
        }
        if vectors.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("flow field contains non-finite components"));
        }
        Ok(Self {
            width,
            height,
            vectors,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            vectors: vec![[0.0, 0.0]; width * height],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 2],
    ) -> Result<Self> {
        let mut vectors = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                vectors.push(f(x, y));
            }
        }
        Self::new(width, height, vectors)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn vector(&self, x: usize, y: usize) -> [f32; 2] {
        self.vectors[y * self.width + x]
    }

    pub fn vectors(&self) -> &[[f32; 2]] {
        &self.vectors
    }

    /// Mean Euclidean magnitude over all vectors.
    pub fn mean_magnitude(&self) -> f64 {
        let sum: f64 = self
            .vectors
            .iter()
            .map(|[u, v]| ((*u as f64).powi(2) + (*v as f64).powi(2)).sqrt())
            .sum();
        sum / self.vectors.len() as f64
    }
}

/// A strictly binary per-pixel mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    values: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, values: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("mask dimensions must be positive"));
        }
        if values.len() != width * height {
            return Err(Error::invalid(format!(
                "mask expects {} values, got {}",
                width * height,
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.values[y * self.width + x] = value;
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|v| **v).count()
    }

    /// Complement mask.
    pub fn inverted(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| !v).collect(),
        }
    }

    /// `Some(v)` when every pixel equals `v`.
    pub fn uniform_value(&self) -> Option<bool> {
        let first = *self.values.first()?;
        self.values.iter().all(|v| *v == first).then_some(first)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_rejects_small_dimensions() {
        assert!(Frame::new(4, 64, vec![[0.0; 3]; 4 * 64]).is_err());
        assert!(Frame::new(64, 7, vec![[0.0; 3]; 64 * 7]).is_err());
    }

    #[test]
    fn frame_rejects_out_of_range_channel() {
        let mut pixels = vec![[0.5; 3]; 64];
        pixels[10] = [0.5, 1.5, 0.5];
        assert!(Frame::new(8, 8, pixels).is_err());
    }

    #[test]
    fn flow_rejects_non_finite() {
        assert!(FlowField::new(2, 1, vec![[f32::NAN, 0.0], [0.0, 0.0]]).is_err());
    }

    #[test]
    fn mask_uniform_detection() {
        assert_eq!(BinaryMask::filled(4, 4, true).uniform_value(), Some(true));
        let mut m = BinaryMask::filled(4, 4, false);
        m.set(1, 2, true);
        assert_eq!(m.uniform_value(), None);
    }
}

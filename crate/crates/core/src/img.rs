//! RGBA image buffer with the sampling rules used by the projection code.
//!
//! Pixels are stored row-major as interleaved `[r, g, b, a]` f32 values in
//! `[0, 1]`. Continuous sample coordinates place the center of pixel
//! `(row, col)` at exactly `(row, col)`, so the image spans
//! `[-0.5, height - 0.5] x [-0.5, width - 0.5]`.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions {width}x{height} must be nonzero")]
    EmptyDimensions { width: usize, height: usize },
    #[error("buffer length {got} does not match {width}x{height}x4 = {want}")]
    BufferLength { got: usize, want: usize, width: usize, height: usize },
}

/// Row-major RGBA f32 image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Image {
    /// Transparent black image.
    pub fn new(width: usize, height: usize) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        Ok(Self { width, height, data: vec![0.0; width * height * 4] })
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        let want = width * height * 4;
        if data.len() != want {
            return Err(ImageError::BufferLength { got: data.len(), want, width, height });
        }
        Ok(Self { width, height, data })
    }

    /// Fills every pixel through `f(row, col) -> rgba`.
    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> [f32; 4] + Sync,
    ) -> Result<Self, ImageError> {
        let mut img = Self::new(width, height)?;
        crate::par::for_each_chunk_mut(&mut img.data, width * 4, |row, chunk| {
            for col in 0..width {
                chunk[col * 4..col * 4 + 4].copy_from_slice(&f(row, col));
            }
        });
        Ok(img)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f32; 4] {
        debug_assert!(row < self.height && col < self.width);
        let o = (row * self.width + col) * 4;
        [self.data[o], self.data[o + 1], self.data[o + 2], self.data[o + 3]]
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, rgba: [f32; 4]) {
        debug_assert!(row < self.height && col < self.width);
        let o = (row * self.width + col) * 4;
        self.data[o..o + 4].copy_from_slice(&rgba);
    }

    /// Alpha channel of pixel `(row, col)`.
    pub fn alpha(&self, row: usize, col: usize) -> f32 {
        self.data[(row * self.width + col) * 4 + 3]
    }

    /// Bilinear sample with both axes clamped to the edge pixel centers.
    pub fn sample_bilinear_clamp(&self, row: f64, col: f64) -> [f32; 4] {
        let (r0, r1, fr) = split_clamp(row, self.height);
        let (c0, c1, fc) = split_clamp(col, self.width);
        self.blend(r0, r1, fr, c0, c1, fc)
    }

    /// Bilinear sample that wraps horizontally (panoramic longitude) and
    /// clamps vertically.
    pub fn sample_bilinear_wrap_x(&self, row: f64, col: f64) -> [f32; 4] {
        let (r0, r1, fr) = split_clamp(row, self.height);
        let (c0, c1, fc) = split_wrap(col, self.width);
        self.blend(r0, r1, fr, c0, c1, fc)
    }

    fn blend(&self, r0: usize, r1: usize, fr: f64, c0: usize, c1: usize, fc: f64) -> [f32; 4] {
        let p00 = self.pixel(r0, c0);
        let p01 = self.pixel(r0, c1);
        let p10 = self.pixel(r1, c0);
        let p11 = self.pixel(r1, c1);
        let mut out = [0.0f32; 4];
        for ch in 0..4 {
            let top = p00[ch] as f64 * (1.0 - fc) + p01[ch] as f64 * fc;
            let bot = p10[ch] as f64 * (1.0 - fc) + p11[ch] as f64 * fc;
            out[ch] = (top * (1.0 - fr) + bot * fr) as f32;
        }
        out
    }
}

/// Neighbor indices and fraction for one clamped axis.
fn split_clamp(x: f64, len: usize) -> (usize, usize, f64) {
    let max = (len - 1) as f64;
    let x = x.clamp(0.0, max);
    let lo = x.floor();
    let i0 = lo as usize;
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, x - lo)
}

/// Neighbor indices and fraction for one wrapped axis.
fn split_wrap(x: f64, len: usize) -> (usize, usize, f64) {
    let n = len as f64;
    let x = x.rem_euclid(n);
    let lo = x.floor();
    let i0 = (lo as usize) % len;
    let i1 = (i0 + 1) % len;
    (i0, i1, x - lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ramp() -> Image {
        // Value equals column index in the red channel, row index in green.
        Image::from_fn(4, 3, |r, c| [c as f32, r as f32, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn sample_at_pixel_center_returns_pixel() {
        let img = ramp();
        let s = img.sample_bilinear_clamp(1.0, 2.0);
        assert_eq!(s, img.pixel(1, 2));
    }

    #[test]
    fn sample_midway_interpolates_linearly() {
        let img = ramp();
        let s = img.sample_bilinear_clamp(0.5, 1.5);
        assert_abs_diff_eq!(s[0], 1.5, epsilon = 1e-6);
        assert_abs_diff_eq!(s[1], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn clamp_extends_edge_values() {
        let img = ramp();
        assert_eq!(img.sample_bilinear_clamp(-3.0, -3.0), img.pixel(0, 0));
        assert_eq!(img.sample_bilinear_clamp(9.0, 9.0), img.pixel(2, 3));
    }

    #[test]
    fn wrap_blends_last_and_first_column() {
        let img = ramp();
        let s = img.sample_bilinear_wrap_x(0.0, 3.5);
        // Halfway between col 3 (red 3) and col 0 (red 0).
        assert_abs_diff_eq!(s[0], 1.5, epsilon = 1e-6);
        let periodic = img.sample_bilinear_wrap_x(0.0, 3.5 - 4.0);
        assert_abs_diff_eq!(s[0], periodic[0], epsilon = 1e-6);
    }

    #[test]
    fn constant_image_is_sampling_invariant() {
        let img = Image::from_fn(5, 5, |_, _| [0.25, 0.5, 0.75, 1.0]).unwrap();
        for &(r, c) in &[(0.3, 4.9), (-1.0, 7.2), (2.5, -0.49)] {
            let s = img.sample_bilinear_wrap_x(r, c);
            assert_abs_diff_eq!(s[0], 0.25, epsilon = 1e-6);
            assert_abs_diff_eq!(s[3], 1.0, epsilon = 1e-6);
        }
    }
}

//! Grayscale raster type shared by frames, spatial filters, goal images,
//! and correlation surfaces.

use crate::error::{CorrFadError, Result};
use crate::float::Float;

/// 2-D grayscale image with row-major `Float` pixels.
///
/// Images are immutable once built (all operations return fresh images), so
/// they are safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Float> Image<T> {
    /// Builds an image from row-major pixel data.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(CorrFadError::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(CorrFadError::InvalidParameter(format!(
                "pixel buffer length {} does not equal {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Constant-valued image.
    pub fn filled(width: usize, height: usize, value: T) -> Result<Self> {
        Self::from_vec(width, height, vec![value; width * height])
    }

    /// All-zero image.
    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, T::zero())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = value;
    }

    /// True when every pixel is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|p| p.is_finite())
    }

    /// Applies `f` to every pixel.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn mean(&self) -> T {
        let sum: T = self.data.iter().copied().sum();
        sum / T::of(self.data.len() as f64)
    }

    pub fn l2_norm(&self) -> T {
        self.data
            .iter()
            .map(|&p| p * p)
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    /// Coordinates and value of the global maximum; ties break to the
    /// smallest row-major index.
    pub fn argmax(&self) -> (usize, usize, T) {
        let mut best = (0usize, self.data[0]);
        for (i, &v) in self.data.iter().enumerate().skip(1) {
            if v > best.1 {
                best = (i, v);
            }
        }
        (best.0 % self.width, best.0 / self.width, best.1)
    }

    /// Extracts the axis-aligned sub-image at `(x0, y0)` of size `w`x`h`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(CorrFadError::InvalidParameter(format!(
                "crop ({x0},{y0}) {w}x{h} exceeds image {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x0 + w]);
        }
        Self::from_vec(w, h, data)
    }

    /// Swaps quadrants so the pixel at the origin lands at
    /// `(width/2, height/2)`. Used to display and crop wrapped spatial
    /// filters, whose anchor sits at index (0,0).
    pub fn fftshift(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let (cx, cy) = (w / 2, h / 2);
        let mut data = vec![T::zero(); w * h];
        for y in 0..h {
            let ty = (y + cy) % h;
            for x in 0..w {
                let tx = (x + cx) % w;
                data[ty * w + tx] = self.data[y * w + x];
            }
        }
        Self {
            width: w,
            height: h,
            data,
        }
    }

    /// Bilinear resampling to `new_w`x`new_h`. Only downscaling (or identity)
    /// is allowed; upsampling requests are rejected so scale studies never
    /// manufacture detail that was not captured.
    pub fn resize_down(&self, new_w: usize, new_h: usize) -> Result<Self> {
        if new_w == 0 || new_h == 0 {
            return Err(CorrFadError::InvalidParameter(
                "resize target must be positive".into(),
            ));
        }
        if new_w > self.width || new_h > self.height {
            return Err(CorrFadError::ConfigConflict(format!(
                "upsampling {}x{} -> {new_w}x{new_h} is not permitted",
                self.width, self.height
            )));
        }
        let sx = self.width as f64 / new_w as f64;
        let sy = self.height as f64 / new_h as f64;
        let mut data = Vec::with_capacity(new_w * new_h);
        for y in 0..new_h {
            // Pixel-center alignment: output center maps to input center.
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let wy = T::of(fy - y0 as f64);
            for x in 0..new_w {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let wx = T::of(fx - x0 as f64);
                let one = T::one();
                let top = self.get(x0, y0) * (one - wx) + self.get(x1, y0) * wx;
                let bot = self.get(x0, y1) * (one - wx) + self.get(x1, y1) * wx;
                data.push(top * (one - wy) + bot * wy);
            }
        }
        Self::from_vec(new_w, new_h, data)
    }
}

/// Idealized correlation output: a Gaussian impulse at the target center on
/// an otherwise dark image, `exp(-((x-cx)^2 + (y-cy)^2) / (2 sigma^2))`.
pub fn gaussian_goal<T: Float>(
    width: usize,
    height: usize,
    center: (f64, f64),
    sigma: f64,
) -> Result<Image<T>> {
    if sigma <= 0.0 {
        return Err(CorrFadError::InvalidParameter(format!(
            "goal sigma must be positive, got {sigma}"
        )));
    }
    let (cx, cy) = center;
    if !(0.0..=(width.saturating_sub(1)) as f64).contains(&cx)
        || !(0.0..=(height.saturating_sub(1)) as f64).contains(&cy)
    {
        return Err(CorrFadError::InvalidParameter(format!(
            "goal center ({cx},{cy}) lies outside {width}x{height}"
        )));
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        let dy = y as f64 - cy;
        for x in 0..width {
            let dx = x as f64 - cx;
            data.push(T::of((-(dx * dx + dy * dy) * inv).exp()));
        }
    }
    Image::from_vec(width, height, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img64(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> Image<f64> {
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(f(x, y));
            }
        }
        Image::from_vec(w, h, data).unwrap()
    }

    #[test]
    fn from_vec_rejects_length_mismatch() {
        assert!(Image::<f64>::from_vec(3, 3, vec![0.0; 8]).is_err());
        assert!(Image::<f64>::from_vec(0, 3, vec![]).is_err());
    }

    #[test]
    fn goal_peaks_at_center_pixel() {
        let g: Image<f64> = gaussian_goal(32, 32, (16.0, 16.0), 2.0).unwrap();
        assert_eq!(g.get(16, 16), 1.0);
    }

    #[test]
    fn goal_value_one_sigma_out() {
        let sigma = 3.0;
        let g: Image<f64> = gaussian_goal(32, 32, (16.0, 16.0), sigma).unwrap();
        let v = g.get(16 + sigma as usize, 16);
        assert!((v - (-0.5f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn goal_argmax_is_rounded_center() {
        // Exhaustive argmax scan against the rounded center, 50 random-ish
        // centers from a deterministic low-discrepancy walk.
        for i in 0..50u64 {
            let cx = 3.0 + (i as f64 * 0.37) % 25.0;
            let cy = 3.0 + (i as f64 * 0.61) % 25.0;
            let g: Image<f64> = gaussian_goal(32, 32, (cx, cy), 2.0).unwrap();
            let (ax, ay, _) = g.argmax();
            assert_eq!(
                (ax, ay),
                (cx.round() as usize, cy.round() as usize),
                "center ({cx},{cy})"
            );
        }
    }

    #[test]
    fn goal_symmetric_about_integer_center() {
        let g: Image<f64> = gaussian_goal(21, 17, (10.0, 8.0), 2.5).unwrap();
        for y in 0..17 {
            for x in 0..21 {
                let rx = 20 - x;
                let ry = 16 - y;
                assert_eq!(g.get(x, y), g.get(rx, ry));
            }
        }
    }

    #[test]
    fn goal_rejects_bad_inputs() {
        assert!(gaussian_goal::<f64>(8, 8, (9.0, 4.0), 2.0).is_err());
        assert!(gaussian_goal::<f64>(8, 8, (4.0, 4.0), 0.0).is_err());
    }

    #[test]
    fn argmax_breaks_ties_row_major() {
        let mut im = Image::<f64>::zeros(4, 4).unwrap();
        im.set(2, 1, 5.0);
        im.set(1, 3, 5.0);
        assert_eq!(im.argmax(), (2, 1, 5.0));
    }

    #[test]
    fn fftshift_moves_origin_to_center() {
        let mut im = Image::<f64>::zeros(6, 4).unwrap();
        im.set(0, 0, 1.0);
        let s = im.fftshift();
        assert_eq!(s.get(3, 2), 1.0);
    }

    #[test]
    fn resize_rejects_upsampling() {
        let im = Image::<f64>::zeros(8, 8).unwrap();
        assert!(im.resize_down(9, 8).is_err());
    }

    #[test]
    fn resize_preserves_constant_images() {
        let im = Image::<f64>::filled(16, 12, 0.625).unwrap();
        let r = im.resize_down(7, 5).unwrap();
        for &p in r.pixels() {
            assert!((p - 0.625).abs() < 1e-12);
        }
    }

    #[test]
    fn crop_extracts_expected_window() {
        let im = img64(5, 4, |x, y| (y * 5 + x) as f64);
        let c = im.crop(1, 2, 3, 2).unwrap();
        assert_eq!(c.pixels(), &[11.0, 12.0, 13.0, 16.0, 17.0, 18.0]);
    }
}

//! 2-D discrete Fourier transform built on row/column FFTs.
//!
//! Any dimensions are accepted (non-power-of-two sizes use Bluestein's
//! algorithm internally). The forward transform is unnormalized and the
//! inverse divides by `width * height`, so `inverse_dft(forward_dft(x))`
//! is the identity.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{CorrFadError, Result};
use crate::float::Float;
use crate::image::Image;

/// Complex-valued spectrum of an [`Image`], same dimensions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid<T> {
    width: usize,
    height: usize,
    data: Vec<Complex<T>>,
}

impl<T: Float> FrequencyGrid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != width * height {
            return Err(CorrFadError::InvalidParameter(format!(
                "spectrum buffer length {} does not equal {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![Complex::new(T::zero(), T::zero()); width * height],
        }
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

    pub fn values(&self) -> &[Complex<T>] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Complex<T> {
        self.data[y * self.width + x]
    }

    /// Element-wise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| v.conj()).collect(),
        }
    }

    /// Element-wise product with `other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Element-wise sum with `other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    /// Combines two grids of equal dimensions element-wise.
    pub fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>,
    ) -> Result<Self> {
        self.check_dims(other)?;
        Ok(Self {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    fn check_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(CorrFadError::DimensionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                got_w: other.width,
                got_h: other.height,
            });
        }
        Ok(())
    }
}

/// Forward 2-D DFT of an image (unnormalized).
pub fn forward_dft<T: Float>(img: &Image<T>) -> FrequencyGrid<T> {
    let (w, h) = img.dims();
    let mut data: Vec<Complex<T>> = img
        .pixels()
        .iter()
        .map(|&p| Complex::new(p, T::zero()))
        .collect();
    fft_2d(w, h, &mut data, rustfft::FftDirection::Forward);
    FrequencyGrid {
        width: w,
        height: h,
        data,
    }
}

/// Inverse 2-D DFT; returns the real part scaled by `1 / (width * height)`.
pub fn inverse_dft<T: Float>(grid: &FrequencyGrid<T>) -> Image<T> {
    let (w, h) = grid.dims();
    let mut data = grid.data.clone();
    fft_2d(w, h, &mut data, rustfft::FftDirection::Inverse);
    let scale = T::one() / T::of((w * h) as f64);
    let pixels = data.into_iter().map(|v| v.re * scale).collect();
    Image::from_vec(w, h, pixels).expect("dimensions preserved by transform")
}

fn fft_2d<T: Float>(
    width: usize,
    height: usize,
    data: &mut [Complex<T>],
    direction: rustfft::FftDirection,
) {
    let mut planner = FftPlanner::new();

    let row_fft = planner.plan_fft(width, direction);
    let mut scratch = vec![Complex::default(); row_fft.get_inplace_scratch_len()];
    for row in data.chunks_exact_mut(width) {
        row_fft.process_with_scratch(row, &mut scratch);
    }

    let mut transposed = transpose(width, height, data);
    let col_fft = planner.plan_fft(height, direction);
    scratch.resize(col_fft.get_inplace_scratch_len(), Complex::default());
    for col in transposed.chunks_exact_mut(height) {
        col_fft.process_with_scratch(col, &mut scratch);
    }

    let back = transpose(height, width, &transposed);
    data.copy_from_slice(&back);
}

fn transpose<T: Copy + Default>(width: usize, height: usize, data: &[T]) -> Vec<T> {
    let mut out = vec![T::default(); data.len()];
    for y in 0..height {
        for x in 0..width {
            out[x * height + y] = data[y * width + x];
        }
    }
    out
}

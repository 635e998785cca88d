//! Training/matching preprocessing chain.
//!
//! Frames are log-transformed (compresses lighting), normalized to zero mean
//! and unit L2 norm, then multiplied by a separable raised-cosine window that
//! fades the borders to zero. The stages are exposed individually so each
//! contract can be tested on its own.

use crate::error::{CorrFadError, Result};
use crate::float::Float;
use crate::image::Image;

/// Stage 1: `ln(1 + p)` on `[0, 1]`-scaled pixels. The `1 +` offset keeps
/// zero-valued pixels finite.
pub fn log_transform<T: Float>(img: &Image<T>) -> Image<T> {
    img.map(|p| (T::one() + p).ln())
}

/// Stage 2: shift to mean zero, then scale to unit L2 norm.
///
/// A constant input has zero norm after mean removal and is rejected as
/// degenerate. (Constancy is tested directly: float rounding can leave a
/// constant image with a nonzero residual norm after the mean subtraction.)
pub fn zero_mean_unit_norm<T: Float>(img: &Image<T>) -> Result<Image<T>> {
    let first = img.pixels()[0];
    if img.pixels().iter().all(|&p| p == first) {
        return Err(CorrFadError::DegenerateInput(
            "constant image has zero norm after mean removal".into(),
        ));
    }
    let mean = img.mean();
    let centered = img.map(|p| p - mean);
    let norm = centered.l2_norm();
    if norm == T::zero() {
        return Err(CorrFadError::DegenerateInput(
            "zero norm after mean removal".into(),
        ));
    }
    Ok(centered.map(|p| p / norm))
}

/// Separable 2-D Hann window; exactly zero along every border pixel.
pub fn hann_window<T: Float>(width: usize, height: usize) -> Image<T> {
    let axis = |n: usize, len: usize| -> T {
        if len < 2 {
            return T::one();
        }
        // The cosine form lands exactly on 0 at the borders (sin(pi)^2
        // does not).
        let theta = std::f64::consts::TAU * n as f64 / (len - 1) as f64;
        T::of(0.5 * (1.0 - theta.cos()))
    };
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        let wy = axis(y, height);
        for x in 0..width {
            data.push(axis(x, width) * wy);
        }
    }
    Image::from_vec(width, height, data).expect("window dimensions are valid")
}

/// Stage 3: element-wise product with the window.
pub fn apply_window<T: Float>(img: &Image<T>, window: &Image<T>) -> Result<Image<T>> {
    if img.dims() != window.dims() {
        let (ew, eh) = img.dims();
        let (gw, gh) = window.dims();
        return Err(CorrFadError::DimensionMismatch {
            expected_w: ew,
            expected_h: eh,
            got_w: gw,
            got_h: gh,
        });
    }
    let data = img
        .pixels()
        .iter()
        .zip(window.pixels())
        .map(|(&a, &b)| a * b)
        .collect();
    Image::from_vec(img.width(), img.height(), data)
}

/// Full chain: log transform, zero-mean/unit-norm, cosine window (in that
/// order; windowing is last). Input pixels must be non-negative.
pub fn preprocess<T: Float>(img: &Image<T>) -> Result<Image<T>> {
    if img.pixels().iter().any(|p| p.is_nan() || *p < T::zero()) {
        return Err(CorrFadError::InvalidParameter(
            "preprocessing requires non-negative finite pixels".into(),
        ));
    }
    let logged = log_transform(img);
    let normalized = zero_mean_unit_norm(&logged)?;
    let window = hann_window(img.width(), img.height());
    apply_window(&normalized, &window)
}

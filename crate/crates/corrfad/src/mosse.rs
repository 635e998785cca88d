//! Frequency-domain correlation filter training.
//!
//! The trained filter minimizes the summed squared error between the actual
//! correlation outputs and idealized Gaussian goal images over a training
//! set. With spectra `F_i` of the preprocessed frames and `G_i` of the
//! goals, the closed form is
//!
//! ```text
//! H* = sum_i(G_i ⊙ conj(F_i)) / sum_i(F_i ⊙ conj(F_i))
//! ```
//!
//! computed element-wise. The accumulator holds the running numerator and
//! denominator so training shards can be merged.

use num_complex::Complex;

use crate::annotation::EyeAnnotation;
use crate::bank::PoseBin;
use crate::error::{CorrFadError, Result};
use crate::fft::{forward_dft, inverse_dft, FrequencyGrid};
use crate::float::Float;
use crate::image::{gaussian_goal, Image};
use crate::preprocess::preprocess;

/// Running element-wise sums for the filter numerator and denominator.
#[derive(Debug, Clone)]
pub struct MosseAccumulator<T> {
    numerator: FrequencyGrid<T>,
    denominator: FrequencyGrid<T>,
    count: u64,
}

impl<T: Float> MosseAccumulator<T> {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            numerator: FrequencyGrid::zeros(width, height),
            denominator: FrequencyGrid::zeros(width, height),
            count: 0,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.numerator.dims()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn numerator(&self) -> &FrequencyGrid<T> {
        &self.numerator
    }

    pub fn denominator(&self) -> &FrequencyGrid<T> {
        &self.denominator
    }

    /// Folds one annotated frame into the running sums. The goal image is a
    /// Gaussian impulse at the face center (the eye midpoint).
    pub fn accumulate(
        &mut self,
        frame: &Image<T>,
        annotation: &EyeAnnotation,
        sigma: f64,
    ) -> Result<()> {
        let (w, h) = self.dims();
        if frame.dims() != (w, h) {
            let (gw, gh) = frame.dims();
            return Err(CorrFadError::DimensionMismatch {
                expected_w: w,
                expected_h: h,
                got_w: gw,
                got_h: gh,
            });
        }
        let goal = gaussian_goal::<T>(w, h, annotation.center(), sigma)?;
        let f = forward_dft(&preprocess(frame)?);
        let g = forward_dft(&goal);
        let f_conj = f.conj();
        self.numerator = self.numerator.add(&g.mul(&f_conj)?)?;
        self.denominator = self.denominator.add(&f.mul(&f_conj)?)?;
        self.count += 1;
        Ok(())
    }

    /// Element-wise merge of another accumulator (the cross-shard training
    /// operation). Commutative; associative up to float rounding.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        self.numerator = self.numerator.add(&other.numerator)?;
        self.denominator = self.denominator.add(&other.denominator)?;
        self.count += other.count;
        Ok(())
    }

    /// Mean of the denominator real parts; the reference magnitude for
    /// relative regularization.
    pub fn mean_denominator(&self) -> f64 {
        let values = self.denominator.values();
        let sum: f64 = values.iter().map(|v| v.re.as_f64()).sum();
        sum / values.len() as f64
    }
}

/// Regularization added to the denominator before the final division.
///
/// Zero is numerically usable only when no denominator bin vanishes (it is
/// kept selectable for the exact-filter identity); real data wants a small
/// positive epsilon.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "rule", content = "value")]
pub enum EpsilonSpec {
    /// Fixed epsilon added to every bin.
    Absolute(f64),
    /// Epsilon = factor × mean(real(denominator)), adapting to signal level.
    MeanScaled(f64),
}

impl EpsilonSpec {
    pub fn resolve<T: Float>(&self, acc: &MosseAccumulator<T>) -> f64 {
        match *self {
            EpsilonSpec::Absolute(eps) => eps,
            EpsilonSpec::MeanScaled(factor) => factor * acc.mean_denominator(),
        }
    }
}

impl Default for EpsilonSpec {
    fn default() -> Self {
        // Mean-scaled keeps the same relative strength across image sizes.
        EpsilonSpec::MeanScaled(1e-2)
    }
}

/// A finalized correlation filter plus its scale/pose identity.
#[derive(Debug, Clone, PartialEq)]
pub struct MosseFilter<T> {
    freq: FrequencyGrid<T>,
    spatial: Image<T>,
    octave: f64,
    pose: PoseBin,
    train_count: u64,
}

impl<T: Float> MosseFilter<T> {
    /// Wraps a conjugate-domain filter spectrum. The spatial form is its
    /// inverse transform (after conjugation, so that the stored image is the
    /// kernel whose sliding dot products the spectrum computes).
    pub fn from_freq(freq: FrequencyGrid<T>, octave: f64, pose: PoseBin, train_count: u64) -> Self {
        let spatial = inverse_dft(&freq.conj());
        Self {
            freq,
            spatial,
            octave,
            pose,
            train_count,
        }
    }

    /// Reassembles a filter from stored parts (deserialization path; the
    /// spatial image is trusted rather than recomputed so round trips are
    /// bit-exact).
    pub(crate) fn from_stored(
        freq: FrequencyGrid<T>,
        spatial: Image<T>,
        octave: f64,
        pose: PoseBin,
        train_count: u64,
    ) -> Self {
        Self {
            freq,
            spatial,
            octave,
            pose,
            train_count,
        }
    }

    /// Builds a filter from a small spatial kernel. The kernel is embedded
    /// in a `dims` canvas with its center wrapped to the origin, so the
    /// correlation peak reports the kernel-center position.
    pub fn from_kernel(kernel: &Image<T>, dims: (usize, usize), octave: f64) -> Result<Self> {
        let (w, h) = dims;
        let (kw, kh) = kernel.dims();
        if kw > w || kh > h {
            return Err(CorrFadError::DimensionMismatch {
                expected_w: w,
                expected_h: h,
                got_w: kw,
                got_h: kh,
            });
        }
        let mut canvas = Image::zeros(w, h)?;
        let (ax, ay) = (kw / 2, kh / 2);
        for y in 0..kh {
            let ty = (y + h - ay) % h;
            for x in 0..kw {
                let tx = (x + w - ax) % w;
                canvas.set(tx, ty, kernel.get(x, y));
            }
        }
        let freq = forward_dft(&canvas).conj();
        Ok(Self {
            freq,
            spatial: canvas,
            octave,
            pose: PoseBin::Frontal,
            train_count: 0,
        })
    }

    pub fn freq(&self) -> &FrequencyGrid<T> {
        &self.freq
    }

    /// Spatial kernel with its anchor wrapped at the origin.
    pub fn spatial(&self) -> &Image<T> {
        &self.spatial
    }

    /// Spatial kernel with its anchor moved to the canvas center, for
    /// display and template cropping.
    pub fn spatial_centered(&self) -> Image<T> {
        self.spatial.fftshift()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.freq.dims()
    }

    pub fn octave(&self) -> f64 {
        self.octave
    }

    pub fn pose(&self) -> PoseBin {
        self.pose
    }

    pub fn train_count(&self) -> u64 {
        self.train_count
    }

    /// Nominal training interocular width in pixels.
    pub fn interocular(&self) -> f64 {
        self.octave.exp2()
    }

    /// Conjugate-domain spectrum at the requested canvas size.
    ///
    /// At native size this is the stored spectrum. A larger canvas embeds
    /// the spatial kernel preserving its wrapped split (values representing
    /// negative offsets stay at negative offsets), so peak coordinates are
    /// unchanged by padding.
    pub fn freq_for_dims(&self, dims: (usize, usize)) -> Result<FrequencyGrid<T>> {
        let native = self.dims();
        if dims == native {
            return Ok(self.freq.clone());
        }
        let (w, h) = dims;
        let (nw, nh) = native;
        if w < nw || h < nh {
            return Err(CorrFadError::DimensionMismatch {
                expected_w: nw,
                expected_h: nh,
                got_w: w,
                got_h: h,
            });
        }
        let split_x = nw.div_ceil(2);
        let split_y = nh.div_ceil(2);
        let mut canvas = Image::zeros(w, h)?;
        for y in 0..nh {
            let ty = if y < split_y { y } else { y + h - nh };
            for x in 0..nw {
                let tx = if x < split_x { x } else { x + w - nw };
                canvas.set(tx, ty, self.spatial.get(x, y));
            }
        }
        Ok(forward_dft(&canvas).conj())
    }

}

/// Divides the accumulated sums into a filter: `numerator / (denominator +
/// epsilon)` element-wise.
pub fn finalize<T: Float>(
    acc: &MosseAccumulator<T>,
    epsilon: f64,
    octave: f64,
    pose: PoseBin,
) -> Result<MosseFilter<T>> {
    if acc.count == 0 {
        return Err(CorrFadError::EmptyAccumulator);
    }
    if epsilon < 0.0 {
        return Err(CorrFadError::InvalidParameter(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    let (w, _) = acc.dims();
    let eps = Complex::new(T::of(epsilon), T::zero());
    if epsilon == 0.0 {
        for (i, d) in acc.denominator.values().iter().enumerate() {
            if d.re == T::zero() && d.im == T::zero() {
                return Err(CorrFadError::DivisionDegenerate {
                    x: i % w,
                    y: i / w,
                });
            }
        }
    }
    let freq = acc
        .numerator
        .zip_with(&acc.denominator, |n, d| n / (d + eps))?;
    Ok(MosseFilter::from_freq(freq, octave, pose, acc.count))
}

/// Single-frame exact filter `G / F`: perfectly reproduces this frame's goal
/// image, and nothing else. Overfit by construction; the training-set
/// average above is the usable version.
pub fn exact_filter<T: Float>(
    frame: &Image<T>,
    annotation: &EyeAnnotation,
    sigma: f64,
) -> Result<MosseFilter<T>> {
    let (w, h) = frame.dims();
    let goal = gaussian_goal::<T>(w, h, annotation.center(), sigma)?;
    let f = forward_dft(&preprocess(frame)?);
    for (i, v) in f.values().iter().enumerate() {
        if v.re == T::zero() && v.im == T::zero() {
            return Err(CorrFadError::ZeroDftBin { x: i % w, y: i / w });
        }
    }
    let g = forward_dft(&goal);
    let freq = g.zip_with(&f, |gv, fv| gv / fv)?;
    Ok(MosseFilter::from_freq(
        freq,
        annotation.octave(),
        PoseBin::Frontal,
        1,
    ))
}

//! Correlation back ends and surface scoring.
//!
//! Two routes produce a [`CorrelationSurface`]:
//!
//! - [`freq_correlate`] applies a trained filter through the transform
//!   domain (circular semantics, peak at the face center);
//! - [`spatial_ncc`] slides a cropped template with per-window
//!   normalization (valid-mode, peak at the template top-left).
//!
//! [`find_peak`] and [`psr`] score the surfaces.

use crate::error::{CorrFadError, Result};
use crate::fft::{forward_dft, inverse_dft};
use crate::float::Float;
use crate::image::Image;
use crate::mosse::MosseFilter;
use crate::preprocess::preprocess;

/// Largest canvas side the frequency path will transform by default.
pub const DEFAULT_MAX_CORRELATION_DIM: usize = 4096;

/// Real-valued response map. `origin_offset` is the source-image coordinate
/// of surface element (0, 0); it stays (0, 0) for full frequency surfaces
/// and valid-mode template matching, and records the crop when borders are
/// discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSurface<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
    origin_offset: (i64, i64),
}

impl<T: Float> CorrelationSurface<T> {
    pub fn from_image(image: Image<T>, origin_offset: (i64, i64)) -> Self {
        let (width, height) = image.dims();
        Self {
            width,
            height,
            data: image.pixels().to_vec(),
            origin_offset,
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

    pub fn values(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn origin_offset(&self) -> (i64, i64) {
        self.origin_offset
    }

    /// Surface coordinate -> source-image coordinate.
    pub fn to_source(&self, x: usize, y: usize) -> (i64, i64) {
        (x as i64 + self.origin_offset.0, y as i64 + self.origin_offset.1)
    }

    /// Extracts the sub-surface at `(x0, y0)` of size `w`x`h`, adjusting the
    /// offset so surviving coordinates still map to the same source
    /// positions.
    pub fn crop_rect(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(CorrFadError::SurfaceTooSmall {
                elements: self.data.len(),
            });
        }
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x0 + w]);
        }
        Ok(Self {
            width: w,
            height: h,
            data,
            origin_offset: (
                self.origin_offset.0 + x0 as i64,
                self.origin_offset.1 + y0 as i64,
            ),
        })
    }

    /// Discards `bx`/`by` pixels on each side.
    pub fn crop_border(&self, bx: usize, by: usize) -> Result<Self> {
        if 2 * bx >= self.width || 2 * by >= self.height {
            return Err(CorrFadError::SurfaceTooSmall {
                elements: self.data.len(),
            });
        }
        self.crop_rect(bx, by, self.width - 2 * bx, self.height - 2 * by)
    }
}

/// Global maximum of a surface: `(x, y, value)` in surface coordinates.
/// Ties break to the smallest row-major index, so the result is
/// deterministic.
pub fn find_peak<T: Float>(surface: &CorrelationSurface<T>) -> (usize, usize, T) {
    let mut best_idx = 0usize;
    let mut best = surface.data[0];
    for (i, &v) in surface.data.iter().enumerate().skip(1) {
        if v > best {
            best = v;
            best_idx = i;
        }
    }
    (best_idx % surface.width, best_idx / surface.width, best)
}

/// Applies a trained filter to an image through the transform domain.
///
/// The image is preprocessed, both operands are zero-padded to the common
/// size (max per dimension), and the response is the inverse transform of
/// the spectrum product. Correlation is circular; surface coordinate (x, y)
/// is the response for the face centered at source pixel (x, y), with
/// wrap-around near borders.
pub fn freq_correlate<T: Float>(
    img: &Image<T>,
    filter: &MosseFilter<T>,
) -> Result<CorrelationSurface<T>> {
    freq_correlate_limited(img, filter, DEFAULT_MAX_CORRELATION_DIM)
}

/// [`freq_correlate`] with a configurable canvas limit.
pub fn freq_correlate_limited<T: Float>(
    img: &Image<T>,
    filter: &MosseFilter<T>,
    max_dim: usize,
) -> Result<CorrelationSurface<T>> {
    let (iw, ih) = img.dims();
    let (fw, fh) = filter.dims();
    let common = (iw.max(fw), ih.max(fh));
    if common.0 > max_dim || common.1 > max_dim {
        return Err(CorrFadError::InvalidParameter(format!(
            "correlation canvas {}x{} exceeds the supported maximum {max_dim}",
            common.0, common.1
        )));
    }
    let pre = preprocess(img)?;
    let spectrum = forward_dft(&pad_bottom_right(&pre, common)?);
    let filter_spectrum = filter.freq_for_dims(common)?;
    let product = spectrum.mul(&filter_spectrum)?;
    Ok(CorrelationSurface::from_image(inverse_dft(&product), (0, 0)))
}

/// Zero-pads an image at the right and bottom edges.
pub(crate) fn pad_bottom_right<T: Float>(
    img: &Image<T>,
    dims: (usize, usize),
) -> Result<Image<T>> {
    if img.dims() == dims {
        return Ok(img.clone());
    }
    let (w, h) = dims;
    let (iw, ih) = img.dims();
    if iw > w || ih > h {
        return Err(CorrFadError::DimensionMismatch {
            expected_w: w,
            expected_h: h,
            got_w: iw,
            got_h: ih,
        });
    }
    let mut out = Image::zeros(w, h)?;
    for y in 0..ih {
        for x in 0..iw {
            out.set(x, y, img.get(x, y));
        }
    }
    Ok(out)
}

/// Normalization mode for template matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NccMode {
    /// Energy-normalized cross correlation: window and template are divided
    /// by their L2 norms with no mean removal.
    #[default]
    Literal,
    /// Correlation coefficient: window and template means are removed
    /// first (the standard library-style matcher).
    MeanSubtracted,
}

/// Sliding-window normalized cross correlation, valid mode.
///
/// The surface has size `(iw - tw + 1) x (ih - th + 1)`; value (x, y) scores
/// the window whose top-left corner is source pixel (x, y). Windows with no
/// energy score 0 by convention.
pub fn spatial_ncc<T: Float>(img: &Image<T>, template: &Image<T>) -> Result<CorrelationSurface<T>> {
    spatial_ncc_with_mode(img, template, NccMode::Literal)
}

/// [`spatial_ncc`] with an explicit normalization mode.
pub fn spatial_ncc_with_mode<T: Float>(
    img: &Image<T>,
    template: &Image<T>,
    mode: NccMode,
) -> Result<CorrelationSurface<T>> {
    let (iw, ih) = img.dims();
    let (tw, th) = template.dims();
    if tw >= iw || th >= ih {
        return Err(CorrFadError::TemplateTooLarge {
            tw,
            th,
            iw,
            ih,
        });
    }

    let template = match mode {
        NccMode::Literal => template.clone(),
        NccMode::MeanSubtracted => {
            let mean = template.mean();
            template.map(|p| p - mean)
        }
    };
    let t_energy: T = template.pixels().iter().map(|&t| t * t).sum();
    if t_energy == T::zero() {
        return Err(CorrFadError::AllZeroTemplate);
    }
    let t_norm = t_energy.sqrt();
    let t_sum: T = template.pixels().iter().copied().sum();

    // Summed-area tables for per-window sums and energies.
    let sat = SummedArea::build(img, |p| p);
    let sat_sq = SummedArea::build(img, |p| p * p);
    let area = T::of((tw * th) as f64);

    let out_w = iw - tw + 1;
    let out_h = ih - th + 1;
    let mut data = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        for x in 0..out_w {
            let mut dot = T::zero();
            for ty in 0..th {
                let row = (y + ty) * iw + x;
                let trow = ty * tw;
                for tx in 0..tw {
                    dot = dot + img.pixels()[row + tx] * template.pixels()[trow + tx];
                }
            }
            let win_sum = sat.window(x, y, tw, th);
            let win_energy = sat_sq.window(x, y, tw, th);
            let value = match mode {
                NccMode::Literal => {
                    if win_energy <= T::zero() {
                        T::zero()
                    } else {
                        dot / (win_energy.sqrt() * t_norm)
                    }
                }
                NccMode::MeanSubtracted => {
                    let win_mean = win_sum / area;
                    let centered_dot = dot - win_mean * t_sum;
                    let centered_energy = win_energy - win_sum * win_mean;
                    if centered_energy <= T::zero() {
                        T::zero()
                    } else {
                        centered_dot / (centered_energy.sqrt() * t_norm)
                    }
                }
            };
            data.push(value);
        }
    }
    Ok(CorrelationSurface {
        width: out_w,
        height: out_h,
        data,
        origin_offset: (0, 0),
    })
}

struct SummedArea<T> {
    width: usize,
    data: Vec<T>, // (w+1) x (h+1), zero row/column first
}

impl<T: Float> SummedArea<T> {
    fn build(img: &Image<T>, f: impl Fn(T) -> T) -> Self {
        let (w, h) = img.dims();
        let stride = w + 1;
        let mut data = vec![T::zero(); stride * (h + 1)];
        for y in 0..h {
            let mut row_sum = T::zero();
            for x in 0..w {
                row_sum = row_sum + f(img.get(x, y));
                data[(y + 1) * stride + x + 1] = data[y * stride + x + 1] + row_sum;
            }
        }
        Self { width: w, data }
    }

    #[inline]
    fn window(&self, x: usize, y: usize, w: usize, h: usize) -> T {
        let stride = self.width + 1;
        self.data[(y + h) * stride + x + w] + self.data[y * stride + x]
            - self.data[y * stride + x + w]
            - self.data[(y + h) * stride + x]
    }
}

/// Peak-to-sidelobe ratio of a surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsrScore<T> {
    pub peak_value: T,
    pub peak_xy: (usize, usize),
    pub mean: T,
    pub sigma: T,
    pub psr: T,
}

/// Scores the global peak against the rest of the surface: `(peak - mean) /
/// sigma`, with mean and sigma taken over the whole surface except a 5x5
/// window centered on the peak (clipped at borders).
pub fn psr<T: Float>(surface: &CorrelationSurface<T>) -> Result<PsrScore<T>> {
    let n_total = surface.data.len();
    if n_total <= 25 {
        return Err(CorrFadError::SurfaceTooSmall { elements: n_total });
    }
    let (px, py, peak_value) = find_peak(surface);

    let x0 = px.saturating_sub(2);
    let y0 = py.saturating_sub(2);
    let x1 = (px + 2).min(surface.width - 1);
    let y1 = (py + 2).min(surface.height - 1);
    let in_window =
        |x: usize, y: usize| -> bool { x >= x0 && x <= x1 && y >= y0 && y <= y1 };

    let mut sum = T::zero();
    let mut count = 0usize;
    for y in 0..surface.height {
        for x in 0..surface.width {
            if !in_window(x, y) {
                sum = sum + surface.get(x, y);
                count += 1;
            }
        }
    }
    let mean = sum / T::of(count as f64);
    let mut var_sum = T::zero();
    for y in 0..surface.height {
        for x in 0..surface.width {
            if !in_window(x, y) {
                let d = surface.get(x, y) - mean;
                var_sum = var_sum + d * d;
            }
        }
    }
    let sigma = (var_sum / T::of(count as f64)).sqrt();
    if sigma <= T::zero() {
        return Err(CorrFadError::DegenerateSurface);
    }
    Ok(PsrScore {
        peak_value,
        peak_xy: (px, py),
        mean,
        sigma,
        psr: (peak_value - mean) / sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::FrequencyGrid;
    use crate::synth::test_frame;

    fn surface_from(w: usize, h: usize, data: Vec<f64>) -> CorrelationSurface<f64> {
        CorrelationSurface {
            width: w,
            height: h,
            data,
            origin_offset: (0, 0),
        }
    }

    fn random_image(w: usize, h: usize, seed: u64) -> Image<f64> {
        let mut state = seed | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        Image::from_vec(w, h, (0..w * h).map(|_| next()).collect()).unwrap()
    }

    #[test]
    fn find_peak_single_maximum() {
        let mut data = vec![0.0; 30];
        data[17] = 1.0;
        let s = surface_from(6, 5, data);
        assert_eq!(find_peak(&s), (5, 2, 1.0));
    }

    #[test]
    fn find_peak_breaks_ties_row_major() {
        let mut data = vec![0.0; 30];
        data[7] = 3.0;
        data[22] = 3.0;
        let s = surface_from(6, 5, data);
        assert_eq!(find_peak(&s), (1, 1, 3.0));
    }

    #[test]
    fn find_peak_matches_exhaustive_scan() {
        let img = random_image(13, 9, 77);
        let s = CorrelationSurface::from_image(img.clone(), (0, 0));
        let (px, py, pv) = find_peak(&s);
        let mut best = f64::NEG_INFINITY;
        let mut best_xy = (0, 0);
        for y in 0..9 {
            for x in 0..13 {
                if img.get(x, y) > best {
                    best = img.get(x, y);
                    best_xy = (x, y);
                }
            }
        }
        assert_eq!((px, py), best_xy);
        assert_eq!(pv, best);
    }

    #[test]
    fn zero_filter_gives_zero_surface() {
        let img = random_image(16, 16, 5);
        let filt = MosseFilter::from_freq(
            FrequencyGrid::<f64>::zeros(16, 16),
            4.0,
            crate::bank::PoseBin::Frontal,
            0,
        );
        let s = freq_correlate(&img, &filt).unwrap();
        for &v in s.values() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn freq_correlate_matches_direct_circular_sum() {
        // Direct O(N^2 M^2) circular correlation of the preprocessed image
        // with a small kernel anchored at its center.
        let img = random_image(16, 16, 9);
        let kernel = random_image(5, 5, 10).map(|p| p - 0.5);
        let filt = MosseFilter::from_kernel(&kernel, (16, 16), 4.0).unwrap();
        let surface = freq_correlate(&img, &filt).unwrap();

        let pre = preprocess(&img).unwrap();
        let (ax, ay) = (2i64, 2i64);
        for ty in 0..16i64 {
            for tx in 0..16i64 {
                let mut acc = 0.0;
                for ky in 0..5i64 {
                    for kx in 0..5i64 {
                        let sx = (tx + kx - ax).rem_euclid(16) as usize;
                        let sy = (ty + ky - ay).rem_euclid(16) as usize;
                        acc += pre.get(sx, sy) * kernel.get(kx as usize, ky as usize);
                    }
                }
                let got = surface.get(tx as usize, ty as usize);
                assert!((got - acc).abs() < 1e-4, "({tx},{ty}): {got} vs {acc}");
            }
        }
    }

    #[test]
    fn freq_correlate_pads_smaller_filters() {
        // A kernel filter built on a small canvas applied to a larger image
        // must agree with the same kernel built natively at the image size.
        let img = random_image(24, 20, 21);
        let kernel = random_image(5, 3, 22).map(|p| p - 0.5);
        let small = MosseFilter::from_kernel(&kernel, (8, 8), 4.0).unwrap();
        let native = MosseFilter::from_kernel(&kernel, (24, 20), 4.0).unwrap();
        let via_pad = freq_correlate(&img, &small).unwrap();
        let direct = freq_correlate(&img, &native).unwrap();
        assert_eq!(via_pad.dims(), direct.dims());
        for (a, b) in via_pad.values().iter().zip(direct.values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn correlation_canvas_limit_enforced() {
        let img = random_image(32, 32, 2);
        let filt = MosseFilter::from_kernel(&random_image(3, 3, 3), (32, 32), 4.0).unwrap();
        assert!(freq_correlate_limited(&img, &filt, 16).is_err());
    }

    #[test]
    fn planted_template_scores_one() {
        let template = random_image(6, 6, 40);
        let mut img = Image::<f64>::zeros(24, 24).unwrap();
        for y in 0..6 {
            for x in 0..6 {
                img.set(10 + x, 7 + y, template.get(x, y));
            }
        }
        let s = spatial_ncc(&img, &template).unwrap();
        let (px, py, pv) = find_peak(&s);
        assert_eq!((px, py), (10, 7));
        assert!((pv - 1.0).abs() < 1e-12);
        // Far-away all-zero windows score exactly 0 by convention.
        assert_eq!(s.get(0, 0), 0.0);
    }

    #[test]
    fn ncc_matches_literal_double_sum() {
        let img = random_image(24, 24, 50);
        let tmpl = random_image(8, 8, 51);
        let s = spatial_ncc(&img, &tmpl).unwrap();
        let t_norm: f64 = tmpl.pixels().iter().map(|t| t * t).sum::<f64>().sqrt();
        for y in 0..s.height() {
            for x in 0..s.width() {
                let mut dot = 0.0;
                let mut energy = 0.0;
                for ty in 0..8 {
                    for tx in 0..8 {
                        let iv = img.get(x + tx, y + ty);
                        dot += iv * tmpl.get(tx, ty);
                        energy += iv * iv;
                    }
                }
                let expected = dot / (energy.sqrt() * t_norm);
                assert!((s.get(x, y) - expected).abs() < 1e-5);
                assert!(s.get(x, y).abs() <= 1.0 + 1e-6);
            }
        }
    }

    #[test]
    fn ncc_brightness_invariance() {
        let img = random_image(20, 20, 60);
        let tmpl = random_image(7, 5, 61);
        let bright = img.map(|p| p * 3.25);
        let a = spatial_ncc(&img, &tmpl).unwrap();
        let b = spatial_ncc(&bright, &tmpl).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn ncc_rejects_bad_templates() {
        let img = random_image(16, 16, 1);
        assert!(matches!(
            spatial_ncc(&img, &Image::<f64>::zeros(4, 4).unwrap()),
            Err(CorrFadError::AllZeroTemplate)
        ));
        assert!(matches!(
            spatial_ncc(&img, &random_image(16, 8, 2)),
            Err(CorrFadError::TemplateTooLarge { .. })
        ));
        assert!(matches!(
            spatial_ncc(&img, &random_image(8, 16, 2)),
            Err(CorrFadError::TemplateTooLarge { .. })
        ));
    }

    #[test]
    fn mean_subtracted_mode_is_offset_invariant() {
        let img = random_image(20, 20, 70);
        let tmpl = random_image(6, 6, 71);
        let shifted = img.map(|p| p + 5.0);
        let a = spatial_ncc_with_mode(&img, &tmpl, NccMode::MeanSubtracted).unwrap();
        let b = spatial_ncc_with_mode(&shifted, &tmpl, NccMode::MeanSubtracted).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn spatial_ncc_beats_whole_image_normalization_on_bright_clutter() {
        // A moderate-contrast patch is planted at (8, 0); a much brighter
        // blob sits elsewhere. Raw transform-domain correlation of the
        // whole-image-normalized scene locks onto the bright blob, while
        // per-window normalization recovers the true offset.
        let mut img = Image::<f64>::zeros(32, 32).unwrap();
        let tmpl = random_image(6, 6, 80).map(|p| 0.2 + 0.3 * p);
        for y in 0..6 {
            for x in 0..6 {
                img.set(8 + x, y, tmpl.get(x, y));
            }
        }
        for y in 20..28 {
            for x in 18..26 {
                img.set(x, y, 10.0);
            }
        }

        let ncc = spatial_ncc(&img, &tmpl).unwrap();
        let (nx, ny, _) = find_peak(&ncc);
        assert_eq!((nx, ny), (8, 0));

        // Whole-image normalization + raw correlation (no per-window term).
        let mean = img.mean();
        let norm = img.map(|p| p - mean);
        let scale = norm.l2_norm();
        let norm = norm.map(|p| p / scale);
        let mut padded_t = Image::<f64>::zeros(32, 32).unwrap();
        for y in 0..6 {
            for x in 0..6 {
                padded_t.set(x, y, tmpl.get(x, y));
            }
        }
        let raw = inverse_dft(
            &forward_dft(&norm)
                .mul(&forward_dft(&padded_t).conj())
                .unwrap(),
        );
        let (rx, ry, _) = find_peak(&CorrelationSurface::from_image(raw, (0, 0)));
        assert_ne!((rx, ry), (8, 0), "raw correlation should be distracted");
    }

    #[test]
    fn psr_affine_invariance() {
        let (frame, _) = test_frame::<f64>(24, 24, 90);
        let mut s = CorrelationSurface::from_image(frame, (0, 0));
        s.data[100] = 3.0; // sharp peak
        let base = psr(&s).unwrap();
        let transformed = CorrelationSurface {
            width: s.width,
            height: s.height,
            data: s.data.iter().map(|v| 3.7 * v - 2.1).collect(),
            origin_offset: (0, 0),
        };
        let t = psr(&transformed).unwrap();
        assert_eq!(t.peak_xy, base.peak_xy);
        assert!((t.psr - base.psr).abs() < 1e-9);
    }

    #[test]
    fn psr_matches_direct_formula() {
        let img = random_image(30, 30, 91);
        let mut s = CorrelationSurface::from_image(img, (0, 0));
        s.data[10 * 30 + 14] = 25.0;
        let score = psr(&s).unwrap();
        assert_eq!(score.peak_xy, (14, 10));

        let mut side = Vec::new();
        for y in 0..30usize {
            for x in 0..30usize {
                if x.abs_diff(14) > 2 || y.abs_diff(10) > 2 {
                    side.push(s.get(x, y));
                }
            }
        }
        let mean: f64 = side.iter().sum::<f64>() / side.len() as f64;
        let var: f64 = side.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / side.len() as f64;
        let expected = (25.0 - mean) / var.sqrt();
        assert!((score.psr - expected).abs() < 1e-9);
    }

    #[test]
    fn psr_clips_window_at_borders() {
        let mut data = vec![0.0; 36];
        data[0] = 9.0; // peak in the corner: window is 3x3 after clipping
        data[35] = 1.0;
        let s = surface_from(6, 6, data);
        let score = psr(&s).unwrap();
        assert_eq!(score.peak_xy, (0, 0));
        // Sidelobe holds 36 - 9 = 27 elements, one of which is 1.0.
        let mean = 1.0 / 27.0;
        assert!((score.mean - mean).abs() < 1e-12);
    }

    #[test]
    fn psr_degenerate_cases() {
        let s = surface_from(4, 4, vec![0.5; 16]);
        assert!(matches!(
            psr(&s),
            Err(CorrFadError::SurfaceTooSmall { .. })
        ));
        let s = surface_from(6, 6, vec![0.5; 36]);
        assert!(matches!(psr(&s), Err(CorrFadError::DegenerateSurface)));
    }

    #[test]
    fn crop_border_adjusts_offset() {
        let img = random_image(12, 10, 95);
        let s = CorrelationSurface::from_image(img.clone(), (0, 0));
        let c = s.crop_border(3, 2).unwrap();
        assert_eq!(c.dims(), (6, 6));
        assert_eq!(c.origin_offset(), (3, 2));
        assert_eq!(c.get(0, 0), img.get(3, 2));
        assert_eq!(c.to_source(0, 0), (3, 2));
    }
}

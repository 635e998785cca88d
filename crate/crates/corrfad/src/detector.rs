//! End-to-end detection: apply every bank filter to an image, score the
//! responses, and emit ranked face rectangles.
//!
//! Two back ends are supported. The frequency back end applies the trained
//! filters through the transform domain and ranks peaks by their
//! peak-to-sidelobe ratio. The spatial back end slides the cropped face
//! templates with per-window normalization and ranks by the raw correlation
//! peak.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::FaceRect;
use crate::bank::{FilterBank, PoseBin};
use crate::error::{CorrFadError, Result};
use crate::fft::{forward_dft, inverse_dft, FrequencyGrid};
use crate::float::Float;
use crate::image::Image;
use crate::matching::{
    find_peak, pad_bottom_right, psr, spatial_ncc, CorrelationSurface, PsrScore,
};
use crate::preprocess::preprocess;

/// Peak score plus the peak's source-image coordinate.
type ScoredPeak<T> = (PsrScore<T>, (i64, i64));

/// Which correlation route scores the bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Transform-domain filtering ranked by peak-to-sidelobe ratio.
    FrequencyPsr,
    /// Sliding normalized cross correlation ranked by the raw peak.
    SpatialNcc,
}

/// Identity of a bank filter: its position and scale/pose cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterId {
    pub index: usize,
    pub octave: f64,
    pub pose: PoseBin,
}

/// One ranked detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub rect: FaceRect,
    pub score: f64,
    pub filter: FilterId,
    pub backend: Backend,
}

/// A bank with its filter spectra resolved to one common canvas, so a corpus
/// of same-sized images pays the padding transforms once.
pub struct PreparedBank<'a, T> {
    bank: &'a FilterBank<T>,
    /// Common canvas: max of image dims and every filter's dims.
    canvas: (usize, usize),
    image_dims: (usize, usize),
    freqs: Vec<FrequencyGrid<T>>,
}

impl<'a, T: Float> PreparedBank<'a, T> {
    /// Prepares a bank for images of `image_dims`.
    pub fn new(bank: &'a FilterBank<T>, image_dims: (usize, usize)) -> Result<Self> {
        if bank.is_empty() {
            return Err(CorrFadError::EmptyBank);
        }
        let mut canvas = image_dims;
        for f in bank.filters() {
            let (fw, fh) = f.dims();
            canvas = (canvas.0.max(fw), canvas.1.max(fh));
        }
        let freqs = bank
            .filters()
            .iter()
            .map(|f| f.freq_for_dims(canvas))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            bank,
            canvas,
            image_dims,
            freqs,
        })
    }

    /// Frequency-backend detection; see [`detect`].
    pub fn detect(&self, img: &Image<T>, k: usize) -> Result<Vec<Detection>> {
        if k == 0 {
            return Err(CorrFadError::InvalidParameter(
                "k must be at least 1".into(),
            ));
        }
        if img.dims() != self.image_dims {
            let (gw, gh) = img.dims();
            return Err(CorrFadError::DimensionMismatch {
                expected_w: self.image_dims.0,
                expected_h: self.image_dims.1,
                got_w: gw,
                got_h: gh,
            });
        }
        let pre = preprocess(img)?;
        let spectrum = forward_dft(&pad_bottom_right(&pre, self.canvas)?);

        let responses: Vec<Option<ScoredPeak<T>>> = self
            .freqs
            .par_iter()
            .map(|freq| {
                let product = spectrum.mul(freq).expect("prepared dims match");
                let surface = CorrelationSurface::from_image(inverse_dft(&product), (0, 0));
                self.score_surface(&surface)
            })
            .collect();

        let mut detections = Vec::new();
        for (index, response) in responses.into_iter().enumerate() {
            let Some((score, center)) = response else {
                continue;
            };
            let meta = &self.bank.manifest().cells[index];
            if meta.template_w as usize > self.image_dims.0
                || meta.template_h as usize > self.image_dims.1
            {
                // The detection rectangle could never fit inside the image.
                continue;
            }
            let rect = center_rect(
                center,
                meta.template_w as i64,
                meta.template_h as i64,
                self.image_dims,
            );
            detections.push(Detection {
                rect,
                score: score.psr.as_f64(),
                filter: filter_id(self.bank, index),
                backend: Backend::FrequencyPsr,
            });
        }
        finish_ranking(detections, k)
    }

    /// PSR and peak of one response surface, restricted to the image region
    /// minus a half-template border (excludes circular-wrap artifacts).
    /// `None` marks a degenerate response (surface too small or flat).
    fn score_surface(&self, surface: &CorrelationSurface<T>) -> Option<ScoredPeak<T>> {
        let (iw, ih) = self.image_dims;
        // Border from the largest template so every filter competes on the
        // same search region.
        let (bx, by) = self.search_border();
        if iw <= 2 * bx || ih <= 2 * by {
            return None;
        }
        let region = surface.crop_rect(bx, by, iw - 2 * bx, ih - 2 * by).ok()?;
        let score = psr(&region).ok()?;
        if !score.psr.is_finite() {
            return None;
        }
        let center = region.to_source(score.peak_xy.0, score.peak_xy.1);
        Some((score, center))
    }

    fn search_border(&self) -> (usize, usize) {
        let mut bx = 0usize;
        let mut by = 0usize;
        for meta in &self.bank.manifest().cells {
            bx = bx.max(meta.template_w as usize / 2);
            by = by.max(meta.template_h as usize / 2);
        }
        let (iw, ih) = self.image_dims;
        // Never erase the whole search region on small images.
        (bx.min(iw.saturating_sub(8) / 2), by.min(ih.saturating_sub(8) / 2))
    }
}

/// Runs every bank filter against the image and returns the top `k`
/// detections in descending score order.
///
/// Degenerate per-filter responses (flat surfaces, templates larger than
/// the image) are skipped; if every filter is degenerate the distinct
/// no-response error is returned.
pub fn detect<T: Float>(
    img: &Image<T>,
    bank: &FilterBank<T>,
    backend: Backend,
    k: usize,
) -> Result<Vec<Detection>> {
    match backend {
        Backend::FrequencyPsr => PreparedBank::new(bank, img.dims())?.detect(img, k),
        Backend::SpatialNcc => detect_ncc(img, bank, k),
    }
}

fn detect_ncc<T: Float>(img: &Image<T>, bank: &FilterBank<T>, k: usize) -> Result<Vec<Detection>> {
    if bank.is_empty() {
        return Err(CorrFadError::EmptyBank);
    }
    if k == 0 {
        return Err(CorrFadError::InvalidParameter(
            "k must be at least 1".into(),
        ));
    }
    let (iw, ih) = img.dims();
    let responses: Vec<Option<Detection>> = bank
        .templates()
        .par_iter()
        .enumerate()
        .map(|(index, template)| {
            let (tw, th) = template.dims();
            if tw >= iw || th >= ih {
                return None;
            }
            let surface = spatial_ncc(img, template).ok()?;
            let (px, py, value) = find_peak(&surface);
            if !value.is_finite() {
                return None;
            }
            let (sx, sy) = surface.to_source(px, py);
            Some(Detection {
                rect: FaceRect {
                    x: sx,
                    y: sy,
                    w: tw as i64,
                    h: th as i64,
                },
                score: value.as_f64(),
                filter: filter_id(bank, index),
                backend: Backend::SpatialNcc,
            })
        })
        .collect();
    finish_ranking(responses.into_iter().flatten().collect(), k)
}

fn filter_id<T: Float>(bank: &FilterBank<T>, index: usize) -> FilterId {
    let meta = &bank.manifest().cells[index];
    FilterId {
        index,
        octave: meta.octave,
        pose: meta.pose,
    }
}

/// Face-center peak -> top-left rectangle of the template extent, clamped
/// into the image.
fn center_rect(center: (i64, i64), tw: i64, th: i64, dims: (usize, usize)) -> FaceRect {
    FaceRect {
        x: center.0 - tw / 2,
        y: center.1 - th / 2,
        w: tw,
        h: th,
    }
    .clamp_into(dims.0, dims.1)
}

/// Descending score; ties go to the lower octave, then pose order, then
/// bank index, so rankings are fully deterministic.
fn rank_order(a: &Detection, b: &Detection) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.filter.octave.total_cmp(&b.filter.octave))
        .then(a.filter.pose.cmp(&b.filter.pose))
        .then(a.filter.index.cmp(&b.filter.index))
}

fn finish_ranking(mut detections: Vec<Detection>, k: usize) -> Result<Vec<Detection>> {
    if detections.is_empty() {
        return Err(CorrFadError::NoResponse);
    }
    detections.sort_unstable_by(rank_order);
    detections.truncate(k);
    Ok(detections)
}

/// Picks the winning filter among per-filter scores: the highest
/// peak-to-sidelobe ratio, ties broken toward the lower octave then pose
/// order. Returns an index into `responses`.
pub fn max_psr_select<T: Float>(responses: &[(FilterId, PsrScore<T>)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (id, score)) in responses.iter().enumerate() {
        let better = match best {
            None => true,
            Some(j) => {
                let (bid, bscore) = &responses[j];
                match score.psr.partial_cmp(&bscore.psr) {
                    Some(std::cmp::Ordering::Greater) => true,
                    Some(std::cmp::Ordering::Equal) => match id.octave.partial_cmp(&bid.octave) {
                        Some(std::cmp::Ordering::Less) => true,
                        Some(std::cmp::Ordering::Equal) => id.pose < bid.pose,
                        _ => false,
                    },
                    _ => false,
                }
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::{build_bank, BankParams, GridSpec, TrainingSample};
    use crate::synth::test_frame_iod;

    fn psr_score(psr: f64, xy: (usize, usize)) -> PsrScore<f64> {
        PsrScore {
            peak_value: psr,
            peak_xy: xy,
            mean: 0.0,
            sigma: 1.0,
            psr,
        }
    }

    fn fid(index: usize, octave: f64, pose: PoseBin) -> FilterId {
        FilterId {
            index,
            octave,
            pose,
        }
    }

    #[test]
    fn max_psr_single_response() {
        let responses = vec![(fid(0, 5.0, PoseBin::Frontal), psr_score(4.0, (1, 1)))];
        assert_eq!(max_psr_select(&responses), Some(0));
    }

    #[test]
    fn max_psr_tie_prefers_lower_octave() {
        let responses = vec![
            (fid(0, 6.0, PoseBin::Frontal), psr_score(5.0, (0, 0))),
            (fid(1, 5.0, PoseBin::Frontal), psr_score(5.0, (0, 0))),
        ];
        assert_eq!(max_psr_select(&responses), Some(1));
    }

    #[test]
    fn max_psr_tie_prefers_pose_order() {
        let responses = vec![
            (fid(0, 5.0, PoseBin::Right), psr_score(5.0, (0, 0))),
            (fid(1, 5.0, PoseBin::Left), psr_score(5.0, (0, 0))),
            (fid(2, 5.0, PoseBin::Frontal), psr_score(5.0, (0, 0))),
        ];
        assert_eq!(max_psr_select(&responses), Some(1));
    }

    #[test]
    fn max_psr_matches_exhaustive_argmax() {
        let mut state = 123u64;
        let mut r = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let responses: Vec<(FilterId, PsrScore<f64>)> = (0..39)
            .map(|i| {
                (
                    fid(i, 4.0 + 0.25 * (i / 3) as f64, PoseBin::ALL[i % 3]),
                    psr_score(20.0 * r(), (i, i)),
                )
            })
            .collect();
        let best = max_psr_select(&responses).unwrap();
        let expected = responses
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.psr.partial_cmp(&b.1 .1.psr).unwrap())
            .unwrap()
            .0;
        assert_eq!(best, expected);
    }

    fn tiny_bank(seed: u64) -> crate::bank::FilterBank<f64> {
        let grid = GridSpec {
            octaves: vec![4.0],
            poses: vec![PoseBin::Frontal],
        };
        let samples = (0..4).map(|i| {
            let (image, annotation) = test_frame_iod(96, 96, seed + i, 16.0);
            Ok::<_, CorrFadError>(TrainingSample {
                image,
                annotation,
                pose_degrees: None,
            })
        });
        build_bank(samples, &grid, &BankParams::default()).unwrap()
    }

    #[test]
    fn detect_finds_planted_face() {
        let bank = tiny_bank(100);
        let (img, ann) = test_frame_iod(96, 96, 999, 16.0);
        for backend in [Backend::FrequencyPsr, Backend::SpatialNcc] {
            let dets = detect(&img, &bank, backend, 1).unwrap();
            assert_eq!(dets.len(), 1);
            let d = &dets[0];
            let (cx, cy) = ann.center();
            let rcx = d.rect.x + d.rect.w / 2;
            let rcy = d.rect.y + d.rect.h / 2;
            assert!(
                (rcx as f64 - cx).abs() <= 4.0 && (rcy as f64 - cy).abs() <= 4.0,
                "{backend:?}: rect center ({rcx},{rcy}) vs face ({cx},{cy})"
            );
        }
    }

    #[test]
    fn detect_k_one_is_head_of_full_ranking() {
        let bank = tiny_bank(200);
        let (img, _) = test_frame_iod(96, 96, 4242, 16.0);
        for backend in [Backend::FrequencyPsr, Backend::SpatialNcc] {
            let top = detect(&img, &bank, backend, 1).unwrap();
            let all = detect(&img, &bank, backend, bank.len()).unwrap();
            assert_eq!(top[0], all[0]);
        }
    }

    #[test]
    fn detect_scores_non_increasing() {
        let bank = tiny_bank(300);
        let (img, _) = test_frame_iod(96, 96, 77, 16.0);
        let dets = detect(&img, &bank, Backend::FrequencyPsr, bank.len()).unwrap();
        for pair in dets.windows(2) {
            assert!(pair[0].score >= pair[1].score);
        }
    }

    #[test]
    fn detect_is_deterministic() {
        let bank = tiny_bank(400);
        let (img, _) = test_frame_iod(96, 96, 55, 16.0);
        let a = detect(&img, &bank, Backend::FrequencyPsr, bank.len()).unwrap();
        let b = detect(&img, &bank, Backend::FrequencyPsr, bank.len()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn brightness_scaling_preserves_winner() {
        let bank = tiny_bank(500);
        let (img, _) = test_frame_iod(96, 96, 31, 16.0);
        for backend in [Backend::SpatialNcc, Backend::FrequencyPsr] {
            let base = detect(&img, &bank, backend, 1).unwrap();
            for k in [0.5, 2.0] {
                let scaled = img.map(|p| p * k);
                let got = detect(&scaled, &bank, backend, 1).unwrap();
                assert_eq!(got[0].filter.index, base[0].filter.index, "{backend:?} x{k}");
                assert_eq!(got[0].rect, base[0].rect, "{backend:?} x{k}");
            }
        }
    }

    #[test]
    fn degenerate_image_yields_distinct_error() {
        let bank = tiny_bank(600);
        let img = crate::image::Image::<f64>::filled(96, 96, 0.5).unwrap();
        match detect(&img, &bank, Backend::FrequencyPsr, 1) {
            Err(CorrFadError::DegenerateInput(_)) => {}
            other => panic!("expected degenerate input, got {other:?}"),
        }
        // A flat image is also degenerate for NCC scoring: every window has
        // equal response, which still produces a peak; force the true
        // no-response path with an image smaller than the template instead.
        let tiny = crate::image::Image::<f64>::filled(8, 8, 0.5).unwrap();
        match detect(&tiny, &bank, Backend::SpatialNcc, 1) {
            Err(CorrFadError::NoResponse) => {}
            other => panic!("expected no-response, got {other:?}"),
        }
    }

    #[test]
    fn rect_clamped_inside_image() {
        let bank = tiny_bank(700);
        let (img, _) = test_frame_iod(96, 96, 88, 16.0);
        let dets = detect(&img, &bank, Backend::FrequencyPsr, bank.len()).unwrap();
        for d in &dets {
            assert!(d.rect.x >= 0 && d.rect.y >= 0);
            assert!(d.rect.x + d.rect.w <= 96 && d.rect.y + d.rect.h <= 96);
        }
    }
}

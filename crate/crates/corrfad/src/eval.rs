//! Experiment harnesses: overlap and localization metrics, rank-1
//! evaluation, scale-sensitivity sweeps, cumulative filter-count curves, and
//! the seeded random-placement baseline.
//!
//! Accuracy aggregates are exact rationals (integer hits over integer
//! totals, divided once); per-image work is order-independent and merged by
//! scene index, so every harness is deterministic end to end.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::{EyeAnnotation, FaceRect};
use crate::bank::FilterBank;
use crate::detector::{detect, Backend, Detection, PreparedBank};
use crate::error::{CorrFadError, Result};
use crate::float::Float;
use crate::image::Image;
use crate::matching::find_peak;
use crate::mosse::MosseFilter;
use crate::synth::derive_seed;

/// Rectangle-overlap flavor. The 25% criterion is stated as "overlap
/// between the two rectangles", which both of these satisfy; reports record
/// which one was used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapMode {
    #[default]
    Iou,
    IntersectionOverTruth,
}

/// Overlap mode plus decision threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapCriterion {
    pub mode: OverlapMode,
    pub threshold: f64,
}

impl Default for OverlapCriterion {
    fn default() -> Self {
        Self {
            mode: OverlapMode::Iou,
            threshold: 0.25,
        }
    }
}

impl OverlapCriterion {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(CorrFadError::InvalidParameter(format!(
                "overlap threshold must lie in (0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    pub fn is_hit(&self, detected: &FaceRect, truth: &FaceRect) -> bool {
        rect_overlap(detected, truth, self.mode) >= self.threshold
    }
}

/// Overlap of `a` against truth `b`: intersection over union, or
/// intersection over the truth area.
pub fn rect_overlap(a: &FaceRect, b: &FaceRect, mode: OverlapMode) -> f64 {
    let inter = a.intersection_area(b);
    match mode {
        OverlapMode::Iou => {
            let union = a.area() + b.area() - inter;
            inter as f64 / union as f64
        }
        OverlapMode::IntersectionOverTruth => inter as f64 / b.area() as f64,
    }
}

/// Localization success rule for peak-based experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalizationRule {
    /// Euclidean distance to the eye midpoint at most 5 pixels (inclusive).
    Within5Px,
    /// Both |dx| and |dy| at most 10% of the interocular width.
    Within10PctIod,
}

/// Whether a predicted peak localizes the face under the given rule.
pub fn localization_hit(peak: (f64, f64), annotation: &EyeAnnotation, rule: LocalizationRule) -> bool {
    let (cx, cy) = annotation.center();
    let dx = peak.0 - cx;
    let dy = peak.1 - cy;
    match rule {
        LocalizationRule::Within5Px => (dx * dx + dy * dy).sqrt() <= 5.0,
        LocalizationRule::Within10PctIod => {
            let tol = 0.1 * annotation.interocular();
            dx.abs() <= tol && dy.abs() <= tol
        }
    }
}

/// One evaluation image with its ground truth.
#[derive(Debug, Clone)]
pub struct TestScene<T> {
    pub id: String,
    pub image: Image<T>,
    pub annotation: EyeAnnotation,
    pub truth: FaceRect,
}

/// Per-image outcome stored in reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub truth: FaceRect,
    pub detection: Option<Detection>,
    pub overlap: f64,
    pub hit: bool,
}

/// Rank-1 evaluation outcome: per-image records plus the exact aggregate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// Coordinate convention note carried by every report: detections are
    /// top-left rectangles of template extent (frequency peaks are face
    /// centers converted by subtracting half the template size).
    pub convention: String,
    pub backend: Backend,
    pub criterion: OverlapCriterion,
    pub hits: u64,
    pub total: u64,
    pub accuracy: f64,
    pub records: Vec<ImageRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub(crate) const RECT_CONVENTION: &str =
    "rect = top-left + template extent; frequency peaks are face centers shifted by half the template";

/// Rank-1 detection rate over a test set: each image keeps its best-scoring
/// detection and hits when it overlaps the truth at the criterion.
pub fn evaluate_detection<T: Float>(
    scenes: &[TestScene<T>],
    bank: &FilterBank<T>,
    backend: Backend,
    criterion: OverlapCriterion,
) -> Result<ExperimentReport> {
    criterion.validate()?;
    if scenes.is_empty() {
        return Err(CorrFadError::EmptyTestSet { context: None });
    }
    let ranked = ranked_detections(scenes, bank, backend, 1)?;
    let mut records = Vec::with_capacity(scenes.len());
    let mut hits = 0u64;
    for (scene, dets) in scenes.iter().zip(ranked) {
        let detection = dets.into_iter().next();
        let overlap = detection
            .as_ref()
            .map(|d| rect_overlap(&d.rect, &scene.truth, criterion.mode))
            .unwrap_or(0.0);
        let hit = detection
            .as_ref()
            .map(|d| criterion.is_hit(&d.rect, &scene.truth))
            .unwrap_or(false);
        hits += hit as u64;
        records.push(ImageRecord {
            id: scene.id.clone(),
            truth: scene.truth,
            detection,
            overlap,
            hit,
        });
    }
    let total = scenes.len() as u64;
    Ok(ExperimentReport {
        convention: RECT_CONVENTION.into(),
        backend,
        criterion,
        hits,
        total,
        accuracy: hits as f64 / total as f64,
        records,
        config: None,
        config_hash: None,
        seed: None,
    })
}

/// Full per-image rankings, grouped internally by image dimensions so the
/// frequency back end prepares each canvas once. `NoResponse` images yield
/// empty rankings.
fn ranked_detections<T: Float>(
    scenes: &[TestScene<T>],
    bank: &FilterBank<T>,
    backend: Backend,
    k: usize,
) -> Result<Vec<Vec<Detection>>> {
    if bank.is_empty() {
        return Err(CorrFadError::EmptyBank);
    }
    let mut by_dims: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, s) in scenes.iter().enumerate() {
        by_dims.entry(s.image.dims()).or_default().push(i);
    }
    let mut out: Vec<Vec<Detection>> = vec![Vec::new(); scenes.len()];
    for (dims, indices) in by_dims {
        match backend {
            Backend::FrequencyPsr => {
                let prepared = PreparedBank::new(bank, dims)?;
                let results: Vec<(usize, Result<Vec<Detection>>)> = indices
                    .par_iter()
                    .map(|&i| (i, prepared.detect(&scenes[i].image, k)))
                    .collect();
                for (i, r) in results {
                    out[i] = flatten_no_response(r)?;
                }
            }
            Backend::SpatialNcc => {
                let results: Vec<(usize, Result<Vec<Detection>>)> = indices
                    .par_iter()
                    .map(|&i| (i, detect(&scenes[i].image, bank, backend, k)))
                    .collect();
                for (i, r) in results {
                    out[i] = flatten_no_response(r)?;
                }
            }
        }
    }
    Ok(out)
}

fn flatten_no_response(r: Result<Vec<Detection>>) -> Result<Vec<Detection>> {
    match r {
        Ok(d) => Ok(d),
        Err(CorrFadError::NoResponse) => Ok(Vec::new()),
        Err(e) => Err(e),
    }
}

/// Accuracy as a function of how many top-ranked filters are consulted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeCurve {
    /// `accuracy[k-1]` = fraction of images where any of the top-k
    /// detections overlaps the truth.
    pub accuracy: Vec<f64>,
    pub hits: Vec<u64>,
    pub total: u64,
}

impl CumulativeCurve {
    fn from_first_hit_ranks(ranks: &[Option<usize>], bank_len: usize) -> Self {
        let total = ranks.len() as u64;
        let mut hits = vec![0u64; bank_len];
        for rank in ranks.iter().flatten() {
            for h in hits.iter_mut().skip(*rank) {
                *h += 1;
            }
        }
        let accuracy = hits.iter().map(|&h| h as f64 / total as f64).collect();
        Self {
            accuracy,
            hits,
            total,
        }
    }

    /// Writes `k,hits,total,accuracy` rows.
    pub fn to_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "k,hits,total,accuracy")?;
        for (i, (&h, &a)) in self.hits.iter().zip(&self.accuracy).enumerate() {
            writeln!(w, "{},{},{},{}", i + 1, h, self.total, a)?;
        }
        Ok(())
    }
}

/// Accuracy against the number of consulted filters: an image counts at
/// rank k if any of its k best-scoring detections overlaps the truth.
pub fn cumulative_curve<T: Float>(
    scenes: &[TestScene<T>],
    bank: &FilterBank<T>,
    backend: Backend,
    criterion: OverlapCriterion,
) -> Result<CumulativeCurve> {
    criterion.validate()?;
    if scenes.is_empty() {
        return Err(CorrFadError::EmptyTestSet { context: None });
    }
    let ranked = ranked_detections(scenes, bank, backend, bank.len())?;
    let ranks: Vec<Option<usize>> = scenes
        .iter()
        .zip(&ranked)
        .map(|(scene, dets)| {
            dets.iter()
                .position(|d| criterion.is_hit(&d.rect, &scene.truth))
        })
        .collect();
    Ok(CumulativeCurve::from_first_hit_ranks(&ranks, bank.len()))
}

/// Uniform random top-left placement for a `rect_dims` rectangle inside an
/// image; the chance-level counterpart of a correlation peak.
pub fn random_placement(
    rng: &mut impl Rng,
    image_dims: (usize, usize),
    rect_dims: (i64, i64),
) -> FaceRect {
    let max_x = (image_dims.0 as i64 - rect_dims.0).max(0);
    let max_y = (image_dims.1 as i64 - rect_dims.1).max(0);
    FaceRect {
        x: rng.random_range(0..=max_x),
        y: rng.random_range(0..=max_y),
        w: rect_dims.0,
        h: rect_dims.1,
    }
}

/// Chance-level cumulative curve: per image, the bank is randomly ordered
/// and each filter's rectangle is dropped at a uniformly random valid
/// position. Reproducible from the seed regardless of scheduling.
pub fn random_baseline<T: Float>(
    scenes: &[TestScene<T>],
    bank: &FilterBank<T>,
    criterion: OverlapCriterion,
    seed: u64,
) -> Result<CumulativeCurve> {
    criterion.validate()?;
    if bank.is_empty() {
        return Err(CorrFadError::EmptyBank);
    }
    if scenes.is_empty() {
        return Err(CorrFadError::EmptyTestSet { context: None });
    }
    let template_dims: Vec<(i64, i64)> = bank
        .manifest()
        .cells
        .iter()
        .map(|c| (c.template_w as i64, c.template_h as i64))
        .collect();
    let ranks: Vec<Option<usize>> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, scene)| {
            let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 0x52_414e44, i as u64));
            let mut order: Vec<usize> = (0..bank.len()).collect();
            order.shuffle(&mut rng);
            let dims = scene.image.dims();
            order
                .iter()
                .map(|&f| random_placement(&mut rng, dims, template_dims[f]))
                .position(|rect| criterion.is_hit(&rect, &scene.truth))
        })
        .collect();
    Ok(CumulativeCurve::from_first_hit_ranks(&ranks, bank.len()))
}

/// A provider of test scenes at a requested octave, for scale sweeps.
/// Implementations either render at the target scale or downsample stored
/// images (never upsample).
pub trait SweepSource<T> {
    fn test_set(&mut self, octave: f64) -> Result<Vec<TestScene<T>>>;
}

/// Scale-sweep configuration: `steps` points on each side of the center
/// octave, `step` octaves apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub half_range: f64,
    pub step: f64,
    pub rule: LocalizationRule,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            half_range: 0.5,
            step: 0.05,
            rule: LocalizationRule::Within10PctIod,
        }
    }
}

impl SweepConfig {
    /// The octave ladder centered on `center`: 21 points for the default
    /// half-octave range at 0.05 steps.
    pub fn octaves(&self, center: f64) -> Vec<f64> {
        let steps = (self.half_range / self.step).round() as i64;
        (-steps..=steps)
            .map(|i| center + i as f64 * self.step)
            .collect()
    }
}

/// One sweep measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub octave: f64,
    pub hits: u64,
    pub total: u64,
    pub accuracy: f64,
}

/// Writes `octave,hits,total,accuracy` rows.
pub fn sweep_to_csv(points: &[SweepPoint], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "octave,hits,total,accuracy")?;
    for p in points {
        writeln!(w, "{},{},{},{}", p.octave, p.hits, p.total, p.accuracy)?;
    }
    Ok(())
}

/// Localization accuracy of one filter across test sets whose face scale
/// walks around the filter's training octave.
///
/// Each scene is scored by the frequency-path response peak (the predicted
/// face center) against the localization rule; wrap-around borders of half
/// the nominal interocular width are excluded from the peak search.
pub fn scale_sweep<T: Float>(
    filter: &MosseFilter<T>,
    source: &mut dyn SweepSource<T>,
    config: &SweepConfig,
) -> Result<Vec<SweepPoint>> {
    let octaves = config.octaves(filter.octave());
    let mut points = Vec::with_capacity(octaves.len());
    for octave in octaves {
        let scenes = source.test_set(octave)?;
        if scenes.is_empty() {
            return Err(CorrFadError::EmptyTestSet {
                context: Some(format!("sweep octave {octave}")),
            });
        }
        let hits: u64 = scenes
            .par_iter()
            .map(|scene| {
                localization_peak(&scene.image, filter)
                    .map(|peak| config.rule.hit_for(peak, &scene.annotation) as u64)
                    .unwrap_or(0)
            })
            .sum();
        let total = scenes.len() as u64;
        points.push(SweepPoint {
            octave,
            hits,
            total,
            accuracy: hits as f64 / total as f64,
        });
    }
    Ok(points)
}

impl LocalizationRule {
    fn hit_for(self, peak: (f64, f64), annotation: &EyeAnnotation) -> bool {
        localization_hit(peak, annotation, self)
    }
}

/// Sweep source that rescales a stored test set to each target octave.
/// Downscale-only (bilinear): construction rejects any sweep range that
/// would require upsampling one of the base images.
pub struct ResampleSweepSource<T> {
    base: Vec<TestScene<T>>,
}

impl<T: Float> ResampleSweepSource<T> {
    pub fn new(base: Vec<TestScene<T>>, max_octave: f64) -> Result<Self> {
        if base.is_empty() {
            return Err(CorrFadError::EmptyTestSet {
                context: Some("resample sweep base".into()),
            });
        }
        for scene in &base {
            if scene.annotation.octave() < max_octave {
                return Err(CorrFadError::ConfigConflict(format!(
                    "sweep to octave {max_octave} would upsample {} (octave {:.3})",
                    scene.id,
                    scene.annotation.octave()
                )));
            }
        }
        Ok(Self { base })
    }
}

impl<T: Float> SweepSource<T> for ResampleSweepSource<T> {
    fn test_set(&mut self, octave: f64) -> Result<Vec<TestScene<T>>> {
        let target_iod = octave.exp2();
        self.base
            .iter()
            .map(|scene| {
                let factor = target_iod / scene.annotation.interocular();
                if factor > 1.0 {
                    return Err(CorrFadError::ConfigConflict(format!(
                        "octave {octave} would upsample {}",
                        scene.id
                    )));
                }
                let (w, h) = scene.image.dims();
                let nw = ((w as f64 * factor).round() as usize).max(2);
                let nh = ((h as f64 * factor).round() as usize).max(2);
                let image = scene.image.resize_down(nw, nh)?;
                // Pixel-center mapping, matching the resampler.
                let fx = nw as f64 / w as f64;
                let fy = nh as f64 / h as f64;
                let remap = |(x, y): (f64, f64)| ((x + 0.5) * fx - 0.5, (y + 0.5) * fy - 0.5);
                let annotation = EyeAnnotation::new(
                    remap(scene.annotation.left_eye),
                    remap(scene.annotation.right_eye),
                )?;
                let truth =
                    crate::synth::truth_rect(&annotation, &crate::bank::CropGeometry::default())?;
                Ok(TestScene {
                    id: scene.id.clone(),
                    image,
                    annotation,
                    truth,
                })
            })
            .collect()
    }
}

/// Frequency-path peak of one filter on one image, with a
/// half-interocular-width border excluded; `None` when degenerate.
pub fn localization_peak<T: Float>(image: &Image<T>, filter: &MosseFilter<T>) -> Option<(f64, f64)> {
    let surface = crate::matching::freq_correlate(image, filter).ok()?;
    let border = (filter.interocular() / 2.0).round() as usize;
    let (w, h) = image.dims();
    let bx = border.min(w.saturating_sub(4) / 2);
    let by = border.min(h.saturating_sub(4) / 2);
    let region = surface.crop_rect(bx, by, w - 2 * bx, h - 2 * by).ok()?;
    let (px, py, value) = find_peak(&region);
    if !value.is_finite() {
        return None;
    }
    let (sx, sy) = region.to_source(px, py);
    Some((sx as f64, sy as f64))
}

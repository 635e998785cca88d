//! Scale x pose filter banks.
//!
//! A bank holds one trained filter per grid cell plus a face template
//! cropped from each filter's spatial form, covering a range of interocular
//! scales (quarter-octave steps by default) and three yaw bins.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{CorrFadError, Result};
use crate::float::Float;
use crate::image::Image;
use crate::mosse::{finalize, EpsilonSpec, MosseAccumulator, MosseFilter};
use crate::annotation::EyeAnnotation;

/// Yaw bin. Boundaries: left is `< -12` degrees, frontal is `[-12, +12]`,
/// right is `> +12`. The derived order (`Left < Frontal < Right`) is the
/// tie-break order used during selection.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum PoseBin {
    Left,
    Frontal,
    Right,
}

impl PoseBin {
    pub const ALL: [PoseBin; 3] = [PoseBin::Left, PoseBin::Frontal, PoseBin::Right];

    pub fn from_degrees(degrees: f64) -> PoseBin {
        if degrees < -12.0 {
            PoseBin::Left
        } else if degrees > 12.0 {
            PoseBin::Right
        } else {
            PoseBin::Frontal
        }
    }
}

/// The scale/pose lattice a bank covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Cell centers as log2(interocular pixels), ascending.
    pub octaves: Vec<f64>,
    /// Pose bins, in tie-break order.
    pub poses: Vec<PoseBin>,
}

impl GridSpec {
    /// The default production grid: quarter-octave scales from octave 4.0
    /// through 7.0 (13 scales) crossed with all three poses, 39 cells.
    pub fn default_39() -> Self {
        let octaves = (0..13).map(|i| 4.0 + 0.25 * i as f64).collect();
        Self {
            octaves,
            poses: PoseBin::ALL.to_vec(),
        }
    }

    /// Single-cell grid, for focused experiments.
    pub fn single(octave: f64, pose: PoseBin) -> Self {
        Self {
            octaves: vec![octave],
            poses: vec![pose],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.octaves.is_empty() || self.poses.is_empty() {
            return Err(CorrFadError::InvalidParameter(
                "grid needs at least one octave and one pose".into(),
            ));
        }
        if !self.octaves.windows(2).all(|w| w[0] < w[1]) {
            return Err(CorrFadError::InvalidParameter(
                "grid octaves must be strictly ascending".into(),
            ));
        }
        if self.octaves.iter().any(|o| !(3.0..=7.5).contains(o)) {
            return Err(CorrFadError::InvalidParameter(
                "grid octaves must lie in [3.0, 7.5]".into(),
            ));
        }
        let mut poses = self.poses.clone();
        poses.dedup();
        if poses.len() != self.poses.len() {
            return Err(CorrFadError::InvalidParameter(
                "grid poses contain duplicates".into(),
            ));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.octaves.len() * self.poses.len()
    }

    /// Index of the nearest grid octave; exact midpoints round toward the
    /// lower octave.
    pub fn nearest_octave_index(&self, octave: f64) -> usize {
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for (i, &o) in self.octaves.iter().enumerate() {
            let d = (octave - o).abs();
            if d < best_dist {
                best_dist = d;
                best = i;
            }
        }
        best
    }

    /// Index of a pose bin within this grid, if present.
    pub fn pose_index(&self, pose: PoseBin) -> Option<usize> {
        self.poses.iter().position(|&p| p == pose)
    }

    /// Flat cell index for (octave index, pose index); octave-major.
    pub fn cell_index(&self, octave_idx: usize, pose_idx: usize) -> usize {
        octave_idx * self.poses.len() + pose_idx
    }

    /// (octave, pose) of a flat cell index.
    pub fn cell(&self, index: usize) -> (f64, PoseBin) {
        let p = self.poses.len();
        (self.octaves[index / p], self.poses[index % p])
    }
}

/// Template crop geometry relative to the cell's nominal interocular width:
/// the rectangle spans `center ± half_width_iods * iod` horizontally and
/// `center ± half_height_iods * iod` vertically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropGeometry {
    pub half_width_iods: f64,
    pub half_height_iods: f64,
}

impl Default for CropGeometry {
    fn default() -> Self {
        // Covers eyebrows to chin with margin on real heads.
        Self {
            half_width_iods: 1.0,
            half_height_iods: 1.25,
        }
    }
}

impl CropGeometry {
    /// Half extents in pixels at a given interocular width.
    pub fn half_extents(&self, interocular: f64) -> (i64, i64) {
        (
            (self.half_width_iods * interocular).round() as i64,
            (self.half_height_iods * interocular).round() as i64,
        )
    }

    /// Full rectangle extent in pixels at a given interocular width.
    pub fn extents(&self, interocular: f64) -> (i64, i64) {
        let (hw, hh) = self.half_extents(interocular);
        (2 * hw + 1, 2 * hh + 1)
    }
}

/// Training parameters shared by every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankParams {
    /// Goal Gaussian width in pixels.
    pub sigma: f64,
    /// Denominator regularization.
    pub epsilon: EpsilonSpec,
    /// Template crop geometry.
    pub crop: CropGeometry,
}

impl Default for BankParams {
    fn default() -> Self {
        Self {
            sigma: 2.0,
            epsilon: EpsilonSpec::default(),
            crop: CropGeometry::default(),
        }
    }
}

/// One annotated training frame.
#[derive(Debug, Clone)]
pub struct TrainingSample<T> {
    pub image: Image<T>,
    pub annotation: EyeAnnotation,
    /// Yaw in degrees when known; unknown poses bin as frontal.
    pub pose_degrees: Option<f64>,
}

impl<T> TrainingSample<T> {
    pub fn pose_bin(&self) -> PoseBin {
        self.pose_degrees
            .map(PoseBin::from_degrees)
            .unwrap_or(PoseBin::Frontal)
    }
}

/// Per-cell bookkeeping stored alongside the payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMeta {
    pub octave: f64,
    pub pose: PoseBin,
    pub train_count: u64,
    pub filter_w: u32,
    pub filter_h: u32,
    pub template_w: u32,
    pub template_h: u32,
}

/// Bank-level metadata: the grid, the training parameters, per-cell counts,
/// and provenance hashes for artifact pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankManifest {
    pub grid: GridSpec,
    pub params: BankParams,
    pub cells: Vec<CellMeta>,
    /// Samples whose pose bin is absent from the grid (not trained on).
    pub ignored_samples: u64,
    /// Hash of the producing configuration, if built through the CLI.
    #[serde(default)]
    pub config_hash: Option<String>,
    /// Hash of the corpus the bank was trained on, if known.
    #[serde(default)]
    pub corpus_hash: Option<String>,
}

/// An ordered set of trained filters plus their cropped face templates, one
/// per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank<T> {
    filters: Vec<MosseFilter<T>>,
    templates: Vec<Image<T>>,
    manifest: BankManifest,
}

impl<T: Float> FilterBank<T> {
    pub fn from_parts(
        filters: Vec<MosseFilter<T>>,
        templates: Vec<Image<T>>,
        manifest: BankManifest,
    ) -> Result<Self> {
        if filters.len() != templates.len() || filters.len() != manifest.cells.len() {
            return Err(CorrFadError::InvalidParameter(format!(
                "bank parts disagree: {} filters, {} templates, {} cells",
                filters.len(),
                templates.len(),
                manifest.cells.len()
            )));
        }
        Ok(Self {
            filters,
            templates,
            manifest,
        })
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn filters(&self) -> &[MosseFilter<T>] {
        &self.filters
    }

    pub fn templates(&self) -> &[Image<T>] {
        &self.templates
    }

    pub fn manifest(&self) -> &BankManifest {
        &self.manifest
    }

    pub fn manifest_mut(&mut self) -> &mut BankManifest {
        &mut self.manifest
    }
}

/// Trains one filter per grid cell from a stream of annotated samples.
///
/// Samples are binned to the nearest grid octave (by log2 interocular
/// distance; midpoints round toward the lower octave) and to their pose bin.
/// Every cell must receive at least one sample; the first empty cell in
/// (octave, pose) order is reported otherwise. Templates are cropped from
/// the centered spatial filters using the manifest crop geometry with the
/// cell's nominal interocular width.
pub fn build_bank<T: Float, E: Into<CorrFadError>>(
    samples: impl IntoIterator<Item = std::result::Result<TrainingSample<T>, E>>,
    grid: &GridSpec,
    params: &BankParams,
) -> Result<FilterBank<T>> {
    grid.validate()?;
    if params.sigma <= 0.0 {
        return Err(CorrFadError::InvalidParameter(format!(
            "sigma must be positive, got {}",
            params.sigma
        )));
    }

    let mut accumulators: HashMap<usize, MosseAccumulator<T>> = HashMap::new();
    let mut ignored = 0u64;
    for sample in samples {
        let sample = sample.map_err(Into::into)?;
        let Some(pose_idx) = grid.pose_index(sample.pose_bin()) else {
            ignored += 1;
            continue;
        };
        let octave_idx = grid.nearest_octave_index(sample.annotation.octave());
        let cell = grid.cell_index(octave_idx, pose_idx);
        let (w, h) = sample.image.dims();
        let acc = accumulators
            .entry(cell)
            .or_insert_with(|| MosseAccumulator::new(w, h));
        acc.accumulate(&sample.image, &sample.annotation, params.sigma)?;
    }

    let mut filters = Vec::with_capacity(grid.cell_count());
    let mut templates = Vec::with_capacity(grid.cell_count());
    let mut cells = Vec::with_capacity(grid.cell_count());
    for index in 0..grid.cell_count() {
        let (octave, pose) = grid.cell(index);
        let acc = accumulators
            .get(&index)
            .ok_or(CorrFadError::EmptyCell { octave, pose })?;
        let epsilon = params.epsilon.resolve(acc);
        let filter = finalize(acc, epsilon, octave, pose)?;
        let template = crop_template(&filter, &params.crop)?;
        let (fw, fh) = filter.dims();
        let (tw, th) = template.dims();
        cells.push(CellMeta {
            octave,
            pose,
            train_count: filter.train_count(),
            filter_w: fw as u32,
            filter_h: fh as u32,
            template_w: tw as u32,
            template_h: th as u32,
        });
        filters.push(filter);
        templates.push(template);
    }

    FilterBank::from_parts(
        filters,
        templates,
        BankManifest {
            grid: grid.clone(),
            params: params.clone(),
            cells,
            ignored_samples: ignored,
            config_hash: None,
            corpus_hash: None,
        },
    )
}

/// Crops the face region out of a trained filter: the centered spatial
/// filter holds the face at the canvas center, and the crop spans the
/// geometry's extent at the filter's nominal interocular width (clipped to
/// the canvas).
pub fn crop_template<T: Float>(
    filter: &MosseFilter<T>,
    crop: &CropGeometry,
) -> Result<Image<T>> {
    let centered = filter.spatial_centered();
    let (w, h) = centered.dims();
    let (cx, cy) = (w as i64 / 2, h as i64 / 2);
    let (hw, hh) = crop.half_extents(filter.interocular());
    let x0 = (cx - hw).max(0);
    let y0 = (cy - hh).max(0);
    let x1 = (cx + hw).min(w as i64 - 1);
    let y1 = (cy + hh).min(h as i64 - 1);
    centered.crop(
        x0 as usize,
        y0 as usize,
        (x1 - x0 + 1) as usize,
        (y1 - y0 + 1) as usize,
    )
}

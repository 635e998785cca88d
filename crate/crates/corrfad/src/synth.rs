//! Deterministic synthetic scene generation.
//!
//! Scenes model a "repeated setting": the background (procedural texture
//! plus a fixed clutter list) is shared across a corpus while identity,
//! scale, pose, lighting, and face placement vary per image. Faces are
//! procedural (elliptical head, eye blobs, brows, nose, mouth bar) — the
//! detector under test keys on correlation structure, not realism.
//!
//! Rendering is a pure function of the spec: all arithmetic runs in `f64`
//! and the result is quantized to the 8-bit grid before conversion to the
//! target scalar, so renders are bit-identical across runs, pick identical
//! gray levels under the `f32` and `f64` pipelines, and write-then-reload
//! round trips are lossless.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::annotation::{
    write_annotations, AnnotationRecord, EyeAnnotation, FaceRect,
};
use crate::bank::CropGeometry;
use crate::error::{CorrFadError, Result};
use crate::float::Float;
use crate::image::Image;
use crate::pgm::save_image;

/// SplitMix64 step; the seed-derivation primitive for per-image streams.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed for (root, stream, index); stable regardless
/// of generation order, so parallel corpus generation is reproducible.
pub fn derive_seed(root: u64, stream: u64, index: u64) -> u64 {
    let mut state = root ^ stream.rotate_left(17) ^ index.rotate_left(41);
    let a = splitmix64(&mut state);
    let b = splitmix64(&mut state);
    a ^ b.rotate_left(32)
}

fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 / (1u64 << 53) as f64
}

/// Axis-aligned clutter object blended into the background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClutterShape {
    pub elliptical: bool,
    /// Center as a fraction of the canvas.
    pub center: (f64, f64),
    /// Half extents as fractions of the canvas.
    pub half: (f64, f64),
    pub intensity: f64,
}

/// Fixed background: a procedural texture id plus a clutter list, shared by
/// every scene in a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSpec {
    /// 0 renders flat mid-gray; other ids select texture phases.
    pub pattern: u32,
    pub clutter: Vec<ClutterShape>,
}

impl BackgroundSpec {
    pub fn flat() -> Self {
        Self {
            pattern: 0,
            clutter: Vec::new(),
        }
    }

    /// Texture plus `count` deterministic clutter objects.
    pub fn textured(pattern: u32, count: usize, seed: u64) -> Self {
        let mut state = seed ^ 0xc1u64.rotate_left(24) ^ pattern as u64;
        let mut r = move || unit(splitmix64(&mut state));
        let clutter = (0..count)
            .map(|i| ClutterShape {
                elliptical: i % 2 == 0,
                center: (0.08 + 0.84 * r(), 0.08 + 0.84 * r()),
                half: (0.02 + 0.09 * r(), 0.02 + 0.09 * r()),
                intensity: 0.25 + 0.55 * r(),
            })
            .collect();
        Self { pattern, clutter }
    }

    fn value(&self, fx: f64, fy: f64) -> f64 {
        if self.pattern == 0 {
            return 0.5;
        }
        let mut state = 0x5eed_0000u64 ^ self.pattern as u64;
        let p1 = unit(splitmix64(&mut state)) * std::f64::consts::TAU;
        let p2 = unit(splitmix64(&mut state)) * std::f64::consts::TAU;
        let p3 = unit(splitmix64(&mut state)) * std::f64::consts::TAU;
        let p4 = unit(splitmix64(&mut state)) * std::f64::consts::TAU;
        let tau = std::f64::consts::TAU;
        0.5 + 0.13
            * (tau * (3.1 * fx + 1.7 * fy) + p1).sin()
            * (tau * (1.3 * fx - 2.3 * fy) + p2).cos()
            + 0.07 * (tau * 5.3 * fx + p3).cos() * (tau * 4.1 * fy + p4).sin()
    }
}

/// Face placement and appearance for one scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceParams {
    /// Distance between eye centers in pixels.
    pub interocular: f64,
    /// Yaw, modeled as horizontal shear plus head offset. Positive turns
    /// the head toward image-right.
    pub pose_degrees: f64,
    /// Eye midpoint in pixel coordinates.
    pub center: (f64, f64),
    /// Selects the proportion set (head/eye/mouth geometry and tones).
    pub identity: u32,
    /// Additive lighting offset applied to face tones.
    pub brightness: f64,
    /// Multiplicative contrast applied to face tones.
    pub contrast: f64,
}

/// Full description of one rendered scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub background: BackgroundSpec,
    pub face: FaceParams,
    /// Additive Gaussian sensor noise (0 disables the noise stream).
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Proportions derived deterministically from an identity id. All are
/// symmetric about the face's vertical axis, so negating the pose mirrors
/// the rendered face exactly.
struct IdentityParams {
    head_rx: f64,
    head_ry: f64,
    head_cy: f64,
    eye_rx: f64,
    eye_ry: f64,
    brow_half_w: f64,
    brow_half_h: f64,
    brow_y: f64,
    nose_half_w: f64,
    nose_half_h: f64,
    nose_y: f64,
    mouth_half_w: f64,
    mouth_half_h: f64,
    mouth_y: f64,
    skin: f64,
    eye_tone: f64,
    brow_tone: f64,
    mouth_tone: f64,
}

impl IdentityParams {
    fn derive(identity: u32, iod: f64) -> Self {
        let mut state = 0xface_0000u64 ^ (identity as u64).rotate_left(13);
        let mut r = move || unit(splitmix64(&mut state));
        let s = iod;
        Self {
            head_rx: (0.68 + 0.08 * r()) * s,
            head_ry: (0.92 + 0.10 * r()) * s,
            head_cy: 0.12 * s,
            eye_rx: (0.11 + 0.04 * r()) * s,
            eye_ry: (0.07 + 0.03 * r()) * s,
            brow_half_w: (0.18 + 0.04 * r()) * s,
            brow_half_h: (0.030 + 0.010 * r()) * s,
            brow_y: -(0.24 + 0.04 * r()) * s,
            nose_half_w: 0.035 * s,
            nose_half_h: (0.10 + 0.04 * r()) * s,
            nose_y: 0.30 * s,
            mouth_half_w: (0.26 + 0.06 * r()) * s,
            mouth_half_h: (0.045 + 0.020 * r()) * s,
            mouth_y: (0.58 + 0.06 * r()) * s,
            skin: 0.66 + 0.10 * r(),
            eye_tone: 0.10 + 0.08 * r(),
            brow_tone: 0.18 + 0.08 * r(),
            mouth_tone: 0.25 + 0.08 * r(),
        }
    }
}

/// Soft-edged ellipse coverage (1 inside, 0 outside, ~1px transition).
fn ellipse_alpha(u: f64, v: f64, cx: f64, cy: f64, rx: f64, ry: f64) -> f64 {
    let du = (u - cx) / rx;
    let dv = (v - cy) / ry;
    let q = (du * du + dv * dv).sqrt();
    let dist = (q - 1.0) * rx.min(ry);
    (0.5 - dist).clamp(0.0, 1.0)
}

/// Soft-edged axis-aligned bar coverage.
fn bar_alpha(u: f64, v: f64, cx: f64, cy: f64, hw: f64, hh: f64) -> f64 {
    let dist = ((u - cx).abs() - hw).max((v - cy).abs() - hh);
    (0.5 - dist).clamp(0.0, 1.0)
}

fn mix(base: f64, tone: f64, alpha: f64) -> f64 {
    base + alpha * (tone - base)
}

/// Ground-truth rectangle for a face: the template crop geometry evaluated
/// at the actual interocular width, centered on the eye midpoint.
pub fn truth_rect(annotation: &EyeAnnotation, crop: &CropGeometry) -> Result<FaceRect> {
    let (hw, hh) = crop.half_extents(annotation.interocular());
    FaceRect::centered(annotation.center(), hw, hh)
}

/// Renders one scene. Returns the frame, the exact eye annotation, and the
/// ground-truth face rectangle (default crop geometry).
///
/// The face writes only pixels inside the truth rectangle plus a 2px
/// margin, so scenes differing only in identity share every background
/// pixel outside that region. The rectangle (with margin) must fit inside
/// the canvas.
pub fn render_scene<T: Float>(spec: &SceneSpec) -> Result<(Image<T>, EyeAnnotation, FaceRect)> {
    let (w, h) = (spec.width, spec.height);
    if w == 0 || h == 0 {
        return Err(CorrFadError::InvalidParameter(
            "scene canvas must be positive".into(),
        ));
    }
    let f = &spec.face;
    if f.interocular <= 0.0 {
        return Err(CorrFadError::InvalidParameter(
            "interocular width must be positive".into(),
        ));
    }
    let (cx, cy) = f.center;
    let annotation = EyeAnnotation::new(
        (cx - f.interocular / 2.0, cy),
        (cx + f.interocular / 2.0, cy),
    )?;
    let rect = truth_rect(&annotation, &CropGeometry::default())?;
    const MARGIN: i64 = 2;
    if rect.x - MARGIN < 0
        || rect.y - MARGIN < 0
        || rect.x + rect.w + MARGIN > w as i64
        || rect.y + rect.h + MARGIN > h as i64
    {
        return Err(CorrFadError::FaceOutOfBounds(format!(
            "rect ({},{}) {}x{} (+{MARGIN}px margin) outside canvas {w}x{h}",
            rect.x, rect.y, rect.w, rect.h
        )));
    }

    // Background.
    let mut pixels = vec![0.0f64; w * h];
    for y in 0..h {
        let fy = y as f64 / h as f64;
        for x in 0..w {
            let fx = x as f64 / w as f64;
            let mut v = spec.background.value(fx, fy);
            for c in &spec.background.clutter {
                let ccx = c.center.0 * w as f64;
                let ccy = c.center.1 * h as f64;
                let chw = c.half.0 * w as f64;
                let chh = c.half.1 * h as f64;
                let a = if c.elliptical {
                    ellipse_alpha(x as f64, y as f64, ccx, ccy, chw, chh)
                } else {
                    bar_alpha(x as f64, y as f64, ccx, ccy, chw, chh)
                };
                v = mix(v, c.intensity, a);
            }
            pixels[y * w + x] = v;
        }
    }

    // Face, confined to the truth rectangle plus margin.
    let id = IdentityParams::derive(f.identity, f.interocular);
    let shear = 0.30 * (f.pose_degrees.to_radians()).tan();
    let head_cx = 0.10 * f.interocular * (f.pose_degrees / 25.0).clamp(-1.0, 1.0);
    let eye_dx = f.interocular / 2.0;
    let tone = |t: f64| -> f64 { (t - 0.5) * f.contrast + 0.5 + f.brightness };

    let x_lo = (rect.x - MARGIN) as usize;
    let x_hi = (rect.x + rect.w + MARGIN) as usize;
    let y_lo = (rect.y - MARGIN) as usize;
    let y_hi = (rect.y + rect.h + MARGIN) as usize;
    for y in y_lo..y_hi {
        let v = y as f64 - cy;
        for x in x_lo..x_hi {
            // Un-shear to face-local coordinates.
            let u = (x as f64 - cx) - shear * v;
            let head = ellipse_alpha(u, v, head_cx, id.head_cy, id.head_rx, id.head_ry);
            if head <= 0.0 {
                continue;
            }
            let mut face = id.skin;
            let brow = bar_alpha(u, v, -eye_dx, id.brow_y, id.brow_half_w, id.brow_half_h)
                .max(bar_alpha(u, v, eye_dx, id.brow_y, id.brow_half_w, id.brow_half_h));
            face = mix(face, id.brow_tone, brow);
            let eyes = ellipse_alpha(u, v, -eye_dx, 0.0, id.eye_rx, id.eye_ry)
                .max(ellipse_alpha(u, v, eye_dx, 0.0, id.eye_rx, id.eye_ry));
            face = mix(face, id.eye_tone, eyes);
            let nose = bar_alpha(u, v, 0.0, id.nose_y, id.nose_half_w, id.nose_half_h);
            face = mix(face, id.skin - 0.14, nose);
            let mouth = bar_alpha(u, v, 0.0, id.mouth_y, id.mouth_half_w, id.mouth_half_h);
            face = mix(face, id.mouth_tone, mouth);
            let idx = y * w + x;
            pixels[idx] = mix(pixels[idx], tone(face), head);
        }
    }

    // Sensor noise over the full frame.
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for p in pixels.iter_mut() {
            let n: f64 = rng.sample(StandardNormal);
            *p += spec.noise_sigma * n;
        }
    }

    // Quantize to the 8-bit grid (so disk round trips are lossless and the
    // render is scalar-type independent).
    let data = pixels
        .into_iter()
        .map(|p| T::of((p.clamp(0.0, 1.0) * 255.0).round() / 255.0))
        .collect();
    Ok((Image::from_vec(w, h, data)?, annotation, rect))
}

/// Distribution a corpus is drawn from, plus the split layout.
/// Fields omitted from a deserialized config fall back to the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub canvas: (usize, usize),
    pub background: BackgroundSpec,
    /// Interocular range in pixels; sampled uniformly in octave
    /// (log2) space.
    pub iod_range: (f64, f64),
    /// Yaw range in degrees, uniform.
    pub pose_range: (f64, f64),
    /// Face centers scatter uniformly within ± this fraction of the canvas
    /// around its center (clamped so the face always fits).
    pub placement_jitter: f64,
    /// Lighting offset range ± on face tones.
    pub brightness_jitter: f64,
    /// Contrast multiplier range on face tones.
    pub contrast_range: (f64, f64),
    pub noise_sigma: f64,
    pub train_identities: Vec<u32>,
    pub test_identities: Vec<u32>,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            canvas: (384, 384),
            background: BackgroundSpec::textured(1, 6, 0xbacc),
            iod_range: (16.0, 32.0),
            pose_range: (-10.0, 10.0),
            placement_jitter: 0.12,
            brightness_jitter: 0.06,
            contrast_range: (0.9, 1.1),
            noise_sigma: 0.01,
            train_identities: (0..128).collect(),
            test_identities: (1000..1036).collect(),
            n_train: 256,
            n_test: 73,
            seed: 7,
        }
    }
}

/// Corpus split selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn stream(self) -> u64 {
        match self {
            Split::Train => 0x7261_494e,
            Split::Test => 0x7465_5374,
        }
    }

    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One generated scene with its ground truth.
#[derive(Debug, Clone)]
pub struct GeneratedScene<T> {
    pub id: String,
    pub spec: SceneSpec,
    pub image: Image<T>,
    pub annotation: EyeAnnotation,
    pub rect: FaceRect,
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(&shared) = self
            .train_identities
            .iter()
            .find(|id| self.test_identities.contains(id))
        {
            return Err(CorrFadError::OverlappingIdentityPools { identity: shared });
        }
        if self.iod_range.0 <= 0.0 || self.iod_range.1 < self.iod_range.0 {
            return Err(CorrFadError::InvalidParameter(
                "interocular range must be positive and ordered".into(),
            ));
        }
        if self.train_identities.is_empty() || self.test_identities.is_empty() {
            return Err(CorrFadError::InvalidParameter(
                "identity pools must be non-empty".into(),
            ));
        }
        Ok(())
    }

    /// Scene spec for one index of one split, a pure function of the corpus
    /// spec.
    pub fn scene_spec(&self, split: Split, index: usize) -> SceneSpec {
        let mut state = derive_seed(self.seed, split.stream(), index as u64);
        let mut r = move || unit(splitmix64(&mut state));

        let (lo, hi) = self.iod_range;
        let octave = lo.log2() + (hi.log2() - lo.log2()) * r();
        let iod = octave.exp2();
        let pose = self.pose_range.0 + (self.pose_range.1 - self.pose_range.0) * r();
        let brightness = self.brightness_jitter * (2.0 * r() - 1.0);
        let contrast = self.contrast_range.0 + (self.contrast_range.1 - self.contrast_range.0) * r();

        let pool = match split {
            Split::Train => &self.train_identities,
            Split::Test => &self.test_identities,
        };
        let identity = pool[index % pool.len()];

        // Placement: jitter around the canvas center, clamped so the truth
        // rectangle plus margin stays inside.
        let (w, h) = self.canvas;
        let crop = CropGeometry::default();
        let (hw, hh) = crop.half_extents(iod);
        let margin = 3.0;
        let (cw, ch) = (w as f64, h as f64);
        let jx = self.placement_jitter * cw * (2.0 * r() - 1.0);
        let jy = self.placement_jitter * ch * (2.0 * r() - 1.0);
        let cx = (cw / 2.0 + jx).clamp(hw as f64 + margin, cw - hw as f64 - margin - 1.0);
        let cy = (ch / 2.0 + jy).clamp(hh as f64 + margin, ch - hh as f64 - margin - 1.0);

        SceneSpec {
            width: w,
            height: h,
            background: self.background.clone(),
            face: FaceParams {
                interocular: iod,
                pose_degrees: pose,
                center: (cx, cy),
                identity,
                brightness,
                contrast,
            },
            noise_sigma: self.noise_sigma,
            seed: derive_seed(self.seed, split.stream() ^ 0x6e01_5e00, index as u64),
        }
    }

    /// Renders a whole split in memory. Scenes render in parallel; each one
    /// seeds its own stream from (seed, split, index), so the result does
    /// not depend on scheduling.
    pub fn render_split<T: Float>(&self, split: Split) -> Result<Vec<GeneratedScene<T>>> {
        use rayon::prelude::*;
        self.validate()?;
        let count = match split {
            Split::Train => self.n_train,
            Split::Test => self.n_test,
        };
        (0..count)
            .into_par_iter()
            .map(|i| {
                let spec = self.scene_spec(split, i);
                let (image, annotation, rect) = render_scene(&spec)?;
                let mut id = String::new();
                let _ = write!(id, "{}/img_{i:05}.pgm", split.dir_name());
                Ok(GeneratedScene {
                    id,
                    spec,
                    image,
                    annotation,
                    rect,
                })
            })
            .collect()
    }
}

/// Corpus manifest written next to the generated files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub spec: CorpusSpec,
    pub train_csv: String,
    pub test_csv: String,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(default)]
    pub config_hash: Option<String>,
}

/// Generates a corpus on disk: PGM frames under `train/` and `test/`,
/// annotation CSVs, and a JSON manifest. Identity pools must be disjoint.
pub fn generate_corpus(spec: &CorpusSpec, out_dir: impl AsRef<Path>) -> Result<CorpusManifest> {
    generate_corpus_hashed(spec, out_dir, None)
}

/// [`generate_corpus`] with a caller-provided config hash embedded in the
/// manifest.
pub fn generate_corpus_hashed(
    spec: &CorpusSpec,
    out_dir: impl AsRef<Path>,
    config_hash: Option<String>,
) -> Result<CorpusManifest> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source: std::io::Error| CorrFadError::Io { path, source }
    };

    for split in [Split::Train, Split::Test] {
        let dir = out_dir.join(split.dir_name());
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let scenes: Vec<GeneratedScene<f64>> = spec.render_split(split)?;
        let mut records = Vec::with_capacity(scenes.len());
        for scene in &scenes {
            save_image(&scene.image, out_dir.join(&scene.id))?;
            records.push(AnnotationRecord {
                path: scene.id.clone(),
                annotation: scene.annotation,
                pose_degrees: Some(scene.spec.face.pose_degrees),
            });
        }
        let csv_path = out_dir.join(format!("{}.csv", split.dir_name()));
        let file = std::fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
        write_annotations(&records, file)?;
    }

    let manifest = CorpusManifest {
        spec: spec.clone(),
        train_csv: "train.csv".into(),
        test_csv: "test.csv".into(),
        n_train: spec.n_train,
        n_test: spec.n_test,
        config_hash,
    };
    let manifest_path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)
        .expect("corpus manifest serializes");
    std::fs::write(&manifest_path, json).map_err(io_err(&manifest_path))?;
    Ok(manifest)
}

impl<T: Float> From<GeneratedScene<T>> for crate::eval::TestScene<T> {
    fn from(scene: GeneratedScene<T>) -> Self {
        Self {
            id: scene.id,
            image: scene.image,
            annotation: scene.annotation,
            truth: scene.rect,
        }
    }
}

/// Renders per-octave test sets for scale sweeps: each requested octave
/// gets `n_per_octave` fresh scenes drawn from the corpus distribution with
/// the interocular width pinned to `2^octave`. No stored images are
/// rescaled, so the no-upsampling constraint is satisfied by construction.
pub struct SynthSweepSource {
    pub base: CorpusSpec,
    pub n_per_octave: usize,
}

impl<T: Float> crate::eval::SweepSource<T> for SynthSweepSource {
    fn test_set(&mut self, octave: f64) -> Result<Vec<crate::eval::TestScene<T>>> {
        let iod = octave.exp2();
        let spec = CorpusSpec {
            iod_range: (iod, iod),
            n_test: self.n_per_octave,
            seed: derive_seed(self.base.seed, 0x53_5745_4550, octave.to_bits()),
            ..self.base.clone()
        };
        Ok(spec
            .render_split::<T>(Split::Test)?
            .into_iter()
            .map(Into::into)
            .collect())
    }
}

/// Deterministic textured frame with a centered face, sized for unit tests.
#[cfg(test)]
pub(crate) fn test_frame<T: Float>(w: usize, h: usize, seed: u64) -> (Image<T>, EyeAnnotation) {
    let iod = (w.min(h) as f64) / 5.0;
    test_frame_iod(w, h, seed, iod)
}

/// Deterministic textured frame with a centered face at a given scale.
#[cfg(test)]
pub(crate) fn test_frame_iod<T: Float>(
    w: usize,
    h: usize,
    seed: u64,
    iod: f64,
) -> (Image<T>, EyeAnnotation) {
    let mut state = seed;
    let jx = (unit(splitmix64(&mut state)) - 0.5) * 0.04 * w as f64;
    let jy = (unit(splitmix64(&mut state)) - 0.5) * 0.04 * h as f64;
    let spec = SceneSpec {
        width: w,
        height: h,
        background: BackgroundSpec::textured(3, 3, 0x7e57),
        face: FaceParams {
            interocular: iod,
            pose_degrees: 0.0,
            center: (w as f64 / 2.0 + jx, h as f64 / 2.0 + jy),
            identity: seed as u32,
            brightness: 0.0,
            contrast: 1.0,
        },
        noise_sigma: 0.015,
        seed,
    };
    let (image, ann, _) = render_scene(&spec).expect("test frame renders");
    (image, ann)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::{find_peak, spatial_ncc_with_mode, NccMode};

    fn base_spec() -> SceneSpec {
        SceneSpec {
            width: 96,
            height: 96,
            background: BackgroundSpec::textured(1, 4, 99),
            face: FaceParams {
                interocular: 20.0,
                pose_degrees: 0.0,
                center: (47.5, 47.5),
                identity: 3,
                brightness: 0.0,
                contrast: 1.0,
            },
            noise_sigma: 0.02,
            seed: 41,
        }
    }

    #[test]
    fn rendering_is_bit_deterministic() {
        let spec = base_spec();
        let (a, ann_a, rect_a) = render_scene::<f64>(&spec).unwrap();
        let (b, ann_b, rect_b) = render_scene::<f64>(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(ann_a, ann_b);
        assert_eq!(rect_a, rect_b);
    }

    #[test]
    fn render_is_scalar_type_independent() {
        let spec = base_spec();
        let (a, _, _) = render_scene::<f64>(&spec).unwrap();
        let (b, _, _) = render_scene::<f32>(&spec).unwrap();
        for (x, y) in a.pixels().iter().zip(b.pixels()) {
            // Same 8-bit gray level under both scalar types.
            assert_eq!((x * 255.0).round() as u8, (y * 255.0).round() as u8);
        }
    }

    #[test]
    fn annotation_matches_requested_geometry() {
        let spec = base_spec();
        let (_, ann, _) = render_scene::<f64>(&spec).unwrap();
        assert_eq!(ann.interocular(), 20.0);
        assert_eq!(ann.center(), (47.5, 47.5));
        assert_eq!(ann.left_eye.1, 47.5);
    }

    #[test]
    fn frontal_centered_face_is_symmetric() {
        let mut spec = base_spec();
        spec.noise_sigma = 0.0;
        spec.face.center = (47.5, 47.5); // mirror-fixed on a 96-wide canvas
        spec.background = BackgroundSpec::flat();
        let (img, _, _) = render_scene::<f64>(&spec).unwrap();
        for y in 0..96 {
            for x in 0..96 {
                assert_eq!(img.get(x, y), img.get(95 - x, y), "at ({x},{y})");
            }
        }
    }

    #[test]
    fn opposite_poses_mirror_exactly() {
        let mut spec = base_spec();
        spec.noise_sigma = 0.0;
        spec.background = BackgroundSpec::flat();
        spec.face.center = (47.5, 47.5);
        spec.face.pose_degrees = 20.0;
        let (plus, ann_plus, _) = render_scene::<f64>(&spec).unwrap();
        spec.face.pose_degrees = -20.0;
        let (minus, ann_minus, _) = render_scene::<f64>(&spec).unwrap();
        for y in 0..96 {
            for x in 0..96 {
                assert_eq!(plus.get(x, y), minus.get(95 - x, y), "at ({x},{y})");
            }
        }
        assert_eq!(ann_plus.left_eye.0, 95.0 - ann_minus.right_eye.0);
        assert_eq!(ann_plus.right_eye.0, 95.0 - ann_minus.left_eye.0);
    }

    #[test]
    fn identity_changes_stay_inside_rect_margin() {
        let mut spec = base_spec();
        spec.noise_sigma = 0.0;
        let (a, _, rect) = render_scene::<f64>(&spec).unwrap();
        spec.face.identity = 77;
        let (b, _, rect_b) = render_scene::<f64>(&spec).unwrap();
        assert_eq!(rect, rect_b);
        for y in 0..96i64 {
            for x in 0..96i64 {
                let inside = x >= rect.x - 2
                    && x < rect.x + rect.w + 2
                    && y >= rect.y - 2
                    && y < rect.y + rect.h + 2;
                if !inside {
                    assert_eq!(
                        a.get(x as usize, y as usize),
                        b.get(x as usize, y as usize),
                        "background changed at ({x},{y})"
                    );
                }
            }
        }
    }

    #[test]
    fn face_must_fit_in_canvas() {
        let mut spec = base_spec();
        spec.face.center = (10.0, 47.5);
        assert!(matches!(
            render_scene::<f64>(&spec),
            Err(CorrFadError::FaceOutOfBounds(_))
        ));
    }

    #[test]
    fn eye_blobs_sit_at_annotated_positions() {
        let mut spec = base_spec();
        spec.noise_sigma = 0.0;
        spec.face.center = (46.25, 48.75); // fractional center
        let (img, ann, _) = render_scene::<f64>(&spec).unwrap();

        // Known eye kernel: the eye ellipse on skin, rendered from the same
        // identity parameters.
        let id = IdentityParams::derive(spec.face.identity, spec.face.interocular);
        let kw = (2.0 * id.eye_rx).ceil() as usize + 5;
        let kh = (2.0 * id.eye_ry).ceil() as usize + 5;
        let mut kernel = Image::<f64>::zeros(kw, kh).unwrap();
        let (kcx, kcy) = ((kw / 2) as f64, (kh / 2) as f64);
        for y in 0..kh {
            for x in 0..kw {
                let a = ellipse_alpha(x as f64, y as f64, kcx, kcy, id.eye_rx, id.eye_ry);
                kernel.set(x, y, mix(id.skin, id.eye_tone, a));
            }
        }

        for eye in [ann.left_eye, ann.right_eye] {
            // Search in a window around the eye.
            let x0 = (eye.0 - 6.0).floor() as usize;
            let y0 = (eye.1 - 6.0).floor() as usize;
            let window = img.crop(x0, y0, kw + 12, kh + 12).unwrap();
            let s = spatial_ncc_with_mode(&window, &kernel, NccMode::MeanSubtracted).unwrap();
            let (px, py, _) = find_peak(&s);
            let found = (
                (x0 + px) as f64 + (kw / 2) as f64,
                (y0 + py) as f64 + (kh / 2) as f64,
            );
            assert!(
                (found.0 - eye.0).abs() <= 0.5 && (found.1 - eye.1).abs() <= 0.5,
                "eye at {eye:?}, found {found:?}"
            );
        }
    }

    #[test]
    fn corpus_identity_pools_must_be_disjoint() {
        let spec = CorpusSpec {
            train_identities: vec![1, 2, 3],
            test_identities: vec![9, 2],
            ..CorpusSpec::default()
        };
        match spec.validate() {
            Err(CorrFadError::OverlappingIdentityPools { identity }) => assert_eq!(identity, 2),
            other => panic!("expected overlap error, got {other:?}"),
        }
    }

    #[test]
    fn corpus_generation_is_deterministic() {
        let spec = CorpusSpec {
            n_train: 4,
            n_test: 2,
            canvas: (128, 128),
            ..CorpusSpec::default()
        };
        let a: Vec<GeneratedScene<f64>> = spec.render_split(Split::Train).unwrap();
        let b: Vec<GeneratedScene<f64>> = spec.render_split(Split::Train).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.image, y.image);
            assert_eq!(x.annotation, y.annotation);
        }
        // Requested interocular range is honored in annotations.
        for scene in &a {
            let iod = scene.annotation.interocular();
            assert!((16.0 - 1e-9..=32.0 + 1e-9).contains(&iod));
            assert!((iod - scene.spec.face.interocular).abs() < 1e-9);
        }
    }

    #[test]
    fn corpus_on_disk_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CorpusSpec {
            n_train: 2,
            n_test: 1,
            canvas: (128, 128),
            noise_sigma: 0.0,
            ..CorpusSpec::default()
        };
        let manifest = generate_corpus(&spec, dir.path()).unwrap();
        assert_eq!(manifest.n_train, 2);

        let recs =
            crate::annotation::read_annotations_file(dir.path().join("train.csv")).unwrap();
        assert_eq!(recs.len(), 2);
        let scenes: Vec<GeneratedScene<f64>> = spec.render_split(Split::Train).unwrap();
        for (rec, scene) in recs.iter().zip(&scenes) {
            assert_eq!(rec.annotation, scene.annotation);
            let img: Image<f64> = crate::pgm::load_image(dir.path().join(&rec.path)).unwrap();
            assert_eq!(img, scene.image);
        }
    }

    #[test]
    fn fixed_iod_request_is_exact() {
        let spec = CorpusSpec {
            iod_range: (64.0, 64.0),
            canvas: (384, 384),
            n_test: 3,
            ..CorpusSpec::default()
        };
        let scenes: Vec<GeneratedScene<f64>> = spec.render_split(Split::Test).unwrap();
        for s in &scenes {
            assert_eq!(s.annotation.interocular(), 64.0);
        }
    }
}

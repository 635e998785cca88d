//! Correlation-filter face detection for repeated settings.
//!
//! This crate trains frequency-domain correlation filters over banks of
//! scales and poses and uses them to detect a single known target class in
//! images captured against a fixed background. It ships the whole
//! experimental loop at desk scale:
//!
//! - [`image`] / [`pgm`] / [`fft`] — the grayscale raster, lossless PGM
//!   I/O, and the 2-D transform everything else builds on;
//! - [`preprocess`] — the log / normalize / cosine-window chain;
//! - [`mosse`] — summed-spectrum filter training (exact single-frame
//!   filters and the regularized training-set average);
//! - [`bank`] / [`bank_io`] — scale x pose filter banks and their on-disk
//!   container;
//! - [`matching`] — frequency correlation, sliding normalized cross
//!   correlation, peak finding, and peak-to-sidelobe scoring;
//! - [`detector`] — ranked face-rectangle detection over a bank;
//! - [`eval`] — detection-rate reports, scale-sensitivity sweeps,
//!   cumulative filter-count curves, and the seeded random baseline;
//! - [`synth`] — the deterministic scene generator that stands in for a
//!   captured corpus.
//!
//! All numeric kernels are generic over the [`Float`] scalar; the `F64`
//! aliases below are the default pipeline, with `F32` variants for
//! bit-exact serialized banks and memory-lean runs.

pub mod annotation;
pub mod bank;
pub mod bank_io;
pub mod detector;
pub mod error;
pub mod eval;
pub mod fft;
pub mod float;
pub mod image;
pub mod matching;
pub mod mosse;
pub mod pgm;
pub mod preprocess;
pub mod synth;

pub use annotation::{AnnotationRecord, EyeAnnotation, FaceRect};
pub use bank::{BankManifest, BankParams, CropGeometry, FilterBank, GridSpec, PoseBin};
pub use bank_io::{load_bank, save_bank};
pub use detector::{detect, Backend, Detection, FilterId};
pub use error::{CorrFadError, Result};
pub use eval::{LocalizationRule, OverlapCriterion, OverlapMode};
pub use float::Float;
pub use image::{gaussian_goal, Image};
pub use matching::{find_peak, freq_correlate, psr, spatial_ncc, CorrelationSurface, NccMode};
pub use mosse::{exact_filter, finalize, EpsilonSpec, MosseAccumulator, MosseFilter};
pub use pgm::{load_image, save_image};
pub use preprocess::preprocess;
pub use synth::{CorpusSpec, SceneSpec};

/// Default-precision pipeline aliases.
pub type ImageF64 = image::Image<f64>;
pub type FrequencyGridF64 = fft::FrequencyGrid<f64>;
pub type CorrelationSurfaceF64 = matching::CorrelationSurface<f64>;
pub type MosseFilterF64 = mosse::MosseFilter<f64>;
pub type FilterBankF64 = bank::FilterBank<f64>;

/// Single-precision aliases (bit-exact with the bank file format).
pub type ImageF32 = image::Image<f32>;
pub type FrequencyGridF32 = fft::FrequencyGrid<f32>;
pub type CorrelationSurfaceF32 = matching::CorrelationSurface<f32>;
pub type MosseFilterF32 = mosse::MosseFilter<f32>;
pub type FilterBankF32 = bank::FilterBank<f32>;

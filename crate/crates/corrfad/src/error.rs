//! Crate-wide error type.

use std::path::PathBuf;

use crate::bank::PoseBin;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CorrFadError>;

/// Every failure mode of the library, each reported distinctly so callers
/// (and the CLI) can map them to stable error classes.
#[derive(Debug, thiserror::Error)]
pub enum CorrFadError {
    /// File does not exist or could not be opened.
    #[error("missing or unreadable file {path}: {source}")]
    MissingFile {
        path: PathBuf,
        source: std::io::Error,
    },

    /// I/O failure while reading or writing a file that was already open.
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// Image file header could not be parsed.
    #[error("malformed image header in {path}: {detail}")]
    MalformedHeader { path: PathBuf, detail: String },

    /// Image file declares a sample depth this crate does not support.
    #[error("unsupported bit depth in {path}: maxval {maxval} (only 1..=255 supported)")]
    UnsupportedBitDepth { path: PathBuf, maxval: u32 },

    /// Pixel payload shorter than the header promises.
    #[error("truncated pixel data in {path}: expected {expected} bytes, found {found}")]
    TruncatedPixels {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    /// Annotation CSV line could not be parsed.
    #[error("bad annotation record at line {line}: {detail}")]
    AnnotationParse { line: u64, detail: String },

    /// Input image carries no usable signal (e.g. constant after the log
    /// transform, so the zero-mean stage leaves a zero-norm image).
    #[error("degenerate input image: {0}")]
    DegenerateInput(String),

    /// Operand dimensions are incompatible.
    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Filter training was asked to finalize an accumulator with no samples.
    #[error("cannot finalize an accumulator holding zero training samples")]
    EmptyAccumulator,

    /// Element-wise division hit a zero denominator bin with no
    /// regularization to absorb it.
    #[error("division-degenerate filter: denominator bin ({x},{y}) is zero and epsilon is 0")]
    DivisionDegenerate { x: usize, y: usize },

    /// Exact-filter construction found a zero spectrum bin.
    #[error("zero DFT bin at ({x},{y}); the exact filter is undefined for this frame")]
    ZeroDftBin { x: usize, y: usize },

    /// A grid cell received no training samples.
    #[error("no training samples for bank cell (octave {octave}, pose {pose:?})")]
    EmptyCell { octave: f64, pose: PoseBin },

    /// Bank file failed structural validation.
    #[error("bank format error in {path}: {detail}")]
    BankFormat { path: PathBuf, detail: String },

    /// Bank file carries an unsupported format version.
    #[error("bank version mismatch in {path}: found {found}, supported {supported}")]
    BankVersion {
        path: PathBuf,
        found: u16,
        supported: u16,
    },

    /// Bank file ends before the manifest-declared payload.
    #[error("truncated bank file {path}: {detail}")]
    BankTruncated { path: PathBuf, detail: String },

    /// Stored checksum does not match the payload.
    #[error("bank checksum failure in {path} for filter {index}")]
    BankChecksum { path: PathBuf, index: usize },

    /// Manifest and payload disagree.
    #[error("bank integrity error in {path}: {detail}")]
    BankIntegrity { path: PathBuf, detail: String },

    /// Template matching preconditions violated.
    #[error("template ({tw}x{th}) must be strictly smaller than the image ({iw}x{ih})")]
    TemplateTooLarge {
        tw: usize,
        th: usize,
        iw: usize,
        ih: usize,
    },

    /// Template has no energy, so normalized correlation is undefined.
    #[error("all-zero template")]
    AllZeroTemplate,

    /// Surface too small for sidelobe statistics.
    #[error("correlation surface has {elements} elements; sidelobe statistics need more than 25")]
    SurfaceTooSmall { elements: usize },

    /// Sidelobe has zero variance, so the peak-to-sidelobe ratio is undefined.
    #[error("degenerate correlation surface: sidelobe standard deviation is zero")]
    DegenerateSurface,

    /// Detection was asked to run an empty bank.
    #[error("filter bank is empty")]
    EmptyBank,

    /// Every filter in the bank produced a degenerate response.
    #[error("no response: every bank filter was degenerate on this image")]
    NoResponse,

    /// An evaluation step has nothing to evaluate.
    #[error("empty test set{}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    EmptyTestSet { context: Option<String> },

    /// Corpus generation was given overlapping identity pools.
    #[error("train and test identity pools overlap (shared identity {identity})")]
    OverlappingIdentityPools { identity: u32 },

    /// Rendering would place the face outside the canvas.
    #[error("face out of bounds: {0}")]
    FaceOutOfBounds(String),

    /// Mutually incompatible configuration, rejected before any work.
    #[error("config conflict: {0}")]
    ConfigConflict(String),
}

impl CorrFadError {
    /// Stable machine-parsable class name, one per failure family.
    pub fn class(&self) -> &'static str {
        use CorrFadError::*;
        match self {
            MissingFile { .. } => "missing-file",
            Io { .. } => "io",
            MalformedHeader { .. } => "malformed-header",
            UnsupportedBitDepth { .. } => "unsupported-bit-depth",
            TruncatedPixels { .. } => "truncated-pixels",
            AnnotationParse { .. } => "annotation-parse",
            DegenerateInput(_) => "degenerate-input",
            DimensionMismatch { .. } => "dimension-mismatch",
            InvalidParameter(_) => "invalid-parameter",
            EmptyAccumulator => "empty-accumulator",
            DivisionDegenerate { .. } => "division-degenerate",
            ZeroDftBin { .. } => "zero-dft-bin",
            EmptyCell { .. } => "empty-cell",
            BankFormat { .. } => "bank-format",
            BankVersion { .. } => "bank-version",
            BankTruncated { .. } => "bank-truncated",
            BankChecksum { .. } => "bank-checksum",
            BankIntegrity { .. } => "bank-integrity",
            TemplateTooLarge { .. } => "template-too-large",
            AllZeroTemplate => "all-zero-template",
            SurfaceTooSmall { .. } => "surface-too-small",
            DegenerateSurface => "degenerate-surface",
            EmptyBank => "empty-bank",
            NoResponse => "no-response",
            EmptyTestSet { .. } => "empty-test-set",
            OverlappingIdentityPools { .. } => "overlapping-identities",
            FaceOutOfBounds(_) => "face-out-of-bounds",
            ConfigConflict(_) => "config-conflict",
        }
    }
}

//! Bank file format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic             4 bytes  "CFAD"
//! format version    u16
//! manifest length   u32
//! manifest          JSON (BankManifest)
//! per filter, in manifest cell order:
//!   width, height   u32, u32           (must match the manifest cell)
//!   spectrum        w*h * (f32 re, f32 im) interleaved
//!   spatial         w*h * f32
//!   template        tw*th * f32        (dims from the manifest cell)
//!   checksum        u32 CRC32 over this filter's payload bytes
//! ```
//!
//! Values are stored as `f32` regardless of the in-memory scalar, so a bank
//! built with the `f32` aliases round-trips bit-exactly and an `f64` bank is
//! stable after one save/load cycle.

use std::fs;
use std::path::Path;

use num_complex::Complex;

use crate::bank::{BankManifest, FilterBank};
use crate::error::{CorrFadError, Result};
use crate::fft::FrequencyGrid;
use crate::float::Float;
use crate::image::Image;
use crate::mosse::MosseFilter;

const MAGIC: &[u8; 4] = b"CFAD";
const VERSION: u16 = 1;

/// Serializes a bank to the `CFAD` container.
pub fn save_bank<T: Float>(bank: &FilterBank<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let manifest_json =
        serde_json::to_vec(bank.manifest()).expect("bank manifest serializes to JSON");

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&manifest_json);

    for (filter, template) in bank.filters().iter().zip(bank.templates()) {
        let mut payload = Vec::new();
        let (w, h) = filter.dims();
        payload.extend_from_slice(&(w as u32).to_le_bytes());
        payload.extend_from_slice(&(h as u32).to_le_bytes());
        for v in filter.freq().values() {
            payload.extend_from_slice(&(v.re.as_f64() as f32).to_le_bytes());
            payload.extend_from_slice(&(v.im.as_f64() as f32).to_le_bytes());
        }
        for &p in filter.spatial().pixels() {
            payload.extend_from_slice(&(p.as_f64() as f32).to_le_bytes());
        }
        for &p in template.pixels() {
            payload.extend_from_slice(&(p.as_f64() as f32).to_le_bytes());
        }
        let crc = crc32fast::hash(&payload);
        out.extend_from_slice(&payload);
        out.extend_from_slice(&crc.to_le_bytes());
    }

    fs::write(path, out).map_err(|source| CorrFadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a bank saved by [`save_bank`], verifying structure, version,
/// per-filter checksums, and manifest/payload agreement.
pub fn load_bank<T: Float>(path: impl AsRef<Path>) -> Result<FilterBank<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| CorrFadError::MissingFile {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = Reader {
        path,
        bytes: &bytes,
        pos: 0,
    };

    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(CorrFadError::BankFormat {
            path: path.to_path_buf(),
            detail: format!("bad magic {magic:02x?}"),
        });
    }
    let version = u16::from_le_bytes(r.take(2, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(CorrFadError::BankVersion {
            path: path.to_path_buf(),
            found: version,
            supported: VERSION,
        });
    }
    let manifest_len =
        u32::from_le_bytes(r.take(4, "manifest length")?.try_into().unwrap()) as usize;
    let manifest_bytes = r.take(manifest_len, "manifest")?;
    let manifest: BankManifest =
        serde_json::from_slice(manifest_bytes).map_err(|e| CorrFadError::BankFormat {
            path: path.to_path_buf(),
            detail: format!("manifest JSON: {e}"),
        })?;
    manifest.grid.validate().map_err(|e| CorrFadError::BankFormat {
        path: path.to_path_buf(),
        detail: format!("manifest grid: {e}"),
    })?;
    if manifest.cells.len() != manifest.grid.cell_count() {
        return Err(CorrFadError::BankIntegrity {
            path: path.to_path_buf(),
            detail: format!(
                "manifest lists {} cells but the grid has {}",
                manifest.cells.len(),
                manifest.grid.cell_count()
            ),
        });
    }

    let mut filters = Vec::with_capacity(manifest.cells.len());
    let mut templates = Vec::with_capacity(manifest.cells.len());
    for (index, cell) in manifest.cells.iter().enumerate() {
        let payload_start = r.pos;
        let w = u32::from_le_bytes(r.take(4, "filter width")?.try_into().unwrap()) as usize;
        let h = u32::from_le_bytes(r.take(4, "filter height")?.try_into().unwrap()) as usize;
        if (w as u32, h as u32) != (cell.filter_w, cell.filter_h) {
            return Err(CorrFadError::BankIntegrity {
                path: path.to_path_buf(),
                detail: format!(
                    "filter {index} payload dims {w}x{h} disagree with manifest {}x{}",
                    cell.filter_w, cell.filter_h
                ),
            });
        }
        let n = w * h;
        let spectrum_bytes = r.take(8 * n, "spectrum")?;
        let spatial_bytes = r.take(4 * n, "spatial image")?;
        let tn = cell.template_w as usize * cell.template_h as usize;
        let template_bytes = r.take(4 * tn, "template")?;
        let payload = &bytes[payload_start..r.pos];
        let stored_crc = u32::from_le_bytes(r.take(4, "checksum")?.try_into().unwrap());
        if crc32fast::hash(payload) != stored_crc {
            return Err(CorrFadError::BankChecksum {
                path: path.to_path_buf(),
                index,
            });
        }

        let spectrum: Vec<Complex<T>> = spectrum_bytes
            .chunks_exact(8)
            .map(|c| {
                Complex::new(
                    T::of(f32::from_le_bytes(c[0..4].try_into().unwrap()) as f64),
                    T::of(f32::from_le_bytes(c[4..8].try_into().unwrap()) as f64),
                )
            })
            .collect();
        let floats = |raw: &[u8]| -> Vec<T> {
            raw.chunks_exact(4)
                .map(|c| T::of(f32::from_le_bytes(c.try_into().unwrap()) as f64))
                .collect()
        };
        let freq = FrequencyGrid::from_vec(w, h, spectrum)?;
        let spatial = Image::from_vec(w, h, floats(spatial_bytes))?;
        let template = Image::from_vec(
            cell.template_w as usize,
            cell.template_h as usize,
            floats(template_bytes),
        )?;
        filters.push(MosseFilter::from_stored(
            freq,
            spatial,
            cell.octave,
            cell.pose,
            cell.train_count,
        ));
        templates.push(template);
    }

    if r.pos != bytes.len() {
        return Err(CorrFadError::BankIntegrity {
            path: path.to_path_buf(),
            detail: format!(
                "{} trailing bytes after the manifest-declared payload",
                bytes.len() - r.pos
            ),
        });
    }
    FilterBank::from_parts(filters, templates, manifest)
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(CorrFadError::BankTruncated {
                path: self.path.to_path_buf(),
                detail: format!(
                    "need {len} bytes for {what} at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ),
            });
        }
        let slice = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }
}

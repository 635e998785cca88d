//! Binary PGM (P5, 8-bit) reader and writer.
//!
//! Pixels are mapped to `[0, 1]` on load by dividing by the header maxval;
//! saving quantizes to the 8-bit grid. Header comments (`#`) are tolerated.

use std::fs;
use std::io::ErrorKind;
use std::path::Path;

use crate::error::{CorrFadError, Result};
use crate::float::Float;
use crate::image::Image;

/// Loads a grayscale image file. Binary PGM (P5) with maxval <= 255 is the
/// supported on-disk format; anything else reports a distinct error.
pub fn load_image<T: Float>(path: impl AsRef<Path>) -> Result<Image<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| {
        if source.kind() == ErrorKind::NotFound {
            CorrFadError::MissingFile {
                path: path.to_path_buf(),
                source,
            }
        } else {
            CorrFadError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    decode(path, &bytes)
}

/// Saves an image as binary PGM (P5, maxval 255). Pixels are clamped to
/// `[0, 1]` and rounded to the nearest of the 256 levels.
pub fn save_image<T: Float>(image: &Image<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.pixels().iter().map(|&p| {
        let v = p.as_f64().clamp(0.0, 1.0);
        (v * 255.0).round() as u8
    }));
    fs::write(path, out).map_err(|source| CorrFadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Snaps pixels to the 8-bit grid used by the PGM writer, so an in-memory
/// image equals its write-then-read round trip exactly.
pub fn quantize_to_u8_grid<T: Float>(image: &Image<T>) -> Image<T> {
    image.map(|p| {
        let v = p.as_f64().clamp(0.0, 1.0);
        T::of((v * 255.0).round() / 255.0)
    })
}

fn decode<T: Float>(path: &Path, bytes: &[u8]) -> Result<Image<T>> {
    let malformed = |detail: &str| CorrFadError::MalformedHeader {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    };

    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(malformed("missing P5 magic"));
    }

    let mut pos = 2usize;
    let mut fields = [0u32; 3]; // width, height, maxval
    for field in fields.iter_mut() {
        pos = skip_separators(bytes, pos);
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(malformed("expected integer header field"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("digits are ascii");
        *field = text
            .parse::<u32>()
            .map_err(|_| malformed("header field out of range"))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(malformed("zero dimension"));
    }
    if maxval == 0 {
        return Err(malformed("maxval must be positive"));
    }
    if maxval > 255 {
        return Err(CorrFadError::UnsupportedBitDepth {
            path: path.to_path_buf(),
            maxval,
        });
    }

    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(malformed("missing separator before pixel data"));
    }
    pos += 1;

    let expected = width as usize * height as usize;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(CorrFadError::TruncatedPixels {
            path: path.to_path_buf(),
            expected,
            found: raster.len(),
        });
    }

    // Division (not reciprocal multiplication) so loaded levels are
    // bit-identical to in-memory k/maxval values.
    let max = maxval as f64;
    let data = raster[..expected]
        .iter()
        .map(|&b| T::of(b as f64 / max))
        .collect();
    Image::from_vec(width as usize, height as usize, data)
}

/// Advances past whitespace and `#` comments (which run to end of line).
fn skip_separators(bytes: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(bytes: &[u8]) -> tempfile::TempPath {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(bytes).unwrap();
        f.into_temp_path()
    }

    #[test]
    fn two_by_two_scales_to_unit_range() {
        let path = write_temp(b"P5\n2 2\n255\n\x00\xff\x80\x40");
        let img: Image<f64> = load_image(&path).unwrap();
        assert_eq!(img.pixels()[0], 0.0);
        assert_eq!(img.pixels()[1], 1.0);
        assert_eq!(img.pixels()[2], 128.0 / 255.0);
        assert_eq!(img.pixels()[3], 64.0 / 255.0);
    }

    #[test]
    fn sixteen_bit_maxval_is_unsupported() {
        let path = write_temp(b"P5\n2 2\n65535\n\x00\x00\x00\x00\x00\x00\x00\x00");
        match load_image::<f64>(&path) {
            Err(CorrFadError::UnsupportedBitDepth { maxval, .. }) => assert_eq!(maxval, 65535),
            other => panic!("expected unsupported bit depth, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_reported_distinctly() {
        match load_image::<f64>("/nonexistent/for/sure.pgm") {
            Err(CorrFadError::MissingFile { .. }) => {}
            other => panic!("expected missing-file, got {other:?}"),
        }
    }

    #[test]
    fn malformed_magic_rejected() {
        let path = write_temp(b"P6\n1 1\n255\n\x00");
        assert!(matches!(
            load_image::<f64>(&path),
            Err(CorrFadError::MalformedHeader { .. })
        ));
    }

    #[test]
    fn truncated_raster_rejected() {
        let path = write_temp(b"P5\n4 4\n255\n\x01\x02");
        assert!(matches!(
            load_image::<f64>(&path),
            Err(CorrFadError::TruncatedPixels { .. })
        ));
    }

    #[test]
    fn header_comments_tolerated() {
        let path = write_temp(b"P5\n# a comment\n2 1 # trailing\n255\n\x10\x20");
        let img: Image<f64> = load_image(&path).unwrap();
        assert_eq!(img.dims(), (2, 1));
        assert_eq!(img.pixels()[0], 16.0 / 255.0);
    }

    #[test]
    fn non_255_maxval_scales() {
        let path = write_temp(b"P5\n1 1\n100\n\x32");
        let img: Image<f64> = load_image(&path).unwrap();
        assert_eq!(img.pixels()[0], 0.5);
    }

    #[test]
    fn save_load_round_trip_is_pixel_identical() {
        let img: Image<f64> = Image::from_vec(
            3,
            2,
            vec![0.0, 1.0, 0.25, 10.0 / 255.0, 254.0 / 255.0, 128.0 / 255.0],
        )
        .unwrap();
        let quantized = quantize_to_u8_grid(&img);
        let path = tempfile::NamedTempFile::new().unwrap().into_temp_path();
        save_image(&quantized, &path).unwrap();
        let loaded: Image<f64> = load_image(&path).unwrap();
        assert_eq!(loaded, quantized);

        // And a second trip is bit-stable.
        save_image(&loaded, &path).unwrap();
        let again: Image<f64> = load_image(&path).unwrap();
        assert_eq!(again, loaded);
    }
}

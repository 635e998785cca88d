//! Ground-truth geometry: eye annotations, face rectangles, and the
//! annotation CSV format
//! (`path,left_x,left_y,right_x,right_y[,pose_degrees]`).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CorrFadError, Result};

/// Eye-center ground truth for one face. `left` is the image-left eye
/// (smaller x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyeAnnotation {
    pub left_eye: (f64, f64),
    pub right_eye: (f64, f64),
}

impl EyeAnnotation {
    pub fn new(left_eye: (f64, f64), right_eye: (f64, f64)) -> Result<Self> {
        let ann = Self {
            left_eye,
            right_eye,
        };
        if ann.interocular() <= 0.0 {
            return Err(CorrFadError::InvalidParameter(
                "eye annotation with coincident eyes".into(),
            ));
        }
        Ok(ann)
    }

    /// Euclidean distance between the eye centers, the scale measure.
    pub fn interocular(&self) -> f64 {
        let dx = self.right_eye.0 - self.left_eye.0;
        let dy = self.right_eye.1 - self.left_eye.1;
        (dx * dx + dy * dy).sqrt()
    }

    /// Face center: the midpoint between the eyes.
    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.left_eye.0 + self.right_eye.0),
            0.5 * (self.left_eye.1 + self.right_eye.1),
        )
    }

    /// Scale as log2 of the interocular distance, so +1 is a doubling.
    pub fn octave(&self) -> f64 {
        self.interocular().log2()
    }
}

/// Axis-aligned face rectangle in source-image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceRect {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl FaceRect {
    pub fn new(x: i64, y: i64, w: i64, h: i64) -> Result<Self> {
        if w <= 0 || h <= 0 {
            return Err(CorrFadError::InvalidParameter(format!(
                "face rectangle must have positive extent, got {w}x{h}"
            )));
        }
        Ok(Self { x, y, w, h })
    }

    /// Rectangle centered at `center` spanning `center ± half_w` and
    /// `center ± half_h` (odd extents, symmetric about the rounded center).
    pub fn centered(center: (f64, f64), half_w: i64, half_h: i64) -> Result<Self> {
        let cx = center.0.round() as i64;
        let cy = center.1.round() as i64;
        Self::new(cx - half_w, cy - half_h, 2 * half_w + 1, 2 * half_h + 1)
    }

    pub fn area(&self) -> i64 {
        self.w * self.h
    }

    pub fn intersection_area(&self, other: &FaceRect) -> i64 {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.w).min(other.x + other.w);
        let y1 = (self.y + self.h).min(other.y + other.h);
        if x1 <= x0 || y1 <= y0 {
            0
        } else {
            (x1 - x0) * (y1 - y0)
        }
    }

    /// Translates the rectangle so it lies inside `width`x`height` where
    /// possible (extent is preserved).
    pub fn clamp_into(&self, width: usize, height: usize) -> FaceRect {
        let max_x = (width as i64 - self.w).max(0);
        let max_y = (height as i64 - self.h).max(0);
        FaceRect {
            x: self.x.clamp(0, max_x),
            y: self.y.clamp(0, max_y),
            w: self.w,
            h: self.h,
        }
    }
}

/// One annotation CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub path: String,
    pub annotation: EyeAnnotation,
    /// Optional yaw in degrees; absent means pose is unknown (treated as
    /// frontal by the pose binning).
    pub pose_degrees: Option<f64>,
}

/// Reads an annotation CSV (one-line header, UTF-8, optional sixth column).
pub fn read_annotations(reader: impl Read) -> Result<Vec<AnnotationRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| CorrFadError::AnnotationParse {
            line: 0,
            detail: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse_err = |detail: String| CorrFadError::AnnotationParse { line, detail };
        if record.len() < 5 {
            return Err(parse_err(format!("expected >= 5 fields, got {}", record.len())));
        }
        let num = |idx: usize| -> Result<f64> {
            record[idx]
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_err(format!("field {idx} is not a number: {:?}", &record[idx])))
        };
        let annotation = EyeAnnotation::new((num(1)?, num(2)?), (num(3)?, num(4)?))?;
        let pose_degrees = if record.len() > 5 && !record[5].trim().is_empty() {
            Some(num(5)?)
        } else {
            None
        };
        out.push(AnnotationRecord {
            path: record[0].to_string(),
            annotation,
            pose_degrees,
        });
    }
    Ok(out)
}

/// Reads an annotation CSV from a file.
pub fn read_annotations_file(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| CorrFadError::MissingFile {
        path: path.to_path_buf(),
        source,
    })?;
    read_annotations(file)
}

/// Writes records in the annotation CSV format (pose column always present).
pub fn write_annotations(records: &[AnnotationRecord], mut writer: impl Write) -> Result<()> {
    let io_err = |source: std::io::Error| CorrFadError::Io {
        path: "<writer>".into(),
        source,
    };
    writeln!(writer, "path,left_x,left_y,right_x,right_y,pose_degrees").map_err(io_err)?;
    for r in records {
        let pose = r.pose_degrees.map(|p| p.to_string()).unwrap_or_default();
        writeln!(
            writer,
            "{},{},{},{},{},{}",
            r.path,
            r.annotation.left_eye.0,
            r.annotation.left_eye.1,
            r.annotation.right_eye.0,
            r.annotation.right_eye.1,
            pose
        )
        .map_err(io_err)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interocular_and_center() {
        let ann = EyeAnnotation::new((10.0, 20.0), (42.0, 20.0)).unwrap();
        assert_eq!(ann.interocular(), 32.0);
        assert_eq!(ann.center(), (26.0, 20.0));
        assert_eq!(ann.octave(), 5.0);
    }

    #[test]
    fn coincident_eyes_rejected() {
        assert!(EyeAnnotation::new((5.0, 5.0), (5.0, 5.0)).is_err());
    }

    #[test]
    fn csv_round_trip_with_and_without_pose() {
        let records = vec![
            AnnotationRecord {
                path: "train/img_0.pgm".into(),
                annotation: EyeAnnotation::new((10.5, 20.25), (40.0, 20.25)).unwrap(),
                pose_degrees: Some(-14.5),
            },
            AnnotationRecord {
                path: "train/img_1.pgm".into(),
                annotation: EyeAnnotation::new((12.0, 22.0), (44.0, 22.0)).unwrap(),
                pose_degrees: None,
            },
        ];
        let mut buf = Vec::new();
        write_annotations(&records, &mut buf).unwrap();
        let parsed = read_annotations(&buf[..]).unwrap();
        assert_eq!(parsed, records);
    }

    #[test]
    fn five_column_csv_parses_without_pose() {
        let csv = "path,left_x,left_y,right_x,right_y\na.pgm,1.0,2.0,9.0,2.0\n";
        let parsed = read_annotations(csv.as_bytes()).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].pose_degrees, None);
        assert_eq!(parsed[0].annotation.interocular(), 8.0);
    }

    #[test]
    fn malformed_row_reports_line() {
        let csv = "path,left_x,left_y,right_x,right_y\na.pgm,1.0,oops,9.0,2.0\n";
        match read_annotations(csv.as_bytes()) {
            Err(CorrFadError::AnnotationParse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rect_intersection_arithmetic() {
        let a = FaceRect::new(0, 0, 10, 10).unwrap();
        let b = FaceRect::new(5, 0, 10, 10).unwrap();
        assert_eq!(a.intersection_area(&b), 50);
        let c = FaceRect::new(20, 20, 3, 3).unwrap();
        assert_eq!(a.intersection_area(&c), 0);
    }

    #[test]
    fn rect_clamping_preserves_extent() {
        let r = FaceRect::new(-5, 97, 20, 10).unwrap();
        let c = r.clamp_into(100, 100);
        assert_eq!((c.x, c.y, c.w, c.h), (0, 90, 20, 10));
    }
}

//! On-disk corpus access shared by the train/detect/eval commands.

use std::path::{Path, PathBuf};

use corrfad::annotation::read_annotations_file;
use corrfad::bank::{CropGeometry, TrainingSample};
use corrfad::eval::TestScene;
use corrfad::pgm::load_image;
use corrfad::synth::{truth_rect, CorpusManifest, Split};
use corrfad::{CorrFadError, Result};

/// Reads `manifest.json` from a corpus directory.
pub fn load_manifest(dir: &Path) -> Result<CorpusManifest> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|source| CorrFadError::MissingFile {
        path: path.clone(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CorrFadError::ConfigConflict(format!(
        "corpus manifest {}: {e}",
        path.display()
    )))
}

fn split_csv(dir: &Path, manifest: &CorpusManifest, split: Split) -> PathBuf {
    match split {
        Split::Train => dir.join(&manifest.train_csv),
        Split::Test => dir.join(&manifest.test_csv),
    }
}

/// Streams the training split as bank-building samples, loading one frame
/// at a time.
pub fn training_samples(
    dir: &Path,
    manifest: &CorpusManifest,
) -> Result<impl Iterator<Item = Result<TrainingSample<f64>>>> {
    let records = read_annotations_file(split_csv(dir, manifest, Split::Train))?;
    let root = dir.to_path_buf();
    Ok(records.into_iter().map(move |rec| {
        let image = load_image(root.join(&rec.path))?;
        Ok(TrainingSample {
            image,
            annotation: rec.annotation,
            pose_degrees: rec.pose_degrees,
        })
    }))
}

/// Loads a whole split as evaluation scenes (truth rectangles recomputed
/// from the annotations with the default crop geometry, matching the
/// generator).
pub fn load_scenes(dir: &Path, manifest: &CorpusManifest, split: Split) -> Result<Vec<TestScene<f64>>> {
    let records = read_annotations_file(split_csv(dir, manifest, split))?;
    records
        .into_iter()
        .map(|rec| {
            let image = load_image(dir.join(&rec.path))?;
            let truth = truth_rect(&rec.annotation, &CropGeometry::default())?;
            Ok(TestScene {
                id: rec.path,
                image,
                annotation: rec.annotation,
                truth,
            })
        })
        .collect()
}

//! `corrfad detect`: ranked detections over a corpus split, as JSON.

use std::path::PathBuf;

use clap::Args;
use corrfad::bank_io::load_bank;
use corrfad::detector::{Backend, Detection};
use corrfad::eval::TestScene;
use corrfad::synth::Split;
use corrfad::{CorrFadError, FilterBank, Result};
use serde::Serialize;

use crate::config::{check_pairing, config_hash};
use crate::corpus;

#[derive(Args)]
pub struct DetectArgs {
    /// Bank file produced by `train`.
    #[arg(long)]
    pub bank: PathBuf,

    /// Corpus directory.
    #[arg(long)]
    pub corpus: PathBuf,

    /// Which split to run.
    #[arg(long, default_value = "test")]
    pub split: String,

    /// Output JSON path.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, value_enum, default_value_t = BackendArg::FrequencyPsr)]
    pub backend: BackendArg,

    /// Detections kept per image.
    #[arg(long, default_value_t = 1)]
    pub k: usize,

    /// Skip the bank/corpus pairing check.
    #[arg(long)]
    pub force: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendArg {
    FrequencyPsr,
    SpatialNcc,
}

impl From<BackendArg> for Backend {
    fn from(value: BackendArg) -> Self {
        match value {
            BackendArg::FrequencyPsr => Backend::FrequencyPsr,
            BackendArg::SpatialNcc => Backend::SpatialNcc,
        }
    }
}

pub fn parse_split(text: &str) -> Result<Split> {
    match text {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        other => Err(CorrFadError::ConfigConflict(format!(
            "unknown split {other:?} (expected train or test)"
        ))),
    }
}

#[derive(Serialize)]
struct ResolvedDetect {
    bank: String,
    corpus: String,
    split: String,
    backend: BackendArg,
    k: usize,
}

#[derive(Serialize)]
struct ImageDetections {
    path: String,
    detections: Vec<Detection>,
}

#[derive(Serialize)]
struct DetectOutput {
    config: serde_json::Value,
    config_hash: String,
    bank_hash: Option<String>,
    corpus_hash: Option<String>,
    images: Vec<ImageDetections>,
}

pub fn run(args: DetectArgs) -> Result<()> {
    let split = parse_split(&args.split)?;
    let bank: FilterBank<f64> = load_bank(&args.bank)?;
    let manifest = corpus::load_manifest(&args.corpus)?;
    check_pairing(
        bank.manifest().corpus_hash.as_deref(),
        manifest.config_hash.as_deref(),
        args.force,
    )?;

    let scenes = corpus::load_scenes(&args.corpus, &manifest, split)?;
    let resolved = ResolvedDetect {
        bank: args.bank.display().to_string(),
        corpus: args.corpus.display().to_string(),
        split: args.split.clone(),
        backend: args.backend,
        k: args.k,
    };
    let config = serde_json::to_value(&resolved).expect("config serializes");
    let hash = config_hash(&config);

    let images = detect_all(&scenes, &bank, args.backend.into(), args.k)?;
    let output = DetectOutput {
        config,
        config_hash: hash,
        bank_hash: bank.manifest().config_hash.clone(),
        corpus_hash: manifest.config_hash.clone(),
        images,
    };
    let json = serde_json::to_string_pretty(&output).expect("output serializes");
    std::fs::write(&args.out, json).map_err(|source| CorrFadError::Io {
        path: args.out.clone(),
        source,
    })?;
    println!("detections for {} images -> {}", scenes.len(), args.out.display());
    Ok(())
}

fn detect_all(
    scenes: &[TestScene<f64>],
    bank: &FilterBank<f64>,
    backend: Backend,
    k: usize,
) -> Result<Vec<ImageDetections>> {
    use corrfad::detector::PreparedBank;
    use std::collections::BTreeMap;

    let flatten = |r: Result<Vec<corrfad::Detection>>| match r {
        Ok(d) => Ok(d),
        Err(CorrFadError::NoResponse) => Ok(Vec::new()),
        Err(e) => Err(e),
    };

    let mut out: Vec<Option<ImageDetections>> = (0..scenes.len()).map(|_| None).collect();
    match backend {
        Backend::FrequencyPsr => {
            // Prepare each distinct canvas once; spectra are shared across
            // all images of that size.
            let mut by_dims: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
            for (i, s) in scenes.iter().enumerate() {
                by_dims.entry(s.image.dims()).or_default().push(i);
            }
            for (dims, indices) in by_dims {
                let prepared = PreparedBank::new(bank, dims)?;
                for i in indices {
                    out[i] = Some(ImageDetections {
                        path: scenes[i].id.clone(),
                        detections: flatten(prepared.detect(&scenes[i].image, k))?,
                    });
                }
            }
        }
        Backend::SpatialNcc => {
            for (i, scene) in scenes.iter().enumerate() {
                out[i] = Some(ImageDetections {
                    path: scene.id.clone(),
                    detections: flatten(corrfad::detect(&scene.image, bank, backend, k))?,
                });
            }
        }
    }
    Ok(out.into_iter().flatten().collect())
}

//! `corrfad train`: bank training from an on-disk corpus.

use std::path::PathBuf;

use clap::Args;
use corrfad::bank::{build_bank, BankParams, CropGeometry};
use corrfad::bank_io::save_bank;
use corrfad::Result;
use serde::{Deserialize, Serialize};

use crate::config::{config_hash, load_toml, parse_epsilon, parse_pair, resolve_grid};
use crate::corpus;

#[derive(Args)]
pub struct TrainArgs {
    /// Corpus directory (as produced by `synth`).
    #[arg(long)]
    pub corpus: PathBuf,

    /// Output bank file.
    #[arg(long)]
    pub out: PathBuf,

    /// Optional TOML training config; flags override file values.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Grid octaves, e.g. "4.0,4.25,4.5" (default: the 39-cell grid).
    #[arg(long)]
    pub octaves: Option<String>,

    /// Grid poses, e.g. "left,frontal,right".
    #[arg(long)]
    pub poses: Option<String>,

    /// Goal Gaussian sigma in pixels.
    #[arg(long)]
    pub sigma: Option<f64>,

    /// Regularization: "mean:<factor>" or "abs:<value>".
    #[arg(long)]
    pub epsilon: Option<String>,

    /// Template crop half extents in interocular widths, e.g. 1.0:1.25.
    #[arg(long)]
    pub crop: Option<String>,
}

/// TOML mirror of the training knobs.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct TrainFileConfig {
    octaves: Option<Vec<f64>>,
    poses: Option<Vec<String>>,
    sigma: Option<f64>,
    epsilon: Option<String>,
    crop: Option<CropGeometry>,
}

/// Fully resolved training config, echoed into the bank manifest hash.
#[derive(Debug, Serialize)]
pub struct ResolvedTrain {
    pub corpus: String,
    pub grid: corrfad::bank::GridSpec,
    pub params: BankParams,
    pub corpus_hash: Option<String>,
}

pub fn run(args: TrainArgs) -> Result<()> {
    let file: TrainFileConfig = match &args.config {
        Some(path) => load_toml(path)?,
        None => TrainFileConfig::default(),
    };

    let octaves_text = args
        .octaves
        .or_else(|| file.octaves.map(|o| join_floats(&o)));
    let poses_text = args.poses.or_else(|| file.poses.map(|p| p.join(",")));
    let grid = resolve_grid(octaves_text.as_deref(), poses_text.as_deref())?;

    let mut params = BankParams::default();
    if let Some(sigma) = args.sigma.or(file.sigma) {
        params.sigma = sigma;
    }
    if let Some(eps) = args.epsilon.as_deref().or(file.epsilon.as_deref()) {
        params.epsilon = parse_epsilon(eps)?;
    }
    if let Some(crop) = &args.crop {
        let (w, h) = parse_pair(crop)?;
        params.crop = CropGeometry {
            half_width_iods: w,
            half_height_iods: h,
        };
    } else if let Some(crop) = file.crop {
        params.crop = crop;
    }

    let manifest = corpus::load_manifest(&args.corpus)?;
    let resolved = ResolvedTrain {
        corpus: args.corpus.display().to_string(),
        grid: grid.clone(),
        params: params.clone(),
        corpus_hash: manifest.config_hash.clone(),
    };
    let hash = config_hash(&resolved);

    let samples = corpus::training_samples(&args.corpus, &manifest)?;
    let mut bank = build_bank(samples, &grid, &params)?;
    bank.manifest_mut().config_hash = Some(hash.clone());
    bank.manifest_mut().corpus_hash = manifest.config_hash.clone();
    save_bank(&bank, &args.out)?;

    let counts: Vec<u64> = bank.manifest().cells.iter().map(|c| c.train_count).collect();
    println!(
        "bank {}: {} filters, per-cell counts {:?}, config {hash}",
        args.out.display(),
        bank.len(),
        counts
    );
    Ok(())
}

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

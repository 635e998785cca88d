//! `corrfad synth`: corpus generation.

use std::path::PathBuf;

use clap::Args;
use corrfad::synth::{generate_corpus_hashed, BackgroundSpec, CorpusSpec};
use corrfad::Result;

use crate::config::{config_hash, load_toml, parse_dims, parse_pair};

/// Corpus distribution flags shared by every command that can synthesize
/// scenes. Values resolve as defaults, then the TOML config file, then
/// flags.
#[derive(Args)]
pub struct CorpusSpecArgs {
    /// Optional TOML corpus spec; flags override file values.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long)]
    pub n_train: Option<usize>,

    #[arg(long)]
    pub n_test: Option<usize>,

    /// Canvas dimensions, e.g. 384x384.
    #[arg(long)]
    pub canvas: Option<String>,

    /// Interocular range in pixels, e.g. 16:32.
    #[arg(long)]
    pub iod: Option<String>,

    /// Pose range in degrees, e.g. -10:10.
    #[arg(long, allow_hyphen_values = true)]
    pub pose_range: Option<String>,

    /// Additive sensor noise sigma.
    #[arg(long)]
    pub noise: Option<f64>,

    /// Background texture id (0 = flat).
    #[arg(long)]
    pub pattern: Option<u32>,

    /// Number of background clutter objects.
    #[arg(long)]
    pub clutter: Option<usize>,

    /// Face placement jitter as a fraction of the canvas.
    #[arg(long)]
    pub placement_jitter: Option<f64>,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Output directory for the corpus.
    #[arg(long)]
    pub out: PathBuf,

    #[command(flatten)]
    pub spec: CorpusSpecArgs,
}

pub fn resolve_spec(args: &CorpusSpecArgs) -> Result<CorpusSpec> {
    let mut spec: CorpusSpec = match &args.config {
        Some(path) => load_toml(path)?,
        None => CorpusSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(n) = args.n_train {
        spec.n_train = n;
    }
    if let Some(n) = args.n_test {
        spec.n_test = n;
    }
    if let Some(canvas) = &args.canvas {
        spec.canvas = parse_dims(canvas)?;
    }
    if let Some(iod) = &args.iod {
        spec.iod_range = parse_pair(iod)?;
    }
    if let Some(pose) = &args.pose_range {
        spec.pose_range = parse_pair(pose)?;
    }
    if let Some(noise) = args.noise {
        spec.noise_sigma = noise;
    }
    if args.pattern.is_some() || args.clutter.is_some() {
        let pattern = args.pattern.unwrap_or(spec.background.pattern);
        let count = args.clutter.unwrap_or(spec.background.clutter.len());
        spec.background = if pattern == 0 && count == 0 {
            BackgroundSpec::flat()
        } else {
            BackgroundSpec::textured(pattern, count, spec.seed ^ 0xbacc)
        };
    }
    if let Some(j) = args.placement_jitter {
        spec.placement_jitter = j;
    }
    Ok(spec)
}

pub fn run(args: SynthArgs) -> Result<()> {
    let spec = resolve_spec(&args.spec)?;
    let hash = config_hash(&spec);
    let manifest = generate_corpus_hashed(&spec, &args.out, Some(hash.clone()))?;
    println!(
        "corpus {}: {} train + {} test frames, config {hash}",
        args.out.display(),
        manifest.n_train,
        manifest.n_test
    );
    Ok(())
}

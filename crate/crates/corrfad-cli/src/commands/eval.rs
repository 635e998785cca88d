//! `corrfad eval`: the experiment harnesses.

use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use corrfad::bank::{build_bank, BankParams, GridSpec, PoseBin};
use corrfad::bank_io::load_bank;
use corrfad::eval::{
    cumulative_curve, evaluate_detection, random_baseline, scale_sweep, sweep_to_csv,
    LocalizationRule, OverlapCriterion, OverlapMode, ResampleSweepSource, SweepConfig, TestScene,
};
use corrfad::synth::{Split, SynthSweepSource};
use corrfad::{Backend, CorrFadError, FilterBank, MosseFilter, Result};
use serde::Serialize;

use crate::commands::detect::{parse_split, BackendArg};
use crate::commands::synth::{resolve_spec, CorpusSpecArgs};
use crate::config::{check_pairing, config_hash};
use crate::corpus;

#[derive(Subcommand)]
pub enum EvalCommand {
    /// Rank-1 detection rate of a bank over a corpus split.
    Baseline(BaselineArgs),
    /// End-to-end repeated-setting experiment: generate (or load) a
    /// fixed-background corpus, train a two-scale bank, and report the
    /// detection rate against the seeded random-placement baseline.
    RepeatedSetting(RepeatedSettingArgs),
    /// Localization accuracy of one filter as the test scale walks around
    /// its training octave.
    ScaleSweep(ScaleSweepArgs),
    /// Accuracy against the number of consulted filters.
    Cumulative(CumulativeArgs),
    /// Chance-level cumulative curve from random filter order and
    /// placement.
    RandomBaseline(RandomBaselineArgs),
}

#[derive(Args)]
pub struct CriterionArgs {
    /// Overlap flavor for hit decisions.
    #[arg(long, value_enum, default_value_t = OverlapArg::Iou)]
    pub overlap: OverlapArg,

    /// Overlap threshold in (0, 1].
    #[arg(long, default_value_t = 0.25)]
    pub threshold: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapArg {
    Iou,
    IntersectionOverTruth,
}

impl CriterionArgs {
    fn criterion(&self) -> OverlapCriterion {
        OverlapCriterion {
            mode: match self.overlap {
                OverlapArg::Iou => OverlapMode::Iou,
                OverlapArg::IntersectionOverTruth => OverlapMode::IntersectionOverTruth,
            },
            threshold: self.threshold,
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let json = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, json).map_err(|source| CorrFadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| CorrFadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// CSV outputs keep their config echo in a `<out>.config.json` sidecar so
/// the curve file stays plot-ready.
fn write_csv_with_sidecar(path: &Path, csv: String, config: &serde_json::Value) -> Result<()> {
    write_text(path, &csv)?;
    let sidecar = path.with_extension(format!(
        "{}config.json",
        path.extension()
            .map(|e| format!("{}.", e.to_string_lossy()))
            .unwrap_or_default()
    ));
    write_json(
        &sidecar,
        &serde_json::json!({ "config": config, "config_hash": config_hash(config) }),
    )
}

// ---------------------------------------------------------------- baseline

#[derive(Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendArg::FrequencyPsr)]
    pub backend: BackendArg,
    #[command(flatten)]
    pub criterion: CriterionArgs,
    #[arg(long)]
    pub force: bool,
}

fn run_baseline(args: BaselineArgs) -> Result<()> {
    let bank: FilterBank<f64> = load_bank(&args.bank)?;
    let manifest = corpus::load_manifest(&args.corpus)?;
    check_pairing(
        bank.manifest().corpus_hash.as_deref(),
        manifest.config_hash.as_deref(),
        args.force,
    )?;
    let scenes = corpus::load_scenes(&args.corpus, &manifest, parse_split(&args.split)?)?;
    let config = serde_json::json!({
        "command": "eval-baseline",
        "bank": args.bank.display().to_string(),
        "corpus": args.corpus.display().to_string(),
        "split": args.split,
        "backend": args.backend,
        "criterion": args.criterion.criterion(),
    });
    let mut report = evaluate_detection(&scenes, &bank, args.backend.into(), args.criterion.criterion())?;
    report.config_hash = Some(config_hash(&config));
    report.config = Some(config);
    write_json(&args.out, &report)?;
    println!(
        "baseline: {}/{} hits ({:.4}) -> {}",
        report.hits,
        report.total,
        report.accuracy,
        args.out.display()
    );
    Ok(())
}

// ------------------------------------------------------- repeated-setting

#[derive(Args)]
pub struct RepeatedSettingArgs {
    /// Existing corpus directory; omitted = generate in memory from the
    /// corpus spec flags below.
    #[arg(long)]
    pub corpus: Option<PathBuf>,

    #[command(flatten)]
    pub spec: CorpusSpecArgs,

    #[arg(long)]
    pub out: PathBuf,

    #[command(flatten)]
    pub criterion: CriterionArgs,

    /// Seed for the random-placement baseline.
    #[arg(long, default_value_t = 1)]
    pub baseline_seed: u64,
}

#[derive(Serialize)]
struct RepeatedSettingReport {
    config: serde_json::Value,
    config_hash: String,
    detection: corrfad::eval::ExperimentReport,
    random_baseline_rank1: f64,
    random_baseline: corrfad::eval::CumulativeCurve,
}

fn run_repeated_setting(args: RepeatedSettingArgs) -> Result<()> {
    let criterion = args.criterion.criterion();
    let (train_scenes, test_scenes, spec_json) = match &args.corpus {
        Some(dir) => {
            let manifest = corpus::load_manifest(dir)?;
            let train = corpus::load_scenes(dir, &manifest, Split::Train)?;
            let test = corpus::load_scenes(dir, &manifest, Split::Test)?;
            (train, test, serde_json::to_value(&manifest.spec).unwrap())
        }
        None => {
            let spec = resolve_spec(&args.spec)?;
            let train: Vec<TestScene<f64>> = spec
                .render_split::<f64>(Split::Train)?
                .into_iter()
                .map(Into::into)
                .collect();
            let test: Vec<TestScene<f64>> = spec
                .render_split::<f64>(Split::Test)?
                .into_iter()
                .map(Into::into)
                .collect();
            (train, test, serde_json::to_value(&spec).unwrap())
        }
    };

    // Two scale cells spanning the observed interocular range, poses read
    // from the data (frontal-only corpora get a frontal-only grid).
    let octave_range = train_scenes
        .iter()
        .map(|s| s.annotation.octave())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| {
            (lo.min(o), hi.max(o))
        });
    let grid = two_scale_grid(octave_range.0, octave_range.1);
    let params = BankParams::default();
    let samples = train_scenes.iter().map(|s| {
        Ok::<_, CorrFadError>(corrfad::bank::TrainingSample {
            image: s.image.clone(),
            annotation: s.annotation,
            pose_degrees: None,
        })
    });
    let bank = build_bank(samples, &grid, &params)?;

    let config = serde_json::json!({
        "command": "eval-repeated-setting",
        "corpus_spec": spec_json,
        "grid": grid,
        "params": params,
        "criterion": criterion,
        "backend": "spatial-ncc",
        "baseline_seed": args.baseline_seed,
    });
    let mut detection = evaluate_detection(&test_scenes, &bank, Backend::SpatialNcc, criterion)?;
    detection.config = None; // carried by the wrapper
    let baseline = random_baseline(&test_scenes, &bank, criterion, args.baseline_seed)?;

    let report = RepeatedSettingReport {
        config_hash: config_hash(&config),
        config,
        random_baseline_rank1: baseline.accuracy[0],
        detection,
        random_baseline: baseline,
    };
    write_json(&args.out, &report)?;
    println!(
        "repeated-setting: detection {:.4} vs random rank-1 {:.4} -> {}",
        report.detection.accuracy,
        report.random_baseline_rank1,
        args.out.display()
    );
    Ok(())
}

/// Two quarter-point scale cells over an octave range: the nearest-octave
/// binning boundary lands on the range center.
fn two_scale_grid(octave_lo: f64, octave_hi: f64) -> GridSpec {
    let span = (octave_hi - octave_lo).max(0.1);
    GridSpec {
        octaves: vec![octave_lo + 0.25 * span, octave_lo + 0.75 * span],
        poses: vec![PoseBin::Frontal],
    }
}

// ------------------------------------------------------------ scale-sweep

#[derive(Args)]
pub struct ScaleSweepArgs {
    /// Bank holding the filter under study.
    #[arg(long)]
    pub bank: PathBuf,

    /// Training octave of the filter to sweep (must match a bank cell).
    #[arg(long)]
    pub octave: f64,

    /// Pose bin of the filter to sweep.
    #[arg(long, default_value = "frontal")]
    pub pose: String,

    /// Existing corpus to downsample per octave; omitted = render fresh
    /// test sets from the corpus spec flags.
    #[arg(long)]
    pub corpus: Option<PathBuf>,

    #[command(flatten)]
    pub spec: CorpusSpecArgs,

    /// Scenes rendered per octave when synthesizing.
    #[arg(long, default_value_t = 40)]
    pub n_per_octave: usize,

    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, value_enum, default_value_t = RuleArg::Within10PctIod)]
    pub rule: RuleArg,

    /// Half range in octaves around the training octave.
    #[arg(long, default_value_t = 0.5)]
    pub half_range: f64,

    /// Step between octaves.
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleArg {
    Within5Px,
    Within10PctIod,
}

impl From<RuleArg> for LocalizationRule {
    fn from(value: RuleArg) -> Self {
        match value {
            RuleArg::Within5Px => LocalizationRule::Within5Px,
            RuleArg::Within10PctIod => LocalizationRule::Within10PctIod,
        }
    }
}

fn find_filter(
    bank: &FilterBank<f64>,
    octave: f64,
    pose: PoseBin,
) -> Result<&MosseFilter<f64>> {
    bank.filters()
        .iter()
        .find(|f| (f.octave() - octave).abs() < 1e-9 && f.pose() == pose)
        .ok_or_else(|| {
            CorrFadError::ConfigConflict(format!(
                "bank has no filter at octave {octave} pose {pose:?}"
            ))
        })
}

fn run_scale_sweep(args: ScaleSweepArgs) -> Result<()> {
    let bank: FilterBank<f64> = load_bank(&args.bank)?;
    let pose = crate::config::parse_poses(&args.pose)?[0];
    let filter = find_filter(&bank, args.octave, pose)?;
    let sweep = SweepConfig {
        half_range: args.half_range,
        step: args.step,
        rule: args.rule.into(),
    };

    let (points, source_json) = match &args.corpus {
        Some(dir) => {
            let manifest = corpus::load_manifest(dir)?;
            let scenes = corpus::load_scenes(dir, &manifest, Split::Test)?;
            let max_octave = args.octave + args.half_range;
            let mut source = ResampleSweepSource::new(scenes, max_octave)?;
            (
                scale_sweep(filter, &mut source, &sweep)?,
                serde_json::json!({ "resampled_corpus": dir.display().to_string() }),
            )
        }
        None => {
            let spec = resolve_spec(&args.spec)?;
            let spec_json = serde_json::to_value(&spec).unwrap();
            let mut source = SynthSweepSource {
                base: spec,
                n_per_octave: args.n_per_octave,
            };
            (scale_sweep(filter, &mut source, &sweep)?, spec_json)
        }
    };

    let config = serde_json::json!({
        "command": "eval-scale-sweep",
        "bank": args.bank.display().to_string(),
        "octave": args.octave,
        "pose": pose,
        "rule": args.rule,
        "half_range": args.half_range,
        "step": args.step,
        "source": source_json,
    });
    let mut csv = Vec::new();
    sweep_to_csv(&points, &mut csv).expect("in-memory write");
    write_csv_with_sidecar(&args.out, String::from_utf8(csv).unwrap(), &config)?;
    let peak = points
        .iter()
        .map(|p| p.accuracy)
        .fold(f64::NEG_INFINITY, f64::max);
    println!(
        "scale sweep: {} points, peak accuracy {peak:.4} -> {}",
        points.len(),
        args.out.display()
    );
    Ok(())
}

// ------------------------------------------------------------- cumulative

#[derive(Args)]
pub struct CumulativeArgs {
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendArg::FrequencyPsr)]
    pub backend: BackendArg,
    #[command(flatten)]
    pub criterion: CriterionArgs,
    #[arg(long)]
    pub force: bool,
}

fn run_cumulative(args: CumulativeArgs) -> Result<()> {
    let bank: FilterBank<f64> = load_bank(&args.bank)?;
    let manifest = corpus::load_manifest(&args.corpus)?;
    check_pairing(
        bank.manifest().corpus_hash.as_deref(),
        manifest.config_hash.as_deref(),
        args.force,
    )?;
    let scenes = corpus::load_scenes(&args.corpus, &manifest, parse_split(&args.split)?)?;
    let curve = cumulative_curve(&scenes, &bank, args.backend.into(), args.criterion.criterion())?;
    let config = serde_json::json!({
        "command": "eval-cumulative",
        "bank": args.bank.display().to_string(),
        "corpus": args.corpus.display().to_string(),
        "split": args.split,
        "backend": args.backend,
        "criterion": args.criterion.criterion(),
    });
    let mut csv = Vec::new();
    curve.to_csv(&mut csv).expect("in-memory write");
    write_csv_with_sidecar(&args.out, String::from_utf8(csv).unwrap(), &config)?;
    println!(
        "cumulative: accuracy[1]={:.4} accuracy[{}]={:.4} -> {}",
        curve.accuracy.first().unwrap(),
        curve.accuracy.len(),
        curve.accuracy.last().unwrap(),
        args.out.display()
    );
    Ok(())
}

// --------------------------------------------------------- random-baseline

#[derive(Args)]
pub struct RandomBaselineArgs {
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub criterion: CriterionArgs,
}

fn run_random_baseline(args: RandomBaselineArgs) -> Result<()> {
    let bank: FilterBank<f64> = load_bank(&args.bank)?;
    let manifest = corpus::load_manifest(&args.corpus)?;
    let scenes = corpus::load_scenes(&args.corpus, &manifest, parse_split(&args.split)?)?;
    let curve = random_baseline(&scenes, &bank, args.criterion.criterion(), args.seed)?;
    let config = serde_json::json!({
        "command": "eval-random-baseline",
        "bank": args.bank.display().to_string(),
        "corpus": args.corpus.display().to_string(),
        "split": args.split,
        "seed": args.seed,
        "criterion": args.criterion.criterion(),
    });
    let mut csv = Vec::new();
    curve.to_csv(&mut csv).expect("in-memory write");
    write_csv_with_sidecar(&args.out, String::from_utf8(csv).unwrap(), &config)?;
    println!(
        "random baseline: accuracy[1]={:.4} accuracy[{}]={:.4} -> {}",
        curve.accuracy.first().unwrap(),
        curve.accuracy.len(),
        curve.accuracy.last().unwrap(),
        args.out.display()
    );
    Ok(())
}

pub fn run(command: EvalCommand) -> Result<()> {
    match command {
        EvalCommand::Baseline(args) => run_baseline(args),
        EvalCommand::RepeatedSetting(args) => run_repeated_setting(args),
        EvalCommand::ScaleSweep(args) => run_scale_sweep(args),
        EvalCommand::Cumulative(args) => run_cumulative(args),
        EvalCommand::RandomBaseline(args) => run_random_baseline(args),
    }
}

//! Config resolution and artifact pairing.
//!
//! Every subcommand resolves its parameters from defaults, then an optional
//! TOML config file, then command-line flags (flags win). The resolved
//! config is serialized into every artifact it produces together with a
//! short hash, so downstream stages can refuse mismatched inputs.

use std::path::Path;

use corrfad::bank::{GridSpec, PoseBin};
use corrfad::mosse::EpsilonSpec;
use corrfad::{CorrFadError, Result};
use sha2::{Digest, Sha256};

/// Short stable hash of a resolved config (or any serializable artifact).
pub fn config_hash<T: serde::Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    let mut hex = String::with_capacity(16);
    for b in &digest[..8] {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

/// Loads a TOML config file into `T`, reporting missing files and parse
/// failures distinctly.
pub fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| CorrFadError::MissingFile {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| CorrFadError::ConfigConflict(format!(
        "config file {}: {e}",
        path.display()
    )))
}

/// Checks artifact pairing: a bank trained on one corpus refuses to
/// evaluate against another unless forced.
pub fn check_pairing(
    bank_corpus_hash: Option<&str>,
    corpus_hash: Option<&str>,
    force: bool,
) -> Result<()> {
    if force {
        return Ok(());
    }
    if let (Some(b), Some(c)) = (bank_corpus_hash, corpus_hash) {
        if b != c {
            return Err(CorrFadError::ConfigConflict(format!(
                "bank was trained on corpus {b} but this corpus hashes to {c} (pass --force to override)"
            )));
        }
    }
    Ok(())
}

/// Parses `"4.0,4.25,4.5"` into a grid octave list.
pub fn parse_octaves(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CorrFadError::ConfigConflict(format!("bad octave value {t:?}")))
        })
        .collect()
}

/// Parses `"left,frontal,right"` into pose bins.
pub fn parse_poses(text: &str) -> Result<Vec<PoseBin>> {
    text.split(',')
        .map(|t| match t.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(PoseBin::Left),
            "frontal" => Ok(PoseBin::Frontal),
            "right" => Ok(PoseBin::Right),
            other => Err(CorrFadError::ConfigConflict(format!(
                "unknown pose bin {other:?} (expected left, frontal, right)"
            ))),
        })
        .collect()
}

/// Builds a grid from optional octave/pose override strings, defaulting to
/// the 39-cell production grid.
pub fn resolve_grid(octaves: Option<&str>, poses: Option<&str>) -> Result<GridSpec> {
    let default = GridSpec::default_39();
    let grid = GridSpec {
        octaves: match octaves {
            Some(o) => parse_octaves(o)?,
            None => default.octaves,
        },
        poses: match poses {
            Some(p) => parse_poses(p)?,
            None => default.poses,
        },
    };
    grid.validate()?;
    Ok(grid)
}

/// Parses `"mean:0.01"` / `"abs:1e-4"` regularization settings.
pub fn parse_epsilon(text: &str) -> Result<EpsilonSpec> {
    let bad = || CorrFadError::ConfigConflict(format!(
        "bad epsilon {text:?} (expected mean:<factor> or abs:<value>)"
    ));
    let (kind, value) = text.split_once(':').ok_or_else(bad)?;
    let value: f64 = value.trim().parse().map_err(|_| bad())?;
    match kind.trim() {
        "mean" => Ok(EpsilonSpec::MeanScaled(value)),
        "abs" => Ok(EpsilonSpec::Absolute(value)),
        _ => Err(bad()),
    }
}

/// Parses `"16:32"`-style numeric pairs.
pub fn parse_pair(text: &str) -> Result<(f64, f64)> {
    let bad = || CorrFadError::ConfigConflict(format!("bad range {text:?} (expected lo:hi)"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    Ok((
        lo.trim().parse().map_err(|_| bad())?,
        hi.trim().parse().map_err(|_| bad())?,
    ))
}

/// Parses `"384x384"`-style dimensions.
pub fn parse_dims(text: &str) -> Result<(usize, usize)> {
    let bad = || CorrFadError::ConfigConflict(format!("bad dimensions {text:?} (expected WxH)"));
    let (w, h) = text.split_once('x').ok_or_else(bad)?;
    Ok((
        w.trim().parse().map_err(|_| bad())?,
        h.trim().parse().map_err(|_| bad())?,
    ))
}

//! Synopsis settings file: `key = value` lines, `#` comments.

use std::fmt::Write as _;
use std::path::Path;

use accuracytrader::dataset::RatingScale;
use accuracytrader::synopsis::SynopsisConfig;
use accuracytrader::Error;

use crate::CliResult;

/// Settings shared by the synopsis-building commands.
#[derive(Clone, Debug, PartialEq)]
pub struct BuildConfig {
    pub synopsis: SynopsisConfig,
    pub scale: RatingScale,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            synopsis: SynopsisConfig {
                compression_ratio: 10.0,
                max_entries: 6,
                ..SynopsisConfig::default()
            },
            scale: RatingScale::default(),
        }
    }
}

pub fn parse_synopsis_config(text: &str, origin: &Path) -> CliResult<BuildConfig> {
    let mut cfg = BuildConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: String| Error::Parse {
            path: origin.to_path_buf(),
            line: idx + 1,
            reason: m,
        };
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| bad("expected `key = value`".into()))?;
        let invalid = || bad(format!("invalid value for `{key}`: {value}"));
        macro_rules! num {
            () => {
                value.parse().map_err(|_| invalid())?
            };
        }
        let s = &mut cfg.synopsis;
        match key {
            "compression_ratio" => s.compression_ratio = num!(),
            "min_entries" => s.min_entries = num!(),
            "max_entries" => s.max_entries = num!(),
            "full_rereduce" => s.full_rereduce = num!(),
            "dims" => s.svd.dims = num!(),
            "iters_per_dim" => s.svd.iters_per_dim = num!(),
            "learning_rate" => s.svd.learning_rate = num!(),
            "regularization" => s.svd.regularization = num!(),
            "svd_seed" => s.svd.seed = num!(),
            "rating_min" => cfg.scale.min = num!(),
            "rating_max" => cfg.scale.max = num!(),
            _ => return Err(bad(format!("unknown key `{key}`")).into()),
        }
    }
    cfg.synopsis.validate()?;
    if !(cfg.scale.min < cfg.scale.max) {
        return Err(Error::Invalid("rating_min must be below rating_max".into()).into());
    }
    Ok(cfg)
}

pub fn load(path: Option<&Path>) -> CliResult<BuildConfig> {
    match path {
        None => Ok(BuildConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            parse_synopsis_config(&text, p)
        }
    }
}

/// Canonical text form, readable by [`parse_synopsis_config`].
pub fn to_text(cfg: &BuildConfig) -> String {
    let s = &cfg.synopsis;
    let mut out = String::new();
    let _ = writeln!(out, "compression_ratio = {}", s.compression_ratio);
    let _ = writeln!(out, "min_entries = {}", s.min_entries);
    let _ = writeln!(out, "max_entries = {}", s.max_entries);
    let _ = writeln!(out, "full_rereduce = {}", s.full_rereduce);
    let _ = writeln!(out, "dims = {}", s.svd.dims);
    let _ = writeln!(out, "iters_per_dim = {}", s.svd.iters_per_dim);
    let _ = writeln!(out, "learning_rate = {}", s.svd.learning_rate);
    let _ = writeln!(out, "regularization = {}", s.svd.regularization);
    let _ = writeln!(out, "svd_seed = {}", s.svd.seed);
    let _ = writeln!(out, "rating_min = {}", cfg.scale.min);
    let _ = writeln!(out, "rating_max = {}", cfg.scale.max);
    out
}

//! Config presets, JSON loading, and flag/environment resolution.

use std::path::Path;

use cpuformer_core::nn::EncoderConfig;
use cpuformer_core::{Error, PartitionParams, Result};
use serde::Deserialize;

pub const ENV_THREADS: &str = "INFER_NUM_THREADS";

/// JSON document: encoder hyperparameters plus the weight seed. Missing
/// keys fall back to the BERT-base values (seed 0).
#[derive(Debug, Deserialize)]
struct ConfigFile {
    #[serde(flatten)]
    cfg: EncoderConfig,
    #[serde(default)]
    seed: u64,
}

/// Resolves `--cfg`: a preset name or a path to a JSON file.
pub fn load_config(spec: &str) -> Result<(EncoderConfig, u64)> {
    match spec {
        "bert-base" => Ok((EncoderConfig::bert_base(), 0)),
        "bert-large" => Ok((EncoderConfig::bert_large(), 0)),
        "distil" => Ok((EncoderConfig::distil(), 0)),
        path => {
            if !Path::new(path).exists() {
                return Err(Error::InvalidArgument(format!(
                    "unknown config '{path}': expected bert-base, bert-large, distil, or a JSON file path"
                )));
            }
            let text = std::fs::read_to_string(path)?;
            let file: ConfigFile = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidArgument(format!("bad config JSON: {e}")))?;
            file.cfg.validate()?;
            Ok((file.cfg, file.seed))
        }
    }
}

/// Thread count resolution order: flag > INFER_NUM_THREADS > 1.
pub fn resolve_threads(flag: Option<usize>) -> usize {
    if let Some(t) = flag {
        return t.max(1);
    }
    std::env::var(ENV_THREADS)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(1)
}

/// Parses `--partition`: baseline, patched, or an explicit bm,bn,bk triple.
pub fn parse_partition(spec: &str) -> Result<PartitionParams> {
    match spec {
        "baseline" => Ok(PartitionParams::baseline()),
        "patched" => Ok(PartitionParams::patched()),
        other => {
            let parts: Vec<&str> = other.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::InvalidArgument(format!(
                    "bad partition '{other}': expected baseline, patched, or bm,bn,bk"
                )));
            }
            let nums: Vec<usize> = parts
                .iter()
                .map(|p| {
                    p.trim().parse::<usize>().map_err(|_| {
                        Error::InvalidArgument(format!("bad partition component '{p}'"))
                    })
                })
                .collect::<Result<_>>()?;
            PartitionParams::new(nums[0], nums[1], nums[2])
        }
    }
}

/// Parses a comma-separated list of positive integers.
pub fn parse_list(spec: &str) -> Result<Vec<usize>> {
    spec.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .ok()
                .filter(|&v| v >= 1)
                .ok_or_else(|| Error::InvalidArgument(format!("bad list element '{p}'")))
        })
        .collect()
}

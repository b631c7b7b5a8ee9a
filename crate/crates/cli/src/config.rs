//! Experiment configuration merging: defaults, then the optional TOML file,
//! then command-line flags.

use serde::Deserialize;

use crate::{CliError, ExperimentOverrides};
use ntmt::{ExperimentConfig, GeneratorKind};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    generator: Option<String>,
    sequences: Option<usize>,
    sequence_bits: Option<usize>,
    blocks: Option<usize>,
    grid: Option<usize>,
    alpha: Option<f64>,
    base_seed: Option<u64>,
    workers: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfigRoot {
    experiment: Option<FileConfig>,
}

fn parse_generator(name: &str) -> Result<GeneratorKind, CliError> {
    match name {
        "mt19937" => Ok(GeneratorKind::Mt19937),
        "aes128_ctr" | "aes128-ctr" => Ok(GeneratorKind::Aes128Ctr),
        other => Err(CliError::Usage(format!(
            "unknown generator {other:?}: expected mt19937 or aes128_ctr"
        ))),
    }
}

/// Resolves the effective configuration for an experiment run.
pub fn resolve(overrides: &ExperimentOverrides) -> Result<ExperimentConfig, CliError> {
    let mut config = ExperimentConfig::default();

    if let Some(path) = &overrides.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
        let root: FileConfigRoot = toml::from_str(&text)
            .map_err(|e| CliError::Data(format!("invalid config {}: {e}", path.display())))?;
        let file = root.experiment.unwrap_or_default();
        if let Some(name) = file.generator {
            config.generator = parse_generator(&name)?;
        }
        if let Some(v) = file.sequences {
            config.sequences = v;
        }
        if let Some(v) = file.sequence_bits {
            config.sequence_bits = v;
        }
        if let Some(v) = file.blocks {
            config.blocks = v;
        }
        if let Some(v) = file.grid {
            config.grid = v;
        }
        if let Some(v) = file.alpha {
            config.alpha = v;
        }
        if let Some(v) = file.base_seed {
            config.base_seed = v;
        }
        if let Some(v) = file.workers {
            config.workers = v;
        }
    }

    if let Some(g) = overrides.generator {
        config.generator = g.into();
    }
    if let Some(v) = overrides.sequences {
        config.sequences = v;
    }
    if let Some(v) = overrides.bits {
        config.sequence_bits = v;
    }
    if let Some(v) = overrides.blocks {
        config.blocks = v;
    }
    if let Some(v) = overrides.grid {
        config.grid = v;
    }
    if let Some(v) = overrides.alpha {
        config.alpha = v;
    }
    if let Some(v) = overrides.seed {
        config.base_seed = v;
    }
    if let Some(v) = overrides.workers {
        config.workers = v;
    }
    Ok(config)
}

use std::path::Path;

use rrid::architecture::ModelConfig;
use rrid::moiresynth::SynthConfig;
use rrid::train_eval::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Contents of a `--config` JSON file. Every section and field is optional.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub synth: SynthConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::usage(format!("config field `{}`: {}", e.path(), e.inner())))?;
        cfg.model.validate()?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| e.context(path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_errors_name_the_path() {
        let e = RunConfig::parse(r#"{"train": {"lr0": "fast"}}"#).unwrap_err();
        assert_eq!(e.code, 2);
        assert!(e.msg.contains("train.lr0"), "{}", e.msg);
        let e = RunConfig::parse(r#"{"model": {"blocks": {"chanels": 3}}}"#).unwrap_err();
        assert!(e.msg.contains("model.blocks"), "{}", e.msg);
        let e = RunConfig::parse(r#"{"model": {"scales": 4}}"#).unwrap_err();
        assert!(e.msg.contains("scales"), "{}", e.msg);
    }

    #[test]
    fn partial_configs_fill_defaults() {
        let c = RunConfig::parse(r#"{"train": {"epochs": 3}}"#).unwrap();
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.model, ModelConfig::toy());
        assert_eq!(RunConfig::parse("{}").unwrap().train, TrainConfig::default());
    }
}

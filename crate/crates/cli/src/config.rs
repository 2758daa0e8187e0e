use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sponsorscope_core::detector::{TokenizerConfig, TrainConfig, VectorizerConfig};
use sponsorscope_core::explainer::{EndpointConfig, PromptRecipe};

/// Optional TOML file passed with `--config`. Every section may be omitted.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub endpoint: EndpointConfig,
    /// Prompt recipe file; the bundled recipe is used when unset.
    pub recipe: Option<PathBuf>,
    /// Completion cache directory; defaults to `<data-dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub tokenizer: TokenizerConfig,
    pub vectorizer: VectorizerConfig,
    pub train: TrainConfig,
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn recipe(&self) -> anyhow::Result<PromptRecipe> {
        match &self.recipe {
            Some(p) => PromptRecipe::load(p).with_context(|| format!("loading recipe {}", p.display())),
            None => Ok(PromptRecipe::default()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_sections_fill_defaults() {
        let c: Config = toml::from_str("[endpoint]\nmodel = \"gpt-4o\"\n[train]\nmax_epochs = 5\n").unwrap();
        assert_eq!(c.endpoint.model, "gpt-4o");
        assert_eq!(c.endpoint.temperature, 0.0);
        assert_eq!(c.train.max_epochs, 5);
        assert_eq!(c.vectorizer, VectorizerConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Config>("endpont = 1").is_err());
    }
}

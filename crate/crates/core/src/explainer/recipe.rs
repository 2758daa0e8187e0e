use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::parse::{parse_explanation, parse_label_line};
use super::ExplainerError;
use crate::corpus::{strip_disclosures, Post};

const DEFAULT_RECIPE: &str = include_str!("../../recipes/default.toml");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub caption: String,
    /// Ideal answer: indicators line, rationale, label line.
    pub explanation: String,
}

/// Prompt ingredients, kept as a human-editable TOML file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecipe {
    pub name: String,
    pub system_instructions: String,
    #[serde(default)]
    pub few_shot_examples: Vec<FewShotExample>,
    pub label_phrasings: Vec<String>,
    #[serde(default)]
    pub positive_bias_clause: String,
}

/// Chat messages sent to the completion endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

impl Prompt {
    pub fn text(&self) -> String {
        format!("{}\n\n{}", self.system, self.user)
    }
}

impl Default for PromptRecipe {
    fn default() -> Self {
        Self::from_toml(DEFAULT_RECIPE).expect("bundled recipe is valid")
    }
}

impl PromptRecipe {
    pub fn from_toml(text: &str) -> Result<Self, ExplainerError> {
        let recipe: Self =
            toml::from_str(text).map_err(|e| ExplainerError::Recipe(e.to_string()))?;
        recipe.validate()?;
        Ok(recipe)
    }

    pub fn to_toml(&self) -> Result<String, ExplainerError> {
        toml::to_string(self).map_err(|e| ExplainerError::Recipe(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ExplainerError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Instructions must ask for indicators and an explanation ahead of the
    /// label, phrasings must be in the label grammar and every example answer
    /// must parse.
    pub fn validate(&self) -> Result<(), ExplainerError> {
        let instr = self.system_instructions.to_lowercase();
        let ind = instr.find("key indicators");
        let label = instr.rfind("label");
        match (ind, label) {
            (Some(i), Some(l)) if i < l => {}
            _ => {
                return Err(ExplainerError::Recipe(
                    "instructions must request key indicators before the label".into(),
                ))
            }
        }
        if self.label_phrasings.is_empty() {
            return Err(ExplainerError::Recipe("no label phrasings".into()));
        }
        for p in &self.label_phrasings {
            if parse_label_line(p).is_none() {
                return Err(ExplainerError::Recipe(format!("unknown label phrasing {p:?}")));
            }
        }
        for (i, ex) in self.few_shot_examples.iter().enumerate() {
            parse_explanation(&ex.explanation, "example").map_err(|e| {
                ExplainerError::Recipe(format!("few-shot example {}: {e}", i + 1))
            })?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form. Any content change, including a
    /// single few-shot example, changes the digest.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("recipe serialises");
        hex::encode(Sha256::digest(&json))
    }
}

/// Builds the prompt for a post. Disclosure hashtags are stripped first so the
/// model sees the same text the classifier was trained on.
pub fn build_prompt(post: &Post, recipe: &PromptRecipe) -> Prompt {
    build_prompt_for_caption(&strip_disclosures(&post.caption), recipe)
}

/// Instructions go in the system message; the few-shot block, the bias clause
/// and the target caption follow in that order in the user message.
pub fn build_prompt_for_caption(caption: &str, recipe: &PromptRecipe) -> Prompt {
    let mut user = String::new();
    if !recipe.few_shot_examples.is_empty() {
        user.push_str("Examples:\n\n");
        for ex in &recipe.few_shot_examples {
            user.push_str("Caption:\n");
            user.push_str(ex.caption.trim());
            user.push_str("\nAnswer:\n");
            user.push_str(ex.explanation.trim());
            user.push_str("\n\n");
        }
    }
    let bias = recipe.positive_bias_clause.trim();
    if !bias.is_empty() {
        user.push_str(bias);
        user.push_str("\n\n");
    }
    user.push_str("Caption:\n");
    user.push_str(caption.trim());
    user.push_str("\nAnswer:");
    Prompt {
        system: recipe.system_instructions.trim().to_string(),
        user,
    }
}

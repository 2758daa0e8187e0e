//! Explanations for sponsored-content judgements: chain-of-thought prompts
//! built from a recipe file, a caching and retrying chat-completion client,
//! a parser for the "Key indicators" answer format and an offline fallback
//! that explains the local classifier's decision instead.

mod client;
mod local;
mod parse;
mod recipe;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{strip_disclosures, Post};
use crate::detector::TrainedDetector;
use crate::Label;

pub use client::{
    cache_key, extract_content, ChatClient, Completion, CompletionCache, CompletionCacheEntry,
    EndpointConfig, API_KEY_ENV,
};
pub use local::{local_explain, DEFAULT_TOP_K};
pub use parse::{parse_explanation, parse_label_line, strip_label_line};
pub use recipe::{build_prompt, build_prompt_for_caption, FewShotExample, Prompt, PromptRecipe};

#[derive(Debug, thiserror::Error)]
pub enum ExplainerError {
    #[error("credential rejected or missing: {0}")]
    Credential(String),
    #[error("transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint answered HTTP {status}")]
    Http { status: u16, body: String },
    #[error("malformed explanation: {0}")]
    Format(String),
    #[error("invalid recipe: {0}")]
    Recipe(String),
    #[error("no explanation available: {0}")]
    Unavailable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Label stated at the end of an explanation. The hedged variants are kept
/// for audit and collapse onto the binary label via [`ImpliedLabel::label`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpliedLabel {
    Sponsored,
    NonSponsored,
    LikelySponsored,
    LikelyNotSponsored,
}

impl ImpliedLabel {
    pub fn label(self) -> Label {
        match self {
            Self::Sponsored | Self::LikelySponsored => Label::Sponsored,
            Self::NonSponsored | Self::LikelyNotSponsored => Label::NonSponsored,
        }
    }

    pub fn phrase(self) -> &'static str {
        match self {
            Self::Sponsored => "Sponsored",
            Self::NonSponsored => "Not sponsored",
            Self::LikelySponsored => "Likely sponsored",
            Self::LikelyNotSponsored => "Likely not sponsored",
        }
    }
}

impl From<Label> for ImpliedLabel {
    fn from(l: Label) -> Self {
        match l {
            Label::Sponsored => Self::Sponsored,
            Label::NonSponsored => Self::NonSponsored,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplanationSource {
    Remote,
    LocalFallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub post_id: String,
    pub key_indicators: Vec<String>,
    pub rationale: String,
    pub implied_label: ImpliedLabel,
    pub source: ExplanationSource,
}

/// Remote explanation only: prompt, completion (cached per post, recipe and
/// model) and parse.
pub async fn explain_remote(
    client: &ChatClient,
    post: &Post,
    recipe: &PromptRecipe,
) -> Result<Explanation, ExplainerError> {
    let prompt = build_prompt(post, recipe);
    let key = cache_key(&post.post_id, &recipe.digest(), client.model());
    let completion = client.complete(&key, &prompt).await?;
    parse_explanation(&completion.content, &post.post_id)
}

/// Tries the remote endpoint and falls back to the local classifier on any
/// remote failure. With neither path available the error says why.
pub async fn explain_post(
    post: &Post,
    recipe: &PromptRecipe,
    client: Option<&ChatClient>,
    local: Option<&TrainedDetector>,
) -> Result<Explanation, ExplainerError> {
    let remote_err = match client {
        Some(c) => match explain_remote(c, post, recipe).await {
            Ok(e) => return Ok(e),
            Err(e) => {
                tracing::warn!(post_id = %post.post_id, error = %e, "remote explanation failed");
                e.to_string()
            }
        },
        None => "no endpoint configured".to_string(),
    };
    match local {
        Some(d) => Ok(d.explain(&post.post_id, &strip_disclosures(&post.caption), DEFAULT_TOP_K)),
        None => Err(ExplainerError::Unavailable(format!(
            "{remote_err}; no local model"
        ))),
    }
}

/// [`explain_post`] over many posts concurrently. The client bounds in-flight
/// requests and rate; results come back in input order.
pub async fn explain_all(
    posts: Vec<Post>,
    recipe: Arc<PromptRecipe>,
    client: Option<Arc<ChatClient>>,
    local: Option<Arc<TrainedDetector>>,
) -> Vec<Result<Explanation, ExplainerError>> {
    let mut set = tokio::task::JoinSet::new();
    let n = posts.len();
    for (i, post) in posts.into_iter().enumerate() {
        let (recipe, client, local) = (recipe.clone(), client.clone(), local.clone());
        set.spawn(async move {
            let r = explain_post(&post, &recipe, client.as_deref(), local.as_deref()).await;
            (i, r)
        });
    }
    let mut out: Vec<Option<Result<Explanation, ExplainerError>>> = (0..n).map(|_| None).collect();
    while let Some(joined) = set.join_next().await {
        let (i, r) = joined.expect("explanation task panicked");
        out[i] = Some(r);
    }
    out.into_iter().map(|r| r.expect("every task reported")).collect()
}

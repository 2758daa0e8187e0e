use std::collections::HashMap;
use std::num::NonZeroU32;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use governor::{DefaultDirectRateLimiter, Quota, RateLimiter};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use tokio::sync::Semaphore;

use super::recipe::Prompt;
use super::ExplainerError;

/// Environment variable the command-line tools read the endpoint credential from.
pub const API_KEY_ENV: &str = "SPONSORSCOPE_API_KEY";

/// Chat-completion endpoint and client behaviour. The credential is passed to
/// [`ChatClient::new`] separately so it never ends up in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub max_in_flight: usize,
    pub requests_per_second: u32,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".to_string(),
            model: "gpt-3.5-turbo".to_string(),
            temperature: 0.0,
            timeout_ms: 60_000,
            max_retries: 4,
            initial_backoff_ms: 500,
            max_backoff_ms: 30_000,
            max_in_flight: 4,
            requests_per_second: 5,
        }
    }
}

/// Content address for a completion: post, recipe digest and model name.
pub fn cache_key(post_id: &str, recipe_digest: &str, model: &str) -> String {
    let mut h = Sha256::new();
    for part in [post_id, recipe_digest, model] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionCacheEntry {
    pub cache_key: String,
    pub raw_response: String,
    pub created_at: DateTime<Utc>,
}

/// One JSON file per key. Writes go through a temporary file and a rename, so
/// readers never observe a partial entry.
#[derive(Debug, Clone)]
pub struct CompletionCache {
    dir: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl CompletionCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, ExplainerError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<CompletionCacheEntry>, ExplainerError> {
        match std::fs::read(self.path(key)) {
            Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn put(&self, entry: &CompletionCacheEntry) -> Result<(), ExplainerError> {
        let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
        let tmp = self
            .dir
            .join(format!(".{}.{}.{n}.tmp", entry.cache_key, std::process::id()));
        std::fs::write(&tmp, serde_json::to_vec_pretty(entry)?)?;
        std::fs::rename(&tmp, self.path(&entry.cache_key))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    /// Response body exactly as received (or as cached).
    pub raw_response: String,
    /// Assistant message text extracted from the body.
    pub content: String,
    pub cached: bool,
}

/// Extracts `choices[0].message.content` from a chat-completion body.
pub fn extract_content(body: &str) -> Result<String, ExplainerError> {
    let v: serde_json::Value = serde_json::from_str(body)
        .map_err(|e| ExplainerError::Format(format!("response is not JSON: {e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| ExplainerError::Format("response has no message content".into()))
}

enum Attempt {
    Done(String),
    Retry(String),
}

/// Retrying, rate-limited chat-completion client with an optional on-disk
/// cache. Safe to share across tasks.
pub struct ChatClient {
    config: EndpointConfig,
    api_key: Option<String>,
    cache: Option<CompletionCache>,
    http: reqwest::Client,
    in_flight: Semaphore,
    limiter: DefaultDirectRateLimiter,
    key_locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    requests_sent: AtomicU64,
}

impl std::fmt::Debug for ChatClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChatClient")
            .field("config", &self.config)
            .field("has_api_key", &self.api_key.is_some())
            .field("cache", &self.cache)
            .finish_non_exhaustive()
    }
}

impl ChatClient {
    pub fn new(
        config: EndpointConfig,
        api_key: Option<String>,
        cache: Option<CompletionCache>,
    ) -> Result<Self, ExplainerError> {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| ExplainerError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        let rps = NonZeroU32::new(config.requests_per_second.max(1)).expect("non-zero");
        let limiter = RateLimiter::direct(Quota::per_second(rps));
        let in_flight = Semaphore::new(config.max_in_flight.max(1));
        Ok(Self {
            config,
            api_key: api_key.filter(|k| !k.trim().is_empty()),
            cache,
            http,
            in_flight,
            limiter,
            key_locks: Mutex::new(HashMap::new()),
            requests_sent: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    pub fn model(&self) -> &str {
        &self.config.model
    }

    /// HTTP requests issued so far, retries included.
    pub fn requests_sent(&self) -> u64 {
        self.requests_sent.load(Ordering::Relaxed)
    }

    fn key_lock(&self, key: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.key_locks.lock().expect("lock map poisoned");
        locks.entry(key.to_string()).or_default().clone()
    }

    fn backoff(&self, retry: u32) -> Duration {
        let ms = self
            .config
            .initial_backoff_ms
            .saturating_mul(1u64 << retry.min(20))
            .min(self.config.max_backoff_ms);
        Duration::from_millis(ms)
    }

    /// Returns the completion for `prompt`, consulting the cache under `key`
    /// first. Connection errors, timeouts, 429 and 5xx responses are retried
    /// with exponential backoff up to `max_retries` times.
    pub async fn complete(&self, key: &str, prompt: &Prompt) -> Result<Completion, ExplainerError> {
        let lock = self.key_lock(key);
        let _guard = lock.lock().await;
        if let Some(cache) = &self.cache {
            if let Some(entry) = cache.get(key)? {
                let content = extract_content(&entry.raw_response)?;
                return Ok(Completion {
                    raw_response: entry.raw_response,
                    content,
                    cached: true,
                });
            }
        }
        let api_key = self
            .api_key
            .as_deref()
            .ok_or_else(|| ExplainerError::Credential("no API key configured".into()))?;
        let body = json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
        });
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));

        let mut retry = 0;
        let raw = loop {
            match self.attempt(&url, api_key, &body).await? {
                Attempt::Done(raw) => break raw,
                Attempt::Retry(message) if retry >= self.config.max_retries => {
                    return Err(ExplainerError::Transport {
                        attempts: retry + 1,
                        message,
                    });
                }
                Attempt::Retry(message) => {
                    let wait = self.backoff(retry);
                    tracing::warn!(%message, retry = retry + 1, ?wait, "transient completion failure");
                    tokio::time::sleep(wait).await;
                    retry += 1;
                }
            }
        };
        let content = extract_content(&raw)?;
        if let Some(cache) = &self.cache {
            cache.put(&CompletionCacheEntry {
                cache_key: key.to_string(),
                raw_response: raw.clone(),
                created_at: Utc::now(),
            })?;
        }
        Ok(Completion {
            raw_response: raw,
            content,
            cached: false,
        })
    }

    async fn attempt(
        &self,
        url: &str,
        api_key: &str,
        body: &serde_json::Value,
    ) -> Result<Attempt, ExplainerError> {
        let _permit = self.in_flight.acquire().await.expect("semaphore open");
        self.limiter.until_ready().await;
        self.requests_sent.fetch_add(1, Ordering::Relaxed);
        let resp = match self.http.post(url).bearer_auth(api_key).json(body).send().await {
            Ok(r) => r,
            Err(e) if e.is_connect() || e.is_timeout() || e.is_request() => {
                return Ok(Attempt::Retry(e.to_string()))
            }
            Err(e) => {
                return Err(ExplainerError::Transport {
                    attempts: 1,
                    message: e.to_string(),
                })
            }
        };
        let status = resp.status();
        let text = match resp.text().await {
            Ok(t) => t,
            Err(e) => return Ok(Attempt::Retry(e.to_string())),
        };
        if status.is_success() {
            Ok(Attempt::Done(text))
        } else if status.as_u16() == 401 || status.as_u16() == 403 {
            Err(ExplainerError::Credential(format!("endpoint answered {status}")))
        } else if status.as_u16() == 429 || status.is_server_error() {
            Ok(Attempt::Retry(format!("endpoint answered {status}")))
        } else {
            Err(ExplainerError::Http {
                status: status.as_u16(),
                body: text,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_key_separates_fields() {
        let a = cache_key("ab", "c", "m");
        assert_ne!(a, cache_key("a", "bc", "m"));
        assert_ne!(a, cache_key("ab", "c", "m2"));
        assert_eq!(a, cache_key("ab", "c", "m"));
    }

    #[test]
    fn cache_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cache = CompletionCache::new(dir.path()).unwrap();
        assert!(cache.get("k").unwrap().is_none());
        let raw = "{\"choices\":[{\"message\":{\"content\":\"hi \\u00e9\"}}]}  \n";
        let entry = CompletionCacheEntry {
            cache_key: "k".into(),
            raw_response: raw.into(),
            created_at: Utc::now(),
        };
        cache.put(&entry).unwrap();
        assert_eq!(cache.get("k").unwrap().unwrap(), entry);
        let leftovers = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".tmp"))
            .count();
        assert_eq!(leftovers, 0);
    }

    #[test]
    fn content_extraction() {
        assert_eq!(
            extract_content(r#"{"choices":[{"message":{"role":"assistant","content":"x"}}]}"#).unwrap(),
            "x"
        );
        assert!(matches!(extract_content("{}"), Err(ExplainerError::Format(_))));
        assert!(matches!(extract_content("<html>"), Err(ExplainerError::Format(_))));
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let c = ChatClient::new(
            EndpointConfig {
                initial_backoff_ms: 100,
                max_backoff_ms: 350,
                ..EndpointConfig::default()
            },
            None,
            None,
        )
        .unwrap();
        let ms: Vec<u128> = (0..4).map(|r| c.backoff(r).as_millis()).collect();
        assert_eq!(ms, [100, 200, 350, 350]);
    }

    #[tokio::test]
    async fn cached_prompt_needs_no_network_or_key() {
        let dir = tempfile::tempdir().unwrap();
        let cache = CompletionCache::new(dir.path()).unwrap();
        let raw = r#"{"choices":[{"message":{"content":"cached"}}]}"#;
        cache
            .put(&CompletionCacheEntry {
                cache_key: "k1".into(),
                raw_response: raw.into(),
                created_at: Utc::now(),
            })
            .unwrap();
        let client = ChatClient::new(
            EndpointConfig {
                base_url: "http://127.0.0.1:9".into(),
                ..EndpointConfig::default()
            },
            None,
            Some(cache),
        )
        .unwrap();
        let prompt = Prompt {
            system: "s".into(),
            user: "u".into(),
        };
        let c = client.complete("k1", &prompt).await.unwrap();
        assert!(c.cached);
        assert_eq!(c.raw_response, raw);
        assert_eq!(c.content, "cached");
        assert_eq!(client.requests_sent(), 0);

        let err = client.complete("k2", &prompt).await.unwrap_err();
        assert!(matches!(err, ExplainerError::Credential(_)));
        assert_eq!(client.requests_sent(), 0);
    }
}

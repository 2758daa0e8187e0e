use std::ops::Range;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub url_placeholder: String,
    pub keep_hashtags: bool,
    pub keep_mentions: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            url_placeholder: "<url>".to_string(),
            keep_hashtags: true,
            keep_mentions: true,
        }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_url(chunk: &str) -> bool {
    let body = chunk.trim_start_matches(|c: char| !c.is_alphanumeric());
    let lower = body.to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

/// A token and the byte range of the caption text it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub span: Range<usize>,
}

/// Splits a caption into word tokens. Whitespace-separated URLs collapse to the
/// placeholder, `#tag` and `@handle` stay whole when enabled, and any other
/// non-word character separates tokens.
pub fn tokenize(caption: &str, config: &TokenizerConfig) -> Vec<String> {
    tokenize_spans(caption, config).into_iter().map(|t| t.text).collect()
}

/// [`tokenize`] with source spans, so features can be traced back to the
/// exact caption text.
pub fn tokenize_spans(caption: &str, config: &TokenizerConfig) -> Vec<Token> {
    let mut tokens = Vec::new();
    for chunk in caption.split_whitespace() {
        let offset = chunk.as_ptr() as usize - caption.as_ptr() as usize;
        if is_url(chunk) {
            tokens.push(Token {
                text: config.url_placeholder.clone(),
                span: offset..offset + chunk.len(),
            });
            continue;
        }
        let mut flush = |start: Option<usize>, end: usize| {
            if let Some(start) = start {
                let raw = &chunk[start..end];
                tokens.push(Token {
                    text: if config.lowercase { raw.to_lowercase() } else { raw.to_string() },
                    span: offset + start..offset + end,
                });
            }
        };
        let mut start = None;
        let mut chars = chunk.char_indices().peekable();
        while let Some((i, c)) = chars.next() {
            if is_word_char(c) {
                start.get_or_insert(i);
                continue;
            }
            flush(start.take(), i);
            let keeps_prefix =
                (c == '#' && config.keep_hashtags) || (c == '@' && config.keep_mentions);
            if keeps_prefix && chars.peek().is_some_and(|&(_, n)| is_word_char(n)) {
                start = Some(i);
            }
        }
        flush(start, chunk.len());
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(s: &str) -> Vec<String> {
        tokenize(s, &TokenizerConfig::default())
    }

    #[test]
    fn url_hashtag_mention() {
        assert_eq!(
            tok("Check https://x.co #Ad @Brand!"),
            vec!["check", "<url>", "#ad", "@brand"]
        );
    }

    #[test]
    fn empty_and_punctuation() {
        assert!(tok("").is_empty());
        assert!(tok("!!! ... --").is_empty());
        assert_eq!(tok("New—shoes"), vec!["new", "shoes"]);
        assert_eq!(tok("@shop.LTK link"), vec!["@shop", "ltk", "link"]);
        assert_eq!(tok("a #  b"), vec!["a", "b"]);
    }

    #[test]
    fn flags_respected() {
        let cfg = TokenizerConfig {
            lowercase: false,
            keep_hashtags: false,
            keep_mentions: false,
            ..TokenizerConfig::default()
        };
        assert_eq!(tokenize("#Ad @Brand www.x.com", &cfg), vec!["Ad", "Brand", "<url>"]);
    }

    #[test]
    fn spans_point_at_source_text() {
        let caption = "Love  my @Shop.LTK haul! https://x.co";
        let toks = tokenize_spans(caption, &TokenizerConfig::default());
        let raw: Vec<&str> = toks.iter().map(|t| &caption[t.span.clone()]).collect();
        assert_eq!(raw, ["Love", "my", "@Shop", "LTK", "haul", "https://x.co"]);
        assert_eq!(toks[2].text, "@shop");
    }
}

use super::{DisclosureScan, Post};

/// Hashtags treated as explicit ad disclosures, in canonical lowercase form.
pub const DISCLOSURE_TAGS: [&str; 4] = ["#ad", "#advertisement", "#spons", "#sponsored"];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte span of one hashtag token, `#` included.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Hashtag {
    start: usize,
    end: usize,
    canonical: String,
}

/// Finds hashtag tokens. A `#` opens a hashtag when it starts the text, follows
/// a non-word character, or directly follows another hashtag (`#ad#gift`).
/// `x#ad` is not a hashtag; `#adventure` is the single tag `#adventure`.
fn hashtags(text: &str) -> Vec<Hashtag> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    let mut prev: Option<char> = None;
    let mut prev_in_tag = false;

    while let Some((i, c)) = chars.next() {
        let opens = c == '#' && (prev.is_none_or(|p| !is_word_char(p)) || prev_in_tag);
        if opens {
            let mut end = i + 1;
            while let Some(&(j, d)) = chars.peek() {
                if !is_word_char(d) {
                    break;
                }
                end = j + d.len_utf8();
                chars.next();
            }
            if end > i + 1 {
                out.push(Hashtag {
                    start: i,
                    end,
                    canonical: text[i..end].to_lowercase(),
                });
                prev = text[..end].chars().next_back();
                prev_in_tag = true;
                continue;
            }
        }
        prev = Some(c);
        prev_in_tag = false;
    }
    out
}

fn is_disclosure(tag: &str) -> bool {
    DISCLOSURE_TAGS.contains(&tag)
}

/// Disclosure tags present in `text`, canonical and deduplicated.
pub fn scan_text(text: &str) -> Vec<String> {
    let mut found: Vec<String> = Vec::new();
    for tag in hashtags(text) {
        if is_disclosure(&tag.canonical) && !found.contains(&tag.canonical) {
            found.push(tag.canonical);
        }
    }
    found
}

pub fn scan_disclosures(post: &Post) -> DisclosureScan {
    let matched_tags = scan_text(&post.caption);
    DisclosureScan {
        post_id: post.post_id.clone(),
        disclosed: !matched_tags.is_empty(),
        matched_tags,
    }
}

/// Removes every disclosure hashtag. When a removal would leave whitespace on
/// both sides (or at the start/end of the text), the following (or trailing)
/// whitespace run is dropped too. Everything else is left as is.
pub fn strip_disclosures(text: &str) -> String {
    let mut out = text.to_string();
    // One tag per pass; re-scan so chained tags exposed by a removal are seen.
    while let Some(tag) = hashtags(&out)
        .into_iter()
        .find(|t| is_disclosure(&t.canonical))
    {
        let before = &out[..tag.start];
        let mut after = &out[tag.end..];
        let mut before = before;
        let before_open = before.is_empty() || before.ends_with(char::is_whitespace);
        if before_open {
            after = after.trim_start();
        }
        if after.is_empty() {
            before = before.trim_end();
        }
        out = format!("{before}{after}");
    }
    out
}

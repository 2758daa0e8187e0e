use super::{ExplainerError, Explanation, ExplanationSource, ImpliedLabel};

const INDICATORS_PREFIX: &str = "key indicators:";

/// Matches a label line against the label grammar, case-insensitively. An
/// optional `Label:` prefix, surrounding quotes or asterisks and a trailing
/// full stop are tolerated.
pub fn parse_label_line(line: &str) -> Option<ImpliedLabel> {
    let mut s = line.trim().to_lowercase();
    if let Some(rest) = s.strip_prefix("label:") {
        s = rest.to_string();
    }
    let s = s
        .trim()
        .trim_matches(|c: char| c == '*' || c == '"' || c == '\'' || c == '.' || c.is_whitespace());
    let words: Vec<&str> = s.split(|c: char| c.is_whitespace() || c == '-').filter(|w| !w.is_empty()).collect();
    match words.as_slice() {
        ["sponsored"] => Some(ImpliedLabel::Sponsored),
        ["not", "sponsored"] | ["non", "sponsored"] => Some(ImpliedLabel::NonSponsored),
        ["likely", "sponsored"] => Some(ImpliedLabel::LikelySponsored),
        ["likely", "not", "sponsored"] => Some(ImpliedLabel::LikelyNotSponsored),
        _ => None,
    }
}

fn is_quote(c: char) -> bool {
    matches!(c, '\'' | '"' | '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}')
}

fn closes(open: char, c: char) -> bool {
    match open {
        '\u{2018}' => c == '\u{2019}',
        '\u{201C}' => c == '\u{201D}',
        o => c == o,
    }
}

/// Quoted phrases from an indicators list. A quote opens at the start or after
/// a non-alphanumeric character and closes at a matching quote that is not
/// followed by an alphanumeric one, so apostrophes inside words survive.
fn quoted_phrases(s: &str) -> Vec<String> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let opens = is_quote(c) && (i == 0 || !chars[i - 1].is_alphanumeric());
        if !opens {
            i += 1;
            continue;
        }
        let close = (i + 1..chars.len()).find(|&j| {
            closes(c, chars[j]) && chars.get(j + 1).is_none_or(|n| !n.is_alphanumeric())
        });
        match close {
            Some(j) => {
                let phrase: String = chars[i + 1..j].iter().collect();
                if !phrase.trim().is_empty() {
                    out.push(phrase);
                }
                i = j + 1;
            }
            None => i += 1,
        }
    }
    out
}

fn parse_indicators(rest: &str) -> Vec<String> {
    let rest = rest.trim();
    if rest.trim_end_matches('.').trim().eq_ignore_ascii_case("none") || rest.is_empty() {
        return Vec::new();
    }
    let quoted = quoted_phrases(rest);
    if !quoted.is_empty() {
        return quoted;
    }
    rest.trim_end_matches('.')
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::to_string)
        .collect()
}

fn label_line_index(lines: &[&str]) -> Option<(usize, ImpliedLabel)> {
    let (idx, line) = lines.iter().enumerate().rev().find(|(_, l)| !l.trim().is_empty())?;
    parse_label_line(line).map(|label| (idx, label))
}

/// Parses "Key indicators: ..." / rationale / label-line output into a
/// remote-sourced explanation.
pub fn parse_explanation(raw: &str, post_id: &str) -> Result<Explanation, ExplainerError> {
    if raw.trim().is_empty() {
        return Err(ExplainerError::Format("empty response".into()));
    }
    let lines: Vec<&str> = raw.lines().collect();
    let (label_idx, implied_label) = label_line_index(&lines)
        .ok_or_else(|| ExplainerError::Format("no recognisable label line".into()))?;
    let ind_idx = lines[..label_idx]
        .iter()
        .position(|l| l.trim_start().to_lowercase().starts_with(INDICATORS_PREFIX))
        .ok_or_else(|| ExplainerError::Format("missing \"Key indicators:\" line".into()))?;
    let line = lines[ind_idx].trim_start();
    let key_indicators = parse_indicators(&line[INDICATORS_PREFIX.len()..]);
    let rationale = lines[ind_idx + 1..label_idx].join("\n").trim().to_string();
    if rationale.is_empty() {
        return Err(ExplainerError::Format("empty rationale".into()));
    }
    Ok(Explanation {
        post_id: post_id.to_string(),
        key_indicators,
        rationale,
        implied_label,
        source: ExplanationSource::Remote,
    })
}

/// Drops a trailing label line so annotators see indicators and rationale
/// only. Text without a recognisable label line is returned trimmed.
pub fn strip_label_line(text: &str) -> String {
    let lines: Vec<&str> = text.lines().collect();
    match label_line_index(&lines) {
        Some((idx, _)) => lines[..idx].join("\n").trim().to_string(),
        None => text.trim().to_string(),
    }
}

impl Explanation {
    /// Serialises back to the parseable text form.
    pub fn to_text(&self) -> String {
        let indicators = if self.key_indicators.is_empty() {
            "none".to_string()
        } else {
            self.key_indicators
                .iter()
                .map(|p| if p.contains('\'') { format!("\"{p}\"") } else { format!("'{p}'") })
                .collect::<Vec<_>>()
                .join(", ")
        };
        format!(
            "Key indicators: {indicators}.\n{}\n{}",
            self.rationale.trim(),
            self.implied_label.phrase()
        )
    }
}

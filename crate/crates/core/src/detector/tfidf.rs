use std::collections::{BTreeMap, HashMap, HashSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::tokenize::{tokenize, tokenize_spans, TokenizerConfig};
use super::DetectorError;

/// Sparse row: strictly increasing feature indices with matching values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let sorted: BTreeMap<usize, f64> = pairs.into_iter().collect();
        Self {
            indices: sorted.keys().copied().collect(),
            values: sorted.values().copied().collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| dense[i] * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VectorizerConfig {
    pub min_df: usize,
    pub max_ngram: usize,
}

impl Default for VectorizerConfig {
    fn default() -> Self {
        Self {
            min_df: 2,
            max_ngram: 3,
        }
    }
}

/// All contiguous n-grams for n in `1..=max_n`, tokens joined by one space.
pub fn ngrams(tokens: &[String], max_n: usize) -> Vec<String> {
    let mut out = Vec::new();
    for n in 1..=max_n {
        for window in tokens.windows(n) {
            out.push(window.join(" "));
        }
    }
    out
}

/// Word n-gram TF-IDF vectorizer: raw counts, smoothed idf
/// `ln((1 + N) / (1 + df)) + 1`, per-document L2 normalisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vectorizer {
    pub tokenizer: TokenizerConfig,
    pub config: VectorizerConfig,
    pub n_documents: usize,
    /// Sorted so that indices are a pure function of the training captions.
    pub vocabulary: BTreeMap<String, usize>,
    pub idf: Vec<f64>,
}

impl Vectorizer {
    pub fn fit<'a>(
        captions: impl IntoIterator<Item = &'a str>,
        tokenizer: TokenizerConfig,
        config: VectorizerConfig,
    ) -> Result<Self, DetectorError> {
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut n_documents = 0;
        for caption in captions {
            n_documents += 1;
            let grams: HashSet<String> =
                ngrams(&tokenize(caption, &tokenizer), config.max_ngram).into_iter().collect();
            for g in grams {
                *df.entry(g).or_default() += 1;
            }
        }
        if n_documents == 0 {
            return Err(DetectorError::EmptyTrainingSet);
        }

        let kept: BTreeMap<String, usize> =
            df.into_iter().filter(|(_, d)| *d >= config.min_df).collect();
        let n = n_documents as f64;
        let idf = kept
            .values()
            .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        let vocabulary = kept
            .into_keys()
            .enumerate()
            .map(|(i, g)| (g, i))
            .collect();
        Ok(Self {
            tokenizer,
            config,
            n_documents,
            vocabulary,
            idf,
        })
    }

    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    /// Vocabulary entries present in `caption` with their raw counts.
    pub fn term_counts(&self, caption: &str) -> BTreeMap<usize, usize> {
        let mut counts = BTreeMap::new();
        for g in ngrams(&tokenize(caption, &self.tokenizer), self.config.max_ngram) {
            if let Some(&i) = self.vocabulary.get(&g) {
                *counts.entry(i).or_default() += 1;
            }
        }
        counts
    }

    pub fn vectorize(&self, caption: &str) -> SparseVector {
        let weighted: Vec<(usize, f64)> = self
            .term_counts(caption)
            .into_iter()
            .map(|(i, c)| (i, c as f64 * self.idf[i]))
            .collect();
        let norm = weighted.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return SparseVector::default();
        }
        SparseVector::from_pairs(weighted.into_iter().map(|(i, v)| (i, v / norm)))
    }

    /// Caption byte range of the first occurrence of each vocabulary entry.
    pub fn locate(&self, caption: &str) -> BTreeMap<usize, Range<usize>> {
        let tokens = tokenize_spans(caption, &self.tokenizer);
        let mut found = BTreeMap::new();
        for n in 1..=self.config.max_ngram {
            for window in tokens.windows(n) {
                let gram = window.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
                if let Some(&i) = self.vocabulary.get(&gram) {
                    found
                        .entry(i)
                        .or_insert(window[0].span.start..window[n - 1].span.end);
                }
            }
        }
        found
    }

    /// Reverse lookup from feature index to n-gram.
    pub fn feature_names(&self) -> Vec<&str> {
        let mut names = vec![""; self.dim()];
        for (g, &i) in &self.vocabulary {
            names[i] = g;
        }
        names
    }
}

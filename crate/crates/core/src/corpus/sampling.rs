use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{scan_disclosures, Corpus, CorpusError, WeakLabeledPost};
use crate::Label;

/// Name of the seeded shuffle recorded in split metadata. Sampling and
/// shuffling both draw from ChaCha8 seeded with `seed_from_u64`.
pub const SHUFFLE_ALGORITHM: &str = "chacha8/rand-0.9";

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Keeps every positive and draws `min(2n, available)` negatives uniformly
/// without replacement. Positives come first, then the sampled negatives, each
/// in input order.
pub fn undersample(labeled: &[WeakLabeledPost], seed: u64) -> Vec<WeakLabeledPost> {
    let (pos, neg): (Vec<&WeakLabeledPost>, Vec<&WeakLabeledPost>) = labeled
        .iter()
        .partition(|w| w.weak_label == Label::Sponsored);
    let take = (2 * pos.len()).min(neg.len());
    let mut picked = index::sample(&mut rng(seed), neg.len(), take).into_vec();
    picked.sort_unstable();
    pos.into_iter()
        .cloned()
        .chain(picked.into_iter().map(|i| neg[i].clone()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub cutoff_year: i32,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            cutoff_year: 2022,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub cutoff_year: i32,
    pub seed: u64,
    pub rng: String,
    pub train: Vec<WeakLabeledPost>,
    pub validation: Vec<WeakLabeledPost>,
    /// Posts published in the cutoff year.
    pub test: Vec<WeakLabeledPost>,
    /// Posts published after the cutoff year; kept so that the parts still
    /// partition the input.
    pub excluded_after_cutoff: Vec<WeakLabeledPost>,
}

/// Splits by publication year: the cutoff year is the test set, earlier posts
/// are shuffled and cut 90/10 (train size floored) into train and validation.
pub fn temporal_split(
    balanced: &[WeakLabeledPost],
    spec: SplitSpec,
) -> Result<DatasetSplit, CorpusError> {
    let mut before = Vec::new();
    let mut test = Vec::new();
    let mut after = Vec::new();
    for w in balanced {
        let year = w.post.year();
        if year < spec.cutoff_year {
            before.push(w.clone());
        } else if year == spec.cutoff_year {
            test.push(w.clone());
        } else {
            after.push(w.clone());
        }
    }
    if before.is_empty() {
        return Err(CorpusError::NoTrainingData {
            cutoff_year: spec.cutoff_year,
        });
    }
    before.shuffle(&mut rng(spec.seed));
    let n_train = before.len() * 9 / 10;
    let validation = before.split_off(n_train);
    Ok(DatasetSplit {
        cutoff_year: spec.cutoff_year,
        seed: spec.seed,
        rng: SHUFFLE_ALGORITHM.to_string(),
        train: before,
        validation,
        test,
        excluded_after_cutoff: after,
    })
}

/// Writes `train.ids`, `validation.ids` and `test.ids` into `dir`. Each file
/// starts with `# key: value` metadata lines followed by one post id per line.
pub fn write_split_manifests(dir: &Path, split: &DatasetSplit) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (part, posts) in [
        ("train", &split.train),
        ("validation", &split.validation),
        ("test", &split.test),
    ] {
        let mut f = fs::File::create(dir.join(format!("{part}.ids")))?;
        writeln!(f, "# part: {part}")?;
        writeln!(f, "# seed: {}", split.seed)?;
        writeln!(f, "# cutoff_year: {}", split.cutoff_year)?;
        writeln!(f, "# rng: {}", split.rng)?;
        for w in posts {
            writeln!(f, "{}", w.post.post_id)?;
        }
    }
    Ok(())
}

/// Reads the ids of one manifest written by [`write_split_manifests`].
pub fn read_id_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// A fixed, ordered selection of posts shown to annotators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationBatch {
    pub batch_id: String,
    pub items: Vec<String>,
    /// Items carrying an explicit disclosure (the attention checks).
    pub disclosed_items: BTreeSet<String>,
    pub disclosed_share: f64,
    pub size: usize,
    pub seed: u64,
}

impl AnnotationBatch {
    pub fn contains(&self, post_id: &str) -> bool {
        self.items.iter().any(|i| i == post_id)
    }
}

/// Samples `round(size * disclosed_share)` disclosed and the rest undisclosed
/// posts, then shuffles them together.
pub fn build_annotation_batch(
    corpus: &Corpus,
    size: usize,
    disclosed_share: f64,
    seed: u64,
) -> Result<AnnotationBatch, CorpusError> {
    if !(0.0..=1.0).contains(&disclosed_share) {
        return Err(CorpusError::InvalidShare(disclosed_share));
    }
    let n_disclosed = (size as f64 * disclosed_share).round() as usize;
    let n_plain = size - n_disclosed;

    let (disclosed, plain): (Vec<&str>, Vec<&str>) = corpus
        .posts()
        .iter()
        .map(|p| (p.post_id.as_str(), scan_disclosures(p).disclosed))
        .fold((Vec::new(), Vec::new()), |(mut d, mut u), (id, is_d)| {
            if is_d {
                d.push(id)
            } else {
                u.push(id)
            }
            (d, u)
        });
    if disclosed.len() < n_disclosed {
        return Err(CorpusError::Capacity {
            kind: "disclosed",
            needed: n_disclosed,
            available: disclosed.len(),
        });
    }
    if plain.len() < n_plain {
        return Err(CorpusError::Capacity {
            kind: "undisclosed",
            needed: n_plain,
            available: plain.len(),
        });
    }

    let mut rng = rng(seed);
    let picked_d: Vec<String> = index::sample(&mut rng, disclosed.len(), n_disclosed)
        .into_iter()
        .map(|i| disclosed[i].to_string())
        .collect();
    let picked_u: Vec<String> = index::sample(&mut rng, plain.len(), n_plain)
        .into_iter()
        .map(|i| plain[i].to_string())
        .collect();
    let disclosed_items: BTreeSet<String> = picked_d.iter().cloned().collect();
    let mut items: Vec<String> = picked_d.into_iter().chain(picked_u).collect();
    items.shuffle(&mut rng);

    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for id in &items {
        hasher.update(id.as_bytes());
        hasher.update([0u8]);
    }
    let batch_id = format!("batch-{}", &hex::encode(hasher.finalize())[..12]);

    Ok(AnnotationBatch {
        batch_id,
        items,
        disclosed_items,
        disclosed_share,
        size,
        seed,
    })
}

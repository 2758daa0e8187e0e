//! Deterministic fixtures shared by the benchmarks.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sponsorscope_core::agreement::LabelMatrix;
use sponsorscope_core::Label;

/// `annotators` x `items` labels where each annotator matches a hidden truth
/// with probability 0.8 and skips an item with probability `missing`.
pub fn rating_matrix(annotators: usize, items: usize, missing: f64, seed: u64) -> LabelMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<bool> = (0..items).map(|_| rng.random_bool(0.5)).collect();
    let cells = (0..annotators)
        .map(|_| {
            truth
                .iter()
                .map(|&t| {
                    (!rng.random_bool(missing)).then(|| Label::from_sponsored(t == rng.random_bool(0.8)))
                })
                .collect()
        })
        .collect();
    LabelMatrix::from_cells(
        (0..annotators).map(|i| format!("a{i}")).collect(),
        (0..items).map(|i| format!("p{i}")).collect(),
        cells,
    )
    .expect("well-formed fixture")
}

const PROMO: &[&str] = &[
    "discount", "code", "link", "bio", "collab", "partner", "giveaway", "shop", "@brand", "#newin",
];
const PLAIN: &[&str] = &[
    "sunset", "family", "hike", "coffee", "weekend", "memories", "beach", "friends", "garden", "home",
];
const FILLER: &[&str] = &["the", "my", "so", "today", "with", "love", "new", "and", "this", "is"];

/// Short captions with labels; sponsored ones draw cue words from their own pool.
pub fn captions(n: usize, seed: u64) -> (Vec<String>, Vec<Label>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let sponsored = rng.random_bool(0.5);
            let pool = if sponsored { PROMO } else { PLAIN };
            let len = rng.random_range(8..24);
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    let src = if rng.random_bool(0.3) { pool } else { FILLER };
                    *src.choose(&mut rng).expect("non-empty pool")
                })
                .collect();
            (words.join(" "), Label::from_sponsored(sponsored))
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic() {
        assert_eq!(captions(20, 1), captions(20, 1));
        let a = rating_matrix(3, 10, 0.1, 2);
        let b = rating_matrix(3, 10, 0.1, 2);
        assert_eq!(a, b);
    }
}

mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use sponsorscope_core::agreement::{
    absolute_agreement, at_most_one_disagreement, krippendorff_alpha, majority_label,
    model_agreement_majority, pairwise_agreement, LabelMatrix, SponsoredRate,
};
use sponsorscope_core::Label;

use common::oracle::{self, Grid};

fn grid(annotators: std::ops::RangeInclusive<usize>, items: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Grid> {
    (annotators, items).prop_flat_map(|(a, n)| {
        prop::collection::vec(
            prop::collection::vec(prop::option::weighted(0.75, 0u8..2), n),
            a,
        )
    })
}

fn defined<T>(r: Result<T, sponsorscope_core::agreement::AgreementError>) -> Option<T> {
    r.ok()
}

fn flip(grid: &Grid) -> Grid {
    grid.iter()
        .map(|row| row.iter().map(|c| c.map(|v| 1 - v)).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn alpha_matches_enumeration(g in grid(2..=5, 4..=20)) {
        let got = defined(krippendorff_alpha(&common::grid_to_matrix(&g)));
        let want = oracle::alpha_brute_force(&g);
        match (got, want) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}"),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn alpha_ignores_label_names_and_order(g in grid(2..=5, 4..=16), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let base = defined(krippendorff_alpha(&common::grid_to_matrix(&g)));
        let flipped = defined(krippendorff_alpha(&common::grid_to_matrix(&flip(&g))));
        let mut r = common::rng(seed);
        let mut rows = g.clone();
        rows.shuffle(&mut r);
        let mut cols: Vec<usize> = (0..g[0].len()).collect();
        cols.shuffle(&mut r);
        let permuted: Grid = rows.iter().map(|row| cols.iter().map(|&c| row[c]).collect()).collect();
        let moved = defined(krippendorff_alpha(&common::grid_to_matrix(&permuted)));
        for other in [flipped, moved] {
            match (base, other) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (a, b) => prop_assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn alpha_is_one_exactly_when_unanimous(g in grid(2..=5, 4..=16)) {
        let m = common::grid_to_matrix(&g);
        if let (Ok(alpha), Ok(abs)) = (krippendorff_alpha(&m), absolute_agreement(&m)) {
            prop_assert_eq!(alpha == 1.0, abs == 1.0, "alpha {} abs {}", alpha, abs);
        }
    }

    #[test]
    fn absolute_never_exceeds_one_disag(g in grid(2..=6, 1..=20)) {
        let m = common::grid_to_matrix(&g);
        let abs = defined(absolute_agreement(&m));
        let one = defined(at_most_one_disagreement(&m));
        prop_assert_eq!(abs.is_some(), one.is_some());
        if let (Some(a), Some(o)) = (abs, one) {
            prop_assert!(a <= o);
            prop_assert_eq!(Some(a), oracle::absolute_brute_force(&g));
            prop_assert_eq!(Some(o), oracle::one_disag_brute_force(&g));
        }
    }

    #[test]
    fn pairwise_entries_match_two_annotator_restriction(g in grid(2..=5, 4..=16)) {
        let m = common::grid_to_matrix(&g);
        let stats = pairwise_agreement(&m).unwrap();
        prop_assert_eq!(
            stats.pairs.len() + stats.skipped_pairs.len(),
            m.n_annotators() * (m.n_annotators() - 1) / 2
        );
        for p in &stats.pairs {
            let pair = m.restrict_annotators(&[&p.a, &p.b]).unwrap();
            prop_assert_eq!(p.abs_pct, 100.0 * absolute_agreement(&pair).unwrap());
            prop_assert_eq!(p.alpha_pct, 100.0 * krippendorff_alpha(&pair).unwrap());
        }
        if let Some(s) = &stats.summary {
            let abs: Vec<f64> = stats.pairs.iter().map(|p| p.abs_pct).collect();
            let alpha: Vec<f64> = stats.pairs.iter().map(|p| p.alpha_pct).collect();
            prop_assert!((s.std_abs - oracle::sample_std(&abs)).abs() < 1e-9);
            prop_assert!((s.std_alpha - oracle::sample_std(&alpha)).abs() < 1e-9);
        }
    }

    #[test]
    fn majority_voter_leaves_model_agreement_unchanged(
        g in grid(2..=5, 4..=16),
        model in prop::collection::vec(any::<bool>(), 16),
    ) {
        let m = common::grid_to_matrix(&g);
        let preds: HashMap<String, Label> = m
            .items()
            .iter()
            .zip(&model)
            .map(|(id, &s)| (id.clone(), Label::from_sponsored(s)))
            .collect();
        let before = model_agreement_majority(&m, &preds, SponsoredRate::Pooled);

        // An extra annotator who votes with the majority and abstains on ties.
        let mut annotators = m.annotators().to_vec();
        annotators.push("extra".into());
        let mut cells: Vec<Vec<Option<Label>>> = (0..m.n_annotators()).map(|a| m.row(a).to_vec()).collect();
        cells.push((0..m.n_items()).map(|i| majority_label(&m.unit(i))).collect());
        let grown = LabelMatrix::from_cells(annotators, m.items().to_vec(), cells).unwrap();
        let after = model_agreement_majority(&grown, &preds, SponsoredRate::Pooled);

        match (before, after) {
            (Ok(b), Ok(a)) => {
                prop_assert_eq!(b.model_majority_agreement_pct, a.model_majority_agreement_pct);
                prop_assert_eq!(b.items_compared, a.items_compared);
                prop_assert_eq!(b.tie_items_excluded, a.tie_items_excluded);
            }
            (b, a) => prop_assert_eq!(b.is_ok(), a.is_ok()),
        }
    }
}

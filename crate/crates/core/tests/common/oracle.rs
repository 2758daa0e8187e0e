//! Independent reference computations used by the integration tests.
//!
//! Nothing here calls into the library's metric code: ratings are plain
//! `Vec<Vec<Option<u8>>>` grids (rows = annotators, columns = items).

#![allow(dead_code)]

use std::collections::BTreeMap;

pub type Grid = Vec<Vec<Option<u8>>>;

/// Nominal Krippendorff's alpha by explicit enumeration: for every item with at
/// least two ratings, every ordered pair of distinct raters (i, j) adds
/// 1 / (m_u - 1) to the coincidence cell (v_i, v_j).
pub fn alpha_brute_force(grid: &Grid) -> Option<f64> {
    let n_items = grid.first().map_or(0, Vec::len);
    let mut o: BTreeMap<(u8, u8), f64> = BTreeMap::new();
    for item in 0..n_items {
        let ratings: Vec<u8> = grid.iter().filter_map(|row| row[item]).collect();
        let m = ratings.len();
        if m < 2 {
            continue;
        }
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    *o.entry((ratings[i], ratings[j])).or_insert(0.0) += 1.0 / (m as f64 - 1.0);
                }
            }
        }
    }
    if o.is_empty() {
        return None;
    }
    let mut n_c: BTreeMap<u8, f64> = BTreeMap::new();
    for (&(c, _), &v) in &o {
        *n_c.entry(c).or_insert(0.0) += v;
    }
    let n: f64 = n_c.values().sum();
    let d_o: f64 = o.iter().filter(|((c, k), _)| c != k).map(|(_, v)| v).sum::<f64>() / n;
    let mut d_e = 0.0;
    for (&c, &nc) in &n_c {
        for (&k, &nk) in &n_c {
            if c != k {
                d_e += nc * nk;
            }
        }
    }
    d_e /= n * (n - 1.0);
    if d_e == 0.0 {
        return Some(1.0);
    }
    Some(1.0 - d_o / d_e)
}

fn present(grid: &Grid, item: usize) -> Vec<u8> {
    grid.iter().filter_map(|row| row[item]).collect()
}

/// Fraction of items with >= 2 ratings whose ratings are all equal.
pub fn absolute_brute_force(grid: &Grid) -> Option<f64> {
    let n_items = grid.first().map_or(0, Vec::len);
    let (mut eligible, mut unanimous) = (0, 0);
    for item in 0..n_items {
        let r = present(grid, item);
        if r.len() < 2 {
            continue;
        }
        eligible += 1;
        if r.iter().all(|&v| v == r[0]) {
            unanimous += 1;
        }
    }
    (eligible > 0).then(|| unanimous as f64 / eligible as f64)
}

/// Fraction of items with >= 2 ratings that become unanimous after deleting at
/// most one rating (tries every deletion).
pub fn one_disag_brute_force(grid: &Grid) -> Option<f64> {
    let n_items = grid.first().map_or(0, Vec::len);
    let (mut eligible, mut ok) = (0, 0);
    for item in 0..n_items {
        let r = present(grid, item);
        if r.len() < 2 {
            continue;
        }
        eligible += 1;
        let unanimous = |v: &[u8]| v.iter().all(|&x| x == v[0]);
        let fixable = unanimous(&r)
            || (0..r.len()).any(|skip| {
                let rest: Vec<u8> = r.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, &v)| v).collect();
                unanimous(&rest)
            });
        if fixable {
            ok += 1;
        }
    }
    (eligible > 0).then(|| ok as f64 / eligible as f64)
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)).sqrt()
}

//! Brute-force reference implementations for the test suites.
//!
//! Everything here is written directly from the definitions and only
//! borrows domain types from the main crate, never its algorithms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use accuracytrader::dataset::{Corpus, Dataset, ItemId, PointId, RatingMatrix, RatingScale};
use accuracytrader::spatial::IndexFile;
use accuracytrader::synopsis::{AggregatedPage, AggregatedPoint, AggregatedUser, ItemAggregate, Payload};

/// One oracle comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub case: String,
    pub oracle: Vec<f64>,
    pub actual: Vec<f64>,
    pub tolerance: f64,
}

impl OracleReport {
    pub fn new(case: impl Into<String>, oracle: Vec<f64>, actual: Vec<f64>, tolerance: f64) -> Self {
        OracleReport {
            case: case.into(),
            oracle,
            actual,
            tolerance,
        }
    }

    pub fn max_error(&self) -> f64 {
        if self.oracle.len() != self.actual.len() {
            return f64::INFINITY;
        }
        self.oracle
            .iter()
            .zip(&self.actual)
            .map(|(a, b)| if a == b { 0.0 } else { (a - b).abs() })
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_error() <= self.tolerance
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} (max error {:e}, tolerance {:e})",
            self.case,
            if self.passed() { "pass" } else { "FAIL" },
            self.max_error(),
            self.tolerance
        )
    }
}

/// Sample Pearson correlation over co-rated items; 0 below `min_overlap`
/// shared items or with a constant side.
pub fn oracle_pearson(a: &BTreeMap<ItemId, f64>, b: &BTreeMap<ItemId, f64>, min_overlap: usize) -> f64 {
    let shared: Vec<(f64, f64)> = a.iter().filter_map(|(i, x)| b.get(i).map(|y| (*x, *y))).collect();
    if shared.is_empty() || shared.len() < min_overlap {
        return 0.0;
    }
    let n = shared.len() as f64;
    let mx = shared.iter().map(|p| p.0).sum::<f64>() / n;
    let my = shared.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = shared.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = shared.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let vy: f64 = shared.iter().map(|(_, y)| (y - my) * (y - my)).sum();
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    (cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0)
}

pub fn oracle_rmse(predictions: &[f64], actuals: &[f64]) -> f64 {
    assert_eq!(predictions.len(), actuals.len());
    assert!(!actuals.is_empty());
    let mut sq = 0.0;
    for i in 0..actuals.len() {
        let d = predictions[i] - actuals[i];
        sq += d * d;
    }
    (sq / actuals.len() as f64).sqrt()
}

/// Nearest-rank percentile: the smallest sample `v` such that at least
/// `p%` of the samples are `<= v`.
pub fn oracle_percentile(samples: &[f64], p: f64) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let need = p / 100.0 * sorted.len() as f64;
    for (i, v) in sorted.iter().enumerate() {
        // Rank i + 1 covers i + 1 samples; allow rounding noise in `need`.
        if (i + 1) as f64 >= need - 1e-9 {
            return Some(*v);
        }
    }
    sorted.last().copied()
}

/// Mean-centered user-based CF predictions over every user of `matrix`,
/// clamped to the scale; items nobody rated fall back to the active mean.
pub fn oracle_cf_exact(
    matrix: &RatingMatrix,
    known: &BTreeMap<ItemId, f64>,
    targets: &[ItemId],
    min_overlap: usize,
    scale: RatingScale,
) -> BTreeMap<ItemId, f64> {
    let active_mean = known.values().sum::<f64>() / known.len() as f64;
    let mut out = BTreeMap::new();
    for t in targets {
        let (mut num, mut den) = (0.0, 0.0);
        for (_, ratings) in matrix.users() {
            let Some(r) = ratings.get(t) else { continue };
            let w = oracle_pearson(known, ratings, min_overlap);
            if w == 0.0 {
                continue;
            }
            let mean = ratings.values().sum::<f64>() / ratings.len() as f64;
            num += w * (r - mean);
            den += w.abs();
        }
        let p = if den > 0.0 {
            active_mean + num / den
        } else {
            active_mean
        };
        out.insert(*t, p.max(scale.min).min(scale.max));
    }
    out
}

/// tf-idf cosine (`idf = ln(1 + N/df)`, query terms weighted 1) of every
/// document, from document frequencies counted here.
pub fn oracle_scores(corpus: &Corpus, terms: &[String]) -> BTreeMap<PointId, f64> {
    let n = corpus.len() as f64;
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, doc) in corpus.docs() {
        for t in doc.terms.keys() {
            *df.entry(t.as_str()).or_default() += 1;
        }
    }
    let idf = |t: &str| df.get(t).map_or(0.0, |d| (1.0 + n / *d as f64).ln());
    let mut query: Vec<&String> = terms.iter().collect();
    query.sort();
    query.dedup();
    let mut out = BTreeMap::new();
    for (id, doc) in corpus.docs() {
        let norm = doc
            .terms
            .iter()
            .map(|(t, c)| (f64::from(*c) * idf(t)).powi(2))
            .sum::<f64>()
            .sqrt();
        let mut dot = 0.0;
        for t in &query {
            if let Some(c) = doc.terms.get(*t) {
                dot += f64::from(*c) * idf(t);
            }
        }
        out.insert(id, if norm > 0.0 { dot / norm } else { 0.0 });
    }
    out
}

/// Top-k `(page, score)` by score descending then id ascending; zero
/// scores never qualify.
pub fn oracle_search_exact(corpus: &Corpus, terms: &[String], k: usize) -> Vec<(PointId, f64)> {
    let mut all: Vec<(PointId, f64)> = oracle_scores(corpus, terms)
        .into_iter()
        .filter(|(_, s)| *s > 0.0)
        .collect();
    sort_desc(&mut all);
    all.truncate(k);
    all
}

fn sort_desc<K: Ord + Copy>(v: &mut [(K, f64)]) {
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// Global top-k of several ranked lists: best score per key, then the
/// same ordering as [`oracle_search_exact`].
pub fn oracle_merge<K: Ord + Copy>(lists: &[Vec<(K, f64)>], k: usize) -> Vec<(K, f64)> {
    let mut best: BTreeMap<K, f64> = BTreeMap::new();
    for list in lists {
        for (key, s) in list {
            let e = best.entry(*key).or_insert(*s);
            if *s > *e {
                *e = *s;
            }
        }
    }
    let mut all: Vec<(K, f64)> = best.into_iter().collect();
    sort_desc(&mut all);
    all.truncate(k);
    all
}

/// Recomputes every aggregated point of `index` from the raw data.
pub fn oracle_reaggregate(index: &IndexFile, data: &Dataset) -> Vec<AggregatedPoint> {
    index
        .entries
        .iter()
        .map(|(agg, members)| AggregatedPoint {
            id: *agg,
            payload: match data {
                Dataset::Ratings(m) => Payload::User(reaggregate_user(members, m)),
                Dataset::Text(c) => Payload::Page(reaggregate_page(members, c)),
            },
        })
        .collect()
}

fn reaggregate_user(members: &BTreeSet<PointId>, matrix: &RatingMatrix) -> AggregatedUser {
    let items: BTreeSet<ItemId> = members
        .iter()
        .filter_map(|m| matrix.user(*m))
        .flat_map(|r| r.keys().copied())
        .collect();
    let mut ratings = BTreeMap::new();
    for item in items {
        let mut sum = 0.0;
        let mut count = 0u32;
        for m in members {
            if let Some(r) = matrix.user(*m).and_then(|row| row.get(&item)) {
                sum += r;
                count += 1;
            }
        }
        ratings.insert(
            item,
            ItemAggregate {
                mean: sum / f64::from(count),
                count,
            },
        );
    }
    AggregatedUser { ratings }
}

fn reaggregate_page(members: &BTreeSet<PointId>, corpus: &Corpus) -> AggregatedPage {
    let mut page = AggregatedPage::default();
    for m in members {
        let Some(doc) = corpus.get(*m) else { continue };
        page.pages += 1;
        for (t, c) in &doc.terms {
            *page.terms.entry(t.clone()).or_insert(0) += u64::from(*c);
        }
    }
    page
}

/// Leading singular value of a dense matrix by power iteration on `AᵀA`.
pub fn oracle_top_singular_value(a: &[Vec<f64>], iters: usize) -> f64 {
    let cols = a.first().map_or(0, Vec::len);
    if cols == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / (cols as f64).sqrt(); cols];
    let mut sigma = 0.0;
    for _ in 0..iters {
        let av: Vec<f64> = a
            .iter()
            .map(|row| row.iter().zip(&v).map(|(x, y)| x * y).sum())
            .collect();
        let mut w = vec![0.0; cols];
        for (row, s) in a.iter().zip(&av) {
            for (j, x) in row.iter().enumerate() {
                w[j] += x * s;
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        sigma = norm.sqrt();
        v = w.into_iter().map(|x| x / norm).collect();
    }
    sigma
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(v: &[(u64, f64)]) -> BTreeMap<u64, f64> {
        v.iter().copied().collect()
    }

    #[test]
    fn pearson_hand_values() {
        let a = map(&[(1, 1.0), (2, 2.0), (3, 3.0)]);
        let b = map(&[(1, 2.0), (2, 4.0), (3, 6.0), (4, 1.0)]);
        assert!((oracle_pearson(&a, &b, 2) - 1.0).abs() < 1e-15);
        let c = map(&[(1, 3.0), (2, 2.0), (3, 1.0)]);
        assert!((oracle_pearson(&a, &c, 2) + 1.0).abs() < 1e-15);
        assert_eq!(oracle_pearson(&a, &map(&[(1, 5.0)]), 2), 0.0);
    }

    #[test]
    fn percentile_ranks() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(oracle_percentile(&xs, 99.9), Some(999.0));
        assert_eq!(oracle_percentile(&xs, 50.0), Some(500.0));
        assert_eq!(oracle_percentile(&[3.0, 1.0, 2.0], 0.0), Some(1.0));
        assert_eq!(oracle_percentile(&[], 50.0), None);
    }

    #[test]
    fn merge_keeps_best_score() {
        let merged = oracle_merge(&[vec![(1u64, 0.5), (2, 0.4)], vec![(1, 0.7), (3, 0.4)]], 3);
        assert_eq!(merged, vec![(1, 0.7), (2, 0.4), (3, 0.4)]);
    }

    #[test]
    fn singular_value_of_rank_one() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!((oracle_top_singular_value(&a, 50) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn report_tolerance() {
        assert!(OracleReport::new("x", vec![1.0], vec![1.0 + 1e-13], 1e-12).passed());
        assert!(!OracleReport::new("x", vec![1.0], vec![], 1.0).passed());
    }
}

//! Mini search engine: tf-idf cosine scoring over an inverted index,
//! aggregated-page scoring, top-k merging and overlap accuracy.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::dataset::{tokenize, Corpus, Document, PointId};
use crate::error::{Error, Result};
use crate::spatial::AggId;

pub const DEFAULT_K: usize = 10;

/// Document count and per-term document frequency.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub n: usize,
    pub df: BTreeMap<String, usize>,
}

impl CorpusStats {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut stats = CorpusStats::default();
        for (_, doc) in corpus.docs() {
            stats.n += 1;
            for term in doc.terms.keys() {
                *stats.df.entry(term.clone()).or_default() += 1;
            }
        }
        stats
    }

    /// Stats of the union of two disjoint corpora.
    pub fn merge(&mut self, other: &CorpusStats) {
        self.n += other.n;
        for (t, d) in &other.df {
            *self.df.entry(t.clone()).or_default() += d;
        }
    }

    /// `ln(1 + N/df)`, or 0 for terms absent from the corpus.
    pub fn idf(&self, term: &str) -> f64 {
        match self.df.get(term) {
            Some(&df) if df > 0 => (1.0 + self.n as f64 / df as f64).ln(),
            _ => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchRequest {
    /// Lowercased, sorted and deduplicated.
    pub terms: Vec<String>,
    pub k: usize,
}

impl SearchRequest {
    pub fn new(query: &str, k: usize) -> Result<Self> {
        let terms: Vec<String> = tokenize(query).into_keys().collect();
        if terms.is_empty() {
            return Err(Error::Invalid("search query has no terms".into()));
        }
        if k == 0 {
            return Err(Error::Invalid("k must be at least 1".into()));
        }
        Ok(SearchRequest { terms, k })
    }
}

/// Euclidean norm of a term vector weighted by idf.
fn weighted_norm<'a>(terms: impl Iterator<Item = (&'a String, f64)>, stats: &CorpusStats) -> f64 {
    terms
        .map(|(t, tf)| {
            let w = tf * stats.idf(t);
            w * w
        })
        .sum::<f64>()
        .sqrt()
}

fn score_with(tf: impl Fn(&str) -> Option<f64>, norm: f64, request: &SearchRequest, stats: &CorpusStats) -> f64 {
    if norm <= 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for term in &request.terms {
        if let Some(tf) = tf(term) {
            s += tf * stats.idf(term);
        }
    }
    s / norm
}

/// Score of one original page.
pub fn score(doc: &Document, request: &SearchRequest, stats: &CorpusStats) -> f64 {
    let norm = weighted_norm(doc.terms.iter().map(|(t, n)| (t, f64::from(*n))), stats);
    score_with(|t| doc.terms.get(t).map(|n| f64::from(*n)), norm, request, stats)
}

/// Correlation of an aggregated page: the same score over its merged
/// term counts, normalized by the merged vector's own norm.
pub fn score_aggregated(terms: &BTreeMap<String, u64>, request: &SearchRequest, stats: &CorpusStats) -> f64 {
    let norm = weighted_norm(terms.iter().map(|(t, n)| (t, *n as f64)), stats);
    score_with(|t| terms.get(t).map(|n| *n as f64), norm, request, stats)
}

/// A result slot: a real page or a stand-in for an unrefined aggregate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HitTarget {
    Page(PointId),
    Placeholder { component: usize, agg: AggId },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub target: HitTarget,
    pub score: f64,
}

/// Descending score, then ascending target.
pub fn hit_order(a: &Hit, b: &Hit) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.target.cmp(&b.target))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SearchResult {
    pub hits: Vec<Hit>,
}

impl SearchResult {
    /// Sorts, drops duplicate targets (keeping the best) and cuts to `k`.
    pub fn from_hits(mut hits: Vec<Hit>, k: usize) -> Self {
        hits.sort_by(hit_order);
        let mut seen = BTreeSet::new();
        hits.retain(|h| seen.insert(h.target));
        hits.truncate(k);
        SearchResult { hits }
    }

    pub fn pages(&self) -> impl Iterator<Item = PointId> + '_ {
        self.hits.iter().filter_map(|h| match h.target {
            HitTarget::Page(id) => Some(id),
            HitTarget::Placeholder { .. } => None,
        })
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvertedIndex {
    /// Postings sorted by doc id.
    pub postings: BTreeMap<String, Vec<(PointId, u32)>>,
    pub lengths: BTreeMap<PointId, u64>,
    norms: BTreeMap<PointId, f64>,
    pub stats: CorpusStats,
}

impl InvertedIndex {
    /// Index with the corpus's own statistics.
    pub fn build(corpus: &Corpus) -> Self {
        Self::build_with_stats(corpus, CorpusStats::from_corpus(corpus))
    }

    /// Index scored with externally supplied (e.g. global) statistics.
    pub fn build_with_stats(corpus: &Corpus, stats: CorpusStats) -> Self {
        let mut postings: BTreeMap<String, Vec<(PointId, u32)>> = BTreeMap::new();
        let mut lengths = BTreeMap::new();
        let mut norms = BTreeMap::new();
        for (id, doc) in corpus.docs() {
            for (t, n) in &doc.terms {
                postings.entry(t.clone()).or_default().push((id, *n));
            }
            lengths.insert(id, doc.length());
            norms.insert(
                id,
                weighted_norm(doc.terms.iter().map(|(t, n)| (t, f64::from(*n))), &stats),
            );
        }
        for list in postings.values_mut() {
            list.sort_unstable();
        }
        InvertedIndex {
            postings,
            lengths,
            norms,
            stats,
        }
    }

    pub fn doc_count(&self) -> usize {
        self.lengths.len()
    }
}

/// Exact top-k over every indexed page with a positive score.
pub fn search_exact(index: &InvertedIndex, request: &SearchRequest) -> SearchResult {
    let mut acc: BTreeMap<PointId, f64> = BTreeMap::new();
    for term in &request.terms {
        let idf = index.stats.idf(term);
        if let Some(list) = index.postings.get(term) {
            for (doc, tf) in list {
                *acc.entry(*doc).or_insert(0.0) += f64::from(*tf) * idf;
            }
        }
    }
    let hits = acc
        .into_iter()
        .filter_map(|(doc, s)| {
            let norm = index.norms[&doc];
            let score = if norm > 0.0 { s / norm } else { 0.0 };
            (score > 0.0).then_some(Hit {
                target: HitTarget::Page(doc),
                score,
            })
        })
        .collect();
    SearchResult::from_hits(hits, request.k)
}

/// Global top-k across component results.
pub fn merge_topk(results: &[SearchResult], k: usize) -> SearchResult {
    SearchResult::from_hits(results.iter().flat_map(|r| r.hits.iter().copied()).collect(), k)
}

/// Fraction of the actual top-k pages present in the retrieved result.
/// An empty actual result counts as fully recovered.
pub fn accuracy_search(retrieved: &SearchResult, actual: &SearchResult) -> f64 {
    let actual: BTreeSet<PointId> = actual.pages().collect();
    if actual.is_empty() {
        return 1.0;
    }
    let hit = retrieved.pages().filter(|p| actual.contains(p)).count();
    hit as f64 / actual.len() as f64
}

/// Loss in percent: `100 × (1 − overlap)`.
pub fn accuracy_loss_search(retrieved: &SearchResult, actual: &SearchResult) -> f64 {
    100.0 * (1.0 - accuracy_search(retrieved, actual))
}

/// Search request file: `request_id<TAB>query terms` per line.
pub fn parse_requests(reader: impl Read, origin: &Path, k: usize) -> Result<Vec<(u64, SearchRequest)>> {
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, query) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(origin, lineno, "expected `request_id<TAB>query`"))?;
        let id: u64 = id
            .trim()
            .parse()
            .map_err(|e| Error::parse(origin, lineno, format!("request id: {e}")))?;
        if !ids.insert(id) {
            return Err(Error::Duplicate(format!(
                "request {id} at {}:{lineno}",
                origin.display()
            )));
        }
        let req = SearchRequest::new(query, k).map_err(|e| Error::parse(origin, lineno, e.to_string()))?;
        out.push((id, req));
    }
    Ok(out)
}

pub fn requests_to_tsv(requests: &[(u64, SearchRequest)]) -> String {
    let mut out = String::new();
    for (id, r) in requests {
        let _ = writeln!(out, "{id}\t{}", r.terms.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(docs: &[&str]) -> Corpus {
        let mut c = Corpus::new();
        for (i, body) in docs.iter().enumerate() {
            c.insert(i as PointId, Document::from_text(format!("d{i}"), body))
                .unwrap();
        }
        c
    }

    #[test]
    fn no_shared_terms_scores_zero() {
        let c = corpus(&["apple pie", "banana split"]);
        let stats = CorpusStats::from_corpus(&c);
        let q = SearchRequest::new("cherry", 10).unwrap();
        assert_eq!(score(c.get(0).unwrap(), &q, &stats), 0.0);
    }

    #[test]
    fn higher_count_scores_higher() {
        let c = corpus(&["apple apple pie", "apple pie pie", "kiwi"]);
        let stats = CorpusStats::from_corpus(&c);
        let q = SearchRequest::new("apple", 10).unwrap();
        assert!(score(c.get(0).unwrap(), &q, &stats) > score(c.get(1).unwrap(), &q, &stats));
    }

    #[test]
    fn exact_search_matches_direct_scoring() {
        let c = corpus(&["a b c", "a a d", "b d e", "c c c a", "e f"]);
        let index = InvertedIndex::build(&c);
        let q = SearchRequest::new("a c", 10).unwrap();
        let res = search_exact(&index, &q);
        let mut direct: Vec<(PointId, f64)> = c
            .docs()
            .map(|(id, d)| (id, score(d, &q, &index.stats)))
            .filter(|(_, s)| *s > 0.0)
            .collect();
        direct.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let got: Vec<(PointId, f64)> = res.pages().zip(res.hits.iter().map(|h| h.score)).collect();
        assert_eq!(got, direct);
        assert_eq!(res.len(), 3);

        let none = SearchRequest::new("zzz", 10).unwrap();
        assert!(search_exact(&index, &none).is_empty());
    }

    #[test]
    fn single_member_aggregate_equals_page_score() {
        let c = corpus(&["a b b", "c"]);
        let stats = CorpusStats::from_corpus(&c);
        let q = SearchRequest::new("b a", 10).unwrap();
        let doc = c.get(0).unwrap();
        let merged: BTreeMap<String, u64> = doc.terms.iter().map(|(t, n)| (t.clone(), u64::from(*n))).collect();
        assert_eq!(score_aggregated(&merged, &q, &stats), score(doc, &q, &stats));
    }

    fn page(id: PointId, score: f64) -> Hit {
        Hit {
            target: HitTarget::Page(id),
            score,
        }
    }

    #[test]
    fn merge_examples() {
        let a = SearchResult::from_hits(vec![page(1, 0.9), page(2, 0.5)], 10);
        assert_eq!(merge_topk(std::slice::from_ref(&a), 10), a);
        let high = SearchResult::from_hits(vec![page(5, 0.9), page(6, 0.8)], 10);
        let low = SearchResult::from_hits(vec![page(1, 0.2), page(2, 0.1)], 10);
        let m = merge_topk(&[low, high], 3);
        assert_eq!(m.pages().collect::<Vec<_>>(), vec![5, 6, 1]);
        let tie = merge_topk(&[SearchResult::from_hits(vec![page(9, 0.5), page(3, 0.5)], 10)], 10);
        assert_eq!(tie.pages().collect::<Vec<_>>(), vec![3, 9]);
    }

    #[test]
    fn accuracy_examples() {
        let ten: Vec<Hit> = (0..10).map(|i| page(i, 1.0 - i as f64 * 0.01)).collect();
        let actual = SearchResult::from_hits(ten.clone(), 10);
        assert_eq!(accuracy_search(&actual, &actual), 1.0);
        let other = SearchResult::from_hits((20..30).map(|i| page(i, 0.5)).collect(), 10);
        assert_eq!(accuracy_search(&other, &actual), 0.0);
        let mut seven: Vec<Hit> = ten[..7].to_vec();
        seven.extend((40..43).map(|i| page(i, 0.1)));
        assert!((accuracy_search(&SearchResult::from_hits(seven, 10), &actual) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn request_validation_and_file() {
        assert!(SearchRequest::new("  ", 10).is_err());
        assert!(SearchRequest::new("a", 0).is_err());
        let q = SearchRequest::new("B a b", 10).unwrap();
        assert_eq!(q.terms, vec!["a", "b"]);
        let reqs = vec![(3, q)];
        let text = requests_to_tsv(&reqs);
        assert_eq!(parse_requests(text.as_bytes(), Path::new("q.tsv"), 10).unwrap(), reqs);
        assert!(parse_requests("1\ta\n1\tb\n".as_bytes(), Path::new("q.tsv"), 10).is_err());
    }
}

//! Seeded synthetic datasets and request streams.
//!
//! Rating data: users belong to one of `clusters` taste profiles spaced at
//! evenly graded angles between two random item-preference axes, so the
//! correlation between clusters falls off gradually with their distance.
//! Text data: topics on a ring; each page mixes its own topic with the
//! next one and a shared background vocabulary.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cf::{CfRequest, TestRating};
use crate::dataset::{
    Corpus, Dataset, Document, ItemId, PointContent, PointId, RatingMatrix, RatingScale, UserRatings,
};
use crate::error::{Error, Result};
use crate::search::SearchRequest;
use crate::synopsis::{ChangeSet, SynopsisState};

#[derive(Clone, Debug, PartialEq)]
pub struct CfSynthConfig {
    pub users: usize,
    pub items: usize,
    pub clusters: usize,
    /// Probability that a user rates a given item.
    pub density: f64,
    /// Held-out active users, one request each.
    pub active_users: usize,
    /// Share of an active user's ratings held out as targets.
    pub target_fraction: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for CfSynthConfig {
    fn default() -> Self {
        CfSynthConfig {
            users: 2000,
            items: 200,
            clusters: 10,
            density: 0.3,
            active_users: 200,
            target_fraction: 0.2,
            noise: 0.35,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CfSynth {
    pub matrix: RatingMatrix,
    /// Keyed by the active user's id (disjoint from the matrix's users).
    pub requests: Vec<(PointId, CfRequest)>,
    pub test: Vec<TestRating>,
    pub cluster_of: BTreeMap<PointId, usize>,
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

pub fn generate_cf(cfg: &CfSynthConfig) -> Result<CfSynth> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let axis_a: Vec<f64> = (0..cfg.items).map(|_| std.sample(&mut rng)).collect();
    let axis_b: Vec<f64> = (0..cfg.items).map(|_| std.sample(&mut rng)).collect();
    let clusters = cfg.clusters.max(1);
    let profile = |c: usize| -> Vec<f64> {
        let theta = if clusters == 1 {
            0.0
        } else {
            c as f64 / (clusters - 1) as f64 * std::f64::consts::FRAC_PI_2
        };
        axis_a
            .iter()
            .zip(&axis_b)
            .map(|(a, b)| theta.cos() * a + theta.sin() * b)
            .collect()
    };
    let profiles: Vec<Vec<f64>> = (0..clusters).map(profile).collect();
    let scale = RatingScale::default();
    let user = |rng: &mut ChaCha8Rng, c: usize| -> UserRatings {
        let bias = 0.3 * std.sample(rng);
        let mut ratings = UserRatings::new();
        while ratings.len() < 5.min(cfg.items) {
            for (i, p) in profiles[c].iter().enumerate() {
                if rng.random::<f64>() < cfg.density {
                    let r = 3.0 + bias + 1.2 * p + cfg.noise * std.sample(rng);
                    ratings.insert(i as ItemId, round1(scale.clamp(r)));
                }
            }
        }
        ratings
    };

    let mut matrix = RatingMatrix::new(scale);
    let mut cluster_of = BTreeMap::new();
    for u in 0..cfg.users {
        let c = u % clusters;
        let id = u as PointId;
        matrix.set_user(id, user(&mut rng, c))?;
        cluster_of.insert(id, c);
    }
    let mut requests = Vec::new();
    let mut test = Vec::new();
    for a in 0..cfg.active_users {
        let c = rng.random_range(0..clusters);
        let id = (cfg.users + a) as PointId;
        let ratings = user(&mut rng, c);
        let mut items: Vec<ItemId> = ratings.keys().copied().collect();
        items.shuffle(&mut rng);
        let n_targets = ((items.len() as f64 * cfg.target_fraction).round() as usize).clamp(1, items.len() - 1);
        let (targets, _) = items.split_at(n_targets);
        let mut known = ratings.clone();
        for t in targets {
            known.remove(t);
            test.push(TestRating {
                user: id,
                item: *t,
                rating: ratings[t],
            });
        }
        requests.push((id, CfRequest::new(known, targets.to_vec())?));
        cluster_of.insert(id, c);
    }
    test.sort_by_key(|t| (t.user, t.item));
    Ok(CfSynth {
        matrix,
        requests,
        test,
        cluster_of,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchSynthConfig {
    pub docs: usize,
    pub topics: usize,
    pub words_per_topic: usize,
    pub background_words: usize,
    pub doc_len: usize,
    /// Share of a page's words drawn from the neighboring topic.
    pub neighbor_mix: f64,
    /// Share of a page's words drawn from the background vocabulary.
    pub background_mix: f64,
    pub queries: usize,
    pub k: usize,
    pub seed: u64,
}

impl Default for SearchSynthConfig {
    fn default() -> Self {
        SearchSynthConfig {
            docs: 2000,
            topics: 10,
            words_per_topic: 40,
            background_words: 60,
            doc_len: 40,
            neighbor_mix: 0.25,
            background_mix: 0.25,
            queries: 200,
            k: 10,
            seed: 11,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchSynth {
    pub corpus: Corpus,
    pub requests: Vec<(u64, SearchRequest)>,
    pub topic_of: BTreeMap<PointId, usize>,
}

/// Index drawn with weight proportional to `1 / (rank + 1)`.
fn zipf(rng: &mut ChaCha8Rng, n: usize) -> usize {
    let total: f64 = (1..=n).map(|r| 1.0 / r as f64).sum();
    let mut x = rng.random::<f64>() * total;
    for r in 0..n {
        x -= 1.0 / (r + 1) as f64;
        if x <= 0.0 {
            return r;
        }
    }
    n - 1
}

pub fn generate_search(cfg: &SearchSynthConfig) -> Result<SearchSynth> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let topics = cfg.topics.max(1);
    // Each topic's vocabulary is shuffled so that popularity ranks differ.
    let vocab: Vec<Vec<String>> = (0..topics)
        .map(|t| {
            let mut words: Vec<String> = (0..cfg.words_per_topic).map(|w| format!("t{t}w{w}")).collect();
            words.shuffle(&mut rng);
            words
        })
        .collect();
    let background: Vec<String> = (0..cfg.background_words).map(|w| format!("bg{w}")).collect();

    let mut corpus = Corpus::new();
    let mut topic_of = BTreeMap::new();
    for d in 0..cfg.docs {
        let t = d % topics;
        let mut words = Vec::with_capacity(cfg.doc_len);
        for _ in 0..cfg.doc_len {
            let x: f64 = rng.random();
            let word = if x < cfg.background_mix && !background.is_empty() {
                &background[zipf(&mut rng, background.len())]
            } else if x < cfg.background_mix + cfg.neighbor_mix {
                let v = &vocab[(t + 1) % topics];
                &v[zipf(&mut rng, v.len())]
            } else {
                &vocab[t][zipf(&mut rng, vocab[t].len())]
            };
            words.push(word.as_str());
        }
        let id = d as PointId;
        corpus.insert(id, Document::from_text(format!("doc{d}"), &words.join(" ")))?;
        topic_of.insert(id, t);
    }

    let mut requests = Vec::with_capacity(cfg.queries);
    for q in 0..cfg.queries {
        let t = rng.random_range(0..topics);
        let n_terms = rng.random_range(2..=3);
        let head = &vocab[t][..vocab[t].len().min(10)];
        let terms: Vec<&String> = head.choose_multiple(&mut rng, n_terms).collect();
        let query = terms.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" ");
        requests.push((q as u64, SearchRequest::new(&query, cfg.k)?));
    }
    Ok(SearchSynth {
        corpus,
        requests,
        topic_of,
    })
}

/// Which kind of change [`sweep_changes`] produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChangeKind {
    Add,
    Modify,
}

/// A cluster-local change set touching `percent`% of the state's points:
/// the points nearest (in reduced space) to a random anchor are either
/// modified in place or copied under fresh ids, in both cases with small
/// random perturbations.
pub fn sweep_changes(state: &SynopsisState, percent: f64, kind: ChangeKind, seed: u64) -> Result<ChangeSet> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(Error::Invalid("change percentage must be in (0, 100]".into()));
    }
    let data = &state.subset.data;
    let ids = data.point_ids();
    if ids.is_empty() {
        return Err(Error::Invalid("cannot change an empty subset".into()));
    }
    let count = ((ids.len() as f64 * percent / 100.0).ceil() as usize).clamp(1, ids.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchor = state
        .features
        .row(ids[rng.random_range(0..ids.len())])
        .expect("every point has features")
        .to_vec();
    let mut by_distance: Vec<(f64, PointId)> = ids
        .iter()
        .map(|id| {
            let f = state.features.row(*id).expect("every point has features");
            (f.iter().zip(&anchor).map(|(a, b)| (a - b) * (a - b)).sum(), *id)
        })
        .collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut next_id = ids.iter().max().map_or(0, |m| m + 1);
    let mut changes = ChangeSet::default();
    for (_, id) in by_distance.into_iter().take(count) {
        let content = match data.content(id).expect("listed point") {
            PointContent::Ratings(mut r) => {
                let scale = match data {
                    Dataset::Ratings(m) => m.scale(),
                    Dataset::Text(_) => unreachable!(),
                };
                for v in r.values_mut() {
                    let step = if rng.random_bool(0.5) { 0.5 } else { -0.5 };
                    *v = scale.clamp(*v + step);
                }
                PointContent::Ratings(r)
            }
            PointContent::Document(mut d) => {
                let terms: Vec<String> = d.terms.keys().cloned().collect();
                if let Some(t) = terms.choose(&mut rng) {
                    *d.terms.entry(t.clone()).or_default() += 1;
                }
                if kind == ChangeKind::Add {
                    d.name = format!("{}-copy{next_id}", d.name);
                }
                PointContent::Document(d)
            }
        };
        match kind {
            ChangeKind::Modify => changes.modified.push((id, content)),
            ChangeKind::Add => {
                changes.added.push((next_id, content));
                next_id += 1;
            }
        }
    }
    Ok(changes)
}

//! Precomputed request payloads for the simulator.
//!
//! For every (payload, component) pair the engine's ranking and the
//! result after each processed set are computed once up front; the
//! simulator then only decides how many sets each sub-operation gets and
//! looks the result up.

use std::collections::BTreeMap;

use crate::cf::{self, CfConfig, CfRequest, CfResult, TestRating};
use crate::dataset::{Dataset, ItemId, PointId, RatingScale};
use crate::effectiveness::component_stats;
use crate::engine::{rank, ApproxTask, CfTask, SearchTask};
use crate::error::{Error, Result};
use crate::search::{self, InvertedIndex, SearchRequest, SearchResult};
use crate::synopsis::SynopsisState;

/// Cost shape of one payload on one component.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentProfile {
    pub synopsis_size: usize,
    /// Original points per ranked set, in rank order.
    pub set_sizes: Vec<usize>,
}

/// What a component contributed to a request.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coverage {
    /// Result did not arrive in time.
    Missing,
    /// Exact processing of the whole subset.
    Full,
    /// Synopsis plus the first `n` ranked sets.
    Prefix(usize),
}

#[derive(Clone, Debug)]
struct CfPayload {
    active_mean: f64,
    actuals: Vec<(ItemId, f64)>,
    full: Vec<CfResult>,
    prefixes: Vec<Vec<CfResult>>,
    exact_rmse: f64,
}

#[derive(Clone, Debug)]
struct SearchPayload {
    k: usize,
    full: Vec<SearchResult>,
    prefixes: Vec<Vec<SearchResult>>,
    exact: SearchResult,
}

#[derive(Clone, Debug)]
enum Accuracy {
    None,
    Cf {
        cfg: CfConfig,
        scale: RatingScale,
        payloads: Vec<CfPayload>,
    },
    Search(Vec<SearchPayload>),
}

#[derive(Clone, Debug)]
pub struct Workload {
    pub subset_sizes: Vec<usize>,
    pub request_ids: Vec<u64>,
    /// `[payload][component]`.
    pub profiles: Vec<Vec<ComponentProfile>>,
    by_id: BTreeMap<u64, usize>,
    accuracy: Accuracy,
}

fn snapshots<T: ApproxTask>(mut task: T) -> (ComponentProfile, Vec<T::Output>) {
    let order = rank(&task.process_synopsis());
    let mut results = vec![task.result()];
    let mut set_sizes = Vec::with_capacity(order.len());
    for agg in order {
        set_sizes.push(task.set_size(agg));
        task.improve(agg);
        results.push(task.result());
    }
    (
        ComponentProfile {
            synopsis_size: task.synopsis_size(),
            set_sizes,
        },
        results,
    )
}

fn index_ids(ids: &[u64]) -> Result<BTreeMap<u64, usize>> {
    let mut by_id = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        if by_id.insert(*id, i).is_some() {
            return Err(Error::Duplicate(format!("request {id} listed twice")));
        }
    }
    Ok(by_id)
}

impl Workload {
    /// Payload-free workload: one request id (0), no synopsis, each
    /// subset scanned as a single set; accuracy is not measured.
    pub fn uniform(subset_sizes: Vec<usize>) -> Self {
        let profile = subset_sizes
            .iter()
            .map(|n| ComponentProfile {
                synopsis_size: 0,
                set_sizes: vec![*n],
            })
            .collect();
        Workload {
            subset_sizes,
            request_ids: vec![0],
            profiles: vec![profile],
            by_id: BTreeMap::from([(0, 0)]),
            accuracy: Accuracy::None,
        }
    }

    pub fn cf(
        states: &[SynopsisState],
        requests: &[(PointId, CfRequest)],
        test: &[TestRating],
        cfg: CfConfig,
    ) -> Result<Self> {
        let mut scale = None;
        for s in states {
            match &s.subset.data {
                Dataset::Ratings(m) => scale = Some(m.scale()),
                Dataset::Text(_) => return Err(Error::Invalid("CF workload needs rating subsets".into())),
            }
        }
        let scale = scale.ok_or_else(|| Error::Invalid("no components".into()))?;
        let mut actual: BTreeMap<(PointId, ItemId), f64> = BTreeMap::new();
        for t in test {
            actual.insert((t.user, t.item), t.rating);
        }
        let mut profiles = Vec::with_capacity(requests.len());
        let mut payloads = Vec::with_capacity(requests.len());
        for (id, req) in requests {
            let actuals = req
                .targets
                .iter()
                .map(|item| {
                    actual
                        .get(&(*id, *item))
                        .map(|r| (*item, *r))
                        .ok_or_else(|| Error::Invalid(format!("request {id}: no test rating for item {item}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut row = Vec::with_capacity(states.len());
            let mut full = Vec::with_capacity(states.len());
            let mut prefixes = Vec::with_capacity(states.len());
            for s in states {
                let (profile, snaps) = snapshots(CfTask::new(s, req, cfg)?);
                let Dataset::Ratings(m) = &s.subset.data else {
                    unreachable!()
                };
                full.push(cf::process_exact(req, m, &cfg));
                prefixes.push(snaps);
                row.push(profile);
            }
            let mut payload = CfPayload {
                active_mean: req.active_mean(),
                actuals,
                full,
                prefixes,
                exact_rmse: 0.0,
            };
            payload.exact_rmse = cf_rmse(&payload, scale, &cfg, &vec![Coverage::Full; states.len()]);
            payloads.push(payload);
            profiles.push(row);
        }
        let request_ids: Vec<u64> = requests.iter().map(|(id, _)| *id).collect();
        Ok(Workload {
            subset_sizes: states.iter().map(|s| s.subset.len()).collect(),
            by_id: index_ids(&request_ids)?,
            request_ids,
            profiles,
            accuracy: Accuracy::Cf { cfg, scale, payloads },
        })
    }

    pub fn search(states: &[SynopsisState], requests: &[(u64, SearchRequest)], global_stats: bool) -> Result<Self> {
        let stats = component_stats(states, global_stats)?;
        let indexes: Vec<InvertedIndex> = states
            .iter()
            .zip(&stats)
            .map(|(s, st)| match &s.subset.data {
                Dataset::Text(c) => InvertedIndex::build_with_stats(c, st.clone()),
                Dataset::Ratings(_) => unreachable!("checked by component_stats"),
            })
            .collect();
        let mut profiles = Vec::with_capacity(requests.len());
        let mut payloads = Vec::with_capacity(requests.len());
        for (_, req) in requests {
            let mut row = Vec::with_capacity(states.len());
            let mut prefixes = Vec::with_capacity(states.len());
            for (s, st) in states.iter().zip(&stats) {
                let (profile, snaps) = snapshots(SearchTask::new(s, req, st)?);
                prefixes.push(snaps);
                row.push(profile);
            }
            let full: Vec<SearchResult> = indexes.iter().map(|ix| search::search_exact(ix, req)).collect();
            let exact = search::merge_topk(&full, req.k);
            payloads.push(SearchPayload {
                k: req.k,
                full,
                prefixes,
                exact,
            });
            profiles.push(row);
        }
        let request_ids: Vec<u64> = requests.iter().map(|(id, _)| *id).collect();
        Ok(Workload {
            subset_sizes: states.iter().map(|s| s.subset.len()).collect(),
            by_id: index_ids(&request_ids)?,
            request_ids,
            profiles,
            accuracy: Accuracy::Search(payloads),
        })
    }

    pub fn components(&self) -> usize {
        self.subset_sizes.len()
    }

    pub fn payload_of(&self, request_id: u64) -> Option<usize> {
        self.by_id.get(&request_id).copied()
    }

    /// Mean subset size, used to express rates relative to saturation.
    pub fn mean_subset_size(&self) -> f64 {
        self.subset_sizes.iter().sum::<usize>() as f64 / self.subset_sizes.len().max(1) as f64
    }

    /// Accuracy loss in percent of a request served with `coverage`.
    pub fn loss(&self, payload: usize, coverage: &[Coverage]) -> f64 {
        match &self.accuracy {
            Accuracy::None => 0.0,
            Accuracy::Cf { cfg, scale, payloads } => {
                let p = &payloads[payload];
                cf::accuracy_loss_cf(cf_rmse(p, *scale, cfg, coverage), p.exact_rmse)
            }
            Accuracy::Search(payloads) => {
                let p = &payloads[payload];
                let parts: Vec<SearchResult> = coverage
                    .iter()
                    .enumerate()
                    .filter_map(|(c, cov)| match cov {
                        Coverage::Missing => None,
                        Coverage::Full => Some(p.full[c].clone()),
                        Coverage::Prefix(n) => Some(p.prefixes[c][(*n).min(p.prefixes[c].len() - 1)].clone()),
                    })
                    .collect();
                search::accuracy_loss_search(&search::merge_topk(&parts, p.k), &p.exact)
            }
        }
    }
}

fn cf_rmse(p: &CfPayload, scale: RatingScale, cfg: &CfConfig, coverage: &[Coverage]) -> f64 {
    let mut merged = CfResult::default();
    for (c, cov) in coverage.iter().enumerate() {
        match cov {
            Coverage::Missing => {}
            Coverage::Full => merged.merge(&p.full[c]),
            Coverage::Prefix(n) => merged.merge(&p.prefixes[c][(*n).min(p.prefixes[c].len() - 1)]),
        }
    }
    let preds = merged.finalize(p.active_mean, scale, cfg);
    let (mut pr, mut ac) = (Vec::with_capacity(p.actuals.len()), Vec::with_capacity(p.actuals.len()));
    for (item, r) in &p.actuals {
        pr.push(preds.get(item).copied().unwrap_or(p.active_mean));
        ac.push(*r);
    }
    cf::rmse(&pr, &ac).unwrap_or(0.0)
}

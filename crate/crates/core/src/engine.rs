//! Accuracy-aware approximate processing for one component.
//!
//! The component answers from its synopsis first, ranks the aggregated
//! points by correlation, then refines the answer with the original sets
//! behind the best-ranked aggregates while the deadline and the `i_max`
//! budget allow. The deadline is checked before each set; a started set is
//! always completed.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use crate::cf::{self, CfConfig, CfRequest, CfResult, Contribution};
use crate::dataset::{Dataset, PointId};
use crate::error::{Error, Result};
use crate::search::{self, CorpusStats, Hit, HitTarget, SearchRequest, SearchResult};
use crate::spatial::AggId;
use crate::synopsis::{Payload, SynopsisState};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EngineParams {
    /// Deadline in ms since request submission; may be infinite.
    pub l_spe: f64,
    /// Maximum number of ranked sets processed.
    pub i_max: usize,
}

impl EngineParams {
    pub fn unbounded() -> Self {
        EngineParams {
            l_spe: f64::INFINITY,
            i_max: usize::MAX,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l_spe > 0.0) {
            return Err(Error::Invalid("l_spe must be positive".into()));
        }
        Ok(())
    }
}

/// Elapsed time since the request was submitted.
pub trait Clock {
    fn elapsed_ms(&self) -> f64;

    /// Accounts for work done; real clocks ignore this.
    fn charge(&mut self, _synopsis_points: usize, _original_points: usize) {}
}

/// Wall-clock time since construction.
#[derive(Clone, Copy, Debug)]
pub struct WallClock {
    submitted: Instant,
}

impl WallClock {
    pub fn start() -> Self {
        WallClock {
            submitted: Instant::now(),
        }
    }
}

impl Clock for WallClock {
    fn elapsed_ms(&self) -> f64 {
        self.submitted.elapsed().as_secs_f64() * 1e3
    }
}

/// Clock frozen at a fixed elapsed time.
#[derive(Clone, Copy, Debug, Default)]
pub struct FixedClock(pub f64);

impl Clock for FixedClock {
    fn elapsed_ms(&self) -> f64 {
        self.0
    }
}

/// Workload hooks driven by [`process`].
pub trait ApproxTask {
    type Output;

    /// Builds the initial result from the synopsis and returns the
    /// correlation of every aggregated point.
    fn process_synopsis(&mut self) -> Vec<(AggId, f64)>;

    fn synopsis_size(&self) -> usize;

    /// Number of original points behind `agg`.
    fn set_size(&self, agg: AggId) -> usize;

    /// Refines the result with the original points behind `agg`.
    fn improve(&mut self, agg: AggId);

    /// Current result; cheap enough to call after every set.
    fn result(&self) -> Self::Output;
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentOutcome<R> {
    pub result: R,
    /// Aggregated ids whose sets were processed, in order.
    pub processed: Vec<AggId>,
    pub synopsis_only: bool,
    pub elapsed_ms: f64,
}

impl<R> ComponentOutcome<R> {
    pub fn sets_processed(&self) -> usize {
        self.processed.len()
    }
}

/// Descending correlation, ties by ascending aggregated id, NaN last.
pub fn rank(correlations: &[(AggId, f64)]) -> Vec<AggId> {
    let mut v = correlations.to_vec();
    v.sort_by(|a, b| match (a.1.is_nan(), b.1.is_nan()) {
        (false, false) => b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)),
        (x, y) => x.cmp(&y).then(a.0.cmp(&b.0)),
    });
    v.into_iter().map(|(id, _)| id).collect()
}

pub fn process<T: ApproxTask>(
    mut task: T,
    params: &EngineParams,
    clock: &mut impl Clock,
) -> ComponentOutcome<T::Output> {
    let correlations = task.process_synopsis();
    clock.charge(task.synopsis_size(), 0);
    let ranked = rank(&correlations);
    // At most i_max sets in total (the loop counter starts at 0).
    let limit = params.i_max.min(ranked.len());
    let mut processed = Vec::new();
    while processed.len() < limit && clock.elapsed_ms() < params.l_spe {
        let agg = ranked[processed.len()];
        clock.charge(0, task.set_size(agg));
        task.improve(agg);
        processed.push(agg);
    }
    ComponentOutcome {
        result: task.result(),
        synopsis_only: processed.is_empty(),
        processed,
        elapsed_ms: clock.elapsed_ms(),
    }
}

/// CF over one component: aggregated users stand in for their members
/// until their set is refined.
pub struct CfTask<'a> {
    state: &'a SynopsisState,
    request: &'a CfRequest,
    cfg: CfConfig,
    pending: BTreeMap<AggId, Contribution>,
    refined: CfResult,
}

impl<'a> CfTask<'a> {
    pub fn new(state: &'a SynopsisState, request: &'a CfRequest, cfg: CfConfig) -> Result<Self> {
        if !matches!(state.subset.data, Dataset::Ratings(_)) {
            return Err(Error::Invalid("CF task needs a rating subset".into()));
        }
        Ok(CfTask {
            state,
            request,
            cfg,
            pending: BTreeMap::new(),
            refined: CfResult::new(request),
        })
    }
}

impl ApproxTask for CfTask<'_> {
    type Output = CfResult;

    fn process_synopsis(&mut self) -> Vec<(AggId, f64)> {
        let mut out = Vec::with_capacity(self.state.synopsis.len());
        for p in &self.state.synopsis.points {
            let Payload::User(u) = &p.payload else { continue };
            let (w, c) = cf::neighbor_contribution(self.request, &u.means(), &self.cfg);
            self.pending.insert(p.id, c);
            out.push((p.id, w.abs()));
        }
        out
    }

    fn synopsis_size(&self) -> usize {
        self.state.synopsis.len()
    }

    fn set_size(&self, agg: AggId) -> usize {
        self.state.index.members(agg).map_or(0, BTreeSet::len)
    }

    fn improve(&mut self, agg: AggId) {
        let Dataset::Ratings(matrix) = &self.state.subset.data else {
            return;
        };
        self.pending.remove(&agg);
        for m in self.state.index.members(agg).into_iter().flatten() {
            if let Some(ratings) = matrix.user(*m) {
                let (_, c) = cf::neighbor_contribution(self.request, ratings, &self.cfg);
                self.refined.add(&c);
            }
        }
    }

    fn result(&self) -> CfResult {
        let mut result = self.refined.clone();
        for c in self.pending.values() {
            result.add(c);
        }
        result
    }
}

/// Search over one component: aggregated pages act as placeholder hits
/// until their set is scored.
pub struct SearchTask<'a> {
    state: &'a SynopsisState,
    request: &'a SearchRequest,
    stats: &'a CorpusStats,
    placeholders: BTreeMap<AggId, f64>,
    pages: Vec<Hit>,
}

impl<'a> SearchTask<'a> {
    pub fn new(state: &'a SynopsisState, request: &'a SearchRequest, stats: &'a CorpusStats) -> Result<Self> {
        if !matches!(state.subset.data, Dataset::Text(_)) {
            return Err(Error::Invalid("search task needs a text subset".into()));
        }
        Ok(SearchTask {
            state,
            request,
            stats,
            placeholders: BTreeMap::new(),
            pages: Vec::new(),
        })
    }
}

impl ApproxTask for SearchTask<'_> {
    type Output = SearchResult;

    fn process_synopsis(&mut self) -> Vec<(AggId, f64)> {
        let mut out = Vec::with_capacity(self.state.synopsis.len());
        for p in &self.state.synopsis.points {
            let Payload::Page(pg) = &p.payload else { continue };
            let c = search::score_aggregated(&pg.terms, self.request, self.stats);
            if c > 0.0 {
                self.placeholders.insert(p.id, c);
            }
            out.push((p.id, c));
        }
        out
    }

    fn synopsis_size(&self) -> usize {
        self.state.synopsis.len()
    }

    fn set_size(&self, agg: AggId) -> usize {
        self.state.index.members(agg).map_or(0, BTreeSet::len)
    }

    fn improve(&mut self, agg: AggId) {
        let Dataset::Text(corpus) = &self.state.subset.data else {
            return;
        };
        self.placeholders.remove(&agg);
        for m in self.state.index.members(agg).into_iter().flatten() {
            if let Some(doc) = corpus.get(*m) {
                let s = search::score(doc, self.request, self.stats);
                if s > 0.0 {
                    self.pages.push(Hit {
                        target: HitTarget::Page(*m),
                        score: s,
                    });
                }
            }
        }
    }

    fn result(&self) -> SearchResult {
        let component = self.state.subset.component_id;
        let mut hits = self.pages.clone();
        hits.extend(self.placeholders.iter().map(|(agg, s)| Hit {
            target: HitTarget::Placeholder { component, agg: *agg },
            score: *s,
        }));
        SearchResult::from_hits(hits, self.request.k)
    }
}

pub fn process_cf(
    state: &SynopsisState,
    request: &CfRequest,
    cfg: CfConfig,
    params: &EngineParams,
    clock: &mut impl Clock,
) -> Result<ComponentOutcome<CfResult>> {
    Ok(process(CfTask::new(state, request, cfg)?, params, clock))
}

pub fn process_search(
    state: &SynopsisState,
    request: &SearchRequest,
    stats: &CorpusStats,
    params: &EngineParams,
    clock: &mut impl Clock,
) -> Result<ComponentOutcome<SearchResult>> {
    Ok(process(SearchTask::new(state, request, stats)?, params, clock))
}

/// Members of the ranked sets, in rank order.
pub fn ranked_sets(state: &SynopsisState, ranking: &[AggId]) -> Vec<Vec<PointId>> {
    ranking
        .iter()
        .map(|a| {
            state
                .index
                .members(*a)
                .map(|m| m.iter().copied().collect())
                .unwrap_or_default()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Corpus, Document, RatingMatrix, RatingScale, Subset};
    use crate::synopsis::{create, SynopsisConfig};

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&[(1, 0.5), (2, 0.5), (3, 0.5)]), vec![1, 2, 3]);
        assert_eq!(rank(&[(1, 0.1), (2, 0.9), (3, 0.5)]), vec![2, 3, 1]);
        assert_eq!(rank(&[(1, f64::NAN), (2, 0.0)]), vec![2, 1]);
    }

    /// Charges 1 ms per original point and records the sets it saw.
    struct StepClock {
        now: f64,
    }

    impl Clock for StepClock {
        fn elapsed_ms(&self) -> f64 {
            self.now
        }
        fn charge(&mut self, s: usize, o: usize) {
            self.now += 0.1 * s as f64 + o as f64;
        }
    }

    fn cf_state() -> (SynopsisState, RatingMatrix) {
        let mut m = RatingMatrix::new(RatingScale::default());
        for u in 0..40u64 {
            for item in 0..8u64 {
                if (u + item) % 5 == 0 {
                    continue;
                }
                let base = if (item % 2 == 0) == (u % 3 == 0) { 4.5 } else { 1.5 };
                m.insert(u, item, base + ((u * item) % 3) as f64 * 0.25).unwrap();
            }
        }
        let subset = Subset {
            component_id: 0,
            data: Dataset::Ratings(m.clone()),
        };
        let cfg = SynopsisConfig {
            compression_ratio: 5.0,
            ..SynopsisConfig::default()
        };
        (create(&subset, &cfg).unwrap(), m)
    }

    fn cf_request() -> CfRequest {
        CfRequest::new(
            [(1, 2.0), (2, 4.0), (3, 1.0), (4, 5.0)].into_iter().collect(),
            vec![5, 6, 7],
        )
        .unwrap()
    }

    #[test]
    fn full_coverage_equals_exact_cf() {
        let (state, m) = cf_state();
        let req = cf_request();
        let out = process_cf(
            &state,
            &req,
            CfConfig::default(),
            &EngineParams::unbounded(),
            &mut FixedClock(0.0),
        )
        .unwrap();
        assert_eq!(out.sets_processed(), state.synopsis.len());
        let exact = cf::process_exact(&req, &m, &CfConfig::default());
        for (item, a) in &exact.accums {
            let b = out.result.accums[item];
            assert!((a.weighted_sum - b.weighted_sum).abs() < 1e-9);
            assert!((a.mass - b.mass).abs() < 1e-9);
        }
    }

    #[test]
    fn expired_deadline_gives_synopsis_only() {
        let (state, _) = cf_state();
        let req = cf_request();
        let params = EngineParams {
            l_spe: 100.0,
            i_max: 100,
        };
        let out = process_cf(&state, &req, CfConfig::default(), &params, &mut FixedClock(150.0)).unwrap();
        assert!(out.synopsis_only);
        assert_eq!(out.sets_processed(), 0);
    }

    #[test]
    fn processes_ranked_prefix_within_budget() {
        let (state, _) = cf_state();
        let req = cf_request();
        let mut task = CfTask::new(&state, &req, CfConfig::default()).unwrap();
        let order = rank(&task.process_synopsis());
        let params = EngineParams {
            l_spe: 12.0,
            i_max: 100,
        };
        let out = process_cf(&state, &req, CfConfig::default(), &params, &mut StepClock { now: 0.0 }).unwrap();
        assert!(out.sets_processed() > 0 && out.sets_processed() < order.len());
        assert_eq!(out.processed, order[..out.sets_processed()]);

        let capped = EngineParams {
            l_spe: f64::INFINITY,
            i_max: 2,
        };
        let out = process_cf(&state, &req, CfConfig::default(), &capped, &mut FixedClock(0.0)).unwrap();
        assert_eq!(out.sets_processed(), 2);
        let zero = EngineParams {
            l_spe: f64::INFINITY,
            i_max: 0,
        };
        let out = process_cf(&state, &req, CfConfig::default(), &zero, &mut FixedClock(0.0)).unwrap();
        assert!(out.synopsis_only);
    }

    fn search_state() -> SynopsisState {
        let mut c = Corpus::new();
        let topics = ["alpha beta gamma", "delta epsilon zeta", "eta theta iota"];
        for i in 0..30u64 {
            let t = topics[(i % 3) as usize];
            let body = format!("{t} {t} filler{} common", i % 4);
            c.insert(i, Document::from_text(format!("d{i}"), &body)).unwrap();
        }
        c.replace(4, Document::from_text("d4", "alpha alpha alpha beta"))
            .unwrap();
        let subset = Subset {
            component_id: 1,
            data: Dataset::Text(c),
        };
        let cfg = SynopsisConfig {
            compression_ratio: 4.0,
            ..SynopsisConfig::default()
        };
        create(&subset, &cfg).unwrap()
    }

    #[test]
    fn search_full_coverage_equals_exact_and_is_monotone() {
        let state = search_state();
        let Dataset::Text(corpus) = &state.subset.data else {
            unreachable!()
        };
        let index = search::InvertedIndex::build(corpus);
        let req = SearchRequest::new("alpha beta", 5).unwrap();
        let exact = search::search_exact(&index, &req);
        let full = process_search(
            &state,
            &req,
            &index.stats,
            &EngineParams::unbounded(),
            &mut FixedClock(0.0),
        )
        .unwrap();
        assert_eq!(full.result, exact);
        assert_eq!(full.result.pages().next(), Some(4));

        let mut last = -1.0;
        for i_max in 0..=state.synopsis.len() {
            let params = EngineParams {
                l_spe: f64::INFINITY,
                i_max,
            };
            let out = process_search(&state, &req, &index.stats, &params, &mut FixedClock(0.0)).unwrap();
            let acc = search::accuracy_search(&out.result, &exact);
            assert!(acc >= last);
            last = acc;
        }
        assert_eq!(last, 1.0);
    }

    #[test]
    fn wrong_workload_rejected() {
        let state = search_state();
        assert!(CfTask::new(&state, &cf_request(), CfConfig::default()).is_err());
    }
}

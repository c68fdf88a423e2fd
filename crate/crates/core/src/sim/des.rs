//! Event-driven simulation of `n` single-server FIFO components.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use crate::engine::{self, ApproxTask, Clock, EngineParams};
use crate::error::{Error, Result};
use crate::spatial::AggId;

use super::interference::{Interference, InterferenceConfig};
use super::metrics::{percentile, RequestRecord, RunReport};
use super::trace::Arrival;
use super::workload::{ComponentProfile, Coverage, Workload};

/// Linear service-time model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ServiceModel {
    pub fixed_ms: f64,
    pub per_point_ms: f64,
    pub per_synopsis_point_ms: f64,
}

impl Default for ServiceModel {
    /// A 1000-point subset scans in about 75 ms.
    fn default() -> Self {
        ServiceModel {
            fixed_ms: 2.0,
            per_point_ms: 0.073,
            per_synopsis_point_ms: 0.073,
        }
    }
}

impl ServiceModel {
    pub fn full_scan_ms(&self, points: usize) -> f64 {
        self.fixed_ms + self.per_point_ms * points as f64
    }

    /// Request rate one component sustains doing full scans.
    pub fn saturation_rate(&self, points: f64) -> f64 {
        1000.0 / (self.fixed_ms + self.per_point_ms * points)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fixed_ms >= 0.0 && self.per_point_ms > 0.0 && self.per_synopsis_point_ms > 0.0) {
            return Err(Error::Invalid("service costs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Strategy {
    Basic,
    /// Merge only sub-operations finished by the deadline.
    Partial {
        deadline_ms: f64,
    },
    /// Replicate sub-operations slower than the given latency percentile.
    Reissue {
        percentile: f64,
        replicas: usize,
    },
    AccuracyTrader(EngineParams),
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Basic => "basic",
            Strategy::Partial { .. } => "partial",
            Strategy::Reissue { .. } => "reissue",
            Strategy::AccuracyTrader(_) => "accuracytrader",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimParams {
    pub service: ServiceModel,
    pub interference: InterferenceConfig,
    /// Completed sub-operation latencies kept for the reissue threshold.
    pub reissue_window: usize,
    pub reissue_min_samples: usize,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            service: ServiceModel::default(),
            interference: InterferenceConfig::default(),
            reissue_window: 1000,
            reissue_min_samples: 100,
            seed: 1,
        }
    }
}

/// Simulated time seen by the engine: elapsed since submission,
/// advanced by the cost of the work charged.
#[derive(Clone, Copy, Debug)]
pub struct VirtualClock {
    pub elapsed: f64,
    multiplier: f64,
    service: ServiceModel,
}

impl VirtualClock {
    pub fn new(elapsed: f64, multiplier: f64, service: ServiceModel) -> Self {
        VirtualClock {
            elapsed,
            multiplier,
            service,
        }
    }

    pub fn advance(&mut self, ms: f64) {
        self.elapsed += ms * self.multiplier;
    }
}

impl Clock for VirtualClock {
    fn elapsed_ms(&self) -> f64 {
        self.elapsed
    }

    fn charge(&mut self, synopsis_points: usize, original_points: usize) {
        self.advance(
            self.service.per_synopsis_point_ms * synopsis_points as f64
                + self.service.per_point_ms * original_points as f64,
        );
    }
}

/// Replays a precomputed profile; ranks are already in processing order.
struct ReplayTask<'a>(&'a ComponentProfile);

impl ApproxTask for ReplayTask<'_> {
    type Output = ();

    fn process_synopsis(&mut self) -> Vec<(AggId, f64)> {
        let n = self.0.set_sizes.len();
        (0..n).map(|i| (i, (n - i) as f64)).collect()
    }

    fn synopsis_size(&self) -> usize {
        self.0.synopsis_size
    }

    fn set_size(&self, agg: AggId) -> usize {
        self.0.set_sizes[agg]
    }

    fn improve(&mut self, _agg: AggId) {}

    fn result(&self) {}
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum JobState {
    Queued,
    Running,
    Cancelled,
    Finished,
}

#[derive(Clone, Debug)]
struct Job {
    request: usize,
    subset: usize,
    state: JobState,
    sets: usize,
}

#[derive(Clone, Copy, Debug)]
enum Event {
    Arrival(usize),
    Finish { server: usize, job: usize },
    Reissue { request: usize, subset: usize },
}

struct Scheduled {
    time: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.seq.cmp(&other.seq))
    }
}

#[derive(Clone, Debug)]
struct SubOp {
    done_at: Option<f64>,
    sets: usize,
    synopsis_only: bool,
    jobs: Vec<usize>,
}

struct Sim<'a> {
    workload: &'a Workload,
    arrivals: &'a [Arrival],
    payloads: Vec<usize>,
    strategy: Strategy,
    params: &'a SimParams,
    events: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    queues: Vec<VecDeque<usize>>,
    busy: Vec<bool>,
    interference: Vec<Interference>,
    jobs: Vec<Job>,
    subops: Vec<Vec<SubOp>>,
    reissues: Vec<usize>,
    window: VecDeque<f64>,
}

impl Sim<'_> {
    fn schedule(&mut self, time: f64, event: Event) {
        self.seq += 1;
        self.events.push(Reverse(Scheduled {
            time,
            seq: self.seq,
            event,
        }));
    }

    fn enqueue(&mut self, now: f64, server: usize, request: usize, subset: usize) {
        let job = self.jobs.len();
        self.jobs.push(Job {
            request,
            subset,
            state: JobState::Queued,
            sets: 0,
        });
        self.subops[request][subset].jobs.push(job);
        self.queues[server].push_back(job);
        if !self.busy[server] {
            self.start_next(now, server);
        }
    }

    fn start_next(&mut self, now: f64, server: usize) {
        while let Some(job) = self.queues[server].pop_front() {
            if self.jobs[job].state == JobState::Cancelled {
                continue;
            }
            let (request, subset) = (self.jobs[job].request, self.jobs[job].subset);
            let mult = self.interference[server].multiplier_at(now);
            let service = self.params.service;
            let profile = &self.workload.profiles[self.payloads[request]][subset];
            let (duration, sets) = match self.strategy {
                Strategy::AccuracyTrader(engine_params) => {
                    let elapsed = now - self.arrivals[request].time_ms;
                    let mut clock = VirtualClock::new(elapsed, mult, service);
                    clock.advance(service.fixed_ms);
                    let out = engine::process(ReplayTask(profile), &engine_params, &mut clock);
                    (clock.elapsed - elapsed, out.sets_processed())
                }
                _ => (
                    service.full_scan_ms(self.workload.subset_sizes[subset]) * mult,
                    profile.set_sizes.len(),
                ),
            };
            self.jobs[job].state = JobState::Running;
            self.jobs[job].sets = sets;
            self.busy[server] = true;
            self.schedule(now + duration, Event::Finish { server, job });
            return;
        }
        self.busy[server] = false;
    }

    fn finish(&mut self, now: f64, server: usize, job: usize) {
        self.jobs[job].state = JobState::Finished;
        let (request, subset, sets) = (self.jobs[job].request, self.jobs[job].subset, self.jobs[job].sets);
        let sub = &mut self.subops[request][subset];
        if sub.done_at.is_none() {
            sub.done_at = Some(now);
            sub.sets = sets;
            sub.synopsis_only = sets == 0;
            let siblings = sub.jobs.clone();
            for j in siblings {
                if self.jobs[j].state == JobState::Queued {
                    self.jobs[j].state = JobState::Cancelled;
                }
            }
            if let Strategy::Reissue { .. } = self.strategy {
                self.window.push_back(now - self.arrivals[request].time_ms);
                if self.window.len() > self.params.reissue_window {
                    self.window.pop_front();
                }
            }
        }
        self.start_next(now, server);
    }

    fn arrive(&mut self, now: f64, request: usize) {
        let n = self.workload.components();
        if let Strategy::Reissue { percentile: p, .. } = self.strategy {
            if self.window.len() >= self.params.reissue_min_samples.max(1) {
                let samples: Vec<f64> = self.window.iter().copied().collect();
                let threshold = percentile(&samples, p).expect("non-empty window");
                for subset in 0..n {
                    self.schedule(now + threshold, Event::Reissue { request, subset });
                }
            }
        }
        for c in 0..n {
            self.enqueue(now, c, request, c);
        }
    }

    fn reissue(&mut self, now: f64, request: usize, subset: usize) {
        let Strategy::Reissue { replicas, .. } = self.strategy else {
            return;
        };
        if self.subops[request][subset].done_at.is_some() {
            return;
        }
        let n = self.workload.components();
        let mut sent = false;
        for r in 1..=replicas.min(n - 1) {
            self.enqueue(now, (subset + r) % n, request, subset);
            sent = true;
        }
        if sent {
            self.reissues[request] += 1;
        }
    }
}

/// Runs one strategy over an arrival schedule. Deterministic given
/// `params.seed`.
pub fn run(workload: &Workload, arrivals: &[Arrival], strategy: Strategy, params: &SimParams) -> Result<RunReport> {
    params.service.validate()?;
    params.interference.validate()?;
    let n = workload.components();
    if n == 0 {
        return Err(Error::Invalid("workload has no components".into()));
    }
    match strategy {
        Strategy::Partial { deadline_ms } if !(deadline_ms > 0.0) => {
            return Err(Error::Invalid("partial deadline must be positive".into()))
        }
        Strategy::Reissue { percentile, replicas } if !(0.0..=100.0).contains(&percentile) || replicas == 0 => {
            return Err(Error::Invalid(
                "reissue needs a percentile in [0, 100] and >= 1 replica".into(),
            ))
        }
        Strategy::AccuracyTrader(p) => p.validate()?,
        _ => {}
    }
    let payloads = arrivals
        .iter()
        .map(|a| {
            workload
                .payload_of(a.request_id)
                .ok_or_else(|| Error::Invalid(format!("trace references unknown request {}", a.request_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    if arrivals.windows(2).any(|w| w[1].time_ms < w[0].time_ms) {
        return Err(Error::Invalid("trace is not sorted by submit time".into()));
    }

    let empty = SubOp {
        done_at: None,
        sets: 0,
        synopsis_only: false,
        jobs: Vec::new(),
    };
    let mut sim = Sim {
        workload,
        arrivals,
        payloads,
        strategy,
        params,
        events: BinaryHeap::new(),
        seq: 0,
        queues: vec![VecDeque::new(); n],
        busy: vec![false; n],
        interference: (0..n)
            .map(|c| Interference::new(&params.interference, c, params.seed))
            .collect(),
        jobs: Vec::new(),
        subops: vec![vec![empty; n]; arrivals.len()],
        reissues: vec![0; arrivals.len()],
        window: VecDeque::new(),
    };
    for (i, a) in arrivals.iter().enumerate() {
        sim.schedule(a.time_ms, Event::Arrival(i));
    }
    while let Some(Reverse(ev)) = sim.events.pop() {
        match ev.event {
            Event::Arrival(r) => sim.arrive(ev.time, r),
            Event::Finish { server, job } => sim.finish(ev.time, server, job),
            Event::Reissue { request, subset } => sim.reissue(ev.time, request, subset),
        }
    }

    let records = arrivals
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let subs = &sim.subops[i];
            let mut latencies = Vec::with_capacity(n);
            let mut coverage = Vec::with_capacity(n);
            for s in subs {
                let lat = s.done_at.expect("every sub-operation completes") - a.time_ms;
                match strategy {
                    Strategy::Partial { deadline_ms } => {
                        latencies.push(lat.min(deadline_ms));
                        coverage.push(if lat <= deadline_ms {
                            Coverage::Full
                        } else {
                            Coverage::Missing
                        });
                    }
                    Strategy::AccuracyTrader(_) => {
                        latencies.push(lat);
                        coverage.push(Coverage::Prefix(s.sets));
                    }
                    _ => {
                        latencies.push(lat);
                        coverage.push(Coverage::Full);
                    }
                }
            }
            RequestRecord {
                request_id: a.request_id,
                submit_ms: a.time_ms,
                latencies,
                sets_processed: subs.iter().map(|s| s.sets).collect(),
                synopsis_only: subs.iter().map(|s| s.synopsis_only).collect(),
                loss_pct: workload.loss(sim.payloads[i], &coverage),
                reissues: sim.reissues[i],
            }
        })
        .collect();
    Ok(RunReport {
        strategy: strategy.name().to_owned(),
        records,
    })
}

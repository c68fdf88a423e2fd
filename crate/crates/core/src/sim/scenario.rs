//! Scenario driver: builds a synthetic workload for a [`ScenarioConfig`]
//! and runs every (arrival run, strategy) pair.

use crate::cf::CfConfig;
use crate::dataset::{partition, Dataset};
use crate::error::Result;
use crate::synopsis::{create, SynopsisState};
use crate::synth::{generate_cf, generate_search, CfSynthConfig, SearchSynthConfig};

use super::config::{ArrivalSpec, ScenarioConfig, WorkloadKind};
use super::des::run;
use super::metrics::RunReport;
use super::trace::{self, Arrival};
use super::workload::Workload;

/// One arrival pattern of a scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrivalRun {
    /// Mean offered rate in req/s.
    pub rate_per_s: f64,
    /// Rate relative to full-scan saturation.
    pub load_factor: f64,
    pub arrivals: Vec<Arrival>,
}

#[derive(Clone, Debug)]
pub struct ScenarioResult {
    pub rate_per_s: f64,
    pub load_factor: f64,
    pub report: RunReport,
}

/// Synopses over `n` equal shares of `data`.
pub fn build_states(data: &Dataset, cfg: &ScenarioConfig) -> Result<Vec<SynopsisState>> {
    let syn = cfg.synopsis_config();
    partition(data, cfg.components)?
        .iter()
        .map(|s| create(s, &syn))
        .collect()
}

/// Seeded synthetic workload of `components × points_per_component` points.
pub fn synthetic_workload(cfg: &ScenarioConfig) -> Result<Workload> {
    cfg.validate()?;
    let points = cfg.components * cfg.points_per_component;
    match cfg.workload {
        WorkloadKind::Uniform => Ok(Workload::uniform(vec![cfg.points_per_component; cfg.components])),
        WorkloadKind::Cf => {
            let synth = generate_cf(&CfSynthConfig {
                users: points,
                active_users: cfg.payloads,
                seed: cfg.seed,
                ..CfSynthConfig::default()
            })?;
            let states = build_states(&Dataset::Ratings(synth.matrix), cfg)?;
            Workload::cf(&states, &synth.requests, &synth.test, CfConfig::default())
        }
        WorkloadKind::Search => {
            let synth = generate_search(&SearchSynthConfig {
                docs: points,
                queries: cfg.payloads,
                seed: cfg.seed,
                ..SearchSynthConfig::default()
            })?;
            let states = build_states(&Dataset::Text(synth.corpus), cfg)?;
            Workload::search(&states, &synth.requests, cfg.global_stats)
        }
    }
}

pub fn arrival_runs(cfg: &ScenarioConfig, workload: &Workload) -> Result<Vec<ArrivalRun>> {
    let saturation = cfg.service.saturation_rate(workload.mean_subset_size());
    let constant = |rate: f64| -> Result<ArrivalRun> {
        Ok(ArrivalRun {
            rate_per_s: rate,
            load_factor: rate / saturation,
            arrivals: trace::constant_rate(rate, cfg.requests, &workload.request_ids)?,
        })
    };
    match &cfg.arrival {
        ArrivalSpec::Rates(rates) => rates.iter().map(|r| constant(*r)).collect(),
        ArrivalSpec::LoadFactors(fs) => fs.iter().map(|f| constant(f * saturation)).collect(),
        ArrivalSpec::Trace(path) => {
            let arrivals = trace::load_trace(path)?;
            let span = arrivals.last().map_or(0.0, |a| a.time_ms);
            let rate = if span > 0.0 {
                arrivals.len() as f64 * 1000.0 / span
            } else {
                0.0
            };
            Ok(vec![ArrivalRun {
                rate_per_s: rate,
                load_factor: rate / saturation,
                arrivals,
            }])
        }
    }
}

/// Runs every arrival pattern under every configured strategy, in that
/// nesting order.
pub fn run_scenario(cfg: &ScenarioConfig, workload: &Workload) -> Result<Vec<ScenarioResult>> {
    let params = cfg.sim_params();
    let mut out = Vec::new();
    for ar in arrival_runs(cfg, workload)? {
        for kind in &cfg.strategies {
            let report = run(workload, &ar.arrivals, cfg.strategy(*kind), &params)?;
            out.push(ScenarioResult {
                rate_per_s: ar.rate_per_s,
                load_factor: ar.load_factor,
                report,
            });
        }
    }
    Ok(out)
}

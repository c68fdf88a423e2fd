//! Deterministic discrete-event simulation of a fan-out service under the
//! basic, partial-execution, request-reissue and AccuracyTrader strategies.

pub mod config;
pub mod des;
pub mod interference;
pub mod metrics;
pub mod scenario;
pub mod trace;
pub mod workload;

pub use config::{ArrivalSpec, ScenarioConfig, StrategyKind, WorkloadKind};
pub use des::{run, ServiceModel, SimParams, Strategy, VirtualClock};
pub use interference::{Interference, InterferenceConfig};
pub use metrics::{percentile, RequestRecord, RunReport, WindowRow};
pub use scenario::{arrival_runs, build_states, run_scenario, synthetic_workload, ArrivalRun, ScenarioResult};
pub use trace::Arrival;
pub use workload::{ComponentProfile, Coverage, Workload};

//! Flat `key = value` scenario files. `#` starts a comment; unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use crate::engine::EngineParams;
use crate::error::{Error, Result};
use crate::synopsis::SynopsisConfig;

use super::des::{ServiceModel, SimParams, Strategy};
use super::interference::InterferenceConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategyKind {
    Basic,
    Partial,
    Reissue,
    AccuracyTrader,
}

impl StrategyKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "basic" => Some(StrategyKind::Basic),
            "partial" => Some(StrategyKind::Partial),
            "reissue" => Some(StrategyKind::Reissue),
            "accuracytrader" => Some(StrategyKind::AccuracyTrader),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WorkloadKind {
    Cf,
    Search,
    /// Cost-only workload without request semantics.
    Uniform,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArrivalSpec {
    /// Absolute request rates (req/s).
    Rates(Vec<f64>),
    /// Multiples of the full-scan saturation rate.
    LoadFactors(Vec<f64>),
    Trace(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub components: usize,
    pub strategies: Vec<StrategyKind>,
    pub arrival: ArrivalSpec,
    /// Requests per constant-rate run.
    pub requests: usize,
    pub window_ms: f64,
    /// Deadline shared by partial execution and AccuracyTrader.
    pub deadline_ms: f64,
    /// `None` processes up to every ranked set.
    pub i_max: Option<usize>,
    pub reissue_percentile: f64,
    pub reissue_replicas: usize,
    pub reissue_window: usize,
    pub reissue_min_samples: usize,
    pub service: ServiceModel,
    pub interference: InterferenceConfig,
    pub workload: WorkloadKind,
    pub points_per_component: usize,
    pub compression_ratio: f64,
    /// R-tree node capacity used for the synopses.
    pub max_entries: usize,
    pub payloads: usize,
    pub global_stats: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            components: 8,
            strategies: vec![
                StrategyKind::Basic,
                StrategyKind::Partial,
                StrategyKind::Reissue,
                StrategyKind::AccuracyTrader,
            ],
            arrival: ArrivalSpec::LoadFactors(vec![0.5, 1.0, 1.5, 2.0, 3.0]),
            requests: 5000,
            window_ms: 10_000.0,
            deadline_ms: 100.0,
            i_max: None,
            reissue_percentile: 95.0,
            reissue_replicas: 1,
            reissue_window: 1000,
            reissue_min_samples: 100,
            service: ServiceModel::default(),
            interference: InterferenceConfig::default(),
            workload: WorkloadKind::Cf,
            points_per_component: 1000,
            compression_ratio: 20.0,
            max_entries: 6,
            payloads: 200,
            global_stats: false,
        }
    }
}

fn list<T: std::str::FromStr>(v: &str) -> Option<Vec<T>> {
    v.split(',').map(|x| x.trim().parse().ok()).collect()
}

impl ScenarioConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, lineno, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || Error::parse(origin, lineno, format!("invalid value for `{key}`: {value}"));
            macro_rules! num {
                () => {
                    value.parse().map_err(|_| bad())?
                };
            }
            match key {
                "seed" => cfg.seed = num!(),
                "components" => cfg.components = num!(),
                "strategies" => {
                    cfg.strategies = value
                        .split(',')
                        .map(|s| StrategyKind::parse(s.trim()))
                        .collect::<Option<_>>()
                        .ok_or_else(bad)?
                }
                "rates" => cfg.arrival = ArrivalSpec::Rates(list(value).ok_or_else(bad)?),
                "load_factors" => cfg.arrival = ArrivalSpec::LoadFactors(list(value).ok_or_else(bad)?),
                "trace" => cfg.arrival = ArrivalSpec::Trace(PathBuf::from(value)),
                "requests" => cfg.requests = num!(),
                "window_ms" => cfg.window_ms = num!(),
                "deadline_ms" => cfg.deadline_ms = num!(),
                "i_max" => cfg.i_max = if value == "all" { None } else { Some(num!()) },
                "reissue_percentile" => cfg.reissue_percentile = num!(),
                "reissue_replicas" => cfg.reissue_replicas = num!(),
                "reissue_window" => cfg.reissue_window = num!(),
                "reissue_min_samples" => cfg.reissue_min_samples = num!(),
                "fixed_ms" => cfg.service.fixed_ms = num!(),
                "per_point_ms" => cfg.service.per_point_ms = num!(),
                "per_synopsis_point_ms" => cfg.service.per_synopsis_point_ms = num!(),
                "interference_on_mean_ms" => cfg.interference.on_mean_ms = num!(),
                "interference_off_mean_ms" => cfg.interference.off_mean_ms = num!(),
                "interference_median" => cfg.interference.median = num!(),
                "interference_sigma" => cfg.interference.sigma = num!(),
                "straggler" => cfg.interference.straggler = if value == "none" { None } else { Some(num!()) },
                "straggler_factor" => cfg.interference.straggler_factor = num!(),
                "workload" => {
                    cfg.workload = match value {
                        "cf" => WorkloadKind::Cf,
                        "search" => WorkloadKind::Search,
                        "uniform" => WorkloadKind::Uniform,
                        _ => return Err(bad()),
                    }
                }
                "points_per_component" => cfg.points_per_component = num!(),
                "compression_ratio" => cfg.compression_ratio = num!(),
                "max_entries" => cfg.max_entries = num!(),
                "payloads" => cfg.payloads = num!(),
                "global_stats" => cfg.global_stats = num!(),
                _ => return Err(Error::parse(origin, lineno, format!("unknown key `{key}`"))),
            }
        }
        cfg.validate().map_err(|e| Error::parse(origin, 0, e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Invalid(m.into()));
        if self.components == 0 {
            return fail("components must be >= 1");
        }
        if self.strategies.is_empty() {
            return fail("no strategies");
        }
        match &self.arrival {
            ArrivalSpec::Rates(v) | ArrivalSpec::LoadFactors(v) if v.is_empty() || v.iter().any(|r| !(*r > 0.0)) => {
                return fail("rates must be positive")
            }
            _ => {}
        }
        if !(self.window_ms > 0.0) || !(self.deadline_ms > 0.0) {
            return fail("window and deadline must be positive");
        }
        if !(0.0..=100.0).contains(&self.reissue_percentile) || self.reissue_replicas == 0 {
            return fail("reissue needs a percentile in [0, 100] and >= 1 replica");
        }
        if self.points_per_component == 0 || self.payloads == 0 || !(self.compression_ratio > 1.0) {
            return fail("points_per_component and payloads must be >= 1, compression_ratio > 1");
        }
        if self.max_entries < 4 {
            return fail("max_entries must be >= 4");
        }
        self.service.validate()?;
        self.interference.validate()
    }

    pub fn sim_params(&self) -> SimParams {
        SimParams {
            service: self.service,
            interference: self.interference.clone(),
            reissue_window: self.reissue_window,
            reissue_min_samples: self.reissue_min_samples,
            seed: self.seed,
        }
    }

    pub fn synopsis_config(&self) -> SynopsisConfig {
        SynopsisConfig {
            compression_ratio: self.compression_ratio,
            max_entries: self.max_entries,
            ..SynopsisConfig::default()
        }
    }

    pub fn engine_params(&self) -> EngineParams {
        EngineParams {
            l_spe: self.deadline_ms,
            i_max: self.i_max.unwrap_or(usize::MAX),
        }
    }

    pub fn strategy(&self, kind: StrategyKind) -> Strategy {
        match kind {
            StrategyKind::Basic => Strategy::Basic,
            StrategyKind::Partial => Strategy::Partial {
                deadline_ms: self.deadline_ms,
            },
            StrategyKind::Reissue => Strategy::Reissue {
                percentile: self.reissue_percentile,
                replicas: self.reissue_replicas,
            },
            StrategyKind::AccuracyTrader => Strategy::AccuracyTrader(self.engine_params()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let text = "# scenario\nseed = 9\ncomponents=3\nstrategies = basic, accuracytrader\nrates = 5, 10\n\
                    i_max = 4 # cap\nstraggler = 2\nworkload = search\nglobal_stats = true\n";
        let cfg = ScenarioConfig::parse(text, Path::new("s.cfg")).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.components, 3);
        assert_eq!(cfg.strategies, vec![StrategyKind::Basic, StrategyKind::AccuracyTrader]);
        assert_eq!(cfg.arrival, ArrivalSpec::Rates(vec![5.0, 10.0]));
        assert_eq!(cfg.i_max, Some(4));
        assert_eq!(cfg.interference.straggler, Some(2));
        assert_eq!(cfg.workload, WorkloadKind::Search);
        assert!(cfg.global_stats);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(ScenarioConfig::parse("colour = red\n", Path::new("s")).is_err());
        assert!(ScenarioConfig::parse("components = 0\n", Path::new("s")).is_err());
        assert!(ScenarioConfig::parse("rates = 1, -2\n", Path::new("s")).is_err());
        assert!(ScenarioConfig::parse("strategies = fast\n", Path::new("s")).is_err());
        assert!(ScenarioConfig::parse("seed\n", Path::new("s")).is_err());
    }
}

//! Per-component ON/OFF slowdown process.
//!
//! OFF periods run at full speed; ON periods slow the component by a
//! lognormal multiplier (clamped to at least 1). Period lengths are
//! exponential. Every component draws from its own seeded stream, so the
//! timeline does not depend on the order in which it is queried.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct InterferenceConfig {
    /// Mean ON duration; 0 disables interference.
    pub on_mean_ms: f64,
    pub off_mean_ms: f64,
    pub median: f64,
    pub sigma: f64,
    /// Component slowed by `straggler_factor` for the whole run.
    pub straggler: Option<usize>,
    pub straggler_factor: f64,
}

impl Default for InterferenceConfig {
    fn default() -> Self {
        InterferenceConfig {
            on_mean_ms: 1000.0,
            off_mean_ms: 4000.0,
            median: 1.5,
            sigma: 0.5,
            straggler: None,
            straggler_factor: 10.0,
        }
    }
}

impl InterferenceConfig {
    pub fn none() -> Self {
        InterferenceConfig {
            on_mean_ms: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.on_mean_ms >= 0.0) || (self.on_mean_ms > 0.0 && !(self.off_mean_ms > 0.0)) {
            return Err(Error::Invalid("interference durations must be positive".into()));
        }
        if !(self.median >= 1.0) || !(self.sigma >= 0.0) {
            return Err(Error::Invalid("interference median must be >= 1 and sigma >= 0".into()));
        }
        if !(self.straggler_factor >= 1.0) {
            return Err(Error::Invalid("straggler factor must be >= 1".into()));
        }
        Ok(())
    }
}

/// Lazily generated timeline of one component.
#[derive(Clone, Debug)]
pub struct Interference {
    cfg: InterferenceConfig,
    component: usize,
    rng: ChaCha8Rng,
    segment_end: f64,
    on: bool,
    multiplier: f64,
}

impl Interference {
    pub fn new(cfg: &InterferenceConfig, component: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(component as u64 + 1);
        let mut this = Interference {
            cfg: cfg.clone(),
            component,
            rng,
            segment_end: 0.0,
            on: true,
            multiplier: 1.0,
        };
        if this.enabled() {
            this.advance();
        }
        this
    }

    fn enabled(&self) -> bool {
        self.cfg.on_mean_ms > 0.0
    }

    /// Switches to the next segment.
    fn advance(&mut self) {
        self.on = !self.on;
        let mean = if self.on {
            self.cfg.on_mean_ms
        } else {
            self.cfg.off_mean_ms
        };
        let len = Exp::new(1.0 / mean).expect("positive rate").sample(&mut self.rng);
        self.segment_end += len;
        self.multiplier = if self.on {
            LogNormal::new(self.cfg.median.ln(), self.cfg.sigma)
                .expect("valid lognormal")
                .sample(&mut self.rng)
                .max(1.0)
        } else {
            1.0
        };
    }

    /// Slowdown in effect at `time_ms`. Queries must be non-decreasing.
    pub fn multiplier_at(&mut self, time_ms: f64) -> f64 {
        if self.cfg.straggler == Some(self.component) {
            return self.cfg.straggler_factor;
        }
        if !self.enabled() {
            return 1.0;
        }
        while time_ms >= self.segment_end {
            self.advance();
        }
        self.multiplier
    }
}

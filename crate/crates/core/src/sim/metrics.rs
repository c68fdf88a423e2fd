//! Nearest-rank percentiles and per-window latency/accuracy reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::num::{total_cmp, Scalar};

/// Nearest-rank percentile: the element at 1-based index `ceil(p/100 × N)`
/// of the ascending samples. `None` for an empty sample.
pub fn percentile<T: Scalar>(samples: &[T], p: f64) -> Option<T> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| total_cmp(*a, *b));
    Some(sorted[nearest_rank(sorted.len(), p) - 1])
}

/// 1-based nearest rank; products within 1e-9 of an integer count as
/// that integer so that e.g. 99.9% of 1000 is rank 999.
pub fn nearest_rank(n: usize, p: f64) -> usize {
    let x = p / 100.0 * n as f64;
    let r = if (x - x.round()).abs() < 1e-9 {
        x.round()
    } else {
        x.ceil()
    };
    (r as usize).clamp(1, n)
}

/// One request's fate under a strategy.
#[derive(Clone, Debug, PartialEq)]
pub struct RequestRecord {
    /// Id of the request payload in the workload.
    pub request_id: u64,
    pub submit_ms: f64,
    /// Reported latency of each component's sub-operation.
    pub latencies: Vec<f64>,
    pub sets_processed: Vec<usize>,
    pub synopsis_only: Vec<bool>,
    pub loss_pct: f64,
    pub reissues: usize,
}

impl RequestRecord {
    pub fn latency(&self) -> f64 {
        self.latencies.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowRow {
    pub window_start_ms: f64,
    pub p999_latency_ms: f64,
    pub mean_accuracy_loss_pct: f64,
    pub request_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub strategy: String,
    pub records: Vec<RequestRecord>,
}

pub const TAIL_PERCENTILE: f64 = 99.9;

impl RunReport {
    fn component_latencies<'a>(records: impl Iterator<Item = &'a RequestRecord>) -> Vec<f64> {
        records.flat_map(|r| r.latencies.iter().copied()).collect()
    }

    /// 99.9th percentile over every component latency of the run.
    pub fn p999(&self) -> f64 {
        percentile(&Self::component_latencies(self.records.iter()), TAIL_PERCENTILE).unwrap_or(0.0)
    }

    pub fn mean_loss(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.records.iter().map(|r| r.loss_pct).sum::<f64>() / self.records.len() as f64
        }
    }

    pub fn reissues(&self) -> usize {
        self.records.iter().map(|r| r.reissues).sum()
    }

    /// Requests grouped by submission window.
    pub fn windows(&self, window_ms: f64) -> Vec<WindowRow> {
        let mut groups: BTreeMap<u64, Vec<&RequestRecord>> = BTreeMap::new();
        for r in &self.records {
            groups
                .entry((r.submit_ms / window_ms).floor() as u64)
                .or_default()
                .push(r);
        }
        groups
            .into_iter()
            .map(|(w, rs)| WindowRow {
                window_start_ms: w as f64 * window_ms,
                p999_latency_ms: percentile(&Self::component_latencies(rs.iter().copied()), TAIL_PERCENTILE)
                    .unwrap_or(0.0),
                mean_accuracy_loss_pct: rs.iter().map(|r| r.loss_pct).sum::<f64>() / rs.len() as f64,
                request_count: rs.len(),
            })
            .collect()
    }
}

pub const METRICS_HEADER: &str = "window_start_ms,strategy,p999_latency_ms,mean_accuracy_loss_pct,request_count";
pub const OUTCOMES_HEADER: &str = "request_id,component_id,strategy,elapsed_ms,sets_processed,synopsis_only";

pub fn write_metrics_rows(out: &mut String, report: &RunReport, window_ms: f64) {
    for w in report.windows(window_ms) {
        let _ = writeln!(
            out,
            "{:.3},{},{:.3},{:.4},{}",
            w.window_start_ms, report.strategy, w.p999_latency_ms, w.mean_accuracy_loss_pct, w.request_count
        );
    }
}

/// Per-component outcome rows; `request_id` is the arrival's position.
pub fn write_outcome_rows(out: &mut String, report: &RunReport) {
    for (i, r) in report.records.iter().enumerate() {
        for (c, lat) in r.latencies.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i},{c},{},{lat:.3},{},{}",
                report.strategy, r.sets_processed[c], r.synopsis_only[c]
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_examples() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(percentile(&xs, 99.9), Some(999.0));
        assert_eq!(percentile(&[7.0f32], 99.9), Some(7.0));
        assert_eq!(percentile(&[7.0], 1.0), Some(7.0));
        assert_eq!(percentile::<f64>(&[], 50.0), None);
        assert_eq!(percentile(&[3.0, 1.0, 2.0, 4.0], 50.0), Some(2.0));
        assert_eq!(percentile(&[3.0, 1.0, 2.0, 4.0], 51.0), Some(3.0));
        assert_eq!(percentile(&[3.0, 1.0, 2.0, 4.0], 0.0), Some(1.0));
    }

    fn record(submit: f64, lat: &[f64], loss: f64) -> RequestRecord {
        RequestRecord {
            request_id: 0,
            submit_ms: submit,
            latencies: lat.to_vec(),
            sets_processed: vec![0; lat.len()],
            synopsis_only: vec![false; lat.len()],
            loss_pct: loss,
            reissues: 0,
        }
    }

    #[test]
    fn windows_group_by_submission() {
        let report = RunReport {
            strategy: "basic".into(),
            records: vec![
                record(10.0, &[5.0, 7.0], 0.0),
                record(900.0, &[1.0], 4.0),
                record(1500.0, &[2.0], 2.0),
            ],
        };
        let w = report.windows(1000.0);
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].request_count, 2);
        assert_eq!(w[0].p999_latency_ms, 7.0);
        assert_eq!(w[0].mean_accuracy_loss_pct, 2.0);
        assert_eq!(w[1].window_start_ms, 1000.0);
        assert_eq!(report.p999(), 7.0);
        assert_eq!(report.records[0].latency(), 7.0);
        let mut csv = String::new();
        write_metrics_rows(&mut csv, &report, 1000.0);
        assert_eq!(csv.lines().next(), Some("0.000,basic,7.000,2.0000,2"));
    }
}

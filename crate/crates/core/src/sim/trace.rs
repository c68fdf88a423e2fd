//! Arrival schedules: constant-rate and bucketed (diurnal) generators and
//! the `submit_time_ms,request_id` trace file.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};

/// One request submission; `request_id` names a workload payload.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arrival {
    pub time_ms: f64,
    pub request_id: u64,
}

/// `count` arrivals at `1000 / rate` ms spacing, cycling through `ids`.
pub fn constant_rate(rate_per_s: f64, count: usize, ids: &[u64]) -> Result<Vec<Arrival>> {
    if !(rate_per_s > 0.0) || !rate_per_s.is_finite() {
        return Err(Error::Invalid("arrival rate must be positive".into()));
    }
    if ids.is_empty() && count > 0 {
        return Err(Error::Invalid("no request payloads to replay".into()));
    }
    let gap = 1000.0 / rate_per_s;
    Ok((0..count)
        .map(|i| Arrival {
            time_ms: i as f64 * gap,
            request_id: ids[i % ids.len()],
        })
        .collect())
}

/// Evenly spaced arrivals per bucket, `round(rate × bucket)` in each.
pub fn bucketed(rates_per_s: &[f64], bucket_ms: f64, ids: &[u64]) -> Result<Vec<Arrival>> {
    if !(bucket_ms > 0.0) {
        return Err(Error::Invalid("bucket length must be positive".into()));
    }
    let mut out = Vec::new();
    for (b, rate) in rates_per_s.iter().enumerate() {
        if !(*rate >= 0.0) {
            return Err(Error::Invalid(format!("bucket {b} has a negative rate")));
        }
        let n = (rate * bucket_ms / 1000.0).round() as usize;
        if n > 0 && ids.is_empty() {
            return Err(Error::Invalid("no request payloads to replay".into()));
        }
        let start = b as f64 * bucket_ms;
        for i in 0..n {
            out.push(Arrival {
                time_ms: start + i as f64 * bucket_ms / n as f64,
                request_id: ids[out.len() % ids.len()],
            });
        }
    }
    Ok(out)
}

/// A day-shaped rate curve over 24 buckets between `trough` and `peak`.
pub fn diurnal_rates(trough: f64, peak: f64) -> Vec<f64> {
    (0..24)
        .map(|h| {
            let phase = (h as f64 - 15.0) / 24.0 * std::f64::consts::TAU;
            trough + (peak - trough) * 0.5 * (1.0 + phase.cos())
        })
        .collect()
}

pub const TRACE_HEADER: &str = "submit_time_ms,request_id";

/// Parses a trace and sorts it by time (stable for equal times).
pub fn parse_trace(reader: impl Read, origin: &Path) -> Result<Vec<Arrival>> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.trim();
        if line.is_empty() || (idx == 0 && line == TRACE_HEADER) {
            continue;
        }
        let (t, id) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(origin, lineno, format!("expected `{TRACE_HEADER}`")))?;
        let time_ms = t
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|t| t.is_finite() && *t >= 0.0)
            .ok_or_else(|| Error::parse(origin, lineno, "submit time must be a non-negative number"))?;
        let request_id = id
            .trim()
            .parse()
            .map_err(|e| Error::parse(origin, lineno, format!("request id: {e}")))?;
        out.push(Arrival { time_ms, request_id });
    }
    out.sort_by(|a, b| a.time_ms.total_cmp(&b.time_ms));
    Ok(out)
}

pub fn load_trace(path: &Path) -> Result<Vec<Arrival>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trace(file, path)
}

pub fn trace_to_csv(arrivals: &[Arrival]) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for a in arrivals {
        let _ = writeln!(out, "{},{}", a.time_ms, a.request_id);
    }
    out
}

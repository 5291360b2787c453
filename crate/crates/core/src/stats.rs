//! Path usage and performance accounting.

use alloc::collections::BTreeMap;
use alloc::string::String;

use crate::path::PathFingerprint;
use crate::plan::{Decision, RequestPlan};
use crate::time::Timestamp;

pub const DEFAULT_EWMA_ALPHA: f64 = 0.3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HostCounters {
    pub requests_pan: u64,
    pub requests_legacy: u64,
    pub requests_blocked: u64,
    pub non_compliant: u64,
}

impl HostCounters {
    pub fn total(&self) -> u64 {
        self.requests_pan + self.requests_legacy + self.requests_blocked
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathCounters {
    /// `1-1>1-2>2-1`, kept for display.
    pub sequence: String,
    pub uses: u64,
    pub ewma_latency_ms: f64,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timing {
    pub connect_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    pub per_host: BTreeMap<String, HostCounters>,
    pub per_path: BTreeMap<PathFingerprint, PathCounters>,
    pub since: Timestamp,
}

impl Stats {
    pub fn new(since: Timestamp) -> Self {
        Stats { per_host: BTreeMap::new(), per_path: BTreeMap::new(), since }
    }

    pub fn total_requests(&self) -> u64 {
        self.per_host.values().map(HostCounters::total).sum()
    }
}

#[derive(Debug, Clone)]
pub struct StatsRecorder {
    stats: Stats,
    alpha: f64,
}

impl StatsRecorder {
    /// `alpha` is clamped into `(0, 1]`; non-finite values fall back to the default.
    pub fn new(since: Timestamp, alpha: f64) -> Self {
        let alpha = if alpha.is_finite() && alpha > 0.0 { alpha.min(1.0) } else { DEFAULT_EWMA_ALPHA };
        StatsRecorder { stats: Stats::new(since), alpha }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn record(&mut self, plan: &RequestPlan, timing: Timing, bytes: u64) {
        let host = self.stats.per_host.entry(plan.host.clone()).or_default();
        match &plan.decision {
            Decision::PanVia { path, .. } => {
                host.requests_pan += 1;
                let alpha = self.alpha;
                self.stats
                    .per_path
                    .entry(path.fingerprint())
                    .and_modify(|c| {
                        c.uses += 1;
                        c.bytes += bytes;
                        c.ewma_latency_ms = alpha * timing.total_ms + (1.0 - alpha) * c.ewma_latency_ms;
                    })
                    .or_insert_with(|| PathCounters {
                        sequence: path.sequence_string(),
                        uses: 1,
                        ewma_latency_ms: timing.total_ms,
                        bytes,
                    });
            }
            Decision::LegacyFallback => host.requests_legacy += 1,
            Decision::Blocked(_) => host.requests_blocked += 1,
        }
        if !plan.policy_compliant {
            host.non_compliant += 1;
        }
    }

    pub fn snapshot(&self) -> Stats {
        self.stats.clone()
    }
}

//! Lock-free request counters and per-backend latency histograms.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Upper bounds (ms) of the latency buckets; a final `+Inf` bucket is implied.
pub const LATENCY_BUCKETS_MS: [f64; 13] =
    [1.0, 2.0, 5.0, 10.0, 25.0, 50.0, 100.0, 250.0, 500.0, 1000.0, 2500.0, 5000.0, 10000.0];

#[derive(Debug, Default)]
pub struct LatencyHistogram {
    buckets: [AtomicU64; LATENCY_BUCKETS_MS.len() + 1],
    count: AtomicU64,
    sum_us: AtomicU64,
}

impl LatencyHistogram {
    pub fn observe(&self, elapsed: Duration) {
        let ms = elapsed.as_secs_f64() * 1e3;
        let idx = LATENCY_BUCKETS_MS.partition_point(|&b| b < ms);
        self.buckets[idx].fetch_add(1, Ordering::Relaxed);
        self.count.fetch_add(1, Ordering::Relaxed);
        self.sum_us.fetch_add(elapsed.as_micros() as u64, Ordering::Relaxed);
    }

    fn snapshot(&self) -> LatencySnapshot {
        let mut cumulative = 0;
        let buckets = self
            .buckets
            .iter()
            .enumerate()
            .map(|(i, b)| {
                cumulative += b.load(Ordering::Relaxed);
                BucketCount {
                    le: LATENCY_BUCKETS_MS.get(i).map_or_else(|| "+Inf".to_string(), |v| v.to_string()),
                    count: cumulative,
                }
            })
            .collect();
        LatencySnapshot {
            count: self.count.load(Ordering::Relaxed),
            sum_ms: self.sum_us.load(Ordering::Relaxed) as f64 / 1e3,
            buckets,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketCount {
    pub le: String,
    /// Cumulative count of observations ≤ `le`.
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySnapshot {
    pub count: u64,
    pub sum_ms: f64,
    pub buckets: Vec<BucketCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub requests_total: u64,
    pub deferred_total: u64,
    pub degraded_total: u64,
    pub failed_total: u64,
    pub deferral_rate: f64,
    pub latency_ms: BTreeMap<String, LatencySnapshot>,
}

/// Shared service counters. Backends are fixed at construction.
#[derive(Debug)]
pub struct Metrics {
    requests_total: AtomicU64,
    deferred_total: AtomicU64,
    degraded_total: AtomicU64,
    failed_total: AtomicU64,
    latency: BTreeMap<String, LatencyHistogram>,
}

impl Metrics {
    pub fn new<'a>(backends: impl IntoIterator<Item = &'a str>) -> Self {
        Self {
            requests_total: AtomicU64::new(0),
            deferred_total: AtomicU64::new(0),
            degraded_total: AtomicU64::new(0),
            failed_total: AtomicU64::new(0),
            latency: backends
                .into_iter()
                .map(|b| (b.to_string(), LatencyHistogram::default()))
                .collect(),
        }
    }

    pub fn record_request(&self, deferred: bool, degraded: bool) {
        self.requests_total.fetch_add(1, Ordering::Relaxed);
        if deferred {
            self.deferred_total.fetch_add(1, Ordering::Relaxed);
        }
        if degraded {
            self.degraded_total.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn record_failure(&self) {
        self.requests_total.fetch_add(1, Ordering::Relaxed);
        self.failed_total.fetch_add(1, Ordering::Relaxed);
    }

    pub fn observe_latency(&self, backend: &str, elapsed: Duration) {
        if let Some(h) = self.latency.get(backend) {
            h.observe(elapsed);
        }
    }

    pub fn snapshot(&self) -> MetricsSnapshot {
        let requests_total = self.requests_total.load(Ordering::Relaxed);
        let deferred_total = self.deferred_total.load(Ordering::Relaxed);
        MetricsSnapshot {
            requests_total,
            deferred_total,
            degraded_total: self.degraded_total.load(Ordering::Relaxed),
            failed_total: self.failed_total.load(Ordering::Relaxed),
            deferral_rate: if requests_total == 0 {
                0.0
            } else {
                deferred_total as f64 / requests_total as f64
            },
            latency_ms: self.latency.iter().map(|(k, h)| (k.clone(), h.snapshot())).collect(),
        }
    }
}

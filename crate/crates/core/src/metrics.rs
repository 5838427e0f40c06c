//! Run instrumentation: I/O volume, edge accesses, block load/reuse counts and
//! windowed read throughput.
//!
//! Counters are relaxed atomics. Values are exact once the run has quiesced.

use std::sync::atomic::{AtomicU64, Ordering::Relaxed};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::image::PAGE_BYTES;

pub const METRICS_VERSION: u32 = 1;
pub const DEFAULT_SAMPLE_WINDOW: Duration = Duration::from_millis(50);

#[derive(Debug)]
pub struct Counters {
    pub bytes_read: AtomicU64,
    pub blocks_loaded: AtomicU64,
    pub blocks_reused: AtomicU64,
    pub blocks_evicted: AtomicU64,
    pub block_tasks: AtomicU64,
    pub mini_tasks: AtomicU64,
    /// Distinct block edges consumed per block residency: an edge read again
    /// from the same loaded copy is not counted twice. Mini-region edges never
    /// touch the disk and are counted separately.
    pub edges_accessed: AtomicU64,
    pub mini_edges_accessed: AtomicU64,
    /// Every edge visit, block or mini, repeats included.
    pub edges_traversed: AtomicU64,
    pub vertices_processed: AtomicU64,
    /// Activations that created a new frontier entry.
    pub activations: AtomicU64,
    /// Activations merged into an entry already pending.
    pub activations_coalesced: AtomicU64,
    pub read_retries: AtomicU64,
    started: Instant,
    window: Duration,
    samples: Mutex<Vec<u64>>,
}

impl Default for Counters {
    fn default() -> Self {
        Self::with_window(DEFAULT_SAMPLE_WINDOW)
    }
}

impl Counters {
    pub fn with_window(window: Duration) -> Self {
        Counters {
            bytes_read: AtomicU64::new(0),
            blocks_loaded: AtomicU64::new(0),
            blocks_reused: AtomicU64::new(0),
            blocks_evicted: AtomicU64::new(0),
            block_tasks: AtomicU64::new(0),
            mini_tasks: AtomicU64::new(0),
            edges_accessed: AtomicU64::new(0),
            mini_edges_accessed: AtomicU64::new(0),
            edges_traversed: AtomicU64::new(0),
            vertices_processed: AtomicU64::new(0),
            activations: AtomicU64::new(0),
            activations_coalesced: AtomicU64::new(0),
            read_retries: AtomicU64::new(0),
            started: Instant::now(),
            window,
            samples: Mutex::new(Vec::new()),
        }
    }

    /// Accounts a completed read of `pages` pages.
    pub fn record_read(&self, pages: u64) {
        let bytes = pages * PAGE_BYTES as u64;
        self.bytes_read.fetch_add(bytes, Relaxed);
        let slot = (self.started.elapsed().as_nanos() / self.window.as_nanos().max(1)) as usize;
        let mut s = self.samples.lock().unwrap();
        if s.len() <= slot {
            s.resize(slot + 1, 0);
        }
        s[slot] += bytes;
    }

    pub fn add(&self, c: &AtomicU64, n: u64) {
        c.fetch_add(n, Relaxed);
    }

    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            bytes_read: self.bytes_read.load(Relaxed),
            blocks_loaded: self.blocks_loaded.load(Relaxed),
            blocks_reused: self.blocks_reused.load(Relaxed),
            blocks_evicted: self.blocks_evicted.load(Relaxed),
            block_tasks: self.block_tasks.load(Relaxed),
            mini_tasks: self.mini_tasks.load(Relaxed),
            edges_accessed: self.edges_accessed.load(Relaxed),
            mini_edges_accessed: self.mini_edges_accessed.load(Relaxed),
            edges_traversed: self.edges_traversed.load(Relaxed),
            vertices_processed: self.vertices_processed.load(Relaxed),
            activations: self.activations.load(Relaxed),
            activations_coalesced: self.activations_coalesced.load(Relaxed),
            read_retries: self.read_retries.load(Relaxed),
            window_ms: self.window.as_millis() as u64,
            window_bytes: self.samples.lock().unwrap().clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CounterSnapshot {
    pub bytes_read: u64,
    pub blocks_loaded: u64,
    pub blocks_reused: u64,
    pub blocks_evicted: u64,
    pub block_tasks: u64,
    pub mini_tasks: u64,
    pub edges_accessed: u64,
    pub mini_edges_accessed: u64,
    pub edges_traversed: u64,
    pub vertices_processed: u64,
    pub activations: u64,
    pub activations_coalesced: u64,
    pub read_retries: u64,
    pub window_ms: u64,
    pub window_bytes: Vec<u64>,
}

impl CounterSnapshot {
    /// Disk bytes per block edge consumed; `None` when no block edge was read.
    pub fn bytes_per_edge(&self) -> Option<f64> {
        (self.edges_accessed > 0).then(|| self.bytes_read as f64 / self.edges_accessed as f64)
    }

    /// Bytes per second within each sampling window.
    pub fn throughput(&self) -> Vec<f64> {
        let secs = self.window_ms as f64 / 1000.0;
        self.window_bytes.iter().map(|&b| b as f64 / secs).collect()
    }
}

pub fn bytes_per_edge(c: &CounterSnapshot) -> Option<f64> {
    c.bytes_per_edge()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub metrics_version: u32,
    pub algorithm: String,
    pub elapsed_ms: f64,
    pub counters: CounterSnapshot,
    pub bytes_per_edge: Option<f64>,
    pub peak_rss_kb: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<u64>,
}

impl MetricsReport {
    pub fn new(algorithm: &str, elapsed: Duration, counters: CounterSnapshot) -> Self {
        MetricsReport {
            metrics_version: METRICS_VERSION,
            algorithm: algorithm.to_string(),
            elapsed_ms: elapsed.as_secs_f64() * 1e3,
            bytes_per_edge: counters.bytes_per_edge(),
            counters,
            peak_rss_kb: peak_rss_kb(),
            rounds: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let c = &self.counters;
        let mut out = String::new();
        let mut row = |k: &str, v: String| out.push_str(&format!("{k:<24}{v}\n"));
        row("algorithm", self.algorithm.clone());
        row("elapsed_ms", format!("{:.3}", self.elapsed_ms));
        if let Some(r) = self.rounds {
            row("rounds", r.to_string());
        }
        row("bytes_read", c.bytes_read.to_string());
        row("blocks_loaded", c.blocks_loaded.to_string());
        row("blocks_reused", c.blocks_reused.to_string());
        row("blocks_evicted", c.blocks_evicted.to_string());
        row("block_tasks", c.block_tasks.to_string());
        row("edges_accessed", c.edges_accessed.to_string());
        row("mini_edges_accessed", c.mini_edges_accessed.to_string());
        row("edges_traversed", c.edges_traversed.to_string());
        row("vertices_processed", c.vertices_processed.to_string());
        row("activations", c.activations.to_string());
        row(
            "bytes_per_edge",
            self.bytes_per_edge
                .map_or("n/a".to_string(), |b| format!("{b:.3}")),
        );
        row(
            "peak_rss_kb",
            self.peak_rss_kb.map_or("n/a".to_string(), |k| k.to_string()),
        );
        out
    }
}

/// Peak resident set size from the OS, when the platform exposes it.
pub fn peak_rss_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find(|l| l.starts_with("VmHWM:"))?
        .split_whitespace()
        .nth(1)?
        .parse()
        .ok()
}

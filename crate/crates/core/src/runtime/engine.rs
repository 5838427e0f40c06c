use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::events::{EventLog, VertexEventKind};
use super::worklist::{SyncSink, Task, Worklist, WorklistParts};
use crate::error::{Error, Result};
use crate::graph::VertexId;
use crate::metrics::Counters;
use crate::storage::{OpenImage, PageRun};

/// Scheduling priority returned by propagation. Values `<= 0` mean "do not
/// activate".
pub type Priority = i32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorityOrder {
    #[default]
    MinFirst,
    MaxFirst,
}

impl PriorityOrder {
    /// Priority of a block with an empty frontier.
    pub fn neutral(self) -> Priority {
        match self {
            PriorityOrder::MinFirst => Priority::MAX,
            PriorityOrder::MaxFirst => Priority::MIN,
        }
    }

    pub fn combine(self, a: Priority, b: Priority) -> Priority {
        match self {
            PriorityOrder::MinFirst => a.min(b),
            PriorityOrder::MaxFirst => a.max(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecutionMode {
    #[default]
    Async,
    Sync,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub threads: usize,
    pub buffer_bytes: u64,
    pub priority_order: PriorityOrder,
    pub mode: ExecutionMode,
    /// Consecutive reuses after which a block is evicted; 0 disables.
    pub early_stop_threshold: u32,
    pub pull_batch: usize,
    pub preload_batch: usize,
    pub direct_io: bool,
    pub io_workers: usize,
    pub record_events: bool,
}

pub const DEFAULT_BUFFER_BYTES: u64 = 256 << 20;

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            buffer_bytes: DEFAULT_BUFFER_BYTES,
            priority_order: PriorityOrder::MinFirst,
            mode: ExecutionMode::Async,
            early_stop_threshold: 0,
            pull_batch: 4,
            preload_batch: 32,
            direct_io: false,
            io_workers: 2,
            record_events: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(Error::InvalidArgument("threads must be at least 1".into()));
        }
        if self.buffer_bytes < crate::image::PAGE_BYTES as u64 {
            return Err(Error::InvalidArgument("buffer must hold at least one 4 KB page".into()));
        }
        if self.pull_batch == 0 || self.preload_batch == 0 || self.io_workers == 0 {
            return Err(Error::InvalidArgument("batch sizes and io_workers must be positive".into()));
        }
        Ok(())
    }
}

/// Activated vertices (reordered ids) with their priorities.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Frontier {
    entries: Vec<(VertexId, Priority)>,
}

impl Frontier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<(VertexId, Priority)>) -> Self {
        Frontier { entries }
    }

    pub fn push(&mut self, v: VertexId, p: Priority) {
        self.entries.push((v, p));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(VertexId, Priority)] {
        &self.entries
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.entries.iter().map(|e| e.0)
    }
}

/// Block-centric executor over an opened image.
pub struct Engine<'a> {
    image: &'a OpenImage,
    config: RunConfig,
    counters: Counters,
    events: Option<EventLog>,
    trace: Option<Mutex<Vec<(u32, u32)>>>,
    round: AtomicU64,
    read_faults: AtomicU32,
}

impl std::fmt::Debug for Engine<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("config", &self.config).finish()
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "user function panicked".into()
    }
}

impl<'a> Engine<'a> {
    pub fn new(image: &'a OpenImage, config: RunConfig) -> Result<Self> {
        config.validate()?;
        Ok(Engine {
            image,
            events: config.record_events.then(EventLog::default),
            config,
            counters: Counters::default(),
            trace: None,
            round: AtomicU64::new(0),
            read_faults: AtomicU32::new(0),
        })
    }

    pub fn image(&self) -> &'a OpenImage {
        self.image
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn events(&self) -> Option<&EventLog> {
        self.events.as_ref()
    }

    /// Records `(round, block)` for every block task of synchronous rounds.
    pub fn enable_block_trace(&mut self) {
        self.trace = Some(Mutex::new(Vec::new()));
    }

    pub fn block_trace(&self) -> Option<Vec<(u32, u32)>> {
        self.trace.as_ref().map(|t| t.lock().unwrap().clone())
    }

    /// Synchronous rounds completed so far.
    pub fn rounds(&self) -> u64 {
        self.round.load(Ordering::Relaxed)
    }

    /// Makes the next `n` block reads of the next run fail.
    #[doc(hidden)]
    pub fn inject_read_faults(&self, n: u32) {
        self.read_faults.store(n, Ordering::Relaxed);
    }

    /// Applies `f` to every real vertex in parallel; vertices with a positive
    /// result are returned as a frontier.
    pub fn foreach_vertex<F>(&self, f: F) -> Result<Frontier>
    where
        F: Fn(VertexId) -> Priority + Sync,
    {
        let n = self.image.n_total();
        let threads = self.config.threads.max(1) as u32;
        let chunk = n.div_ceil(threads).max(1);
        let results: Vec<std::thread::Result<Vec<(VertexId, Priority)>>> =
            std::thread::scope(|s| {
                let handles: Vec<_> = (0..threads)
                    .map(|t| {
                        let f = &f;
                        s.spawn(move || {
                            let lo = (t * chunk).min(n);
                            let hi = lo.saturating_add(chunk).min(n);
                            catch_unwind(AssertUnwindSafe(|| {
                                (lo..hi)
                                    .filter(|&v| !self.image.is_virtual_unchecked(v))
                                    .filter_map(|v| {
                                        let p = f(v);
                                        (p > 0).then_some((v, p))
                                    })
                                    .collect()
                            }))
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            });
        let mut entries = Vec::new();
        for r in results {
            entries.extend(r.map_err(|p| Error::Poisoned(panic_message(p)))?);
        }
        Ok(Frontier { entries })
    }

    /// Processes `seeds` and every activation they cause until global
    /// convergence.
    pub fn run_async<M, A, P>(&self, seeds: &Frontier, apply: A, propagate: P) -> Result<()>
    where
        A: Fn(VertexId) -> Option<M> + Sync,
        P: Fn(&M, VertexId) -> Priority + Sync,
    {
        self.execute(seeds, None, &apply, &propagate)
    }

    /// Processes exactly `frontier`; activations are collected into the
    /// returned frontier instead of being run.
    pub fn run_sync<M, A, P>(&self, frontier: &Frontier, apply: A, propagate: P) -> Result<Frontier>
    where
        A: Fn(VertexId) -> Option<M> + Sync,
        P: Fn(&M, VertexId) -> Priority + Sync,
    {
        let sink = SyncSink::new(self.image.n_total() as usize, self.config.priority_order);
        self.execute(frontier, Some(&sink), &apply, &propagate)?;
        self.round.fetch_add(1, Ordering::Relaxed);
        Ok(Frontier { entries: sink.into_entries() })
    }

    /// Runs to convergence in the configured mode. Returns the number of
    /// synchronous rounds (0 in async mode).
    pub fn run<M, A, P>(&self, seeds: Frontier, apply: A, propagate: P) -> Result<u64>
    where
        A: Fn(VertexId) -> Option<M> + Sync,
        P: Fn(&M, VertexId) -> Priority + Sync,
    {
        match self.config.mode {
            ExecutionMode::Async => {
                self.run_async(&seeds, apply, propagate)?;
                Ok(0)
            }
            ExecutionMode::Sync => {
                let mut frontier = seeds;
                let mut rounds = 0;
                while !frontier.is_empty() {
                    frontier = self.run_sync(&frontier, &apply, &propagate)?;
                    rounds += 1;
                }
                Ok(rounds)
            }
        }
    }

    fn check_seeds(&self, seeds: &Frontier) -> Result<()> {
        for &(v, p) in seeds.entries() {
            if self.image.is_virtual(v)? {
                return Err(Error::Contract(format!("cannot activate virtual vertex {v}")));
            }
            if p <= 0 {
                return Err(Error::InvalidArgument(format!("seed {v} has non-positive priority {p}")));
            }
        }
        Ok(())
    }

    fn execute<M, A, P>(&self, seeds: &Frontier, sink: Option<&SyncSink>, apply: &A, propagate: &P) -> Result<()>
    where
        A: Fn(VertexId) -> Option<M> + Sync,
        P: Fn(&M, VertexId) -> Priority + Sync,
    {
        self.check_seeds(seeds)?;
        if seeds.is_empty() {
            return Ok(());
        }
        let wl = Worklist::new(WorklistParts {
            image: self.image,
            config: &self.config,
            counters: &self.counters,
            events: self.events.as_ref(),
            sink,
            round: self.round.load(Ordering::Relaxed),
            trace: sink.and(self.trace.as_ref()),
        })?;
        let faults = self.read_faults.swap(0, Ordering::Relaxed);
        if faults > 0 {
            wl.reader().inject_faults(faults);
        }
        let sync_round = sink.map(|_| self.round.load(Ordering::Relaxed));
        if let (Some(round), Some(ev)) = (sync_round, self.events.as_ref()) {
            for v in seeds.vertices() {
                ev.vertex(round, v, VertexEventKind::Seeded);
            }
        }
        wl.submit_direct(seeds.entries())?;
        std::thread::scope(|s| {
            for _ in 0..self.config.threads {
                s.spawn(|| self.executor(&wl, sync_round, apply, propagate));
            }
        });
        if wl.is_aborted() {
            wl.drain_after_abort();
            return Err(wl
                .take_failure()
                .unwrap_or_else(|| Error::Invariant("run aborted without a recorded cause".into())));
        }
        Ok(())
    }

    fn executor<M, A, P>(&self, wl: &Worklist<'_>, sync_round: Option<u64>, apply: &A, propagate: &P)
    where
        A: Fn(VertexId) -> Option<M> + Sync,
        P: Fn(&M, VertexId) -> Priority + Sync,
    {
        let mut buf = Vec::new();
        let mut spins = 0;
        loop {
            if wl.is_aborted() {
                return;
            }
            let tasks = match wl.pull(self.config.pull_batch) {
                Ok(t) => t,
                Err(e) => return wl.abort(e),
            };
            if tasks.is_empty() {
                if wl.outstanding() == 0 {
                    return;
                }
                wl.idle_wait(&mut spins);
                continue;
            }
            spins = 0;
            for task in &tasks {
                let r = catch_unwind(AssertUnwindSafe(|| {
                    self.run_task(wl, task, sync_round, apply, propagate, &mut buf)
                }));
                match r {
                    Ok(Ok(())) => {}
                    Ok(Err(e)) => return wl.abort(e),
                    Err(p) => return wl.abort(Error::Poisoned(panic_message(p))),
                }
            }
        }
    }

    fn run_task<M, A, P>(
        &self,
        wl: &Worklist<'_>,
        task: &Task,
        sync_round: Option<u64>,
        apply: &A,
        propagate: &P,
        buf: &mut Vec<(VertexId, Priority)>,
    ) -> Result<()>
    where
        A: Fn(VertexId) -> Option<M> + Sync,
        P: Fn(&M, VertexId) -> Priority + Sync,
    {
        let c = &self.counters;
        buf.clear();
        let record = |u: VertexId| {
            if let (Some(round), Some(ev)) = (sync_round, self.events.as_ref()) {
                ev.vertex(round, u, VertexEventKind::Processed);
            }
        };
        match task {
            Task::Mini(vs) => {
                let mut edges = 0;
                for &u in vs {
                    record(u);
                    if let Some(msg) = apply(u) {
                        let nbrs = self.image.neighbors(u, None)?;
                        edges += nbrs.len() as u64;
                        for &v in nbrs {
                            let p = propagate(&msg, v);
                            if p > 0 {
                                buf.push((v, p));
                            }
                        }
                    }
                }
                c.add(&c.vertices_processed, vs.len() as u64);
                c.add(&c.mini_edges_accessed, edges);
                c.add(&c.edges_traversed, edges);
                wl.submit(buf)?;
                wl.finish_mini(vs.len());
            }
            Task::Block { block, frontier, pages, page_count } => {
                // SAFETY: the block is Processing and owned by this executor;
                // its buffer cannot be released or rewritten until `finish`.
                let pages = unsafe { std::slice::from_raw_parts(*pages, *page_count) };
                let run = PageRun { first_block: *block, pages };
                let (mut edges, mut fresh_edges) = (0, 0);
                for &u in frontier {
                    record(u);
                    if let Some(msg) = apply(u) {
                        let nbrs = self.image.neighbors(u, Some(run))?;
                        edges += nbrs.len() as u64;
                        if wl.first_touch(*block, u) {
                            fresh_edges += nbrs.len() as u64;
                        }
                        for &v in nbrs {
                            let p = propagate(&msg, v);
                            if p > 0 {
                                buf.push((v, p));
                            }
                        }
                    }
                }
                c.add(&c.vertices_processed, frontier.len() as u64);
                c.add(&c.edges_accessed, fresh_edges);
                c.add(&c.edges_traversed, edges);
                wl.submit(buf)?;
                wl.finish(*block)?;
            }
        }
        Ok(())
    }
}

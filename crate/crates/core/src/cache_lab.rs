//! Block-access traces from synchronous runs, replayed under OPT, LRU and SUB
//! replacement to compare read volume across cache sizes.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algorithms;
use crate::error::{Error, Result};
use crate::image::PAGE_BYTES;
use crate::runtime::{Engine, ExecutionMode, RunConfig};
use crate::storage::OpenImage;

pub const TRACE_MAGIC: &[u8; 4] = b"ACGT";

/// `(iteration, block)` pairs in access order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccessTrace {
    entries: Vec<(u32, u32)>,
}

impl AccessTrace {
    pub fn new(entries: Vec<(u32, u32)>) -> Result<Self> {
        if entries.windows(2).any(|w| w[0].0 > w[1].0) {
            return Err(Error::InvalidArgument("trace iterations must be nondecreasing".into()));
        }
        Ok(AccessTrace { entries })
    }

    /// All accesses in one iteration.
    pub fn from_blocks(blocks: &[u32]) -> Self {
        AccessTrace { entries: blocks.iter().map(|&b| (0, b)).collect() }
    }

    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn distinct_blocks(&self) -> usize {
        self.entries.iter().map(|e| e.1).collect::<HashSet<_>>().len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 8 * self.entries.len());
        out.extend_from_slice(TRACE_MAGIC);
        for &(it, b) in &self.entries {
            out.extend_from_slice(&it.to_le_bytes());
            out.extend_from_slice(&b.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != TRACE_MAGIC {
            return Err(Error::Format("not a block trace (bad magic)".into()));
        }
        let body = &bytes[4..];
        if !body.len().is_multiple_of(8) {
            return Err(Error::Format("trace body is not a whole number of records".into()));
        }
        let word = |c: &[u8]| u32::from_le_bytes(c.try_into().unwrap());
        let entries = body.chunks_exact(8).map(|c| (word(&c[..4]), word(&c[4..]))).collect();
        AccessTrace::new(entries).map_err(|e| Error::Format(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceAlgorithm {
    /// Source is an original id.
    Bfs { source: u32 },
    Wcc,
}

/// Runs `algorithm` in synchronous mode and returns every block request,
/// hits included, tagged with its round.
pub fn record_trace(image: &OpenImage, algorithm: TraceAlgorithm, config: &RunConfig) -> Result<AccessTrace> {
    let config = RunConfig { mode: ExecutionMode::Sync, ..config.clone() };
    let mut engine = Engine::new(image, config)?;
    engine.enable_block_trace();
    match algorithm {
        TraceAlgorithm::Bfs { source } => {
            algorithms::bfs(&engine, source)?;
        }
        TraceAlgorithm::Wcc => {
            algorithms::wcc(&engine)?;
        }
    }
    AccessTrace::new(engine.block_trace().unwrap_or_default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Opt,
    Lru,
    Sub,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Opt, Policy::Lru, Policy::Sub];
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Opt => "OPT",
            Policy::Lru => "LRU",
            Policy::Sub => "SUB",
        })
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "opt" => Ok(Policy::Opt),
            "lru" => Ok(Policy::Lru),
            "sub" => Ok(Policy::Sub),
            _ => Err(Error::InvalidArgument(format!("unknown policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyResult {
    pub policy: Policy,
    pub capacity: usize,
    pub misses: u64,
    pub bytes: u64,
}

impl PolicyResult {
    pub const CSV_HEADER: &'static str = "policy,capacity,misses,bytes";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.policy, self.capacity, self.misses, self.bytes)
    }
}

/// Demand-paging replay of `trace` with `capacity` block slots. `seed` drives
/// SUB's random victim choice.
pub fn simulate(trace: &AccessTrace, policy: Policy, capacity: usize, seed: u64) -> Result<PolicyResult> {
    if capacity == 0 {
        return Err(Error::InvalidArgument("cache capacity must be at least 1".into()));
    }
    let misses = match policy {
        Policy::Opt => opt(trace, capacity),
        Policy::Lru => lru(trace, capacity),
        Policy::Sub => sub(trace, capacity, seed),
    };
    Ok(PolicyResult {
        policy,
        capacity,
        misses,
        bytes: misses * PAGE_BYTES as u64,
    })
}

/// Every policy at every capacity in `capacities`.
pub fn sweep(trace: &AccessTrace, capacities: &[usize], seed: u64) -> Result<Vec<PolicyResult>> {
    let mut out = Vec::new();
    for &c in capacities {
        for p in Policy::ALL {
            out.push(simulate(trace, p, c, seed)?);
        }
    }
    Ok(out)
}

fn next_uses(trace: &AccessTrace) -> Vec<usize> {
    let mut next = vec![usize::MAX; trace.len()];
    let mut seen: HashMap<u32, usize> = HashMap::new();
    for (i, &(_, b)) in trace.entries.iter().enumerate().rev() {
        if let Some(&j) = seen.get(&b) {
            next[i] = j;
        }
        seen.insert(b, i);
    }
    next
}

fn opt(trace: &AccessTrace, capacity: usize) -> u64 {
    let next = next_uses(trace);
    // Max element is the victim: farthest next use, then smallest block id.
    let mut order: BTreeSet<(usize, Reverse<u32>)> = BTreeSet::new();
    let mut resident: HashMap<u32, usize> = HashMap::new();
    let mut misses = 0;
    for (i, &(_, b)) in trace.entries.iter().enumerate() {
        if let Some(n) = resident.get_mut(&b) {
            order.remove(&(*n, Reverse(b)));
            *n = next[i];
            order.insert((next[i], Reverse(b)));
            continue;
        }
        misses += 1;
        if resident.len() == capacity {
            let (_, Reverse(victim)) = order.pop_last().unwrap();
            resident.remove(&victim);
        }
        resident.insert(b, next[i]);
        order.insert((next[i], Reverse(b)));
    }
    misses
}

fn lru(trace: &AccessTrace, capacity: usize) -> u64 {
    let mut order: BTreeSet<(usize, u32)> = BTreeSet::new();
    let mut last: HashMap<u32, usize> = HashMap::new();
    let mut misses = 0;
    for (i, &(_, b)) in trace.entries.iter().enumerate() {
        if let Some(t) = last.get_mut(&b) {
            order.remove(&(*t, b));
            *t = i;
            order.insert((i, b));
            continue;
        }
        misses += 1;
        if last.len() == capacity {
            let (_, victim) = order.pop_first().unwrap();
            last.remove(&victim);
        }
        last.insert(b, i);
        order.insert((i, b));
    }
    misses
}

fn sub(trace: &AccessTrace, capacity: usize, seed: u64) -> u64 {
    // Blocks accessed by the iteration following each iteration.
    let mut iterations: Vec<u32> = trace.entries.iter().map(|e| e.0).collect();
    iterations.dedup();
    let mut per_iter: HashMap<u32, HashSet<u32>> = HashMap::new();
    for &(it, b) in &trace.entries {
        per_iter.entry(it).or_default().insert(b);
    }
    let empty = HashSet::new();
    let next_set: HashMap<u32, &HashSet<u32>> = iterations
        .iter()
        .enumerate()
        .map(|(k, &it)| {
            let next = iterations.get(k + 1).map_or(&empty, |n| &per_iter[n]);
            (it, next)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slots: Vec<u32> = Vec::with_capacity(capacity);
    let mut pos: HashMap<u32, usize> = HashMap::new();
    let mut misses = 0;
    for &(it, b) in &trace.entries {
        if pos.contains_key(&b) {
            continue;
        }
        misses += 1;
        if slots.len() == capacity {
            let upcoming = next_set[&it];
            let cold: Vec<usize> = (0..slots.len()).filter(|&k| !upcoming.contains(&slots[k])).collect();
            let k = if cold.is_empty() {
                rng.gen_range(0..slots.len())
            } else {
                cold[rng.gen_range(0..cold.len())]
            };
            let victim = slots.swap_remove(k);
            pos.remove(&victim);
            if k < slots.len() {
                pos.insert(slots[k], k);
            }
        }
        pos.insert(b, slots.len());
        slots.push(b);
    }
    misses
}

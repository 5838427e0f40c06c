use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use super::AtomicF64;
use crate::error::{Error, Result};
use crate::runtime::{Engine, Frontier};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PprParams {
    /// Teleport probability.
    pub alpha: f64,
    /// Push threshold, scaled by out-degree.
    pub r_max: f64,
}

impl PprParams {
    pub const SINGLE_SOURCE: PprParams = PprParams { alpha: 0.15, r_max: 1e-9 };
    pub const PAGERANK: PprParams = PprParams { alpha: 0.15, r_max: 1e-10 };

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha {} not in (0, 1)", self.alpha)));
        }
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("r_max {} must be positive", self.r_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PprSource {
    /// All mass starts on one original id.
    Vertex(u32),
    /// Mass `1/n` on every vertex (PageRank).
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PprResult {
    /// Indexed by original id.
    pub estimate: Vec<f64>,
    pub residual: Vec<f64>,
}

/// Forward push. A vertex is pushed while `r(v) >= r_max * max(deg(v), 1)`.
/// A vertex without out-edges keeps the non-teleported share of its residual,
/// pushing it repeatedly into its own estimate until it falls below `r_max`.
pub fn ppr(engine: &Engine<'_>, source: PprSource, params: PprParams) -> Result<PprResult> {
    params.validate()?;
    let image = engine.image();
    let ids = image.id_map()?;
    let n = image.n_total() as usize;
    let deg: Vec<u64> = (0..n as u32)
        .map(|v| if image.is_virtual_unchecked(v) { 0 } else { image.degree_of(v).unwrap_or(0) })
        .collect();
    let threshold = |v: u32| params.r_max * deg[v as usize].max(1) as f64;
    let estimate: Vec<AtomicF64> = (0..n).map(|_| AtomicF64::new(0.0)).collect();
    let residual: Vec<AtomicF64> = (0..n).map(|_| AtomicF64::new(0.0)).collect();
    let queued: Vec<AtomicBool> = (0..n).map(|_| AtomicBool::new(false)).collect();

    let seeds = match source {
        PprSource::Vertex(s) => {
            let s = ids.to_reordered(s)?;
            residual[s as usize].swap(1.0);
            Frontier::from_entries(vec![(s, 1)])
        }
        PprSource::Uniform => {
            let share = 1.0 / ids.n_original().max(1) as f64;
            engine.foreach_vertex(|v| {
                residual[v as usize].swap(share);
                (share >= threshold(v)) as i32
            })?
        }
    };
    for v in seeds.vertices() {
        queued[v as usize].store(true, Ordering::SeqCst);
    }

    let alpha = params.alpha;
    engine.run(
        seeds,
        |u| {
            let u = u as usize;
            queued[u].store(false, Ordering::SeqCst);
            if deg[u] == 0 {
                let r = residual[u].load();
                let mut rest = r;
                while rest >= params.r_max {
                    rest *= 1.0 - alpha;
                }
                let moved = r - rest;
                estimate[u].add(moved);
                residual[u].add(-moved);
                return None;
            }
            let r = residual[u].swap(0.0);
            if r == 0.0 {
                return None;
            }
            estimate[u].add(alpha * r);
            Some((1.0 - alpha) * r / deg[u] as f64)
        },
        |&share, v| {
            let now = residual[v as usize].add(share);
            if now >= threshold(v) && !queued[v as usize].swap(true, Ordering::SeqCst) {
                1
            } else {
                0
            }
        },
    )?;

    let estimate: Vec<f64> = estimate.iter().map(AtomicF64::load).collect();
    let residual: Vec<f64> = residual.iter().map(AtomicF64::load).collect();
    if estimate.iter().chain(&residual).any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite value in push state".into()));
    }
    Ok(PprResult {
        estimate: ids.gather(&estimate),
        residual: ids.gather(&residual),
    })
}

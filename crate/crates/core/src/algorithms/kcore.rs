use std::sync::atomic::{AtomicI64, AtomicU32, Ordering};

use crate::error::Result;
use crate::runtime::Engine;

pub const DEFAULT_K: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KCoreResult {
    /// Indexed by original id.
    pub in_core: Vec<bool>,
    /// Times each vertex was activated (0 or 1).
    pub activations: Vec<u32>,
}

/// Membership in the `k`-core, by peeling: a vertex is activated once, when
/// its live degree first drops below `k`.
pub fn kcore(engine: &Engine<'_>, k: u32) -> Result<KCoreResult> {
    let image = engine.image();
    let ids = image.id_map()?;
    let n = image.n_total() as usize;
    let k = k as i64;
    let deg: Vec<AtomicI64> = (0..n as u32)
        .map(|v| {
            let d = if image.is_virtual_unchecked(v) { 0 } else { image.degree_of(v).unwrap_or(0) };
            AtomicI64::new(d as i64)
        })
        .collect();
    let activations: Vec<AtomicU32> = (0..n).map(|_| AtomicU32::new(0)).collect();
    let seeds = engine.foreach_vertex(|v| {
        if deg[v as usize].load(Ordering::Relaxed) < k {
            activations[v as usize].fetch_add(1, Ordering::Relaxed);
            1
        } else {
            0
        }
    })?;

    engine.run(
        seeds,
        |_| Some(()),
        |_, v| {
            if deg[v as usize].fetch_sub(1, Ordering::AcqRel) == k {
                activations[v as usize].fetch_add(1, Ordering::Relaxed);
                1
            } else {
                0
            }
        },
    )?;
    let in_core: Vec<bool> = deg.iter().map(|d| d.load(Ordering::Relaxed) >= k).collect();
    let acts: Vec<u32> = activations.into_iter().map(AtomicU32::into_inner).collect();
    Ok(KCoreResult {
        in_core: ids.gather(&in_core),
        activations: ids.gather(&acts),
    })
}

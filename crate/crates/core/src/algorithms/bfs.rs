use std::sync::atomic::{AtomicU32, Ordering};

use super::priority_of;
use crate::error::Result;
use crate::runtime::{Engine, Frontier};

/// Distance of a vertex the source cannot reach.
pub const UNREACHED: u32 = u32::MAX;

/// Hop distances from `source` (original id), indexed by original id.
pub fn bfs(engine: &Engine<'_>, source: u32) -> Result<Vec<u32>> {
    let image = engine.image();
    let ids = image.id_map()?;
    let s = ids.to_reordered(source)?;
    let dis: Vec<AtomicU32> = (0..image.n_total()).map(|_| AtomicU32::new(UNREACHED)).collect();
    dis[s as usize].store(0, Ordering::Release);
    let mut seeds = Frontier::new();
    seeds.push(s, priority_of(0));

    engine.run(
        seeds,
        |u| Some(dis[u as usize].load(Ordering::Acquire)),
        |&d, v| {
            let next = d + 1;
            let slot = &dis[v as usize];
            let mut cur = slot.load(Ordering::Acquire);
            while next < cur {
                match slot.compare_exchange_weak(cur, next, Ordering::AcqRel, Ordering::Acquire) {
                    Ok(_) => return priority_of(next as u64),
                    Err(c) => cur = c,
                }
            }
            0
        },
    )?;
    let plain: Vec<u32> = dis.into_iter().map(AtomicU32::into_inner).collect();
    Ok(ids.gather(&plain))
}

use std::sync::atomic::{AtomicU32, Ordering};

use super::priority_of;
use crate::error::Result;
use crate::runtime::Engine;

/// Smallest original id in each vertex's component, by label propagation.
/// Expects a symmetric image; on a directed one labels flow along edge
/// direction only.
pub fn wcc(engine: &Engine<'_>) -> Result<Vec<u32>> {
    let image = engine.image();
    let ids = image.id_map()?;
    let label: Vec<AtomicU32> = ids.old_of_new().iter().map(|&o| AtomicU32::new(o)).collect();
    let seeds = engine.foreach_vertex(|v| priority_of(label[v as usize].load(Ordering::Relaxed) as u64))?;

    engine.run(
        seeds,
        |u| Some(label[u as usize].load(Ordering::Acquire)),
        |&l, v| {
            let slot = &label[v as usize];
            let mut cur = slot.load(Ordering::Acquire);
            while l < cur {
                match slot.compare_exchange_weak(cur, l, Ordering::AcqRel, Ordering::Acquire) {
                    Ok(_) => return priority_of(l as u64),
                    Err(c) => cur = c,
                }
            }
            0
        },
    )?;
    let plain: Vec<u32> = label.into_iter().map(AtomicU32::into_inner).collect();
    Ok(ids.gather(&plain))
}

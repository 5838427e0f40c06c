use std::sync::atomic::{AtomicBool, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::runtime::Engine;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MisResult {
    /// Indexed by original id.
    pub in_set: Vec<bool>,
    /// Selection rounds; each is two synchronous passes.
    pub rounds: u64,
}

/// The seeded label permutation: `labels[v]` for original id `v`.
pub fn mis_labels(n: usize, seed: u64) -> Vec<u32> {
    let mut labels: Vec<u32> = (0..n as u32).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    labels
}

/// Maximal independent set equal to greedy selection in increasing label
/// order. Each round, every live vertex without a lower-labelled live
/// neighbour joins the set and removes itself and its neighbours. Always
/// runs as synchronous rounds regardless of the configured mode. Expects a
/// symmetric image.
pub fn mis(engine: &Engine<'_>, seed: u64) -> Result<MisResult> {
    let image = engine.image();
    let ids = image.id_map()?;
    let by_original = mis_labels(ids.n_original(), seed);
    let label: Vec<u32> = ids
        .old_of_new()
        .iter()
        .map(|&o| by_original.get(o as usize).copied().unwrap_or(u32::MAX))
        .collect();
    let n = image.n_total() as usize;
    let live: Vec<AtomicBool> = (0..n as u32)
        .map(|v| AtomicBool::new(!image.is_virtual_unchecked(v)))
        .collect();
    let blocked: Vec<AtomicBool> = (0..n).map(|_| AtomicBool::new(false)).collect();
    let in_set: Vec<AtomicBool> = (0..n).map(|_| AtomicBool::new(false)).collect();

    let mut frontier = engine.foreach_vertex(|_| 1)?;
    let mut rounds = 0;
    while !frontier.is_empty() {
        rounds += 1;
        // Mark every live vertex that has a lower-labelled live neighbour.
        engine.run_sync(
            &frontier,
            |u| live[u as usize].load(Ordering::Acquire).then(|| label[u as usize]),
            |&lu, v| {
                if lu < label[v as usize] && live[v as usize].load(Ordering::Acquire) {
                    blocked[v as usize].store(true, Ordering::Release);
                }
                0
            },
        )?;
        // Unblocked vertices join and remove their neighbours; survivors are
        // reactivated by their blocked neighbours for the next round.
        frontier = engine.run_sync(
            &frontier,
            |u| {
                let u = u as usize;
                // A blocked vertex reactivates its live neighbours even if it
                // was removed earlier in this pass: a neighbour it blocked
                // may survive without any other live neighbour to wake it.
                if blocked[u].swap(false, Ordering::AcqRel) {
                    return Some(false);
                }
                if !live[u].load(Ordering::Acquire) {
                    return None;
                }
                in_set[u].store(true, Ordering::Release);
                live[u].store(false, Ordering::Release);
                Some(true)
            },
            |&selected, v| {
                if selected {
                    live[v as usize].store(false, Ordering::Release);
                    0
                } else {
                    live[v as usize].load(Ordering::Acquire) as i32
                }
            },
        )?;
    }
    let in_set: Vec<bool> = in_set.into_iter().map(AtomicBool::into_inner).collect();
    Ok(MisResult {
        in_set: ids.gather(&in_set),
        rounds,
    })
}

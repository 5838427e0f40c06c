//! Graph algorithms written against the [`Engine`](crate::Engine) API.
//!
//! Vertex state lives in dense atomic arrays indexed by reordered id; every
//! result is translated back to original ids before it is returned.

mod bfs;
mod kcore;
mod mis;
mod ppr;
mod wcc;

use std::sync::atomic::{AtomicU64, Ordering};

pub use bfs::{bfs, UNREACHED};
pub use kcore::{kcore, KCoreResult, DEFAULT_K};
pub use mis::{mis, mis_labels, MisResult};
pub use ppr::{ppr, PprParams, PprResult, PprSource};
pub use wcc::wcc;

use crate::runtime::Priority;

/// Clamps a non-negative quantity into the positive priority range.
pub(crate) fn priority_of(x: u64) -> Priority {
    x.saturating_add(1).min(Priority::MAX as u64) as Priority
}

/// `f64` stored as bits, with an atomic add.
#[derive(Debug, Default)]
pub(crate) struct AtomicF64(AtomicU64);

impl AtomicF64 {
    pub(crate) fn new(x: f64) -> Self {
        AtomicF64(AtomicU64::new(x.to_bits()))
    }

    pub(crate) fn load(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::SeqCst))
    }

    pub(crate) fn swap(&self, x: f64) -> f64 {
        f64::from_bits(self.0.swap(x.to_bits(), Ordering::SeqCst))
    }

    /// Returns the new value.
    pub(crate) fn add(&self, x: f64) -> f64 {
        let mut cur = self.0.load(Ordering::SeqCst);
        loop {
            let next = (f64::from_bits(cur) + x).to_bits();
            match self.0.compare_exchange_weak(cur, next, Ordering::SeqCst, Ordering::SeqCst) {
                Ok(_) => return f64::from_bits(next),
                Err(c) => cur = c,
            }
        }
    }
}

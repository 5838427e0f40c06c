//! Fixed pool of 4 KB page slots with a lock-free free list.

use std::cell::UnsafeCell;

use crossbeam_queue::ArrayQueue;

use crate::storage::Page;

pub type SlotId = u32;

pub struct BufferPool {
    pages: Box<[UnsafeCell<Page>]>,
    free: ArrayQueue<SlotId>,
}

// SAFETY: a slot is written only by the holder that allocated it, and slots
// are handed out at most once until released.
unsafe impl Sync for BufferPool {}

impl std::fmt::Debug for BufferPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BufferPool")
            .field("capacity", &self.capacity())
            .field("free", &self.free_count())
            .finish()
    }
}

impl BufferPool {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        // Zeroed allocation lets the OS map pages lazily.
        let pages: Box<[UnsafeCell<Page>]> = {
            let b = Box::<[UnsafeCell<Page>]>::new_zeroed_slice(capacity);
            // SAFETY: all-zero bytes are a valid Page.
            unsafe { b.assume_init() }
        };
        let free = ArrayQueue::new(capacity);
        for s in 0..capacity as SlotId {
            free.push(s).unwrap();
        }
        BufferPool { pages, free }
    }

    pub fn capacity(&self) -> usize {
        self.pages.len()
    }

    pub fn free_count(&self) -> usize {
        self.free.len()
    }

    /// Takes up to `count` slots; returns fewer (possibly none) when the pool
    /// runs dry.
    pub fn alloc(&self, count: usize) -> Vec<SlotId> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            match self.free.pop() {
                Some(s) => out.push(s),
                None => break,
            }
        }
        out
    }

    /// Takes `count` consecutive slots, returning the first. Concurrent
    /// allocators may briefly observe fewer free slots while this runs.
    pub fn alloc_contiguous(&self, count: usize) -> Option<SlotId> {
        if count == 1 {
            return self.free.pop();
        }
        if count == 0 || count > self.capacity() {
            return None;
        }
        let mut taken = self.alloc(self.capacity());
        taken.sort_unstable();
        let mut found = None;
        let mut run_start = 0;
        for i in 0..taken.len() {
            if i > 0 && taken[i] != taken[i - 1] + 1 {
                run_start = i;
            }
            if i + 1 - run_start == count {
                found = Some(run_start);
                break;
            }
        }
        let result = found.map(|i| taken[i]);
        let keep = found.map_or(0..0, |i| i..i + count);
        for (i, s) in taken.into_iter().enumerate() {
            if !keep.contains(&i) {
                self.free.push(s).expect("free list overflow");
            }
        }
        result
    }

    pub fn release(&self, slots: &[SlotId]) {
        for &s in slots {
            debug_assert!((s as usize) < self.capacity());
            self.free.push(s).expect("slot released twice");
        }
    }

    pub fn release_run(&self, start: SlotId, count: usize) {
        for s in start..start + count as SlotId {
            self.free.push(s).expect("slot released twice");
        }
    }

    pub(crate) fn run_ptr(&self, start: SlotId) -> *mut Page {
        self.pages[start as usize].get()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn empty_pool_alloc() {
        let p = BufferPool::new(2);
        assert_eq!(p.alloc(2).len(), 2);
        assert!(p.alloc(1).is_empty());
        assert_eq!(p.alloc_contiguous(1), None);
    }

    #[test]
    fn alloc_release_restores() {
        let p = BufferPool::new(8);
        let s = p.alloc(5);
        assert_eq!(p.free_count(), 3);
        p.release(&s);
        assert_eq!(p.free_count(), 8);
    }

    #[test]
    fn contiguous_runs() {
        let p = BufferPool::new(6);
        let all = p.alloc(6);
        p.release(&[all[0], all[2], all[3], all[5]]);
        let start = p.alloc_contiguous(2).unwrap();
        assert_eq!(start, all[2]);
        assert_eq!(p.free_count(), 2);
        assert_eq!(p.alloc_contiguous(2), None);
        assert_eq!(p.free_count(), 2);
        assert_eq!(p.alloc_contiguous(7), None);
    }

    #[test]
    fn concurrent_conservation() {
        let p = BufferPool::new(64);
        let held = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for t in 0..8 {
                let (p, held) = (&p, &held);
                s.spawn(move || {
                    for i in 0..2000 {
                        let want = 1 + (i + t) % 5;
                        if i % 7 == 0 {
                            if let Some(start) = p.alloc_contiguous(want) {
                                held.fetch_add(want, Ordering::SeqCst);
                                assert!(held.load(Ordering::SeqCst) <= 64);
                                held.fetch_sub(want, Ordering::SeqCst);
                                p.release_run(start, want);
                            }
                        } else {
                            let got = p.alloc(want);
                            held.fetch_add(got.len(), Ordering::SeqCst);
                            assert!(held.load(Ordering::SeqCst) <= 64);
                            held.fetch_sub(got.len(), Ordering::SeqCst);
                            p.release(&got);
                        }
                    }
                });
            }
        });
        assert_eq!(p.free_count(), 64);
        let mut all = p.alloc(64);
        all.sort();
        assert_eq!(all, (0..64).collect::<Vec<_>>());
    }
}

//! Asynchronous page-run reads.
//!
//! `submit` queues a read and returns immediately; `try_harvest` collects
//! finished reads without blocking. The backend is a small pool of blocking
//! `pread` workers, which keeps the contract portable.

use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam_channel::{Receiver, Sender};

use crate::error::{Error, Result};
use crate::storage::{read_pages_at, Page};

/// Destination of a read. The submitter guarantees the memory stays valid and
/// untouched until the completion is harvested.
#[derive(Debug, Clone, Copy)]
pub struct PageDst(pub *mut Page);

// SAFETY: ownership of the destination is handed to exactly one worker.
unsafe impl Send for PageDst {}

#[derive(Debug, Clone, Copy)]
pub struct ReadRequest {
    pub block: u32,
    pub pages: u16,
    pub dst: PageDst,
    pub attempt: u32,
}

#[derive(Debug)]
pub struct ReadCompletion {
    pub request: ReadRequest,
    pub result: std::io::Result<()>,
}

pub struct AsyncReader {
    path: PathBuf,
    submit_tx: Option<Sender<ReadRequest>>,
    done_rx: Receiver<ReadCompletion>,
    workers: Vec<JoinHandle<()>>,
    direct: bool,
    faults: Arc<AtomicU32>,
}

impl std::fmt::Debug for AsyncReader {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AsyncReader")
            .field("path", &self.path)
            .field("workers", &self.workers.len())
            .field("direct", &self.direct)
            .finish()
    }
}

fn open_file(path: &Path, direct: bool) -> std::io::Result<(File, bool)> {
    #[cfg(target_os = "linux")]
    if direct {
        use std::os::unix::fs::OpenOptionsExt;
        if let Ok(f) = OpenOptions::new()
            .read(true)
            .custom_flags(libc::O_DIRECT)
            .open(path)
        {
            return Ok((f, true));
        }
        log::debug!("O_DIRECT unavailable for {}, using buffered reads", path.display());
    }
    let _ = direct;
    Ok((OpenOptions::new().read(true).open(path)?, false))
}

impl AsyncReader {
    pub fn new(path: impl AsRef<Path>, workers: usize, direct_io: bool) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let (file, direct) = open_file(&path, direct_io).map_err(|e| Error::io(&path, e))?;
        let (submit_tx, submit_rx) = crossbeam_channel::unbounded::<ReadRequest>();
        let (done_tx, done_rx) = crossbeam_channel::unbounded();
        let faults = Arc::new(AtomicU32::new(0));
        let mut handles = Vec::new();
        for _ in 0..workers.max(1) {
            let file = file.try_clone().map_err(|e| Error::io(&path, e))?;
            let (rx, tx, faults) = (submit_rx.clone(), done_tx.clone(), faults.clone());
            handles.push(std::thread::spawn(move || {
                for req in rx {
                    let injected = faults
                        .fetch_update(Ordering::AcqRel, Ordering::Acquire, |n| n.checked_sub(1))
                        .is_ok();
                    let result = if injected {
                        Err(std::io::Error::other("injected read fault"))
                    } else {
                        // SAFETY: the submitter owns `dst` for `pages` pages
                        // until this completion is harvested.
                        let dst = unsafe { std::slice::from_raw_parts_mut(req.dst.0, req.pages as usize) };
                        read_pages_at(&file, req.block, dst)
                    };
                    if tx.send(ReadCompletion { request: req, result }).is_err() {
                        break;
                    }
                }
            }));
        }
        Ok(AsyncReader {
            path,
            submit_tx: Some(submit_tx),
            done_rx,
            workers: handles,
            direct,
            faults,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Whether reads bypass the OS page cache.
    pub fn is_direct(&self) -> bool {
        self.direct
    }

    pub fn submit(&self, req: ReadRequest) {
        self.submit_tx
            .as_ref()
            .expect("reader shut down")
            .send(req)
            .expect("reader workers exited");
    }

    pub fn try_harvest(&self) -> Vec<ReadCompletion> {
        self.done_rx.try_iter().collect()
    }

    /// Waits up to `timeout` for at least one completion.
    pub fn harvest_timeout(&self, timeout: Duration) -> Vec<ReadCompletion> {
        match self.done_rx.recv_timeout(timeout) {
            Ok(first) => {
                let mut out = vec![first];
                out.extend(self.done_rx.try_iter());
                out
            }
            Err(_) => Vec::new(),
        }
    }

    /// Makes the next `n` reads fail.
    #[doc(hidden)]
    pub fn inject_faults(&self, n: u32) {
        self.faults.store(n, Ordering::Release);
    }
}

impl Drop for AsyncReader {
    fn drop(&mut self) {
        self.submit_tx.take();
        for h in self.workers.drain(..) {
            let _ = h.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn page_file(pages: u32) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        let mut bytes = Vec::new();
        for p in 0..pages {
            for i in 0..1024u32 {
                bytes.extend_from_slice(&(p * 10_000 + i).to_le_bytes());
            }
        }
        std::fs::write(f.path(), bytes).unwrap();
        f
    }

    #[test]
    fn submit_and_harvest() {
        let f = page_file(4);
        let reader = AsyncReader::new(f.path(), 2, false).unwrap();
        let mut buf = vec![Page::zeroed(); 2];
        reader.submit(ReadRequest {
            block: 2,
            pages: 2,
            dst: PageDst(buf.as_mut_ptr()),
            attempt: 1,
        });
        let mut done = Vec::new();
        while done.is_empty() {
            done = reader.harvest_timeout(Duration::from_millis(100));
        }
        assert!(done[0].result.is_ok());
        assert_eq!(buf[0].0[5], 20_005);
        assert_eq!(buf[1].0[1023], 31_023);
    }

    #[test]
    fn direct_io_falls_back_when_unsupported() {
        let f = page_file(1);
        let reader = AsyncReader::new(f.path(), 1, true).unwrap();
        let mut buf = vec![Page::zeroed(); 1];
        reader.submit(ReadRequest { block: 0, pages: 1, dst: PageDst(buf.as_mut_ptr()), attempt: 1 });
        let done = reader.harvest_timeout(Duration::from_secs(5));
        assert!(done[0].result.is_ok(), "direct={} {:?}", reader.is_direct(), done[0].result);
        assert_eq!(buf[0].0[7], 7);
    }

    #[test]
    fn injected_fault_reported() {
        let f = page_file(1);
        let reader = AsyncReader::new(f.path(), 1, false).unwrap();
        reader.inject_faults(1);
        let mut buf = vec![Page::zeroed(); 1];
        let req = ReadRequest { block: 0, pages: 1, dst: PageDst(buf.as_mut_ptr()), attempt: 1 };
        reader.submit(req);
        let done = reader.harvest_timeout(Duration::from_secs(5));
        assert!(done[0].result.is_err());
        reader.submit(req);
        let done = reader.harvest_timeout(Duration::from_secs(5));
        assert!(done[0].result.is_ok());
    }
}

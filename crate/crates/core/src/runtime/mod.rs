//! Block-centric execution: per-block metadata and frontier sets, the
//! dual-queue worklist, the buffer pool, asynchronous block reads and the
//! executor loop.

mod engine;
pub mod events;
pub mod io;
pub mod meta;
pub mod pool;
mod worklist;

pub use engine::{
    Engine, ExecutionMode, Frontier, Priority, PriorityOrder, RunConfig, DEFAULT_BUFFER_BYTES,
};
pub use events::{EventLog, TransitionEvent, VertexEvent, VertexEventKind};
pub use meta::{Afs, BlockMeta, BlockState, DENSE_SPAN, SPARSE_CAPACITY};
pub use pool::BufferPool;
pub use worklist::{MAX_READ_ATTEMPTS, MINI_BATCH};

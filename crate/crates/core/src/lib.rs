//! Out-of-core graph processing over a block-structured on-disk image.
//!
//! A graph is preprocessed once into an image: adjacency lists of
//! high-degree vertices are packed into 4 KB blocks on disk, and low-degree
//! ("mini") vertices live in a compact in-memory region. The [`Engine`] then
//! schedules whole blocks: active vertices are grouped by block, loaded
//! blocks are processed before unloaded ones, and a block reactivated while
//! it is being processed is run again from memory.
//!
//! ```no_run
//! use blockgraph::{algorithms, preprocess, CsrGraph, Engine, OpenImage, PartitionPlan, RunConfig};
//!
//! let g = CsrGraph::from_edges(3, &[(0, 1), (1, 2)], true)?;
//! preprocess(&g, &PartitionPlan::default(), "/tmp/p3")?;
//! let image = OpenImage::open("/tmp/p3")?;
//! let engine = Engine::new(&image, RunConfig::default())?;
//! let dist = algorithms::bfs(&engine, 0)?;
//! assert_eq!(dist, vec![0, 1, 2]);
//! # Ok::<(), blockgraph::Error>(())
//! ```

pub mod algorithms;
pub mod cache_lab;
pub mod error;
pub mod graph;
pub mod image;
pub mod metrics;
pub mod preprocess;
pub mod runtime;
pub mod storage;

pub use error::{Error, Result};
pub use graph::{CsrGraph, EdgeList, Ingested, VertexId};
pub use image::ImageHeader;
pub use metrics::{CounterSnapshot, Counters, MetricsReport};
pub use preprocess::{build_image, preprocess, write_image, BuiltImage, PartitionPlan};
pub use runtime::{
    BlockState, Engine, ExecutionMode, Frontier, Priority, PriorityOrder, RunConfig,
};
pub use storage::{IdMap, OpenImage};

//! Fixtures shared by the benchmarks.

use blockgraph::{preprocess, CsrGraph, OpenImage, PartitionPlan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

/// Skewed random graph: endpoints drawn from a power of a uniform variate,
/// so low ids become hubs.
pub fn skewed_graph(n: u32, m: usize, seed: u64, symmetrize: bool) -> CsrGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = || ((rng.gen::<f64>().powi(3)) * n as f64) as u32 % n;
    let edges: Vec<(u32, u32)> = (0..m).map(|_| (pick(), pick())).collect();
    CsrGraph::from_edges(n as usize, &edges, symmetrize).expect("valid edges")
}

/// Writes `g` to a temporary image. Keep the directory alive while the image
/// is in use.
pub fn image_of(g: &CsrGraph, plan: &PartitionPlan) -> (TempDir, OpenImage) {
    let dir = tempfile::tempdir().expect("tempdir");
    preprocess(g, plan, dir.path()).expect("preprocess");
    let img = OpenImage::open(dir.path()).expect("open image");
    (dir, img)
}

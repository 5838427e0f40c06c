#![allow(dead_code)]

use std::collections::VecDeque;

use blockgraph::{preprocess, CsrGraph, OpenImage, PartitionPlan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random graph with a few hubs so blocks, oversized runs and mini vertices
/// all show up.
pub fn random_graph(rng: &mut ChaCha8Rng, max_n: u32, max_avg_deg: u32, symmetrize: bool) -> CsrGraph {
    let n = rng.gen_range(1..=max_n);
    let avg = rng.gen_range(0..=max_avg_deg) as u64;
    let m = (n as u64 * avg / if symmetrize { 2 } else { 1 }) as usize;
    let hubs = rng.gen_range(0..=3.min(n));
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let u = if hubs > 0 && rng.gen_bool(0.2) { rng.gen_range(0..hubs) } else { rng.gen_range(0..n) };
        edges.push((u, rng.gen_range(0..n)));
    }
    CsrGraph::from_edges(n as usize, &edges, symmetrize).unwrap()
}

pub fn image_of(g: &CsrGraph, plan: &PartitionPlan) -> (TempDir, OpenImage) {
    let dir = tempfile::tempdir().unwrap();
    preprocess(g, plan, dir.path()).unwrap();
    let img = OpenImage::open(dir.path()).unwrap();
    (dir, img)
}

pub fn image(g: &CsrGraph) -> (TempDir, OpenImage) {
    image_of(g, &PartitionPlan::default())
}

pub fn bfs_oracle(g: &CsrGraph, s: u32) -> Vec<u32> {
    let mut dist = vec![u32::MAX; g.num_vertices()];
    dist[s as usize] = 0;
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for &v in g.neighbors(u) {
            if dist[v as usize] == u32::MAX {
                dist[v as usize] = dist[u as usize] + 1;
                q.push_back(v);
            }
        }
    }
    dist
}

/// Smallest vertex id of each vertex's component.
pub fn wcc_oracle(g: &CsrGraph) -> Vec<u32> {
    let n = g.num_vertices();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    fn find(p: &mut [u32], mut x: u32) -> u32 {
        while p[x as usize] != x {
            p[x as usize] = p[p[x as usize] as usize];
            x = p[x as usize];
        }
        x
    }
    for u in 0..n as u32 {
        for &v in g.neighbors(u) {
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            if a != b {
                let (lo, hi) = (a.min(b), a.max(b));
                parent[hi as usize] = lo;
            }
        }
    }
    (0..n as u32).map(|v| find(&mut parent, v)).collect()
}

/// Iterative peeling; degree is adjacency length, self-loops included.
pub fn kcore_oracle(g: &CsrGraph, k: u32) -> Vec<bool> {
    let n = g.num_vertices();
    let mut deg: Vec<i64> = g.degrees().map(|d| d as i64).collect();
    let mut alive = vec![true; n];
    let mut stack: Vec<u32> = (0..n as u32).filter(|&v| deg[v as usize] < k as i64).collect();
    for &v in &stack {
        alive[v as usize] = false;
    }
    while let Some(u) = stack.pop() {
        for &v in g.neighbors(u) {
            deg[v as usize] -= 1;
            if alive[v as usize] && deg[v as usize] < k as i64 {
                alive[v as usize] = false;
                stack.push(v);
            }
        }
    }
    alive
}

/// Sequential greedy in increasing label order.
pub fn greedy_mis(g: &CsrGraph, labels: &[u32]) -> Vec<bool> {
    let n = g.num_vertices();
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by_key(|&v| labels[v as usize]);
    let mut in_set = vec![false; n];
    let mut blocked = vec![false; n];
    for v in order {
        if blocked[v as usize] {
            continue;
        }
        in_set[v as usize] = true;
        for &w in g.neighbors(v) {
            blocked[w as usize] = true;
        }
    }
    in_set
}

/// Personalized PageRank by power iteration; vertices without out-edges keep
/// their mass (self-loop). `source = None` means uniform.
pub fn ppr_oracle(g: &CsrGraph, source: Option<u32>, alpha: f64, tol: f64) -> Vec<f64> {
    let n = g.num_vertices();
    let mut teleport = vec![0.0; n];
    match source {
        Some(s) => teleport[s as usize] = 1.0,
        None => teleport.iter_mut().for_each(|x| *x = 1.0 / n as f64),
    }
    let mut pi = teleport.clone();
    for _ in 0..100_000 {
        let mut next: Vec<f64> = teleport.iter().map(|t| alpha * t).collect();
        for u in 0..n as u32 {
            let nb = g.neighbors(u);
            let mass = (1.0 - alpha) * pi[u as usize];
            if nb.is_empty() {
                next[u as usize] += mass;
            } else {
                let share = mass / nb.len() as f64;
                for &v in nb {
                    next[v as usize] += share;
                }
            }
        }
        let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if delta < tol {
            break;
        }
    }
    pi
}

pub fn is_independent(g: &CsrGraph, s: &[bool]) -> bool {
    (0..g.num_vertices() as u32)
        .all(|u| !s[u as usize] || g.neighbors(u).iter().all(|&v| v == u || !s[v as usize]))
}

pub fn is_maximal(g: &CsrGraph, s: &[bool]) -> bool {
    (0..g.num_vertices() as u32)
        .all(|u| s[u as usize] || g.neighbors(u).iter().any(|&v| v != u && s[v as usize]))
}

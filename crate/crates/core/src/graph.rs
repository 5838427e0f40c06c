//! In-memory graph representation and edge-list ingestion.
//!
//! Edge lists come in two forms: whitespace-separated decimal text (`u v` per
//! line, `#` starts a comment) and a little-endian binary pair stream prefixed
//! by the magic `ACGE` and a `u64` edge count. Source ids need not be dense;
//! ingestion compacts them to `[0, n)` in ascending source-id order and hands
//! back the mapping.

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};

/// Vertex identifier. Whether it names an original or a reordered vertex is
/// determined by context.
pub type VertexId = u32;

pub const EDGE_LIST_MAGIC: &[u8; 4] = b"ACGE";

/// A directed edge list over dense ids `[0, num_vertices)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeList {
    pub num_vertices: usize,
    pub edges: Vec<(VertexId, VertexId)>,
    pub directed: bool,
}

/// Compressed sparse row adjacency. Targets within each list are sorted and
/// unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrGraph {
    offsets: Vec<u64>,
    targets: Vec<VertexId>,
}

impl Default for CsrGraph {
    fn default() -> Self {
        CsrGraph {
            offsets: vec![0],
            targets: Vec::new(),
        }
    }
}

impl CsrGraph {
    /// Builds a CSR from raw edges, sorting and deduplicating each list.
    /// Self-loops are kept. With `symmetrize`, the reverse of every edge is
    /// added before deduplication.
    pub fn from_edges(
        num_vertices: usize,
        edges: &[(VertexId, VertexId)],
        symmetrize: bool,
    ) -> Result<Self> {
        if num_vertices > u32::MAX as usize {
            return Err(Error::Range(format!(
                "{num_vertices} vertices exceed the 32-bit id space"
            )));
        }
        let mut degree = vec![0u64; num_vertices];
        for &(u, v) in edges {
            for x in [u, v] {
                if x as usize >= num_vertices {
                    return Err(Error::Range(format!(
                        "vertex {x} outside [0, {num_vertices})"
                    )));
                }
            }
            degree[u as usize] += 1;
            if symmetrize && u != v {
                degree[v as usize] += 1;
            }
        }
        let mut offsets = Vec::with_capacity(num_vertices + 1);
        offsets.push(0u64);
        let mut acc = 0u64;
        for d in &degree {
            acc += d;
            offsets.push(acc);
        }
        let mut cursor: Vec<u64> = offsets[..num_vertices].to_vec();
        let mut targets = vec![0 as VertexId; acc as usize];
        let mut put = |u: VertexId, v: VertexId| {
            let c = &mut cursor[u as usize];
            targets[*c as usize] = v;
            *c += 1;
        };
        for &(u, v) in edges {
            put(u, v);
            if symmetrize && u != v {
                put(v, u);
            }
        }

        // Sort and dedup each list in place, then compact.
        let mut write = 0usize;
        let mut new_offsets = Vec::with_capacity(num_vertices + 1);
        new_offsets.push(0u64);
        for v in 0..num_vertices {
            let (lo, hi) = (offsets[v] as usize, offsets[v + 1] as usize);
            targets[lo..hi].sort_unstable();
            let mut last: Option<VertexId> = None;
            for i in lo..hi {
                let t = targets[i];
                if last != Some(t) {
                    targets[write] = t;
                    write += 1;
                    last = Some(t);
                }
            }
            new_offsets.push(write as u64);
        }
        targets.truncate(write);
        targets.shrink_to_fit();
        Ok(CsrGraph {
            offsets: new_offsets,
            targets,
        })
    }

    pub fn from_edge_list(list: &EdgeList, symmetrize: bool) -> Result<Self> {
        Self::from_edges(list.num_vertices, &list.edges, symmetrize)
    }

    /// Assembles a CSR from raw parts, validating every invariant.
    pub fn from_parts(offsets: Vec<u64>, targets: Vec<VertexId>) -> Result<Self> {
        if offsets.first() != Some(&0) {
            return Err(Error::Invariant("offsets must start at 0".into()));
        }
        if *offsets.last().unwrap() != targets.len() as u64 {
            return Err(Error::Invariant("offsets must end at edge count".into()));
        }
        if offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Invariant("offsets must be nondecreasing".into()));
        }
        let n = offsets.len() - 1;
        if targets.iter().any(|&t| t as usize >= n) {
            return Err(Error::Invariant("target out of range".into()));
        }
        Ok(CsrGraph { offsets, targets })
    }

    pub fn num_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len()
    }

    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    pub fn targets(&self) -> &[VertexId] {
        &self.targets
    }

    pub fn degree(&self, v: VertexId) -> Result<u64> {
        let v = v as usize;
        if v >= self.num_vertices() {
            return Err(Error::Range(format!(
                "vertex {v} outside [0, {})",
                self.num_vertices()
            )));
        }
        Ok(self.offsets[v + 1] - self.offsets[v])
    }

    /// Adjacency of `v`. Panics if `v` is out of range.
    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        let v = v as usize;
        &self.targets[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    pub fn degrees(&self) -> impl Iterator<Item = u64> + '_ {
        self.offsets.windows(2).map(|w| w[1] - w[0])
    }

    pub fn to_edge_list(&self) -> EdgeList {
        let mut edges = Vec::with_capacity(self.num_edges());
        for u in 0..self.num_vertices() as VertexId {
            edges.extend(self.neighbors(u).iter().map(|&v| (u, v)));
        }
        EdgeList {
            num_vertices: self.num_vertices(),
            edges,
            directed: true,
        }
    }

    /// True if for every edge (u, v) the edge (v, u) also exists.
    pub fn is_symmetric(&self) -> bool {
        (0..self.num_vertices() as VertexId).all(|u| {
            self.neighbors(u)
                .iter()
                .all(|&v| self.neighbors(v).binary_search(&u).is_ok())
        })
    }
}

/// Result of ingesting an edge list with sparse source ids.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub graph: CsrGraph,
    /// `source_ids[dense]` is the id the vertex had in the input.
    pub source_ids: Vec<u64>,
}

fn compact(raw: Vec<(u64, u64)>, symmetrize: bool) -> Result<Ingested> {
    let mut ids: Vec<u64> = raw.iter().flat_map(|&(u, v)| [u, v]).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() > u32::MAX as usize {
        return Err(Error::Range("more than 2^32 distinct vertices".into()));
    }
    let dense = |x: u64| ids.binary_search(&x).unwrap() as VertexId;
    let edges: Vec<(VertexId, VertexId)> =
        raw.iter().map(|&(u, v)| (dense(u), dense(v))).collect();
    let graph = CsrGraph::from_edges(ids.len(), &edges, symmetrize)?;
    Ok(Ingested {
        graph,
        source_ids: ids,
    })
}

fn parse_id(tok: &str, line: usize) -> Result<u64> {
    let value: u64 = tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("expected a decimal vertex id, found {tok:?}"),
    })?;
    if value > u32::MAX as u64 {
        return Err(Error::Range(format!(
            "vertex id {value} on line {line} does not fit in 32 bits"
        )));
    }
    Ok(value)
}

/// Reads a text edge list: one `u v` pair per line, `#` comments, blank lines
/// ignored. Extra columns (e.g. weights) are rejected.
pub fn ingest_text<R: BufRead>(reader: R, symmetrize: bool) -> Result<Ingested> {
    let mut raw = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut toks = body.split_whitespace();
        let (Some(a), Some(b), None) = (toks.next(), toks.next(), toks.next()) else {
            return Err(Error::Parse {
                line: lineno,
                msg: "expected exactly two vertex ids".into(),
            });
        };
        raw.push((parse_id(a, lineno)?, parse_id(b, lineno)?));
    }
    compact(raw, symmetrize)
}

/// Reads the binary edge-list format (`ACGE`, u64 count, u32 pairs).
pub fn ingest_binary<R: Read>(mut reader: R, symmetrize: bool) -> Result<Ingested> {
    let mut magic = [0u8; 4];
    let bad = |msg: &str| Error::Parse {
        line: 0,
        msg: msg.to_string(),
    };
    reader
        .read_exact(&mut magic)
        .map_err(|_| bad("truncated header"))?;
    if &magic != EDGE_LIST_MAGIC {
        return Err(bad("bad magic, expected ACGE"));
    }
    let mut count = [0u8; 8];
    reader
        .read_exact(&mut count)
        .map_err(|_| bad("truncated header"))?;
    let count = u64::from_le_bytes(count);
    let mut raw = Vec::with_capacity(count.min(1 << 24) as usize);
    let mut pair = [0u8; 8];
    for i in 0..count {
        reader.read_exact(&mut pair).map_err(|_| Error::Parse {
            line: i as usize + 1,
            msg: format!("truncated stream: expected {count} pairs"),
        })?;
        let u = u32::from_le_bytes(pair[..4].try_into().unwrap());
        let v = u32::from_le_bytes(pair[4..].try_into().unwrap());
        raw.push((u as u64, v as u64));
    }
    compact(raw, symmetrize)
}

pub fn write_text<W: Write>(list: &EdgeList, mut out: W) -> std::io::Result<()> {
    for &(u, v) in &list.edges {
        writeln!(out, "{u} {v}")?;
    }
    Ok(())
}

pub fn write_binary<W: Write>(list: &EdgeList, mut out: W) -> std::io::Result<()> {
    out.write_all(EDGE_LIST_MAGIC)?;
    out.write_all(&(list.edges.len() as u64).to_le_bytes())?;
    for &(u, v) in &list.edges {
        out.write_all(&u.to_le_bytes())?;
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn adj(g: &CsrGraph) -> Vec<Vec<VertexId>> {
        (0..g.num_vertices() as VertexId)
            .map(|v| g.neighbors(v).to_vec())
            .collect()
    }

    #[test]
    fn symmetrize_single_edge() {
        let g = CsrGraph::from_edges(2, &[(0, 1)], true).unwrap();
        assert_eq!(adj(&g), vec![vec![1], vec![0]]);
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = CsrGraph::from_edges(2, &[(0, 1), (0, 1)], false).unwrap();
        assert_eq!(adj(&g), vec![vec![1], vec![]]);
    }

    #[test]
    fn path_degrees() {
        let g = CsrGraph::from_edges(3, &[(0, 1), (1, 2)], true).unwrap();
        let d: Vec<u64> = g.degrees().collect();
        assert_eq!(d, vec![1, 2, 1]);
        assert_eq!(g.degree(1).unwrap(), 2);
    }

    #[test]
    fn degree_edge_cases() {
        let star: Vec<_> = (1..=5).map(|l| (0, l)).collect();
        let g = CsrGraph::from_edges(7, &star, true).unwrap();
        assert_eq!(g.degree(0).unwrap(), 5);
        assert_eq!(g.degree(6).unwrap(), 0);
        assert!(matches!(g.degree(7), Err(Error::Range(_))));
    }

    #[test]
    fn self_loops_kept() {
        let g = CsrGraph::from_edges(2, &[(0, 0), (0, 1)], true).unwrap();
        assert_eq!(adj(&g), vec![vec![0, 1], vec![0]]);
    }

    #[test]
    fn text_ingest_compacts_and_comments() {
        let text = "# header\n10 20\n\n20 30 # trailing\n";
        let ing = ingest_text(text.as_bytes(), true).unwrap();
        assert_eq!(ing.source_ids, vec![10, 20, 30]);
        assert_eq!(adj(&ing.graph), vec![vec![1], vec![0, 2], vec![1]]);
    }

    #[test]
    fn text_ingest_errors() {
        match ingest_text("0 1\n2 x\n".as_bytes(), false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match ingest_text("0 1 2\n".as_bytes(), false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            ingest_text("0 4294967296\n".as_bytes(), false),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn binary_ingest() {
        let list = EdgeList {
            num_vertices: 3,
            edges: vec![(0, 1), (1, 2)],
            directed: true,
        };
        let mut buf = Vec::new();
        write_binary(&list, &mut buf).unwrap();
        let ing = ingest_binary(buf.as_slice(), false).unwrap();
        assert_eq!(adj(&ing.graph), vec![vec![1], vec![2], vec![]]);

        buf[0] = b'X';
        assert!(ingest_binary(buf.as_slice(), false).is_err());
        assert!(ingest_binary(&b"ACGE\x05\0\0\0\0\0\0\0"[..], false).is_err());
    }

    fn arb_graph() -> impl Strategy<Value = CsrGraph> {
        (1usize..40).prop_flat_map(|n| {
            let n32 = n as u32;
            (
                Just(n),
                prop::collection::vec((0..n32, 0..n32), 0..120),
                any::<bool>(),
            )
                .prop_map(|(n, e, s)| CsrGraph::from_edges(n, &e, s).unwrap())
        })
    }

    proptest! {
        #[test]
        fn csr_round_trip(g in arb_graph()) {
            let list = g.to_edge_list();
            let again = CsrGraph::from_edge_list(&list, false).unwrap();
            prop_assert_eq!(&again, &g);
            let sum: u64 = g.degrees().sum();
            prop_assert_eq!(sum as usize, g.num_edges());
        }

        #[test]
        fn symmetrized_is_symmetric(n in 1usize..30, e in prop::collection::vec((0u32..30, 0u32..30), 0..80)) {
            let e: Vec<_> = e.into_iter().map(|(a, b)| (a % n as u32, b % n as u32)).collect();
            let g = CsrGraph::from_edges(n, &e, true).unwrap();
            prop_assert!(g.is_symmetric());
            let loops = (0..n as u32).filter(|&v| g.neighbors(v).contains(&v)).count();
            prop_assert_eq!((g.num_edges() - loops) % 2, 0);
        }
    }
}

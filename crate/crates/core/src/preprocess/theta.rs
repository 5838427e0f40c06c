//! Degree-boundary table for mini vertices.
//!
//! Mini vertices take consecutive reordered ids in descending degree order,
//! so a table `theta[d]` holding the first id with degree `<= d` recovers both
//! the degree and the `mini.bin` offset of any mini vertex without storing
//! either.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThetaTable {
    bounds: Vec<u64>,
    end: u64,
}

impl ThetaTable {
    /// `end_id` is the exclusive end of the id space. It is stored apart from
    /// the bounds because `theta[0]` is the first degree-0 id, which differs
    /// from the end whenever isolated mini vertices exist.
    pub fn from_bounds(bounds: Vec<u64>, end_id: u64) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > 4 {
            return Err(Error::Format(format!(
                "theta table needs 1..=4 entries, got {}",
                bounds.len()
            )));
        }
        if bounds.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Format("theta table must be nonincreasing in degree".into()));
        }
        if bounds[0] > end_id {
            return Err(Error::Format(format!(
                "theta bound {} past end of id space {end_id}",
                bounds[0]
            )));
        }
        Ok(ThetaTable { bounds, end: end_id })
    }

    pub fn bounds(&self) -> &[u64] {
        &self.bounds
    }

    pub fn degree_threshold(&self) -> u32 {
        self.bounds.len() as u32 - 1
    }

    pub fn first_mini_id(&self) -> u64 {
        *self.bounds.last().unwrap()
    }

    /// Exclusive upper bound of the id space.
    pub fn end_id(&self) -> u64 {
        self.end
    }
}

/// `theta[d] = min { i : deg(v'_i) <= d }`, with `end_id` when no mini vertex
/// qualifies. `mini_degrees` lists degrees of ids `first_mini_id..` in order.
pub fn build_theta(mini_degrees: &[u64], first_mini_id: u64, degree_threshold: u32) -> Result<ThetaTable> {
    if let Some(i) = mini_degrees.windows(2).position(|w| w[0] < w[1]) {
        return Err(Error::Invariant(format!(
            "mini degrees not descending at position {i}"
        )));
    }
    if let Some(&d) = mini_degrees.iter().find(|&&d| d > degree_threshold as u64) {
        return Err(Error::Invariant(format!(
            "mini vertex of degree {d} above threshold {degree_threshold}"
        )));
    }
    let end = first_mini_id + mini_degrees.len() as u64;
    let bounds = (0..=degree_threshold as u64)
        .map(|d| {
            // First position whose degree is <= d.
            let pos = mini_degrees.partition_point(|&x| x > d);
            if pos == mini_degrees.len() {
                end
            } else {
                first_mini_id + pos as u64
            }
        })
        .collect();
    ThetaTable::from_bounds(bounds, end)
}

/// Degree and offset algebra over a [`ThetaTable`].
#[derive(Debug, Clone)]
pub struct MiniIndex {
    theta: ThetaTable,
    /// `prefix[d] = sum_{i=d+1}^{threshold} (theta[i-1] - theta[i]) * i`:
    /// edges held by mini vertices of degree above `d`.
    prefix: Vec<u64>,
}

impl MiniIndex {
    pub fn new(theta: ThetaTable) -> Self {
        let b = theta.bounds();
        let top = b.len() - 1;
        let mut prefix = vec![0u64; b.len()];
        for d in (0..top).rev() {
            let i = d + 1;
            prefix[d] = prefix[i] + (b[i - 1] - b[i]) * i as u64;
        }
        MiniIndex { theta, prefix }
    }

    pub fn theta(&self) -> &ThetaTable {
        &self.theta
    }

    pub fn prefix(&self) -> &[u64] {
        &self.prefix
    }

    pub fn is_mini(&self, id: u64) -> bool {
        id >= self.theta.first_mini_id() && id < self.theta.end_id()
    }

    /// `min { d : theta[d] <= id }`. Ids of degree `d` occupy
    /// `[theta[d], theta[d-1])`, so the smallest qualifying `d` is the degree;
    /// the largest would misreport any id past `theta[threshold]`.
    pub fn degree(&self, id: u64) -> Result<u64> {
        if !self.is_mini(id) {
            return Err(Error::Contract(format!("{id} is not a mini vertex id")));
        }
        let b = self.theta.bounds();
        Ok((0..b.len()).find(|&d| b[d] <= id).unwrap() as u64)
    }

    /// Edge offset of the vertex's list within `mini.bin`.
    pub fn offset(&self, id: u64) -> Result<u64> {
        let d = self.degree(id)?;
        Ok((id - self.theta.bounds()[d as usize]) * d + self.prefix[d as usize])
    }

    /// Total edges in the mini region.
    pub fn total_edges(&self) -> u64 {
        self.prefix[0]
    }
}

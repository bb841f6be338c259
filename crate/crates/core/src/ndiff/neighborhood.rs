use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Neighbor aggregation function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Mean,
    Sum,
    Max,
}

impl Aggregator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Aggregator::Mean => "mean",
            Aggregator::Sum => "sum",
            Aggregator::Max => "max",
        }
    }
}

/// Sorted, de-duplicated adjacency lists without self-loops.
#[derive(Debug)]
pub struct Neighborhood {
    neighbors: Vec<Vec<usize>>,
    warned_isolated: AtomicBool,
}

impl Neighborhood {
    pub fn from_lists(mut neighbors: Vec<Vec<usize>>) -> Arc<Self> {
        for (i, list) in neighbors.iter_mut().enumerate() {
            list.retain(|&j| j != i);
            list.sort_unstable();
            list.dedup();
        }
        Arc::new(Self {
            neighbors,
            warned_isolated: AtomicBool::new(false),
        })
    }

    /// Undirected edges; each pair is added in both directions.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Arc<Self> {
        let mut lists = vec![Vec::new(); n];
        for (a, b) in edges {
            lists[a].push(b);
            lists[b].push(a);
        }
        Self::from_lists(lists)
    }

    /// Graph with no edges.
    pub fn empty(n: usize) -> Arc<Self> {
        Self::from_lists(vec![Vec::new(); n])
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn isolated(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.neighbors[v].is_empty()).collect()
    }

    /// Logs isolated nodes the first time it is called for this graph.
    pub(crate) fn warn_isolated_once(&self, agg: Aggregator) {
        if self.warned_isolated.swap(true, Ordering::Relaxed) {
            return;
        }
        let iso = self.isolated();
        if !iso.is_empty() {
            log::warn!(
                "{} isolated node(s) {:?}: {} aggregation yields a zero neighbor vector",
                iso.len(),
                iso,
                agg.as_str()
            );
        }
    }
}

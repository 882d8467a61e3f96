//! Bernoulli packet loss on directed edges.
//!
//! Losses are pre-drawable: whether the packet `i -> j` of round `k` is lost
//! is a pure function of `(seed, k, i, j)`. A simulation can therefore be
//! replayed bit for bit regardless of how rounds or nodes are scheduled.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed;

/// Loss probability per directed edge.
#[derive(Debug, Clone, PartialEq)]
pub struct LossModel {
    p: BTreeMap<(usize, usize), f64>,
}

impl LossModel {
    /// The same loss probability on every directed edge of `graph`.
    pub fn uniform(graph: &Graph, p: f64) -> Result<Self> {
        check_probability(p)?;
        Ok(Self { p: graph.directed_edges().map(|e| (e, p)).collect() })
    }

    /// Explicit per-edge probabilities. Directed edges of `graph` missing from
    /// `table` get `default`; entries that are not edges are rejected.
    pub fn per_edge(graph: &Graph, table: &BTreeMap<(usize, usize), f64>, default: f64) -> Result<Self> {
        check_probability(default)?;
        for (&(i, j), &p) in table {
            if !graph.has_edge(i, j) {
                return Err(Error::InvalidGraph(format!("loss table entry {i}->{j} is not an edge")));
            }
            check_probability(p)?;
        }
        Ok(Self { p: graph.directed_edges().map(|e| (e, table.get(&e).copied().unwrap_or(default))).collect() })
    }

    pub fn probability(&self, from: usize, to: usize) -> Option<f64> {
        self.p.get(&(from, to)).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.p.iter().map(|(e, p)| (*e, *p))
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("loss probability {p} not in [0, 1]")));
    }
    Ok(())
}

/// Outcome of one round: `true` means delivered (`L = 0`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryMask {
    delivered: BTreeMap<(usize, usize), bool>,
}

impl DeliveryMask {
    pub fn all_delivered(graph: &Graph) -> Self {
        Self { delivered: graph.directed_edges().map(|e| (e, true)).collect() }
    }

    pub fn none_delivered(graph: &Graph) -> Self {
        Self { delivered: graph.directed_edges().map(|e| (e, false)).collect() }
    }

    pub fn from_map(delivered: BTreeMap<(usize, usize), bool>) -> Self {
        Self { delivered }
    }

    pub fn is_delivered(&self, from: usize, to: usize) -> Option<bool> {
        self.delivered.get(&(from, to)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), bool)> + '_ {
        self.delivered.iter().map(|(e, d)| (*e, *d))
    }

    /// True iff the mask has an entry for exactly the directed edges of `graph`.
    pub fn covers(&self, graph: &Graph) -> bool {
        self.delivered.len() == 2 * graph.edge_count()
            && graph.directed_edges().all(|e| self.delivered.contains_key(&e))
    }
}

/// A loss model plus the seed that fixes every round's realization.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSchedule {
    model: LossModel,
    seed: u64,
}

impl LossSchedule {
    pub fn new(model: LossModel, seed: u64) -> Self {
        Self { model, seed }
    }

    /// No packet is ever lost.
    pub fn lossless(graph: &Graph) -> Self {
        Self::new(LossModel::uniform(graph, 0.0).expect("0 is a probability"), 0)
    }

    pub fn model(&self) -> &LossModel {
        &self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_lossless(&self) -> bool {
        self.model.p.values().all(|&p| p == 0.0)
    }

    /// Whether `from -> to` is lost in round `k`.
    pub fn is_lost(&self, k: u64, from: usize, to: usize) -> bool {
        match self.model.probability(from, to) {
            Some(p) => seed::counter_uniform(self.seed, &[k, from as u64, to as u64]) < p,
            None => false,
        }
    }

    /// Realization of round `k`. Independent across rounds and directed edges.
    pub fn sample_mask(&self, k: u64) -> DeliveryMask {
        DeliveryMask { delivered: self.model.p.keys().map(|&(i, j)| ((i, j), !self.is_lost(k, i, j))).collect() }
    }
}

//! Node-local partition-based R-ADMM.
//!
//! Node `i` stores its own variable `x_i^(i)`, a copy `x_j^(i)` of every
//! neighbor variable and, per neighbor `j`, the two auxiliary vectors
//! `z_i^(j,i)` and `z_j^(j,i)`: `3|N_i| + 1` vectors in total. A round is
//!
//! 1. x-update: minimize the local cost plus the linear and quadratic terms
//!    built from the stored `z`;
//! 2. every node sends `q_i^(i->j) = -z_i^(j,i) + 2 rho x_i^(i)` and
//!    `q_j^(i->j) = -z_j^(j,i) + 2 rho x_j^(i)` to each neighbor `j`;
//! 3. on reception from `j`, `z <- (1 - alpha) z + alpha q`; a lost packet
//!    leaves both `z` vectors of that neighbor unchanged.
//!
//! The three phases are separated by barriers: all x-updates read round-`k`
//! auxiliaries, all messages are built from the new `x` and the round-`k`
//! auxiliaries, and only then are the auxiliaries overwritten.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiments::{relative_error, RunTrace};
use crate::lossy::{DeliveryMask, LossSchedule};
use crate::problem::{LocalCost, LocalSolver, PartitionProblem, Solution};

/// Any state vector with a larger norm marks a run as divergent.
pub const DIVERGENCE_NORM: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgorithmParams {
    pub alpha: f64,
    pub rho: f64,
}

impl AlgorithmParams {
    /// `rho` must be positive. Any finite `alpha` is accepted so that
    /// stability sweeps can probe outside `(0, 1)`; see [`Self::is_guaranteed`].
    pub fn new(alpha: f64, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho must be positive and finite, got {rho}")));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be finite, got {alpha}")));
        }
        Ok(Self { alpha, rho })
    }

    /// Inside the region `0 < alpha < 1, rho > 0` where convergence is proven,
    /// with or without packet loss.
    pub fn is_guaranteed(&self) -> bool {
        self.alpha > 0.0 && self.alpha < 1.0 && self.rho > 0.0
    }
}

/// Everything node `i` keeps between rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub id: usize,
    /// `x_i^(i)`
    pub x_self: DVector<f64>,
    /// `x_j^(i)` for each neighbor `j`
    pub x_neigh: BTreeMap<usize, DVector<f64>>,
    /// `z_i^(j,i)` for each neighbor `j`
    pub z_in_self: BTreeMap<usize, DVector<f64>>,
    /// `z_j^(j,i)` for each neighbor `j`
    pub z_in_neigh: BTreeMap<usize, DVector<f64>>,
}

impl NodeState {
    pub fn zeros(id: usize, neighbors: &[usize], n: usize) -> Self {
        let zero_map = || neighbors.iter().map(|&j| (j, DVector::zeros(n))).collect::<BTreeMap<_, _>>();
        Self { id, x_self: DVector::zeros(n), x_neigh: zero_map(), z_in_self: zero_map(), z_in_neigh: zero_map() }
    }

    pub fn neighbors(&self) -> impl Iterator<Item = usize> + '_ {
        self.x_neigh.keys().copied()
    }

    pub fn degree(&self) -> usize {
        self.x_neigh.len()
    }

    pub fn dim(&self) -> usize {
        self.x_self.len()
    }

    /// Number of vectors held: `3|N_i| + 1`.
    pub fn stored_vector_count(&self) -> usize {
        1 + self.x_neigh.len() + self.z_in_self.len() + self.z_in_neigh.len()
    }

    /// `[x_i^(i); x_j^(i) for j ascending]`.
    pub fn stacked_x(&self) -> DVector<f64> {
        let n = self.dim();
        let mut out = DVector::zeros(n * (self.degree() + 1));
        out.rows_mut(0, n).copy_from(&self.x_self);
        for (b, v) in self.x_neigh.values().enumerate() {
            out.rows_mut((b + 1) * n, n).copy_from(v);
        }
        out
    }

    fn check_consistent(&self, neighbors: &[usize], n: usize) -> Result<()> {
        let keys_ok = |m: &BTreeMap<usize, DVector<f64>>| m.keys().copied().eq(neighbors.iter().copied());
        if !(keys_ok(&self.x_neigh) && keys_ok(&self.z_in_self) && keys_ok(&self.z_in_neigh)) {
            return Err(Error::InvalidGraph(format!("state of node {} does not match its neighbor set", self.id)));
        }
        let lens_ok = std::iter::once(&self.x_self)
            .chain(self.x_neigh.values())
            .chain(self.z_in_self.values())
            .chain(self.z_in_neigh.values())
            .all(|v| v.len() == n);
        if !lens_ok {
            return Err(Error::DimensionMismatch(format!("state of node {} has vectors of the wrong length", self.id)));
        }
        Ok(())
    }

    fn max_norm(&self) -> f64 {
        std::iter::once(&self.x_self)
            .chain(self.x_neigh.values())
            .chain(self.z_in_self.values())
            .chain(self.z_in_neigh.values())
            .map(|v| v.norm())
            .fold(0.0, |acc, v| if v.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(v) })
    }
}

/// The packet node `from` sends to neighbor `to` after its x-update.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub from: usize,
    pub to: usize,
    /// `q_from^(from->to)`
    pub q_about_sender: DVector<f64>,
    /// `q_to^(from->to)`
    pub q_about_receiver: DVector<f64>,
}

fn block_weights(degree: usize, rho: f64) -> Vec<f64> {
    let mut w = vec![rho; degree + 1];
    w[0] = rho * degree as f64;
    w
}

fn linear_term(state: &NodeState) -> DVector<f64> {
    let n = state.dim();
    let mut lin = DVector::zeros(n * (state.degree() + 1));
    {
        let mut head = lin.rows_mut(0, n);
        for z in state.z_in_self.values() {
            head += z;
        }
    }
    for (b, z) in state.z_in_neigh.values().enumerate() {
        lin.rows_mut((b + 1) * n, n).copy_from(z);
    }
    lin
}

fn x_update_with<S: LocalSolver>(solver: &S, state: &NodeState) -> (DVector<f64>, BTreeMap<usize, DVector<f64>>) {
    let n = state.dim();
    let v = solver.argmin(&linear_term(state));
    let x_self = v.rows(0, n).into_owned();
    let x_neigh = state.neighbors().enumerate().map(|(b, j)| (j, v.rows((b + 1) * n, n).into_owned())).collect();
    (x_self, x_neigh)
}

/// Minimizes `f_i(x^(i)) - (sum_j z_i^(j,i)).x_i^(i) - sum_j z_j^(j,i).x_j^(i)
/// + rho/2 |N_i| |x_i^(i)|^2 + rho/2 sum_j |x_j^(i)|^2`.
pub fn local_x_update<C: LocalCost>(
    cost: &C,
    state: &NodeState,
    params: &AlgorithmParams,
) -> Result<(DVector<f64>, BTreeMap<usize, DVector<f64>>)> {
    let nbrs = cost.neighbor_ids();
    state.check_consistent(&nbrs, cost.dim())?;
    let solver = cost.penalized_solver(&block_weights(nbrs.len(), params.rho))?;
    Ok(x_update_with(&solver, state))
}

/// One message per neighbor, in ascending neighbor order.
pub fn compute_messages(state: &NodeState, params: &AlgorithmParams) -> Vec<Message> {
    let two_rho = 2.0 * params.rho;
    state
        .neighbors()
        .map(|j| Message {
            from: state.id,
            to: j,
            q_about_sender: &state.x_self * two_rho - &state.z_in_self[&j],
            q_about_receiver: &state.x_neigh[&j] * two_rho - &state.z_in_neigh[&j],
        })
        .collect()
}

/// Relaxed z-update at the receiver, gated by delivery. A lost message is
/// the identity on `state`.
pub fn apply_message(state: &mut NodeState, m: &Message, params: &AlgorithmParams, delivered: bool) -> Result<()> {
    if m.to != state.id || !state.z_in_self.contains_key(&m.from) {
        return Err(Error::TopologyMismatch { from: m.from, to: m.to, node: state.id });
    }
    let n = state.dim();
    if m.q_about_sender.len() != n || m.q_about_receiver.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "message {}->{} carries vectors of the wrong length",
            m.from, m.to
        )));
    }
    if !delivered {
        return Ok(());
    }
    let a = params.alpha;
    let z_self = state.z_in_self.get_mut(&m.from).expect("checked above");
    *z_self = &*z_self * (1.0 - a) + &m.q_about_receiver * a;
    let z_neigh = state.z_in_neigh.get_mut(&m.from).expect("keys validated");
    *z_neigh = &*z_neigh * (1.0 - a) + &m.q_about_sender * a;
    Ok(())
}

/// Stopping rule: stop once the last `window` relative errors are below `tol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub tol: f64,
    pub window: usize,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions<'a> {
    /// Initial states; all-zero `x` and `z` when absent.
    pub init: Option<Vec<NodeState>>,
    /// Optimum used to record the relative error each round.
    pub reference: Option<&'a Solution>,
    /// Keep a copy of every node state after every round.
    pub record_states: bool,
    /// Early termination; needs `reference`.
    pub stop: Option<StopRule>,
}

/// Runs the algorithm on a fixed problem with the local solvers prepared once.
pub struct DistributedSolver<'p, C: LocalCost> {
    problem: &'p PartitionProblem<C>,
    params: AlgorithmParams,
    solvers: Vec<C::Solver>,
    parallel: bool,
}

impl<'p, C: LocalCost> DistributedSolver<'p, C> {
    pub fn new(problem: &'p PartitionProblem<C>, params: AlgorithmParams) -> Result<Self> {
        let graph = problem.graph();
        let solvers = problem
            .costs()
            .iter()
            .enumerate()
            .map(|(i, c)| c.penalized_solver(&block_weights(graph.degree(i)?, params.rho)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { problem, params, solvers, parallel: false })
    }

    /// Run per-node phases on the rayon pool. Results are bitwise identical
    /// to the sequential path.
    pub fn parallel(mut self, yes: bool) -> Self {
        self.parallel = yes;
        self
    }

    pub fn params(&self) -> &AlgorithmParams {
        &self.params
    }

    pub fn problem(&self) -> &PartitionProblem<C> {
        self.problem
    }

    pub fn initial_states(&self) -> Vec<NodeState> {
        let g = self.problem.graph();
        (0..g.node_count()).map(|i| NodeState::zeros(i, g.neighbors(i).unwrap(), self.problem.dim())).collect()
    }

    fn check_states(&self, states: &[NodeState]) -> Result<()> {
        let g = self.problem.graph();
        if states.len() != g.node_count() {
            return Err(Error::DimensionMismatch(format!("{} states for {} nodes", states.len(), g.node_count())));
        }
        for (i, s) in states.iter().enumerate() {
            if s.id != i {
                return Err(Error::InvalidParameter(format!("state at position {i} belongs to node {}", s.id)));
            }
            s.check_consistent(g.neighbors(i)?, self.problem.dim())?;
        }
        Ok(())
    }

    fn map_nodes<T, F>(&self, states: &[NodeState], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&NodeState) -> T + Sync + Send,
    {
        if self.parallel {
            states.par_iter().map(f).collect()
        } else {
            states.iter().map(f).collect()
        }
    }

    /// One synchronous round: all x-updates, then all messages, then the
    /// z-updates gated by `mask`.
    pub fn sync_round(&self, states: &[NodeState], mask: &DeliveryMask) -> Result<Vec<NodeState>> {
        self.check_states(states)?;
        if !mask.covers(self.problem.graph()) {
            return Err(Error::InvalidGraph("delivery mask does not cover the directed edges".into()));
        }
        Ok(self.round_unchecked(states, mask))
    }

    fn round_unchecked(&self, states: &[NodeState], mask: &DeliveryMask) -> Vec<NodeState> {
        // phase 1: x-update from round-k z
        let mut next: Vec<NodeState> = self.map_nodes(states, |s| {
            let (x_self, x_neigh) = x_update_with(&self.solvers[s.id], s);
            NodeState { x_self, x_neigh, ..s.clone() }
        });
        // phase 2: messages from new x and round-k z
        let outbox: Vec<Vec<Message>> = self.map_nodes(&next, |s| compute_messages(s, &self.params));
        let mut inbox: Vec<Vec<&Message>> = vec![Vec::new(); next.len()];
        for m in outbox.iter().flatten() {
            inbox[m.to].push(m);
        }
        // phase 3: gated z-update
        let apply = |(s, msgs): (&mut NodeState, &Vec<&Message>)| {
            for m in msgs {
                let delivered = mask.is_delivered(m.from, m.to).expect("mask covers the graph");
                apply_message(s, m, &self.params, delivered).expect("messages follow the topology");
            }
        };
        if self.parallel {
            next.par_iter_mut().zip(inbox.par_iter()).for_each(apply);
        } else {
            next.iter_mut().zip(inbox.iter()).for_each(apply);
        }
        next
    }

    /// Iterates [`Self::sync_round`] up to `k_max` times with the masks of
    /// `schedule`. Round `k` uses mask `k`. A non-finite value or a state norm
    /// above [`DIVERGENCE_NORM`] ends the run with `diverged` set.
    pub fn run(&self, schedule: &LossSchedule, k_max: usize, options: RunOptions<'_>) -> Result<RunTrace> {
        if k_max == 0 {
            return Err(Error::InvalidParameter("k_max must be at least 1".into()));
        }
        if options.stop.is_some() && options.reference.is_none() {
            return Err(Error::InvalidParameter("a stopping rule needs a reference solution".into()));
        }
        let mut states = match options.init {
            Some(init) => {
                self.check_states(&init)?;
                init
            }
            None => self.initial_states(),
        };
        let graph = self.problem.graph();
        let lossless = DeliveryMask::all_delivered(graph);
        let mut trace = RunTrace::default();
        let mut below = 0usize;
        for k in 0..k_max {
            states = if schedule.is_lossless() {
                self.round_unchecked(&states, &lossless)
            } else {
                let mask = schedule.sample_mask(k as u64);
                if !mask.covers(graph) {
                    return Err(Error::InvalidGraph("loss schedule was built for another graph".into()));
                }
                self.round_unchecked(&states, &mask)
            };
            trace.rounds_executed += 1;
            let norm = states.iter().map(NodeState::max_norm).fold(0.0, f64::max);
            let diverged = !(norm <= DIVERGENCE_NORM) || states.iter().any(|s| s.max_norm().is_nan());
            if let Some(sol) = options.reference {
                let err = if diverged { f64::INFINITY } else { relative_error(&states, sol)? };
                trace.errors.push(err);
                if let Some(rule) = options.stop {
                    below = if err < rule.tol { below + 1 } else { 0 };
                }
            }
            if options.record_states {
                trace.states.push(states.clone());
            }
            if diverged {
                trace.diverged = true;
                break;
            }
            if let Some(rule) = options.stop {
                if below >= rule.window.max(1) {
                    break;
                }
            }
        }
        trace.final_states = states;
        Ok(trace)
    }
}

/// Convenience wrapper preparing the local solvers for a single round.
pub fn sync_round<C: LocalCost>(
    states: &[NodeState],
    problem: &PartitionProblem<C>,
    params: &AlgorithmParams,
    mask: &DeliveryMask,
) -> Result<Vec<NodeState>> {
    DistributedSolver::new(problem, *params)?.sync_round(states, mask)
}

pub fn run<C: LocalCost>(
    problem: &PartitionProblem<C>,
    params: &AlgorithmParams,
    schedule: &LossSchedule,
    k_max: usize,
    options: RunOptions<'_>,
) -> Result<RunTrace> {
    DistributedSolver::new(problem, *params)?.run(schedule, k_max, options)
}

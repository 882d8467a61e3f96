//! Centralized stacked-vector R-ADMM used as an oracle for the distributed
//! algorithm.
//!
//! Stacked layouts:
//!
//! * `x`: node blocks in node order, node `i` holding `[x_i^(i); x_j^(i)]`
//!   with neighbors ascending.
//! * `y`, `w`, `z`: node blocks in node order; inside node `i`, one pair per
//!   neighbor `j` (ascending), the pair ordered as (own variable
//!   `y_i^(i,j)`, neighbor variable `y_j^(i,j)`).
//!
//! The constraint `A x + y = 0` pins every slot to minus one local copy and
//! `P` swaps `y_i^(i,j)` with `y_i^(j,i)`. From `z` the four iterates are
//!
//! ```text
//! y = (I + P) z / (2 rho)
//! w = (I - P) z / 2
//! x = argmin f(x) + (P z)^T A x + rho/2 |A x|^2
//! z+ = (1 - alpha) z - alpha P z - 2 alpha rho A x
//! ```

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::lossy::DeliveryMask;
use crate::problem::{PartitionProblem, QuadraticLocalCost};
use crate::radmm::{AlgorithmParams, DistributedSolver, NodeState};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotPart {
    /// `y_i^(i,j)`: the owner's own variable.
    Own,
    /// `y_j^(i,j)`: the owner's copy of the neighbor variable.
    Neighbor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrices {
    pub a: DMatrix<f64>,
    pub p: DMatrix<f64>,
    n: usize,
    neighbors: Vec<Vec<usize>>,
    x_offsets: Vec<usize>,
    y_offsets: Vec<usize>,
}

impl ConstraintMatrices {
    pub fn build(graph: &Graph, n: usize) -> Self {
        let neighbors: Vec<Vec<usize>> =
            (0..graph.node_count()).map(|i| graph.neighbors(i).unwrap().to_vec()).collect();
        let mut x_offsets = Vec::with_capacity(neighbors.len());
        let mut y_offsets = Vec::with_capacity(neighbors.len());
        let (mut xo, mut yo) = (0, 0);
        for nb in &neighbors {
            x_offsets.push(xo);
            y_offsets.push(yo);
            xo += n * (nb.len() + 1);
            yo += 2 * n * nb.len();
        }
        let mut cm = Self { a: DMatrix::zeros(yo, xo), p: DMatrix::zeros(yo, yo), n, neighbors, x_offsets, y_offsets };

        for i in 0..cm.neighbors.len() {
            for (b, &j) in cm.neighbors[i].iter().enumerate() {
                let own = cm.y_offsets[i] + 2 * b * n;
                let other = own + n;
                let x_self = cm.x_offsets[i];
                let x_copy = cm.x_offsets[i] + (b + 1) * n;
                // y_i^(i,j) <-> y_i^(j,i), which node j holds as its neighbor slot for i
                let partner = cm.slot(j, i, SlotPart::Neighbor).expect("edges are symmetric");
                for k in 0..n {
                    cm.a[(own + k, x_self + k)] = -1.0;
                    cm.a[(other + k, x_copy + k)] = -1.0;
                    cm.p[(own + k, partner + k)] = 1.0;
                    cm.p[(partner + k, own + k)] = 1.0;
                }
            }
        }
        cm
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn x_len(&self) -> usize {
        self.a.ncols()
    }

    pub fn y_len(&self) -> usize {
        self.a.nrows()
    }

    /// First index of the `(i, j, part)` slot in the stacked `y`/`z` vector.
    pub fn slot(&self, i: usize, j: usize, part: SlotPart) -> Option<usize> {
        let b = self.neighbors.get(i)?.binary_search(&j).ok()?;
        let base = self.y_offsets[i] + 2 * b * self.n;
        Some(match part {
            SlotPart::Own => base,
            SlotPart::Neighbor => base + self.n,
        })
    }

    /// Start of node `i`'s block in the stacked `x`.
    pub fn x_offset(&self, i: usize) -> usize {
        self.x_offsets[i]
    }

    /// Applies `P` without a matrix product.
    pub fn permute(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for (col, row) in self.permutation_pairs() {
            out[row] = v[col];
        }
        out
    }

    fn permutation_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.p.ncols()).map(move |c| (c, (0..self.p.nrows()).find(|&r| self.p[(r, c)] == 1.0).unwrap()))
    }

    /// Node-local auxiliaries read from a stacked `z`: node `i` gets
    /// `z_i^(j,i)` from the neighbor slot of `(j, i)` and `z_j^(j,i)` from its
    /// own slot.
    pub fn scatter_z(&self, z: &DVector<f64>) -> Vec<NodeState> {
        let n = self.n;
        self.neighbors
            .iter()
            .enumerate()
            .map(|(i, nbrs)| {
                let mut s = NodeState::zeros(i, nbrs, n);
                for &j in nbrs {
                    let zi = self.slot(j, i, SlotPart::Neighbor).unwrap();
                    let zj = self.slot(j, i, SlotPart::Own).unwrap();
                    s.z_in_self.insert(j, z.rows(zi, n).into_owned());
                    s.z_in_neigh.insert(j, z.rows(zj, n).into_owned());
                }
                s
            })
            .collect()
    }

    /// Inverse of [`Self::scatter_z`].
    pub fn gather_z(&self, states: &[NodeState]) -> DVector<f64> {
        let n = self.n;
        let mut z = DVector::zeros(self.y_len());
        for s in states {
            for (j, v) in &s.z_in_self {
                z.rows_mut(self.slot(*j, s.id, SlotPart::Neighbor).unwrap(), n).copy_from(v);
            }
            for (j, v) in &s.z_in_neigh {
                z.rows_mut(self.slot(*j, s.id, SlotPart::Own).unwrap(), n).copy_from(v);
            }
        }
        z
    }
}

pub fn build_constraint_matrices(graph: &Graph, n: usize) -> ConstraintMatrices {
    ConstraintMatrices::build(graph, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceState {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub w: DVector<f64>,
    pub z: DVector<f64>,
}

/// The stacked algorithm with the x-system factorized once.
pub struct ReferenceSolver<'p> {
    problem: &'p PartitionProblem<QuadraticLocalCost>,
    cm: ConstraintMatrices,
    params: AlgorithmParams,
    factor: Cholesky<f64, Dyn>,
    offset: DVector<f64>,
}

impl<'p> ReferenceSolver<'p> {
    pub fn new(problem: &'p PartitionProblem<QuadraticLocalCost>, params: AlgorithmParams) -> Result<Self> {
        let cm = ConstraintMatrices::build(problem.graph(), problem.dim());
        let len = cm.x_len();
        // block-diagonal Hessian of f over the stacked local copies
        let mut hessian = DMatrix::zeros(len, len);
        let mut offset = DVector::zeros(len);
        for (i, c) in problem.costs().iter().enumerate() {
            let o = cm.x_offset(i);
            let m = c.stacked_hessian().nrows();
            hessian.view_mut((o, o), (m, m)).copy_from(c.stacked_hessian());
            offset.rows_mut(o, m).copy_from(c.stacked_linear());
        }
        let system = hessian + cm.a.tr_mul(&cm.a) * params.rho;
        let factor = Cholesky::new(system)
            .ok_or_else(|| Error::NotPositiveDefinite("stacked x-update system is singular".into()))?;
        Ok(Self { problem, cm, params, factor, offset })
    }

    pub fn constraints(&self) -> &ConstraintMatrices {
        &self.cm
    }

    /// `y`, `w` and `x` determined by `z`.
    pub fn state_from_z(&self, z: DVector<f64>) -> ReferenceState {
        let rho = self.params.rho;
        let pz = &self.cm.p * &z;
        let y = (&z + &pz) / (2.0 * rho);
        let w = (&z - &pz) / 2.0;
        let x = self.factor.solve(&(&self.offset - self.cm.a.tr_mul(&pz)));
        ReferenceState { x, y, w, z }
    }

    /// Advances `z` and recomputes the other iterates.
    pub fn step(&self, state: &ReferenceState) -> ReferenceState {
        let a = self.params.alpha;
        let pz = &self.cm.p * &state.z;
        let ax = &self.cm.a * &state.x;
        let z = &state.z * (1.0 - a) - pz * a - ax * (2.0 * a * self.params.rho);
        self.state_from_z(z)
    }

    pub fn problem(&self) -> &PartitionProblem<QuadraticLocalCost> {
        self.problem
    }
}

/// One reference iteration from a consistent state.
pub fn reference_step(
    state: &ReferenceState,
    problem: &PartitionProblem<QuadraticLocalCost>,
    cm: &ConstraintMatrices,
    params: &AlgorithmParams,
) -> Result<ReferenceState> {
    let solver = ReferenceSolver::new(problem, *params)?;
    if solver.cm != *cm {
        return Err(Error::InvalidGraph("constraint matrices were built for another problem".into()));
    }
    Ok(solver.step(state))
}

/// Runs the reference and the distributed algorithm side by side for `k_max`
/// loss-free rounds from a shared random `z(0)` and returns the largest
/// absolute difference between their `x` iterates.
pub fn check_equivalence(
    problem: &PartitionProblem<QuadraticLocalCost>,
    params: &AlgorithmParams,
    k_max: usize,
    seed: u64,
) -> Result<f64> {
    let reference = ReferenceSolver::new(problem, *params)?;
    let distributed = DistributedSolver::new(problem, *params)?;
    let cm = reference.constraints();
    let mut rng = seed::rng(seed);
    let z0 = DVector::from_iterator(cm.y_len(), (0..cm.y_len()).map(|_| rng.sample::<f64, _>(StandardNormal)));

    let mut states = cm.scatter_z(&z0);
    let mut ref_state = reference.state_from_z(z0);
    let all = DeliveryMask::all_delivered(problem.graph());
    let mut worst = 0.0f64;
    for k in 0..k_max {
        if k > 0 {
            ref_state = reference.step(&ref_state);
        }
        states = distributed.sync_round(&states, &all)?;
        for s in &states {
            let block = ref_state.x.rows(cm.x_offset(s.id), s.stacked_x().len());
            worst = worst.max((s.stacked_x() - block).amax());
        }
    }
    Ok(worst)
}

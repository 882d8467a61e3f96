//! Partition-based problems: local costs, random quadratic instances and the
//! centralized optimum.
//!
//! Node `i` sees the stacked vector `x^(i) = [x_i; x_j for j in N_i]` with
//! neighbors in ascending order. Every local cost is expressed on that
//! stacked vector.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{check_permutation, Graph};
use crate::seed;

pub const INSTANCE_SCHEMA: &str = "pbradmm-instance/1";

const GENERATION_ATTEMPTS: usize = 1000;

/// Minimizer of a local cost plus a separable proximal term.
pub trait LocalSolver: Send + Sync {
    /// Returns `argmin_v f(v) - linear.v + 1/2 sum_b w_b |v_b|^2` over the
    /// stacked local vector, for the block weights the solver was built with.
    fn argmin(&self, linear: &DVector<f64>) -> DVector<f64>;
}

/// A convex local cost `f_i(x_i, {x_j})` held by one node.
pub trait LocalCost: Send + Sync {
    type Solver: LocalSolver;

    /// Dimension `n` of every node variable.
    fn dim(&self) -> usize;

    /// Neighbors the cost depends on, ascending.
    fn neighbor_ids(&self) -> Vec<usize>;

    /// Evaluates the cost on the stacked vector `[x_self; x_j ascending]`.
    fn evaluate_stacked(&self, stacked: &DVector<f64>) -> Result<f64>;

    /// Prepares a solver for the penalized subproblem with one weight per
    /// `n`-block of the stacked vector (self block first).
    fn penalized_solver(&self, block_weights: &[f64]) -> Result<Self::Solver>;

    fn evaluate(&self, x_self: &DVector<f64>, x_neigh: &BTreeMap<usize, DVector<f64>>) -> Result<f64> {
        let n = self.dim();
        let ids = self.neighbor_ids();
        let mut stacked = DVector::zeros(n * (ids.len() + 1));
        check_len(x_self, n, "x_self")?;
        stacked.rows_mut(0, n).copy_from(x_self);
        for (b, j) in ids.iter().enumerate() {
            let v = x_neigh.get(j).ok_or(Error::MissingNeighbor(*j))?;
            check_len(v, n, "neighbor copy")?;
            stacked.rows_mut((b + 1) * n, n).copy_from(v);
        }
        self.evaluate_stacked(&stacked)
    }
}

fn check_len(v: &DVector<f64>, n: usize, what: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch(format!("{what} has length {}, expected {n}", v.len())));
    }
    Ok(())
}

/// `f_i = |A_self x_i + sum_j A_j x_j - b|^2_Q` with `Q` symmetric positive
/// definite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticLocalCost {
    a_self: DMatrix<f64>,
    a_neigh: BTreeMap<usize, DMatrix<f64>>,
    b: DVector<f64>,
    q: DMatrix<f64>,
    // 2 A^T Q A and 2 A^T Q b for the stacked A = [A_self, A_j ...]
    hessian: DMatrix<f64>,
    linear: DVector<f64>,
}

impl QuadraticLocalCost {
    pub fn new(
        a_self: DMatrix<f64>,
        a_neigh: BTreeMap<usize, DMatrix<f64>>,
        b: DVector<f64>,
        q: DMatrix<f64>,
    ) -> Result<Self> {
        let (r, n) = a_self.shape();
        if r == 0 || n == 0 {
            return Err(Error::DimensionMismatch("A_self must be nonempty".into()));
        }
        for (j, a) in &a_neigh {
            if a.shape() != (r, n) {
                return Err(Error::DimensionMismatch(format!(
                    "A_neigh[{j}] is {:?}, expected {:?}",
                    a.shape(),
                    (r, n)
                )));
            }
        }
        if b.len() != r {
            return Err(Error::DimensionMismatch(format!("b has length {}, expected {r}", b.len())));
        }
        if q.shape() != (r, r) {
            return Err(Error::DimensionMismatch(format!("Q is {:?}, expected {:?}", q.shape(), (r, r))));
        }
        let scale = q.amax().max(1.0);
        if (&q - q.transpose()).amax() > 1e-12 * scale {
            return Err(Error::NotPositiveDefinite("Q is not symmetric".into()));
        }
        if Cholesky::new(q.clone()).is_none() {
            return Err(Error::NotPositiveDefinite("Q".into()));
        }

        let mut stacked = DMatrix::zeros(r, n * (a_neigh.len() + 1));
        stacked.columns_mut(0, n).copy_from(&a_self);
        for (b_idx, a) in a_neigh.values().enumerate() {
            stacked.columns_mut((b_idx + 1) * n, n).copy_from(a);
        }
        let qa = &q * &stacked;
        let mut hessian = stacked.tr_mul(&qa) * 2.0;
        hessian = (&hessian + hessian.transpose()) * 0.5;
        let linear = qa.tr_mul(&b) * 2.0;
        Ok(Self { a_self, a_neigh, b, q, hessian, linear })
    }

    pub fn a_self(&self) -> &DMatrix<f64> {
        &self.a_self
    }

    pub fn a_neigh(&self) -> &BTreeMap<usize, DMatrix<f64>> {
        &self.a_neigh
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn rows(&self) -> usize {
        self.a_self.nrows()
    }

    /// Hessian `2 A^T Q A` of the cost on the stacked local vector.
    pub fn stacked_hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    /// `2 A^T Q b`: the cost gradient at zero is minus this.
    pub fn stacked_linear(&self) -> &DVector<f64> {
        &self.linear
    }

    /// `b^T Q b`, the cost at zero.
    pub fn constant(&self) -> f64 {
        self.b.dot(&(&self.q * &self.b))
    }

    fn residual(&self, stacked: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.dim();
        check_len(stacked, n * (self.a_neigh.len() + 1), "stacked vector")?;
        let mut res = &self.a_self * stacked.rows(0, n) - &self.b;
        for (b_idx, a) in self.a_neigh.values().enumerate() {
            res += a * stacked.rows((b_idx + 1) * n, n);
        }
        Ok(res)
    }

    fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let a_neigh = self.a_neigh.iter().map(|(j, a)| (perm[*j], a.clone())).collect();
        Self::new(self.a_self.clone(), a_neigh, self.b.clone(), self.q.clone())
    }
}

/// Cholesky-backed minimizer of the penalized quadratic subproblem.
#[derive(Debug, Clone)]
pub struct QuadraticSolver {
    factor: Cholesky<f64, Dyn>,
    offset: DVector<f64>,
}

impl LocalSolver for QuadraticSolver {
    fn argmin(&self, linear: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(&(&self.offset + linear))
    }
}

impl LocalCost for QuadraticLocalCost {
    type Solver = QuadraticSolver;

    fn dim(&self) -> usize {
        self.a_self.ncols()
    }

    fn neighbor_ids(&self) -> Vec<usize> {
        self.a_neigh.keys().copied().collect()
    }

    fn evaluate_stacked(&self, stacked: &DVector<f64>) -> Result<f64> {
        let res = self.residual(stacked)?;
        Ok(res.dot(&(&self.q * &res)))
    }

    fn penalized_solver(&self, block_weights: &[f64]) -> Result<QuadraticSolver> {
        let n = self.dim();
        let size = self.hessian.nrows();
        if block_weights.len() * n != size {
            return Err(Error::DimensionMismatch(format!(
                "{} block weights for a stacked vector of length {size}",
                block_weights.len()
            )));
        }
        let mut system = self.hessian.clone();
        for (b, w) in block_weights.iter().enumerate() {
            for k in 0..n {
                system[(b * n + k, b * n + k)] += w;
            }
        }
        let factor = Cholesky::new(system)
            .ok_or_else(|| Error::NotPositiveDefinite("local penalized subproblem is singular".into()))?;
        Ok(QuadraticSolver { factor, offset: self.linear.clone() })
    }
}

/// A graph together with one local cost per node.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionProblem<C = QuadraticLocalCost> {
    graph: Graph,
    costs: Vec<C>,
    dim: usize,
}

impl<C: LocalCost> PartitionProblem<C> {
    pub fn new(graph: Graph, costs: Vec<C>) -> Result<Self> {
        if costs.len() != graph.node_count() {
            return Err(Error::DimensionMismatch(format!("{} costs for {} nodes", costs.len(), graph.node_count())));
        }
        let dim = costs[0].dim();
        for (i, c) in costs.iter().enumerate() {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch(format!("node {i} has dimension {}, expected {dim}", c.dim())));
            }
            if c.neighbor_ids() != graph.neighbors(i)? {
                return Err(Error::InvalidGraph(format!("cost of node {i} does not match its neighbor set")));
            }
        }
        Ok(Self { graph, costs, dim })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn costs(&self) -> &[C] {
        &self.costs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    /// Gathers `[x_i; x_j for j in N_i]` from a global assignment.
    pub fn local_view(&self, i: usize, x: &[DVector<f64>]) -> Result<DVector<f64>> {
        let n = self.dim;
        let nbrs = self.graph.neighbors(i)?;
        let mut out = DVector::zeros(n * (nbrs.len() + 1));
        for (b, &node) in std::iter::once(&i).chain(nbrs).enumerate() {
            let v = &x[node];
            check_len(v, n, "x")?;
            out.rows_mut(b * n, n).copy_from(v);
        }
        Ok(out)
    }

    /// `sum_i f_i(x_i, {x_j})` for a global assignment `x`.
    pub fn global_cost(&self, x: &[DVector<f64>]) -> Result<f64> {
        self.check_assignment(x)?;
        let mut total = 0.0;
        for (i, c) in self.costs.iter().enumerate() {
            total += c.evaluate_stacked(&self.local_view(i, x)?)?;
        }
        Ok(total)
    }

    fn check_assignment(&self, x: &[DVector<f64>]) -> Result<()> {
        if x.len() != self.node_count() {
            return Err(Error::DimensionMismatch(format!("{} node vectors for {} nodes", x.len(), self.node_count())));
        }
        Ok(())
    }
}

/// Centralized optimum `x*` and `f(x*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x_star: Vec<DVector<f64>>,
    pub optimal_value: f64,
}

impl Solution {
    /// `x*_(i) = [x_i*; x_j* for j in N_i]`.
    pub fn local_block<C: LocalCost>(&self, p: &PartitionProblem<C>, i: usize) -> Result<DVector<f64>> {
        p.local_view(i, &self.x_star)
    }
}

impl PartitionProblem<QuadraticLocalCost> {
    /// Assembles the global quadratic `f(x) = x^T H x / 2 - g^T x + c` over
    /// the stacked node variables `[x_0; ...; x_{N-1}]`. Returns `(H, g, c)`.
    pub fn global_quadratic(&self) -> (DMatrix<f64>, DVector<f64>, f64) {
        let n = self.dim;
        let total = n * self.node_count();
        let mut h = DMatrix::zeros(total, total);
        let mut g = DVector::zeros(total);
        let mut c = 0.0;
        for (i, cost) in self.costs.iter().enumerate() {
            let nodes: Vec<usize> =
                std::iter::once(i).chain(self.graph.neighbors(i).unwrap().iter().copied()).collect();
            let hl = cost.stacked_hessian();
            let gl = cost.stacked_linear();
            for (a, &u) in nodes.iter().enumerate() {
                let mut gb = g.rows_mut(u * n, n);
                gb += gl.rows(a * n, n);
                for (b, &v) in nodes.iter().enumerate() {
                    let mut hb = h.view_mut((u * n, v * n), (n, n));
                    hb += hl.view((a * n, b * n), (n, n));
                }
            }
            c += cost.constant();
        }
        h = (&h + h.transpose()) * 0.5;
        (h, g, c)
    }

    /// Gradient of the global cost, accumulated node by node from
    /// `2 A_i^T Q_i (A_i x_(i) - b_i)`.
    pub fn global_gradient(&self, x: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        self.check_assignment(x)?;
        let n = self.dim;
        let mut grad = vec![DVector::zeros(n); self.node_count()];
        for (i, cost) in self.costs.iter().enumerate() {
            let res = cost.residual(&self.local_view(i, x)?)?;
            let w = (cost.q() * res) * 2.0;
            grad[i] += cost.a_self().tr_mul(&w);
            for (j, a) in cost.a_neigh() {
                grad[*j] += a.tr_mul(&w);
            }
        }
        Ok(grad)
    }

    /// Exact minimizer via a Cholesky factorization of the global Hessian.
    /// Fails instead of falling back to a pseudo-inverse when the optimum is
    /// not unique.
    pub fn solve_centralized(&self) -> Result<Solution> {
        let (h, g, _) = self.global_quadratic();
        let factor = Cholesky::new(h)
            .ok_or_else(|| Error::NotPositiveDefinite("global Hessian: optimizer is not unique".into()))?;
        let stacked = factor.solve(&g);
        let n = self.dim;
        let x_star: Vec<DVector<f64>> = (0..self.node_count()).map(|i| stacked.rows(i * n, n).into_owned()).collect();
        let optimal_value = self.global_cost(&x_star)?;
        Ok(Solution { x_star, optimal_value })
    }

    /// Smallest eigenvalue of the global Hessian.
    pub fn min_hessian_eigenvalue(&self) -> f64 {
        let (h, _, _) = self.global_quadratic();
        SymmetricEigen::new(h).eigenvalues.min()
    }

    /// Random instance on `graph`: `A_self` with singular values spread over
    /// `[1, conditioning]`, Gaussian coupling blocks scaled by
    /// `1/sqrt(r_rows n)`, Gaussian `b`, and `Q = M^T M + I`. Draws again
    /// with a fresh sub-seed if the global Hessian is not positive definite.
    pub fn generate(graph: &Graph, n: usize, r_rows: usize, seed: u64, conditioning: f64) -> Result<Self> {
        if n == 0 || r_rows == 0 {
            return Err(Error::InvalidParameter("dimensions must be positive".into()));
        }
        if !(conditioning >= 1.0) {
            return Err(Error::InvalidParameter(format!("conditioning must be >= 1, got {conditioning}")));
        }
        for attempt in 0..GENERATION_ATTEMPTS {
            let mut rng = seed::rng(seed::sub_seed(seed, attempt as u64));
            let costs = (0..graph.node_count())
                .map(|i| random_cost(&mut rng, graph.neighbors(i).unwrap(), n, r_rows, conditioning))
                .collect::<Result<Vec<_>>>()?;
            let p = Self::new(graph.clone(), costs)?;
            let (h, _, _) = p.global_quadratic();
            let eig = SymmetricEigen::new(h).eigenvalues;
            if eig.min() > 1e-10 * eig.amax().max(1.0) {
                return Ok(p);
            }
        }
        Err(Error::ResampleCapExceeded {
            what: "instance with positive definite Hessian",
            attempts: GENERATION_ATTEMPTS,
        })
    }

    /// Renames node `i` to `perm[i]` throughout.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.node_count())?;
        let graph = self.graph.relabel(perm)?;
        let mut slots: Vec<Option<QuadraticLocalCost>> = vec![None; self.node_count()];
        for (i, c) in self.costs.iter().enumerate() {
            slots[perm[i]] = Some(c.relabeled(perm)?);
        }
        Self::new(graph, slots.into_iter().map(Option::unwrap).collect())
    }

    pub fn to_json(&self) -> String {
        let doc = InstanceDoc {
            schema: INSTANCE_SCHEMA.into(),
            dim: self.dim,
            graph: GraphDoc {
                node_count: self.node_count(),
                edges: self.graph.edges().map(|(i, j)| [i, j]).collect(),
                positions: self.graph.positions().map(<[_]>::to_vec),
            },
            nodes: self
                .costs
                .iter()
                .map(|c| NodeDoc {
                    a_self: MatrixDoc::from(c.a_self()),
                    a_neigh: c.a_neigh().iter().map(|(j, a)| NeighborDoc { j: *j, a: MatrixDoc::from(a) }).collect(),
                    b: c.b().iter().copied().collect(),
                    q: MatrixDoc::from(c.q()),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("instance serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_str(text)?;
        if doc.schema != INSTANCE_SCHEMA {
            return Err(Error::Parse(format!("unsupported instance schema `{}`", doc.schema)));
        }
        let edges: Vec<(usize, usize)> = doc.graph.edges.iter().map(|e| (e[0], e[1])).collect();
        let mut graph = Graph::from_edges(doc.graph.node_count, &edges)?;
        if let Some(pos) = doc.graph.positions {
            graph = graph.with_positions(pos)?;
        }
        let costs = doc
            .nodes
            .into_iter()
            .map(|node| {
                QuadraticLocalCost::new(
                    node.a_self.to_matrix()?,
                    node.a_neigh.into_iter().map(|nd| Ok((nd.j, nd.a.to_matrix()?))).collect::<Result<_>>()?,
                    DVector::from_vec(node.b),
                    node.q.to_matrix()?,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let p = Self::new(graph, costs)?;
        if p.dim != doc.dim {
            return Err(Error::DimensionMismatch(format!("declared dim {} but matrices have {}", doc.dim, p.dim)));
        }
        Ok(p)
    }
}

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    // row-major draw order, independent of nalgebra's storage layout
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

fn random_cost<R: Rng>(
    rng: &mut R,
    neighbors: &[usize],
    n: usize,
    r: usize,
    conditioning: f64,
) -> Result<QuadraticLocalCost> {
    let k = r.min(n);
    let u = gaussian_matrix(rng, r, k).qr().q();
    let v = gaussian_matrix(rng, n, k).qr().q();
    let mut s: Vec<f64> = (0..k).map(|_| rng.random_range(1.0..=conditioning)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    if k >= 2 {
        s[0] = conditioning;
        s[k - 1] = 1.0;
    }
    let a_self = &u * DMatrix::from_diagonal(&DVector::from_vec(s)) * v.transpose();

    let scale = 1.0 / ((r * n) as f64).sqrt();
    let a_neigh = neighbors.iter().map(|&j| (j, gaussian_matrix(rng, r, n) * scale)).collect();
    let b = DVector::from_iterator(r, (0..r).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let m = gaussian_matrix(rng, r, r);
    let mut q = m.tr_mul(&m) + DMatrix::identity(r, r);
    q = (&q + q.transpose()) * 0.5;
    QuadraticLocalCost::new(a_self, a_neigh, b, q)
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceDoc {
    schema: String,
    dim: usize,
    graph: GraphDoc,
    nodes: Vec<NodeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphDoc {
    node_count: usize,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    positions: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeDoc {
    a_self: MatrixDoc,
    a_neigh: Vec<NeighborDoc>,
    b: Vec<f64>,
    q: MatrixDoc,
}

#[derive(Debug, Serialize, Deserialize)]
struct NeighborDoc {
    j: usize,
    a: MatrixDoc,
}

/// Row-major matrix with explicit shape.
#[derive(Debug, Serialize, Deserialize)]
struct MatrixDoc {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixDoc {
    fn from(m: &DMatrix<f64>) -> Self {
        let data = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect();
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }
}

impl MatrixDoc {
    fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Parse(format!(
                "matrix declares {}x{} but has {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use proptest::prelude::*;
    use rand::Rng;

    fn identity_cost(b: DVector<f64>) -> QuadraticLocalCost {
        let r = b.len();
        QuadraticLocalCost::new(DMatrix::identity(r, r), BTreeMap::new(), b, DMatrix::identity(r, r)).unwrap()
    }

    fn small_instance(seed: u64) -> PartitionProblem {
        let g = Graph::random_geometric_connected(6, 0.6, seed, 10_000).unwrap();
        PartitionProblem::generate(&g, 2, 3, seed, 10.0).unwrap()
    }

    fn random_point(rng: &mut impl Rng, nodes: usize, n: usize) -> Vec<DVector<f64>> {
        (0..nodes).map(|_| DVector::from_iterator(n, (0..n).map(|_| rng.sample(StandardNormal)))).collect()
    }

    #[test]
    fn evaluate_trivial_cases() {
        let c = identity_cost(dvector![0.0, 0.0]);
        assert_eq!(c.evaluate(&dvector![0.0, 0.0], &BTreeMap::new()).unwrap(), 0.0);
        let c = identity_cost(dvector![1.0, 1.0]);
        assert_eq!(c.evaluate(&dvector![0.0, 0.0], &BTreeMap::new()).unwrap(), 2.0);
    }

    #[test]
    fn evaluate_matches_elementwise_quadratic_form() {
        let p = small_instance(11);
        let mut rng = seed::rng(5);
        let x = random_point(&mut rng, p.node_count(), 2);
        for (i, c) in p.costs().iter().enumerate() {
            // residual and v^T Q v by explicit loops
            let r = c.rows();
            let mut v = vec![0.0; r];
            for row in 0..r {
                let mut acc = -c.b()[row];
                for col in 0..2 {
                    acc += c.a_self()[(row, col)] * x[i][col];
                    for (j, a) in c.a_neigh() {
                        acc += a[(row, col)] * x[*j][col];
                    }
                }
                v[row] = acc;
            }
            let mut expected = 0.0;
            for a in 0..r {
                for b in 0..r {
                    expected += v[a] * c.q()[(a, b)] * v[b];
                }
            }
            let neigh: BTreeMap<_, _> = c.a_neigh().keys().map(|&j| (j, x[j].clone())).collect();
            let got = c.evaluate(&x[i], &neigh).unwrap();
            assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1.0), "{got} vs {expected}");
        }
    }

    #[test]
    fn evaluate_errors() {
        let p = small_instance(2);
        let c = p.costs().iter().find(|c| !c.a_neigh().is_empty()).unwrap();
        assert!(matches!(c.evaluate(&dvector![0.0, 0.0], &BTreeMap::new()), Err(Error::MissingNeighbor(_))));
        assert!(matches!(c.evaluate(&dvector![0.0], &BTreeMap::new()), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn rejects_bad_q() {
        let b = dvector![1.0, 2.0];
        let not_sym = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        assert!(QuadraticLocalCost::new(DMatrix::identity(2, 2), BTreeMap::new(), b.clone(), not_sym).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(QuadraticLocalCost::new(DMatrix::identity(2, 2), BTreeMap::new(), b, indefinite).is_err());
    }

    #[test]
    fn single_node_problem() {
        let g = Graph::edgeless(1).unwrap();
        let p = PartitionProblem::generate(&g, 2, 3, 1, 10.0).unwrap();
        assert!(p.costs()[0].a_neigh().is_empty());

        let b = dvector![0.5, -1.5, 2.0];
        let p = PartitionProblem::new(g, vec![identity_cost(b.clone())]).unwrap();
        let sol = p.solve_centralized().unwrap();
        assert!((&sol.x_star[0] - &b).amax() < 1e-14);
        assert!(sol.optimal_value.abs() < 1e-24);
    }

    #[test]
    fn generation_is_deterministic_and_well_posed() {
        let g = Graph::random_geometric_connected(10, 0.5, 3, 10_000).unwrap();
        let a = PartitionProblem::generate(&g, 2, 3, 77, 10.0).unwrap();
        let b = PartitionProblem::generate(&g, 2, 3, 77, 10.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, PartitionProblem::generate(&g, 2, 3, 78, 10.0).unwrap());
        assert!(a.min_hessian_eigenvalue() > 0.0);
        for c in a.costs() {
            let sv = c.a_self().clone().singular_values();
            assert!((sv.max() - 10.0).abs() < 1e-9 && (sv.min() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_pair_has_symmetric_optimum() {
        let g = Graph::path(2).unwrap();
        let a_self = DMatrix::from_row_slice(3, 2, &[2.0, 0.5, 0.0, 1.0, 1.0, 0.0]);
        let a_cross = DMatrix::from_row_slice(3, 2, &[0.3, -0.2, 0.1, 0.4, 0.0, 0.2]);
        let b = dvector![1.0, -0.5, 0.25];
        let q = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.5, 0.1, 0.0, 0.1, 1.0]);
        let c0 = QuadraticLocalCost::new(a_self.clone(), [(1, a_cross.clone())].into(), b.clone(), q.clone()).unwrap();
        let c1 = QuadraticLocalCost::new(a_self, [(0, a_cross)].into(), b, q).unwrap();
        let p = PartitionProblem::new(g, vec![c0, c1]).unwrap();
        let sol = p.solve_centralized().unwrap();
        assert!((&sol.x_star[0] - &sol.x_star[1]).amax() < 1e-12);
    }

    #[test]
    fn optimum_is_stationary_and_minimal() {
        for s in 0..5 {
            let p = small_instance(100 + s);
            let sol = p.solve_centralized().unwrap();
            let grad = p.global_gradient(&sol.x_star).unwrap();
            let norm = grad.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
            assert!(norm < 1e-9, "gradient norm {norm}");
            assert_eq!(p.global_cost(&sol.x_star).unwrap(), sol.optimal_value);
        }
    }

    #[test]
    fn singular_hessian_is_reported() {
        let g = Graph::edgeless(1).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let c = QuadraticLocalCost::new(a, BTreeMap::new(), dvector![1.0, 1.0], DMatrix::identity(2, 2)).unwrap();
        let p = PartitionProblem::new(g, vec![c]).unwrap();
        assert!(matches!(p.solve_centralized(), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn global_cost_zero_when_b_vanishes() {
        let g = Graph::path(3).unwrap();
        let costs = (0..3)
            .map(|i| {
                let nbrs = g.neighbors(i).unwrap();
                QuadraticLocalCost::new(
                    DMatrix::identity(2, 2),
                    nbrs.iter().map(|&j| (j, DMatrix::identity(2, 2) * 0.1)).collect(),
                    DVector::zeros(2),
                    DMatrix::identity(2, 2),
                )
                .unwrap()
            })
            .collect();
        let p = PartitionProblem::new(g, costs).unwrap();
        assert_eq!(p.global_cost(&vec![DVector::zeros(2); 3]).unwrap(), 0.0);
        assert!(p.global_cost(&vec![DVector::zeros(2); 2]).is_err());
    }

    #[test]
    fn mismatched_costs_rejected() {
        let g = Graph::path(2).unwrap();
        let c = identity_cost(dvector![1.0, 1.0]);
        assert!(PartitionProblem::new(g, vec![c.clone(), c]).is_err());
    }

    #[test]
    fn relabeling_permutes_the_optimum() {
        let p = small_instance(21);
        let sol = p.solve_centralized().unwrap();
        let perm = [3, 0, 5, 1, 4, 2];
        let q = p.relabel(&perm).unwrap();
        let sol_q = q.solve_centralized().unwrap();
        for i in 0..p.node_count() {
            assert!((&sol.x_star[i] - &sol_q.x_star[perm[i]]).amax() < 1e-9);
        }
        assert!((sol.optimal_value - sol_q.optimal_value).abs() < 1e-9);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let p = small_instance(8);
        let text = p.to_json();
        let back = PartitionProblem::from_json(&text).unwrap();
        assert_eq!(p, back);
        assert_eq!(text, back.to_json());
        assert!(PartitionProblem::from_json(&text.replace(INSTANCE_SCHEMA, "other/9")).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn optimum_beats_random_points(seed in 0u64..1000, pt in 0u64..1000) {
            let p = small_instance(seed);
            let sol = p.solve_centralized().unwrap();
            let mut rng = seed::rng(pt);
            let x = random_point(&mut rng, p.node_count(), 2);
            prop_assert!(p.global_cost(&x).unwrap() >= sol.optimal_value - 1e-9);
        }

        #[test]
        fn cost_is_homogeneous_of_degree_two(seed in 0u64..1000, t in -5.0f64..5.0) {
            let g = Graph::random_geometric_connected(5, 0.7, seed, 10_000).unwrap();
            let p = PartitionProblem::generate(&g, 2, 3, seed, 10.0).unwrap();
            let mut rng = seed::rng(seed ^ 1);
            let x = random_point(&mut rng, 5, 2);
            for (i, c) in p.costs().iter().enumerate() {
                let c0 = QuadraticLocalCost::new(
                    c.a_self().clone(), c.a_neigh().clone(), DVector::zeros(c.rows()), c.q().clone()).unwrap();
                let v = p.local_view(i, &x).unwrap();
                let f1 = c0.evaluate_stacked(&v).unwrap();
                let ft = c0.evaluate_stacked(&(&v * t)).unwrap();
                prop_assert!((ft - t * t * f1).abs() <= 1e-12 * (t * t * f1).abs().max(1e-300));
            }
        }
    }
}

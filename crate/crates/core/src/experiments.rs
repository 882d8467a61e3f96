//! Relative error, Monte Carlo averaging over loss realizations and
//! stability sweeps over `(rho, alpha, p)`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lossy::{LossModel, LossSchedule};
use crate::problem::{LocalCost, PartitionProblem, Solution};
use crate::radmm::{AlgorithmParams, DistributedSolver, NodeState, RunOptions, StopRule};
use crate::seed;

/// Per-round record of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    /// Relative error after each round; empty when the run had no reference.
    pub errors: Vec<f64>,
    pub diverged: bool,
    pub rounds_executed: usize,
    /// Node states after each round, when requested.
    pub states: Vec<Vec<NodeState>>,
    pub final_states: Vec<NodeState>,
}

impl RunTrace {
    /// CSV with columns `k,rel_error,diverged`, followed by `x{i}_{c}` (node
    /// `i`'s own variable, coordinate `c`) when states were recorded and
    /// `with_x` is set. `diverged` is 1 only on the row where the run stopped.
    pub fn to_csv(&self, with_x: bool) -> String {
        let with_x = with_x && self.states.len() == self.rounds_executed && self.rounds_executed > 0;
        let mut out = String::from("k,rel_error,diverged");
        if with_x {
            for s in &self.states[0] {
                for c in 0..s.dim() {
                    let _ = write!(out, ",x{}_{c}", s.id);
                }
            }
        }
        out.push('\n');
        for k in 0..self.rounds_executed {
            let err = self.errors.get(k).map_or(String::new(), |e| e.to_string());
            let flag = u8::from(self.diverged && k + 1 == self.rounds_executed);
            let _ = write!(out, "{k},{err},{flag}");
            if with_x {
                for s in &self.states[k] {
                    for v in s.x_self.iter() {
                        let _ = write!(out, ",{v}");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// `sum_i |x^(i) - x*_(i)| / |x*_(i)|`, where `x*_(i)` stacks `x_i*` and the
/// optimal values of the neighbors node `i` keeps copies of.
pub fn relative_error(states: &[NodeState], sol: &Solution) -> Result<f64> {
    let mut total = 0.0;
    for s in states {
        let mut diff = 0.0;
        let mut reference = 0.0;
        for (x, id) in std::iter::once((&s.x_self, s.id)).chain(s.x_neigh.iter().map(|(j, x)| (x, *j))) {
            let star = sol.x_star.get(id).ok_or(Error::NodeOutOfRange { index: id, node_count: sol.x_star.len() })?;
            if star.len() != x.len() {
                return Err(Error::DimensionMismatch(format!("node {id}: state and optimum differ in length")));
            }
            diff += (x - star).norm_squared();
            reference += star.norm_squared();
        }
        if reference == 0.0 {
            return Err(Error::ZeroNormReference(s.id));
        }
        total += (diff / reference).sqrt();
    }
    Ok(total)
}

/// Base-10 log for reporting, with exact zero clamped to `1e-300`.
pub fn log_error(e: f64) -> f64 {
    e.max(1e-300).log10()
}

/// `max over edges (i, j) of |x_i^(i) - x_i^(j)|`.
pub fn consensus_residual(states: &[NodeState]) -> f64 {
    states
        .iter()
        .flat_map(|s| s.x_neigh.iter().map(move |(j, copy)| (copy - &states[*j].x_self).norm()))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convergence {
    Converged(usize),
    Diverged,
    Undecided,
}

impl Convergence {
    pub fn round(self) -> Option<usize> {
        match self {
            Self::Converged(k) => Some(k),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Converged(_) => "converged",
            Self::Diverged => "diverged",
            Self::Undecided => "undecided",
        }
    }
}

/// First round `k` such that the errors of rounds `k..k + window` are all
/// below `tol`. A diverged trace never converges.
pub fn detect_convergence(trace: &RunTrace, tol: f64, window: usize) -> Convergence {
    if trace.diverged {
        return Convergence::Diverged;
    }
    let window = window.max(1);
    let mut run = 0;
    for (k, &e) in trace.errors.iter().enumerate() {
        run = if e < tol { run + 1 } else { 0 };
        if run == window {
            return Convergence::Converged(k + 1 - window);
        }
    }
    Convergence::Undecided
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    /// Stop each run early; the aggregate is then truncated to the shortest run.
    pub stop: Option<StopRule>,
    pub parallel: bool,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { stop: None, parallel: true }
    }
}

/// Aggregate of several runs differing only in their loss realization.
#[derive(Debug, Clone, PartialEq)]
pub struct McTrace {
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub diverged: bool,
    pub runs: Vec<RunTrace>,
}

impl McTrace {
    /// CSV with columns `k,mean_rel_error,min,max` (linear domain).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,mean_rel_error,min,max\n");
        for k in 0..self.mean.len() {
            let _ = writeln!(out, "{k},{},{},{}", self.mean[k], self.min[k], self.max[k]);
        }
        out
    }

    pub fn convergence(&self, tol: f64, window: usize) -> Vec<Convergence> {
        self.runs.iter().map(|t| detect_convergence(t, tol, window)).collect()
    }
}

/// Runs `runs` independent loss realizations (run `r` uses loss seed
/// `sub_seed(seed, r)`) and averages the relative error round by round.
pub fn monte_carlo<C: LocalCost>(
    problem: &PartitionProblem<C>,
    sol: &Solution,
    params: AlgorithmParams,
    loss: &LossModel,
    runs: usize,
    k_max: usize,
    seed: u64,
    options: McOptions,
) -> Result<McTrace> {
    if runs == 0 {
        return Err(Error::InvalidParameter("at least one Monte Carlo run is required".into()));
    }
    let solver = DistributedSolver::new(problem, params)?;
    let one = |r: usize| {
        let schedule = LossSchedule::new(loss.clone(), seed::sub_seed(seed, r as u64));
        solver.run(&schedule, k_max, RunOptions { reference: Some(sol), stop: options.stop, ..Default::default() })
    };
    let traces: Vec<RunTrace> = if options.parallel {
        (0..runs).into_par_iter().map(one).collect::<Result<_>>()?
    } else {
        (0..runs).map(one).collect::<Result<_>>()?
    };
    Ok(aggregate(traces))
}

fn aggregate(runs: Vec<RunTrace>) -> McTrace {
    let len = runs.iter().map(|t| t.errors.len()).min().unwrap_or(0);
    let count = runs.len() as f64;
    let mut mean = vec![0.0; len];
    let mut min = vec![f64::INFINITY; len];
    let mut max = vec![f64::NEG_INFINITY; len];
    for t in &runs {
        for k in 0..len {
            let e = t.errors[k];
            mean[k] += e / count;
            min[k] = min[k].min(e);
            max[k] = max[k].max(e);
        }
    }
    McTrace { mean, min, max, diverged: runs.iter().any(|t| t.diverged), runs }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub rho: Vec<f64>,
    pub alpha: Vec<f64>,
    pub loss: Vec<f64>,
    pub runs: usize,
    pub k_max: usize,
    pub seed: u64,
    pub tol: f64,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub rho: f64,
    pub alpha: f64,
    pub p: f64,
    pub outcome: Convergence,
    /// Median convergence round when every run converged.
    pub converged_at_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    /// `(rho, p, largest alpha of the convergent prefix of the sorted alpha grid)`.
    pub boundary: Vec<(f64, f64, Option<f64>)>,
}

impl SweepResult {
    /// CSV with columns `rho,alpha,p,outcome,converged_at_median`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rho,alpha,p,outcome,converged_at_median\n");
        for c in &self.cells {
            let med = c.converged_at_median.map_or(String::new(), |m| m.to_string());
            let _ = writeln!(out, "{},{},{},{},{med}", c.rho, c.alpha, c.p, c.outcome.label());
        }
        out
    }

    /// CSV with columns `rho,p,alpha_boundary` (empty when even the smallest
    /// alpha failed).
    pub fn boundary_csv(&self) -> String {
        let mut out = String::from("rho,p,alpha_boundary\n");
        for (rho, p, a) in &self.boundary {
            let a = a.map_or(String::new(), |a| a.to_string());
            let _ = writeln!(out, "{rho},{p},{a}");
        }
        out
    }

    pub fn cell(&self, rho: f64, alpha: f64, p: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.rho == rho && c.alpha == alpha && c.p == p)
    }

    pub fn boundary_for(&self, rho: f64, p: f64) -> Option<f64> {
        self.boundary.iter().find(|b| b.0 == rho && b.1 == p).and_then(|b| b.2)
    }
}

/// Classifies every `(rho, alpha, p)` cell: converged when all runs reach
/// `tol`, diverged when any run diverges, undecided otherwise. Nonpositive
/// `rho` values are outside the admissible region and are dropped.
pub fn stability_sweep<C: LocalCost>(
    problem: &PartitionProblem<C>,
    sol: &Solution,
    config: &SweepConfig,
    parallel: bool,
) -> Result<SweepResult> {
    let rhos: Vec<f64> = config.rho.iter().copied().filter(|&r| r > 0.0).collect();
    let mut alphas = config.alpha.clone();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    if rhos.is_empty() || alphas.is_empty() || config.loss.is_empty() {
        return Err(Error::InvalidParameter("sweep grids must be nonempty".into()));
    }
    if config.runs == 0 || config.k_max == 0 {
        return Err(Error::InvalidParameter("sweep needs runs >= 1 and k_max >= 1".into()));
    }
    let models = config.loss.iter().map(|&p| LossModel::uniform(problem.graph(), p)).collect::<Result<Vec<_>>>()?;

    let mut grid = Vec::new();
    for &rho in &rhos {
        for (li, &p) in config.loss.iter().enumerate() {
            for &alpha in &alphas {
                grid.push((rho, alpha, p, li));
            }
        }
    }
    let stop = StopRule { tol: config.tol, window: config.window };
    let classify = |&(rho, alpha, p, li): &(f64, f64, f64, usize)| -> Result<SweepCell> {
        let params = AlgorithmParams::new(alpha, rho)?;
        let mc = monte_carlo(
            problem,
            sol,
            params,
            &models[li],
            config.runs,
            config.k_max,
            config.seed,
            McOptions { stop: Some(stop), parallel: false },
        )?;
        let outcomes = mc.convergence(config.tol, config.window);
        let outcome = if outcomes.contains(&Convergence::Diverged) {
            Convergence::Diverged
        } else if outcomes.iter().all(|o| o.round().is_some()) {
            Convergence::Converged(outcomes.iter().filter_map(|o| o.round()).max().unwrap_or(0))
        } else {
            Convergence::Undecided
        };
        let rounds: Vec<f64> = outcomes.iter().filter_map(|o| o.round()).map(|k| k as f64).collect();
        let converged_at_median = if rounds.len() == outcomes.len() { median(&rounds) } else { None };
        Ok(SweepCell { rho, alpha, p, outcome, converged_at_median })
    };
    let cells: Vec<SweepCell> = if parallel {
        grid.par_iter().map(classify).collect::<Result<_>>()?
    } else {
        grid.iter().map(classify).collect::<Result<_>>()?
    };

    let mut boundary = Vec::new();
    for &rho in &rhos {
        for &p in &config.loss {
            let sup = cells
                .iter()
                .filter(|c| c.rho == rho && c.p == p)
                .take_while(|c| matches!(c.outcome, Convergence::Converged(_)))
                .map(|c| c.alpha)
                .last();
            boundary.push((rho, p, sup));
        }
    }
    Ok(SweepResult { cells, boundary })
}

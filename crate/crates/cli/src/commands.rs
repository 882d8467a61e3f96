use std::fs;
use std::path::{Path, PathBuf};

use pbradmm::experiments::median;
use pbradmm::{
    check_equivalence, monte_carlo, seed, stability_sweep, AlgorithmParams, DistributedSolver, Graph, LossModel,
    LossSchedule, McOptions, PartitionProblem, RunOptions, StopRule, SweepConfig,
};

use crate::config::{Config, Connectivity, SeriesParam};
use crate::error::CliError;

/// Everything a command needs besides the config.
pub struct Context {
    pub config: Config,
    pub instance: Option<PathBuf>,
    pub out: PathBuf,
}

impl Context {
    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))?;
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    /// The instance file given with `--instance`, or a fresh one from the config.
    fn problem(&self) -> Result<PartitionProblem, CliError> {
        match &self.instance {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                Ok(PartitionProblem::from_json(&text)?)
            }
            None => build_problem(&self.config),
        }
    }
}

pub fn build_graph(config: &Config) -> Result<Graph, CliError> {
    let spec = &config.graph;
    let seed = config.graph_seed()?;
    let radius = spec.effective_radius();
    match spec.connectivity {
        Connectivity::Resample => Ok(Graph::random_geometric_connected(spec.n, radius, seed, spec.resample_cap)?),
        Connectivity::Require => {
            let g = Graph::random_geometric(spec.n, radius, seed)?;
            if !g.is_connected() {
                return Err(CliError::Config(format!(
                    "graph (n = {}, radius = {radius}, seed = {seed}) is disconnected and connectivity = \"require\"",
                    spec.n
                )));
            }
            Ok(g)
        }
        Connectivity::Allow => Ok(Graph::random_geometric(spec.n, radius, seed)?),
    }
}

pub fn build_problem(config: &Config) -> Result<PartitionProblem, CliError> {
    let graph = build_graph(config)?;
    let spec = &config.instance;
    Ok(PartitionProblem::generate(&graph, spec.n_dim, spec.r_rows, config.instance_seed()?, spec.conditioning)?)
}

pub fn generate(ctx: &Context) -> Result<(), CliError> {
    let problem = build_problem(&ctx.config)?;
    let path = ctx.write("instance.json", &problem.to_json())?;
    ctx.write("graph.txt", &problem.graph().to_adjacency_text())?;
    println!("wrote {} ({} nodes, {} edges)", path.display(), problem.node_count(), problem.graph().edge_count());
    Ok(())
}

struct Experiment {
    label: String,
    params: AlgorithmParams,
    loss: LossModel,
    lossy: bool,
}

fn experiments(config: &Config, graph: &Graph) -> Result<Vec<Experiment>, CliError> {
    let base = config.params()?;
    let table = config.loss.table_map();
    let one = |alpha: f64, rho: f64, p: f64, label: String| -> Result<Experiment, CliError> {
        Ok(Experiment {
            label,
            params: AlgorithmParams::new(alpha, rho)?,
            loss: LossModel::per_edge(graph, &table, p)?,
            lossy: p > 0.0 || table.values().any(|&q| q > 0.0),
        })
    };
    match &config.series {
        None => Ok(vec![one(base.alpha, base.rho, config.loss.p, String::new())?]),
        Some(series) => {
            if series.values.is_empty() {
                return Err(CliError::Config("series.values is empty".into()));
            }
            series
                .values
                .iter()
                .map(|&v| {
                    let label = format!("_{}_{v}", series.param.name());
                    match series.param {
                        SeriesParam::P => one(base.alpha, base.rho, v, label),
                        SeriesParam::Alpha => one(v, base.rho, config.loss.p, label),
                        SeriesParam::Rho => one(base.alpha, v, config.loss.p, label),
                    }
                })
                .collect()
        }
    }
}

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let config = &ctx.config;
    let spec = config.run_spec()?;
    let run_seed = config.run_seed()?;
    if spec.k_max == 0 || spec.runs == 0 {
        return Err(CliError::Config("run.k_max and run.runs must be at least 1".into()));
    }
    let problem = ctx.problem()?;
    let sol = problem.solve_centralized()?;
    let mut diverged = Vec::new();
    for ex in experiments(config, problem.graph())? {
        let tol = config.tol(ex.lossy)?;
        let stop = spec.stop_at_tol.then_some(StopRule { tol, window: spec.window });
        let mc = monte_carlo(
            &problem,
            &sol,
            ex.params,
            &ex.loss,
            spec.runs,
            spec.k_max,
            run_seed,
            McOptions { stop, parallel: true },
        )?;
        ctx.write(&format!("trace{}.csv", ex.label), &mc.to_csv())?;

        // the first Monte Carlo run in full
        let schedule = LossSchedule::new(ex.loss.clone(), seed::sub_seed(run_seed, 0));
        let first = DistributedSolver::new(&problem, ex.params)?.run(
            &schedule,
            spec.k_max,
            RunOptions { reference: Some(&sol), record_states: config.output.with_x, stop, ..Default::default() },
        )?;
        ctx.write(&format!("run{}.csv", ex.label), &first.to_csv(config.output.with_x))?;

        let rounds: Vec<f64> =
            mc.convergence(tol, spec.window).iter().filter_map(|c| c.round()).map(|r| r as f64).collect();
        let name = if ex.label.is_empty() { "run".to_string() } else { ex.label[1..].replacen('_', " = ", 1) };
        println!(
            "{name}: final mean error {:.3e}, {}/{} runs below {tol:e}{}{}",
            mc.mean.last().copied().unwrap_or(f64::NAN),
            rounds.len(),
            spec.runs,
            median(&rounds).map_or(String::new(), |m| format!(", median round {m}")),
            if mc.diverged { ", DIVERGED" } else { "" }
        );
        if mc.diverged {
            diverged.push(name);
        }
    }
    println!("outputs in {}", ctx.out.display());
    if !diverged.is_empty() {
        return Err(CliError::Diverged(format!("diverged: {}", diverged.join(", "))));
    }
    Ok(())
}

pub fn check(ctx: &Context) -> Result<(), CliError> {
    let config = &ctx.config;
    let params = config.params()?;
    let params = AlgorithmParams::new(params.alpha, params.rho)?;
    let k_max = config.check.k_max.unwrap_or(50);
    if !(config.check.tol >= 0.0) {
        return Err(CliError::Config(format!("check.tol must be nonnegative, got {}", config.check.tol)));
    }
    let problem = ctx.problem()?;
    let deviation = check_equivalence(&problem, &params, k_max, config.check_seed()?)?;
    let report = format!(
        "alpha,rho,k_max,max_deviation,tol,pass\n{},{},{k_max},{deviation:e},{:e},{}\n",
        params.alpha,
        params.rho,
        config.check.tol,
        deviation <= config.check.tol
    );
    ctx.write("check.csv", &report)?;
    println!("max deviation over {k_max} rounds: {deviation:e} (tolerance {:e})", config.check.tol);
    if deviation <= config.check.tol {
        Ok(())
    } else {
        Err(CliError::Equivalence { deviation, tol: config.check.tol })
    }
}

pub fn sweep(ctx: &Context) -> Result<(), CliError> {
    let config = &ctx.config;
    let grid = config.sweep.as_ref().ok_or_else(|| CliError::Config("missing [sweep]".into()))?;
    let spec = config.run_spec()?;
    let sweep_config = SweepConfig {
        rho: grid.rho.clone(),
        alpha: grid.alpha.clone(),
        loss: grid.p.clone(),
        runs: spec.runs,
        k_max: spec.k_max,
        seed: config.run_seed()?,
        // one tolerance for the whole grid, lossy or not
        tol: config.tol(true)?,
        window: spec.window,
    };
    let problem = ctx.problem()?;
    let sol = problem.solve_centralized()?;
    let result = stability_sweep(&problem, &sol, &sweep_config, true)?;
    let cells = ctx.write("sweep.csv", &result.to_csv())?;
    ctx.write("boundary.csv", &result.boundary_csv())?;
    println!("{} cells written to {}", result.cells.len(), cells.display());
    for &(rho, p, alpha) in &result.boundary {
        println!(
            "rho = {rho}, p = {p}: {}",
            alpha.map_or("no convergent alpha".to_string(), |a| format!("alpha up to {a}"))
        );
    }
    Ok(())
}

pub fn output_dir(flag: Option<&Path>, config: &Config) -> PathBuf {
    flag.map(Path::to_path_buf).or_else(|| config.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."))
}

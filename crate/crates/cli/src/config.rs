//! Experiment configuration files.
//!
//! A config is a TOML document tagged with `schema = "pbradmm-config/1"`.
//! Every seed must be written out; nothing is drawn from the clock.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;

use crate::error::CliError;

pub const CONFIG_SCHEMA: &str = "pbradmm-config/1";

const PRESETS: [(&str, &str); 4] = [
    ("fig1", include_str!("../../../presets/fig1.toml")),
    ("fig2", include_str!("../../../presets/fig2.toml")),
    ("fig3", include_str!("../../../presets/fig3.toml")),
    ("fig4", include_str!("../../../presets/fig4.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _)| *name)
}

pub fn preset(name: &str) -> Result<&'static str, CliError> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text).ok_or_else(|| {
        CliError::Config(format!(
            "unknown preset '{name}' (available: {})",
            preset_names().collect::<Vec<_>>().join(", ")
        ))
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema: String,
    pub graph: GraphSpec,
    pub instance: InstanceSpec,
    pub params: Option<ParamsSpec>,
    #[serde(default)]
    pub loss: LossSpec,
    pub run: Option<RunSpec>,
    pub series: Option<SeriesSpec>,
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub check: CheckSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    /// Redraw with fresh sub-seeds until connected.
    Resample,
    /// Fail if the first draw is disconnected.
    Require,
    /// Accept whatever the first draw gives.
    Allow,
}

fn default_connectivity() -> Connectivity {
    Connectivity::Resample
}

fn default_resample_cap() -> usize {
    10_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub n: usize,
    pub radius: f64,
    pub seed: Option<u64>,
    #[serde(default = "default_connectivity")]
    pub connectivity: Connectivity,
    #[serde(default = "default_resample_cap")]
    pub resample_cap: usize,
    /// Replaces `radius` when present.
    pub radius_override: Option<f64>,
}

impl GraphSpec {
    pub fn effective_radius(&self) -> f64 {
        self.radius_override.unwrap_or(self.radius)
    }
}

fn default_n_dim() -> usize {
    2
}

fn default_r_rows() -> usize {
    3
}

fn default_conditioning() -> f64 {
    10.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    #[serde(default = "default_n_dim")]
    pub n_dim: usize,
    #[serde(default = "default_r_rows")]
    pub r_rows: usize,
    #[serde(default = "default_conditioning")]
    pub conditioning: f64,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub alpha: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeLoss {
    pub from: usize,
    pub to: usize,
    pub p: f64,
}

/// Uniform probability `p`, optionally refined per directed edge by `table`
/// (edges not listed keep `p`).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    #[serde(default)]
    pub p: f64,
    #[serde(default)]
    pub table: Vec<EdgeLoss>,
}

impl LossSpec {
    pub fn table_map(&self) -> BTreeMap<(usize, usize), f64> {
        self.table.iter().map(|e| ((e.from, e.to), e.p)).collect()
    }
}

fn default_k_max() -> usize {
    5000
}

fn default_runs() -> usize {
    1
}

fn default_window() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Defaults to 1e-6 without loss and 1e-4 with loss.
    pub tol: Option<f64>,
    #[serde(default = "default_window")]
    pub window: usize,
    /// Stop each run once it has stayed below `tol` for `window` rounds.
    #[serde(default)]
    pub stop_at_tol: bool,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesParam {
    P,
    Alpha,
    Rho,
}

impl SeriesParam {
    pub fn name(self) -> &'static str {
        match self {
            SeriesParam::P => "p",
            SeriesParam::Alpha => "alpha",
            SeriesParam::Rho => "rho",
        }
    }
}

/// One Monte Carlo experiment per value of `param`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSpec {
    pub param: SeriesParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub rho: Vec<f64>,
    pub alpha: Vec<f64>,
    pub p: Vec<f64>,
}

fn default_check_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    /// Largest accepted deviation between the distributed and stacked runs.
    #[serde(default = "default_check_tol")]
    pub tol: f64,
    /// Rounds to compare; defaults to 50.
    pub k_max: Option<usize>,
    /// Seed of the shared random starting point; defaults to `run.seed`.
    pub seed: Option<u64>,
}

impl Default for CheckSpec {
    fn default() -> Self {
        Self { tol: default_check_tol(), k_max: None, seed: None }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    /// Add per-node x columns to single-run traces.
    #[serde(default)]
    pub with_x: bool,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if config.schema != CONFIG_SCHEMA {
            return Err(CliError::Config(format!(
                "unsupported schema '{}', expected '{CONFIG_SCHEMA}'",
                config.schema
            )));
        }
        Ok(config)
    }

    /// Replaces every seed in the document, for tests.
    pub fn override_seeds(&mut self, seed: u64) {
        self.graph.seed = Some(seed);
        self.instance.seed = Some(seed);
        if let Some(run) = &mut self.run {
            run.seed = Some(seed);
        }
        if self.check.seed.is_some() {
            self.check.seed = Some(seed);
        }
    }

    pub fn graph_seed(&self) -> Result<u64, CliError> {
        self.graph.seed.ok_or_else(|| missing("graph.seed"))
    }

    pub fn instance_seed(&self) -> Result<u64, CliError> {
        self.instance.seed.ok_or_else(|| missing("instance.seed"))
    }

    pub fn run_spec(&self) -> Result<&RunSpec, CliError> {
        self.run.as_ref().ok_or_else(|| missing("[run]"))
    }

    pub fn run_seed(&self) -> Result<u64, CliError> {
        self.run_spec()?.seed.ok_or_else(|| missing("run.seed"))
    }

    pub fn check_seed(&self) -> Result<u64, CliError> {
        match self.check.seed {
            Some(seed) => Ok(seed),
            None => self.run.as_ref().and_then(|r| r.seed).ok_or_else(|| missing("check.seed or run.seed")),
        }
    }

    pub fn params(&self) -> Result<ParamsSpec, CliError> {
        self.params.ok_or_else(|| missing("[params]"))
    }

    /// `run.tol`, or the default for a lossy or loss-free experiment.
    pub fn tol(&self, lossy: bool) -> Result<f64, CliError> {
        let run = self.run_spec()?;
        let tol = run.tol.unwrap_or(if lossy { 1e-4 } else { 1e-6 });
        if !(tol > 0.0) {
            return Err(CliError::Config(format!("run.tol must be positive, got {tol}")));
        }
        Ok(tol)
    }
}

fn missing(what: &str) -> CliError {
    CliError::Config(format!("missing {what}; seeds and parameters are never filled in implicitly"))
}

//! Experiment configuration files (TOML, strict schema).

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hplab::brickwork::{Assignment, Boundary, CircuitSpec, Parity};
use hplab::predictions::Formula;
use hplab::qgates::{haar_gate, xxz_gate, Dressing, Gate};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    Membrane,
    Mc,
    Predict,
    Sweep,
}

impl Mode {
    pub fn tag(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Membrane => "membrane",
            Mode::Mc => "mc",
            Mode::Predict => "predict",
            Mode::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; must agree with the subcommand when present.
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub circuit: Option<CircuitConfig>,
    pub partition: Option<PartitionConfig>,
    pub times: Option<TimeGrid>,
    pub mc: Option<McConfig>,
    pub predict: Option<PredictConfig>,
    pub sweep: Option<SweepConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    pub l: usize,
    #[serde(default = "default_q")]
    pub q: usize,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default = "default_parity")]
    pub parity: Parity,
    pub gate: Option<GateConfig>,
}

fn default_q() -> usize {
    2
}

fn default_boundary() -> Boundary {
    Boundary::Open
}

fn default_parity() -> Parity {
    Parity::EvenBondsFirst
}

/// Couplings are given either in radians (`j_xy`, `j_z`) or as multiples
/// of π (`j_xy_pi`), with `j_z_ratio = J_z/J_xy` as a third option for `J_z`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GateConfig {
    Identity,
    Swap,
    Xxz {
        j_xy: Option<f64>,
        j_xy_pi: Option<f64>,
        j_z: Option<f64>,
        j_z_ratio: Option<f64>,
        dressing_seed: Option<u64>,
    },
    /// One Haar gate repeated on every bond and layer.
    Haar { seed: u64 },
    /// Independent Haar gates per bond and layer, seeded by the run seed.
    Random,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub l_a: usize,
    pub l_d: usize,
}

/// Either an explicit `list` or an inclusive `start..=stop` range.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub list: Option<Vec<usize>>,
    pub start: Option<usize>,
    pub stop: Option<usize>,
    pub step: Option<usize>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    pub formula: Formula,
    /// Perturbation strength for `perturbed-decay`; taken from the gate
    /// when absent.
    pub z1: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepBase {
    Exact,
    Membrane,
    Mc,
    Predict,
    FrontWidth,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: SweepBase,
    pub l: Option<Vec<usize>>,
    pub l_a: Option<Vec<usize>>,
    pub l_d: Option<Vec<usize>>,
    /// `(hi, lo)` progress thresholds for `front-width`.
    pub thresholds: Option<(f64, f64)>,
}

pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| CliError::config(e.to_string()).into())
}

fn missing(what: &str, mode: &str) -> anyhow::Error {
    CliError::config(format!("mode {mode} needs [{what}]")).into()
}

impl ExperimentConfig {
    pub fn circuit(&self, mode: &str) -> Result<&CircuitConfig> {
        self.circuit.as_ref().ok_or_else(|| missing("circuit", mode))
    }

    pub fn partition(&self, mode: &str) -> Result<PartitionConfig> {
        self.partition.ok_or_else(|| missing("partition", mode))
    }

    pub fn times(&self, mode: &str) -> Result<Vec<usize>> {
        self.times.as_ref().ok_or_else(|| missing("times", mode))?.expand()
    }
}

impl TimeGrid {
    pub fn expand(&self) -> Result<Vec<usize>> {
        let ts = match (&self.list, self.start, self.stop) {
            (Some(list), None, None) if self.step.is_none() => list.clone(),
            (None, Some(a), Some(b)) => {
                let step = self.step.unwrap_or(1);
                if step == 0 || b < a {
                    bail!(CliError::config(format!("empty time range {a}..={b} step {step}")));
                }
                (a..=b).step_by(step).collect()
            }
            _ => bail!(CliError::config("[times] takes either `list` or `start`/`stop`/`step`")),
        };
        if ts.is_empty() {
            bail!(CliError::config("[times] is empty"));
        }
        Ok(ts)
    }
}

impl GateConfig {
    pub fn build(&self, q: usize) -> Result<Option<Gate>> {
        let g = match self {
            GateConfig::Identity => Gate::identity(q),
            GateConfig::Swap => Gate::swap(q),
            GateConfig::Haar { seed } => haar_gate(q, *seed),
            GateConfig::Random => return Ok(None),
            GateConfig::Xxz { j_xy, j_xy_pi, j_z, j_z_ratio, dressing_seed } => {
                if q != 2 {
                    bail!(CliError::config("xxz gates are defined for q = 2"));
                }
                let j_xy = match (j_xy, j_xy_pi) {
                    (Some(j), None) => *j,
                    (None, Some(f)) => f * PI,
                    _ => bail!(CliError::config("xxz gate needs exactly one of j_xy, j_xy_pi")),
                };
                let j_z = match (j_z, j_z_ratio) {
                    (Some(j), None) => *j,
                    (None, Some(r)) => r * j_xy,
                    _ => bail!(CliError::config("xxz gate needs exactly one of j_z, j_z_ratio")),
                };
                let dressing = dressing_seed.map(|s| Dressing::random(2, s));
                xxz_gate(j_xy, j_z, dressing.as_ref())?
            }
        };
        Ok(Some(g))
    }
}

impl CircuitConfig {
    pub fn gate(&self) -> Result<Option<Gate>> {
        match &self.gate {
            Some(g) => g.build(self.q),
            None => bail!(CliError::config("[circuit.gate] is required")),
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self.gate, Some(GateConfig::Random))
    }

    /// Circuit at size `l`; random circuits take `seed`.
    pub fn spec(&self, l: usize, seed: Option<u64>) -> Result<CircuitSpec> {
        let assignment = match self.gate()? {
            Some(g) => Assignment::Floquet(g),
            None => {
                let seed = seed.ok_or_else(|| CliError::config("random circuits need a seed (config `seed` or --seed)"))?;
                Assignment::Random { seed }
            }
        };
        Ok(CircuitSpec::new(l, self.q, self.boundary, assignment, self.parity)?)
    }
}

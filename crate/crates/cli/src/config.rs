//! Experiment configuration documents.

use std::fmt;
use std::path::PathBuf;

use nlts_core::model::{validate, InnovationSpec, ModelParams, ParamDoc};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Fit,
    IdentScan,
    PartialIdent,
    LemmaCheck,
    LaplaceCheck,
    Stationarity,
    AgarchDemo,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Simulate,
        Command::Fit,
        Command::IdentScan,
        Command::PartialIdent,
        Command::LemmaCheck,
        Command::LaplaceCheck,
        Command::Stationarity,
        Command::AgarchDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::IdentScan => "ident-scan",
            Command::PartialIdent => "partial-ident",
            Command::LemmaCheck => "lemma-check",
            Command::LaplaceCheck => "laplace-check",
            Command::Stationarity => "stationarity",
            Command::AgarchDemo => "agarch-demo",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ParamDoc>,
    #[serde(default)]
    pub run: RunControls,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrdersDoc {
    pub p: usize,
    pub q: usize,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub count: usize,
    pub seed: u64,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_gamma_range")]
    pub gamma_range: [f64; 2],
    #[serde(default = "default_c_range")]
    pub c_range: [f64; 2],
    /// Minimum ∞-distance between any two pairs of a configuration.
    #[serde(default = "default_min_sep")]
    pub min_separation: f64,
    /// Configurations made of one pair repeated twice.
    #[serde(default)]
    pub duplicates: usize,
}

fn default_k_max() -> usize {
    3
}
fn default_gamma_range() -> [f64; 2] {
    [0.2, 5.0]
}
fn default_c_range() -> [f64; 2] {
    [-3.0, 3.0]
}
fn default_min_sep() -> f64 {
    0.01
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomTruths {
    pub count: usize,
    pub seed: u64,
}

/// Run controls shared by all commands; each command reads the subset it needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunControls {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opt_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub innovation: Option<InnovationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_grid: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_grid: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truths: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_truths: Option<RandomTruths>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub one_signed_grids: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<nlts_core::Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders: Option<OrdersDoc>,
    #[serde(default, rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

impl ExperimentConfig {
    /// Validated model parameters; an error when missing or invalid.
    pub fn model(&self) -> Result<ModelParams, CliError> {
        let doc = self
            .model
            .as_ref()
            .ok_or_else(|| CliError::Validation(format!("{} needs a model document", self.command)))?;
        validate(doc).map_err(|v| CliError::Validation(format!("model: {v}")))
    }

    pub fn seeds(&self) -> Result<&[u64], CliError> {
        if self.run.seeds.is_empty() {
            return Err(CliError::Validation(format!(
                "{} needs an explicit, non-empty run.seeds list",
                self.command
            )));
        }
        Ok(&self.run.seeds)
    }

    pub fn require<T: Copy>(&self, v: Option<T>, name: &str) -> Result<T, CliError> {
        v.ok_or_else(|| CliError::Validation(format!("{} needs run.{name}", self.command)))
    }
}

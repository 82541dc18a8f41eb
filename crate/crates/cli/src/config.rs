//! Experiment configuration files.
//!
//! ```toml
//! [problem]
//! id = "example-a"        # example-a | example-b | atomic | custom
//! horizon = 0.6
//! # phi = "..."           # custom only, expression in t and x
//! # f = "..."
//!
//! [kernel]
//! type = "truncated"      # fractional | truncated | tempered | variable-order | atomic
//! alpha = 0.75
//! delta = 0.2
//!
//! [run]
//! h = 0.02
//! times = [0.1, 0.2, 0.4, 0.6]
//! trials = 50000
//! seed = 1
//! out = "out/example-a"
//!
//! [fd]
//! h = 0.001
//! k = 0.0001
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use fkwalk_core::feynman_kac::zero_fn;
use fkwalk_core::{DataFn, Kernel, LatticeConfig, ProblemData};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::expr::{self, Expr};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub run: RunSection,
    pub fd: Option<FdSection>,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub heatkernel: HeatKernelSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub id: String,
    pub horizon: f64,
    pub phi: Option<String>,
    pub f: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    Fractional { alpha: f64 },
    Truncated { alpha: f64, delta: f64 },
    Tempered { alpha: f64, lambda: f64 },
    VariableOrder { order: String, t_min: f64, t_max: f64 },
    Atomic { lambda: f64, delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub h: f64,
    pub times: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            h: 0.02,
            times: Vec::new(),
            trials: 10_000,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FdSection {
    pub h: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub cells: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { cells: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatKernelSection {
    pub x: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub r_points: usize,
    pub y_points: usize,
}

impl Default for HeatKernelSection {
    fn default() -> Self {
        Self {
            x: 0.0,
            r_min: -1.0,
            r_max: -0.01,
            r_points: 12,
            y_points: 21,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub out: Option<PathBuf>,
    pub times: Vec<f64>,
}

/// A parsed config together with the hash of its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub path: PathBuf,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<LoadedConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut config = parse_str(&text)?;
    config.apply(overrides);
    config.validate()?;
    Ok(LoadedConfig {
        config,
        path: path.to_path_buf(),
        sha256: sha256_hex(text.as_bytes()),
    })
}

pub fn parse_str(text: &str) -> Result<ExperimentConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
}

fn parse_expr(src: &str, what: &str) -> Result<Expr, CliError> {
    expr::parse(src).map_err(|e| CliError::Usage(format!("{what}: {e}")))
}

fn expr_fn(e: Expr) -> DataFn {
    Arc::new(move |t: f64, x: f64| e.eval(t, x))
}

fn example_a_phi() -> DataFn {
    Arc::new(|t: f64, x: f64| (5.0 * t).exp() * (1.0 + x) * (1.0 - x).powi(2) * x)
}

fn example_b_forcing() -> DataFn {
    Arc::new(|t: f64, x: f64| (10.0 * t).sin() * (1.0 - x) * x * (std::f64::consts::PI * x).sin())
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.run.seed = s;
        }
        if let Some(n) = o.trials {
            self.run.trials = n;
        }
        if let Some(p) = &o.out {
            self.run.out = p.clone();
        }
        if !o.times.is_empty() {
            self.run.times = o.times.clone();
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.problem;
        if !(p.horizon > 0.0 && p.horizon.is_finite()) {
            return Err(CliError::Usage(format!("horizon {} must be positive", p.horizon)));
        }
        match p.id.as_str() {
            "example-a" | "example-b" | "atomic" => {
                if p.phi.is_some() || p.f.is_some() {
                    return Err(CliError::Usage(format!(
                        "problem '{}' has fixed data; phi and f are only allowed with id = \"custom\"",
                        p.id
                    )));
                }
            }
            "custom" => {
                if let Some(s) = &p.phi {
                    parse_expr(s, "phi")?;
                }
                if let Some(s) = &p.f {
                    parse_expr(s, "f")?;
                }
            }
            other => return Err(CliError::Usage(format!("unknown problem id '{other}'"))),
        }
        if self.run.times.is_empty() {
            return Err(CliError::Usage("no target times: set run.times or pass --time".into()));
        }
        for &t in &self.run.times {
            if !(t > 0.0 && t <= p.horizon * (1.0 + 1e-12)) {
                return Err(CliError::Usage(format!("time {t} outside (0, {}]", p.horizon)));
            }
        }
        if self.run.trials < 100 {
            return Err(CliError::Usage(format!(
                "trials = {} must be at least 100",
                self.run.trials
            )));
        }
        cells_for(self.run.h)?;
        if let Some(fd) = &self.fd {
            cells_for(fd.h)?;
            steps_for(p.horizon, fd.k)?;
        }
        self.kernel()?;
        Ok(())
    }

    pub fn kernel(&self) -> Result<Kernel, CliError> {
        let k = match &self.kernel {
            KernelSpec::Fractional { alpha } => Kernel::fractional(*alpha),
            KernelSpec::Truncated { alpha, delta } => Kernel::truncated(*alpha, *delta),
            KernelSpec::Tempered { alpha, lambda } => Kernel::tempered(*alpha, *lambda),
            KernelSpec::Atomic { lambda, delta } => Kernel::atomic(*lambda, *delta),
            KernelSpec::VariableOrder { order, t_min, t_max } => {
                let e = parse_expr(order, "kernel.order")?;
                Kernel::variable_order(Arc::new(move |t: f64| e.eval(t, 0.0)), (*t_min, *t_max))
            }
        };
        k.map_err(|e| CliError::Usage(format!("kernel: {e}")))
    }

    /// `(φ, f)`; `f` is `None` when identically zero.
    pub fn data(&self) -> Result<(DataFn, Option<DataFn>), CliError> {
        let p = &self.problem;
        Ok(match p.id.as_str() {
            "example-a" | "atomic" => (example_a_phi(), None),
            "example-b" => (zero_fn(), Some(example_b_forcing())),
            _ => {
                let phi = match &p.phi {
                    Some(s) => expr_fn(parse_expr(s, "phi")?),
                    None => zero_fn(),
                };
                let f = match &p.f {
                    Some(s) => Some(expr_fn(parse_expr(s, "f")?)),
                    None => None,
                };
                (phi, f)
            }
        })
    }

    /// Problem on a lattice of spacing `h`.
    pub fn problem(&self, h: f64) -> Result<ProblemData, CliError> {
        let lattice = LatticeConfig::new(cells_for(h)?).map_err(|e| CliError::Usage(e.to_string()))?;
        let (phi, f) = self.data()?;
        let mut problem = ProblemData::new(self.kernel()?, phi, self.problem.horizon, lattice)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if let Some(f) = f {
            problem = problem.with_forcing(f);
        }
        Ok(problem)
    }
}

/// `2 / h` as an even integer.
pub fn cells_for(h: f64) -> Result<usize, CliError> {
    let r = 2.0 / h;
    let n = r.round();
    if !(h > 0.0) || (r - n).abs() > 1e-9 * n.max(1.0) || n < 2.0 || !(n as u64).is_multiple_of(2) {
        return Err(CliError::Usage(format!(
            "h = {h} must divide 2 into an even number of cells"
        )));
    }
    Ok(n as usize)
}

/// `T / k` as an integer.
pub fn steps_for(horizon: f64, k: f64) -> Result<usize, CliError> {
    let r = horizon / k;
    let n = r.round();
    if !(k > 0.0) || n < 1.0 || (r - n).abs() > 1e-9 * n {
        return Err(CliError::Usage(format!("k = {k} must divide the horizon {horizon}")));
    }
    Ok(n as usize)
}

//! Experiment configuration: one strict JSON document per run.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sps_core::energy::{NonlinearitySpec, PowerTerm};
use sps_core::solvers::SolverConfig;
use sps_core::{Grid, GridSpec};

use crate::error::CliError;

/// Grid block with the command-line defaults filled in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n: usize,
    pub r_max: f64,
    pub stretch: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: 2048,
            r_max: 25.0,
            stretch: 1.0,
        }
    }
}

impl GridConfig {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            n: self.n,
            r_max: self.r_max,
            stretch: self.stretch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Exponent of the first nonlinearity term.
    Q,
    /// Coefficient of the first nonlinearity term.
    Lambda,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Q => "q",
            SweepParam::Lambda => "lambda",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub vary: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub nonlinearity: Option<NonlinearitySpec>,
    /// Dilation parameters: the family check for `eigen`, the scaling laws
    /// for `axioms`.
    pub ts: Option<Vec<f64>>,
    /// Number of distinct solutions requested from `solve` and `sweep`.
    pub k: usize,
    /// Widths of the unit-amplitude Gaussian seeds used by `axioms`.
    pub axiom_widths: Vec<f64>,
    pub sweep: Option<SweepConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            nonlinearity: None,
            ts: None,
            k: 1,
            axiom_widths: vec![0.5, 1.0, 2.0],
            sweep: None,
        }
    }
}

pub const AXIOM_TS: [f64; 4] = [0.5, 0.8, 1.25, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eigen,
    Solve,
    Axioms,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Eigen => "eigen",
            Command::Solve => "solve",
            Command::Axioms => "axioms",
            Command::Sweep => "sweep",
        }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| bad(e.to_string()))
    }

    /// Checks every invariant the command depends on and builds the grid.
    pub fn validate(&self, command: Command) -> Result<Arc<Grid>, CliError> {
        let grid = self.grid.spec().build()?;
        self.solver.validate()?;
        if let Some(f) = &self.nonlinearity {
            f.validate()?;
        }
        if self.k < 1 {
            return Err(bad("k must be at least 1"));
        }
        if let Some(ts) = &self.ts {
            if let Some(t) = ts.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
                return Err(bad(format!("ts entry {t} must be positive and finite")));
            }
        }
        match command {
            Command::Eigen => {}
            Command::Solve => {
                if self.nonlinearity.is_none() {
                    return Err(bad("solve needs a nonlinearity"));
                }
            }
            Command::Axioms => {
                if self.ts.as_ref().is_some_and(Vec::is_empty) {
                    return Err(bad("ts must not be empty"));
                }
                if self.axiom_widths.is_empty() {
                    return Err(bad("axiom_widths must not be empty"));
                }
                if let Some(w) = self
                    .axiom_widths
                    .iter()
                    .find(|w| !(w.is_finite() && **w > 0.0))
                {
                    return Err(bad(format!("axiom width {w} must be positive and finite")));
                }
            }
            Command::Sweep => {
                let sweep = self
                    .sweep
                    .as_ref()
                    .ok_or_else(|| bad("sweep needs a sweep block"))?;
                if sweep.values.is_empty() {
                    return Err(bad("sweep.values must not be empty"));
                }
                for &v in &sweep.values {
                    self.sweep_nonlinearity(sweep.vary, v)?;
                }
            }
        }
        Ok(grid)
    }

    /// The nonlinearity of one sweep row: `value` replaces the exponent or
    /// coefficient of the first term. Without a configured nonlinearity the
    /// base is `|t|^{q−2} t` for a q sweep and `λ |t| t` for a λ sweep.
    pub fn sweep_nonlinearity(
        &self,
        vary: SweepParam,
        value: f64,
    ) -> Result<NonlinearitySpec, CliError> {
        let mut f = self
            .nonlinearity
            .clone()
            .unwrap_or_else(|| NonlinearitySpec {
                terms: vec![PowerTerm {
                    coef: 1.0,
                    exponent: 3.0,
                }],
                saturating: None,
            });
        let first = f
            .terms
            .first_mut()
            .ok_or_else(|| bad("sweep needs a nonlinearity with at least one power term"))?;
        match vary {
            SweepParam::Q => first.exponent = value,
            SweepParam::Lambda => first.coef = value,
        }
        f.validate()
            .map_err(|e| bad(format!("sweep value {value}: {e}")))?;
        Ok(f)
    }
}

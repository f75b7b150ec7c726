//! JSON run configurations.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;
use crate::expr::{parse_expression, Expr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Eigen,
    Constants,
    Certify,
    Convergence,
    Timeseries,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Eigen => "eigen",
            Command::Constants => "constants",
            Command::Certify => "certify",
            Command::Convergence => "convergence",
            Command::Timeseries => "timeseries",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainSpec {
    Interval([f64; 2]),
    Rectangle { x: [f64; 2], y: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    /// Element counts per axis: `[m]` or `[mx, my]`.
    pub elements: Vec<usize>,
    /// Uniform refinements applied before solving, or the number of levels
    /// in a convergence study.
    #[serde(default)]
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    pub t: f64,
    #[serde(default)]
    pub weight: Option<String>,
    #[serde(default)]
    pub rhs: Option<String>,
    #[serde(default)]
    pub currents: Option<Vec<String>>,
    #[serde(default)]
    pub internal_force: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub mesh: MeshSpec,
    #[serde(default)]
    pub weight: Option<String>,
    /// Nodal weight values, one `index value` pair per line.
    #[serde(default)]
    pub weight_file: Option<PathBuf>,
    #[serde(default)]
    pub rhs: Option<String>,
    /// Components of `∂ₜj`.
    #[serde(default)]
    pub currents: Option<Vec<String>>,
    /// Exact solution for convergence studies and error reporting.
    #[serde(default)]
    pub exact: Option<String>,
    /// Divergence of the internal forces for the time-series consistency check.
    #[serde(default)]
    pub internal_force: Option<String>,
    pub command: Command,
    /// Number of eigenpairs.
    #[serde(default)]
    pub k: Option<usize>,
    /// Exponents for the Poincaré estimate.
    #[serde(default)]
    pub poincare_q: Option<Vec<f64>>,
    #[serde(default)]
    pub time: Option<TimeGrid>,
    #[serde(default)]
    pub slices: Option<Vec<SliceSpec>>,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub quad_degree: Option<usize>,
}

/// Every expression of a configuration, parsed.
#[derive(Debug, Clone)]
pub struct ParsedExpressions {
    pub weight: Option<Expr>,
    pub rhs: Option<Expr>,
    pub currents: Option<Vec<Expr>>,
    pub exact: Option<Expr>,
    pub internal_force: Option<Expr>,
    pub slices: Vec<ParsedSlice>,
}

#[derive(Debug, Clone)]
pub struct ParsedSlice {
    pub t: f64,
    pub weight: Option<Expr>,
    pub rhs: Option<Expr>,
    pub currents: Option<Vec<Expr>>,
    pub internal_force: Option<Expr>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_json(&text)
    }

    /// Parses every expression and checks the command's requirements.
    pub fn validate(&self) -> Result<ParsedExpressions, CliError> {
        let one = |field: &str, src: &Option<String>| -> Result<Option<Expr>, CliError> {
            src.as_deref()
                .map(|s| {
                    parse_expression(s).map_err(|e| CliError::Expression {
                        field: field.to_string(),
                        source: e,
                    })
                })
                .transpose()
        };
        let many =
            |field: &str, src: &Option<Vec<String>>| -> Result<Option<Vec<Expr>>, CliError> {
                src.as_ref()
                    .map(|v| {
                        v.iter()
                            .enumerate()
                            .map(|(i, s)| {
                                parse_expression(s).map_err(|e| CliError::Expression {
                                    field: format!("{field}[{i}]"),
                                    source: e,
                                })
                            })
                            .collect()
                    })
                    .transpose()
            };
        let mut slices = Vec::new();
        for (i, s) in self.slices.iter().flatten().enumerate() {
            slices.push(ParsedSlice {
                t: s.t,
                weight: one(&format!("slices[{i}].weight"), &s.weight)?,
                rhs: one(&format!("slices[{i}].rhs"), &s.rhs)?,
                currents: many(&format!("slices[{i}].currents"), &s.currents)?,
                internal_force: one(&format!("slices[{i}].internal_force"), &s.internal_force)?,
            });
        }
        let parsed = ParsedExpressions {
            weight: one("weight", &self.weight)?,
            rhs: one("rhs", &self.rhs)?,
            currents: many("currents", &self.currents)?,
            exact: one("exact", &self.exact)?,
            internal_force: one("internal_force", &self.internal_force)?,
            slices,
        };

        let missing = |what: &str| {
            CliError::Config(format!(
                "`{what}` is required by the {} command",
                self.command.name()
            ))
        };
        if self.weight.is_some() && self.weight_file.is_some() {
            return Err(CliError::Config(
                "`weight` and `weight_file` are mutually exclusive".into(),
            ));
        }
        let has_weight = self.weight.is_some() || self.weight_file.is_some();
        match self.command {
            Command::Timeseries => {
                if self.time.is_some() == self.slices.is_some() {
                    return Err(CliError::Config(
                        "timeseries needs exactly one of `time` and `slices`".into(),
                    ));
                }
                if let Some(grid) = &self.time {
                    if grid.count == 0 || grid.step.is_nan() || grid.step <= 0.0 {
                        return Err(CliError::Config(
                            "`time` needs count >= 1 and step > 0".into(),
                        ));
                    }
                    if !has_weight {
                        return Err(missing("weight"));
                    }
                    if self.rhs.is_none() {
                        return Err(missing("rhs"));
                    }
                }
                for (i, s) in parsed.slices.iter().enumerate() {
                    if s.weight.is_none() && !has_weight {
                        return Err(CliError::Config(format!("slices[{i}] has no weight")));
                    }
                    if s.rhs.is_none() && parsed.rhs.is_none() {
                        return Err(CliError::Config(format!("slices[{i}] has no rhs")));
                    }
                }
                if parsed.slices.is_empty() && self.slices.is_some() {
                    return Err(CliError::Config("`slices` is empty".into()));
                }
            }
            command => {
                if !has_weight {
                    return Err(missing("weight"));
                }
                if matches!(command, Command::Solve | Command::Convergence) && self.rhs.is_none() {
                    return Err(missing("rhs"));
                }
                if command == Command::Convergence && self.exact.is_none() {
                    return Err(missing("exact"));
                }
                if command == Command::Eigen && self.k == Some(0) {
                    return Err(CliError::Config("`k` must be positive".into()));
                }
            }
        }
        let dims = match self.domain {
            DomainSpec::Interval(_) => 1,
            DomainSpec::Rectangle { .. } => 2,
        };
        if self.mesh.elements.len() != dims {
            return Err(CliError::Config(format!(
                "`mesh.elements` needs {dims} entr{} for this domain",
                if dims == 1 { "y" } else { "ies" }
            )));
        }
        if let Some(q) = self
            .poincare_q
            .iter()
            .flatten()
            .find(|&&q| !(1.0..=16.0).contains(&q))
        {
            return Err(CliError::Config(format!("poincare_q {q} outside [1, 16]")));
        }
        Ok(parsed)
    }
}

/// Reads `index value` lines into a vector of `num_nodes` values.
pub fn read_nodal_file(path: &Path, num_nodes: usize) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_nodal_values(&text, num_nodes)
        .map_err(|m| CliError::Config(format!("{}: {m}", path.display())))
}

pub fn parse_nodal_values(text: &str, num_nodes: usize) -> Result<Vec<f64>, String> {
    let mut values = vec![None; num_nodes];
    for (lineno, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(first) = parts.next() else { continue };
        let bad = || format!("line {}: expected `index value`", lineno + 1);
        let index: usize = first.parse().map_err(|_| bad())?;
        let value: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if parts.next().is_some() {
            return Err(bad());
        }
        let slot = values
            .get_mut(index)
            .ok_or_else(|| format!("line {}: index {index} out of range", lineno + 1))?;
        if slot.replace(value).is_some() {
            return Err(format!("line {}: duplicate index {index}", lineno + 1));
        }
    }
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| format!("missing value for node {i}")))
        .collect()
}

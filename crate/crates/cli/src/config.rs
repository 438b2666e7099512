//! Experiment configuration: a flat JSON object validated up front.

use nhgeom::linalg::{check_hermitian, hermitize, CMatrix, MatrixJson, DEFAULT_CLUSTER_TOL};
use nhgeom::state::{DensityOperator, NonHermitianGenerator, DEFAULT_RANK_TOL};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Evolve,
    Decompose,
    Geodesic,
    Optimize,
    Speedlimit,
    Sta,
    ReproduceQubit,
    ReproduceQutrit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Decompose => "decompose",
            Command::Geodesic => "geodesic",
            Command::Optimize => "optimize",
            Command::Speedlimit => "speedlimit",
            Command::Sta => "sta",
            Command::ReproduceQubit => "reproduce-qubit",
            Command::ReproduceQutrit => "reproduce-qutrit",
        }
    }
}

/// One experiment. Matrices use `{ "rows", "cols", "re", "im" }`; which
/// fields are required depends on `command`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho1: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho2: Option<MatrixJson>,
    /// Hermitian part of `K = H − iΓ`; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<MatrixJson>,
    /// Decay part of `K`; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<MatrixJson>,
    /// Explicit tangent at `rho0` for `decompose`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tangent: Option<MatrixJson>,
    /// `H₀(t) = h0_offset + t·h0_slope` for `sta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h0_offset: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h0_slope: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// End of the time window `[0, horizon]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_scale: Option<f64>,
    /// Drive `evolve` with the success-rate optimal generator.
    #[serde(default, skip_serializing_if = "is_false")]
    pub optimize: bool,
    /// Add a `gamma_opt` column to trajectory output.
    #[serde(default, skip_serializing_if = "is_false")]
    pub track_optimized: bool,
    /// Append flattened state entries to trajectory CSVs.
    #[serde(default, skip_serializing_if = "is_false")]
    pub include_states: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Seed for randomly drawn inputs (`decompose` without a tangent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Read(String),
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("field `{field}`: {detail}")]
    Field { field: &'static str, detail: String },
}

fn field_err(field: &'static str, detail: impl ToString) -> ConfigError {
    ConfigError::Field {
        field,
        detail: detail.to_string(),
    }
}

/// Parses and eagerly validates a config; the returned value is known to build.
pub fn parse_config(text: &[u8]) -> Result<ExperimentConfig, ConfigError> {
    let text = std::str::from_utf8(text).map_err(|e| ConfigError::Read(format!("not UTF-8: {e}")))?;
    let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    config.inputs()?;
    Ok(config)
}

/// Typed inputs after validation.
#[derive(Debug, Clone)]
pub(crate) struct Inputs {
    pub rho0: Option<DensityOperator>,
    pub rho1: Option<DensityOperator>,
    pub rho2: Option<DensityOperator>,
    pub generator: Option<NonHermitianGenerator>,
    pub tangent: Option<CMatrix>,
    pub h0: Option<(CMatrix, CMatrix)>,
    pub beta: f64,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub rank_tol: f64,
    pub cluster_tol: f64,
    pub r_scale: f64,
}

fn positive(field: &'static str, v: Option<f64>) -> Result<Option<f64>, ConfigError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(field_err(field, format!("must be positive and finite, got {x}"))),
        _ => Ok(v),
    }
}

fn square(field: &'static str, m: &MatrixJson) -> Result<CMatrix, ConfigError> {
    let m = m.to_matrix().map_err(|e| field_err(field, e))?;
    if m.nrows() != m.ncols() {
        return Err(field_err(field, format!("must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(m)
}

fn hermitian(field: &'static str, m: &MatrixJson) -> Result<CMatrix, ConfigError> {
    let m = square(field, m)?;
    check_hermitian(&m, field).map_err(|e| field_err(field, e))?;
    Ok(hermitize(&m))
}

fn expect_dim(field: &'static str, m: &CMatrix, n: usize) -> Result<(), ConfigError> {
    if m.nrows() != n {
        return Err(field_err(field, format!("dimension {} does not match {n}", m.nrows())));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Minimal config for `command` with every optional field unset.
    pub fn new(command: Command) -> Self {
        ExperimentConfig {
            command,
            rho0: None,
            rho1: None,
            rho2: None,
            h: None,
            gamma: None,
            tangent: None,
            h0_offset: None,
            h0_slope: None,
            beta: None,
            dt: None,
            horizon: None,
            rank_tol: None,
            cluster_tol: None,
            r_scale: None,
            optimize: false,
            track_optimized: false,
            include_states: false,
            output: None,
            seed: None,
        }
    }

    fn state(&self, field: &'static str, m: &Option<MatrixJson>, tol: (f64, f64)) -> Result<Option<DensityOperator>, ConfigError> {
        m.as_ref()
            .map(|m| {
                let m = hermitian(field, m)?;
                DensityOperator::with_tolerances(m, tol.0, tol.1).map_err(|e| field_err(field, e))
            })
            .transpose()
    }

    fn require<T>(&self, field: &'static str, v: Option<T>) -> Result<T, ConfigError> {
        v.ok_or_else(|| field_err(field, format!("required by `{}`", self.command.name())))
    }

    pub(crate) fn inputs(&self) -> Result<Inputs, ConfigError> {
        let dt = positive("dt", self.dt)?;
        let horizon = positive("horizon", self.horizon)?;
        let beta = positive("beta", self.beta)?.unwrap_or(1.0);
        let rank_tol = positive("rank_tol", self.rank_tol)?.unwrap_or(DEFAULT_RANK_TOL);
        let cluster_tol = positive("cluster_tol", self.cluster_tol)?.unwrap_or(DEFAULT_CLUSTER_TOL);
        let r_scale = positive("r_scale", self.r_scale)?.unwrap_or(nhgeom::geodesic::DEFAULT_R_SCALE);
        let tol = (rank_tol, cluster_tol);

        let rho0 = self.state("rho0", &self.rho0, tol)?;
        let rho1 = self.state("rho1", &self.rho1, tol)?;
        let rho2 = self.state("rho2", &self.rho2, tol)?;
        let h = self.h.as_ref().map(|m| hermitian("h", m)).transpose()?;
        let gamma = self.gamma.as_ref().map(|m| hermitian("gamma", m)).transpose()?;
        let tangent = self.tangent.as_ref().map(|m| hermitian("tangent", m)).transpose()?;
        let h0 = match (&self.h0_offset, &self.h0_slope) {
            (Some(a), Some(b)) => {
                let (a, b) = (hermitian("h0_offset", a)?, hermitian("h0_slope", b)?);
                expect_dim("h0_slope", &b, a.nrows())?;
                Some((a, b))
            }
            (None, None) => None,
            (None, Some(_)) => return Err(field_err("h0_offset", "required together with `h0_slope`")),
            (Some(_), None) => return Err(field_err("h0_slope", "required together with `h0_offset`")),
        };

        let n = rho0.as_ref().or(rho1.as_ref()).map(DensityOperator::dim);
        if let Some(n) = n {
            for (field, m) in [("h", &h), ("gamma", &gamma), ("tangent", &tangent)] {
                if let Some(m) = m {
                    expect_dim(field, m, n)?;
                }
            }
        }
        let generator = match (h, gamma, n) {
            (None, None, _) => n.map(NonHermitianGenerator::zero),
            (h, g, _) => {
                let dim = h.as_ref().or(g.as_ref()).map(CMatrix::nrows).unwrap_or(0);
                let h = h.unwrap_or_else(|| CMatrix::zeros(dim, dim));
                let g = g.unwrap_or_else(|| CMatrix::zeros(dim, dim));
                if h.nrows() != g.nrows() {
                    return Err(field_err("gamma", format!("dimension {} does not match h ({})", g.nrows(), h.nrows())));
                }
                Some(NonHermitianGenerator::new(h, g).map_err(|e| field_err("h", e))?)
            }
        };

        match self.command {
            Command::Evolve | Command::Speedlimit => {
                self.require("rho0", rho0.as_ref())?;
                self.require("horizon", horizon)?;
            }
            Command::Optimize => {
                self.require("rho0", rho0.as_ref())?;
            }
            Command::Decompose => {
                self.require("rho0", rho0.as_ref())?;
                if let (Some(t), Some(r)) = (&tangent, &rho0) {
                    let trace = t.trace().re;
                    if trace.abs() > 1e-10 {
                        return Err(field_err("tangent", format!("must be traceless, trace is {trace:e}")));
                    }
                    expect_dim("tangent", t, r.dim())?;
                }
            }
            Command::Geodesic => {
                let (a, b) = (self.require("rho1", rho1.as_ref())?, self.require("rho2", rho2.as_ref())?);
                if a.dim() != b.dim() {
                    return Err(field_err("rho2", format!("dimension {} does not match rho1 ({})", b.dim(), a.dim())));
                }
                if a.rank() != b.rank() {
                    return Err(field_err("rho2", format!("rank {} does not match rho1 ({})", b.rank(), a.rank())));
                }
            }
            Command::Sta => {
                self.require("h0_offset", h0.as_ref())?;
            }
            Command::ReproduceQubit | Command::ReproduceQutrit => {}
        }

        Ok(Inputs {
            rho0,
            rho1,
            rho2,
            generator,
            tangent,
            h0,
            beta,
            dt,
            horizon,
            rank_tol,
            cluster_tol,
            r_scale,
        })
    }
}

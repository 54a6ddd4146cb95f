//! Instance and solution files (JSON, `format_version` 1) and trace CSVs.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use gip_core::solver::{RatioReport, RescaleEvent, SolverConfig, SolverReport, TraceRow};
use gip_core::{
    build_grid, DensitySpec, DirectionSet, DiscreteMeasure, DualPolytope, GridScheme, QuadratureMeasure, TotalMass, UnitVector,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

fn format_version() -> u32 {
    FORMAT_VERSION
}

/// A file problem with the JSON path (or field) it concerns.
#[derive(Debug, Clone, PartialEq)]
pub struct LocatedError {
    pub file: PathBuf,
    pub location: String,
    pub reason: String,
}

impl fmt::Display for LocatedError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.location.is_empty() || self.location == "." {
            write!(f, "{}: {}", self.file.display(), self.reason)
        } else {
            write!(f, "{}: at {}: {}", self.file.display(), self.location, self.reason)
        }
    }
}

impl std::error::Error for LocatedError {}

fn located(file: &Path, location: impl Into<String>, reason: impl fmt::Display) -> LocatedError {
    LocatedError { file: file.to_path_buf(), location: location.into(), reason: reason.to_string() }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, LocatedError> {
    let text = fs::read_to_string(path).map_err(|e| located(path, "", e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| located(path, e.path().to_string(), e.inner()))
}

fn check_version(path: &Path, version: u32) -> Result<(), LocatedError> {
    if version != FORMAT_VERSION {
        return Err(located(path, "format_version", format!("unsupported version {version}, expected {FORMAT_VERSION}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuSpec {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub scheme: GridScheme,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub dimension: usize,
    pub mu: MuSpec,
    pub lambda: DensitySpec,
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub normalize_lambda: bool,
}

/// A parsed instance ready for the solver.
#[derive(Debug, Clone)]
pub struct Instance {
    pub file: InstanceFile,
    pub mu: DiscreteMeasure,
    pub lam: QuadratureMeasure,
}

impl InstanceFile {
    pub fn read(path: &Path) -> Result<Self, LocatedError> {
        read_json(path)
    }

    /// Build the measures, with `quadrature_count` overriding the file's count.
    pub fn build_with_count(&self, path: &Path, quadrature_count: usize) -> Result<Instance, LocatedError> {
        check_version(path, self.format_version)?;
        let n = self.dimension;
        if !(n == 2 || n == 3) {
            return Err(located(path, "dimension", format!("dimension must be 2 or 3, got {n}")));
        }
        let mut atoms = Vec::with_capacity(self.mu.atoms.len());
        for (i, a) in self.mu.atoms.iter().enumerate() {
            if a.len() != n {
                return Err(located(path, format!("mu.atoms[{i}]"), format!("expected {n} coordinates, got {}", a.len())));
            }
            atoms.push(UnitVector::new(a.clone()).map_err(|e| located(path, format!("mu.atoms[{i}]"), e))?);
        }
        if self.mu.weights.len() != atoms.len() {
            return Err(located(path, "mu.weights", format!("{} weights for {} atoms", self.mu.weights.len(), atoms.len())));
        }
        let dirs = DirectionSet::new(atoms).map_err(|e| located(path, "mu.atoms", e))?;
        let mu = DiscreteMeasure::new(dirs, self.mu.weights.clone()).map_err(|e| located(path, "mu", e))?;
        let grid = build_grid(n, quadrature_count, self.quadrature.scheme).map_err(|e| located(path, "quadrature", e))?;
        let mut lam = QuadratureMeasure::from_spec(Arc::new(grid), &self.lambda).map_err(|e| located(path, "lambda", e))?;
        if self.normalize_lambda {
            lam = lam.normalize_to(mu.total_mass()).map_err(|e| located(path, "lambda", e))?;
        }
        Ok(Instance { file: self.clone(), mu, lam })
    }

    pub fn build(&self, path: &Path) -> Result<Instance, LocatedError> {
        self.build_with_count(path, self.quadrature.count)
    }
}

pub fn read_instance(path: &Path) -> Result<Instance, LocatedError> {
    InstanceFile::read(path)?.build(path)
}

/// Outcome of the radius-ratio loop, when it was run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub k: usize,
    pub gamma: f64,
    pub sin_alpha: f64,
    pub ratio: f64,
    pub bound_stated: f64,
    pub bound_derived: f64,
    pub prefix_condition: bool,
    pub events: Vec<RescaleEvent>,
    pub failure: Option<String>,
}

impl From<&RatioReport> for RatioSummary {
    fn from(r: &RatioReport) -> Self {
        Self {
            k: r.k,
            gamma: r.gamma,
            sin_alpha: r.sin_alpha,
            ratio: r.ratio,
            bound_stated: r.bound_stated,
            bound_derived: r.bound_derived,
            prefix_condition: r.prefix_condition,
            events: r.events.clone(),
            failure: r.failure.clone(),
        }
    }
}

/// Everything outside this block is a deterministic function of the inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub created: String,
}

impl Metadata {
    pub fn now() -> Self {
        Self {
            tool: concat!("gip ", env!("CARGO_PKG_VERSION")).to_string(),
            created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub format_version: u32,
    pub dimension: usize,
    pub directions: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    /// `1/α_i = ρ_P(v_i)`.
    pub betas: Vec<f64>,
    pub residual: f64,
    pub phi: f64,
    pub radii_ratio: f64,
    pub uniform_alpha: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub cell_masses: Vec<f64>,
    pub rescale_events: Vec<RescaleEvent>,
    #[serde(default)]
    pub ratio_loop: Option<RatioSummary>,
    pub config: SolverConfig,
    pub metadata: Metadata,
}

impl SolutionFile {
    pub fn from_report(report: &SolverReport, config: &SolverConfig, metadata: Metadata) -> Self {
        let p = &report.final_p;
        Self {
            format_version: FORMAT_VERSION,
            dimension: p.dim(),
            directions: p.directions().iter().map(|v| v.coords().to_vec()).collect(),
            alphas: p.alphas().to_vec(),
            betas: p.alphas().iter().map(|a| 1.0 / a).collect(),
            residual: report.residual_inf,
            phi: report.phi.phi,
            radii_ratio: report.radii_ratio,
            uniform_alpha: report.uniform_alpha_used,
            converged: report.converged,
            iterations: report.iterations,
            cell_masses: report.cell_masses.clone(),
            rescale_events: report.rescale_events.clone(),
            ratio_loop: None,
            config: config.clone(),
            metadata,
        }
    }

    pub fn read(path: &Path) -> Result<Self, LocatedError> {
        let s: Self = read_json(path)?;
        check_version(path, s.format_version)?;
        if s.alphas.len() != s.directions.len() || s.betas.len() != s.alphas.len() {
            return Err(located(path, "alphas", "alphas, betas and directions differ in length"));
        }
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("solution files serialize");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.to_json())
    }

    pub fn polytope(&self) -> gip_core::Result<DualPolytope> {
        let dirs = self.directions.iter().map(|d| UnitVector::new(d.clone())).collect::<gip_core::Result<Vec<_>>>()?;
        DualPolytope::canonical_from(Arc::new(DirectionSet::new(dirs)?), self.alphas.clone())
    }
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

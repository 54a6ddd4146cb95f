//! The two measures of a problem instance: a discrete target `μ = Σ μ_i δ_{v_i}`
//! and an absolutely continuous `λ` represented by density samples on a
//! quadrature grid.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GipError, Result};
use crate::par;
use crate::sphere::{dot, witness_for, DirectionSet, QuadratureGrid, UnitVector};

/// Anything with a finite total mass.
pub trait TotalMass {
    fn total_mass(&self) -> f64;
}

pub fn total_mass<M: TotalMass + ?Sized>(meas: &M) -> f64 {
    meas.total_mass()
}

/// `μ = Σ μ_i δ_{v_i}` with positive weights on atoms not contained in any
/// closed hemisphere.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    atoms: DirectionSet,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(atoms: DirectionSet, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(GipError::invalid(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(GipError::invalid(format!("weight {i} must be positive and finite")));
        }
        let n = atoms.dim();
        if atoms.len() < n + 1 {
            return Err(GipError::invalid(format!(
                "need at least {} atoms in dimension {n}, got {}",
                n + 1,
                atoms.len()
            )));
        }
        if witness_for(atoms.as_slice())?.is_some() {
            return Err(GipError::HemisphereContained);
        }
        Ok(Self { atoms, weights })
    }

    pub fn atoms(&self) -> &DirectionSet {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms.dim()
    }

    /// `μ` of the atoms with the given indices.
    pub fn mass_of(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.weights[i]).sum()
    }
}

impl TotalMass for DiscreteMeasure {
    fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// One spherical cap `{u : u·center ≥ cos radius}` carrying a constant density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cap {
    pub center: UnitVector,
    /// Angular radius in radians.
    pub radius: f64,
    pub value: f64,
}

impl Cap {
    pub fn contains(&self, u: &[f64]) -> bool {
        dot(u, self.center.coords()) >= self.radius.cos()
    }
}

/// How the density of `λ` is specified in instance files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DensitySpec {
    /// Constant density (default 1).
    Uniform {
        #[serde(default = "one")]
        value: f64,
    },
    /// One value per grid node, in node order.
    Table { values: Vec<f64> },
    /// Sum of cap indicators times their values, plus a background constant.
    Caps {
        caps: Vec<Cap>,
        #[serde(default)]
        background: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl DensitySpec {
    /// Pointwise density where it is defined without reference to a grid.
    pub fn eval(&self, u: &[f64]) -> Option<f64> {
        match self {
            Self::Uniform { value } => Some(*value),
            Self::Table { .. } => None,
            Self::Caps { caps, background } => Some(
                background + caps.iter().filter(|c| c.contains(u)).map(|c| c.value).sum::<f64>(),
            ),
        }
    }

    /// Sample on `grid`.
    pub fn sample(&self, grid: &QuadratureGrid) -> Result<Vec<f64>> {
        match self {
            Self::Table { values } => {
                if values.len() != grid.len() {
                    return Err(GipError::invalid(format!(
                        "density table has {} values for {} grid nodes",
                        values.len(),
                        grid.len()
                    )));
                }
                Ok(values.clone())
            }
            Self::Caps { caps, .. } => {
                if let Some(c) = caps.iter().find(|c| c.center.dim() != grid.dim()) {
                    return Err(GipError::DimensionMismatch { expected: grid.dim(), found: c.center.dim() });
                }
                Ok((0..grid.len()).map(|k| self.eval(grid.node(k)).unwrap_or(0.0)).collect())
            }
            Self::Uniform { .. } => Ok((0..grid.len()).map(|k| self.eval(grid.node(k)).unwrap_or(0.0)).collect()),
        }
    }
}

/// `λ` as nonnegative density samples on a shared quadrature grid.
#[derive(Debug, Clone)]
pub struct QuadratureMeasure {
    grid: Arc<QuadratureGrid>,
    density: Vec<f64>,
    node_mass: Vec<f64>,
    total: f64,
    eps_quad: f64,
}

impl QuadratureMeasure {
    pub fn new(grid: Arc<QuadratureGrid>, density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.len() {
            return Err(GipError::invalid(format!(
                "{} density values for {} grid nodes",
                density.len(),
                grid.len()
            )));
        }
        if let Some(k) = density.iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(GipError::invalid(format!("density at node {k} must be finite and nonnegative")));
        }
        let node_mass: Vec<f64> = grid.weights().iter().zip(&density).map(|(w, d)| w * d).collect();
        let total = par::sum_indexed(node_mass.len(), |k| node_mass[k]);
        if !(total.is_finite() && total > 0.0) {
            return Err(GipError::invalid("lambda has zero total mass"));
        }
        let eps_quad = Self::estimate_eps(&grid, &density);
        Ok(Self { grid, density, node_mass, total, eps_quad })
    }

    /// Uniform density `value` on `grid`.
    pub fn uniform(grid: Arc<QuadratureGrid>, value: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![value; n])
    }

    pub fn from_spec(grid: Arc<QuadratureGrid>, spec: &DensitySpec) -> Result<Self> {
        let density = spec.sample(&grid)?;
        Self::new(grid, density)
    }

    /// Grid-resolution error bound shared by every mass comparison:
    /// max density × node spacing × a boundary allowance (16 endpoints on S^1,
    /// two great circles of boundary length on S^2).
    fn estimate_eps(grid: &QuadratureGrid, density: &[f64]) -> f64 {
        let max_density = density.iter().cloned().fold(0.0, f64::max);
        let boundary = match grid.dim() {
            2 => 16.0,
            _ => 4.0 * PI,
        };
        max_density * grid.spacing() * boundary
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn shared_grid(&self) -> Arc<QuadratureGrid> {
        Arc::clone(&self.grid)
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// `w_k · density_k` per node.
    pub fn node_mass(&self) -> &[f64] {
        &self.node_mass
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// The quadrature tolerance ε_quad used for all measure comparisons.
    pub fn eps_quad(&self) -> f64 {
        self.eps_quad
    }

    pub fn with_eps_quad(mut self, eps: f64) -> Self {
        self.eps_quad = eps;
        self
    }

    /// Rescale the density so the total mass equals `target_mass`.
    pub fn normalize_to(&self, target_mass: f64) -> Result<Self> {
        if !(target_mass.is_finite() && target_mass > 0.0) {
            return Err(GipError::invalid("target mass must be positive"));
        }
        let factor = target_mass / self.total;
        let density = self.density.iter().map(|d| d * factor).collect();
        Self::new(Arc::clone(&self.grid), density)
    }

    /// `λ(ω_angle)`: mass of the nodes strictly inside the outer parallel set.
    pub fn parallel_set_mass(&self, omega: &DirectionSet, angle: f64) -> Result<f64> {
        if !(angle > 0.0 && angle < PI) {
            return Err(GipError::invalid(format!("parallel-set angle {angle} outside (0, π)")));
        }
        if omega.dim() != self.dim() {
            return Err(GipError::DimensionMismatch { expected: self.dim(), found: omega.dim() });
        }
        Ok(self.parallel_mass_raw(omega.as_slice(), angle.cos()))
    }

    /// Mass of nodes `u` with `max_v u·v > threshold`.
    pub(crate) fn parallel_mass_raw(&self, omega: &[UnitVector], threshold: f64) -> f64 {
        let grid = &self.grid;
        par::sum_indexed(grid.len(), |k| {
            let u = grid.node(k);
            let best = omega.iter().map(|v| dot(u, v.coords())).fold(f64::NEG_INFINITY, f64::max);
            if best > threshold {
                self.node_mass[k]
            } else {
                0.0
            }
        })
    }

    /// `λ(ω*)`: mass of nodes with `u·v ≤ 0` for every `v ∈ ω`.
    pub fn polar_set_mass(&self, omega: &[UnitVector]) -> f64 {
        let grid = &self.grid;
        par::sum_indexed(grid.len(), |k| {
            let u = grid.node(k);
            if omega.iter().all(|v| dot(u, v.coords()) <= crate::sphere::POLAR_TOL) {
                self.node_mass[k]
            } else {
                0.0
            }
        })
    }
}

impl TotalMass for QuadratureMeasure {
    fn total_mass(&self) -> f64 {
        self.total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{build_grid, GridScheme};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn circle(n: usize) -> Arc<QuadratureGrid> {
        Arc::new(build_grid(2, n, GridScheme::UniformAngles).unwrap())
    }

    fn square_atoms() -> DirectionSet {
        DirectionSet::from_angles(&[0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2]).unwrap()
    }

    #[test]
    fn discrete_mass() {
        let mu = DiscreteMeasure::new(square_atoms(), vec![FRAC_PI_2; 4]).unwrap();
        assert!((total_mass(&mu) - 2.0 * PI).abs() < 1e-15);
        assert_eq!(mu.mass_of(&[0, 2]), PI);
    }

    #[test]
    fn discrete_rejects_bad_input() {
        let half = DirectionSet::from_angles(&[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(
            DiscreteMeasure::new(half, vec![1.0; 3]).unwrap_err(),
            GipError::HemisphereContained
        );
        assert!(DiscreteMeasure::new(square_atoms(), vec![1.0, 1.0, 0.0, 1.0]).is_err());
        assert!(DiscreteMeasure::new(square_atoms(), vec![1.0; 3]).is_err());
        let two = DirectionSet::from_angles(&[0.0, PI]).unwrap();
        assert!(DiscreteMeasure::new(two, vec![1.0; 2]).is_err());
    }

    #[test]
    fn uniform_circle_mass() {
        let lam = QuadratureMeasure::uniform(circle(1000), 1.0).unwrap();
        assert!((total_mass(&lam) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn odd_density_integrates_away() {
        let grid = circle(4096);
        let density = (0..grid.len()).map(|k| 1.0 + grid.node(k)[0]).collect();
        let lam = QuadratureMeasure::new(grid, density).unwrap();
        assert!((lam.total_mass() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn normalization() {
        let lam = QuadratureMeasure::uniform(circle(1000), 1.0).unwrap();
        let unit = lam.normalize_to(1.0).unwrap();
        assert!(unit.density().iter().all(|d| (d - 1.0 / (2.0 * PI)).abs() < 1e-12));
        assert!((unit.total_mass() - 1.0).abs() < 1e-12);
        let same = lam.normalize_to(lam.total_mass()).unwrap();
        assert_eq!(same.density(), lam.density());
        let odd = QuadratureMeasure::uniform(circle(1000), 3.7 / (2.0 * PI)).unwrap();
        let scaled = odd.normalize_to(2.0 * PI).unwrap();
        assert!((scaled.total_mass() - 2.0 * PI).abs() < 1e-12 * 2.0 * PI);
        assert!(lam.normalize_to(0.0).is_err());
    }

    #[test]
    fn zero_mass_rejected() {
        assert!(QuadratureMeasure::uniform(circle(64), 0.0).is_err());
    }

    #[test]
    fn parallel_masses_on_circle() {
        let lam = QuadratureMeasure::uniform(circle(100_000), 1.0).unwrap();
        let eps = lam.eps_quad();
        let one = DirectionSet::from_angles(&[0.0]).unwrap();
        assert!((lam.parallel_set_mass(&one, FRAC_PI_2).unwrap() - PI).abs() <= eps);
        let two = DirectionSet::from_angles(&[0.0, FRAC_PI_2]).unwrap();
        assert!((lam.parallel_set_mass(&two, FRAC_PI_4).unwrap() - PI).abs() <= eps);
        let near_pi = lam.parallel_set_mass(&one, PI - 1e-9).unwrap();
        assert!((near_pi - 2.0 * PI).abs() <= eps);
        assert!(lam.parallel_set_mass(&one, 0.0).is_err());
    }

    #[test]
    fn caps_density_sampling() {
        let spec = DensitySpec::Caps {
            caps: vec![Cap { center: UnitVector::from_angle(FRAC_PI_2), radius: 0.3, value: 2.0 }],
            background: 0.5,
        };
        let grid = circle(20_000);
        let lam = QuadratureMeasure::from_spec(grid, &spec).unwrap();
        let expected = 0.5 * 2.0 * PI + 2.0 * 0.6;
        assert!((lam.total_mass() - expected).abs() < 1e-3);
    }

    #[test]
    fn table_length_checked() {
        let spec = DensitySpec::Table { values: vec![1.0; 10] };
        assert!(QuadratureMeasure::from_spec(circle(64), &spec).is_err());
    }
}

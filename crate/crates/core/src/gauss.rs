//! Radial Gauss image partition, the functional Φ and its supergradient.
//!
//! Each grid node `u` is assigned to the facet normal attaining
//! `ρ_{P*}(u) = min α_i/(u·v_i)`, so the cell of atom `i` is the radial
//! Gauss image of `v_i` and its λ-mass is `λ(P, {v_i})`.

use serde::{Deserialize, Serialize};

use crate::error::{GipError, Result};
use crate::measures::{DiscreteMeasure, QuadratureMeasure, TotalMass};
use crate::par;
use crate::polytope::{DualPolytope, IndexSet};
use crate::sphere::DirectionSet;

/// Marker for nodes seen by no direction (only possible for non-spanning sets).
pub const UNASSIGNED: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussPartition {
    /// Per grid node, the index of the owning atom.
    pub assignment: Vec<u32>,
    /// `g_i`: λ-mass of each cell.
    pub cell_masses: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub phi: f64,
    pub mu_part: f64,
    pub lambda_part: f64,
}

/// Everything one pass over the grid yields for a given α.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: FunctionalValue,
    pub cell_masses: Vec<f64>,
    /// `g - μ`.
    pub supergradient: Vec<f64>,
    /// `‖g - μ‖∞`.
    pub residual_inf: f64,
}

/// Both sides of the pushforward identity `∫f dλ(P,·) = ∫f(α_P(u)) dλ(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pushforward {
    pub by_cells: f64,
    pub by_nodes: f64,
}

struct Sweep {
    cell_masses: Vec<f64>,
    lambda_part: f64,
    assignment: Option<Vec<u32>>,
}

fn check_dims(dirs: &DirectionSet, lam: &QuadratureMeasure) -> Result<()> {
    if dirs.dim() != lam.dim() {
        return Err(GipError::DimensionMismatch { expected: lam.dim(), found: dirs.dim() });
    }
    Ok(())
}

fn check_mu(dirs: &DirectionSet, mu: &DiscreteMeasure) -> Result<()> {
    if mu.len() != dirs.len() || mu.dim() != dirs.dim() {
        return Err(GipError::invalid(format!(
            "measure has {} atoms in R^{}, polytope has {} normals in R^{}",
            mu.len(),
            mu.dim(),
            dirs.len(),
            dirs.dim()
        )));
    }
    Ok(())
}

fn sweep(dirs: &DirectionSet, alphas: &[f64], lam: &QuadratureMeasure, keep_assignment: bool) -> Sweep {
    let n = dirs.dim();
    let m = dirs.len();
    let flat: Vec<f64> = dirs.iter().flat_map(|v| v.coords().iter().copied()).collect();
    let grid = lam.grid();
    let node_mass = lam.node_mass();
    let parts = par::map_chunks(grid.len(), |range| {
        let mut cells = vec![0.0; m];
        let mut log_sum = 0.0;
        let mut assign = if keep_assignment { Vec::with_capacity(range.len()) } else { Vec::new() };
        for k in range {
            let u = grid.node(k);
            let mut best = f64::INFINITY;
            let mut arg = UNASSIGNED;
            for (i, a) in alphas.iter().enumerate() {
                let v = &flat[i * n..(i + 1) * n];
                let c: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
                if c > 0.0 {
                    let r = a * (1.0 / c);
                    if r < best {
                        best = r;
                        arg = i as u32;
                    }
                }
            }
            let w = node_mass[k];
            if arg != UNASSIGNED {
                cells[arg as usize] += w;
                if w != 0.0 {
                    log_sum += w * best.ln();
                }
            }
            if keep_assignment {
                assign.push(arg);
            }
        }
        (cells, log_sum, assign)
    });
    let mut cell_masses = vec![0.0; m];
    let mut lambda_part = 0.0;
    let mut assignment = keep_assignment.then(|| Vec::with_capacity(grid.len()));
    for (cells, log_sum, assign) in parts {
        cell_masses.iter_mut().zip(&cells).for_each(|(t, c)| *t += c);
        lambda_part += log_sum;
        if let Some(a) = assignment.as_mut() {
            a.extend(assign);
        }
    }
    Sweep { cell_masses, lambda_part, assignment }
}

/// Cell assignment and cell masses of the radial Gauss image of `p`.
pub fn compute_partition(p: &DualPolytope, lam: &QuadratureMeasure) -> Result<GaussPartition> {
    check_dims(p.directions(), lam)?;
    let s = sweep(p.directions(), p.alphas(), lam, true);
    Ok(GaussPartition { assignment: s.assignment.unwrap_or_default(), cell_masses: s.cell_masses })
}

fn mu_part(weights: &[f64], alphas: &[f64]) -> f64 {
    -weights.iter().zip(alphas).map(|(w, a)| w * a.ln()).sum::<f64>()
}

/// `Φ(P, μ, λ) = -Σ μ_i log α_i + ∫ log ρ_{P*} dλ` at canonical `p`.
pub fn phi(p: &DualPolytope, mu: &DiscreteMeasure, lam: &QuadratureMeasure) -> Result<FunctionalValue> {
    Ok(evaluate(p, mu, lam)?.value)
}

/// Φ, cell masses and supergradient from a single grid pass.
pub fn evaluate(p: &DualPolytope, mu: &DiscreteMeasure, lam: &QuadratureMeasure) -> Result<Evaluation> {
    if !p.is_canonical() {
        return Err(GipError::NotCanonical);
    }
    check_mu(p.directions(), mu)?;
    check_dims(p.directions(), lam)?;
    Ok(evaluate_raw(p.directions(), p.alphas(), mu.weights(), lam))
}

pub(crate) fn evaluate_raw(dirs: &DirectionSet, alphas: &[f64], weights: &[f64], lam: &QuadratureMeasure) -> Evaluation {
    let s = sweep(dirs, alphas, lam, false);
    let mu_part = mu_part(weights, alphas);
    let supergradient: Vec<f64> = s.cell_masses.iter().zip(weights).map(|(g, w)| g - w).collect();
    let residual_inf = supergradient.iter().fold(0.0, |acc: f64, x| acc.max(x.abs()));
    Evaluation {
        value: FunctionalValue { phi: mu_part + s.lambda_part, mu_part, lambda_part: s.lambda_part },
        cell_masses: s.cell_masses,
        supergradient,
        residual_inf,
    }
}

/// `F(t) = -Σ μ_i t_i + Σ_k w_k min_{i: u_k·v_i>0} (t_i - log u_k·v_i)`, the
/// concave surrogate of Φ in log coordinates. Defined for any real `t`.
pub fn surrogate_objective(t: &[f64], mu: &DiscreteMeasure, lam: &QuadratureMeasure, dirs: &DirectionSet) -> Result<f64> {
    check_mu(dirs, mu)?;
    check_dims(dirs, lam)?;
    if t.len() != dirs.len() {
        return Err(GipError::invalid(format!("{} log-coefficients for {} directions", t.len(), dirs.len())));
    }
    let alphas: Vec<f64> = t.iter().map(|x| x.exp()).collect();
    let s = sweep(dirs, &alphas, lam, false);
    let linear: f64 = mu.weights().iter().zip(t).map(|(w, x)| w * x).sum();
    Ok(s.lambda_part - linear)
}

/// `g - μ`, a supergradient of `F` at `t = log α` (ascent direction).
pub fn subgradient(p: &DualPolytope, mu: &DiscreteMeasure, lam: &QuadratureMeasure) -> Result<Vec<f64>> {
    Ok(evaluate(p, mu, lam)?.supergradient)
}

/// Integrate `f` (given per atom index) against `λ(P,·)` two ways: summing over
/// cells, and summing `f(α_P(u))` over grid nodes.
pub fn pushforward_integral<F>(p: &DualPolytope, lam: &QuadratureMeasure, f: F) -> Result<Pushforward>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    if !p.is_canonical() {
        return Err(GipError::NotCanonical);
    }
    let part = compute_partition(p, lam)?;
    let values: Vec<f64> = (0..p.len()).map(&f).collect();
    let by_cells = part.cell_masses.iter().zip(&values).map(|(g, v)| g * v).sum();
    let node_mass = lam.node_mass();
    let by_nodes = par::sum_indexed(part.assignment.len(), |k| match part.assignment[k] {
        UNASSIGNED => 0.0,
        i => node_mass[k] * values[i as usize],
    });
    Ok(Pushforward { by_cells, by_nodes })
}

/// Nodes `u` with `max_{i∉I} u·v_i > U*/L` (the outer parallel set of the
/// complement atoms at angle `arccos(U*/L)`) whose owning atom lies in `I`.
/// Requires `L > U*`; the count is zero whenever the partition is correct.
pub fn inclusion_violations(p: &DualPolytope, lam: &QuadratureMeasure, set: &IndexSet) -> Result<usize> {
    let stats = p.extremal_stats(set)?;
    if !(stats.lower > stats.upper_star) {
        return Err(GipError::invalid("inclusion needs L > U*"));
    }
    let threshold = stats.upper_star / stats.lower;
    let outside: Vec<&[f64]> = set.complement(p.len()).into_iter().map(|i| p.directions().get(i).coords()).collect();
    let part = compute_partition(p, lam)?;
    let grid = lam.grid();
    let counts = par::map_chunks(grid.len(), |range| {
        range
            .filter(|&k| {
                let u = grid.node(k);
                let near = outside.iter().any(|v| u.iter().zip(*v).map(|(a, b)| a * b).sum::<f64>() > threshold);
                let owner = part.assignment[k];
                near && (owner == UNASSIGNED || set.contains(owner as usize))
            })
            .count()
    });
    Ok(counts.into_iter().sum())
}

impl TotalMass for GaussPartition {
    fn total_mass(&self) -> f64 {
        self.cell_masses.iter().sum()
    }
}

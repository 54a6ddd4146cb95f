//! Independent reference computations for cross-checking the grid pipeline:
//! exact Gauss-image arcs on S¹, dense 1-D integrals of parallel sets, and an
//! exhaustive lattice maximizer of the surrogate objective.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use crate::error::{GipError, Result};
use crate::gauss::{evaluate_raw, FunctionalValue};
use crate::measures::{DensitySpec, DiscreteMeasure, QuadratureMeasure};
use crate::par;
use crate::polytope::DualPolytope;
use crate::sphere::DirectionSet;

/// Largest atom count for the lattice search.
pub const BRUTE_FORCE_MAX_ATOMS: usize = 6;
/// Largest number of lattice points in either pass.
pub const BRUTE_FORCE_BUDGET: u64 = 10_000_000;
/// Points per free coordinate in the refinement pass (10× finer, ±1 coarse step).
const REFINE_POINTS: usize = 21;
const QUAD_TOL: f64 = 1e-12;

fn require_circle(dim: usize) -> Result<()> {
    if dim != 2 {
        return Err(GipError::DimensionMismatch { expected: 2, found: dim });
    }
    Ok(())
}

/// A density on S¹ as a function of the angle, smooth between breakpoints.
#[derive(Clone)]
pub struct CircleDensity {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    breakpoints: Vec<f64>,
}

impl std::fmt::Debug for CircleDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CircleDensity").field("breakpoints", &self.breakpoints).finish()
    }
}

impl CircleDensity {
    /// `f` must be smooth on each arc between consecutive `breakpoints`.
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, breakpoints: Vec<f64>) -> Self {
        let mut breakpoints: Vec<f64> = breakpoints.into_iter().map(|b| b.rem_euclid(TAU)).collect();
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        Self { f: Arc::new(f), breakpoints }
    }

    pub fn uniform(value: f64) -> Self {
        Self::new(move |_| value, Vec::new())
    }

    /// Analytic densities only (a node table has no off-grid values).
    pub fn from_spec(spec: &DensitySpec) -> Result<Self> {
        match spec {
            DensitySpec::Uniform { value } => Ok(Self::uniform(*value)),
            DensitySpec::Table { .. } => Err(GipError::invalid("tabulated density has no analytic form")),
            DensitySpec::Caps { caps, .. } => {
                for c in caps {
                    require_circle(c.center.dim())?;
                }
                let breakpoints = caps
                    .iter()
                    .flat_map(|c| {
                        let a = c.center.angle();
                        [a - c.radius, a + c.radius]
                    })
                    .collect();
                let spec = spec.clone();
                Ok(Self::new(move |t| spec.eval(&[t.cos(), t.sin()]).unwrap_or(0.0), breakpoints))
            }
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        (self.f)(theta)
    }

    /// `∫_a^b g(θ) f(θ) dθ` for `a ≤ b ≤ a + 2π`, split at breakpoints.
    pub fn integrate_with(&self, g: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let mut cuts = vec![a];
        for &p in &self.breakpoints {
            let mut x = p + TAU * ((a - p) / TAU).ceil();
            while x < b {
                if x > a {
                    cuts.push(x);
                }
                x += TAU;
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.push(b);
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| quadrature::integrate(|t| g(t) * (self.f)(t), w[0], w[1], QUAD_TOL).integral)
            .sum()
    }

    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        self.integrate_with(|_| 1.0, a, b)
    }
}

/// Exact Gauss-image cells of a polygon, as angular intervals within `[0, 2π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcDecomposition {
    pub cells: Vec<Vec<(f64, f64)>>,
}

impl ArcDecomposition {
    pub fn lengths(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.iter().map(|(a, b)| b - a).sum()).collect()
    }

    pub fn masses(&self, density: &CircleDensity) -> Vec<f64> {
        self.cells
            .iter()
            .map(|c| c.iter().map(|&(a, b)| density.integrate(a, b)).sum())
            .collect()
    }
}

/// Cell boundaries solve `α_i/cos(θ-θ_i) = α_j/cos(θ-θ_j)` or lie where an
/// atom stops seeing `θ`; the owner of each elementary arc is read at its
/// midpoint.
pub fn arc_cells(p: &DualPolytope) -> Result<ArcDecomposition> {
    require_circle(p.dim())?;
    if !p.is_canonical() {
        return Err(GipError::NotCanonical);
    }
    let thetas: Vec<f64> = p.directions().iter().map(|v| v.angle()).collect();
    let alphas = p.alphas();
    let mut cuts = vec![0.0, TAU];
    for i in 0..p.len() {
        cuts.push(thetas[i] + PI / 2.0);
        cuts.push(thetas[i] - PI / 2.0);
        for j in i + 1..p.len() {
            let a = alphas[i] * thetas[j].cos() - alphas[j] * thetas[i].cos();
            let b = alphas[i] * thetas[j].sin() - alphas[j] * thetas[i].sin();
            let t0 = a.atan2(-b);
            cuts.push(t0);
            cuts.push(t0 + PI);
        }
    }
    let mut cuts: Vec<f64> = cuts
        .into_iter()
        .map(|c| if c == TAU { c } else { c.rem_euclid(TAU) })
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    let mut cells: Vec<Vec<(f64, f64)>> = vec![Vec::new(); p.len()];
    let mut last: Option<usize> = None;
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let (_, owner) = p.rho_polar_raw(&[mid.cos(), mid.sin()]);
        match (last, cells[owner].last_mut()) {
            (Some(prev), Some(arc)) if prev == owner => arc.1 = w[1],
            _ => cells[owner].push((w[0], w[1])),
        }
        last = Some(owner);
    }
    Ok(ArcDecomposition { cells })
}

/// `Φ` by 1-D quadrature over the exact cells.
pub fn arc_phi(p: &DualPolytope, mu_weights: &[f64], density: &CircleDensity) -> Result<FunctionalValue> {
    let arcs = arc_cells(p)?;
    if mu_weights.len() != p.len() {
        return Err(GipError::invalid("one weight per atom expected"));
    }
    let mut lambda_part = 0.0;
    for (i, cell) in arcs.cells.iter().enumerate() {
        let (ai, ti) = (p.alphas()[i], p.directions().get(i).angle());
        for &(a, b) in cell {
            lambda_part += density.integrate_with(|t| (ai / (t - ti).cos()).ln(), a, b);
        }
    }
    let mu_part = -mu_weights.iter().zip(p.alphas()).map(|(w, a)| w * a.ln()).sum::<f64>();
    Ok(FunctionalValue { phi: mu_part + lambda_part, mu_part, lambda_part })
}

/// `λ(ω_angle)` on S¹ as an integral over the union of open arcs.
pub fn dense_parallel_set_mass(density: &CircleDensity, omega: &DirectionSet, angle: f64) -> Result<f64> {
    require_circle(omega.dim())?;
    if !(angle > 0.0 && angle < PI) {
        return Err(GipError::invalid(format!("parallel-set angle {angle} outside (0, π)")));
    }
    let mut pieces: Vec<(f64, f64)> = Vec::new();
    for v in omega.iter() {
        let a = (v.angle() - angle).rem_euclid(TAU);
        let b = a + 2.0 * angle;
        if b <= TAU {
            pieces.push((a, b));
        } else {
            pieces.push((a, TAU));
            pieces.push((0.0, b - TAU));
        }
    }
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (a, b) in pieces {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    Ok(merged.iter().map(|&(a, b)| density.integrate(a, b)).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    /// Maximizing log-coefficients, `t[0] = 0`.
    pub t: Vec<f64>,
    pub f: f64,
    /// Spacing of the refinement lattice.
    pub fine_spacing: f64,
    /// `‖s‖₁·h/2` for the supergradient `s` at `t`: how much `F` can exceed the
    /// returned value if the maximizer lies within half a fine step.
    pub resolution_bound: f64,
    pub evaluations: u64,
}

fn lattice_size(points: usize, dims: usize) -> Option<u64> {
    (points as u64).checked_pow(dims as u32)
}

/// Best point of `lattice` (lexicographically smallest on ties).
fn search<F>(dims: usize, points: usize, coord: F, eval: &(dyn Fn(&[f64]) -> f64 + Sync)) -> (Vec<f64>, f64)
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let total = points.pow(dims as u32);
    let decode = |mut idx: usize| -> Vec<f64> {
        let mut t = vec![0.0; dims + 1];
        for d in (0..dims).rev() {
            t[d + 1] = coord(d, idx % points);
            idx /= points;
        }
        t
    };
    let bests = par::map_chunks(total, |range| {
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for idx in range {
            let f = eval(&decode(idx));
            if f > best.0 {
                best = (f, idx);
            }
        }
        best
    });
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for b in bests {
        if b.0 > best.0 {
            best = b;
        }
    }
    (decode(best.1), best.0)
}

/// Exhaustive search of `F` over `t ∈ [-w, w]^m` with `t[0]` pinned to zero,
/// then once more on a 10× finer lattice around the best point.
pub fn brute_force_maximize(
    mu: &DiscreteMeasure,
    lam: &QuadratureMeasure,
    box_halfwidth: f64,
    lattice_points_per_dim: usize,
) -> Result<BruteForceResult> {
    let m = mu.len();
    if mu.dim() != lam.dim() {
        return Err(GipError::DimensionMismatch { expected: lam.dim(), found: mu.dim() });
    }
    if m > BRUTE_FORCE_MAX_ATOMS {
        return Err(GipError::Budget(format!("{m} atoms exceed the lattice limit of {BRUTE_FORCE_MAX_ATOMS}")));
    }
    if lattice_points_per_dim < 2 || !(box_halfwidth > 0.0) {
        return Err(GipError::invalid("lattice needs at least 2 points per dimension and a positive box"));
    }
    let dims = m - 1;
    let coarse = lattice_size(lattice_points_per_dim, dims);
    let fine = lattice_size(REFINE_POINTS, dims);
    match (coarse, fine) {
        (Some(c), Some(f)) if c <= BRUTE_FORCE_BUDGET && f <= BRUTE_FORCE_BUDGET => {}
        _ => return Err(GipError::Budget(format!("{lattice_points_per_dim}^{dims} lattice points"))),
    }
    let dirs = mu.atoms();
    let weights = mu.weights();
    let eval = |t: &[f64]| -> f64 {
        let alphas: Vec<f64> = t.iter().map(|x| x.exp()).collect();
        let e = evaluate_raw(dirs, &alphas, weights, lam);
        e.value.lambda_part - weights.iter().zip(t).map(|(w, x)| w * x).sum::<f64>()
    };
    let h = 2.0 * box_halfwidth / (lattice_points_per_dim - 1) as f64;
    let (t0, _) = search(dims, lattice_points_per_dim, |_, j| -box_halfwidth + j as f64 * h, &eval);
    let hf = h / 10.0;
    let half = (REFINE_POINTS / 2) as f64;
    let (t, f) = search(dims, REFINE_POINTS, |d, j| t0[d + 1] + (j as f64 - half) * hf, &eval);
    let alphas: Vec<f64> = t.iter().map(|x| x.exp()).collect();
    let s = evaluate_raw(dirs, &alphas, weights, lam).supergradient;
    Ok(BruteForceResult {
        resolution_bound: s.iter().map(|x| x.abs()).sum::<f64>() * hf / 2.0,
        t,
        f,
        fine_spacing: hf,
        evaluations: coarse.unwrap_or(0) + fine.unwrap_or(0),
    })
}

//! Weak and classical Aleksandrov relations between a discrete μ and a
//! quadrature λ, the uniform weak constant, and the necessity property of
//! Gauss image measures.
//!
//! For discrete μ it is enough to test subsets of atoms that fit in a closed
//! hemisphere. Grid nodes are grouped by the bitmask of atoms they see above a
//! threshold, so every subset query is a sum over a few distinct masks.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GipError, Result};
use crate::gauss::compute_partition;
use crate::lp::{self, Row};
use crate::measures::{DiscreteMeasure, QuadratureMeasure, TotalMass};
use crate::par;
use crate::polytope::{DualPolytope, IndexSet};
use crate::sphere::{dot, witness_for, DirectionSet, UnitVector, POLAR_TOL};

/// Largest atom count for exhaustive subset enumeration.
pub const EXHAUSTIVE_LIMIT: usize = 20;
/// Directions sampled in heuristic mode.
pub const HEURISTIC_SAMPLES: usize = 1000;
/// Largest atom count any mode supports.
pub const MAX_ATOMS: usize = 128;
/// Resolution of the uniform-constant bisection (radians).
pub const ALPHA_RESOLUTION: f64 = 1e-4;
/// Angle subtracted from `π/2 - arccos(r/R)` in the necessity check.
pub const NECESSITY_SLACK: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    /// Decided only up to grid resolution (margin within `[-2ε, -ε)`, or a tie).
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetMode {
    Exhaustive,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WeakOptions {
    /// Permit the sampled-hemisphere family when there are more than
    /// [`EXHAUSTIVE_LIMIT`] atoms.
    pub heuristic: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSlack {
    pub subset: IndexSet,
    /// `λ(ω_{π/2-α}) - μ(ω)` for ω the atoms of `subset`.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakAleksandrovReport {
    pub holds: bool,
    pub verdict: Verdict,
    /// The angle tested.
    pub alpha: f64,
    pub uniform_alpha: Option<f64>,
    pub per_subset: Vec<SubsetSlack>,
    pub masses_balanced: bool,
    /// `μ(S) - λ(S)`.
    pub mass_gap: f64,
    pub min_slack: f64,
    pub eps_quad: f64,
    pub mode: SubsetMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalTerm {
    /// Atoms lying in the test set.
    pub atoms: Vec<usize>,
    pub mu_mass: f64,
    /// λ-mass of the polar set ω*.
    pub lambda_polar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalReport {
    pub holds: bool,
    pub verdict: Verdict,
    pub masses_balanced: bool,
    /// `max_ω μ(ω) + λ(ω*)`, to be compared with `μ(S)`.
    pub max_value: f64,
    pub total: f64,
    pub eps_quad: f64,
    pub terms: Vec<ClassicalTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessityReport {
    pub passes: bool,
    /// `r_P / R_P`.
    pub ratio: f64,
    pub radii_exact: bool,
    /// `π/2 - arccos(r_P/R_P)`.
    pub alpha_bound: f64,
    pub alpha_tested: f64,
    pub uniform_alpha: Option<f64>,
    pub weak: WeakAleksandrovReport,
}

/// Candidate subsets of atoms, as bitmasks.
#[derive(Debug, Clone)]
struct SubsetFamily {
    masks: Vec<u128>,
    mode: SubsetMode,
}

fn bits(mask: u128) -> Vec<usize> {
    (0..128).filter(|&i| mask >> i & 1 == 1).collect()
}

fn family(mu: &DiscreteMeasure, opts: WeakOptions) -> Result<SubsetFamily> {
    let m = mu.len();
    if m > MAX_ATOMS {
        return Err(GipError::SubsetExplosion { atoms: m, cap: MAX_ATOMS });
    }
    if m <= EXHAUSTIVE_LIMIT {
        return Ok(SubsetFamily { masks: hemisphere_subsets(mu.atoms())?, mode: SubsetMode::Exhaustive });
    }
    if !opts.heuristic {
        return Err(GipError::SubsetExplosion { atoms: m, cap: EXHAUSTIVE_LIMIT });
    }
    let n = mu.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut set: BTreeSet<u128> = (0..m).map(|i| 1u128 << i).collect();
    let mut drawn = 0;
    while drawn < HEURISTIC_SAMPLES {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r2 = dot(&x, &x);
        if !(r2 > 1e-6 && r2 <= 1.0) {
            continue;
        }
        drawn += 1;
        let mask = mu
            .atoms()
            .iter()
            .enumerate()
            .filter(|(_, v)| dot(&x, v.coords()) >= 0.0)
            .fold(0u128, |acc, (i, _)| acc | 1 << i);
        if mask != 0 {
            set.insert(mask);
        }
    }
    Ok(SubsetFamily { masks: set.into_iter().collect(), mode: SubsetMode::Heuristic })
}

/// Every nonempty subset of atoms contained in a closed hemisphere. Subsets
/// are grown in index order; a set that fails has no contained supersets.
fn hemisphere_subsets(atoms: &DirectionSet) -> Result<Vec<u128>> {
    fn grow(atoms: &DirectionSet, current: &mut Vec<usize>, out: &mut Vec<u128>) -> Result<()> {
        let start = current.last().map_or(0, |&l| l + 1);
        for j in start..atoms.len() {
            current.push(j);
            let vecs: Vec<UnitVector> = current.iter().map(|&i| atoms.get(i).clone()).collect();
            if current.len() == 1 || witness_for(&vecs)?.is_some() {
                out.push(current.iter().fold(0u128, |acc, &i| acc | 1 << i));
                grow(atoms, current, out)?;
            }
            current.pop();
        }
        Ok(())
    }
    let mut out = Vec::new();
    grow(atoms, &mut Vec::new(), &mut out)?;
    Ok(out)
}

/// λ-mass grouped by the set of atoms each node sees with `u·v_i > threshold`.
fn mask_table(atoms: &DirectionSet, lam: &QuadratureMeasure, threshold: f64) -> Vec<(u128, f64)> {
    let grid = lam.grid();
    let node_mass = lam.node_mass();
    let parts = par::map_chunks(grid.len(), |range| {
        let mut local: BTreeMap<u128, f64> = BTreeMap::new();
        for k in range {
            let u = grid.node(k);
            let mask = atoms
                .iter()
                .enumerate()
                .filter(|(_, v)| dot(u, v.coords()) > threshold)
                .fold(0u128, |acc, (i, _)| acc | 1 << i);
            *local.entry(mask).or_insert(0.0) += node_mass[k];
        }
        local
    });
    let mut merged: BTreeMap<u128, f64> = BTreeMap::new();
    for part in parts {
        for (mask, mass) in part {
            *merged.entry(mask).or_insert(0.0) += mass;
        }
    }
    merged.into_iter().collect()
}

fn mass_hitting(table: &[(u128, f64)], subset: u128) -> f64 {
    table.iter().filter(|(mask, _)| mask & subset != 0).map(|(_, w)| w).sum()
}

fn mass_missing(table: &[(u128, f64)], subset: u128) -> f64 {
    table.iter().filter(|(mask, _)| mask & subset == 0).map(|(_, w)| w).sum()
}

fn check_inputs(mu: &DiscreteMeasure, lam: &QuadratureMeasure) -> Result<()> {
    if mu.dim() != lam.dim() {
        return Err(GipError::DimensionMismatch { expected: lam.dim(), found: mu.dim() });
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < FRAC_PI_2) {
        return Err(GipError::invalid(format!("alpha {alpha} outside (0, π/2)")));
    }
    Ok(())
}

fn weak_at(mu: &DiscreteMeasure, lam: &QuadratureMeasure, alpha: f64, fam: &SubsetFamily) -> WeakAleksandrovReport {
    let eps = lam.eps_quad();
    let table = mask_table(mu.atoms(), lam, (FRAC_PI_2 - alpha).cos());
    let rows: Vec<(u128, f64)> = par::map_items(&fam.masks, |&mask| {
        let mu_mass: f64 = bits(mask).iter().map(|&i| mu.weights()[i]).sum();
        (mask, mass_hitting(&table, mask) - mu_mass)
    });
    let min_slack = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let mass_gap = mu.total_mass() - lam.total_mass();
    let masses_balanced = mass_gap.abs() <= eps;
    let holds = masses_balanced && min_slack >= -eps;
    let verdict = if holds {
        Verdict::Holds
    } else if min_slack < -2.0 * eps || mass_gap.abs() > 2.0 * eps {
        Verdict::Fails
    } else {
        Verdict::Indeterminate
    };
    let per_subset = rows
        .into_iter()
        .map(|(mask, slack)| SubsetSlack { subset: IndexSet::new(bits(mask)).expect("nonempty"), slack })
        .collect();
    WeakAleksandrovReport {
        holds,
        verdict,
        alpha,
        uniform_alpha: holds.then_some(alpha),
        per_subset,
        masses_balanced,
        mass_gap,
        min_slack,
        eps_quad: eps,
        mode: fam.mode,
    }
}

/// Test `μ(ω) ≤ λ(ω_{π/2-α}) + ε` over hemisphere-contained atom subsets and
/// `|μ(S) - λ(S)| ≤ ε`.
pub fn check_weak(mu: &DiscreteMeasure, lam: &QuadratureMeasure, alpha: f64) -> Result<WeakAleksandrovReport> {
    check_weak_with(mu, lam, alpha, WeakOptions::default())
}

pub fn check_weak_with(
    mu: &DiscreteMeasure,
    lam: &QuadratureMeasure,
    alpha: f64,
    opts: WeakOptions,
) -> Result<WeakAleksandrovReport> {
    check_inputs(mu, lam)?;
    check_alpha(alpha)?;
    let fam = family(mu, opts)?;
    Ok(weak_at(mu, lam, alpha, &fam))
}

/// Largest α passing [`check_weak`], by bisection to [`ALPHA_RESOLUTION`].
pub fn find_uniform_alpha(mu: &DiscreteMeasure, lam: &QuadratureMeasure) -> Result<Option<f64>> {
    find_uniform_alpha_with(mu, lam, WeakOptions::default())
}

pub fn find_uniform_alpha_with(mu: &DiscreteMeasure, lam: &QuadratureMeasure, opts: WeakOptions) -> Result<Option<f64>> {
    check_inputs(mu, lam)?;
    let fam = family(mu, opts)?;
    Ok(bisect_alpha(mu, lam, &fam))
}

fn bisect_alpha(mu: &DiscreteMeasure, lam: &QuadratureMeasure, fam: &SubsetFamily) -> Option<f64> {
    let mut lo = ALPHA_RESOLUTION;
    let mut hi = FRAC_PI_2 - ALPHA_RESOLUTION;
    if !weak_at(mu, lam, lo, fam).holds {
        return None;
    }
    if weak_at(mu, lam, hi, fam).holds {
        return Some(hi);
    }
    while hi - lo > ALPHA_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if weak_at(mu, lam, mid, fam).holds {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Find the uniform constant and report the subset slacks there (or at the
/// smallest admissible α when none exists).
pub fn weak_report_at_uniform(
    mu: &DiscreteMeasure,
    lam: &QuadratureMeasure,
    opts: WeakOptions,
) -> Result<WeakAleksandrovReport> {
    check_inputs(mu, lam)?;
    let fam = family(mu, opts)?;
    let found = bisect_alpha(mu, lam, &fam);
    let mut report = weak_at(mu, lam, found.unwrap_or(ALPHA_RESOLUTION), &fam);
    report.uniform_alpha = found;
    Ok(report)
}

/// Atoms of `mu` inside the spherical convex hull of `set`.
fn atoms_in_hull(mu: &DiscreteMeasure, set: &DirectionSet) -> Result<Vec<usize>> {
    let n = mu.dim();
    let k = set.len();
    let bounds = vec![(0.0, 1e6); k];
    let objective = vec![0.0; k];
    let mut inside = Vec::new();
    for (i, v) in mu.atoms().iter().enumerate() {
        if set.iter().any(|w| dot(v.coords(), w.coords()) >= 1.0 - 1e-12) {
            inside.push(i);
            continue;
        }
        let rows: Vec<Row> = (0..n)
            .map(|c| Row::eq(set.iter().map(|w| w.coords()[c]).collect(), v.coords()[c]))
            .collect();
        if lp::maximize(&objective, &bounds, &rows).is_ok() {
            inside.push(i);
        }
    }
    Ok(inside)
}

/// `true` iff masses balance and `μ(ω) + λ(ω*) < μ(S) - ε` for every test
/// set. An empty `convex_test_sets` selects the hemisphere-contained atom
/// subsets.
pub fn check_classical(mu: &DiscreteMeasure, lam: &QuadratureMeasure, convex_test_sets: &[DirectionSet]) -> Result<bool> {
    let sets = (!convex_test_sets.is_empty()).then_some(convex_test_sets);
    Ok(classical_report(mu, lam, sets)?.holds)
}

pub fn classical_report(
    mu: &DiscreteMeasure,
    lam: &QuadratureMeasure,
    convex_test_sets: Option<&[DirectionSet]>,
) -> Result<ClassicalReport> {
    check_inputs(mu, lam)?;
    let eps = lam.eps_quad();
    let total = mu.total_mass();
    let terms: Vec<ClassicalTerm> = match convex_test_sets {
        None => {
            let fam = family(mu, WeakOptions::default())?;
            let table = mask_table(mu.atoms(), lam, POLAR_TOL);
            par::map_items(&fam.masks, |&mask| {
                let atoms = bits(mask);
                ClassicalTerm {
                    mu_mass: atoms.iter().map(|&i| mu.weights()[i]).sum(),
                    lambda_polar: mass_missing(&table, mask),
                    atoms,
                }
            })
        }
        Some(sets) => {
            let mut out = Vec::with_capacity(sets.len());
            for (j, set) in sets.iter().enumerate() {
                if set.dim() != mu.dim() {
                    return Err(GipError::DimensionMismatch { expected: mu.dim(), found: set.dim() });
                }
                if witness_for(set.as_slice())?.is_none() {
                    return Err(GipError::invalid(format!("test set {j} is not contained in a closed hemisphere")));
                }
                let atoms = atoms_in_hull(mu, set)?;
                out.push(ClassicalTerm {
                    mu_mass: mu.mass_of(&atoms),
                    lambda_polar: lam.polar_set_mass(set.as_slice()),
                    atoms,
                });
            }
            out
        }
    };
    let max_value = terms.iter().map(|t| t.mu_mass + t.lambda_polar).fold(f64::NEG_INFINITY, f64::max);
    let masses_balanced = (total - lam.total_mass()).abs() <= eps;
    let holds = masses_balanced && max_value < total - eps;
    let verdict = if holds {
        Verdict::Holds
    } else if !masses_balanced || max_value > total + eps {
        Verdict::Fails
    } else {
        Verdict::Indeterminate
    };
    Ok(ClassicalReport { holds, verdict, masses_balanced, max_value, total, eps_quad: eps, terms })
}

/// The Gauss image measure `λ(P,·)` as a discrete measure (atoms whose cell
/// carries no mass are dropped; they cannot bind any subset inequality).
pub fn gauss_image_measure(p: &DualPolytope, lam: &QuadratureMeasure) -> Result<DiscreteMeasure> {
    let part = compute_partition(p, lam)?;
    let keep: Vec<usize> = (0..p.len()).filter(|&i| part.cell_masses[i] > 0.0).collect();
    let atoms = p.directions().subset(&keep)?;
    DiscreteMeasure::new(atoms, keep.iter().map(|&i| part.cell_masses[i]).collect())
}

/// Confirm that `λ` is weak Aleksandrov related to `λ(P,·)` at
/// `α = π/2 - arccos(r_P/R_P)` less [`NECESSITY_SLACK`].
pub fn necessity_check(p: &DualPolytope, lam: &QuadratureMeasure) -> Result<NecessityReport> {
    necessity_check_with_slack(p, lam, NECESSITY_SLACK)
}

/// As [`necessity_check`]. When the slack would push the tested angle to zero
/// or below, half the bound is tested instead.
pub fn necessity_check_with_slack(p: &DualPolytope, lam: &QuadratureMeasure, slack: f64) -> Result<NecessityReport> {
    let radii = p.radii_or_grid(lam.grid())?;
    let ratio = radii.ratio().min(1.0);
    let alpha_bound = FRAC_PI_2 - ratio.acos();
    let alpha_tested = if alpha_bound - slack > 0.0 { alpha_bound - slack } else { 0.5 * alpha_bound };
    let g = gauss_image_measure(p, lam)?;
    let fam = family(&g, WeakOptions::default())?;
    let weak = weak_at(&g, lam, alpha_tested, &fam);
    let uniform_alpha = bisect_alpha(&g, lam, &fam);
    Ok(NecessityReport {
        passes: weak.holds && uniform_alpha.is_some(),
        ratio,
        radii_exact: radii.exact,
        alpha_bound,
        alpha_tested,
        uniform_alpha,
        weak,
    })
}

//! Supergradient ascent on the concave surrogate `F(t)`, `t = log α`, with
//! max-normalization, canonicalization after every step, degeneracy
//! monitoring and partial-rescaling recovery.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aleksandrov::{find_uniform_alpha_with, WeakOptions, EXHAUSTIVE_LIMIT};
use crate::error::{GipError, Result};
use crate::gauss::{evaluate, Evaluation, FunctionalValue};
use crate::measures::{DiscreteMeasure, QuadratureMeasure, TotalMass};
use crate::polytope::{DualPolytope, IndexSet, RescaleSide};
use crate::sphere::{hemisphere_witness, DirectionSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepRule {
    /// Level-adjusted Polyak steps `η = δ/‖s‖²`: a step is kept only if it
    /// raises F; δ grows after good steps and shrinks after rejected ones.
    Polyak,
    /// `η_k = η₀/√(k+1)` along `s/‖s‖`.
    Diminishing { eta0: f64 },
    /// Constant `η` along `s/‖s‖`.
    Fixed { eta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "alphas", rename_all = "snake_case")]
pub enum InitStrategy {
    Ones,
    /// `α_i = exp(U(-1, 0))` from the configured seed.
    Random,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Residual threshold as a fraction of μ(S).
    pub tol: f64,
    pub max_iters: usize,
    pub step_rule: StepRule,
    pub gap_ratio: f64,
    pub seed: u64,
    pub rescale_recovery: bool,
    pub init: InitStrategy,
    /// Iterations spent sharpening the iterate once the tolerance is met.
    pub refine_iters: usize,
    /// Window (iterations) over which a stalled Φ triggers recovery.
    pub stall_window: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iters: 10_000,
            step_rule: StepRule::Polyak,
            gap_ratio: 10.0,
            seed: 0,
            rescale_recovery: true,
            init: InitStrategy::Ones,
            refine_iters: 2000,
            stall_window: 200,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(GipError::invalid("tol must be positive"));
        }
        if self.max_iters == 0 {
            return Err(GipError::invalid("max_iters must be at least 1"));
        }
        if !(self.gap_ratio > 1.0) {
            return Err(GipError::invalid("gap_ratio must exceed 1"));
        }
        match self.step_rule {
            StepRule::Diminishing { eta0: e } | StepRule::Fixed { eta: e } if !(e > 0.0) => {
                Err(GipError::invalid("step size must be positive"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaleEvent {
    pub iteration: usize,
    pub subset: IndexSet,
    pub factor: f64,
    pub phi_before: f64,
    pub phi_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub phi: f64,
    pub residual_inf: f64,
    pub min_alpha: f64,
    pub max_alpha: f64,
    pub cluster_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    /// Canonical, `max α = 1`.
    pub final_p: DualPolytope,
    pub converged: bool,
    pub iterations: usize,
    pub residual_inf: f64,
    pub phi: FunctionalValue,
    pub cell_masses: Vec<f64>,
    pub phi_trace: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub rescale_events: Vec<RescaleEvent>,
    pub clusters: Vec<IndexSet>,
    /// `r_P / R_P`.
    pub radii_ratio: f64,
    pub uniform_alpha_used: Option<f64>,
}

#[derive(Debug, Clone)]
struct Iterate {
    p: DualPolytope,
    eval: Evaluation,
}

impl Iterate {
    fn phi(&self) -> f64 {
        self.eval.value.phi
    }
}

fn make_iterate(dirs: &Arc<DirectionSet>, alphas: Vec<f64>, mu: &DiscreteMeasure, lam: &QuadratureMeasure) -> Result<Iterate> {
    let p = DualPolytope::unchecked(Arc::clone(dirs), alphas)?.canonicalize()?.normalize_max();
    let eval = evaluate(&p, mu, lam)?;
    Ok(Iterate { p, eval })
}

fn trace_row(iter: usize, it: &Iterate, gap_ratio: f64) -> TraceRow {
    let a = it.p.alphas();
    TraceRow {
        iter,
        phi: it.phi(),
        residual_inf: it.eval.residual_inf,
        min_alpha: a.iter().cloned().fold(f64::INFINITY, f64::min),
        max_alpha: a.iter().cloned().fold(0.0, f64::max),
        cluster_count: it.p.degeneracy_clusters(gap_ratio).len(),
    }
}

fn initial_alphas(cfg: &SolverConfig, m: usize) -> Result<Vec<f64>> {
    match &cfg.init {
        InitStrategy::Ones => Ok(vec![1.0; m]),
        InitStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            Ok((0..m).map(|_| rng.random_range(-1.0..0.0f64).exp()).collect())
        }
        InitStrategy::Given(a) if a.len() == m => Ok(a.clone()),
        InitStrategy::Given(a) => Err(GipError::invalid(format!("{} initial alphas for {m} atoms", a.len()))),
    }
}

fn check_problem(mu: &DiscreteMeasure, lam: &QuadratureMeasure) -> Result<()> {
    if mu.dim() != lam.dim() {
        return Err(GipError::DimensionMismatch { expected: lam.dim(), found: mu.dim() });
    }
    let (a, b) = (mu.total_mass(), lam.total_mass());
    if (a - b).abs() > lam.eps_quad() {
        return Err(GipError::MassMismatch { mu: a, lambda: b });
    }
    Ok(())
}

/// Uniform weak constant, or `None` with a warning when the relation fails.
pub fn uniform_alpha_for(mu: &DiscreteMeasure, lam: &QuadratureMeasure, seed: u64) -> Result<Option<f64>> {
    let opts = WeakOptions { heuristic: mu.len() > EXHAUSTIVE_LIMIT, seed };
    let found = find_uniform_alpha_with(mu, lam, opts)?;
    if found.is_none() {
        log::warn!("mu is not weak Aleksandrov related to lambda at grid resolution; scales may diverge");
    }
    Ok(found)
}

/// Maximize Φ over polytopes with normals at the atoms of `mu`.
pub fn solve(mu: &DiscreteMeasure, lam: &QuadratureMeasure, cfg: &SolverConfig) -> Result<SolverReport> {
    cfg.validate()?;
    check_problem(mu, lam)?;
    let uniform_alpha = if cfg.rescale_recovery { uniform_alpha_for(mu, lam, cfg.seed)? } else { None };
    solve_inner(mu, lam, cfg, uniform_alpha)
}

fn solve_inner(mu: &DiscreteMeasure, lam: &QuadratureMeasure, cfg: &SolverConfig, uniform_alpha: Option<f64>) -> Result<SolverReport> {
    let mass = mu.total_mass();
    let eps = lam.eps_quad();
    let target = cfg.tol * mass;
    let dirs = Arc::new(mu.atoms().clone());
    let mut cur = make_iterate(&dirs, initial_alphas(cfg, mu.len())?, mu, lam)?;
    let mut best = cur.clone();
    let mut best_converged: Option<Iterate> = None;
    let mut delta = cur.eval.residual_inf.max(1e-6 * mass);
    let mut refine_left = cfg.refine_iters;
    let mut phi_trace = Vec::new();
    let mut trace = Vec::new();
    let mut events = Vec::new();
    let mut last_event = 0usize;
    let mut iterations = 0;

    for iter in 0..cfg.max_iters {
        iterations = iter + 1;
        phi_trace.push(cur.phi());
        trace.push(trace_row(iter, &cur, cfg.gap_ratio));
        if cur.eval.residual_inf <= target && best_converged.as_ref().is_none_or(|b| cur.phi() >= b.phi()) {
            best_converged = Some(cur.clone());
        }
        if best_converged.is_some() {
            if refine_left == 0 {
                break;
            }
            refine_left -= 1;
        }
        if cur.eval.residual_inf == 0.0 {
            break;
        }

        if let Some(alpha_u) = uniform_alpha {
            let w = cfg.stall_window;
            if iter >= last_event + w && iter >= w && phi_trace[iter] - phi_trace[iter - w] < eps {
                let out = rescale_recovery_step(&cur.p, mu, lam, alpha_u, cfg.gap_ratio)?;
                if out.applied && out.phi_ok {
                    let next = Iterate { eval: evaluate(&out.polytope, mu, lam)?, p: out.polytope };
                    events.push(RescaleEvent {
                        iteration: iter,
                        subset: out.subset.expect("applied recovery has a subset"),
                        factor: out.factor,
                        phi_before: cur.phi(),
                        phi_after: next.phi(),
                    });
                    cur = next;
                    delta = cur.eval.residual_inf.max(1e-6 * mass);
                    last_event = iter;
                    continue;
                }
                last_event = iter;
            }
        }

        let s = &cur.eval.supergradient;
        let norm2: f64 = s.iter().map(|x| x * x).sum();
        let eta = match cfg.step_rule {
            StepRule::Polyak => delta / norm2,
            StepRule::Diminishing { eta0 } => eta0 / ((iter + 1) as f64).sqrt() / norm2.sqrt(),
            StepRule::Fixed { eta } => eta / norm2.sqrt(),
        };
        let alphas: Vec<f64> = cur.p.alphas().iter().zip(s).map(|(a, g)| (a.ln() + eta * g).exp()).collect();
        let cand = make_iterate(&dirs, alphas, mu, lam);
        match cfg.step_rule {
            StepRule::Polyak => match cand {
                Ok(c) if c.phi() > cur.phi() => {
                    if c.phi() - cur.phi() >= 0.5 * delta {
                        delta = (1.5 * delta).min(mass);
                    }
                    cur = c;
                }
                _ => {
                    delta *= 0.25;
                    if delta < 1e-14 * mass {
                        break;
                    }
                }
            },
            _ => {
                if let Ok(c) = cand {
                    cur = c;
                }
            }
        }
        if cur.phi() > best.phi() {
            best = cur.clone();
        }
    }
    if cur.eval.residual_inf <= target && best_converged.as_ref().is_none_or(|b| cur.phi() >= b.phi()) {
        best_converged = Some(cur.clone());
    }

    let converged = best_converged.is_some();
    let fin = best_converged.unwrap_or(best);
    if !converged {
        log::warn!("solver stopped after {iterations} iterations with residual {:.3e}", fin.eval.residual_inf);
    }
    let radii = fin.p.radii_or_grid(lam.grid())?;
    Ok(SolverReport {
        converged,
        iterations,
        residual_inf: fin.eval.residual_inf,
        phi: fin.eval.value,
        cell_masses: fin.eval.cell_masses.clone(),
        phi_trace,
        trace,
        rescale_events: events,
        clusters: fin.p.degeneracy_clusters(cfg.gap_ratio),
        radii_ratio: radii.ratio(),
        uniform_alpha_used: uniform_alpha,
        final_p: fin.p,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOutcome {
    pub polytope: DualPolytope,
    pub applied: bool,
    /// Why the step was skipped.
    pub reason: Option<String>,
    /// The set `I` whose coefficients were scaled.
    pub subset: Option<IndexSet>,
    pub factor: f64,
    pub phi_before: f64,
    pub phi_after: f64,
    /// `Φ(P_r) ≥ Φ(P) - ε`.
    pub phi_ok: bool,
    /// `L*_r ≥ (L*/U*)·L·sin α - 1e-9` and `L_r = L` within 1e-9.
    pub scales_ok: bool,
}

fn skipped(p: &DualPolytope, phi: f64, reason: impl Into<String>) -> RecoveryOutcome {
    RecoveryOutcome {
        polytope: p.clone(),
        applied: false,
        reason: Some(reason.into()),
        subset: None,
        factor: 1.0,
        phi_before: phi,
        phi_after: phi,
        phi_ok: true,
        scales_ok: true,
    }
}

/// Partial rescaling that lifts the small-scale atoms: the scale clusters
/// other than the smallest form `I`, scaled by `b = U*/(L·sin α)`, after which
/// the body is dilated back to `max α = 1`.
pub fn rescale_recovery_step(
    p: &DualPolytope,
    mu: &DiscreteMeasure,
    lam: &QuadratureMeasure,
    uniform_alpha: f64,
    gap_ratio: f64,
) -> Result<RecoveryOutcome> {
    let clusters = p.degeneracy_clusters(gap_ratio);
    if clusters.len() < 2 {
        let phi = evaluate(p, mu, lam)?.value.phi;
        return Ok(skipped(p, phi, "single scale cluster"));
    }
    let members: Vec<usize> = clusters[..clusters.len() - 1].iter().flat_map(|c| c.members().to_vec()).collect();
    recovery_on(p, mu, lam, uniform_alpha, &IndexSet::new(members)?)
}

/// Recovery with an explicit set `I` (its complement must fit in a closed
/// hemisphere and satisfy `U*/L < sin α`).
pub fn recovery_on(
    p: &DualPolytope,
    mu: &DiscreteMeasure,
    lam: &QuadratureMeasure,
    uniform_alpha: f64,
    set: &IndexSet,
) -> Result<RecoveryOutcome> {
    if !p.is_canonical() {
        return Err(GipError::NotCanonical);
    }
    let phi_before = evaluate(p, mu, lam)?.value.phi;
    let stats = p.extremal_stats(set)?;
    let sin_a = (FRAC_PI_2 - uniform_alpha).cos();
    let complement = p.directions().subset(&set.complement(p.len()))?;
    if hemisphere_witness(&complement)?.is_none() {
        return Ok(skipped(p, phi_before, "complement not in a closed hemisphere"));
    }
    if !(stats.upper_star / stats.lower < sin_a) {
        return Ok(skipped(p, phi_before, "scale ratio already at least sin(alpha)"));
    }
    let factor = stats.upper_star / (stats.lower * sin_a);
    let q = p.partial_rescale(set, factor, RescaleSide::Members)?.normalize_max();
    let phi_after = evaluate(&q, mu, lam)?.value.phi;
    let after = q.extremal_stats(set)?;
    let claimed = stats.lower_star / stats.upper_star * stats.lower * sin_a;
    let scales_ok = after.lower_star >= claimed - 1e-9 && (after.lower - stats.lower).abs() <= 1e-9;
    Ok(RecoveryOutcome {
        polytope: q,
        applied: true,
        reason: None,
        subset: Some(set.clone()),
        factor,
        phi_before,
        phi_after,
        phi_ok: phi_after >= phi_before - lam.eps_quad(),
        scales_ok,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    pub polytope: DualPolytope,
    pub events: Vec<RescaleEvent>,
    /// Length of the longest hemisphere-contained prefix of atoms sorted by α.
    pub k: usize,
    /// `min_u max_{i ∈ I_{k+1}} u·v_i` over grid nodes.
    pub gamma: f64,
    pub sin_alpha: f64,
    /// `r_P / R_P` of the returned body.
    pub ratio: f64,
    /// `sin(α)^k / γ`.
    pub bound_stated: f64,
    /// `sin(α)^k · γ`, which follows from `r_{P*} ≥ α_{k+1} sin(α)^k` and
    /// `R_{P*} ≤ α_{k+1}/γ`.
    pub bound_derived: f64,
    pub residual_inf: f64,
    pub residual_ok: bool,
    /// `U^{l*}/L^l ≥ sin α` for every prefix `l ≤ k`.
    pub prefix_condition: bool,
    pub failure: Option<String>,
}

fn sorted_order(p: &DualPolytope) -> Vec<usize> {
    let a = p.alphas();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&x, &y| a[x].total_cmp(&a[y]).then(x.cmp(&y)));
    order
}

fn contained_prefix(p: &DualPolytope, order: &[usize]) -> Result<usize> {
    let mut k = 1;
    while k < order.len() {
        if hemisphere_witness(&p.directions().subset(&order[..=k])?)?.is_none() {
            break;
        }
        k += 1;
    }
    Ok(k)
}

/// First prefix length `l ≤ k` with `α_(l)/α_(l+1) < sin α`.
fn violating_prefix(p: &DualPolytope, order: &[usize], k: usize, sin_a: f64) -> Option<usize> {
    let a = p.alphas();
    (1..=k.min(order.len() - 1)).find(|&l| a[order[l - 1]] / a[order[l]] < sin_a)
}

/// Apply recovery on sorted prefixes until every prefix ratio is at least
/// `sin α`, keeping the residual within tolerance.
pub fn ratio_improvement_loop(
    p_solution: &DualPolytope,
    mu: &DiscreteMeasure,
    lam: &QuadratureMeasure,
    uniform_alpha: f64,
    cfg: &SolverConfig,
) -> Result<RatioReport> {
    check_problem(mu, lam)?;
    let target = cfg.tol * mu.total_mass();
    let sin_a = (FRAC_PI_2 - uniform_alpha).cos();
    let mut p = p_solution.canonicalize()?.normalize_max();
    let mut residual = evaluate(&p, mu, lam)?.residual_inf;
    let mut events = Vec::new();
    let mut failure = None;
    for pass in 0..p.len() {
        let order = sorted_order(&p);
        let k = contained_prefix(&p, &order)?;
        let Some(l) = violating_prefix(&p, &order, k, sin_a) else { break };
        let set = IndexSet::new(order[l..].to_vec())?;
        let out = recovery_on(&p, mu, lam, uniform_alpha, &set)?;
        if !out.applied {
            failure = out.reason;
            break;
        }
        let mut q = out.polytope;
        let mut q_res = evaluate(&q, mu, lam)?.residual_inf;
        if q_res > target {
            let warm = SolverConfig { init: InitStrategy::Given(q.alphas().to_vec()), rescale_recovery: false, ..cfg.clone() };
            let re = solve_inner(mu, lam, &warm, None)?;
            q = re.final_p;
            q_res = re.residual_inf;
        }
        let min_ratio = |x: &DualPolytope| x.alphas().iter().cloned().fold(f64::INFINITY, f64::min);
        if q_res > target || min_ratio(&q) <= min_ratio(&p) {
            failure = Some(format!("recovery on prefix {l} did not keep a solution with a better scale ratio"));
            break;
        }
        events.push(RescaleEvent {
            iteration: pass,
            subset: set,
            factor: out.factor,
            phi_before: out.phi_before,
            phi_after: evaluate(&q, mu, lam)?.value.phi,
        });
        p = q;
        residual = q_res;
    }
    let order = sorted_order(&p);
    let k = contained_prefix(&p, &order)?;
    let prefix_condition = violating_prefix(&p, &order, k, sin_a).is_none();
    let head: Vec<&[f64]> = order[..(k + 1).min(order.len())].iter().map(|&i| p.directions().get(i).coords()).collect();
    let grid = lam.grid();
    let gamma = (0..grid.len())
        .map(|j| head.iter().map(|v| grid.node(j).iter().zip(*v).map(|(a, b)| a * b).sum::<f64>()).fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::INFINITY, f64::min);
    let ratio = p.radii_or_grid(grid)?.ratio();
    let sk = sin_a.powi(k as i32);
    Ok(RatioReport {
        k,
        gamma,
        sin_alpha: sin_a,
        ratio,
        bound_stated: sk / gamma,
        bound_derived: sk * gamma,
        residual_inf: residual,
        residual_ok: residual <= target,
        prefix_condition,
        failure,
        events,
        polytope: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{build_grid, GridScheme};
    use std::f64::consts::PI;

    fn lam(count: usize) -> QuadratureMeasure {
        QuadratureMeasure::uniform(Arc::new(build_grid(2, count, GridScheme::UniformAngles).unwrap()), 1.0).unwrap()
    }

    fn square_mu() -> DiscreteMeasure {
        DiscreteMeasure::new(
            DirectionSet::from_angles(&[0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2]).unwrap(),
            vec![FRAC_PI_2; 4],
        )
        .unwrap()
    }

    #[test]
    fn square_from_skewed_start() {
        let l = lam(100_000);
        let cfg = SolverConfig { init: InitStrategy::Given(vec![1.0, 0.3, 0.7, 0.5]), ..Default::default() };
        let r = solve(&square_mu(), &l, &cfg).unwrap();
        assert!(r.converged);
        assert!(r.residual_inf < 1e-3 * 2.0 * PI);
        let a = r.final_p.alphas();
        let spread = a.iter().cloned().fold(0.0, f64::max) - a.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread <= 1e-6, "{a:?}");
        assert!((r.phi.phi - 0.6912).abs() < 2e-3);
        assert_eq!(a.iter().cloned().fold(0.0, f64::max), 1.0);
    }

    #[test]
    fn rejects_unbalanced_masses() {
        let l = lam(4096);
        let mu = DiscreteMeasure::new(square_mu().atoms().clone(), vec![2.0; 4]).unwrap();
        assert!(matches!(solve(&mu, &l, &SolverConfig::default()), Err(GipError::MassMismatch { .. })));
    }

    #[test]
    fn deterministic_reports() {
        let l = lam(20_000);
        let cfg = SolverConfig { init: InitStrategy::Random, seed: 11, ..Default::default() };
        let a = solve(&square_mu(), &l, &cfg).unwrap();
        let b = solve(&square_mu(), &l, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_cluster_recovery_is_noop() {
        let l = lam(20_000);
        let p = DualPolytope::canonical_from(Arc::new(square_mu().atoms().clone()), vec![1.0, 0.8, 0.9, 1.0]).unwrap();
        let out = rescale_recovery_step(&p, &square_mu(), &l, 0.7, 10.0).unwrap();
        assert!(!out.applied);
        assert_eq!(out.polytope, p);
    }

    #[test]
    fn square_ratio_loop_is_noop() {
        let l = lam(100_000);
        let p = DualPolytope::canonical_from(Arc::new(square_mu().atoms().clone()), vec![1.0; 4]).unwrap();
        let rep = ratio_improvement_loop(&p, &square_mu(), &l, FRAC_PI_2 / 2.0, &SolverConfig::default()).unwrap();
        assert!(rep.events.is_empty());
        assert_eq!(rep.polytope.alphas(), p.alphas());
        assert_eq!(rep.k, 3);
        assert!(rep.ratio >= rep.bound_stated);
        assert!(rep.ratio >= rep.bound_derived);
    }
}

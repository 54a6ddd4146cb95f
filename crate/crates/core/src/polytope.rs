//! Polytopes `P = (∩_i H⁻(α_i, v_i))*` in α-representation.
//!
//! `P*` is the halfspace intersection `{x : x·v_i ≤ α_i}` and `P` its polar,
//! whose vertices sit at `β_i v_i` with `β_i = 1/α_i` once the α are canonical
//! (each α_i equal to the support value of `P*` in direction `v_i`).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GipError, Result};
use crate::lp::{self, Row};
use crate::sphere::{dot, witness_for, DirectionSet, QuadratureGrid, UnitVector};

/// Relative tolerance under which an LP support value is treated as equal to
/// the current coefficient.
const CANONICAL_RTOL: f64 = 1e-12;
/// Initial LP search box, relative to the largest coefficient.
const BOX_FACTOR: f64 = 1e3;
const BOX_WIDENINGS: usize = 3;

/// A nonempty sorted set of atom indices (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct IndexSet {
    members: Vec<usize>,
}

impl IndexSet {
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(GipError::invalid("index set is empty"));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    /// Indices of `0..m` not in the set.
    pub fn complement(&self, m: usize) -> Vec<usize> {
        (0..m).filter(|&i| !self.contains(i)).collect()
    }

    /// Nonempty and not all of `0..m`.
    pub fn is_proper(&self, m: usize) -> bool {
        self.members.len() < m && self.members.iter().all(|&i| i < m)
    }

    fn check_proper(&self, m: usize) -> Result<()> {
        if self.members.iter().any(|&i| i >= m) {
            return Err(GipError::invalid(format!("index set refers past {m} atoms")));
        }
        if !self.is_proper(m) {
            return Err(GipError::invalid("index set must be nonempty and not full"));
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for IndexSet {
    type Error = GipError;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<IndexSet> for Vec<usize> {
    fn from(s: IndexSet) -> Self {
        s.members
    }
}

/// Which coefficients a partial rescaling multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RescaleSide {
    /// α_i for i ∉ I.
    Complement,
    /// α_i for i ∈ I.
    Members,
}

/// Extremes of the α over an index set (U, L) and over its complement (U*, L*).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremalStats {
    pub upper: f64,
    pub lower: f64,
    pub upper_star: f64,
    pub lower_star: f64,
}

/// Inner and outer radii of `P` about the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radii {
    pub r: f64,
    pub big_r: f64,
    /// False when the outer radius of `P*` came from a grid scan, in which case
    /// `R_{P*}` is underestimated and `r` overestimated.
    pub exact: bool,
}

impl Radii {
    pub fn ratio(&self) -> f64 {
        self.r / self.big_r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualPolytope {
    directions: Arc<DirectionSet>,
    alphas: Vec<f64>,
    canonical: bool,
}

impl DualPolytope {
    /// Validates the coefficients and that the directions span (no closed
    /// hemisphere contains them). The result is not canonical.
    pub fn new(directions: Arc<DirectionSet>, alphas: Vec<f64>) -> Result<Self> {
        if witness_for(directions.as_slice())?.is_some() {
            return Err(GipError::HemisphereContained);
        }
        Self::unchecked(directions, alphas)
    }

    /// Like [`DualPolytope::new`], skipping the hemisphere LP (the caller has
    /// already validated `directions`).
    pub fn unchecked(directions: Arc<DirectionSet>, alphas: Vec<f64>) -> Result<Self> {
        if alphas.len() != directions.len() {
            return Err(GipError::invalid(format!(
                "{} coefficients for {} directions",
                alphas.len(),
                directions.len()
            )));
        }
        if let Some(i) = alphas.iter().position(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(GipError::invalid(format!("alpha {i} must be positive and finite")));
        }
        Ok(Self { directions, alphas, canonical: false })
    }

    /// Convenience: `new` followed by `canonicalize`.
    pub fn canonical_from(directions: Arc<DirectionSet>, alphas: Vec<f64>) -> Result<Self> {
        Self::new(directions, alphas)?.canonicalize()
    }

    pub fn directions(&self) -> &DirectionSet {
        &self.directions
    }

    pub fn shared_directions(&self) -> Arc<DirectionSet> {
        Arc::clone(&self.directions)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.directions.dim()
    }

    fn with_alphas(&self, alphas: Vec<f64>, canonical: bool) -> Self {
        Self { directions: Arc::clone(&self.directions), alphas, canonical }
    }

    /// The body `aP` (coefficients divided by `a`); canonicity is preserved.
    pub fn dilate(&self, a: f64) -> Self {
        self.with_alphas(self.alphas.iter().map(|x| x / a).collect(), self.canonical)
    }

    /// Dilate so that `max α = 1`.
    pub fn normalize_max(&self) -> Self {
        let max = self.alphas.iter().cloned().fold(0.0, f64::max);
        let mut out = self.dilate(max);
        // exact 1 on the maximal entries despite rounding
        for (a, &orig) in out.alphas.iter_mut().zip(&self.alphas) {
            if orig == max {
                *a = 1.0;
            }
        }
        out
    }

    /// `ρ_{P*}(u) = min_{i : u·v_i > 0} α_i / (u·v_i)` and its lowest attaining index.
    pub fn rho_polar(&self, u: &UnitVector) -> (f64, usize) {
        self.rho_polar_raw(u.coords())
    }

    pub(crate) fn rho_polar_raw(&self, u: &[f64]) -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for (i, (v, &a)) in self.directions.iter().zip(&self.alphas).enumerate() {
            let c = dot(u, v.coords());
            if c > 0.0 {
                let r = a * (1.0 / c);
                if r < best.0 {
                    best = (r, i);
                }
            }
        }
        best
    }

    /// `β_i = ρ_P(v_i) = 1/α_i`; requires canonical coefficients.
    pub fn rho_primal_at_atoms(&self) -> Result<Vec<f64>> {
        if !self.canonical {
            return Err(GipError::NotCanonical);
        }
        Ok(self.alphas.iter().map(|a| 1.0 / a).collect())
    }

    /// Replace each α_i by the support value `max{x·v_i : x·v_j ≤ α_j ∀j}` of `P*`.
    pub fn canonicalize(&self) -> Result<Self> {
        if self.canonical {
            return Ok(self.clone());
        }
        let n = self.dim();
        let max_alpha = self.alphas.iter().cloned().fold(0.0, f64::max);
        let rows: Vec<Row> = self
            .directions
            .iter()
            .zip(&self.alphas)
            .map(|(v, &a)| Row::le(v.coords().to_vec(), a))
            .collect();
        let mut out = Vec::with_capacity(self.len());
        for (i, v) in self.directions.iter().enumerate() {
            // The simplex backend misbehaves on free variables, so search a box
            // and widen it while the optimum touches the boundary.
            let mut half_width = BOX_FACTOR * max_alpha;
            let mut solved = None;
            for _ in 0..BOX_WIDENINGS {
                let bounds = vec![(-half_width, half_width); n];
                let sol = lp::maximize(v.coords(), &bounds, &rows).map_err(|e| match e {
                    GipError::Lp(msg) => GipError::Lp(format!("canonicalizing direction {i}: {msg}")),
                    other => other,
                })?;
                if sol.x.iter().all(|c| c.abs() < half_width * (1.0 - 1e-9)) {
                    solved = Some(sol);
                    break;
                }
                half_width *= BOX_FACTOR;
            }
            let sol = solved.ok_or(GipError::HemisphereContained)?;
            let value = self.polish_support(&sol.x, v.coords()).unwrap_or(sol.objective);
            let current = self.alphas[i];
            out.push(if value >= current * (1.0 - CANONICAL_RTOL) { current } else { value.max(0.0) });
        }
        if out.iter().any(|&a| a <= 0.0) {
            return Err(GipError::HemisphereContained);
        }
        Ok(self.with_alphas(out, true))
    }

    /// Recompute an LP vertex from its active constraints in exact arithmetic
    /// (up to one LU solve) and return its objective value.
    fn polish_support(&self, x: &[f64], objective: &[f64]) -> Option<f64> {
        let n = self.dim();
        let scale = self.alphas.iter().cloned().fold(0.0, f64::max).max(1.0);
        let mut active: Vec<usize> = (0..self.len())
            .filter(|&j| (dot(x, self.directions.get(j).coords()) - self.alphas[j]).abs() <= 1e-7 * scale)
            .collect();
        active.sort_by(|&a, &b| {
            let sa = (dot(x, self.directions.get(a).coords()) - self.alphas[a]).abs();
            let sb = (dot(x, self.directions.get(b).coords()) - self.alphas[b]).abs();
            sa.total_cmp(&sb)
        });
        // Greedily pick n linearly independent active normals.
        let mut chosen: Vec<usize> = Vec::with_capacity(n);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
        for &j in &active {
            let mut w = self.directions.get(j).coords().to_vec();
            for b in &basis {
                let p = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= p * bi);
            }
            let nrm = dot(&w, &w).sqrt();
            if nrm > 1e-6 {
                basis.push(w.iter().map(|c| c / nrm).collect());
                chosen.push(j);
                if chosen.len() == n {
                    break;
                }
            }
        }
        if chosen.len() < n {
            return None;
        }
        let y = self.solve_vertex(&chosen)?;
        let feasible = (0..self.len())
            .all(|j| dot(&y, self.directions.get(j).coords()) <= self.alphas[j] + 1e-10 * scale);
        feasible.then(|| dot(&y, objective))
    }

    fn solve_vertex(&self, rows: &[usize]) -> Option<Vec<f64>> {
        let n = self.dim();
        let a = DMatrix::from_fn(n, n, |r, c| self.directions.get(rows[r]).coords()[c]);
        let b = DVector::from_iterator(n, rows.iter().map(|&r| self.alphas[r]));
        let lu = a.lu();
        if lu.determinant().abs() < 1e-12 {
            return None;
        }
        lu.solve(&b).map(|x| x.iter().cloned().collect())
    }

    /// Vertices of `P*` by enumerating n-subsets of constraints.
    /// Returns `None` when the enumeration produces nothing usable.
    pub fn polar_vertices(&self) -> Option<Vec<Vec<f64>>> {
        let n = self.dim();
        let m = self.len();
        let scale = self.alphas.iter().cloned().fold(0.0, f64::max);
        let mut out: Vec<Vec<f64>> = Vec::new();
        for combo in combinations(m, n) {
            let Some(x) = self.solve_vertex(&combo) else { continue };
            let feasible = (0..m).all(|j| dot(&x, self.directions.get(j).coords()) <= self.alphas[j] + 1e-9 * scale);
            if !feasible {
                continue;
            }
            let dup = out.iter().any(|y| y.iter().zip(&x).all(|(a, b)| (a - b).abs() <= 1e-9 * scale));
            if !dup {
                out.push(x);
            }
        }
        (out.len() > n).then_some(out)
    }

    /// Partial rescaling: multiply the α on one side of `set` by `a ∈ (0, 1]`,
    /// then canonicalize. Coefficients on the other side may drop as facets
    /// degenerate.
    pub fn partial_rescale(&self, set: &IndexSet, a: f64, side: RescaleSide) -> Result<Self> {
        if !(a > 0.0 && a <= 1.0) {
            return Err(GipError::invalid(format!("rescale factor {a} outside (0, 1]")));
        }
        set.check_proper(self.len())?;
        let alphas = self
            .alphas
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let scaled = match side {
                    RescaleSide::Members => set.contains(i),
                    RescaleSide::Complement => !set.contains(i),
                };
                if scaled {
                    a * x
                } else {
                    x
                }
            })
            .collect();
        self.with_alphas(alphas, false).canonicalize()
    }

    pub fn extremal_stats(&self, set: &IndexSet) -> Result<ExtremalStats> {
        set.check_proper(self.len())?;
        let (mut upper, mut lower) = (f64::NEG_INFINITY, f64::INFINITY);
        let (mut upper_star, mut lower_star) = (f64::NEG_INFINITY, f64::INFINITY);
        for (i, &a) in self.alphas.iter().enumerate() {
            if set.contains(i) {
                upper = upper.max(a);
                lower = lower.min(a);
            } else {
                upper_star = upper_star.max(a);
                lower_star = lower_star.min(a);
            }
        }
        Ok(ExtremalStats { upper, lower, upper_star, lower_star })
    }

    /// `r_P = 1/R_{P*}` and `R_P = 1/r_{P*}` with `r_{P*} = min α` and `R_{P*}`
    /// the largest vertex norm of `P*`.
    pub fn radii(&self) -> Result<Radii> {
        if !self.canonical {
            return Err(GipError::NotCanonical);
        }
        if self.dim() > 3 {
            return Err(GipError::invalid("exact vertex enumeration supports n ≤ 3"));
        }
        let verts = self
            .polar_vertices()
            .ok_or_else(|| GipError::invalid("degenerate vertex enumeration"))?;
        let big_r_star = verts.iter().map(|x| dot(x, x).sqrt()).fold(0.0, f64::max);
        let r_star = self.alphas.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(Radii { r: 1.0 / big_r_star, big_r: 1.0 / r_star, exact: true })
    }

    /// [`DualPolytope::radii`], falling back to `max ρ_{P*}` over grid nodes
    /// when vertex enumeration is unavailable.
    pub fn radii_or_grid(&self, grid: &QuadratureGrid) -> Result<Radii> {
        match self.radii() {
            Ok(r) => Ok(r),
            Err(GipError::NotCanonical) => Err(GipError::NotCanonical),
            Err(e) => {
                log::warn!("radii: {e}; falling back to grid estimate");
                let big_r_star = (0..grid.len())
                    .map(|k| self.rho_polar_raw(grid.node(k)).0)
                    .fold(0.0, f64::max);
                let r_star = self.alphas.iter().cloned().fold(f64::INFINITY, f64::min);
                Ok(Radii { r: 1.0 / big_r_star, big_r: 1.0 / r_star, exact: false })
            }
        }
    }

    /// Split atoms into scale clusters: sort α descending and cut wherever
    /// consecutive ratios exceed `gap_ratio`. Largest scale first.
    pub fn degeneracy_clusters(&self, gap_ratio: f64) -> Vec<IndexSet> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.alphas[b].total_cmp(&self.alphas[a]).then(a.cmp(&b)));
        let mut clusters = Vec::new();
        let mut current = vec![order[0]];
        for w in order.windows(2) {
            if self.alphas[w[0]] / self.alphas[w[1]] > gap_ratio {
                clusters.push(IndexSet::new(std::mem::take(&mut current)).expect("nonempty"));
            }
            current.push(w[1]);
        }
        clusters.push(IndexSet::new(current).expect("nonempty"));
        clusters
    }
}

/// All k-subsets of `0..m` in lexicographic order.
pub(crate) fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            if m - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= m {
        rec(0, m, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

//! Unit-sphere primitives: directions, closed-hemisphere tests, outer parallel
//! sets, polar sets and quadrature grids on S^1 and S^2.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{GipError, Result};
use crate::lp::{self, Row};

/// Tolerance on the LP optimum when deciding closed-hemisphere containment.
pub const HEMISPHERE_TOL: f64 = 1e-9;
/// Minimum chordal separation between two directions of a [`DirectionSet`].
pub const DISTINCT_TOL: f64 = 1e-9;
/// Tolerance of the polar-set test `u·v ≤ 0`.
pub const POLAR_TOL: f64 = 1e-12;

/// A point of S^{n-1}, n ≥ 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Normalizes `coords`. Fails on fewer than two coordinates, non-finite
    /// entries or a zero vector.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(GipError::invalid("unit vectors need at least 2 coordinates"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GipError::invalid("non-finite coordinate"));
        }
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(GipError::invalid("zero vector has no direction"));
        }
        Ok(Self(coords.into_iter().map(|c| c / norm).collect()))
    }

    /// The point (cos θ, sin θ) of S^1.
    pub fn from_angle(theta: f64) -> Self {
        Self(vec![theta.cos(), theta.sin()])
    }

    /// The point of S^2 with polar angle `theta` (from +z) and azimuth `phi`.
    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        let s = theta.sin();
        Self(vec![s * phi.cos(), s * phi.sin(), theta.cos()])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        dot(&self.0, &other.0)
    }

    /// Angle in [0, 2π) for a vector of S^1.
    pub fn angle(&self) -> f64 {
        let a = self.0[1].atan2(self.0[0]);
        if a < 0.0 {
            a + 2.0 * PI
        } else {
            a
        }
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|c| -c).collect())
    }
}

impl TryFrom<Vec<f64>> for UnitVector {
    type Error = GipError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<UnitVector> for Vec<f64> {
    fn from(u: UnitVector) -> Self {
        u.0
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A nonempty list of pairwise distinct directions of common dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<UnitVector>", into = "Vec<UnitVector>")]
pub struct DirectionSet {
    vectors: Vec<UnitVector>,
}

impl DirectionSet {
    pub fn new(vectors: Vec<UnitVector>) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(GipError::invalid("direction set is empty"));
        };
        let dim = first.dim();
        for v in &vectors {
            if v.dim() != dim {
                return Err(GipError::DimensionMismatch { expected: dim, found: v.dim() });
            }
        }
        for (i, a) in vectors.iter().enumerate() {
            for (j, b) in vectors.iter().enumerate().skip(i + 1) {
                let chord = a.0.iter().zip(&b.0).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                if chord <= DISTINCT_TOL {
                    return Err(GipError::invalid(format!("directions {i} and {j} coincide")));
                }
            }
        }
        Ok(Self { vectors })
    }

    /// Directions at the given angles on S^1.
    pub fn from_angles(angles: &[f64]) -> Result<Self> {
        Self::new(angles.iter().map(|&a| UnitVector::from_angle(a)).collect())
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].dim()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, i: usize) -> &UnitVector {
        &self.vectors[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, UnitVector> {
        self.vectors.iter()
    }

    pub fn as_slice(&self) -> &[UnitVector] {
        &self.vectors
    }

    /// The sub-collection at `indices` (must be nonempty).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.vectors[i].clone()).collect())
    }
}

impl TryFrom<Vec<UnitVector>> for DirectionSet {
    type Error = GipError;
    fn try_from(v: Vec<UnitVector>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DirectionSet> for Vec<UnitVector> {
    fn from(d: DirectionSet) -> Self {
        d.vectors
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(GipError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// A direction `u` with `u·v ≥ -1e-9` for every `v` in `dirs`, if the set lies
/// in a closed hemisphere.
///
/// Solves `max t  s.t.  v·u ≥ t  ∀v,  ‖u‖∞ ≤ 1`; the set is contained iff the
/// optimum is ≥ -1e-9. When the optimum is zero the LP may return `u = 0`, so
/// a nonzero element of the cone `{u : v·u ≥ 0}` is then searched for along
/// the coordinate axes.
pub fn hemisphere_witness(dirs: &DirectionSet) -> Result<Option<UnitVector>> {
    witness_for(dirs.as_slice())
}

pub(crate) fn witness_for(vectors: &[UnitVector]) -> Result<Option<UnitVector>> {
    let Some(first) = vectors.first() else {
        return Err(GipError::invalid("empty direction set"));
    };
    let n = first.dim();
    for v in vectors {
        check_dim(n, v.dim())?;
    }
    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    let mut bounds = vec![(-1.0, 1.0); n];
    bounds.push((-2.0, 2.0));
    let rows: Vec<Row> = vectors
        .iter()
        .map(|v| {
            let mut c = v.coords().to_vec();
            c.push(-1.0);
            Row::ge(c, 0.0)
        })
        .collect();
    let sol = lp::maximize(&objective, &bounds, &rows)?;
    if sol.objective < -HEMISPHERE_TOL {
        return Ok(None);
    }
    let accept = |u: &[f64]| -> Option<UnitVector> {
        let w = UnitVector::new(u.to_vec()).ok()?;
        vectors
            .iter()
            .all(|v| w.dot(v) >= -HEMISPHERE_TOL)
            .then_some(w)
    };
    if let Some(w) = accept(&sol.x[..n]) {
        return Ok(Some(w));
    }
    // Optimum at zero: look for a nonzero point of the cone along ± axes.
    let cone_rows: Vec<Row> = vectors.iter().map(|v| Row::ge(v.coords().to_vec(), 0.0)).collect();
    let box_bounds = vec![(-1.0, 1.0); n];
    for axis in 0..n {
        for sign in [1.0, -1.0] {
            let mut c = vec![0.0; n];
            c[axis] = sign;
            let s = lp::maximize(&c, &box_bounds, &cone_rows)?;
            if s.objective > 1e-7 {
                if let Some(w) = accept(&s.x) {
                    return Ok(Some(w));
                }
            }
        }
    }
    Ok(None)
}

/// Membership in the open outer parallel set `ω_angle = ∪_{v∈ω} {u : u·v > cos angle}`.
pub fn in_outer_parallel_set(u: &UnitVector, omega: &DirectionSet, angle: f64) -> Result<bool> {
    if !(angle > 0.0 && angle < PI) {
        return Err(GipError::invalid(format!("parallel-set angle {angle} outside (0, π)")));
    }
    check_dim(omega.dim(), u.dim())?;
    let c = angle.cos();
    Ok(omega.iter().map(|v| u.dot(v)).fold(f64::NEG_INFINITY, f64::max) > c)
}

/// Membership in the polar set `ω* = {u : u·v ≤ 0 ∀v∈ω}`.
pub fn in_polar_set(u: &UnitVector, omega: &DirectionSet) -> Result<bool> {
    check_dim(omega.dim(), u.dim())?;
    Ok(omega.iter().all(|v| u.dot(v) <= POLAR_TOL))
}

/// Surface area of S^{n-1}.
pub fn sphere_area(n: usize) -> f64 {
    // 2 π^{n/2} / Γ(n/2), via the recursion A_{n+2} = 2π A_n / n.
    let (mut area, mut k) = if n % 2 == 0 { (2.0 * PI, 2) } else { (4.0 * PI, 3) };
    while k < n {
        area *= 2.0 * PI / k as f64;
        k += 2;
    }
    area
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScheme {
    UniformAngles,
    Fibonacci,
    Latlong,
}

impl std::fmt::Display for GridScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::UniformAngles => "uniform_angles",
            Self::Fibonacci => "fibonacci",
            Self::Latlong => "latlong",
        };
        f.write_str(s)
    }
}

/// Nodes and surface weights discretizing spherical Lebesgue measure.
///
/// Node coordinates are stored row-major in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    scheme: GridScheme,
    spacing: f64,
}

impl QuadratureGrid {
    /// A grid from explicit nodes and weights (weights ≥ 0, nodes normalized).
    pub fn from_nodes(nodes: &[UnitVector], weights: Vec<f64>, scheme: GridScheme) -> Result<Self> {
        let Some(first) = nodes.first() else {
            return Err(GipError::invalid("grid has no nodes"));
        };
        if nodes.len() != weights.len() {
            return Err(GipError::invalid("node and weight counts differ"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(GipError::invalid("grid weights must be finite and nonnegative"));
        }
        let dim = first.dim();
        let mut coords = Vec::with_capacity(nodes.len() * dim);
        for u in nodes {
            check_dim(dim, u.dim())?;
            coords.extend_from_slice(u.coords());
        }
        let spacing = (sphere_area(dim) / nodes.len() as f64).powf(1.0 / (dim as f64 - 1.0));
        Ok(Self { dim, coords, weights, scheme, spacing })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn node_vector(&self, k: usize) -> UnitVector {
        UnitVector(self.node(k).to_vec())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    /// Typical distance between neighbouring nodes.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Build a quadrature grid on S^{n-1}.
///
/// * `uniform_angles` (n = 2): `count` equally spaced angles starting at 0, weight 2π/count.
/// * `fibonacci`: n = 3 Fibonacci lattice with weight 4π/count; n = 2 golden-angle
///   sequence with weight 2π/count.
/// * `latlong`: n = 2 midpoint angles; n = 3 latitude bands × longitudes with exact
///   band areas as weights (node count rounded to a band layout).
pub fn build_grid(n: usize, count: usize, scheme: GridScheme) -> Result<QuadratureGrid> {
    if count < 16 {
        return Err(GipError::invalid(format!("grid needs at least 16 nodes, got {count}")));
    }
    let unsupported = || GipError::UnsupportedGrid { dim: n, scheme: scheme.to_string() };
    let (coords, weights, spacing) = match (n, scheme) {
        (2, GridScheme::UniformAngles) | (2, GridScheme::Latlong) => {
            let phase = if scheme == GridScheme::Latlong { 0.5 } else { 0.0 };
            let h = 2.0 * PI / count as f64;
            let coords = (0..count)
                .flat_map(|k| {
                    let a = (k as f64 + phase) * h;
                    [a.cos(), a.sin()]
                })
                .collect();
            (coords, vec![h; count], h)
        }
        (2, GridScheme::Fibonacci) => {
            let golden = (5f64.sqrt() - 1.0) / 2.0;
            let mut angles: Vec<f64> = (0..count)
                .map(|k| 2.0 * PI * ((k as f64 * golden).fract()))
                .collect();
            let coords = angles.iter().flat_map(|a| [a.cos(), a.sin()]).collect();
            angles.sort_by(f64::total_cmp);
            let mut gap = angles[0] + 2.0 * PI - angles[count - 1];
            for w in angles.windows(2) {
                gap = gap.max(w[1] - w[0]);
            }
            (coords, vec![2.0 * PI / count as f64; count], gap)
        }
        (3, GridScheme::Fibonacci) => {
            let golden_angle = PI * (3.0 - 5f64.sqrt());
            let coords = (0..count)
                .flat_map(|k| {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden_angle * k as f64;
                    [r * phi.cos(), r * phi.sin(), z]
                })
                .collect();
            let w = 4.0 * PI / count as f64;
            (coords, vec![w; count], w.sqrt())
        }
        (3, GridScheme::Latlong) => {
            let bands = ((count as f64 / 2.0).sqrt().round() as usize).max(2);
            let sectors = 2 * bands;
            let dtheta = PI / bands as f64;
            let dphi = 2.0 * PI / sectors as f64;
            let mut coords = Vec::with_capacity(bands * sectors * 3);
            let mut weights = Vec::with_capacity(bands * sectors);
            for b in 0..bands {
                let (t0, t1) = (b as f64 * dtheta, (b + 1) as f64 * dtheta);
                let theta = 0.5 * (t0 + t1);
                let w = (t0.cos() - t1.cos()) * dphi;
                for s in 0..sectors {
                    let phi = (s as f64 + 0.5) * dphi;
                    coords.extend_from_slice(&[theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]);
                    weights.push(w);
                }
            }
            (coords, weights, dtheta)
        }
        _ => return Err(unsupported()),
    };
    Ok(QuadratureGrid { dim: n, coords, weights, scheme, spacing })
}

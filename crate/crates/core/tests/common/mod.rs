#![allow(dead_code)]

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use gip_core::{build_grid, hemisphere_witness, DirectionSet, DiscreteMeasure, DualPolytope, GridScheme, QuadratureMeasure, UnitVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn uniform_lam(n: usize, count: usize) -> QuadratureMeasure {
    let scheme = if n == 2 { GridScheme::UniformAngles } else { GridScheme::Fibonacci };
    QuadratureMeasure::uniform(Arc::new(build_grid(n, count, scheme).unwrap()), 1.0).unwrap()
}

/// Write past the test harness's output capture so the line always shows.
pub fn report(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

/// `m` angles on S^1 with every gap in `[min_gap, π - 0.2]`.
pub fn random_angles(rng: &mut ChaCha8Rng, m: usize, min_gap: f64) -> Vec<f64> {
    loop {
        let mut a: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        a.sort_by(f64::total_cmp);
        let gaps = (0..m).map(|i| if i + 1 < m { a[i + 1] - a[i] } else { a[0] + 2.0 * PI - a[i] });
        if gaps.clone().all(|g| g >= min_gap && g <= PI - 0.2) {
            return a;
        }
    }
}

/// `m` spanning directions on S^2, pairwise at least `min_angle` apart.
pub fn random_sphere_dirs(rng: &mut ChaCha8Rng, m: usize, min_angle: f64) -> DirectionSet {
    loop {
        let v: Vec<UnitVector> = (0..m)
            .map(|_| {
                let z: f64 = rng.random_range(-1.0..1.0);
                let phi: f64 = rng.random_range(0.0..2.0 * PI);
                let s = (1.0 - z * z).sqrt();
                UnitVector::new(vec![s * phi.cos(), s * phi.sin(), z]).unwrap()
            })
            .collect();
        let separated = v.iter().enumerate().all(|(i, a)| v[i + 1..].iter().all(|b| a.dot(b) <= min_angle.cos()));
        if !separated {
            continue;
        }
        let dirs = DirectionSet::new(v).unwrap();
        if hemisphere_witness(&dirs).unwrap().is_none() {
            return dirs;
        }
    }
}

pub fn random_dirs(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DirectionSet {
    if n == 2 {
        DirectionSet::from_angles(&random_angles(rng, m, 0.15)).unwrap()
    } else {
        random_sphere_dirs(rng, m, 0.3)
    }
}

/// Weights drawn from `[0.5, 1.5]` and scaled to `total`.
pub fn random_weights(rng: &mut ChaCha8Rng, m: usize, total: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..1.5)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x * total / s).collect()
}

pub fn random_mu(rng: &mut ChaCha8Rng, n: usize, m: usize, total: f64) -> DiscreteMeasure {
    let dirs = random_dirs(rng, n, m);
    DiscreteMeasure::new(dirs, random_weights(rng, m, total)).unwrap()
}

pub fn random_polytope(rng: &mut ChaCha8Rng, dirs: DirectionSet, lo: f64) -> DualPolytope {
    let alphas: Vec<f64> = (0..dirs.len()).map(|_| rng.random_range(lo..1.0)).collect();
    DualPolytope::canonical_from(Arc::new(dirs), alphas).unwrap()
}

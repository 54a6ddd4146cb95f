//! Numerical toolkit for the discrete Gauss Image Problem on polytopes.

pub mod error;
pub mod aleksandrov;
pub mod gauss;
pub(crate) mod lp;
pub mod measures;
pub mod oracles;
pub mod par;
pub mod polytope;
pub mod solver;
pub mod sphere;

pub use error::{GipError, Result};
pub use gauss::{compute_partition, evaluate, inclusion_violations, phi, pushforward_integral, subgradient, surrogate_objective, FunctionalValue, GaussPartition};
pub use measures::{total_mass, DensitySpec, DiscreteMeasure, QuadratureMeasure, TotalMass};
pub use polytope::{DualPolytope, ExtremalStats, IndexSet, Radii, RescaleSide};
pub use sphere::{build_grid, hemisphere_witness, DirectionSet, GridScheme, QuadratureGrid, UnitVector};
pub use aleksandrov::{
    check_classical, check_weak, classical_report, find_uniform_alpha, gauss_image_measure, necessity_check, ClassicalReport,
    NecessityReport, Verdict, WeakAleksandrovReport, WeakOptions,
};
pub use solver::{
    ratio_improvement_loop, rescale_recovery_step, solve, InitStrategy, RatioReport, RecoveryOutcome, SolverConfig, SolverReport,
    StepRule,
};

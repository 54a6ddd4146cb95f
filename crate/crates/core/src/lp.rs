//! Thin wrapper over `microlp` for the small dense programs used here
//! (at most a handful of variables, a few dozen constraints).

use crate::error::{GipError, Result};
use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, SolveOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub coeffs: Vec<f64>,
    pub cmp: Cmp,
    pub rhs: f64,
}

impl Row {
    pub fn le(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, cmp: Cmp::Le, rhs }
    }
    pub fn ge(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, cmp: Cmp::Ge, rhs }
    }
    pub fn eq(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, cmp: Cmp::Eq, rhs }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
}

/// Maximize `objective · x` subject to `rows` and per-variable `bounds`.
/// Callers keep every bound finite: the backend can stall or return NaN on
/// free variables.
pub(crate) fn maximize(objective: &[f64], bounds: &[(f64, f64)], rows: &[Row]) -> Result<LpSolution> {
    debug_assert_eq!(objective.len(), bounds.len());
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = objective
        .iter()
        .zip(bounds)
        .map(|(&c, &b)| problem.add_var(c, b))
        .collect();
    for row in rows {
        let mut expr = LinearExpr::empty();
        for (var, &c) in vars.iter().zip(&row.coeffs) {
            if c != 0.0 {
                expr.add(*var, c);
            }
        }
        let op = match row.cmp {
            Cmp::Le => ComparisonOp::Le,
            Cmp::Ge => ComparisonOp::Ge,
            Cmp::Eq => ComparisonOp::Eq,
        };
        problem.add_constraint(expr, op, row.rhs);
    }
    match problem.solve() {
        Ok(SolveOutcome::Solution(sol)) => Ok(LpSolution {
            objective: sol.objective(),
            x: vars.iter().map(|&v| sol.var_value_raw(v)).collect(),
        }),
        Ok(SolveOutcome::Interrupted(_)) => Err(GipError::Lp("interrupted".into())),
        Err(microlp::Error::Infeasible) => Err(GipError::Lp("infeasible".into())),
        Err(microlp::Error::Unbounded) => Err(GipError::Lp("unbounded".into())),
        Err(e) => Err(GipError::Lp(e.to_string())),
    }
}

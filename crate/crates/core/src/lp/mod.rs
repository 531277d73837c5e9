//! Dense bounded-variable linear programming.
//!
//! Problems are small (tens of variables and rows) and dense, so the solver
//! keeps a full tableau and runs a two-phase primal simplex with implicit
//! variable bounds. See [`solve`].

mod dense;
mod dump;
mod simplex;

pub use dump::{parse_dump, write_dump};
pub use simplex::{solve, solve_with, SolverOptions};

use crate::error::{Error, Result};

/// Absolute tolerance on constraint residuals of an optimal solution.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-7;
/// Absolute tolerance on variable-bound violations of an optimal solution.
pub const BOUND_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

/// `minimize objective·x` subject to `eq_constraints` (`row·x = rhs`),
/// `ineq_constraints` (`row·x <= rhs`) and per-variable bounds. Lower bounds
/// must be finite; upper bounds may be `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub eq_constraints: Vec<Constraint>,
    pub ineq_constraints: Vec<Constraint>,
    pub var_bounds: Vec<(f64, f64)>,
}

impl LpProblem {
    /// Empty problem over `n_vars` variables in `[0, +inf)` with zero cost.
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            objective: vec![0.0; n_vars],
            eq_constraints: Vec::new(),
            ineq_constraints: Vec::new(),
            var_bounds: vec![(0.0, f64::INFINITY); n_vars],
        }
    }

    pub fn add_eq(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.eq_constraints.push(Constraint { coeffs, rhs });
    }

    pub fn add_le(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.ineq_constraints.push(Constraint { coeffs, rhs });
    }

    /// `row·x >= rhs`, stored as `-row·x <= -rhs`.
    pub fn add_ge(&mut self, coeffs: Vec<f64>, rhs: f64) {
        let neg = coeffs.into_iter().map(|c| -c).collect();
        self.ineq_constraints.push(Constraint { coeffs: neg, rhs: -rhs });
    }

    pub fn n_rows(&self) -> usize {
        self.eq_constraints.len() + self.ineq_constraints.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::MalformedLp(msg));
        if self.objective.len() != self.n_vars {
            return bad(format!(
                "objective has {} entries for {} variables",
                self.objective.len(),
                self.n_vars
            ));
        }
        if self.var_bounds.len() != self.n_vars {
            return bad(format!(
                "{} bounds for {} variables",
                self.var_bounds.len(),
                self.n_vars
            ));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return bad("non-finite objective coefficient".into());
        }
        for (j, &(lo, hi)) in self.var_bounds.iter().enumerate() {
            if !lo.is_finite() || hi.is_nan() || hi == f64::NEG_INFINITY {
                return bad(format!("variable {j} has bounds [{lo}, {hi}]"));
            }
        }
        let rows = self.eq_constraints.iter().chain(&self.ineq_constraints);
        for (i, row) in rows.enumerate() {
            if row.coeffs.len() != self.n_vars {
                return bad(format!(
                    "row {i} has {} coefficients for {} variables",
                    row.coeffs.len(),
                    self.n_vars
                ));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|c| !c.is_finite()) {
                return bad(format!("row {i} has a non-finite entry"));
            }
        }
        Ok(())
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// Largest constraint violation of `x` (equality residual magnitude or
    /// inequality excess).
    pub fn max_constraint_violation(&self, x: &[f64]) -> f64 {
        let eq = self
            .eq_constraints
            .iter()
            .map(|r| (dot(&r.coeffs, x) - r.rhs).abs());
        let le = self
            .ineq_constraints
            .iter()
            .map(|r| (dot(&r.coeffs, x) - r.rhs).max(0.0));
        eq.chain(le).fold(0.0, f64::max)
    }

    pub fn max_bound_violation(&self, x: &[f64]) -> f64 {
        self.var_bounds
            .iter()
            .zip(x)
            .map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; meaningful only when `status` is optimal.
    pub x: Vec<f64>,
    pub objective_value: f64,
    /// Row multipliers at the optimum, equality rows first then inequality
    /// rows, in the sign convention `objective - Aᵀ·duals = reduced costs`.
    /// Empty unless optimal.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub(crate) fn status_only(status: LpStatus, n_vars: usize, iterations: usize) -> Self {
        Self {
            status,
            x: vec![0.0; n_vars],
            objective_value: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            duals: Vec::new(),
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

//! Two-phase primal simplex on a dense tableau with implicit bounds.
//!
//! Variables are shifted so every lower bound is zero; nonbasic variables
//! sit at either bound. Pricing is Dantzig's rule with a Harris two-pass
//! ratio test. After a run of degenerate pivots the phase switches to
//! Bland's rule for the rest of the phase, which rules out cycling. All
//! choices break ties by index, so a given problem always follows the same
//! pivot sequence.

use super::dense::Lu;
use super::{LpProblem, LpSolution, LpStatus, BOUND_TOLERANCE, CONSTRAINT_TOLERANCE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Smallest tableau entry accepted as a pivot.
    pub pivot_tol: f64,
    /// Reduced-cost threshold for optimality.
    pub cost_tol: f64,
    /// Primal feasibility slack used by the ratio test and phase one.
    pub feas_tol: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_limit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50_000,
            pivot_tol: 1e-9,
            cost_tol: 1e-9,
            feas_tol: 1e-9,
            degenerate_limit: 50,
        }
    }
}

pub fn solve(problem: &LpProblem) -> Result<LpSolution> {
    solve_with(problem, &SolverOptions::default())
}

pub fn solve_with(problem: &LpProblem, opts: &SolverOptions) -> Result<LpSolution> {
    problem.validate()?;
    let n = problem.n_vars;
    if problem
        .var_bounds
        .iter()
        .any(|&(lo, hi)| lo > hi + BOUND_TOLERANCE)
    {
        return Ok(LpSolution::status_only(LpStatus::Infeasible, n, 0));
    }

    let mut s = Simplex::build(problem, opts);
    if s.n_artificial > 0 {
        let mut phase1 = vec![0.0; s.width];
        for c in &mut phase1[s.first_artificial..] {
            *c = 1.0;
        }
        match s.run(&phase1)? {
            PhaseEnd::Optimal => {}
            // Phase one is bounded below by zero.
            PhaseEnd::Unbounded => {
                return Err(Error::NumericalBreakdown("phase one reported unbounded".into()))
            }
        }
        let infeasibility: f64 = (s.first_artificial..s.width).map(|k| s.value(k)).sum();
        let scale = 1.0 + s.rhs.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        if infeasibility > 1e-9 * scale {
            return Ok(LpSolution::status_only(LpStatus::Infeasible, n, s.iterations));
        }
        for u in &mut s.upper[s.first_artificial..] {
            *u = 0.0;
        }
        s.active = s.first_artificial;
    }

    let mut cost = vec![0.0; s.width];
    cost[..n].copy_from_slice(&problem.objective);
    if let PhaseEnd::Unbounded = s.run(&cost)? {
        return Ok(LpSolution::status_only(LpStatus::Unbounded, n, s.iterations));
    }
    s.finish(problem, &cost)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pos {
    Basic,
    Lower,
    Upper,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

enum Step {
    Unbounded,
    Flip(f64),
    Pivot { row: usize, theta: f64, leave_to: Pos },
}

struct Simplex<'o> {
    opts: &'o SolverOptions,
    m: usize,
    width: usize,
    /// Columns still maintained in the tableau (artificials drop out after
    /// phase one).
    active: usize,
    first_artificial: usize,
    n_artificial: usize,
    /// Original rows after sign normalisation, including slack and
    /// artificial columns; used for the final refinement.
    a0: Vec<f64>,
    rhs: Vec<f64>,
    row_sign: Vec<f64>,
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    pos: Vec<Pos>,
    upper: Vec<f64>,
    d: Vec<f64>,
    prow: Vec<f64>,
    iterations: usize,
}

impl<'o> Simplex<'o> {
    fn build(p: &LpProblem, opts: &'o SolverOptions) -> Self {
        let n = p.n_vars;
        let n_eq = p.eq_constraints.len();
        let n_le = p.ineq_constraints.len();
        let m = n_eq + n_le;
        let lower: Vec<f64> = p.var_bounds.iter().map(|b| b.0).collect();

        // Shifted right-hand sides and whether each row's slack can start basic.
        let rows: Vec<(&[f64], f64, Option<usize>)> = p
            .eq_constraints
            .iter()
            .map(|r| (r.coeffs.as_slice(), r.rhs, None))
            .chain(
                p.ineq_constraints
                    .iter()
                    .enumerate()
                    .map(|(k, r)| (r.coeffs.as_slice(), r.rhs, Some(n + k))),
            )
            .collect();

        let mut col_nnz = vec![0usize; n];
        for (coeffs, _, _) in &rows {
            for (j, c) in coeffs.iter().enumerate() {
                if *c != 0.0 {
                    col_nnz[j] += 1;
                }
            }
        }

        let mut upper: Vec<f64> = p.var_bounds.iter().map(|&(lo, hi)| (hi - lo).max(0.0)).collect();
        upper.extend(std::iter::repeat(f64::INFINITY).take(n_le));

        let mut basis = vec![usize::MAX; m];
        let mut rhs = vec![0.0; m];
        let mut row_sign = vec![1.0; m];
        let mut needs_artificial = Vec::new();
        let mut crashed = vec![false; n];
        for (i, (coeffs, b, slack)) in rows.iter().enumerate() {
            let r = b - super::dot(coeffs, &lower);
            if let Some(s) = slack {
                if r >= 0.0 {
                    rhs[i] = r;
                    basis[i] = *s;
                    continue;
                }
            }
            let sign = if r < 0.0 { -1.0 } else { 1.0 };
            row_sign[i] = sign;
            rhs[i] = r * sign;
            // A column that appears only in this row can start basic if its
            // implied value is within bounds.
            let crash = (0..n).find(|&j| {
                let c = coeffs[j] * sign;
                col_nnz[j] == 1 && !crashed[j] && c > 0.0 && rhs[i] / c <= upper[j]
            });
            match crash {
                Some(j) => {
                    crashed[j] = true;
                    basis[i] = j;
                }
                None => needs_artificial.push(i),
            }
        }

        let first_artificial = n + n_le;
        let n_artificial = needs_artificial.len();
        let width = first_artificial + n_artificial;
        upper.extend(std::iter::repeat(f64::INFINITY).take(n_artificial));

        let mut a0 = vec![0.0; m * width];
        for (i, (coeffs, _, slack)) in rows.iter().enumerate() {
            let sign = row_sign[i];
            let row = &mut a0[i * width..(i + 1) * width];
            for (j, c) in coeffs.iter().enumerate() {
                row[j] = c * sign;
            }
            if let Some(s) = slack {
                row[*s] = sign;
            }
        }
        for (k, &i) in needs_artificial.iter().enumerate() {
            a0[i * width + first_artificial + k] = 1.0;
            basis[i] = first_artificial + k;
        }

        let mut t = a0.clone();
        let mut beta = rhs.clone();
        for i in 0..m {
            let piv = t[i * width + basis[i]];
            if piv != 1.0 {
                for v in &mut t[i * width..(i + 1) * width] {
                    *v /= piv;
                }
                beta[i] /= piv;
            }
        }

        let mut pos = vec![Pos::Lower; width];
        for &b in &basis {
            pos[b] = Pos::Basic;
        }

        Self {
            opts,
            m,
            width,
            active: width,
            first_artificial,
            n_artificial,
            a0,
            rhs,
            row_sign,
            t,
            beta,
            basis,
            pos,
            upper,
            d: vec![0.0; width],
            prow: vec![0.0; width],
            iterations: 0,
        }
    }

    fn value(&self, k: usize) -> f64 {
        match self.pos[k] {
            Pos::Basic => {
                let row = self.basis.iter().position(|&b| b == k).expect("basic column");
                self.beta[row]
            }
            Pos::Lower => 0.0,
            Pos::Upper => self.upper[k],
        }
    }

    fn price(&mut self, cost: &[f64]) {
        let w = self.width;
        self.d[..self.active].copy_from_slice(&cost[..self.active]);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[i * w..i * w + self.active];
            for (d, a) in self.d[..self.active].iter_mut().zip(row) {
                *d -= cb * a;
            }
        }
        for &b in &self.basis {
            if b < self.active {
                self.d[b] = 0.0;
            }
        }
    }

    fn run(&mut self, cost: &[f64]) -> Result<PhaseEnd> {
        self.price(cost);
        let mut bland = false;
        let mut degenerate = 0usize;
        loop {
            let Some((j, dir)) = self.choose_entering(bland) else {
                return Ok(PhaseEnd::Optimal);
            };
            self.iterations += 1;
            if self.iterations > self.opts.max_iterations {
                return Err(Error::NumericalBreakdown(format!(
                    "no convergence after {} iterations",
                    self.opts.max_iterations
                )));
            }
            let theta = match self.ratio_test(j, dir, bland) {
                Step::Unbounded => return Ok(PhaseEnd::Unbounded),
                Step::Flip(theta) => {
                    self.shift_basics(j, dir * theta);
                    self.pos[j] = if self.pos[j] == Pos::Lower {
                        Pos::Upper
                    } else {
                        Pos::Lower
                    };
                    theta
                }
                Step::Pivot {
                    row,
                    theta,
                    leave_to,
                } => {
                    let entering_value = match self.pos[j] {
                        Pos::Upper => self.upper[j],
                        _ => 0.0,
                    } + dir * theta;
                    self.shift_basics(j, dir * theta);
                    let leaving = self.basis[row];
                    self.pos[leaving] = leave_to;
                    self.pos[j] = Pos::Basic;
                    self.basis[row] = j;
                    self.beta[row] = entering_value;
                    self.pivot(row, j);
                    theta
                }
            };
            if theta <= 1e-12 {
                degenerate += 1;
                if degenerate > self.opts.degenerate_limit {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
        }
    }

    /// Entering column and direction (+1 increase from lower, -1 decrease
    /// from upper).
    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.cost_tol;
        let mut best: Option<(usize, f64, f64)> = None;
        for k in 0..self.active {
            let (score, dir) = match self.pos[k] {
                Pos::Basic => continue,
                _ if self.upper[k] <= 0.0 => continue,
                Pos::Lower if self.d[k] < -tol => (-self.d[k], 1.0),
                Pos::Upper if self.d[k] > tol => (self.d[k], -1.0),
                _ => continue,
            };
            if bland {
                return Some((k, dir));
            }
            if best.map_or(true, |b| score > b.1) {
                best = Some((k, score, dir));
            }
        }
        best.map(|(k, _, dir)| (k, dir))
    }

    fn ratio_test(&self, j: usize, dir: f64, bland: bool) -> Step {
        let w = self.width;
        let piv_tol = self.opts.pivot_tol;
        let delta = if bland { 0.0 } else { self.opts.feas_tol };

        // Raw step limit and relaxed limit for row i, if it limits at all.
        let limit = |i: usize| -> Option<(f64, f64, Pos)> {
            let alpha = self.t[i * w + j] * dir;
            if alpha > piv_tol {
                let raw = self.beta[i].max(0.0) / alpha;
                Some((raw, (self.beta[i] + delta) / alpha, Pos::Lower))
            } else if alpha < -piv_tol {
                let ub = self.upper[self.basis[i]];
                if ub.is_infinite() {
                    return None;
                }
                let raw = (ub - self.beta[i]).max(0.0) / -alpha;
                Some((raw, (ub - self.beta[i] + delta) / -alpha, Pos::Upper))
            } else {
                None
            }
        };

        let mut chosen: Option<(usize, f64, Pos)> = None;
        if bland {
            for i in 0..self.m {
                if let Some((raw, _, to)) = limit(i) {
                    let better = match chosen {
                        None => true,
                        Some((ci, craw, _)) => {
                            raw < craw - 1e-12
                                || (raw <= craw + 1e-12 && self.basis[i] < self.basis[ci])
                        }
                    };
                    if better {
                        chosen = Some((i, raw, to));
                    }
                }
            }
        } else {
            let relaxed = (0..self.m)
                .filter_map(|i| limit(i).map(|l| l.1))
                .fold(f64::INFINITY, f64::min);
            if relaxed.is_finite() {
                let mut best_alpha = 0.0;
                for i in 0..self.m {
                    if let Some((raw, _, to)) = limit(i) {
                        let a = self.t[i * w + j].abs();
                        if raw <= relaxed && a > best_alpha {
                            best_alpha = a;
                            chosen = Some((i, raw, to));
                        }
                    }
                }
            }
        }

        let own = self.upper[j];
        match chosen {
            Some((_, raw, _)) if own.is_finite() && own <= raw => Step::Flip(own),
            Some((row, theta, leave_to)) => Step::Pivot {
                row,
                theta,
                leave_to,
            },
            None if own.is_finite() => Step::Flip(own),
            None => Step::Unbounded,
        }
    }

    fn shift_basics(&mut self, j: usize, delta: f64) {
        if delta == 0.0 {
            return;
        }
        let w = self.width;
        for i in 0..self.m {
            self.beta[i] -= delta * self.t[i * w + j];
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let w = self.width;
        let act = self.active;
        let p = self.t[r * w + j];
        {
            let row = &mut self.t[r * w..r * w + act];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[j] = 1.0;
            self.prow[..act].copy_from_slice(row);
        }
        let prow = &self.prow[..act];
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + j];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * w..i * w + act];
            for (v, pv) in row.iter_mut().zip(prow) {
                *v -= f * pv;
            }
            row[j] = 0.0;
        }
        let f = self.d[j];
        if f != 0.0 {
            for (d, pv) in self.d[..act].iter_mut().zip(prow) {
                *d -= f * pv;
            }
        }
        self.d[j] = 0.0;
    }

    /// Recovers the primal point from the final basis with a fresh
    /// factorisation, computes row duals, and checks feasibility.
    fn finish(self, p: &LpProblem, cost: &[f64]) -> Result<LpSolution> {
        let (m, w, n) = (self.m, self.width, p.n_vars);
        let mut v: Vec<f64> = (0..w)
            .map(|k| match self.pos[k] {
                Pos::Upper => self.upper[k],
                _ => 0.0,
            })
            .collect();
        let mut duals = vec![0.0; m];
        if m > 0 {
            let mut b = vec![0.0; m * m];
            for i in 0..m {
                for (c, &col) in self.basis.iter().enumerate() {
                    b[i * m + c] = self.a0[i * w + col];
                }
            }
            let rhs: Vec<f64> = (0..m)
                .map(|i| {
                    let row = &self.a0[i * w..(i + 1) * w];
                    self.rhs[i]
                        - (0..w)
                            .filter(|&k| self.pos[k] == Pos::Upper)
                            .map(|k| row[k] * self.upper[k])
                            .sum::<f64>()
                })
                .collect();
            match Lu::factor(b, m) {
                Some(lu) => {
                    let xb = lu.solve(&rhs);
                    for (i, &col) in self.basis.iter().enumerate() {
                        v[col] = xb[i];
                    }
                    let cb: Vec<f64> = self.basis.iter().map(|&c| cost[c]).collect();
                    let y = lu.solve_transpose(&cb);
                    for i in 0..m {
                        duals[i] = y[i] * self.row_sign[i];
                    }
                }
                None => {
                    for (i, &col) in self.basis.iter().enumerate() {
                        v[col] = self.beta[i];
                    }
                }
            }
        }

        let mut x = vec![0.0; n];
        for j in 0..n {
            let (lo, hi) = p.var_bounds[j];
            let mut xj = lo + v[j];
            if xj < lo && lo - xj <= 1e-7 {
                xj = lo;
            }
            if xj > hi && xj - hi <= 1e-7 {
                xj = hi;
            }
            x[j] = xj;
        }
        let cviol = p.max_constraint_violation(&x);
        let bviol = p.max_bound_violation(&x);
        if cviol > CONSTRAINT_TOLERANCE || bviol > BOUND_TOLERANCE {
            return Err(Error::NumericalBreakdown(format!(
                "final point violates constraints by {cviol:e} and bounds by {bviol:e}"
            )));
        }
        Ok(LpSolution {
            status: LpStatus::Optimal,
            objective_value: p.objective_at(&x),
            x,
            duals,
            iterations: self.iterations,
        })
    }
}

//! Reference implementations used to cross-check the solver, the MPC and
//! the threshold planner. Each one is written from the problem statement
//! and shares no code with the library beyond its data types.
#![allow(dead_code)]

use bess_core::domain::BatterySpec;
use bess_core::ingest::ProfileSet;
use bess_core::sim::SimulationResult;
use bess_core::lp::{LpProblem, LpSolution};
use bess_core::mpc::MpcConfig;
use rand::Rng;

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` if singular.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn combinations(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Best objective over all basic feasible points of a problem whose
/// variables all have finite bounds. `None` when no vertex is feasible.
pub fn vertex_optimum(p: &LpProblem) -> Option<f64> {
    let n = p.n_vars;
    assert!(p.var_bounds.iter().all(|b| b.1.is_finite()), "oracle needs finite bounds");
    // Candidate active hyperplanes: inequality rows, then lower and upper
    // bounds. Equality rows are always active.
    let mut planes: Vec<(Vec<f64>, f64)> = p.ineq_constraints.iter().map(|r| (r.coeffs.clone(), r.rhs)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), p.var_bounds[j].0));
        planes.push((e, p.var_bounds[j].1));
    }
    let m_eq = p.eq_constraints.len();
    if m_eq > n {
        return None;
    }
    let mut best: Option<f64> = None;
    combinations(planes.len(), n - m_eq, &mut |pick| {
        let mut a: Vec<Vec<f64>> = p.eq_constraints.iter().map(|r| r.coeffs.clone()).collect();
        let mut b: Vec<f64> = p.eq_constraints.iter().map(|r| r.rhs).collect();
        for &i in pick {
            a.push(planes[i].0.clone());
            b.push(planes[i].1);
        }
        let Some(x) = solve_square(a, b) else { return };
        if p.max_constraint_violation(&x) > 1e-7 || p.max_bound_violation(&x) > 1e-7 {
            return;
        }
        let obj = p.objective_at(&x);
        if best.map_or(true, |v| obj < v) {
            best = Some(obj);
        }
    });
    best
}

/// Random bounded LP with `2..=6` variables and at most six rows. About one
/// in ten is made infeasible by a contradictory pair of rows.
pub fn random_lp(rng: &mut impl Rng) -> LpProblem {
    let n = rng.gen_range(2..=6);
    let mut p = LpProblem::new(n);
    for j in 0..n {
        let lo = rng.gen_range(-3.0..1.0);
        p.var_bounds[j] = (lo, lo + rng.gen_range(0.5..6.0));
        p.objective[j] = rng.gen_range(-5.0..5.0);
    }
    let x0: Vec<f64> = p.var_bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
    let row = |rng: &mut dyn rand::RngCore| -> Vec<f64> {
        (0..n)
            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(-4.0..4.0) })
            .collect()
    };
    let dot = |a: &[f64], x: &[f64]| a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>();
    let infeasible = rng.gen_bool(0.1);
    let m_eq = rng.gen_range(0..=n.min(2));
    let m_in = rng.gen_range(1..=6 - m_eq - usize::from(infeasible));
    // Dense equality rows keep them independent, which the oracle assumes.
    for _ in 0..m_eq {
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..4.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let rhs = dot(&a, &x0);
        p.add_eq(a, rhs);
    }
    for _ in 0..m_in {
        let a = row(rng);
        let rhs = dot(&a, &x0) + rng.gen_range(0.0..3.0);
        p.add_le(a, rhs);
    }
    if infeasible {
        let a = row(rng);
        let rhs = dot(&a, &x0);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        p.ineq_constraints.pop();
        p.add_le(a, rhs - 1.0);
        p.add_le(neg, -rhs - 1.0);
    }
    p
}

/// Largest violation of the optimality conditions for `sol`: primal
/// feasibility, sign and complementarity of row multipliers, reduced-cost
/// signs at bounds, and the primal-dual objective gap.
pub fn kkt_residual(p: &LpProblem, sol: &LpSolution) -> f64 {
    let n = p.n_vars;
    let x = &sol.x;
    let rows: Vec<_> = p.eq_constraints.iter().chain(&p.ineq_constraints).collect();
    assert_eq!(sol.duals.len(), rows.len());
    let mut worst = p.max_constraint_violation(x).max(p.max_bound_violation(x));
    let mut reduced = p.objective.clone();
    for (row, &y) in rows.iter().zip(&sol.duals) {
        for j in 0..n {
            reduced[j] -= row.coeffs[j] * y;
        }
    }
    for (i, row) in p.ineq_constraints.iter().enumerate() {
        let y = sol.duals[p.eq_constraints.len() + i];
        let slack = row.rhs - row.coeffs.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        worst = worst.max(y).max((y * slack).abs());
    }
    let mut bound_term = 0.0;
    for j in 0..n {
        let (lo, hi) = p.var_bounds[j];
        let d = reduced[j];
        let at_lo = (x[j] - lo).abs() <= 1e-7;
        let at_hi = hi.is_finite() && (x[j] - hi).abs() <= 1e-7;
        let v = match (at_lo, at_hi) {
            (true, true) => 0.0,
            (true, false) => (-d).max(0.0),
            (false, true) => d.max(0.0),
            (false, false) => d.abs(),
        };
        worst = worst.max(v);
        bound_term += d * x[j];
    }
    let dual_obj: f64 = rows.iter().zip(&sol.duals).map(|(r, y)| r.rhs * y).sum::<f64>() + bound_term;
    worst.max((p.objective_at(x) - dual_obj).abs() / (1.0 + p.objective_at(x).abs()))
}

/// One small MPC instance.
#[derive(Debug, Clone)]
pub struct MpcInstance {
    pub spec: BatterySpec,
    pub soc0: f64,
    pub load: Vec<f64>,
    pub pv: Vec<f64>,
    pub dct: Vec<f64>,
    pub soc_req: f64,
    pub config: MpcConfig,
    pub step_hours: f64,
}

/// Random instance with integer powers, small enough for [`mpc_grid_optimum`].
pub fn random_mpc_instance(rng: &mut impl Rng) -> MpcInstance {
    let t = rng.gen_range(2..=4);
    let p_max = f64::from(rng.gen_range(2..=5));
    let cap = f64::from(rng.gen_range(1..=4));
    let spec = BatterySpec::new(p_max, cap).unwrap();
    let soc0 = f64::from(rng.gen_range(0..=4)) / 4.0 * cap;
    let load: Vec<f64> = (0..t).map(|_| f64::from(rng.gen_range(0..=12))).collect();
    let pv: Vec<f64> = (0..t).map(|_| f64::from(rng.gen_range(0..=12))).collect();
    let dct: Vec<f64> = (0..t).map(|_| f64::from(rng.gen_range(0..=10))).collect();
    let soc_req = f64::from(rng.gen_range(0..=4)) / 4.0 * cap;
    let config = MpcConfig {
        horizon_steps: t,
        ..MpcConfig::default()
    };
    MpcInstance {
        spec,
        soc0,
        load,
        pv,
        dct,
        soc_req,
        config,
        step_hours: 0.25,
    }
}

/// Exhaustive search over battery powers on a 1 kW grid. Each step's power
/// is split into exclusive charge or discharge; purchases and sales cover
/// the remainder, and the two slacks take the smallest values the
/// trajectory allows.
pub fn mpc_grid_optimum(inst: &MpcInstance) -> f64 {
    let t = inst.load.len();
    let p_max = inst.spec.p_max_kw.floor() as i64;
    let levels = (2 * p_max + 1) as usize;
    let floor = inst.soc_req.max(inst.spec.soc_min_kwh);
    let slack_cap = floor - inst.spec.soc_min_kwh;
    let c = &inst.config;
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; t];
    loop {
        let mut soc = inst.soc0;
        let (mut cost, mut s_soc, mut s_dct) = (0.0, 0.0f64, 0.0f64);
        let mut ok = true;
        for k in 0..t {
            let b = idx[k] as f64 - p_max as f64;
            cost += c.c_tp * b.abs();
            soc += b * inst.step_hours;
            if soc > inst.spec.soc_max_kwh + 1e-9 || soc < inst.spec.soc_min_kwh - 1e-9 {
                ok = false;
                break;
            }
            s_soc = s_soc.max(floor - soc);
            let grid = inst.load[k] - inst.pv[k] + b;
            cost += (-grid).max(0.0);
            s_dct = s_dct.max(grid.max(0.0) - inst.dct[k]);
        }
        if ok && s_soc <= slack_cap + 1e-9 {
            best = best.min(cost + c.alpha * s_soc + c.beta * s_dct);
        }
        let mut k = 0;
        loop {
            if k == t {
                return best;
            }
            idx[k] += 1;
            if idx[k] < levels {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Greedy threshold policy written out longhand: charge toward the
/// threshold when below it, discharge the excess when above, starting full.
/// Returns the largest purchase above the threshold and the final SOC.
pub fn threshold_walk(net: &[f64], dct: f64, spec: &BatterySpec, dt: f64) -> (f64, f64) {
    let mut soc = spec.soc_max_kwh;
    let mut excess: f64 = 0.0;
    for &x in net {
        let battery = if x > dct {
            let room = (soc - spec.soc_min_kwh) / dt;
            -(x - dct).min(spec.p_max_kw).min(room)
        } else {
            let room = (spec.soc_max_kwh - soc) / dt;
            (dct - x).min(spec.p_max_kw).min(room)
        };
        soc += battery * dt;
        excess = excess.max(x + battery - dct);
    }
    (excess, soc)
}

/// Smallest threshold on a `step` grid in `[0, hi]` whose walk stays under
/// the threshold and ends full again.
pub fn threshold_scan(net: &[f64], spec: &BatterySpec, dt: f64, step: f64, hi: f64) -> f64 {
    let n = (hi / step).ceil() as usize;
    (0..=n)
        .map(|i| i as f64 * step)
        .find(|&d| {
            let (excess, end) = threshold_walk(net, d, spec, dt);
            excess <= 1e-6 && end >= spec.soc_max_kwh - 1e-6
        })
        .unwrap_or(hi)
}

/// Worst-case bookkeeping errors of a closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Audit {
    /// kWh outside `[soc_min, soc_max]`.
    pub soc_violation: f64,
    /// kW residual of `pur - sell = load - pv + cha - dis`.
    pub balance_residual: f64,
    /// kWh gap between final SOC and the initial SOC plus net stored energy.
    pub telescoping_error: f64,
    /// Intervals with both charge and discharge above 1e-6 kW.
    pub simultaneous: usize,
}

pub fn audit(profiles: &ProfileSet, r: &SimulationResult, spec: &BatterySpec) -> Audit {
    let dt = profiles.step_hours();
    let (pur, sell) = (r.p_pur.values(), r.p_sell.values());
    let (cha, dis) = (r.p_cha.values(), r.p_dis.values());
    let mut a = Audit {
        soc_violation: 0.0,
        balance_residual: 0.0,
        telescoping_error: 0.0,
        simultaneous: 0,
    };
    let mut stored = 0.0;
    for i in 0..r.len() {
        let soc = r.soc_kwh[i];
        a.soc_violation = a.soc_violation.max(spec.soc_min_kwh - soc).max(soc - spec.soc_max_kwh);
        let want = profiles.load.values()[i] - profiles.pv.values()[i] + cha[i] - dis[i];
        a.balance_residual = a.balance_residual.max((pur[i] - sell[i] - want).abs());
        if cha[i] > 1e-6 && dis[i] > 1e-6 {
            a.simultaneous += 1;
        }
        stored += (cha[i] - dis[i]) * dt;
    }
    if let Some(last) = r.soc_kwh.last() {
        a.telescoping_error = (last - r.initial_soc_kwh - stored).abs();
    }
    a
}

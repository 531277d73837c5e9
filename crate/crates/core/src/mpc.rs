//! Receding-horizon planner: one LP per interval over the next `T` steps.
//!
//! Column layout for step `k` of the horizon: `4k` charge, `4k+1`
//! discharge, `4k+2` purchase, `4k+3` sale. The two scalar slacks follow:
//! `4T` on the SOC requirement and `4T+1` on the threshold.

use std::fmt::Write as _;

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::domain::{BatterySpec, BatteryState};
use crate::error::{Error, Result};
use crate::forecast::Forecast;
use crate::ingest::TIMESTAMP_FORMAT;
use crate::lp::{self, LpProblem, LpSolution};

pub const PLAN_HEADER: &str = "timestamp,p_cha_kw,p_dis_kw,soc_kwh";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SocReqMode {
    #[default]
    RollingAverage,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// Slacks priced by `alpha` and `beta`; always feasible.
    #[default]
    Soft,
    /// Slacks pinned to zero; may be infeasible.
    Hard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcConfig {
    pub horizon_steps: usize,
    pub alpha: f64,
    pub beta: f64,
    pub c_tp: f64,
    pub soc_req_mode: SocReqMode,
    pub soc_req_fixed_kwh: Option<f64>,
    pub soc_req_window_days: usize,
    pub formulation: Formulation,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon_steps: 16,
            alpha: 10.0,
            beta: 100.0,
            c_tp: 0.05,
            soc_req_mode: SocReqMode::RollingAverage,
            soc_req_fixed_kwh: None,
            soc_req_window_days: 7,
            formulation: Formulation::Soft,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_steps < 1 {
            return Err(Error::InvalidHorizon);
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("c_tp", self.c_tp)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.soc_req_window_days < 1 {
            return Err(Error::Config("soc_req_window_days must be at least 1".into()));
        }
        match (self.soc_req_mode, self.soc_req_fixed_kwh) {
            (SocReqMode::Fixed, None) => Err(Error::Config(
                "soc_req_mode fixed needs soc_req_fixed_kwh".into(),
            )),
            (_, Some(v)) if !(v.is_finite() && v >= 0.0) => Err(Error::Config(format!(
                "soc_req_fixed_kwh must be finite and >= 0, got {v}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Energy a day needed from the battery to hold purchases at the threshold:
/// the running sum of `max(net - dct, 0) * dt` over the day, which peaks at
/// its final value.
pub fn daily_requirement_kwh(net_kw: &[f64], dct_kw: &[f64], step_hours: f64) -> f64 {
    net_kw
        .iter()
        .zip(dct_kw)
        .map(|(n, d)| (n - d).max(0.0) * step_hours)
        .sum()
}

/// SOC floor for the coming day. `history` holds per-day requirements,
/// oldest first.
pub fn soc_req(history: &[f64], config: &MpcConfig, spec: &BatterySpec) -> Result<f64> {
    let clamp = |v: f64| v.clamp(spec.soc_min_kwh, spec.soc_max_kwh);
    match config.soc_req_mode {
        SocReqMode::Fixed => config
            .soc_req_fixed_kwh
            .map(clamp)
            .ok_or_else(|| Error::Config("soc_req_mode fixed needs soc_req_fixed_kwh".into())),
        SocReqMode::RollingAverage => {
            if history.is_empty() {
                return Err(Error::NoHistory);
            }
            let n = config.soc_req_window_days.max(1).min(history.len());
            let recent = &history[history.len() - n..];
            Ok(clamp(recent.iter().sum::<f64>() / n as f64))
        }
    }
}

pub fn n_vars(horizon: usize) -> usize {
    4 * horizon + 2
}

/// Builds the horizon LP at the default 15-minute cadence.
pub fn build_problem(
    state: BatteryState,
    forecast: &Forecast,
    dct_kw: &[f64],
    spec: &BatterySpec,
    soc_req_kwh: f64,
    config: &MpcConfig,
) -> Result<LpProblem> {
    build_problem_dt(state, forecast, dct_kw, spec, soc_req_kwh, config, 0.25)
}

/// As [`build_problem`] with an explicit step length in hours.
pub fn build_problem_dt(
    state: BatteryState,
    forecast: &Forecast,
    dct_kw: &[f64],
    spec: &BatterySpec,
    soc_req_kwh: f64,
    config: &MpcConfig,
    step_hours: f64,
) -> Result<LpProblem> {
    let t_len = config.horizon_steps;
    if t_len < 1 {
        return Err(Error::InvalidHorizon);
    }
    if forecast.horizon_steps != t_len || forecast.load_kw.len() != t_len || forecast.pv_kw.len() != t_len {
        return Err(Error::DimensionMismatch(format!(
            "forecast has {} steps, horizon is {t_len}",
            forecast.horizon_steps
        )));
    }
    if dct_kw.len() != t_len {
        return Err(Error::DimensionMismatch(format!(
            "threshold slice has {} steps, horizon is {t_len}",
            dct_kw.len()
        )));
    }
    if !soc_req_kwh.is_finite() || !state.soc_kwh.is_finite() || dct_kw.iter().any(|d| !d.is_finite()) {
        return Err(Error::DimensionMismatch("non-finite MPC input".into()));
    }
    let n = n_vars(t_len);
    let (s_soc, s_dct) = (4 * t_len, 4 * t_len + 1);
    let mut p = LpProblem::new(n);

    for k in 0..t_len {
        p.objective[4 * k] = config.c_tp;
        p.objective[4 * k + 1] = config.c_tp;
        p.objective[4 * k + 3] = 1.0;
        p.var_bounds[4 * k] = (0.0, spec.p_max_kw);
        p.var_bounds[4 * k + 1] = (0.0, spec.p_max_kw);
    }
    p.objective[s_soc] = config.alpha;
    p.objective[s_dct] = config.beta;

    // The requirement never pulls the floor below soc_min, and the slack
    // cannot take SOC under it either.
    let floor = soc_req_kwh.max(spec.soc_min_kwh);
    let slack_cap = match config.formulation {
        Formulation::Soft => floor - spec.soc_min_kwh,
        Formulation::Hard => 0.0,
    };
    p.var_bounds[s_soc] = (0.0, slack_cap);
    if config.formulation == Formulation::Hard {
        p.var_bounds[s_dct] = (0.0, 0.0);
    }

    // sell - pur - dis + cha = pv - load
    for k in 0..t_len {
        let mut row = vec![0.0; n];
        row[4 * k] = 1.0;
        row[4 * k + 1] = -1.0;
        row[4 * k + 2] = -1.0;
        row[4 * k + 3] = 1.0;
        p.add_eq(row, forecast.pv_kw[k] - forecast.load_kw[k]);
    }
    // SOC after step k: soc0 + dt * sum_{j<=k} (cha_j - dis_j).
    let soc0 = state.soc_kwh;
    for k in 0..t_len {
        let mut up = vec![0.0; n];
        for j in 0..=k {
            up[4 * j] = step_hours;
            up[4 * j + 1] = -step_hours;
        }
        let mut low: Vec<f64> = up.iter().map(|c| -c).collect();
        low[s_soc] = -1.0;
        p.add_le(up, spec.soc_max_kwh - soc0);
        p.add_le(low, soc0 - floor);
    }
    for (k, &d) in dct_kw.iter().enumerate() {
        let mut row = vec![0.0; n];
        row[4 * k + 2] = 1.0;
        row[s_dct] = -1.0;
        p.add_le(row, d);
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcPlan {
    pub p_cha_star: Vec<f64>,
    pub p_dis_star: Vec<f64>,
    pub p_pur_kw: Vec<f64>,
    pub p_sell_kw: Vec<f64>,
    /// SOC at the start of each step plus the terminal value (`T + 1`).
    pub soc_trajectory: Vec<f64>,
    pub soc_slack_kwh: f64,
    pub dct_slack_kw: f64,
    pub objective_value: f64,
}

impl MpcPlan {
    pub fn horizon_steps(&self) -> usize {
        self.p_cha_star.len()
    }

    /// One row per step; `soc_kwh` is the SOC at the end of the step.
    pub fn to_csv(&self, start: NaiveDateTime, step_minutes: u32) -> String {
        let mut out = String::from(PLAN_HEADER);
        out.push('\n');
        for k in 0..self.horizon_steps() {
            let ts = start + Duration::minutes(i64::from(step_minutes) * k as i64);
            let _ = writeln!(
                out,
                "{},{},{},{}",
                ts.format(TIMESTAMP_FORMAT),
                self.p_cha_star[k],
                self.p_dis_star[k],
                self.soc_trajectory[k + 1]
            );
        }
        out
    }
}

/// Solves one horizon and maps the LP solution back to a plan.
pub fn plan(
    state: BatteryState,
    forecast: &Forecast,
    dct_kw: &[f64],
    spec: &BatterySpec,
    soc_req_kwh: f64,
    config: &MpcConfig,
) -> Result<MpcPlan> {
    plan_dt(state, forecast, dct_kw, spec, soc_req_kwh, config, 0.25, &mut |_, _| {})
}

/// As [`plan`] with an explicit step length, calling `observe` with each
/// problem and its solution before the plan is extracted.
#[allow(clippy::too_many_arguments)]
pub fn plan_dt(
    state: BatteryState,
    forecast: &Forecast,
    dct_kw: &[f64],
    spec: &BatterySpec,
    soc_req_kwh: f64,
    config: &MpcConfig,
    step_hours: f64,
    observe: &mut dyn FnMut(&LpProblem, &LpSolution),
) -> Result<MpcPlan> {
    config.validate()?;
    let problem = build_problem_dt(state, forecast, dct_kw, spec, soc_req_kwh, config, step_hours)?;
    let sol = lp::solve(&problem)?;
    observe(&problem, &sol);
    if !sol.is_optimal() {
        return Err(Error::SolverFailure {
            interval: None,
            msg: format!("LP status {:?}", sol.status),
        });
    }
    Ok(extract(&sol, state, spec, config.horizon_steps, step_hours))
}

fn extract(sol: &LpSolution, state: BatteryState, spec: &BatterySpec, t_len: usize, dt: f64) -> MpcPlan {
    // Clean solver round-off so the guideline respects its bounds exactly.
    let clean = |v: f64, hi: f64| v.clamp(0.0, hi);
    let x = &sol.x;
    let p_cha_star: Vec<f64> = (0..t_len).map(|k| clean(x[4 * k], spec.p_max_kw)).collect();
    let p_dis_star: Vec<f64> = (0..t_len).map(|k| clean(x[4 * k + 1], spec.p_max_kw)).collect();
    let mut soc_trajectory = Vec::with_capacity(t_len + 1);
    let mut soc = state.soc_kwh;
    soc_trajectory.push(soc);
    for k in 0..t_len {
        soc += (p_cha_star[k] - p_dis_star[k]) * dt;
        soc_trajectory.push(soc);
    }
    MpcPlan {
        p_pur_kw: (0..t_len).map(|k| clean(x[4 * k + 2], f64::INFINITY)).collect(),
        p_sell_kw: (0..t_len).map(|k| clean(x[4 * k + 3], f64::INFINITY)).collect(),
        p_cha_star,
        p_dis_star,
        soc_trajectory,
        soc_slack_kwh: x[4 * t_len].max(0.0),
        dct_slack_kw: x[4 * t_len + 1].max(0.0),
        objective_value: sol.objective_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> BatterySpec {
        BatterySpec::reference()
    }

    fn cfg(t: usize) -> MpcConfig {
        MpcConfig {
            horizon_steps: t,
            ..MpcConfig::default()
        }
    }

    #[test]
    fn variable_count() {
        let f = Forecast::new(vec![100.0; 16], vec![0.0; 16]).unwrap();
        let p = build_problem(BatteryState::new(170.0), &f, &[300.0; 16], &spec(), 100.0, &cfg(16)).unwrap();
        assert_eq!(p.n_vars, 66);
        assert!(matches!(
            build_problem(BatteryState::new(170.0), &f, &[300.0; 15], &spec(), 100.0, &cfg(16)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn nothing_to_do() {
        let f = Forecast::new(vec![100.0; 8], vec![0.0; 8]).unwrap();
        let plan = plan(BatteryState::new(100.0), &f, &[300.0; 8], &spec(), 100.0, &cfg(8)).unwrap();
        assert!(plan.p_sell_kw.iter().all(|&s| s == 0.0));
        assert!(plan.soc_slack_kwh <= 1e-9 && plan.dct_slack_kw <= 1e-9);
        assert!(plan.objective_value.abs() < 1e-9);
    }

    #[test]
    fn surplus_is_charged() {
        let f = Forecast::new(vec![100.0; 4], vec![150.0; 4]).unwrap();
        let plan = plan(BatteryState::new(100.0), &f, &[300.0; 4], &spec(), 0.0, &cfg(4)).unwrap();
        for k in 0..4 {
            assert!((plan.p_cha_star[k] - 50.0).abs() < 1e-6);
            assert!(plan.p_sell_kw[k].abs() < 1e-6);
        }
        assert!((plan.soc_trajectory[4] - 150.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_threshold_uses_slack() {
        // 600 kW against a 300 kW threshold with an empty battery.
        let f = Forecast::new(vec![600.0; 4], vec![0.0; 4]).unwrap();
        let plan = plan(BatteryState::new(0.0), &f, &[300.0; 4], &spec(), 0.0, &cfg(4)).unwrap();
        assert!((plan.dct_slack_kw - 300.0).abs() < 1e-6);
    }

    #[test]
    fn soc_req_modes() {
        let c = MpcConfig::default();
        let s = BatterySpec::with_bounds(710.0, 340.0, 20.0, 340.0).unwrap();
        assert_eq!(soc_req(&[0.0], &c, &s).unwrap(), 20.0);
        assert!(matches!(soc_req(&[], &c, &s), Err(Error::NoHistory)));
        let ten = daily_requirement_kwh(&[340.0, 100.0], &[300.0, 300.0], 0.25);
        assert_eq!(ten, 10.0);
        assert_eq!(soc_req(&[ten], &c, &s).unwrap(), 20.0);
        assert_eq!(soc_req(&[ten], &c, &spec()).unwrap(), 10.0);
        let fixed = MpcConfig {
            soc_req_mode: SocReqMode::Fixed,
            soc_req_fixed_kwh: Some(100.0),
            ..c.clone()
        };
        assert_eq!(soc_req(&[], &fixed, &s).unwrap(), 100.0);
        // Rolling window only looks at the last N days.
        let hist: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(soc_req(&hist, &c, &spec()).unwrap(), 6.0);
    }

    #[test]
    fn hard_mode_agrees_when_slacks_idle() {
        let f = Forecast::new(vec![200.0, 80.0, 60.0, 250.0], vec![0.0, 140.0, 160.0, 20.0]).unwrap();
        let soft = plan(BatteryState::new(150.0), &f, &[220.0; 4], &spec(), 50.0, &cfg(4)).unwrap();
        assert!(soft.dct_slack_kw < 1e-9 && soft.soc_slack_kwh < 1e-9);
        let hard_cfg = MpcConfig {
            formulation: Formulation::Hard,
            ..cfg(4)
        };
        let hard = plan(BatteryState::new(150.0), &f, &[220.0; 4], &spec(), 50.0, &hard_cfg).unwrap();
        assert!((soft.objective_value - hard.objective_value).abs() < 1e-9);
    }

    #[test]
    fn plan_csv_layout() {
        let f = Forecast::new(vec![100.0; 2], vec![150.0; 2]).unwrap();
        let plan = plan(BatteryState::new(100.0), &f, &[300.0; 2], &spec(), 0.0, &cfg(2)).unwrap();
        let start = chrono::NaiveDate::from_ymd_opt(2023, 7, 1).unwrap().and_hms_opt(12, 0, 0).unwrap();
        let csv = plan.to_csv(start, 15);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], PLAN_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("2023-07-01T12:15,"));
    }
}

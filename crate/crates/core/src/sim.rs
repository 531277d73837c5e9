//! Closed-loop simulation over a calendar span at the profile cadence.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::dct::{greedy_run, plan_span, DctSchedule, PlanningMode};
use crate::domain::{apply_dispatch, BatterySpec, BatteryState, Dispatch, PowerSeries};
use crate::error::{Error, Result};
use crate::forecast::{perfect_forecast, Forecast, ForecasterKind};
use crate::ingest::{ProfileSet, TIMESTAMP_FORMAT};
use crate::lp::{LpProblem, LpSolution};
use crate::metrics::{self, Metrics};
use crate::mpc::{daily_requirement_kwh, plan_dt, soc_req, MpcConfig};
use crate::realtime::{realtime_decide, RealtimeCase, OVERRIDE_EPS_KW};
use crate::rule::rule_dispatch;
use crate::tariff::{monthly_bills, MonthlyBill, TariffSchedule};

pub const TRACES_HEADER: &str = "timestamp,p_pur_kw,p_sell_kw,p_cha_kw,p_dis_kw,soc_kwh,dct_kw";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    NoBess,
    RuleBased,
    Mpc,
}

impl ControllerKind {
    pub fn label(self) -> &'static str {
        match self {
            ControllerKind::NoBess => "NoBESS",
            ControllerKind::RuleBased => "RuleBased",
            ControllerKind::Mpc => "MPC",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DctSource {
    #[default]
    Planned,
    User,
}

/// Inclusive calendar-day range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Span {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub controller: ControllerKind,
    pub battery: BatterySpec,
    #[serde(default)]
    pub mpc: MpcConfig,
    #[serde(default)]
    pub forecaster: ForecasterKind,
    /// Defaults to `soc_max_kwh`.
    #[serde(default)]
    pub initial_soc_kwh: Option<f64>,
    #[serde(default)]
    pub dct_source: DctSource,
    #[serde(default)]
    pub planning_mode: PlanningMode,
    #[serde(default)]
    pub span: Option<Span>,
}

impl SimulationConfig {
    pub fn new(controller: ControllerKind, battery: BatterySpec) -> Self {
        Self {
            controller,
            battery,
            mpc: MpcConfig::default(),
            forecaster: ForecasterKind::Perfect,
            initial_soc_kwh: None,
            dct_source: DctSource::Planned,
            planning_mode: PlanningMode::Hindsight,
            span: None,
        }
    }

    pub fn initial_soc(&self) -> f64 {
        self.initial_soc_kwh.unwrap_or(self.battery.soc_max_kwh)
    }

    pub fn validate(&self) -> Result<()> {
        self.battery.validate()?;
        if self.controller == ControllerKind::Mpc {
            self.mpc.validate()?;
        }
        let soc0 = self.initial_soc();
        if !(soc0.is_finite() && soc0 >= self.battery.soc_min_kwh && soc0 <= self.battery.soc_max_kwh) {
            return Err(Error::Config(format!(
                "initial_soc_kwh {soc0} outside [{}, {}]",
                self.battery.soc_min_kwh, self.battery.soc_max_kwh
            )));
        }
        if let Some(span) = self.span {
            if span.end < span.start {
                return Err(Error::Config(format!("span ends ({}) before it starts ({})", span.end, span.start)));
            }
        }
        Ok(())
    }
}

/// Tallies of real-time override activity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OverrideCounts {
    /// Intervals where the discharge override fired.
    pub discharge_activations: usize,
    /// Intervals where the charge override fired.
    pub charge_activations: usize,
    /// Discharge overrides that added discharge the guideline lacked.
    pub discharge_corrections: usize,
    /// Of those, corrections at intervals where the threshold was reachable
    /// over the horizon from the current SOC.
    pub discharge_corrections_reachable: usize,
    /// Charge overrides that absorbed export the guideline left.
    pub charge_corrections: usize,
    /// Intervals where the persistence forecaster lacked a prior day and
    /// the true values were used instead.
    pub forecast_fallbacks: usize,
}

/// No-battery reference for the same profiles and span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub sold_kwh: f64,
    pub purchased_kwh: f64,
    pub dc_cost_usd: f64,
    pub monthly_bills: Vec<MonthlyBill>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub controller: ControllerKind,
    pub p_pur: PowerSeries,
    pub p_sell: PowerSeries,
    pub p_cha: PowerSeries,
    pub p_dis: PowerSeries,
    /// SOC at the end of each interval.
    pub soc_kwh: Vec<f64>,
    pub initial_soc_kwh: f64,
    pub dct_kw: Vec<f64>,
    pub monthly_bills: Vec<MonthlyBill>,
    pub override_counts: OverrideCounts,
    pub baseline: Baseline,
    pub metrics: Metrics,
}

impl SimulationResult {
    pub fn len(&self) -> usize {
        self.p_pur.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_pur.is_empty()
    }

    pub fn traces_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 64);
        out.push_str(TRACES_HEADER);
        out.push('\n');
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.p_pur.timestamp(i).format(TIMESTAMP_FORMAT),
                self.p_pur.values()[i],
                self.p_sell.values()[i],
                self.p_cha.values()[i],
                self.p_dis.values()[i],
                self.soc_kwh[i],
                self.dct_kw[i]
            );
        }
        out
    }

    pub fn write_traces_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.traces_csv()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Restricts profiles to the configured span, if any.
pub fn apply_span(profiles: &ProfileSet, span: Option<Span>) -> Result<ProfileSet> {
    let Some(span) = span else {
        return Ok(profiles.clone());
    };
    let from: NaiveDateTime = span.start.and_hms_opt(0, 0, 0).expect("midnight");
    let to: NaiveDateTime = (span.end + Duration::days(1)).and_hms_opt(0, 0, 0).expect("midnight");
    let first = profiles.timestamp(0);
    let end = profiles.load.end();
    if from < first || to > end {
        return Err(Error::Config(format!(
            "span {} .. {} is not covered by profiles {first} .. {end}",
            span.start, span.end
        )));
    }
    let step = i64::from(profiles.load.step_minutes());
    let a = ((from - first).num_minutes() / step) as usize;
    let b = ((to - first).num_minutes() / step) as usize;
    profiles.slice(a..b)
}

/// Plans thresholds for `profiles` under `config`, after applying its span.
pub fn planned_dct(profiles: &ProfileSet, config: &SimulationConfig, tariff: &TariffSchedule) -> Result<DctSchedule> {
    let p = apply_span(profiles, config.span)?;
    plan_span(&p, &config.battery, tariff, config.planning_mode)
}

/// Runs one simulation, planning thresholds from the profiles themselves.
pub fn simulate(profiles: &ProfileSet, config: &SimulationConfig, tariff: &TariffSchedule) -> Result<SimulationResult> {
    if config.dct_source == DctSource::User {
        return Err(Error::Config(
            "dct_source user needs a threshold schedule; use simulate_with_dct".into(),
        ));
    }
    let dct = planned_dct(profiles, config, tariff)?;
    simulate_with_dct(profiles, config, tariff, &dct, &mut |_, _, _| {})
}

/// Runs one simulation against a given threshold schedule. `observe` sees
/// every MPC problem with its interval index and solution.
pub fn simulate_with_dct(
    profiles: &ProfileSet,
    config: &SimulationConfig,
    tariff: &TariffSchedule,
    dct: &DctSchedule,
    observe: &mut dyn FnMut(usize, &LpProblem, &LpSolution),
) -> Result<SimulationResult> {
    config.validate()?;
    tariff.validate()?;
    let profiles = apply_span(profiles, config.span)?;
    let dct = align_dct(&profiles, dct)?;
    let spec = config.battery;
    let n = profiles.len();
    let dt = profiles.step_hours();
    let per_day = profiles.steps_per_day();
    let net: Vec<f64> = (0..n).map(|i| profiles.net_load(i)).collect();

    let mut state = BatteryState::new(config.initial_soc());
    let mut counts = OverrideCounts::default();
    let mut pur = Vec::with_capacity(n);
    let mut sell = Vec::with_capacity(n);
    let mut cha = Vec::with_capacity(n);
    let mut dis = Vec::with_capacity(n);
    let mut soc = Vec::with_capacity(n);

    let horizon = config.mpc.horizon_steps;
    let mut history: Vec<f64> = Vec::new();
    let mut floor = spec.soc_min_kwh;
    let mut warned_history = false;
    let mut dct_window = vec![0.0; horizon];

    for i in 0..n {
        let dispatch = match config.controller {
            ControllerKind::NoBess => Dispatch::IDLE,
            ControllerKind::RuleBased => rule_dispatch(net[i], dct[i], state, &spec, dt),
            ControllerKind::Mpc => {
                if i % per_day == 0 {
                    if i >= per_day {
                        let day = i - per_day..i;
                        history.push(daily_requirement_kwh(&net[day.clone()], &dct[day], dt));
                    }
                    floor = match soc_req(&history, &config.mpc, &spec) {
                        Ok(v) => v,
                        Err(Error::NoHistory) => {
                            if !warned_history {
                                log::warn!("no prior day for the SOC requirement; using soc_min on the first day");
                                warned_history = true;
                            }
                            spec.soc_min_kwh
                        }
                        Err(e) => return Err(e),
                    };
                }
                let forecast = match config.forecaster.forecast(&profiles, i, horizon) {
                    Ok(f) => f,
                    Err(Error::InsufficientHistory { .. }) => {
                        counts.forecast_fallbacks += 1;
                        perfect_forecast(&profiles, i, horizon)?
                    }
                    Err(e) => return Err(e),
                };
                for (k, slot) in dct_window.iter_mut().enumerate() {
                    *slot = dct[(i + k).min(n - 1)];
                }
                let plan = plan_dt(
                    state,
                    &forecast,
                    &dct_window,
                    &spec,
                    floor,
                    &config.mpc,
                    dt,
                    &mut |p, s| observe(i, p, s),
                )
                .map_err(|e| e.at_interval(i))?;
                let guideline = Dispatch {
                    p_cha_kw: plan.p_cha_star[0],
                    p_dis_kw: plan.p_dis_star[0],
                };
                let decision = realtime_decide(net[i], dct[i], guideline, state, &spec, dt);
                match decision.case {
                    RealtimeCase::Discharge => {
                        counts.discharge_activations += 1;
                        if decision.corrective {
                            counts.discharge_corrections += 1;
                            if reachable(&forecast, &dct_window, state, &spec, dt) {
                                counts.discharge_corrections_reachable += 1;
                            }
                        }
                    }
                    RealtimeCase::Charge => {
                        counts.charge_activations += 1;
                        if decision.corrective {
                            counts.charge_corrections += 1;
                        }
                    }
                    RealtimeCase::Guideline => {}
                }
                decision.dispatch
            }
        };
        let load = profiles.load.values()[i];
        let pv = profiles.pv.values()[i];
        let out = apply_dispatch(load, pv, dispatch, state, &spec, dt)?;
        state = BatteryState::new(out.soc_after_kwh);
        pur.push(out.p_pur_kw);
        sell.push(out.p_sell_kw);
        cha.push(dispatch.p_cha_kw);
        dis.push(dispatch.p_dis_kw);
        soc.push(out.soc_after_kwh);
    }

    let template = &profiles.load;
    let p_pur = template.with_values(pur)?;
    let bills = monthly_bills(&p_pur, tariff);
    let baseline = baseline(&profiles, tariff)?;
    let dc_cost_usd: f64 = bills.iter().map(|b| b.dc_cost_usd).sum();
    let total_sold_kwh = sell.iter().sum::<f64>() * dt;
    let total_purchased_kwh = p_pur.energy_kwh();
    let metrics = Metrics {
        pv_utilization: metrics::pv_utilization(total_sold_kwh, baseline.sold_kwh).ok(),
        dc_saving: metrics::dc_saving(dc_cost_usd, baseline.dc_cost_usd).ok(),
        soc_avg: match config.controller {
            ControllerKind::NoBess => None,
            _ => metrics::soc_avg(&soc, &spec),
        },
        total_sold_kwh,
        total_purchased_kwh,
        dc_cost_usd,
    };
    Ok(SimulationResult {
        controller: config.controller,
        p_sell: template.with_values(sell)?,
        p_cha: template.with_values(cha)?,
        p_dis: template.with_values(dis)?,
        p_pur,
        soc_kwh: soc,
        initial_soc_kwh: config.initial_soc(),
        dct_kw: dct,
        monthly_bills: bills,
        override_counts: counts,
        baseline,
        metrics,
    })
}

/// Whether threshold-tracking from `state` keeps every purchase of the
/// forecast horizon at or below its threshold.
fn reachable(forecast: &Forecast, dct: &[f64], state: BatteryState, spec: &BatterySpec, dt: f64) -> bool {
    let net: Vec<f64> = (0..forecast.horizon_steps).map(|k| forecast.net_load(k)).collect();
    greedy_run(&net, dct, spec, dt, state.soc_kwh).max_excess_kw <= OVERRIDE_EPS_KW
}

fn align_dct(profiles: &ProfileSet, dct: &DctSchedule) -> Result<Vec<f64>> {
    let first = profiles.timestamp(0);
    let d0 = dct.thresholds.start();
    let step = i64::from(profiles.load.step_minutes());
    if dct.thresholds.step_minutes() != profiles.load.step_minutes() || d0 > first {
        return Err(Error::DimensionMismatch(format!(
            "threshold schedule starting {d0} does not cover profiles starting {first}"
        )));
    }
    let offset = ((first - d0).num_minutes() / step) as usize;
    if (first - d0).num_minutes() % step != 0 || offset + profiles.len() > dct.len() {
        return Err(Error::DimensionMismatch(format!(
            "threshold schedule ({} intervals from {d0}) does not cover {} intervals from {first}",
            dct.len(),
            profiles.len()
        )));
    }
    Ok(dct.values()[offset..offset + profiles.len()].to_vec())
}

/// Passthrough grid flows and bills without storage.
pub fn baseline(profiles: &ProfileSet, tariff: &TariffSchedule) -> Result<Baseline> {
    let n = profiles.len();
    let dt = profiles.step_hours();
    let pur: Vec<f64> = (0..n).map(|i| profiles.net_load(i).max(0.0)).collect();
    let sold_kwh = (0..n).map(|i| (-profiles.net_load(i)).max(0.0)).sum::<f64>() * dt;
    let p_pur = profiles.load.with_values(pur)?;
    let monthly_bills = monthly_bills(&p_pur, tariff);
    Ok(Baseline {
        sold_kwh,
        purchased_kwh: p_pur.energy_kwh(),
        dc_cost_usd: monthly_bills.iter().map(|b| b.dc_cost_usd).sum(),
        monthly_bills,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_synthetic, LoadShape, SyntheticProfileSpec};
    use crate::tariff::builtin_pge_tariff;

    fn week() -> ProfileSet {
        let mut spec = SyntheticProfileSpec::study_year(LoadShape::Grocery, 3);
        spec.days = 7;
        spec.start = NaiveDate::from_ymd_opt(2023, 6, 10).unwrap();
        generate_synthetic(&spec).unwrap()
    }

    #[test]
    fn zero_battery_is_passthrough() {
        let p = week();
        let spec = BatterySpec::with_bounds(710.0, 0.0, 0.0, 0.0).unwrap();
        for controller in [ControllerKind::RuleBased, ControllerKind::Mpc] {
            let r = simulate(&p, &SimulationConfig::new(controller, spec), &builtin_pge_tariff()).unwrap();
            for i in 0..p.len() {
                assert_eq!(r.p_pur.values()[i], p.net_load(i).max(0.0));
                assert_eq!(r.p_sell.values()[i], (-p.net_load(i)).max(0.0));
            }
            assert_eq!(r.metrics.dc_cost_usd, r.baseline.dc_cost_usd);
        }
    }

    #[test]
    fn span_selects_days() {
        let p = week();
        let cfg = SimulationConfig {
            span: Some(Span {
                start: NaiveDate::from_ymd_opt(2023, 6, 11).unwrap(),
                end: NaiveDate::from_ymd_opt(2023, 6, 12).unwrap(),
            }),
            ..SimulationConfig::new(ControllerKind::RuleBased, BatterySpec::reference())
        };
        let r = simulate(&p, &cfg, &builtin_pge_tariff()).unwrap();
        assert_eq!(r.len(), 192);
        let bad = SimulationConfig {
            span: Some(Span {
                start: NaiveDate::from_ymd_opt(2023, 6, 1).unwrap(),
                end: NaiveDate::from_ymd_opt(2023, 6, 12).unwrap(),
            }),
            ..cfg
        };
        assert!(matches!(simulate(&p, &bad, &builtin_pge_tariff()), Err(Error::Config(_))));
    }

    #[test]
    fn initial_soc_validated() {
        let cfg = SimulationConfig {
            initial_soc_kwh: Some(400.0),
            ..SimulationConfig::new(ControllerKind::RuleBased, BatterySpec::reference())
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn mpc_week_is_safe() {
        let p = week();
        let spec = BatterySpec::reference();
        let r = simulate(&p, &SimulationConfig::new(ControllerKind::Mpc, spec), &builtin_pge_tariff()).unwrap();
        assert!(r.soc_kwh.iter().all(|&s| spec.contains(s)));
        assert_eq!(r.override_counts.discharge_corrections_reachable, 0);
        let csv = r.traces_csv();
        assert_eq!(csv.lines().count(), p.len() + 1);
        assert_eq!(csv.lines().next(), Some(TRACES_HEADER));
    }
}

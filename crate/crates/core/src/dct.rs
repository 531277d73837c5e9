//! Monthly demand-charge thresholds (DCTs) for the daily controllers.
//!
//! Each tariff component with a nonzero rate gets one flat threshold per
//! month, found by bisection against a greedy full-foresight battery run.
//! Components are planned in descending rate order; each later component
//! is checked together with the thresholds already fixed, so the composite
//! `DCT(t) = min(active thresholds)` is always feasible for the greedy run.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::domain::{BatterySpec, BatteryState, PowerSeries, DEFAULT_STEP_MINUTES};
use crate::error::{Error, Result};
use crate::ingest::{parse_timed_columns, ProfileSet, TIMESTAMP_FORMAT};
use crate::rule::rule_dispatch;
use crate::tariff::{ComponentKind, DemandChargeComponent, Month, TariffSchedule};

pub const DCT_HEADER: &str = "timestamp,dct_kw";
/// Bisection stops once the bracket is narrower than this, kW.
pub const BISECTION_TOLERANCE_KW: f64 = 0.01;
/// Purchase overshoot the greedy check still accepts, kW.
const EXCESS_TOLERANCE_KW: f64 = 1e-6;
/// How far below its starting SOC the greedy run may finish, kWh.
const RECOVERY_TOLERANCE_KWH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DctProvenance {
    Planned,
    UserSupplied,
}

/// Where the planner takes its reference data from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanningMode {
    /// Each month is planned on its own data.
    #[default]
    Hindsight,
    /// Each month reuses the thresholds planned on the month before it; the
    /// first month falls back to hindsight.
    PreviousMonth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentThreshold {
    pub kind: ComponentKind,
    pub threshold_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthPlan {
    pub year: i32,
    pub month: Month,
    /// Thresholds of the nonzero-rate components, in planning order.
    pub thresholds: Vec<ComponentThreshold>,
    /// The battery cannot lower the anytime peak at all; thresholds are
    /// the raw net-load maxima.
    pub no_shaving: bool,
}

impl MonthPlan {
    pub fn threshold(&self, kind: ComponentKind) -> Option<f64> {
        self.thresholds
            .iter()
            .find(|c| c.kind == kind)
            .map(|c| c.threshold_kw)
    }
}

/// Per-interval threshold series.
#[derive(Debug, Clone, PartialEq)]
pub struct DctSchedule {
    pub thresholds: PowerSeries,
    pub provenance: DctProvenance,
    /// Planner diagnostics per month; empty for user-supplied schedules.
    pub months: Vec<MonthPlan>,
}

impl DctSchedule {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        self.thresholds.values()
    }

    pub fn any_no_shaving(&self) -> bool {
        self.months.iter().any(|m| m.no_shaving)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 26);
        out.push_str(DCT_HEADER);
        out.push('\n');
        for (i, v) in self.values().iter().enumerate() {
            let _ = writeln!(out, "{},{v}", self.thresholds.timestamp(i).format(TIMESTAMP_FORMAT));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Wraps user thresholds; every entry must be finite and non-negative.
pub fn user_dct(values: PowerSeries) -> Result<DctSchedule> {
    if let Some((index, &value)) = values
        .values()
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
    {
        return Err(Error::InvalidThreshold { index, value });
    }
    Ok(DctSchedule {
        thresholds: values,
        provenance: DctProvenance::UserSupplied,
        months: Vec::new(),
    })
}

pub fn parse_dct_csv(text: &str, source: &str) -> Result<DctSchedule> {
    let (start, mut cols) = parse_timed_columns(text, source, DCT_HEADER, &["dct_kw"], false)?;
    let values = cols.pop().expect("one column");
    user_dct(PowerSeries::new(start, DEFAULT_STEP_MINUTES, values)?)
}

pub fn load_dct_csv(path: impl AsRef<Path>) -> Result<DctSchedule> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_dct_csv(&text, &path.display().to_string())
}

/// Result of running the rule-based policy with full foresight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyRun {
    /// Largest purchase above the threshold, kW (0 if never exceeded).
    pub max_excess_kw: f64,
    pub final_soc_kwh: f64,
}

/// Runs the threshold-tracking policy over `net_kw` from `soc0_kwh`.
pub fn greedy_run(
    net_kw: &[f64],
    dct_kw: &[f64],
    spec: &BatterySpec,
    step_hours: f64,
    soc0_kwh: f64,
) -> GreedyRun {
    let mut state = BatteryState::new(soc0_kwh);
    let mut max_excess: f64 = 0.0;
    for (&net, &d) in net_kw.iter().zip(dct_kw) {
        let dispatch = rule_dispatch(net, d, state, spec, step_hours);
        let grid = net - dispatch.net_kw();
        max_excess = max_excess.max(grid - d);
        let soc = state.soc_kwh + (dispatch.p_cha_kw - dispatch.p_dis_kw) * step_hours;
        state.soc_kwh = soc.clamp(spec.soc_min_kwh, spec.soc_max_kwh);
    }
    GreedyRun {
        max_excess_kw: max_excess,
        final_soc_kwh: state.soc_kwh,
    }
}

/// Planner feasibility: starting full, the greedy run never buys above the
/// threshold and ends the period recharged to full.
pub fn greedy_feasible(net_kw: &[f64], dct_kw: &[f64], spec: &BatterySpec, step_hours: f64) -> bool {
    let run = greedy_run(net_kw, dct_kw, spec, step_hours, spec.soc_max_kwh);
    run.max_excess_kw <= EXCESS_TOLERANCE_KW
        && run.final_soc_kwh >= spec.soc_max_kwh - RECOVERY_TOLERANCE_KWH
}

/// Plans one whole billing month.
pub fn plan_dct(reference_month: &ProfileSet, spec: &BatterySpec, tariff: &TariffSchedule) -> Result<DctSchedule> {
    spec.validate()?;
    tariff.validate()?;
    check_whole_month(reference_month)?;
    let net: Vec<f64> = (0..reference_month.len()).map(|i| reference_month.net_load(i)).collect();
    let times: Vec<NaiveDateTime> = (0..reference_month.len()).map(|i| reference_month.timestamp(i)).collect();
    let plan = plan_month(&net, &times, spec, tariff, reference_month.step_hours());
    let values = composite(&plan, &times, tariff);
    finish(reference_month, values, vec![plan])
}

/// Plans every calendar month (whole or partial) covered by `profiles`.
pub fn plan_span(
    profiles: &ProfileSet,
    spec: &BatterySpec,
    tariff: &TariffSchedule,
    mode: PlanningMode,
) -> Result<DctSchedule> {
    spec.validate()?;
    tariff.validate()?;
    let dt = profiles.step_hours();
    let mut values = Vec::with_capacity(profiles.len());
    let mut plans: Vec<MonthPlan> = Vec::new();
    let mut previous: Option<MonthPlan> = None;
    for range in profiles.month_ranges() {
        let net: Vec<f64> = range.clone().map(|i| profiles.net_load(i)).collect();
        let times: Vec<NaiveDateTime> = range.clone().map(|i| profiles.timestamp(i)).collect();
        let own = plan_month(&net, &times, spec, tariff, dt);
        let plan = match (mode, &previous) {
            (PlanningMode::PreviousMonth, Some(prev)) => carry_over(prev, &own, &times),
            _ => own.clone(),
        };
        values.extend(composite(&plan, &times, tariff));
        plans.push(plan);
        previous = Some(own);
    }
    finish(profiles, values, plans)
}

fn finish(profiles: &ProfileSet, values: Vec<f64>, months: Vec<MonthPlan>) -> Result<DctSchedule> {
    if months.iter().any(|m| m.no_shaving) {
        log::warn!("battery cannot shave the anytime peak in at least one month; thresholds fall back to net-load maxima");
    }
    Ok(DctSchedule {
        thresholds: profiles.load.with_values(values)?,
        provenance: DctProvenance::Planned,
        months,
    })
}

fn check_whole_month(p: &ProfileSet) -> Result<()> {
    let first = p.timestamp(0);
    let month = Month::of(first);
    let mismatch = |msg: String| Err(Error::SpanMismatch { month, msg });
    if first.day() != 1 || first.hour() != 0 || first.minute() != 0 {
        return mismatch(format!("reference data starts at {first}, not at the first of the month"));
    }
    let last = p.timestamp(p.len() - 1);
    let next = p.load.end();
    if Month::of(last) != month || last.year() != first.year() || (next.day() != 1 || next.hour() != 0 || next.minute() != 0) {
        return mismatch(format!("reference data {first} .. {next} is not exactly one calendar month"));
    }
    Ok(())
}

fn plan_month(
    net: &[f64],
    times: &[NaiveDateTime],
    spec: &BatterySpec,
    tariff: &TariffSchedule,
    dt: f64,
) -> MonthPlan {
    let first = times[0];
    let month = Month::of(first);
    let max_net = net.iter().copied().fold(0.0f64, f64::max);

    let mut comps: Vec<&DemandChargeComponent> = tariff
        .components_for(month)
        .filter(|c| c.rate_usd_per_kw > 0.0 && c.has_window())
        .collect();
    // Stable sort keeps anytime first on equal rates.
    comps.sort_by(|a, b| b.rate_usd_per_kw.total_cmp(&a.rate_usd_per_kw));
    let any_pos = comps.iter().position(|c| c.kind == ComponentKind::Anytime);
    if let Some(p) = any_pos {
        let any = comps.remove(p);
        comps.insert(0, any);
    }

    let masks: Vec<Vec<bool>> = comps
        .iter()
        .map(|c| times.iter().map(|&t| c.contains(t)).collect())
        .collect();
    let mut fixed: Vec<f64> = Vec::with_capacity(comps.len());
    let mut dct = vec![f64::INFINITY; net.len()];
    for k in 0..comps.len() {
        let mask = &masks[k];
        let upper = if k == 0 { max_net } else { fixed[0] };
        let trial = |d: f64, buf: &mut Vec<f64>| {
            buf.clear();
            buf.extend(dct.iter().zip(mask).map(|(&cur, &m)| if m { cur.min(d) } else { cur }));
        };
        let mut buf = Vec::with_capacity(net.len());
        let feasible = |d: f64, buf: &mut Vec<f64>| {
            trial(d, buf);
            greedy_feasible(net, buf, spec, dt)
        };
        // The upper end reproduces the composite fixed so far, which is
        // feasible by construction.
        let (mut lo, mut hi) = (0.0f64, upper);
        if feasible(0.0, &mut buf) {
            hi = 0.0;
        }
        while hi - lo > BISECTION_TOLERANCE_KW {
            let mid = 0.5 * (lo + hi);
            if feasible(mid, &mut buf) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // Snap down to the largest purchase actually incurred in the window
        // if that is still feasible; this makes degenerate cases exact.
        trial(hi, &mut buf);
        let snapped = windowed_max_purchase(net, &buf, mask, spec, dt);
        if snapped < hi && feasible(snapped, &mut buf) {
            hi = snapped;
        }
        fixed.push(hi);
        trial(hi, &mut buf);
        dct.copy_from_slice(&buf);
    }

    let no_shaving = fixed.first().map_or(true, |&d| d >= max_net - BISECTION_TOLERANCE_KW) && max_net > 0.0;
    MonthPlan {
        year: first.year(),
        month,
        thresholds: comps
            .iter()
            .zip(&fixed)
            .map(|(c, &d)| ComponentThreshold {
                kind: c.kind,
                threshold_kw: d,
            })
            .collect(),
        no_shaving,
    }
}

fn windowed_max_purchase(net: &[f64], dct: &[f64], mask: &[bool], spec: &BatterySpec, dt: f64) -> f64 {
    let mut state = BatteryState::new(spec.soc_max_kwh);
    let mut best: f64 = 0.0;
    for i in 0..net.len() {
        let d = rule_dispatch(net[i], dct[i], state, spec, dt);
        if mask[i] {
            best = best.max(net[i] - d.net_kw());
        }
        let soc = state.soc_kwh + (d.p_cha_kw - d.p_dis_kw) * dt;
        state.soc_kwh = soc.clamp(spec.soc_min_kwh, spec.soc_max_kwh);
    }
    best
}

/// Applies last month's thresholds to this month's calendar. Components
/// that were not planned last month (different season) use this month's
/// own plan.
fn carry_over(prev: &MonthPlan, own: &MonthPlan, times: &[NaiveDateTime]) -> MonthPlan {
    let first = times[0];
    MonthPlan {
        year: first.year(),
        month: Month::of(first),
        thresholds: own
            .thresholds
            .iter()
            .map(|c| ComponentThreshold {
                kind: c.kind,
                threshold_kw: prev.threshold(c.kind).unwrap_or(c.threshold_kw),
            })
            .collect(),
        no_shaving: prev.no_shaving,
    }
}

/// `DCT(t)`: the smallest threshold among planned components whose window
/// covers `t`.
fn composite(plan: &MonthPlan, times: &[NaiveDateTime], tariff: &TariffSchedule) -> Vec<f64> {
    times
        .iter()
        .map(|&t| {
            let month = Month::of(t);
            plan.thresholds
                .iter()
                .filter(|c| tariff.component(month, c.kind).contains(t))
                .map(|c| c.threshold_kw)
                .fold(f64::INFINITY, f64::min)
        })
        .map(|d| if d.is_finite() { d } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tariff::builtin_pge_tariff;
    use chrono::NaiveDate;

    fn july(f: impl Fn(NaiveDateTime) -> f64) -> ProfileSet {
        let start = NaiveDate::from_ymd_opt(2023, 7, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let n = 31 * 96;
        let load: Vec<f64> = (0..n)
            .map(|i| f(start + chrono::Duration::minutes(15 * i as i64)))
            .collect();
        ProfileSet::new(
            PowerSeries::new(start, 15, load).unwrap(),
            PowerSeries::new(start, 15, vec![0.0; n]).unwrap(),
            "t",
        )
        .unwrap()
    }

    #[test]
    fn constant_load_is_not_shaved() {
        let p = july(|_| 100.0);
        let s = plan_dct(&p, &BatterySpec::reference(), &builtin_pge_tariff()).unwrap();
        assert!(s.values().iter().all(|&v| v == 100.0));
    }

    #[test]
    fn zero_battery_gives_windowed_maxima() {
        // Highest load falls in the peak window; partial-peak sees less.
        let p = july(|t| match t.hour() {
            13 => 300.0,
            9 => 200.0,
            _ => 100.0,
        });
        let spec = BatterySpec::with_bounds(710.0, 0.0, 0.0, 0.0).unwrap();
        let s = plan_dct(&p, &spec, &builtin_pge_tariff()).unwrap();
        let m = &s.months[0];
        assert_eq!(m.threshold(ComponentKind::Anytime), Some(300.0));
        assert_eq!(m.threshold(ComponentKind::Peak), Some(300.0));
        assert_eq!(m.threshold(ComponentKind::PartialPeak), Some(200.0));
        assert!(m.no_shaving);
    }

    #[test]
    fn rejects_partial_month() {
        let p = july(|_| 100.0).slice(0..96).unwrap();
        assert!(matches!(
            plan_dct(&p, &BatterySpec::reference(), &builtin_pge_tariff()),
            Err(Error::SpanMismatch { .. })
        ));
    }

    #[test]
    fn user_thresholds_validated() {
        let start = NaiveDate::from_ymd_opt(2023, 7, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let flat = PowerSeries::new(start, 15, vec![300.0; 2976]).unwrap();
        let s = user_dct(flat.clone()).unwrap();
        assert_eq!(s.len(), 2976);
        assert_eq!(s.provenance, DctProvenance::UserSupplied);
        let mut bad = vec![300.0; 4];
        bad[2] = -1.0;
        let err = user_dct(PowerSeries::new(start, 15, bad).unwrap()).unwrap_err();
        assert!(matches!(err, Error::InvalidThreshold { index: 2, .. }));
    }

    #[test]
    fn planned_thresholds_roundtrip_through_user_and_csv() {
        let p = july(|t| if t.hour() == 19 { 250.0 } else { 120.0 });
        let planned = plan_dct(&p, &BatterySpec::reference(), &builtin_pge_tariff()).unwrap();
        let wrapped = user_dct(planned.thresholds.clone()).unwrap();
        assert_eq!(wrapped.thresholds, planned.thresholds);
        let back = parse_dct_csv(&planned.to_csv(), "mem").unwrap();
        assert_eq!(back.thresholds, planned.thresholds);
    }

    #[test]
    fn plan_is_greedy_feasible() {
        let p = july(|t| 150.0 + 120.0 * ((t.hour() as f64 - 14.0) / 4.0).cos().max(0.0) + (t.day() % 5) as f64 * 8.0);
        let spec = BatterySpec::reference();
        let s = plan_dct(&p, &spec, &builtin_pge_tariff()).unwrap();
        let net: Vec<f64> = (0..p.len()).map(|i| p.net_load(i)).collect();
        assert!(greedy_feasible(&net, s.values(), &spec, 0.25));
        assert!(s.values().iter().all(|v| *v >= 0.0 && v.is_finite()));
    }
}

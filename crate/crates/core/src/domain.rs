//! Shared domain types and the per-interval power-balance / SOC arithmetic.
//!
//! Sign conventions: battery power is split into non-negative charge and
//! discharge components, grid power into non-negative purchase and sale.
//! Net load is `load - pv`, the grid power before any battery action.

use chrono::{Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on SOC bound checks, kWh.
pub const SOC_TOLERANCE_KWH: f64 = 1e-9;
/// Absolute tolerance on power-limit checks, kW.
pub const POWER_TOLERANCE_KW: f64 = 1e-9;

pub const DEFAULT_STEP_MINUTES: u32 = 15;

/// Fixed-cadence sequence of power samples in kW.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    start: NaiveDateTime,
    step_minutes: u32,
    values: Vec<f64>,
}

impl PowerSeries {
    pub fn new(start: NaiveDateTime, step_minutes: u32, values: Vec<f64>) -> Result<Self> {
        if step_minutes == 0 || 1440 % step_minutes != 0 {
            return Err(Error::InvalidSeries(format!(
                "step of {step_minutes} minutes does not divide a day"
            )));
        }
        if start.second() != 0 || start.nanosecond() != 0 {
            return Err(Error::InvalidSeries(format!(
                "start {start} is not on a whole minute"
            )));
        }
        if values.is_empty() {
            return Err(Error::InvalidSeries("no samples".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "sample {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self {
            start,
            step_minutes,
            values,
        })
    }

    /// Like [`PowerSeries::new`] but also rejects negative samples, as
    /// required for load and PV inputs.
    pub fn non_negative(start: NaiveDateTime, step_minutes: u32, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| *v < 0.0) {
            return Err(Error::InvalidSeries(format!(
                "sample {i} is negative ({})",
                values[i]
            )));
        }
        Self::new(start, step_minutes, values)
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn step_minutes(&self) -> u32 {
        self.step_minutes
    }

    pub fn step_hours(&self) -> f64 {
        f64::from(self.step_minutes) / 60.0
    }

    pub fn steps_per_day(&self) -> usize {
        (1440 / self.step_minutes) as usize
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, index: usize) -> NaiveDateTime {
        self.start + Duration::minutes(i64::from(self.step_minutes) * index as i64)
    }

    /// Timestamp one step past the last sample.
    pub fn end(&self) -> NaiveDateTime {
        self.timestamp(self.values.len())
    }

    pub fn same_calendar(&self, other: &PowerSeries) -> bool {
        self.start == other.start
            && self.step_minutes == other.step_minutes
            && self.values.len() == other.values.len()
    }

    /// Sub-series over `range` (must be non-empty and in bounds).
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<PowerSeries> {
        if range.start >= range.end || range.end > self.values.len() {
            return Err(Error::InvalidSeries(format!(
                "slice {range:?} out of bounds for {} samples",
                self.values.len()
            )));
        }
        Ok(PowerSeries {
            start: self.timestamp(range.start),
            step_minutes: self.step_minutes,
            values: self.values[range].to_vec(),
        })
    }

    /// Same calendar, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<PowerSeries> {
        if values.len() != self.values.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values, got {}",
                self.values.len(),
                values.len()
            )));
        }
        PowerSeries::new(self.start, self.step_minutes, values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Energy in kWh, integrating each sample over its interval.
    pub fn energy_kwh(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.step_hours()
    }
}

/// Nameplate limits of the storage asset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatterySpec {
    pub p_max_kw: f64,
    pub capacity_kwh: f64,
    pub soc_min_kwh: f64,
    pub soc_max_kwh: f64,
    /// Lossless by default; applied symmetrically as sqrt on charge and
    /// discharge. Controllers other than the plant model ignore it.
    #[serde(default = "default_efficiency")]
    pub round_trip_efficiency: f64,
}

fn default_efficiency() -> f64 {
    1.0
}

impl BatterySpec {
    /// Full-range battery: SOC bounds are `[0, capacity]`.
    pub fn new(p_max_kw: f64, capacity_kwh: f64) -> Result<Self> {
        Self::with_bounds(p_max_kw, capacity_kwh, 0.0, capacity_kwh)
    }

    pub fn with_bounds(
        p_max_kw: f64,
        capacity_kwh: f64,
        soc_min_kwh: f64,
        soc_max_kwh: f64,
    ) -> Result<Self> {
        let spec = Self {
            p_max_kw,
            capacity_kwh,
            soc_min_kwh,
            soc_max_kwh,
            round_trip_efficiency: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The 710 kW / 340 kWh unit used as the default study battery.
    pub fn reference() -> Self {
        Self::new(710.0, 340.0).expect("reference battery is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.p_max_kw,
            self.capacity_kwh,
            self.soc_min_kwh,
            self.soc_max_kwh,
            self.round_trip_efficiency,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBattery("non-finite parameter".into()));
        }
        if self.p_max_kw <= 0.0 {
            return Err(Error::InvalidBattery(format!(
                "p_max_kw must be positive, got {}",
                self.p_max_kw
            )));
        }
        // soc_min == soc_max is allowed so that a zero-capacity battery can
        // stand in for the no-storage baseline.
        if !(0.0 <= self.soc_min_kwh
            && self.soc_min_kwh <= self.soc_max_kwh
            && self.soc_max_kwh <= self.capacity_kwh)
        {
            return Err(Error::InvalidBattery(format!(
                "need 0 <= soc_min ({}) <= soc_max ({}) <= capacity ({})",
                self.soc_min_kwh, self.soc_max_kwh, self.capacity_kwh
            )));
        }
        if !(self.round_trip_efficiency > 0.0 && self.round_trip_efficiency <= 1.0) {
            return Err(Error::InvalidBattery(format!(
                "round_trip_efficiency must be in (0, 1], got {}",
                self.round_trip_efficiency
            )));
        }
        Ok(())
    }

    fn one_way_efficiency(&self) -> f64 {
        self.round_trip_efficiency.sqrt()
    }

    /// Largest charge power that keeps SOC at or below `soc_max` over one step.
    pub fn max_charge_kw(&self, state: BatteryState, step_hours: f64) -> f64 {
        let headroom = (self.soc_max_kwh - state.soc_kwh).max(0.0);
        (headroom / (step_hours * self.one_way_efficiency())).min(self.p_max_kw)
    }

    /// Largest discharge power that keeps SOC at or above `soc_min` over one step.
    pub fn max_discharge_kw(&self, state: BatteryState, step_hours: f64) -> f64 {
        let available = (state.soc_kwh - self.soc_min_kwh).max(0.0);
        (available * self.one_way_efficiency() / step_hours).min(self.p_max_kw)
    }

    pub fn contains(&self, soc_kwh: f64) -> bool {
        soc_kwh >= self.soc_min_kwh - SOC_TOLERANCE_KWH && soc_kwh <= self.soc_max_kwh + SOC_TOLERANCE_KWH
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryState {
    pub soc_kwh: f64,
}

impl BatteryState {
    pub fn new(soc_kwh: f64) -> Self {
        Self { soc_kwh }
    }

    pub fn at_max(&self, spec: &BatterySpec) -> bool {
        self.soc_kwh >= spec.soc_max_kwh
    }

    pub fn at_min(&self, spec: &BatterySpec) -> bool {
        self.soc_kwh <= spec.soc_min_kwh
    }
}

/// Battery set-point for one interval.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Dispatch {
    pub p_cha_kw: f64,
    pub p_dis_kw: f64,
}

impl Dispatch {
    pub const IDLE: Dispatch = Dispatch {
        p_cha_kw: 0.0,
        p_dis_kw: 0.0,
    };

    pub fn charge(p_kw: f64) -> Self {
        Self {
            p_cha_kw: p_kw,
            p_dis_kw: 0.0,
        }
    }

    pub fn discharge(p_kw: f64) -> Self {
        Self {
            p_cha_kw: 0.0,
            p_dis_kw: p_kw,
        }
    }

    /// Net battery output, `p_dis - p_cha`.
    pub fn net_kw(&self) -> f64 {
        self.p_dis_kw - self.p_cha_kw
    }
}

/// Grid exchange and resulting SOC for one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub p_pur_kw: f64,
    pub p_sell_kw: f64,
    pub soc_after_kwh: f64,
}

/// Applies `dispatch` for one interval and returns the grid flows and the
/// post-step SOC.
///
/// Dispatches that exceed `p_max_kw` or would leave the SOC bounds by more
/// than [`SOC_TOLERANCE_KWH`] are rejected; sub-tolerance overshoot is
/// snapped back onto the bound.
pub fn apply_dispatch(
    load_kw: f64,
    pv_kw: f64,
    dispatch: Dispatch,
    state: BatteryState,
    spec: &BatterySpec,
    step_hours: f64,
) -> Result<StepOutcome> {
    let Dispatch { p_cha_kw, p_dis_kw } = dispatch;
    if !(load_kw.is_finite() && pv_kw.is_finite() && state.soc_kwh.is_finite())
        || !(step_hours > 0.0 && step_hours.is_finite())
    {
        return Err(Error::DimensionMismatch(format!(
            "non-finite step input (load {load_kw}, pv {pv_kw}, soc {}, dt {step_hours})",
            state.soc_kwh
        )));
    }
    let in_range = |p: f64| p.is_finite() && p >= 0.0 && p <= spec.p_max_kw + POWER_TOLERANCE_KW;
    if !in_range(p_cha_kw) || !in_range(p_dis_kw) {
        return Err(Error::PowerLimitViolation {
            p_cha_kw,
            p_dis_kw,
            p_max_kw: spec.p_max_kw,
        });
    }

    let eta = spec.one_way_efficiency();
    let mut soc_after = state.soc_kwh + (p_cha_kw * eta - p_dis_kw / eta) * step_hours;
    if !spec.contains(soc_after) {
        return Err(Error::SocBoundViolation {
            soc_after_kwh: soc_after,
            soc_min_kwh: spec.soc_min_kwh,
            soc_max_kwh: spec.soc_max_kwh,
        });
    }
    soc_after = soc_after.clamp(spec.soc_min_kwh, spec.soc_max_kwh);

    let grid_kw = load_kw - pv_kw - (p_dis_kw - p_cha_kw);
    Ok(StepOutcome {
        p_pur_kw: grid_kw.max(0.0),
        p_sell_kw: (-grid_kw).max(0.0),
        soc_after_kwh: soc_after,
    })
}

//! Seasonal multi-window demand-charge tariffs and monthly billing.

use std::fmt;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::domain::PowerSeries;
use crate::error::{Error, Result};

/// Calendar month, 1 = January.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Month(u32);

impl Month {
    pub fn new(number: u32) -> Result<Self> {
        if (1..=12).contains(&number) {
            Ok(Self(number))
        } else {
            Err(Error::Config(format!("month {number} is not in 1..=12")))
        }
    }

    pub fn of(ts: NaiveDateTime) -> Self {
        Self(ts.month())
    }

    pub fn number(self) -> u32 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = Month> {
        (1..=12).map(Month)
    }
}

impl TryFrom<u32> for Month {
    type Error = Error;
    fn try_from(n: u32) -> Result<Self> {
        Month::new(n)
    }
}

impl From<Month> for u32 {
    fn from(m: Month) -> u32 {
        m.0
    }
}

/// Half-open minute-of-day window `[start_min, end_min)`. Equal endpoints
/// denote an empty window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TimeWindow {
    start_min: u32,
    end_min: u32,
}

impl TimeWindow {
    pub const EMPTY: TimeWindow = TimeWindow {
        start_min: 0,
        end_min: 0,
    };
    pub const ALL_DAY: TimeWindow = TimeWindow {
        start_min: 0,
        end_min: 1440,
    };

    pub fn new(start_min: u32, end_min: u32) -> Result<Self> {
        if start_min > end_min || end_min > 1440 {
            return Err(Error::Config(format!(
                "invalid time window {start_min}..{end_min} (minutes of day)"
            )));
        }
        Ok(Self { start_min, end_min })
    }

    pub fn hm(start: (u32, u32), end: (u32, u32)) -> Result<Self> {
        Self::new(start.0 * 60 + start.1, end.0 * 60 + end.1)
    }

    pub fn start_min(&self) -> u32 {
        self.start_min
    }

    pub fn end_min(&self) -> u32 {
        self.end_min
    }

    pub fn is_empty(&self) -> bool {
        self.start_min == self.end_min
    }

    pub fn contains_minute(&self, minute_of_day: u32) -> bool {
        self.start_min <= minute_of_day && minute_of_day < self.end_min
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{:02}-{}:{:02}",
            self.start_min / 60,
            self.start_min % 60,
            self.end_min / 60,
            self.end_min % 60
        )
    }
}

impl From<TimeWindow> for String {
    fn from(w: TimeWindow) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for TimeWindow {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        let parse_hm = |part: &str| -> Result<u32> {
            let (h, m) = part
                .trim()
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("time {part:?} is not H:MM")))?;
            let h: u32 = h
                .parse()
                .map_err(|_| Error::Config(format!("bad hour in {part:?}")))?;
            let m: u32 = m
                .parse()
                .map_err(|_| Error::Config(format!("bad minute in {part:?}")))?;
            if m >= 60 {
                return Err(Error::Config(format!("bad minute in {part:?}")));
            }
            Ok(h * 60 + m)
        };
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| Error::Config(format!("window {s:?} is not H:MM-H:MM")))?;
        TimeWindow::new(parse_hm(a)?, parse_hm(b)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Anytime,
    PartialPeak,
    Peak,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 3] = [
        ComponentKind::Anytime,
        ComponentKind::PartialPeak,
        ComponentKind::Peak,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandChargeComponent {
    pub kind: ComponentKind,
    pub rate_usd_per_kw: f64,
    pub windows: Vec<TimeWindow>,
    pub months: Vec<Month>,
}

impl DemandChargeComponent {
    pub fn applies_to(&self, month: Month) -> bool {
        self.months.contains(&month)
    }

    pub fn contains_minute(&self, minute_of_day: u32) -> bool {
        self.windows.iter().any(|w| w.contains_minute(minute_of_day))
    }

    pub fn contains(&self, ts: NaiveDateTime) -> bool {
        self.contains_minute(ts.hour() * 60 + ts.minute())
    }

    pub fn has_window(&self) -> bool {
        self.windows.iter().any(|w| !w.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TariffSchedule {
    pub components: Vec<DemandChargeComponent>,
}

impl TariffSchedule {
    pub fn new(components: Vec<DemandChargeComponent>) -> Result<Self> {
        let t = Self { components };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.components {
            if !(c.rate_usd_per_kw.is_finite() && c.rate_usd_per_kw >= 0.0) {
                return Err(Error::Config(format!(
                    "{:?} rate must be a non-negative number",
                    c.kind
                )));
            }
            if c.windows.len() > 2 {
                return Err(Error::Config(format!(
                    "{:?} component has more than two windows",
                    c.kind
                )));
            }
            if c.kind == ComponentKind::Anytime && c.windows != [TimeWindow::ALL_DAY] {
                return Err(Error::Config(
                    "anytime component must cover 0:00-24:00".into(),
                ));
            }
        }
        for month in Month::all() {
            for kind in ComponentKind::ALL {
                let n = self
                    .components
                    .iter()
                    .filter(|c| c.kind == kind && c.applies_to(month))
                    .count();
                if n != 1 {
                    return Err(Error::Config(format!(
                        "month {} has {n} {kind:?} components, expected exactly one",
                        month.number()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn component(&self, month: Month, kind: ComponentKind) -> &DemandChargeComponent {
        self.components
            .iter()
            .find(|c| c.kind == kind && c.applies_to(month))
            .expect("validated tariff has every component for every month")
    }

    pub fn components_for(&self, month: Month) -> impl Iterator<Item = &DemandChargeComponent> {
        ComponentKind::ALL
            .into_iter()
            .map(move |k| self.component(month, k))
    }
}

impl Default for TariffSchedule {
    fn default() -> Self {
        builtin_pge_tariff()
    }
}

/// The PG&E demand-charge schedule for customers with renewables: summer
/// (May-Oct) and winter (Nov-Apr) seasons.
pub fn builtin_pge_tariff() -> TariffSchedule {
    let months = |ns: &[u32]| ns.iter().map(|&n| Month(n)).collect::<Vec<_>>();
    let summer = months(&[5, 6, 7, 8, 9, 10]);
    let winter = months(&[11, 12, 1, 2, 3, 4]);
    let w = |a, b| TimeWindow::hm(a, b).expect("static window");

    let components = vec![
        DemandChargeComponent {
            kind: ComponentKind::Anytime,
            rate_usd_per_kw: 17.44,
            windows: vec![TimeWindow::ALL_DAY],
            months: summer.clone(),
        },
        DemandChargeComponent {
            kind: ComponentKind::PartialPeak,
            rate_usd_per_kw: 0.50,
            windows: vec![w((8, 30), (12, 0)), w((18, 0), (21, 30))],
            months: summer.clone(),
        },
        DemandChargeComponent {
            kind: ComponentKind::Peak,
            rate_usd_per_kw: 1.45,
            windows: vec![w((12, 0), (18, 0))],
            months: summer,
        },
        DemandChargeComponent {
            kind: ComponentKind::Anytime,
            rate_usd_per_kw: 17.44,
            windows: vec![TimeWindow::ALL_DAY],
            months: winter.clone(),
        },
        DemandChargeComponent {
            kind: ComponentKind::PartialPeak,
            rate_usd_per_kw: 0.01,
            windows: vec![w((8, 30), (21, 30))],
            months: winter.clone(),
        },
        DemandChargeComponent {
            kind: ComponentKind::Peak,
            rate_usd_per_kw: 0.0,
            windows: vec![TimeWindow::EMPTY],
            months: winter,
        },
    ];
    TariffSchedule { components }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyBill {
    pub year: i32,
    pub month: Month,
    pub anytime_peak_kw: f64,
    pub partial_peak_kw: f64,
    pub peak_peak_kw: f64,
    pub dc_cost_usd: f64,
}

impl MonthlyBill {
    pub fn peak_for(&self, kind: ComponentKind) -> f64 {
        match kind {
            ComponentKind::Anytime => self.anytime_peak_kw,
            ComponentKind::PartialPeak => self.partial_peak_kw,
            ComponentKind::Peak => self.peak_peak_kw,
        }
    }
}

/// Demand-charge bill for one calendar month. `p_pur` must cover exactly
/// that month (of the year its first sample falls in).
pub fn dc_cost(p_pur: &PowerSeries, tariff: &TariffSchedule, month: Month) -> Result<MonthlyBill> {
    let start = p_pur.start();
    let year = start.year();
    let first = NaiveDate::from_ymd_opt(year, month.number(), 1)
        .expect("valid month")
        .and_hms_opt(0, 0, 0)
        .expect("midnight");
    let next = if month.number() == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month.number() + 1, 1)
    }
    .expect("valid month")
    .and_hms_opt(0, 0, 0)
    .expect("midnight");
    if start != first || p_pur.end() != next {
        return Err(Error::SpanMismatch {
            month,
            msg: format!("series covers {} .. {}, month is {first} .. {next}", start, p_pur.end()),
        });
    }
    if let Some(v) = p_pur.values().iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidSeries(format!("negative purchase {v} kW")));
    }
    Ok(bill_intervals(
        (0..p_pur.len()).map(|i| (p_pur.timestamp(i), p_pur.values()[i])),
        tariff,
        year,
        month,
    ))
}

/// Bills whatever intervals are given, without checking month coverage.
/// Used for partial months at the edges of a simulated span.
pub fn bill_intervals(
    intervals: impl Iterator<Item = (NaiveDateTime, f64)>,
    tariff: &TariffSchedule,
    year: i32,
    month: Month,
) -> MonthlyBill {
    let comps: Vec<&DemandChargeComponent> = tariff.components_for(month).collect();
    let mut peaks = [0.0f64; 3];
    for (ts, p) in intervals {
        let minute = ts.hour() * 60 + ts.minute();
        for (k, c) in comps.iter().enumerate() {
            if c.contains_minute(minute) {
                peaks[k] = peaks[k].max(p);
            }
        }
    }
    let dc_cost_usd = comps
        .iter()
        .zip(peaks)
        .map(|(c, p)| c.rate_usd_per_kw * p)
        .sum();
    MonthlyBill {
        year,
        month,
        anytime_peak_kw: peaks[0],
        partial_peak_kw: peaks[1],
        peak_peak_kw: peaks[2],
        dc_cost_usd,
    }
}

/// Splits a purchase trace at calendar-month boundaries and bills each part.
pub fn monthly_bills(p_pur: &PowerSeries, tariff: &TariffSchedule) -> Vec<MonthlyBill> {
    let mut bills = Vec::new();
    let mut i = 0;
    while i < p_pur.len() {
        let ts = p_pur.timestamp(i);
        let (year, month) = (ts.year(), ts.month());
        let mut j = i;
        while j < p_pur.len() {
            let tj = p_pur.timestamp(j);
            if tj.year() != year || tj.month() != month {
                break;
            }
            j += 1;
        }
        bills.push(bill_intervals(
            (i..j).map(|k| (p_pur.timestamp(k), p_pur.values()[k])),
            tariff,
            year,
            Month(month),
        ));
        i = j;
    }
    bills
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Duration;
    use proptest::prelude::*;

    fn july_series(f: impl Fn(NaiveDateTime) -> f64) -> PowerSeries {
        let start = NaiveDate::from_ymd_opt(2023, 7, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let n = 31 * 96;
        let values = (0..n)
            .map(|i| f(start + Duration::minutes(15 * i as i64)))
            .collect();
        PowerSeries::new(start, 15, values).unwrap()
    }

    #[test]
    fn builtin_tariff_matches_rate_table() {
        let t = builtin_pge_tariff();
        t.validate().unwrap();
        let jul = Month::new(7).unwrap();
        let pp = t.component(jul, ComponentKind::PartialPeak);
        assert_eq!(pp.rate_usd_per_kw, 0.50);
        assert_eq!(pp.windows[0].to_string(), "8:30-12:00");
        assert_eq!(pp.windows[1].to_string(), "18:00-21:30");
        assert_eq!(t.component(jul, ComponentKind::Peak).rate_usd_per_kw, 1.45);
        assert_eq!(t.component(jul, ComponentKind::Peak).windows[0].to_string(), "12:00-18:00");

        let jan = Month::new(1).unwrap();
        let peak = t.component(jan, ComponentKind::Peak);
        assert_eq!(peak.rate_usd_per_kw, 0.0);
        assert!(!peak.has_window());
        assert_eq!(t.component(jan, ComponentKind::PartialPeak).rate_usd_per_kw, 0.01);

        let mar = Month::new(3).unwrap();
        let any = t.component(mar, ComponentKind::Anytime);
        assert_eq!(any.rate_usd_per_kw, 17.44);
        assert_eq!(any.windows, vec![TimeWindow::ALL_DAY]);
    }

    #[test]
    fn constant_purchase_in_july() {
        let bill = dc_cost(&july_series(|_| 100.0), &builtin_pge_tariff(), Month(7)).unwrap();
        assert!((bill.dc_cost_usd - 1939.00).abs() < 0.005);
        let bill = dc_cost(&july_series(|_| 0.0), &builtin_pge_tariff(), Month(7)).unwrap();
        assert_eq!(bill.dc_cost_usd, 0.0);
    }

    #[test]
    fn window_attribution() {
        let s = july_series(|ts| if ts.hour() == 13 { 200.0 } else { 50.0 });
        let bill = dc_cost(&s, &builtin_pge_tariff(), Month(7)).unwrap();
        assert_eq!(bill.anytime_peak_kw, 200.0);
        assert_eq!(bill.partial_peak_kw, 50.0);
        assert_eq!(bill.peak_peak_kw, 200.0);
        assert!((bill.dc_cost_usd - 3803.00).abs() < 0.005);
    }

    #[test]
    fn boundary_interval_belongs_to_its_start() {
        let tariff = builtin_pge_tariff();
        let pp = tariff.component(Month(7), ComponentKind::PartialPeak);
        assert!(pp.contains_minute(11 * 60 + 45));
        assert!(!pp.contains_minute(12 * 60));
        let s = july_series(|ts| if ts.hour() == 11 && ts.minute() == 45 { 300.0 } else { 10.0 });
        let bill = dc_cost(&s, &tariff, Month(7)).unwrap();
        assert_eq!(bill.partial_peak_kw, 300.0);
        assert_eq!(bill.peak_peak_kw, 10.0);
    }

    #[test]
    fn span_mismatch() {
        let s = july_series(|_| 1.0).slice(0..96).unwrap();
        assert!(matches!(
            dc_cost(&s, &builtin_pge_tariff(), Month(7)),
            Err(Error::SpanMismatch { .. })
        ));
        let s = july_series(|_| 1.0);
        assert!(dc_cost(&s, &builtin_pge_tariff(), Month(8)).is_err());
    }

    #[test]
    fn tariff_validation_rejects_gaps() {
        let mut t = builtin_pge_tariff();
        t.components.pop();
        assert!(t.validate().is_err());
        let w: std::result::Result<TimeWindow, _> = TimeWindow::try_from("12:00-8:00".to_string());
        assert!(w.is_err());
    }

    #[test]
    fn tariff_json_roundtrip() {
        let t = builtin_pge_tariff();
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("\"8:30-12:00\""));
        let back: TariffSchedule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }

    proptest! {
        #[test]
        fn cost_is_monotone_and_homogeneous(
            base in prop::collection::vec(0.0..400.0f64, 96),
            bump in prop::collection::vec(0.0..50.0f64, 96),
            k in 0.0..3.0f64,
        ) {
            let t = builtin_pge_tariff();
            let daily = |v: &Vec<f64>| july_series(|ts| v[(ts.hour() * 4 + ts.minute() / 15) as usize]);
            let a = dc_cost(&daily(&base), &t, Month(7)).unwrap().dc_cost_usd;
            let raised: Vec<f64> = base.iter().zip(&bump).map(|(x, y)| x + y).collect();
            let b = dc_cost(&daily(&raised), &t, Month(7)).unwrap().dc_cost_usd;
            prop_assert!(b >= a);
            let scaled: Vec<f64> = base.iter().map(|x| k * x).collect();
            let c = dc_cost(&daily(&scaled), &t, Month(7)).unwrap().dc_cost_usd;
            prop_assert!((c - k * a).abs() <= 1e-9 * (1.0 + a.abs() * k));
        }
    }
}

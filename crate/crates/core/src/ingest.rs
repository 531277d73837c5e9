//! Load/PV profile ingestion and synthetic profile generation.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{PowerSeries, DEFAULT_STEP_MINUTES};
use crate::error::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";
pub const PROFILE_HEADER: &str = "timestamp,load_kw,pv_kw";

/// Aligned load and PV traces for one site.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    pub load: PowerSeries,
    pub pv: PowerSeries,
    pub label: String,
}

impl ProfileSet {
    pub fn new(load: PowerSeries, pv: PowerSeries, label: impl Into<String>) -> Result<Self> {
        if !load.same_calendar(&pv) {
            return Err(Error::InvalidSeries(
                "load and pv must share start, step and length".into(),
            ));
        }
        for (name, s) in [("load", &load), ("pv", &pv)] {
            if let Some(v) = s.values().iter().find(|v| **v < 0.0) {
                return Err(Error::InvalidSeries(format!("negative {name} value {v}")));
            }
        }
        Ok(Self {
            load,
            pv,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.load.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load.is_empty()
    }

    pub fn step_hours(&self) -> f64 {
        self.load.step_hours()
    }

    pub fn steps_per_day(&self) -> usize {
        self.load.steps_per_day()
    }

    pub fn timestamp(&self, i: usize) -> NaiveDateTime {
        self.load.timestamp(i)
    }

    /// Pre-battery grid power, `load - pv`, at interval `i`.
    pub fn net_load(&self, i: usize) -> f64 {
        self.load.values()[i] - self.pv.values()[i]
    }

    pub fn net_load_series(&self) -> PowerSeries {
        let v = (0..self.len()).map(|i| self.net_load(i)).collect();
        self.load.with_values(v).expect("same calendar")
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<ProfileSet> {
        Ok(ProfileSet {
            load: self.load.slice(range.clone())?,
            pv: self.pv.slice(range)?,
            label: self.label.clone(),
        })
    }

    /// Index ranges of the calendar months covered, in order.
    pub fn month_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.len() {
            let t0 = self.timestamp(i);
            let mut j = i + 1;
            while j < self.len() {
                let t = self.timestamp(j);
                if t.month() != t0.month() || t.year() != t0.year() {
                    break;
                }
                j += 1;
            }
            out.push(i..j);
            i = j;
        }
        out
    }
}

/// Reads a profile CSV (`timestamp,load_kw,pv_kw`, one row per 15 minutes).
pub fn load_csv(path: impl AsRef<Path>) -> Result<ProfileSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(&text, &path.display().to_string(), label)
}

pub fn parse_csv(text: &str, source: &str, label: String) -> Result<ProfileSet> {
    let (start, mut cols) = parse_timed_columns(text, source, PROFILE_HEADER, &["load_kw", "pv_kw"], true)?;
    let pv = cols.pop().expect("two columns");
    let load = cols.pop().expect("two columns");
    let step = DEFAULT_STEP_MINUTES;
    ProfileSet::new(
        PowerSeries::non_negative(start, step, load)?,
        PowerSeries::non_negative(start, step, pv)?,
        label,
    )
}

/// Parses a `timestamp,<columns...>` CSV on the default 15-minute cadence
/// and returns the first timestamp plus one vector per value column.
pub(crate) fn parse_timed_columns(
    text: &str,
    source: &str,
    header: &str,
    columns: &[&'static str],
    reject_negative: bool,
) -> Result<(NaiveDateTime, Vec<Vec<f64>>)> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: source.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    if first.trim() != header {
        return Err(parse_err(
            1,
            format!("expected header `{header}`, found `{}`", first.trim()),
        ));
    }

    let step = DEFAULT_STEP_MINUTES;
    let mut start = None;
    let mut out: Vec<Vec<f64>> = vec![Vec::new(); columns.len()];
    let mut rows = 0usize;
    for (idx, line) in lines {
        let ln = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() + 1 {
            return Err(parse_err(
                ln,
                format!("expected {} fields, found {}", columns.len() + 1, fields.len()),
            ));
        }
        let ts = NaiveDateTime::parse_from_str(fields[0], TIMESTAMP_FORMAT)
            .map_err(|e| parse_err(ln, format!("bad timestamp {:?}: {e}", fields[0])))?;
        let t0 = *start.get_or_insert(ts);
        let expected = t0 + Duration::minutes(i64::from(step) * rows as i64);
        if ts != expected {
            return Err(Error::Cadence {
                path: source.to_string(),
                expected,
                found: ts,
                step_minutes: step,
            });
        }
        for (k, &column) in columns.iter().enumerate() {
            let raw = fields[k + 1];
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_err(ln, format!("bad {column} value {raw:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(ln, format!("non-finite {column} value")));
            }
            if reject_negative && v < 0.0 {
                return Err(Error::NegativePower {
                    path: source.to_string(),
                    line: ln,
                    column,
                    value: v,
                });
            }
            out[k].push(v);
        }
        rows += 1;
    }
    let start = start.ok_or_else(|| parse_err(2, "no data rows".into()))?;
    if start.minute() % step != 0 {
        return Err(parse_err(2, format!("first timestamp {start} is not on a {step}-minute boundary")));
    }
    Ok((start, out))
}

pub fn to_csv(profiles: &ProfileSet) -> String {
    let mut out = String::with_capacity(profiles.len() * 40);
    out.push_str(PROFILE_HEADER);
    out.push('\n');
    for i in 0..profiles.len() {
        let _ = writeln!(
            out,
            "{},{},{}",
            profiles.timestamp(i).format(TIMESTAMP_FORMAT),
            profiles.load.values()[i],
            profiles.pv.values()[i]
        );
    }
    out
}

pub fn write_csv(profiles: &ProfileSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_csv(profiles)).map_err(|e| Error::io(path.display().to_string(), e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadShape {
    Grocery,
    Hospital,
    Theater,
}

impl LoadShape {
    pub const ALL: [LoadShape; 3] = [LoadShape::Grocery, LoadShape::Hospital, LoadShape::Theater];

    pub fn name(self) -> &'static str {
        match self {
            LoadShape::Grocery => "grocery",
            LoadShape::Hospital => "hospital",
            LoadShape::Theater => "theater",
        }
    }

    /// Hourly load as a fraction of the daily peak, 00:00 through 23:00.
    fn hourly(self) -> [f64; 24] {
        match self {
            // Refrigeration base, flat trading day, short evening rush.
            LoadShape::Grocery => [
                0.56, 0.54, 0.53, 0.53, 0.54, 0.58, 0.66, 0.74, 0.78, 0.78, 0.76, 0.74, //
                0.73, 0.73, 0.74, 0.76, 0.82, 0.94, 1.00, 0.96, 0.80, 0.68, 0.62, 0.58,
            ],
            // Morning rounds, then steady clinical load through daylight.
            LoadShape::Hospital => [
                0.66, 0.64, 0.63, 0.63, 0.65, 0.72, 0.84, 0.93, 1.00, 1.00, 0.95, 0.88, //
                0.85, 0.84, 0.84, 0.84, 0.84, 0.83, 0.81, 0.78, 0.75, 0.72, 0.69, 0.67,
            ],
            // Quiet days, long evening peak running late into the night.
            LoadShape::Theater => [
                0.62, 0.50, 0.40, 0.36, 0.35, 0.35, 0.37, 0.42, 0.48, 0.52, 0.55, 0.58, //
                0.60, 0.62, 0.65, 0.70, 0.78, 0.88, 0.96, 1.00, 1.00, 0.98, 0.92, 0.80,
            ],
        }
    }

    /// Day-to-day multiplicative noise amplitude.
    fn daily_jitter(self) -> f64 {
        match self {
            LoadShape::Grocery => 0.03,
            LoadShape::Hospital => 0.04,
            LoadShape::Theater => 0.05,
        }
    }
}

impl std::str::FromStr for LoadShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LoadShape::ALL
            .into_iter()
            .find(|shape| shape.name() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown load shape {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProfileSpec {
    pub shape: LoadShape,
    pub peak_load_kw: f64,
    pub pv_penetration: f64,
    pub days: u32,
    pub seed: u64,
    pub start: NaiveDate,
}

impl SyntheticProfileSpec {
    /// 420 kW peak, 90% PV penetration, one non-leap year from January 1.
    pub fn study_year(shape: LoadShape, seed: u64) -> Self {
        Self {
            shape,
            peak_load_kw: 420.0,
            pv_penetration: 0.9,
            days: 365,
            seed,
            start: NaiveDate::from_ymd_opt(2023, 1, 1).expect("valid date"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_load_kw > 0.0 && self.peak_load_kw.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "peak_load_kw must be positive, got {}",
                self.peak_load_kw
            )));
        }
        // Zero penetration is accepted as the degenerate no-PV site.
        if !(0.0..=1.5).contains(&self.pv_penetration) {
            return Err(Error::InvalidSpec(format!(
                "pv_penetration must be in [0, 1.5], got {}",
                self.pv_penetration
            )));
        }
        if self.days == 0 {
            return Err(Error::InvalidSpec("days must be at least 1".into()));
        }
        Ok(())
    }
}

/// Seasonal phase in [-1, 1]: +1 at the June solstice, -1 at December's.
fn season(date: NaiveDate) -> f64 {
    let doy = f64::from(date.ordinal());
    (2.0 * std::f64::consts::PI * (doy - 172.0) / 365.0).cos()
}

/// Clear-sky PV shape for `hour` (fractional, local clock) on `date`,
/// zero outside a daylight window centred on 13:00 that spans 14 h at
/// midsummer and 10 h at midwinter.
fn pv_shape(date: NaiveDate, hour: f64) -> f64 {
    let s = season(date);
    let day_length = 12.0 + 2.0 * s;
    let sunrise = 13.0 - day_length / 2.0;
    let x = (hour - sunrise) / day_length;
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    let amplitude = 0.75 + 0.25 * s;
    amplitude * (std::f64::consts::PI * x).sin().powf(1.6)
}

fn interpolate_hourly(table: &[f64; 24], hour: f64) -> f64 {
    let h0 = hour.floor() as usize % 24;
    let h1 = (h0 + 1) % 24;
    let f = hour - hour.floor();
    table[h0] * (1.0 - f) + table[h1] * f
}

/// Generates a seeded load/PV pair with the requested shape, scaled so the
/// load peaks at `peak_load_kw` and PV at `pv_penetration * peak_load_kw`.
pub fn generate_synthetic(spec: &SyntheticProfileSpec) -> Result<ProfileSet> {
    spec.validate()?;
    let step = DEFAULT_STEP_MINUTES;
    let per_day = (1440 / step) as usize;
    let n = per_day * spec.days as usize;
    let start = spec.start.and_hms_opt(0, 0, 0).expect("midnight");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let table = spec.shape.hourly();
    let jitter = spec.shape.daily_jitter();

    let mut load = Vec::with_capacity(n);
    let mut pv = Vec::with_capacity(n);
    let mut drift = 0.0f64;
    for d in 0..spec.days as usize {
        let date = spec.start + Duration::days(d as i64);
        let s = season(date);
        // Commercial loads run higher in the cooling season; day-to-day
        // variation persists over several days like the weather does.
        let seasonal = 0.88 + 0.08 * s;
        drift = 0.7 * drift + 0.3 * rng.gen_range(-1.0..1.0);
        let day_scale = seasonal * (1.0 + jitter * drift);
        let clearness = if rng.gen_bool(0.12) {
            rng.gen_range(0.35..0.75)
        } else {
            rng.gen_range(0.88..1.0)
        };
        for k in 0..per_day {
            let hour = (k as f64 + 0.5) * f64::from(step) / 60.0;
            let wiggle = 1.0 + 0.015 * rng.gen_range(-1.0..1.0);
            load.push(interpolate_hourly(&table, hour) * day_scale * wiggle);
            pv.push(pv_shape(date, hour) * clearness);
        }
    }

    let scale_to = |v: &mut Vec<f64>, target: f64| {
        let max = v.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            let k = target / max;
            v.iter_mut().for_each(|x| *x *= k);
        } else {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
    };
    scale_to(&mut load, spec.peak_load_kw);
    scale_to(&mut pv, spec.pv_penetration * spec.peak_load_kw);

    ProfileSet::new(
        PowerSeries::non_negative(start, step, load)?,
        PowerSeries::non_negative(start, step, pv)?,
        spec.shape.name(),
    )
}

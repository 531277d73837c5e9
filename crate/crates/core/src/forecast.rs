//! Load/PV estimates over the MPC horizon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ProfileSet;

#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub load_kw: Vec<f64>,
    pub pv_kw: Vec<f64>,
    pub horizon_steps: usize,
}

impl Forecast {
    pub fn new(load_kw: Vec<f64>, pv_kw: Vec<f64>) -> Result<Self> {
        if load_kw.len() != pv_kw.len() {
            return Err(Error::DimensionMismatch(format!(
                "forecast has {} load and {} pv values",
                load_kw.len(),
                pv_kw.len()
            )));
        }
        if load_kw.is_empty() {
            return Err(Error::InvalidHorizon);
        }
        if load_kw.iter().chain(&pv_kw).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidSeries("forecast values must be finite and >= 0".into()));
        }
        let horizon_steps = load_kw.len();
        Ok(Self {
            load_kw,
            pv_kw,
            horizon_steps,
        })
    }

    pub fn net_load(&self, k: usize) -> f64 {
        self.load_kw[k] - self.pv_kw[k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecasterKind {
    #[default]
    Perfect,
    Persistence,
}

impl ForecasterKind {
    pub fn forecast(self, profiles: &ProfileSet, now: usize, horizon: usize) -> Result<Forecast> {
        match self {
            ForecasterKind::Perfect => perfect_forecast(profiles, now, horizon),
            ForecasterKind::Persistence => persistence_forecast(profiles, now, horizon),
        }
    }
}

fn check_now(profiles: &ProfileSet, now: usize, horizon: usize) -> Result<()> {
    if horizon < 1 {
        return Err(Error::InvalidHorizon);
    }
    if now >= profiles.len() {
        return Err(Error::DimensionMismatch(format!(
            "interval {now} is past the end of {} samples",
            profiles.len()
        )));
    }
    Ok(())
}

/// True values for intervals `now .. now + horizon`, padded with the last
/// sample past the end of the data.
pub fn perfect_forecast(profiles: &ProfileSet, now: usize, horizon: usize) -> Result<Forecast> {
    check_now(profiles, now, horizon)?;
    let last = profiles.len() - 1;
    let pick = |s: &[f64]| (0..horizon).map(|k| s[(now + k).min(last)]).collect();
    Forecast::new(pick(profiles.load.values()), pick(profiles.pv.values()))
}

/// Values from the same clock times one day earlier.
pub fn persistence_forecast(profiles: &ProfileSet, now: usize, horizon: usize) -> Result<Forecast> {
    check_now(profiles, now, horizon)?;
    let day = profiles.steps_per_day();
    if now < day {
        return Err(Error::InsufficientHistory { now });
    }
    // Horizons longer than a day wrap onto the same prior day.
    let pick = |s: &[f64]| (0..horizon).map(|k| s[now - day + k % day]).collect();
    Forecast::new(pick(profiles.load.values()), pick(profiles.pv.values()))
}

//! Evaluation quantities: PV utilization, demand-charge saving, mean SOC.

use serde::{Deserialize, Serialize};

use crate::domain::BatterySpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `None` when the site exports nothing without a battery.
    pub pv_utilization: Option<f64>,
    /// `None` when the no-battery bill is zero.
    pub dc_saving: Option<f64>,
    /// Percent of capacity; `None` for a zero-capacity battery.
    pub soc_avg: Option<f64>,
    pub total_sold_kwh: f64,
    pub total_purchased_kwh: f64,
    pub dc_cost_usd: f64,
}

/// `1 - sold_with / sold_without`.
pub fn pv_utilization(sold_with_bess_kwh: f64, baseline_sold_kwh: f64) -> Result<f64> {
    if baseline_sold_kwh <= 0.0 {
        return Err(Error::NoExcessBaseline);
    }
    Ok(1.0 - sold_with_bess_kwh / baseline_sold_kwh)
}

/// `(no_bess - bess) / no_bess`.
pub fn dc_saving(bess_cost_usd: f64, no_bess_cost_usd: f64) -> Result<f64> {
    if no_bess_cost_usd <= 0.0 {
        return Err(Error::ZeroBaseline);
    }
    Ok((no_bess_cost_usd - bess_cost_usd) / no_bess_cost_usd)
}

/// Mean of `soc / capacity`, in percent.
pub fn soc_avg(soc_kwh: &[f64], spec: &BatterySpec) -> Option<f64> {
    if soc_kwh.is_empty() || spec.capacity_kwh <= 0.0 {
        return None;
    }
    let mean = soc_kwh.iter().sum::<f64>() / soc_kwh.len() as f64;
    Some(mean / spec.capacity_kwh * 100.0)
}

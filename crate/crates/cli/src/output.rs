//! JSON documents written by the commands. Field order is fixed by the
//! struct layouts, so equal inputs give byte-identical files.

use std::path::Path;

use bess_core::dct::MonthPlan;
use bess_core::report::ReportRow;
use bess_core::sim::{Baseline, OverrideCounts};
use bess_core::tariff::MonthlyBill;
use bess_core::{BatterySpec, Metrics, SimulationConfig, SimulationResult};
use serde::Serialize;

use crate::failure::{io, CliResult, Failure};

/// Bumped whenever a field is renamed, removed or changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct ProfileInfo {
    pub source: String,
    pub label: String,
    pub start: String,
    pub end: String,
    pub intervals: usize,
}

#[derive(Debug, Serialize)]
pub struct ResultDoc<'a> {
    pub schema_version: u32,
    pub controller: &'static str,
    pub profiles: &'a ProfileInfo,
    pub metrics: &'a Metrics,
    pub baseline: &'a Baseline,
    pub monthly_bills: &'a [MonthlyBill],
    pub override_counts: &'a OverrideCounts,
    pub dct_provenance: &'static str,
    pub config: &'a SimulationConfig,
}

impl<'a> ResultDoc<'a> {
    pub fn new(
        result: &'a SimulationResult,
        profiles: &'a ProfileInfo,
        config: &'a SimulationConfig,
        dct_provenance: &'static str,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            controller: result.controller.label(),
            profiles,
            metrics: &result.metrics,
            baseline: &result.baseline,
            monthly_bills: &result.monthly_bills,
            override_counts: &result.override_counts,
            dct_provenance,
            config,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ControllerSummary<'a> {
    pub controller: &'static str,
    pub metrics: &'a Metrics,
    pub override_counts: &'a OverrideCounts,
}

#[derive(Debug, Serialize)]
pub struct CompareDoc<'a> {
    pub schema_version: u32,
    pub profiles: &'a ProfileInfo,
    pub battery: &'a BatterySpec,
    pub rows: &'a [ReportRow],
    pub controllers: Vec<ControllerSummary<'a>>,
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub label: String,
    pub horizon_steps: usize,
    pub battery: BatterySpec,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Serialize)]
pub struct SweepDoc<'a> {
    pub schema_version: u32,
    pub dimension: &'static str,
    pub profiles: &'a ProfileInfo,
    pub points: &'a [SweepPoint],
}

#[derive(Debug, Serialize)]
pub struct PlanDoc<'a> {
    pub schema_version: u32,
    pub profiles: &'a ProfileInfo,
    pub battery: &'a BatterySpec,
    pub months: &'a [MonthPlan],
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::Data(anyhow::Error::new(e).context("serializing output")))?;
    text.push('\n');
    io(std::fs::write(path, text), path)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    io(std::fs::write(path, text), path)
}

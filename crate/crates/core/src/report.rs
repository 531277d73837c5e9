//! Comparison tables: one row per controller, optionally keyed by a sweep
//! point, rendered as aligned text or CSV.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::sim::{Baseline, SimulationResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Sweep point label such as `T=16` or `710kW/340kWh`.
    pub point: Option<String>,
    pub controller: String,
    pub dc_cost_usd: f64,
    pub dc_saving: Option<f64>,
    pub soc_avg: Option<f64>,
    pub pv_utilization: Option<f64>,
}

impl ReportRow {
    pub fn no_bess(baseline: &Baseline) -> Self {
        Self {
            point: None,
            controller: "NoBESS".into(),
            dc_cost_usd: baseline.dc_cost_usd,
            dc_saving: (baseline.dc_cost_usd > 0.0).then_some(0.0),
            soc_avg: None,
            pv_utilization: (baseline.sold_kwh > 0.0).then_some(0.0),
        }
    }

    pub fn from_result(result: &SimulationResult) -> Self {
        Self {
            point: None,
            controller: result.controller.label().into(),
            dc_cost_usd: result.metrics.dc_cost_usd,
            dc_saving: result.metrics.dc_saving,
            soc_avg: result.metrics.soc_avg,
            pv_utilization: result.metrics.pv_utilization,
        }
    }

    pub fn at(mut self, point: impl Into<String>) -> Self {
        self.point = Some(point.into());
        self
    }
}

/// NoBESS row from the first result's baseline, then one row per result.
pub fn comparison_rows(results: &[SimulationResult]) -> Vec<ReportRow> {
    let mut rows = Vec::with_capacity(results.len() + 1);
    if let Some(first) = results.first() {
        rows.push(ReportRow::no_bess(&first.baseline));
    }
    rows.extend(results.iter().map(ReportRow::from_result));
    rows
}

const HEADERS: [&str; 5] = ["Controller", "DC cost ($)", "DC saving (%)", "SOC_avg (%)", "PV-util (%)"];

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "N/A".to_string(), |x| format!("{:.2}", x * 100.0))
}

fn cells(rows: &[ReportRow]) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let keyed = rows.iter().any(|r| r.point.is_some());
    let mut headers = Vec::new();
    if keyed {
        headers.push("Point");
    }
    headers.extend(HEADERS);
    let body = rows
        .iter()
        .map(|r| {
            let mut c = Vec::with_capacity(headers.len());
            if keyed {
                c.push(r.point.clone().unwrap_or_default());
            }
            c.push(r.controller.clone());
            c.push(format!("{:.2}", r.dc_cost_usd));
            c.push(percent(r.dc_saving));
            // Already a percentage.
            c.push(r.soc_avg.map_or_else(|| "N/A".to_string(), |x| format!("{x:.2}")));
            c.push(percent(r.pv_utilization));
            c
        })
        .collect();
    (headers, body)
}

pub fn render_text(rows: &[ReportRow]) -> String {
    let (headers, body) = cells(rows);
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cols: &[String]| {
        let parts: Vec<String> = cols
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 || (i == 1 && headers[0] == "Point") { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &headers.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&mut out, &rule);
    for row in &body {
        line(&mut out, row);
    }
    out
}

pub fn render_csv(rows: &[ReportRow]) -> String {
    let (headers, body) = cells(rows);
    let mut out = String::new();
    let _ = writeln!(out, "{}", headers.join(","));
    for row in body {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

use chrono::NaiveDateTime;
use thiserror::Error;

use crate::tariff::Month;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid power series: {0}")]
    InvalidSeries(String),

    #[error("invalid battery spec: {0}")]
    InvalidBattery(String),

    #[error("dispatch would move SOC to {soc_after_kwh} kWh, outside [{soc_min_kwh}, {soc_max_kwh}]")]
    SocBoundViolation {
        soc_after_kwh: f64,
        soc_min_kwh: f64,
        soc_max_kwh: f64,
    },

    #[error("dispatch (charge {p_cha_kw} kW, discharge {p_dis_kw} kW) outside [0, {p_max_kw}] kW")]
    PowerLimitViolation {
        p_cha_kw: f64,
        p_dis_kw: f64,
        p_max_kw: f64,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: expected a {step_minutes}-minute interval at {expected}, found {found}")]
    Cadence {
        path: String,
        expected: NaiveDateTime,
        found: NaiveDateTime,
        step_minutes: u32,
    },

    #[error("{path}:{line}: negative {column} value {value}")]
    NegativePower {
        path: String,
        line: usize,
        column: &'static str,
        value: f64,
    },

    #[error("invalid synthetic profile spec: {0}")]
    InvalidSpec(String),

    #[error("series does not cover billing month {month:?}: {msg}")]
    SpanMismatch { month: Month, msg: String },

    #[error("invalid threshold at interval {index}: {value}")]
    InvalidThreshold { index: usize, value: f64 },

    #[error("forecast horizon must be at least one step")]
    InvalidHorizon,

    #[error("persistence forecast at interval {now} needs one full prior day of data")]
    InsufficientHistory { now: usize },

    #[error("no prior-day history for SOC requirement")]
    NoHistory,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("malformed LP: {0}")]
    MalformedLp(String),

    #[error("LP solver numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("MPC solve failed{}: {msg}", interval.map(|i| format!(" at interval {i}")).unwrap_or_default())]
    SolverFailure { interval: Option<usize>, msg: String },

    #[error("PV-utilization undefined: no excess PV export without a battery")]
    NoExcessBaseline,

    #[error("DC saving undefined: baseline demand-charge cost is zero")]
    ZeroBaseline,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {err}")]
    Io { path: String, err: std::io::Error },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            err: source,
        }
    }

    /// Attaches the simulation interval to solver errors.
    pub fn at_interval(self, i: usize) -> Self {
        match self {
            Error::SolverFailure { msg, .. } | Error::NumericalBreakdown(msg) => Error::SolverFailure {
                interval: Some(i),
                msg,
            },
            other => other,
        }
    }

    /// Coarse category used by the CLI to pick an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NumericalBreakdown(_) | Error::SolverFailure { .. } => ErrorKind::Solver,
            Error::Config(_) | Error::InvalidSpec(_) | Error::InvalidHorizon => ErrorKind::Usage,
            _ => ErrorKind::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Solver,
}

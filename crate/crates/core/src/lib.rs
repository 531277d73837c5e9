//! Behind-the-meter battery dispatch: domain model, demand-charge billing,
//! threshold planning, rule-based and MPC controllers, and a closed-loop
//! simulator.

pub mod dct;
pub mod domain;
pub mod error;
pub mod forecast;
pub mod ingest;
pub mod lp;
pub mod metrics;
pub mod mpc;
pub mod realtime;
pub mod report;
pub mod rule;
pub mod sim;
pub mod tariff;

pub use dct::{DctSchedule, PlanningMode};
pub use domain::{BatterySpec, BatteryState, Dispatch, PowerSeries};
pub use error::{Error, ErrorKind, Result};
pub use forecast::ForecasterKind;
pub use ingest::{LoadShape, ProfileSet, SyntheticProfileSpec};
pub use lp::{LpProblem, LpSolution, LpStatus};
pub use metrics::Metrics;
pub use mpc::{Formulation, MpcConfig, MpcPlan, SocReqMode};
pub use sim::{ControllerKind, DctSource, SimulationConfig, SimulationResult, Span};
pub use tariff::{ComponentKind, MonthlyBill, TariffSchedule};

//! Real-time override layer between the MPC guideline and the plant.
//!
//! Evaluated once per interval against measured (not forecast) net load.
//! A threshold violation forces a discharge of the deficit; exported PV
//! forces a charge of the surplus; otherwise the guideline passes through,
//! trimmed to what the battery can physically do this step.

use serde::{Deserialize, Serialize};

use crate::domain::{BatterySpec, BatteryState, Dispatch};

/// Slack used to decide whether an override changed the outcome, kW.
pub const OVERRIDE_EPS_KW: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealtimeCase {
    /// Net load above threshold with energy left: discharge the deficit.
    Discharge,
    /// PV surplus with headroom left: charge the surplus.
    Charge,
    Guideline,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealtimeDecision {
    pub dispatch: Dispatch,
    pub case: RealtimeCase,
    /// The override fixed something the (trimmed) guideline would have got
    /// wrong: a threshold violation for `Discharge`, exported surplus the
    /// battery could have taken for `Charge`.
    pub corrective: bool,
}

pub fn realtime_dispatch(
    net_load_kw: f64,
    dct_kw: f64,
    guideline: Dispatch,
    state: BatteryState,
    spec: &BatterySpec,
    step_hours: f64,
) -> Dispatch {
    realtime_decide(net_load_kw, dct_kw, guideline, state, spec, step_hours).dispatch
}

pub fn realtime_decide(
    net_load_kw: f64,
    dct_kw: f64,
    guideline: Dispatch,
    state: BatteryState,
    spec: &BatterySpec,
    step_hours: f64,
) -> RealtimeDecision {
    let max_cha = spec.max_charge_kw(state, step_hours);
    let max_dis = spec.max_discharge_kw(state, step_hours);
    let trimmed = Dispatch {
        p_cha_kw: guideline.p_cha_kw.clamp(0.0, max_cha),
        p_dis_kw: guideline.p_dis_kw.clamp(0.0, max_dis),
    };
    // Grid power the trimmed guideline would produce.
    let grid_under_guideline = net_load_kw - trimmed.net_kw();

    if net_load_kw > dct_kw && !state.at_min(spec) {
        let p = (net_load_kw - dct_kw).min(max_dis).max(0.0);
        let corrective = grid_under_guideline > dct_kw + OVERRIDE_EPS_KW
            && trimmed.net_kw() < p - OVERRIDE_EPS_KW;
        RealtimeDecision {
            dispatch: Dispatch::discharge(p),
            case: RealtimeCase::Discharge,
            corrective,
        }
    } else if net_load_kw < 0.0 && !state.at_max(spec) {
        let p = (-net_load_kw).min(max_cha).max(0.0);
        let corrective =
            grid_under_guideline < -OVERRIDE_EPS_KW && -trimmed.net_kw() < p - OVERRIDE_EPS_KW;
        RealtimeDecision {
            dispatch: Dispatch::charge(p),
            case: RealtimeCase::Charge,
            corrective,
        }
    } else {
        RealtimeDecision {
            dispatch: trimmed,
            case: RealtimeCase::Guideline,
            corrective: false,
        }
    }
}

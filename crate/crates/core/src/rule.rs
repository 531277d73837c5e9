//! Conventional threshold-tracking controller: charge into the headroom
//! below the demand-charge threshold, discharge whatever exceeds it.

use crate::domain::{BatterySpec, BatteryState, Dispatch};

/// One-interval rule-based decision.
///
/// `net_load_kw` is the pre-battery grid power (`load - pv`); the guards are
/// evaluated on it because the post-battery grid power depends on the very
/// action being chosen. Both branches are capped by `p_max_kw` and by the
/// energy that fits in (or is left in) the battery over one step.
pub fn rule_dispatch(
    net_load_kw: f64,
    dct_kw: f64,
    state: BatteryState,
    spec: &BatterySpec,
    step_hours: f64,
) -> Dispatch {
    if net_load_kw <= dct_kw && !state.at_max(spec) {
        let p = (dct_kw - net_load_kw).min(spec.max_charge_kw(state, step_hours));
        Dispatch::charge(p.max(0.0))
    } else if net_load_kw > dct_kw && !state.at_min(spec) {
        let p = (net_load_kw - dct_kw).min(spec.max_discharge_kw(state, step_hours));
        Dispatch::discharge(p.max(0.0))
    } else {
        Dispatch::IDLE
    }
}

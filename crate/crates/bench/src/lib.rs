//! Fixtures shared by the benches.

use bess_core::forecast::perfect_forecast;
use bess_core::ingest::generate_synthetic;
use bess_core::sim::planned_dct;
use bess_core::{
    BatterySpec, BatteryState, ControllerKind, LoadShape, MpcConfig, ProfileSet, SimulationConfig,
    SyntheticProfileSpec, TariffSchedule,
};

pub struct Fixture {
    pub profiles: ProfileSet,
    pub config: SimulationConfig,
    pub tariff: TariffSchedule,
    pub dct: Vec<f64>,
}

/// One synthetic January of `shape` with planned thresholds.
pub fn month(shape: LoadShape) -> Fixture {
    let mut spec = SyntheticProfileSpec::study_year(shape, 1);
    spec.days = 31;
    let profiles = generate_synthetic(&spec).expect("synthetic month");
    let battery = BatterySpec::new(710.0, 340.0).expect("battery");
    let config = SimulationConfig::new(ControllerKind::Mpc, battery);
    let tariff = TariffSchedule::default();
    let dct = planned_dct(&profiles, &config, &tariff).expect("dct").values().to_vec();
    Fixture { profiles, config, tariff, dct }
}

/// Arguments for one MPC horizon starting at interval `now`, half full.
pub fn horizon_inputs(f: &Fixture, now: usize, mpc: &MpcConfig) -> (BatteryState, bess_core::forecast::Forecast, Vec<f64>) {
    let t = mpc.horizon_steps;
    let forecast = perfect_forecast(&f.profiles, now, t).expect("forecast");
    let dct = f.dct[now..now + t].to_vec();
    (BatteryState::new(f.config.battery.soc_max_kwh * 0.5), forecast, dct)
}

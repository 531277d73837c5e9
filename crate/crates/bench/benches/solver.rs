use bess_bench::{horizon_inputs, month};
use bess_core::{lp, mpc, sim, LoadShape, MpcConfig};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn mpc_horizon(c: &mut Criterion) {
    let f = month(LoadShape::Grocery);
    let now = 96 * 3 + 48;
    let mut group = c.benchmark_group("mpc_plan");
    for t in [12usize, 16, 20] {
        let cfg = MpcConfig { horizon_steps: t, ..MpcConfig::default() };
        let (state, forecast, dct) = horizon_inputs(&f, now, &cfg);
        let soc_req = f.config.battery.soc_max_kwh * 0.8;
        let problem = mpc::build_problem(state, &forecast, &dct, &f.config.battery, soc_req, &cfg).unwrap();
        group.bench_with_input(BenchmarkId::new("lp_solve", t), &problem, |b, p| {
            b.iter(|| lp::solve(black_box(p)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("build_and_solve", t), &cfg, |b, cfg| {
            b.iter(|| mpc::plan(state, &forecast, &dct, &f.config.battery, soc_req, black_box(cfg)).unwrap())
        });
    }
    group.finish();
}

fn simulate_week(c: &mut Criterion) {
    let f = month(LoadShape::Grocery);
    let week = f.profiles.slice(0..96 * 7).unwrap();
    let dct = sim::planned_dct(&week, &f.config, &f.tariff).unwrap();
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    group.bench_function("mpc_week", |b| {
        b.iter(|| sim::simulate_with_dct(&week, &f.config, &f.tariff, &dct, &mut |_, _, _| {}).unwrap())
    });
    group.finish();
}

criterion_group!(benches, mpc_horizon, simulate_week);
criterion_main!(benches);

use std::path::{Path, PathBuf};

use anyhow::Context as _;
use bess_core::dct::{load_dct_csv, DctProvenance};
use bess_core::ingest::{self, generate_synthetic, TIMESTAMP_FORMAT};
use bess_core::lp::write_dump;
use bess_core::report::{comparison_rows, render_csv, render_text, ReportRow};
use bess_core::sim::{planned_dct, simulate_with_dct};
use bess_core::tariff::builtin_pge_tariff;
use bess_core::{
    BatterySpec, ControllerKind, DctSchedule, DctSource, ProfileSet, SimulationConfig, SimulationResult,
    SyntheticProfileSpec, TariffSchedule,
};
use rayon::prelude::*;

use crate::args::{Cli, Command, Dimension, GenArgs, PlanArgs, RunArgs, Source, SweepArgs, SynthOptions};
use crate::failure::{io, CliResult, Failure};
use crate::output::{
    write_json, write_text, CompareDoc, ControllerSummary, PlanDoc, ProfileInfo, ResultDoc, SweepDoc, SweepPoint,
    SCHEMA_VERSION,
};

pub const THREADS_ENV: &str = "BESS_LAB_THREADS";

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Compare(a) => compare(a),
        Command::Sweep(a) => sweep(a),
        Command::PlanDct(a) => plan_dct(a),
        Command::GenProfiles(a) => gen_profiles(a),
    }
}

fn synthetic_spec(shape: bess_core::LoadShape, o: &SynthOptions) -> SyntheticProfileSpec {
    let mut spec = SyntheticProfileSpec::study_year(shape, o.seed.unwrap_or(1));
    if let Some(days) = o.days {
        spec.days = days;
    }
    if let Some(peak) = o.peak_kw {
        spec.peak_load_kw = peak;
    }
    if let Some(pen) = o.pv_penetration {
        spec.pv_penetration = pen;
    }
    spec
}

fn load_profiles(src: &Source) -> CliResult<(ProfileSet, ProfileInfo)> {
    let o = &src.synth;
    let synth_flags = o.days.is_some() || o.seed.is_some() || o.peak_kw.is_some() || o.pv_penetration.is_some();
    let (profiles, source) = match (&src.profiles, src.synthetic) {
        (Some(path), None) => {
            if synth_flags {
                return Err(Failure::usage(
                    "--days, --seed, --peak-kw and --pv-penetration only apply to --synthetic",
                ));
            }
            (ingest::load_csv(path)?, path.display().to_string())
        }
        (None, Some(shape)) => {
            let spec = synthetic_spec(shape, o);
            let source = format!("synthetic:{}:seed={}:days={}", shape.name(), spec.seed, spec.days);
            (generate_synthetic(&spec)?, source)
        }
        _ => return Err(Failure::usage("exactly one of --profiles or --synthetic is required")),
    };
    let info = ProfileInfo {
        source,
        label: profiles.label.clone(),
        start: profiles.timestamp(0).format(TIMESTAMP_FORMAT).to_string(),
        end: profiles.load.end().format(TIMESTAMP_FORMAT).to_string(),
        intervals: profiles.len(),
    };
    Ok((profiles, info))
}

fn load_config(path: Option<&Path>, default_controller: ControllerKind) -> CliResult<SimulationConfig> {
    let Some(path) = path else {
        return Ok(SimulationConfig::new(default_controller, BatterySpec::reference()));
    };
    let text = io(std::fs::read_to_string(path), path)?;
    let config: SimulationConfig = serde_json::from_str(&text)
        .with_context(|| format!("{}: invalid config", path.display()))
        .map_err(Failure::Usage)?;
    config
        .validate()
        .map_err(|e| Failure::Usage(anyhow::Error::new(e).context(format!("{}: invalid config", path.display()))))?;
    Ok(config)
}

/// The schedule named by `--dct`, or one planned from the profiles.
fn thresholds(
    dct: Option<&Path>,
    config: &mut SimulationConfig,
    profiles: &ProfileSet,
    tariff: &TariffSchedule,
) -> CliResult<DctSchedule> {
    match dct {
        Some(path) => {
            config.dct_source = DctSource::User;
            Ok(load_dct_csv(path)?)
        }
        None if config.dct_source == DctSource::User => {
            Err(Failure::usage("config has dct_source \"user\" but no --dct file was given"))
        }
        None => Ok(planned_dct(profiles, config, tariff)?),
    }
}

fn provenance(dct: &DctSchedule) -> &'static str {
    match dct.provenance {
        DctProvenance::Planned => "planned",
        DctProvenance::UserSupplied => "user_supplied",
    }
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    io(std::fs::create_dir_all(dir), dir)
}

/// Runs one controller, dumping each MPC problem into `lp_dump` if set.
fn run_one(
    profiles: &ProfileSet,
    config: &SimulationConfig,
    tariff: &TariffSchedule,
    dct: &DctSchedule,
    lp_dump: Option<&Path>,
) -> CliResult<SimulationResult> {
    let Some(dir) = lp_dump else {
        return Ok(simulate_with_dct(profiles, config, tariff, dct, &mut |_, _, _| {})?);
    };
    ensure_dir(dir)?;
    let mut first_err: Option<Failure> = None;
    let result = simulate_with_dct(profiles, config, tariff, dct, &mut |i, problem, _| {
        if first_err.is_none() {
            let path = dir.join(format!("lp_{i:06}.txt"));
            if let Err(e) = io(std::fs::write(&path, write_dump(problem)), &path) {
                first_err = Some(e);
            }
        }
    })?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(result),
    }
}

fn out_dir(out: &Option<PathBuf>) -> CliResult<Option<&Path>> {
    if let Some(dir) = out {
        ensure_dir(dir)?;
    }
    Ok(out.as_deref())
}

fn simulate(a: RunArgs) -> CliResult<()> {
    let out = a.out.as_deref().ok_or_else(|| Failure::usage("simulate needs --out"))?;
    ensure_dir(out)?;
    let (profiles, info) = load_profiles(&a.source)?;
    let mut config = load_config(a.config.as_deref(), ControllerKind::Mpc)?;
    let tariff = builtin_pge_tariff();
    let dct = thresholds(a.dct.as_deref(), &mut config, &profiles, &tariff)?;
    let result = run_one(&profiles, &config, &tariff, &dct, a.lp_dump.as_deref())?;

    write_json(&out.join("result.json"), &ResultDoc::new(&result, &info, &config, provenance(&dct)))?;
    result.write_traces_csv(out.join("traces.csv"))?;
    dct.write_csv(out.join("dct.csv"))?;
    print!("{}", render_text(&comparison_rows(std::slice::from_ref(&result))));
    Ok(())
}

fn compare_results(
    profiles: &ProfileSet,
    config: &SimulationConfig,
    tariff: &TariffSchedule,
    dct: &DctSchedule,
    lp_dump: Option<&Path>,
) -> CliResult<Vec<SimulationResult>> {
    let mut results = Vec::with_capacity(2);
    for controller in [ControllerKind::RuleBased, ControllerKind::Mpc] {
        let c = SimulationConfig {
            controller,
            ..config.clone()
        };
        let dump = if controller == ControllerKind::Mpc { lp_dump } else { None };
        results.push(run_one(profiles, &c, tariff, dct, dump)?);
    }
    Ok(results)
}

fn compare(a: RunArgs) -> CliResult<()> {
    let out = out_dir(&a.out)?;
    let (profiles, info) = load_profiles(&a.source)?;
    let mut config = load_config(a.config.as_deref(), ControllerKind::Mpc)?;
    let tariff = builtin_pge_tariff();
    let dct = thresholds(a.dct.as_deref(), &mut config, &profiles, &tariff)?;
    let results = compare_results(&profiles, &config, &tariff, &dct, a.lp_dump.as_deref())?;
    let rows = comparison_rows(&results);

    if let Some(out) = out {
        let doc = CompareDoc {
            schema_version: SCHEMA_VERSION,
            profiles: &info,
            battery: &config.battery,
            rows: &rows,
            controllers: results
                .iter()
                .map(|r| ControllerSummary {
                    controller: r.controller.label(),
                    metrics: &r.metrics,
                    override_counts: &r.override_counts,
                })
                .collect(),
        };
        write_json(&out.join("compare.json"), &doc)?;
        write_text(&out.join("compare.csv"), &render_csv(&rows))?;
        for r in &results {
            let name = match r.controller {
                ControllerKind::NoBess => "traces_no_bess.csv",
                ControllerKind::RuleBased => "traces_rule_based.csv",
                ControllerKind::Mpc => "traces_mpc.csv",
            };
            r.write_traces_csv(out.join(name))?;
        }
        dct.write_csv(out.join("dct.csv"))?;
    }
    print!("{}", render_text(&rows));
    Ok(())
}

/// Worker count for sweeps: `BESS_LAB_THREADS` if set, else every core.
fn sweep_threads() -> CliResult<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Failure::usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn battery_label(b: &BatterySpec) -> String {
    format!("{}kW/{}kWh", b.p_max_kw, b.capacity_kwh)
}

fn sweep(a: SweepArgs) -> CliResult<()> {
    let out = out_dir(&a.out)?;
    let (profiles, info) = load_profiles(&a.source)?;
    let mut base = load_config(a.config.as_deref(), ControllerKind::Mpc)?;
    let tariff = builtin_pge_tariff();
    let user_dct = match a.dct.as_deref() {
        Some(path) => {
            base.dct_source = DctSource::User;
            Some(load_dct_csv(path)?)
        }
        None if base.dct_source == DctSource::User => {
            return Err(Failure::usage("config has dct_source \"user\" but no --dct file was given"));
        }
        None => None,
    };

    let configs: Vec<(String, SimulationConfig)> = match a.dimension {
        Dimension::Horizon => {
            if a.horizons.is_empty() {
                return Err(Failure::usage("--horizons is empty"));
            }
            a.horizons
                .iter()
                .map(|&t| {
                    let mut c = base.clone();
                    c.mpc.horizon_steps = t;
                    (format!("T={t}"), c)
                })
                .collect()
        }
        Dimension::Battery => {
            if a.batteries.is_empty() {
                return Err(Failure::usage("--batteries is empty"));
            }
            let mut v = Vec::with_capacity(a.batteries.len());
            for &(p, e) in &a.batteries {
                let battery = BatterySpec::new(p, e).map_err(|err| Failure::Usage(err.into()))?;
                let mut c = base.clone();
                c.battery = battery;
                c.initial_soc_kwh = None;
                v.push((battery_label(&battery), c));
            }
            v
        }
    };
    for (label, c) in &configs {
        c.validate().map_err(|e| Failure::Usage(anyhow::Error::new(e).context(label.clone())))?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep_threads()?)
        .build()
        .map_err(|e| Failure::Usage(e.into()))?;
    let runs: Vec<CliResult<SweepPoint>> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(index, (label, config))| {
                let point = || -> CliResult<SweepPoint> {
                    let dct = match &user_dct {
                        Some(d) => d.clone(),
                        None => planned_dct(&profiles, config, &tariff)?,
                    };
                    let results = compare_results(&profiles, config, &tariff, &dct, None)?;
                    let rows = comparison_rows(&results).into_iter().map(|r| r.at(label.clone())).collect();
                    Ok(SweepPoint {
                        index,
                        label: label.clone(),
                        horizon_steps: config.mpc.horizon_steps,
                        battery: config.battery,
                        rows,
                    })
                };
                point().map_err(|f| f.context(format!("sweep point {label}")))
            })
            .collect()
    });
    let points = runs.into_iter().collect::<CliResult<Vec<_>>>()?;
    let rows: Vec<ReportRow> = points.iter().flat_map(|p| p.rows.iter().cloned()).collect();

    if let Some(out) = out {
        let dimension = match a.dimension {
            Dimension::Horizon => "horizon",
            Dimension::Battery => "battery",
        };
        let doc = SweepDoc {
            schema_version: SCHEMA_VERSION,
            dimension,
            profiles: &info,
            points: &points,
        };
        write_json(&out.join("sweep.json"), &doc)?;
        write_text(&out.join("sweep.csv"), &render_csv(&rows))?;
    }
    print!("{}", render_text(&rows));
    Ok(())
}

fn plan_dct(a: PlanArgs) -> CliResult<()> {
    ensure_dir(&a.out)?;
    let (profiles, info) = load_profiles(&a.source)?;
    let config = load_config(a.config.as_deref(), ControllerKind::RuleBased)?;
    let tariff = builtin_pge_tariff();
    let dct = planned_dct(&profiles, &config, &tariff)?;
    dct.write_csv(a.out.join("dct.csv"))?;
    let doc = PlanDoc {
        schema_version: SCHEMA_VERSION,
        profiles: &info,
        battery: &config.battery,
        months: &dct.months,
    };
    write_json(&a.out.join("dct_plan.json"), &doc)?;
    for m in &dct.months {
        let parts: Vec<String> = m
            .thresholds
            .iter()
            .map(|t| format!("{:?}={:.2}", t.kind, t.threshold_kw))
            .collect();
        let note = if m.no_shaving { "  (no shaving possible)" } else { "" };
        println!("{}-{:02}  {}{note}", m.year, m.month.number(), parts.join("  "));
    }
    Ok(())
}

fn gen_profiles(a: GenArgs) -> CliResult<()> {
    ensure_dir(&a.out)?;
    let spec = synthetic_spec(a.synthetic, &a.synth);
    let profiles = generate_synthetic(&spec)?;
    let path = a.out.join("profiles.csv");
    ingest::write_csv(&profiles, &path)?;
    println!("{}", path.display());
    Ok(())
}

use std::path::PathBuf;

use bess_core::LoadShape;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "bess-lab", version, about = "Behind-the-meter battery dispatch studies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one controller over the profiles and write result.json and traces.csv.
    Simulate(RunArgs),
    /// Run the no-battery baseline, the rule-based controller and MPC on the same inputs.
    Compare(RunArgs),
    /// Repeat the comparison over horizons or battery sizes.
    Sweep(SweepArgs),
    /// Plan monthly demand-charge thresholds and write dct.csv.
    PlanDct(PlanArgs),
    /// Write a synthetic load/PV profile CSV.
    GenProfiles(GenArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Source {
    /// Profile CSV with header `timestamp,load_kw,pv_kw`.
    #[arg(long, conflicts_with = "synthetic")]
    pub profiles: Option<PathBuf>,
    /// Generate a synthetic profile of this shape instead of reading one.
    #[arg(long, value_parser = parse_shape)]
    pub synthetic: Option<LoadShape>,
    #[command(flatten)]
    pub synth: SynthOptions,
}

#[derive(Debug, Clone, Args)]
pub struct SynthOptions {
    /// Days of synthetic data (default 365).
    #[arg(long)]
    pub days: Option<u32>,
    /// Seed for synthetic data (default 1).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Synthetic peak load in kW (default 420).
    #[arg(long)]
    pub peak_kw: Option<f64>,
    /// Synthetic peak PV as a fraction of peak load (default 0.9).
    #[arg(long)]
    pub pv_penetration: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: Source,
    /// JSON simulation config; unknown keys are rejected.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Threshold CSV (`timestamp,dct_kw`) used instead of planning.
    #[arg(long)]
    pub dct: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory that receives every MPC problem in the plain-text LP layout.
    #[arg(long)]
    pub lp_dump: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dimension {
    Horizon,
    Battery,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dct: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "horizon")]
    pub dimension: Dimension,
    /// Horizon lengths in 15-minute steps.
    #[arg(long, value_delimiter = ',', default_values_t = [12usize, 16, 20])]
    pub horizons: Vec<usize>,
    /// Battery sizes as `P_KW/E_KWH`.
    #[arg(long, value_delimiter = ',', value_parser = parse_battery,
          default_values = ["280/170", "710/340", "710/510"])]
    pub batteries: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, value_parser = parse_shape)]
    pub synthetic: LoadShape,
    #[command(flatten)]
    pub synth: SynthOptions,
    /// Output directory; the profile is written to `profiles.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_shape(s: &str) -> Result<LoadShape, String> {
    s.parse().map_err(|e: bess_core::Error| e.to_string())
}

fn parse_battery(s: &str) -> Result<(f64, f64), String> {
    let (p, e) = s
        .split_once('/')
        .ok_or_else(|| format!("expected P_KW/E_KWH, got {s:?}"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|err| format!("{v:?}: {err}"));
    Ok((num(p)?, num(e)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_pairs() {
        assert_eq!(parse_battery("710/340"), Ok((710.0, 340.0)));
        assert!(parse_battery("710").is_err());
        assert!(parse_battery("a/1").is_err());
    }

    #[test]
    fn sweep_defaults() {
        let cli = Cli::try_parse_from(["bess-lab", "sweep", "--synthetic", "grocery"]).unwrap();
        let Command::Sweep(s) = cli.command else { panic!() };
        assert_eq!(s.horizons, vec![12, 16, 20]);
        assert_eq!(s.batteries, vec![(280.0, 170.0), (710.0, 340.0), (710.0, 510.0)]);
        assert_eq!(s.dimension, Dimension::Horizon);
    }

    #[test]
    fn sources_conflict() {
        let r = Cli::try_parse_from(["bess-lab", "simulate", "--synthetic", "grocery", "--profiles", "x.csv"]);
        assert!(r.is_err());
    }
}

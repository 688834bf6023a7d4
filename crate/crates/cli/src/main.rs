use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use nfbs::harness::output::{write_csv_file, SCHEMA_OVERHEAD};
use nfbs::harness::{overhead_report, run_fl_experiment, run_gain_map, run_nmse_sweep, CliOverrides, ExperimentConfig};
use nfbs::Profile;

/// Near-field wideband THz channel estimation experiments.
#[derive(Parser)]
#[command(name = "nfbs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo NMSE versus SNR or bandwidth.
    NmseSweep(Common),
    /// Array-gain raster around a user, per subcarrier and summed.
    GainMap(Common),
    /// Federated training on NBA-OMP labels with held-out evaluation.
    FlTrain(Common),
    /// Centralized versus federated symbol counts.
    Overhead(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; overrides the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the file (default: current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base system parameters; overrides the file.
    #[arg(long, value_parser = parse_profile)]
    profile: Option<Profile>,
}

fn parse_profile(s: &str) -> std::result::Result<Profile, String> {
    s.parse().map_err(|e: nfbs::Error| e.to_string())
}

impl Common {
    fn resolve(&self, fallback_seed: Option<u64>) -> Result<(ExperimentConfig, PathBuf)> {
        let cli = CliOverrides {
            profile: self.profile,
            seed: self.seed,
            output: self.out.clone(),
            fallback_seed,
        };
        let cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path, &cli)?,
            None => ExperimentConfig::from_toml_str("", &cli)?,
        };
        let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok((cfg, dir))
    }
}

fn report(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::NmseSweep(args) => {
            let (cfg, dir) = args.resolve(None)?;
            let out = run_nmse_sweep(&cfg)?;
            for row in &out.summary {
                println!("{:>8} {:>8} {:>8.2} dB", row.value, row.estimator, row.mean_nmse_db);
            }
            report(&out.write_to(&dir, &cfg.hash())?);
        }
        Command::GainMap(args) => {
            let (cfg, dir) = args.resolve(None)?;
            let map = run_gain_map(&cfg.system, &cfg.gain_map)?;
            println!("{:?}-field user", map.mode);
            report(&map.write_to(&dir, &cfg.hash())?);
        }
        Command::FlTrain(args) => {
            let (cfg, dir) = args.resolve(None)?;
            let out = run_fl_experiment(&cfg)?;
            let first = &out.rounds[0];
            let last = out.rounds.last().expect("initial round");
            println!(
                "loss {:.4e} -> {:.4e}, eval NMSE {:.4e} -> {:.4e}, label NMSE {:.4e}",
                first.train_loss,
                last.train_loss,
                first.eval_nmse,
                last.eval_nmse,
                out.label_nmse()
            );
            report(&out.write_to(&dir, &cfg.hash())?);
        }
        Command::Overhead(args) => {
            // Symbol counts do not depend on the seed.
            let (cfg, dir) = args.resolve(Some(0))?;
            let rows = overhead_report(&cfg)?;
            for r in &rows {
                println!("xi={} T_CL={} T_FL={} ratio={:.3}", r.xi, r.t_cl, r.t_fl, r.ratio);
            }
            let path = dir.join("overhead.csv");
            write_csv_file(&path, SCHEMA_OVERHEAD, &cfg.hash(), &rows)?;
            report(&[path]);
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

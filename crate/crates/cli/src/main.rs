use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use framesched::{
    min_penalty_power_target, min_penalty_target, min_power_target, run_scenario, simulate_to_dir, PolicyKind,
    Scenario, SystemConfig,
};

/// Overrides every output directory when set.
const OUT_DIR_ENV: &str = "FRAMESCHED_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "framesched",
    version,
    about = "Frame-based priority and power control for M/G/1 queues"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one policy and write summary (and optionally trace) CSVs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_policy)]
        policy: PolicyKind,
        #[arg(long, default_value_t = 1_000_000)]
        frames: u64,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write per-frame and virtual-queue traces for each replication.
        #[arg(long)]
        trace: bool,
    },
    /// Scenario sweeps.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// Optimal targets.
    Oracle {
        #[command(subcommand)]
        target: OracleTarget,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// Run a scenario file and write `<name>.csv`.
    Run {
        file: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum OracleTarget {
    /// Minimum total delay penalty under the configured bounds at one power,
    /// or under an average power budget with power control.
    Penalty {
        #[arg(long)]
        config: PathBuf,
        /// Power level; defaults to the configuration's fixed power.
        #[arg(long)]
        power: Option<f64>,
        /// Average power budget; ignores delay bounds and optimizes power too.
        #[arg(long)]
        p_const: Option<f64>,
    },
    /// Minimum average power meeting the configured delay bounds.
    Power {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_policy(s: &str) -> std::result::Result<PolicyKind, String> {
    s.parse().map_err(|e: framesched::Error| e.to_string())
}

fn out_dir(flag: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => flag.to_path_buf(),
    }
}

fn load(path: &Path) -> Result<SystemConfig> {
    SystemConfig::from_path(path).with_context(|| format!("loading {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            policy,
            frames,
            reps,
            seed,
            out,
            trace,
        } => {
            let cfg = load(&config)?;
            let dir = out_dir(&out);
            let s = simulate_to_dir(&cfg, policy, frames, reps, seed, &dir, trace)?;
            println!(
                "policy {policy}, {reps} x {frames} frames, seeds {seed}..{}",
                seed + reps as u64 - 1
            );
            for (i, e) in s.delays.iter().enumerate() {
                println!("  W{} = {:.6} ± {:.6}", i + 1, e.mean, e.std_err);
            }
            println!("  penalty = {:.6} ± {:.6}", s.penalty.mean, s.penalty.std_err);
            println!("  power = {:.6} ± {:.6}", s.power.mean, s.power.std_err);
            if !s.pathwise_ok {
                bail!("pathwise queue bounds violated");
            }
            println!("wrote {}", dir.join("summary.csv").display());
        }
        Command::Scenario {
            action: ScenarioAction::Run { file, out },
        } => {
            let sc = Scenario::from_path(&file).with_context(|| format!("loading {}", file.display()))?;
            let table = run_scenario(&sc)?;
            let dir = out_dir(&out);
            std::fs::create_dir_all(&dir)?;
            let path = dir.join(format!("{}.csv", sc.name));
            table.write_csv(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
            print!("{}", table.to_text());
            println!("wrote {}", path.display());
        }
        Command::Oracle {
            target: OracleTarget::Penalty { config, power, p_const },
        } => {
            let cfg = load(&config)?;
            let json = match p_const {
                Some(budget) => {
                    serde_json::to_string_pretty(&min_penalty_power_target(&cfg, &cfg.penalties(), budget)?)?
                }
                None => {
                    let p = power.unwrap_or_else(|| cfg.fixed_power());
                    serde_json::to_string_pretty(&min_penalty_target(&cfg, &cfg.penalties(), &cfg.delay_bounds(), p)?)?
                }
            };
            println!("{json}");
        }
        Command::Oracle {
            target: OracleTarget::Power { config },
        } => {
            let cfg = load(&config)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&min_power_target(&cfg, &cfg.delay_bounds())?)?
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

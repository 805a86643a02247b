use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::bail;
use clap::{Parser, Subcommand};

use gossip_bandits::cli::{self, RunOptions, Scenario, CSV_SCHEMAS, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "gossip-bandits", version, about = "Strategic bandit arms colluding over a gossip network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a config file or a named preset.
    #[command(after_help = CSV_SCHEMAS)]
    Run(RunArgs),
    /// List the built-in presets.
    Presets {
        /// Print the named preset as a config file instead.
        #[arg(long)]
        show: Option<String>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario name, see `presets`.
    #[arg(long)]
    preset: Option<String>,
    /// Master seed; replicas use seed, seed+1, ...
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
    /// Keep every n-th round in rounds.csv (0 disables it).
    #[arg(long)]
    stride: Option<u64>,
    /// Number of seeds per cell.
    #[arg(long)]
    replicas: Option<u32>,
    /// Write fig2.svg and decay.svg.
    #[arg(long)]
    plot: bool,
    /// Exit with status 2 when any audit check fails.
    #[arg(long)]
    strict: bool,
    /// Worker threads for independent cells (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Write topology.txt and weights.txt for each cell.
    #[arg(long)]
    dump_topology: bool,
}

fn run(args: RunArgs) -> anyhow::Result<i32> {
    let scenario = match (&args.config, &args.preset) {
        (Some(path), _) => Scenario::load(path)?,
        (None, Some(name)) => match cli::preset(name) {
            Some(s) => s,
            None => bail!("unknown preset {name:?}; try `gossip-bandits presets`"),
        },
        (None, None) => bail!("pass --config FILE or --preset NAME"),
    };
    let out = args
        .out
        .unwrap_or_else(|| PathBuf::from("out").join(&scenario.name));
    let opts = RunOptions {
        seed: args.seed,
        stride: args.stride,
        replicas: args.replicas,
        plot: args.plot,
        strict: args.strict,
        jobs: args.jobs,
        dump_topology: args.dump_topology,
        out,
        quiet: false,
    };
    cli::run(scenario, &opts)
}

fn main() -> ExitCode {
    let parsed = Cli::parse();
    let result = match parsed.command {
        Command::Run(args) => run(args),
        Command::Presets { show: Some(name) } => match cli::preset(&name) {
            Some(p) => p.to_toml().map(|t| {
                print!("{t}");
                0
            }),
            None => Err(anyhow::anyhow!("unknown preset {name:?}")),
        },
        Command::Presets { show: None } => {
            for p in cli::presets() {
                println!(
                    "{:<18} {:?}, K={}, T={}, tau={}, replicas={}",
                    p.name,
                    p.kind,
                    p.sim.arm_count(),
                    p.sim.horizon,
                    p.sim.tau,
                    p.replicas
                );
            }
            Ok(0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

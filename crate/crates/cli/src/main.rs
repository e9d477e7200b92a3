use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use coopbf::ccoi::{ccoi_precompute, CCoIStatics};
use coopbf::channel::ChannelSet;
use coopbf::harness::Algorithm;
use coopbf_cli::pipeline::{regularization, sweep};
use coopbf_cli::{execute, parse_config, synthesize, write_outputs, ExperimentConfig};

#[derive(Parser)]
#[command(name = "coopbf", version, about = "Distributed RZF beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write per-algorithm CSV traces plus a JSON report.
    Run {
        #[command(flatten)]
        common: Common,
        /// Use this channel instead of synthesizing one.
        #[arg(long)]
        channel: Option<PathBuf>,
        /// Use precomputed CCoI statics.
        #[arg(long)]
        statics: Option<PathBuf>,
    },
    /// Run configs x seeds, in parallel, with a summary table.
    Sweep {
        /// One or more config files.
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        /// Number of seeds.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// First seed.
        #[arg(long, default_value_t = 0)]
        seed_start: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<String>>,
    },
    /// Synthesize the configured channel and write it as JSON.
    ExportChannel {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a channel file and print a summary; optionally rewrite it.
    ImportChannel {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the CCoI statics offline and write them as JSON.
    PrecomputeStatics {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Take the covariances from this channel file.
        #[arg(long)]
        channel: Option<PathBuf>,
        /// Number of rounds; defaults to the configured iterations.
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of bp, amp, ccoi, admm.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<String>>,
}

fn load_config(path: &Path, algorithms: Option<&[String]>) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut config = parse_config(&text).with_context(|| format!("in {}", path.display()))?;
    if let Some(list) = algorithms {
        let run = list
            .iter()
            .map(|a| a.trim().parse::<Algorithm>())
            .collect::<Result<Vec<_>, _>>()?;
        config.algorithms.run = run;
        // revalidate with the override in place
        config = parse_config(&config.to_json())?;
    }
    Ok(config)
}

fn load_channel(path: &Path) -> Result<ChannelSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ChannelSet::from_json(&text).with_context(|| format!("in {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            common,
            channel,
            statics,
        } => {
            let config = load_config(&common.config, common.algorithms.as_deref())?;
            let seed = common.seed.unwrap_or(config.seed);
            let channels = channel.as_deref().map(load_channel).transpose()?;
            let statics = match statics {
                Some(path) => {
                    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    Some(std::sync::Arc::new(
                        CCoIStatics::from_json(&text).with_context(|| format!("in {}", path.display()))?,
                    ))
                }
                None => None,
            };
            let output = execute(&config, seed, channels, statics, None)?;
            let dir = common.out.unwrap_or_else(|| PathBuf::from(&config.output.dir));
            for path in write_outputs(&dir, &output)? {
                println!("{}", path.display());
            }
            println!("oracle throughput {:.6}", output.oracle_throughput);
            for t in &output.traces {
                println!(
                    "{:>5} final throughput {:.6}",
                    t.algorithm,
                    t.final_throughput().unwrap_or(f64::NAN)
                );
            }
        }
        Command::Sweep {
            configs,
            seeds,
            seed_start,
            out,
            algorithms,
        } => {
            let mut named = Vec::new();
            for path in &configs {
                let config = load_config(path, algorithms.as_deref())?;
                let stem = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("config")
                    .to_string();
                if named.iter().any(|(n, _): &(String, ExperimentConfig)| *n == stem) {
                    anyhow::bail!("two configs share the name {stem:?}");
                }
                named.push((stem, config));
            }
            let out = out.unwrap_or_else(|| PathBuf::from(&named[0].1.output.dir));
            let seed_list: Vec<u64> = (seed_start..seed_start + seeds).collect();
            let rows = sweep(&named, &seed_list, &out)?;
            println!("{} runs written under {}", rows.len(), out.display());
        }
        Command::ExportChannel { config, seed, out } => {
            let config = load_config(&config, None)?;
            let channels = synthesize(&config, seed.unwrap_or(config.seed))?;
            fs::write(&out, channels.to_json()?).with_context(|| format!("writing {}", out.display()))?;
            println!("{}", out.display());
        }
        Command::ImportChannel { channel, out } => {
            let channels = load_channel(&channel)?;
            let topo = channels.topology();
            println!(
                "L = {}, K = {}, edges = {}, N = {}, M = {}",
                topo.num_bs(),
                topo.num_ue(),
                topo.num_edges(),
                topo.total_tx(),
                topo.total_rx()
            );
            if let Some(out) = out {
                fs::write(&out, channels.to_json()?).with_context(|| format!("writing {}", out.display()))?;
                println!("{}", out.display());
            }
        }
        Command::PrecomputeStatics {
            config,
            seed,
            channel,
            rounds,
            out,
        } => {
            let config = load_config(&config, None)?;
            let channels = match channel {
                Some(path) => load_channel(&path)?,
                None => synthesize(&config, seed.unwrap_or(config.seed))?,
            };
            let reg = regularization(&config)?;
            let rounds = rounds.unwrap_or(config.algorithms.iterations);
            let statics = ccoi_precompute(channels.topology(), channels.statistics(), &reg, rounds)?;
            fs::write(&out, statics.to_json()?).with_context(|| format!("writing {}", out.display()))?;
            println!("{}", out.display());
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

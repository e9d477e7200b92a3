//! Instance synthesis, experiment execution and output files.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use coopbf::accounting::OpAudit;
use coopbf::amp::AmpConfig;
use coopbf::bp::BpConfig;
use coopbf::ccoi::{CCoIStatics, CcoiConfig, StaticsCache};
use coopbf::channel::{synthesize_channel, ChannelSet};
use coopbf::codec::{Exact, SCHEMA_VERSION};
use coopbf::harness::{avg_throughput, run_experiment, Algorithm, RoundTrace, RunOptions, TraceDoc};
use coopbf::oracle::{rzfbf_for_channels, Regularization};
use coopbf::symbols::{draw_symbols, SymbolVector};
use coopbf::topology::{build_topology, TopologyParams};
use coopbf::Rng;

use crate::config::ExperimentConfig;

const TOPOLOGY_STREAM: u64 = 1;
const CHANNEL_STREAM: u64 = 2;
const SYMBOL_STREAM: u64 = 3;

pub fn regularization(config: &ExperimentConfig) -> Result<Regularization> {
    let a = &config.algorithms;
    Ok(match &a.per_user_beta {
        Some(list) => Regularization::per_user(a.beta, list.clone())?,
        None => Regularization::uniform(a.beta)?,
    })
}

/// Topology and channel for `seed`. With `channel.statistics_seed` set, the
/// topology and covariances come from that seed and the fading from `seed`.
pub fn synthesize(config: &ExperimentConfig, seed: u64) -> Result<ChannelSet> {
    let (l, k, n, m) = config.sizes();
    let params = TopologyParams::uniform(config.topology_mode(), l, k, n, m);
    let policy = config.correlation_policy();
    match config.channel.statistics_seed {
        None => {
            let topo = build_topology(&params, &mut Rng::with_stream(seed, TOPOLOGY_STREAM))?;
            Ok(synthesize_channel(
                &topo,
                &policy,
                &mut Rng::with_stream(seed, CHANNEL_STREAM),
            )?)
        }
        Some(stat_seed) => {
            let topo = build_topology(&params, &mut Rng::with_stream(stat_seed, TOPOLOGY_STREAM))?;
            let base = synthesize_channel(&topo, &policy, &mut Rng::with_stream(stat_seed, CHANNEL_STREAM))?;
            Ok(base.redraw(&mut Rng::with_stream(seed, CHANNEL_STREAM)))
        }
    }
}

pub fn symbols(config: &ExperimentConfig, seed: u64, channels: &ChannelSet) -> SymbolVector {
    draw_symbols(
        &mut Rng::with_stream(seed, SYMBOL_STREAM),
        channels.topology(),
        config.metric.symbols,
    )
}

fn check_channel_shape(config: &ExperimentConfig, channels: &ChannelSet) -> Result<()> {
    let topo = channels.topology();
    if let Some(list) = &config.algorithms.per_user_beta {
        if list.len() != topo.num_ue() {
            bail!(
                "per_user_beta has {} entries but the channel has {} UEs",
                list.len(),
                topo.num_ue()
            );
        }
    }
    Ok(())
}

pub fn statics_for(
    config: &ExperimentConfig,
    channels: &ChannelSet,
    cache: Option<&Mutex<StaticsCache>>,
) -> Result<Arc<CCoIStatics>> {
    let reg = regularization(config)?;
    let rounds = config.algorithms.iterations;
    let topo = channels.topology();
    Ok(match cache {
        Some(cache) => {
            cache
                .lock()
                .expect("statics cache poisoned")
                .get_or_compute(topo, channels.statistics(), &reg, rounds)?
        }
        None => Arc::new(coopbf::ccoi::ccoi_precompute(
            topo,
            channels.statistics(),
            &reg,
            rounds,
        )?),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Complexity {
    pub algorithm: String,
    #[serde(flatten)]
    pub ops: OpAudit,
    /// CCoI only: statics factorizations divided by the statistics epoch.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amortized_statistics_factorizations: Option<Exact>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub seed: u64,
    pub config: ExperimentConfig,
    pub oracle_throughput: f64,
    pub traces: Vec<RoundTrace>,
    pub complexity: Vec<Complexity>,
}

#[derive(Serialize)]
struct ExperimentDoc<'a> {
    schema_version: u32,
    kind: &'static str,
    seed: u64,
    config: &'a ExperimentConfig,
    oracle_throughput: Exact,
    complexity: &'a [Complexity],
    traces: Vec<TraceDoc>,
}

impl ExperimentOutput {
    pub fn to_json(&self) -> String {
        let doc = ExperimentDoc {
            schema_version: SCHEMA_VERSION,
            kind: "experiment",
            seed: self.seed,
            config: &self.config,
            oracle_throughput: Exact(self.oracle_throughput),
            complexity: &self.complexity,
            traces: self.traces.iter().map(RoundTrace::to_doc).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("experiment serializes")
    }

    pub fn trace(&self, algorithm: Algorithm) -> Option<&RoundTrace> {
        self.traces.iter().find(|t| t.algorithm == algorithm.as_str())
    }
}

/// Runs every configured algorithm on one instance. `channels` and
/// `statics` override the synthesized channel and the on-the-fly statics.
pub fn execute(
    config: &ExperimentConfig,
    seed: u64,
    channels: Option<ChannelSet>,
    statics: Option<Arc<CCoIStatics>>,
    cache: Option<&Mutex<StaticsCache>>,
) -> Result<ExperimentOutput> {
    let channels = match channels {
        Some(c) => c,
        None => synthesize(config, seed).context("synthesizing the channel")?,
    };
    check_channel_shape(config, &channels)?;
    let reg = regularization(config)?;
    let s = symbols(config, seed, &channels);
    let sigma2 = config.metric.sigma2;
    let oracle = rzfbf_for_channels(&channels, s.stacked(), &reg).context("computing the reference precoder")?;
    let oracle_throughput = avg_throughput(&oracle.x, &channels, s.stacked(), sigma2)?;
    let a = &config.algorithms;
    let mut options = RunOptions {
        bp: BpConfig { damping: a.damping },
        amp: AmpConfig {
            onsager_order: a.onsager_order,
            first_memory: a.first_memory,
        },
        ccoi: CcoiConfig {
            first_memory: a.first_memory,
        },
        admm_rho: a.admm_rho,
        statics: None,
    };
    let mut traces = Vec::new();
    let mut complexity = Vec::new();
    for &alg in &a.run {
        let mut amortized = None;
        if alg == Algorithm::Ccoi {
            let st = match &statics {
                Some(st) => {
                    if !st.matches(&channels, &reg) {
                        bail!("the supplied statics were built from different covariances or regularization");
                    }
                    st.clone()
                }
                None => statics_for(config, &channels, cache)?,
            };
            let spent = st.precompute_ops().statistics_factorizations as f64;
            amortized = Some(Exact(spent / a.statistics_epoch as f64));
            options.statics = Some(st);
        }
        let trace = run_experiment(
            alg,
            &channels,
            &s,
            &reg,
            sigma2,
            a.iterations,
            Some(&oracle.x),
            &options,
        )
        .with_context(|| format!("running {alg}"))?;
        complexity.push(Complexity {
            algorithm: alg.to_string(),
            ops: trace.ops,
            amortized_statistics_factorizations: amortized,
        });
        traces.push(trace);
    }
    let mut config = config.clone();
    config.seed = seed;
    Ok(ExperimentOutput {
        seed,
        config,
        oracle_throughput,
        traces,
        complexity,
    })
}

/// Writes `<algorithm>.csv` per trace and `experiment.json` into `dir`.
pub fn write_outputs(dir: &Path, output: &ExperimentOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for trace in &output.traces {
        let path = dir.join(format!("{}.csv", trace.algorithm));
        fs::write(&path, trace.to_csv()).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    let path = dir.join("experiment.json");
    fs::write(&path, output.to_json()).with_context(|| format!("writing {}", path.display()))?;
    written.push(path);
    Ok(written)
}

/// One finished sweep job.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub config: String,
    pub seed: u64,
    pub algorithm: String,
    pub final_throughput: f64,
    pub oracle_throughput: f64,
    pub final_rel_error: f64,
}

/// Runs every `(config, seed)` pair, writing each experiment under
/// `out/<name>/seed-<seed>/` plus `summary.csv` and `summary_mean.csv`.
pub fn sweep(configs: &[(String, ExperimentConfig)], seeds: &[u64], out: &Path) -> Result<Vec<SweepRow>> {
    let cache = Mutex::new(StaticsCache::new());
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results: Vec<Result<Vec<SweepRow>>> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let (name, config) = &configs[c];
            let output =
                execute(config, seed, None, None, Some(&cache)).with_context(|| format!("{name}, seed {seed}"))?;
            write_outputs(&out.join(name).join(format!("seed-{seed}")), &output)?;
            Ok(output
                .traces
                .iter()
                .map(|t| SweepRow {
                    config: name.clone(),
                    seed,
                    algorithm: t.algorithm.clone(),
                    final_throughput: t.final_throughput().unwrap_or(f64::NAN),
                    oracle_throughput: output.oracle_throughput,
                    final_rel_error: t.rel_error.last().copied().unwrap_or(f64::NAN),
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    fs::write(out.join("summary.csv"), summary_csv(&rows))?;
    fs::write(out.join("summary_mean.csv"), summary_mean_csv(&rows))?;
    Ok(rows)
}

fn summary_csv(rows: &[SweepRow]) -> String {
    let mut text = String::from("config,seed,algorithm,final_throughput,oracle_throughput,final_rel_error\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{:.16e},{:.16e},{:.16e}\n",
            r.config, r.seed, r.algorithm, r.final_throughput, r.oracle_throughput, r.final_rel_error
        ));
    }
    text
}

fn summary_mean_csv(rows: &[SweepRow]) -> String {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in rows {
        let key = (r.config.clone(), r.algorithm.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut text = String::from("config,algorithm,runs,mean_final_throughput,mean_oracle_throughput\n");
    for (config, algorithm) in keys {
        let group: Vec<_> = rows
            .iter()
            .filter(|r| r.config == config && r.algorithm == algorithm)
            .collect();
        let n = group.len() as f64;
        let mean = group.iter().map(|r| r.final_throughput).sum::<f64>() / n;
        let oracle = group.iter().map(|r| r.oracle_throughput).sum::<f64>() / n;
        text.push_str(&format!(
            "{config},{algorithm},{},{mean:.16e},{oracle:.16e}\n",
            group.len()
        ));
    }
    text
}

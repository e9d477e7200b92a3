//! Round-synchronous experiment driver, metrics and traces.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::accounting::{MessageCount, OpAudit, RoundReport};
use crate::admm::{admm_init, admm_round, AdmmState};
use crate::amp::{amp_init, amp_round, AmpConfig, AmpState};
use crate::bp::{bp_estimate, bp_init, bp_round, BpConfig, BpState};
use crate::ccoi::{ccoi_init, ccoi_precompute, ccoi_round, CCoIState, CCoIStatics, CcoiConfig};
use crate::channel::ChannelSet;
use crate::codec::Exact;
use crate::error::{Error, Result};
use crate::numerics::{relative_error, ComplexMatrix};
use crate::oracle::Regularization;
use crate::symbols::SymbolVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Bp,
    Amp,
    Ccoi,
    Admm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Bp, Algorithm::Amp, Algorithm::Ccoi, Algorithm::Admm];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Bp => "bp",
            Algorithm::Amp => "amp",
            Algorithm::Ccoi => "ccoi",
            Algorithm::Admm => "admm",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown algorithm {s:?} (expected bp, amp, ccoi or admm)")))
    }
}

/// Mean per-antenna rate `(1/M) sum_k sum_m log2(1 + gamma_mk)` with
/// `gamma_mk = |s_mk|^2 / (|(H_k x - s_k)_m|^2 + sigma2)`.
pub fn avg_throughput(x: &ComplexMatrix, channels: &ChannelSet, s: &ComplexMatrix, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    let topo = channels.topology();
    if x.shape() != (topo.total_tx(), 1) || s.shape() != (topo.total_rx(), 1) {
        return Err(Error::DimensionMismatch(format!(
            "x {:?} and s {:?} against a {}x{} channel",
            x.shape(),
            s.shape(),
            topo.total_rx(),
            topo.total_tx()
        )));
    }
    let received = ComplexMatrix::vstack(&channels.apply(&x.split_rows(topo.bs_antennas())));
    let total: f64 = received
        .as_slice()
        .iter()
        .zip(s.as_slice())
        .map(|(y, s)| (1.0 + s.norm_sqr() / ((y - s).norm_sqr() + sigma2)).log2())
        .sum();
    Ok(total / topo.total_rx() as f64)
}

/// One iterative solver driven a round at a time.
pub trait RoundSolver {
    fn step(&mut self, channels: &ChannelSet, s: &[ComplexMatrix], reg: &Regularization) -> Result<RoundReport>;

    /// Current estimate, one block per BS.
    fn estimate(&self, channels: &ChannelSet) -> Result<Vec<ComplexMatrix>>;
}

pub struct BpSolver {
    pub state: BpState,
    pub config: BpConfig,
}

impl RoundSolver for BpSolver {
    fn step(&mut self, channels: &ChannelSet, s: &[ComplexMatrix], reg: &Regularization) -> Result<RoundReport> {
        bp_round(&mut self.state, channels, s, reg, &self.config)
    }

    fn estimate(&self, channels: &ChannelSet) -> Result<Vec<ComplexMatrix>> {
        bp_estimate(&self.state, channels.topology())
    }
}

pub struct AmpSolver {
    pub state: AmpState,
    pub config: AmpConfig,
}

impl RoundSolver for AmpSolver {
    fn step(&mut self, channels: &ChannelSet, s: &[ComplexMatrix], reg: &Regularization) -> Result<RoundReport> {
        amp_round(&mut self.state, channels, s, reg, &self.config)
    }

    fn estimate(&self, _: &ChannelSet) -> Result<Vec<ComplexMatrix>> {
        Ok(self.state.x.clone())
    }
}

pub struct CcoiSolver {
    pub state: CCoIState,
    pub statics: Arc<CCoIStatics>,
    pub config: CcoiConfig,
}

impl RoundSolver for CcoiSolver {
    fn step(&mut self, channels: &ChannelSet, s: &[ComplexMatrix], reg: &Regularization) -> Result<RoundReport> {
        if reg != self.statics.regularization() {
            return Err(Error::InvalidParam(
                "statics were built for another regularization".into(),
            ));
        }
        ccoi_round(&mut self.state, &self.statics, channels, s, &self.config)
    }

    fn estimate(&self, _: &ChannelSet) -> Result<Vec<ComplexMatrix>> {
        Ok(self.state.x.clone())
    }
}

pub struct AdmmSolver {
    pub state: AdmmState,
}

impl RoundSolver for AdmmSolver {
    fn step(&mut self, channels: &ChannelSet, s: &[ComplexMatrix], reg: &Regularization) -> Result<RoundReport> {
        admm_round(&mut self.state, channels, s, reg)
    }

    fn estimate(&self, _: &ChannelSet) -> Result<Vec<ComplexMatrix>> {
        Ok(self.state.x.clone())
    }
}

/// Jumps to a known answer on its first round and stays there. Used to
/// check the harness itself.
pub struct FixedSolver {
    pub target: Vec<ComplexMatrix>,
    current: Vec<ComplexMatrix>,
}

impl FixedSolver {
    pub fn new(target: Vec<ComplexMatrix>) -> Self {
        let current = target.iter().map(|b| ComplexMatrix::zeros(b.rows(), 1)).collect();
        Self { target, current }
    }
}

impl RoundSolver for FixedSolver {
    fn step(&mut self, _: &ChannelSet, _: &[ComplexMatrix], _: &Regularization) -> Result<RoundReport> {
        self.current = self.target.clone();
        Ok(RoundReport::default())
    }

    fn estimate(&self, _: &ChannelSet) -> Result<Vec<ComplexMatrix>> {
        Ok(self.current.clone())
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub bp: BpConfig,
    pub amp: AmpConfig,
    pub ccoi: CcoiConfig,
    pub admm_rho: f64,
    /// Prebuilt statics for CCoI; built on the fly with `T_max = rounds`
    /// when absent.
    pub statics: Option<Arc<CCoIStatics>>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            bp: BpConfig::default(),
            amp: AmpConfig::default(),
            ccoi: CcoiConfig::default(),
            admm_rho: 1.0,
            statics: None,
        }
    }
}

/// Per-round metrics. Message counters are cumulative.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundTrace {
    pub algorithm: String,
    pub avg_throughput: Vec<f64>,
    /// Empty when no reference solution was supplied.
    pub rel_error: Vec<f64>,
    pub msgs_originated: Vec<u64>,
    pub edge_deliveries: Vec<u64>,
    pub scalars_transferred: Vec<u64>,
    pub ops: OpAudit,
}

impl RoundTrace {
    fn new(algorithm: &str) -> Self {
        Self {
            algorithm: algorithm.into(),
            avg_throughput: Vec::new(),
            rel_error: Vec::new(),
            msgs_originated: Vec::new(),
            edge_deliveries: Vec::new(),
            scalars_transferred: Vec::new(),
            ops: OpAudit::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.avg_throughput.len()
    }

    pub fn is_empty(&self) -> bool {
        self.avg_throughput.is_empty()
    }

    pub fn final_throughput(&self) -> Option<f64> {
        self.avg_throughput.last().copied()
    }

    /// First iteration (one-based) whose throughput is within `fraction`
    /// of `target`.
    pub fn iterations_to_within(&self, target: f64, fraction: f64) -> Option<usize> {
        self.avg_throughput
            .iter()
            .position(|&r| (r - target).abs() <= fraction * target.abs())
            .map(|i| i + 1)
    }

    pub fn csv_header() -> &'static str {
        "iter,algorithm,avg_throughput,rel_error,msgs_originated,edge_deliveries,scalars_transferred"
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::csv_header());
        out.push('\n');
        for i in 0..self.len() {
            let err = self.rel_error.get(i).map(|e| format!("{e:.16e}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{:.16e},{},{},{},{}\n",
                i + 1,
                self.algorithm,
                self.avg_throughput[i],
                err,
                self.msgs_originated[i],
                self.edge_deliveries[i],
                self.scalars_transferred[i]
            ));
        }
        out
    }

    pub fn to_doc(&self) -> TraceDoc {
        TraceDoc {
            algorithm: self.algorithm.clone(),
            avg_throughput: self.avg_throughput.iter().map(|&v| finite(v)).collect(),
            rel_error: self.rel_error.iter().map(|&v| finite(v)).collect(),
            msgs_originated: self.msgs_originated.clone(),
            edge_deliveries: self.edge_deliveries.clone(),
            scalars_transferred: self.scalars_transferred.clone(),
        }
    }
}

fn finite(v: f64) -> Option<Exact> {
    v.is_finite().then_some(Exact(v))
}

/// JSON form of a [`RoundTrace`]; non-finite values become `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceDoc {
    pub algorithm: String,
    pub avg_throughput: Vec<Option<Exact>>,
    pub rel_error: Vec<Option<Exact>>,
    pub msgs_originated: Vec<u64>,
    pub edge_deliveries: Vec<u64>,
    pub scalars_transferred: Vec<u64>,
}

/// Runs `solver` for `rounds` rounds, recording metrics after each.
#[allow(clippy::too_many_arguments)]
pub fn run_solver(
    label: &str,
    solver: &mut dyn RoundSolver,
    channels: &ChannelSet,
    s: &SymbolVector,
    reg: &Regularization,
    sigma2: f64,
    rounds: usize,
    oracle_x: Option<&ComplexMatrix>,
) -> Result<RoundTrace> {
    if rounds == 0 {
        return Err(Error::InvalidParam("need at least one round".into()));
    }
    let topo = channels.topology();
    if s.block_sizes() != topo.ue_antennas() {
        return Err(Error::DimensionMismatch(
            "symbol blocks do not match UE antennas".into(),
        ));
    }
    if let Some(o) = oracle_x {
        if o.shape() != (topo.total_tx(), 1) {
            return Err(Error::DimensionMismatch(
                "reference solution does not match BS antennas".into(),
            ));
        }
    }
    let blocks = s.blocks();
    let mut trace = RoundTrace::new(label);
    let mut total = MessageCount::default();
    for _ in 0..rounds {
        let report = solver.step(channels, &blocks, reg)?;
        total += report.messages;
        trace.ops += report.ops;
        // a diverging iterate is recorded, not raised
        let x = ComplexMatrix::vstack(&solver.estimate(channels)?);
        trace
            .avg_throughput
            .push(avg_throughput(&x, channels, s.stacked(), sigma2)?);
        if let Some(o) = oracle_x {
            trace.rel_error.push(relative_error(&x, o));
        }
        trace.msgs_originated.push(total.originated);
        trace.edge_deliveries.push(total.edge_deliveries);
        trace.scalars_transferred.push(total.scalars);
    }
    Ok(trace)
}

/// Builds the solver for `algorithm` and runs it.
#[allow(clippy::too_many_arguments)]
pub fn run_experiment(
    algorithm: Algorithm,
    channels: &ChannelSet,
    s: &SymbolVector,
    reg: &Regularization,
    sigma2: f64,
    rounds: usize,
    oracle_x: Option<&ComplexMatrix>,
    options: &RunOptions,
) -> Result<RoundTrace> {
    let topo = channels.topology();
    let blocks = s.blocks();
    let mut solver: Box<dyn RoundSolver> = match algorithm {
        Algorithm::Bp => Box::new(BpSolver {
            state: bp_init(topo),
            config: options.bp,
        }),
        Algorithm::Amp => Box::new(AmpSolver {
            state: amp_init(topo, &blocks),
            config: options.amp,
        }),
        Algorithm::Ccoi => {
            let statics = match &options.statics {
                Some(st) => st.clone(),
                None => Arc::new(ccoi_precompute(topo, channels.statistics(), reg, rounds.max(1))?),
            };
            Box::new(CcoiSolver {
                state: ccoi_init(topo, &blocks),
                statics,
                config: options.ccoi,
            })
        }
        Algorithm::Admm => Box::new(AdmmSolver {
            state: admm_init(topo, options.admm_rho)?,
        }),
    };
    run_solver(
        algorithm.as_str(),
        solver.as_mut(),
        channels,
        s,
        reg,
        sigma2,
        rounds,
        oracle_x,
    )
}

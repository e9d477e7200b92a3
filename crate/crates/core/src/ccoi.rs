//! CCoI-aided AMP: the AMP recursion with every CSI-dependent inverse
//! replaced by an operator built from the channel covariances alone.
//!
//! Statics, for `t = 1..T_max` starting from `Tbar = Rbar = 0`:
//!
//! ```text
//! st_kl   = tr(T_kl (Tbar_l' + I)^{-1}) / N_l
//! Rbar_k  = sum_{l in B_k} st_kl R_kl
//! s_kl    = tr(R_kl (Rbar_k + beta_k I)^{-1}) / N_l
//! Tbar_l  = sum_{k in U_l} s_kl T_kl
//! A_l     = Tbar_l (Tbar_l + I)^{-1}
//! B_k     = Rbar_k (Rbar_k' + beta_k I)^{-1}
//! ```
//!
//! A round then needs only matrix-vector products with `H`:
//!
//! ```text
//! nu_k = s_k - sum_{l in B_k} H_kl x_l + B_k nu_k'
//! x_l  = (Tbar_l + I)^{-1} (Tbar_l x_l' + sum_{k in U_l} H_kl^H (Rbar_k + beta_k I)^{-1} nu_k)
//! ```
//!
//! Rounds past `T_max` reuse the last statics.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::accounting::{MessageCount, OpAudit, RoundReport};
use crate::amp::FirstMemory;
use crate::channel::{ChannelSet, EdgeStatistics, TopologyDoc};
use crate::codec::{codec_err, EncodedMatrix, Exact, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, HermitianFactor};
use crate::oracle::Regularization;
use crate::topology::NetworkTopology;

/// Statics of one round.
#[derive(Clone, Debug)]
pub struct StaticsRound {
    /// Per edge.
    pub varsigma_tilde: Vec<f64>,
    /// Per edge.
    pub varsigma: Vec<f64>,
    pub r_bar: Vec<ComplexMatrix>,
    pub t_bar: Vec<ComplexMatrix>,
    pub a: Vec<ComplexMatrix>,
    pub b: Vec<ComplexMatrix>,
    /// `Rbar_k + beta_k I`, factored.
    r_shift: Vec<HermitianFactor>,
    /// `Tbar_l + I`, factored.
    t_shift: Vec<HermitianFactor>,
}

impl StaticsRound {
    fn assemble(
        varsigma_tilde: Vec<f64>,
        varsigma: Vec<f64>,
        r_bar: Vec<ComplexMatrix>,
        t_bar: Vec<ComplexMatrix>,
        prev_r_shift: &[HermitianFactor],
        reg: &Regularization,
        ops: &mut OpAudit,
    ) -> Result<Self> {
        let mut r_shift = Vec::with_capacity(r_bar.len());
        let mut b = Vec::with_capacity(r_bar.len());
        for (k, r) in r_bar.iter().enumerate() {
            r_shift.push(HermitianFactor::new(&r.shift_diagonal(reg.for_user(k)))?);
            b.push(r * &prev_r_shift[k].inverse());
            ops.statistics_factorizations += 1;
        }
        let mut t_shift = Vec::with_capacity(t_bar.len());
        let mut a = Vec::with_capacity(t_bar.len());
        for t in &t_bar {
            let f = HermitianFactor::new(&t.shift_diagonal(1.0))?;
            a.push(t * &f.inverse());
            t_shift.push(f);
            ops.statistics_factorizations += 1;
        }
        Ok(Self {
            varsigma_tilde,
            varsigma,
            r_bar,
            t_bar,
            a,
            b,
            r_shift,
            t_shift,
        })
    }

    pub fn r_shift(&self, k: usize) -> &HermitianFactor {
        &self.r_shift[k]
    }

    pub fn t_shift(&self, l: usize) -> &HermitianFactor {
        &self.t_shift[l]
    }
}

#[derive(Clone, Debug)]
pub struct CCoIStatics {
    key: String,
    topology: NetworkTopology,
    reg: Regularization,
    rounds: Vec<StaticsRound>,
    ops: OpAudit,
}

impl CCoIStatics {
    /// [`statics_key`] of the inputs these statics were built from.
    pub fn key(&self) -> &str {
        &self.key
    }

    /// Whether these statics belong to `channels` under `reg`.
    pub fn matches(&self, channels: &ChannelSet, reg: &Regularization) -> bool {
        self.key == statics_key(channels.topology(), channels.statistics(), reg)
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn regularization(&self) -> &Regularization {
        &self.reg
    }

    pub fn t_max(&self) -> usize {
        self.rounds.len()
    }

    pub fn rounds(&self) -> &[StaticsRound] {
        &self.rounds
    }

    /// Statics used in round `t` (one-based); clamps to the last round.
    pub fn round(&self, t: usize) -> &StaticsRound {
        &self.rounds[t.clamp(1, self.rounds.len()) - 1]
    }

    /// Work spent building the statics.
    pub fn precompute_ops(&self) -> OpAudit {
        self.ops
    }

    /// Keeps the first `t_max` rounds.
    pub fn truncated(&self, t_max: usize) -> Result<Self> {
        if t_max == 0 || t_max > self.rounds.len() {
            return Err(Error::InvalidParam(format!(
                "cannot truncate {} rounds to {t_max}",
                self.rounds.len()
            )));
        }
        let mut out = self.clone();
        out.rounds.truncate(t_max);
        Ok(out)
    }
}

fn check_statistics(topology: &NetworkTopology, stats: &[EdgeStatistics]) -> Result<()> {
    if stats.len() != topology.num_edges() {
        return Err(Error::DimensionMismatch(format!(
            "{} edge statistics for {} edges",
            stats.len(),
            topology.num_edges()
        )));
    }
    for (e, &(k, l)) in topology.edges().iter().enumerate() {
        let (m, n) = (topology.ue_antennas()[k], topology.bs_antennas()[l]);
        if stats[e].r.shape() != (m, m) || stats[e].t.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!("covariances of edge ({k}, {l})")));
        }
    }
    Ok(())
}

/// Builds the statics for rounds `1..=t_max` from `{R, T, beta}` only.
pub fn ccoi_precompute(
    topology: &NetworkTopology,
    stats: &[EdgeStatistics],
    reg: &Regularization,
    t_max: usize,
) -> Result<CCoIStatics> {
    if t_max == 0 {
        return Err(Error::InvalidParam("statics need t_max >= 1".into()));
    }
    reg.check(topology)?;
    check_statistics(topology, stats)?;
    let mut ops = OpAudit::default();
    let mut t_shift: Vec<_> = topology
        .bs_antennas()
        .iter()
        .map(|&n| HermitianFactor::new(&ComplexMatrix::identity(n)))
        .collect::<Result<_>>()?;
    let mut r_shift: Vec<_> = topology
        .ue_antennas()
        .iter()
        .enumerate()
        .map(|(k, &m)| HermitianFactor::new(&ComplexMatrix::scaled_identity(m, reg.for_user(k))))
        .collect::<Result<_>>()?;
    let mut rounds = Vec::with_capacity(t_max);
    for _ in 0..t_max {
        let mut varsigma_tilde = vec![0.0; topology.num_edges()];
        let mut varsigma = vec![0.0; topology.num_edges()];
        for (e, &(_, l)) in topology.edges().iter().enumerate() {
            let n = topology.bs_antennas()[l] as f64;
            varsigma_tilde[e] = t_shift[l].solve(&stats[e].t).trace().re / n;
        }
        let mut r_bar = Vec::with_capacity(topology.num_ue());
        for k in 0..topology.num_ue() {
            let m = topology.ue_antennas()[k];
            let mut acc = ComplexMatrix::zeros(m, m);
            for &(_, e) in topology.ue_links(k) {
                acc.add_assign(&stats[e].r.scale(varsigma_tilde[e]));
            }
            let acc = acc.hermitian_part();
            let shift = HermitianFactor::new(&acc.shift_diagonal(reg.for_user(k)))?;
            for &(l, e) in topology.ue_links(k) {
                let n = topology.bs_antennas()[l] as f64;
                varsigma[e] = shift.solve(&stats[e].r).trace().re / n;
            }
            r_bar.push(acc);
        }
        let t_bar = (0..topology.num_bs())
            .map(|l| {
                let n = topology.bs_antennas()[l];
                let mut acc = ComplexMatrix::zeros(n, n);
                for &(_, e) in topology.bs_links(l) {
                    acc.add_assign(&stats[e].t.scale(varsigma[e]));
                }
                acc.hermitian_part()
            })
            .collect();
        let round = StaticsRound::assemble(varsigma_tilde, varsigma, r_bar, t_bar, &r_shift, reg, &mut ops)?;
        r_shift = round.r_shift.clone();
        t_shift = round.t_shift.clone();
        rounds.push(round);
    }
    Ok(CCoIStatics {
        key: statics_key(topology, stats, reg),
        topology: topology.clone(),
        reg: reg.clone(),
        rounds,
        ops,
    })
}

/// Content hash of everything the statics depend on: topology, `R`, `T`
/// and the regularization. Hex-encoded SHA-256.
pub fn statics_key(topology: &NetworkTopology, stats: &[EdgeStatistics], reg: &Regularization) -> String {
    let mut hasher = Sha256::new();
    let mut word = |x: u64| hasher.update(x.to_le_bytes());
    word(topology.num_bs() as u64);
    word(topology.num_ue() as u64);
    topology.bs_antennas().iter().for_each(|&n| word(n as u64));
    topology.ue_antennas().iter().for_each(|&m| word(m as u64));
    for &(k, l) in topology.edges() {
        word(k as u64);
        word(l as u64);
    }
    word(reg.beta().to_bits());
    match reg.per_user_values() {
        Some(v) => {
            word(1);
            v.iter().for_each(|b| word(b.to_bits()));
        }
        None => word(0),
    }
    for s in stats {
        for z in s.r.as_slice().iter().chain(s.t.as_slice()) {
            word(z.re.to_bits());
            word(z.im.to_bits());
        }
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Statics keyed by [`statics_key`]. A request for fewer rounds than a
/// cached entry holds is served from that entry, since the sequence of
/// rounds does not depend on `t_max`.
#[derive(Debug, Default)]
pub struct StaticsCache {
    entries: HashMap<String, Arc<CCoIStatics>>,
    computed: usize,
}

impl StaticsCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(
        &mut self,
        topology: &NetworkTopology,
        stats: &[EdgeStatistics],
        reg: &Regularization,
        t_max: usize,
    ) -> Result<Arc<CCoIStatics>> {
        let key = statics_key(topology, stats, reg);
        if let Some(hit) = self.entries.get(&key) {
            if hit.t_max() == t_max {
                return Ok(hit.clone());
            }
            if hit.t_max() > t_max {
                return Ok(Arc::new(hit.truncated(t_max)?));
            }
        }
        let fresh = Arc::new(ccoi_precompute(topology, stats, reg, t_max)?);
        self.computed += 1;
        self.entries.insert(key, fresh.clone());
        Ok(fresh)
    }

    /// Number of precomputations performed so far.
    pub fn computed(&self) -> usize {
        self.computed
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CcoiConfig {
    pub first_memory: FirstMemory,
}

#[derive(Clone, Debug)]
pub struct CCoIState {
    pub t: usize,
    pub x: Vec<ComplexMatrix>,
    pub nu: Vec<ComplexMatrix>,
}

pub fn ccoi_init(topology: &NetworkTopology, s: &[ComplexMatrix]) -> CCoIState {
    CCoIState {
        t: 0,
        x: topology
            .bs_antennas()
            .iter()
            .map(|&n| ComplexMatrix::zeros(n, 1))
            .collect(),
        nu: s.to_vec(),
    }
}

/// Traffic of one round: every UE broadcasts `nu_k` and every active BS its
/// `H_kl x_l` terms, `M_k` scalars per delivery.
pub fn ccoi_round_messages(topology: &NetworkTopology) -> MessageCount {
    let active_bs = (0..topology.num_bs())
        .filter(|&l| !topology.bs_links(l).is_empty())
        .count() as u64;
    let mut count = MessageCount {
        originated: topology.num_ue() as u64 + active_bs,
        ..MessageCount::default()
    };
    for &(k, _) in topology.edges() {
        count.edge_deliveries += 2;
        count.scalars += 2 * topology.ue_antennas()[k] as u64;
    }
    count
}

pub fn ccoi_round(
    state: &mut CCoIState,
    statics: &CCoIStatics,
    channels: &ChannelSet,
    s: &[ComplexMatrix],
    config: &CcoiConfig,
) -> Result<RoundReport> {
    let topo = channels.topology();
    if topo != statics.topology() {
        return Err(Error::DimensionMismatch(
            "statics were built for another topology".into(),
        ));
    }
    if s.len() != topo.num_ue() || s.iter().zip(topo.ue_antennas()).any(|(b, &m)| b.shape() != (m, 1)) {
        return Err(Error::DimensionMismatch(
            "symbol blocks do not match UE antennas".into(),
        ));
    }
    let round = statics.round(state.t + 1);
    let mut ops = OpAudit::default();
    let mut weighted = Vec::with_capacity(topo.num_ue());
    for k in 0..topo.num_ue() {
        let mut nu = s[k].clone();
        for &(l, e) in topo.ue_links(k) {
            nu.sub_assign(&(channels.h(e) * &state.x[l]));
            ops.csi_matvecs += 1;
        }
        if state.t > 0 || config.first_memory == FirstMemory::ZeroOmega {
            nu.add_assign(&(&round.b[k] * &state.nu[k]));
        }
        weighted.push(round.r_shift[k].solve(&nu));
        ops.prefactored_solves += 1;
        state.nu[k] = nu;
    }
    for l in 0..topo.num_bs() {
        let mut rhs = &round.t_bar[l] * &state.x[l];
        for &(k, e) in topo.bs_links(l) {
            rhs.add_assign(&(&channels.h(e).adjoint() * &weighted[k]));
            ops.csi_matvecs += 1;
        }
        state.x[l] = round.t_shift[l].solve(&rhs);
        ops.prefactored_solves += 1;
    }
    state.t += 1;
    Ok(RoundReport {
        messages: ccoi_round_messages(topo),
        ops,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoundDoc {
    varsigma_tilde: Vec<Exact>,
    varsigma: Vec<Exact>,
    r_bar: Vec<EncodedMatrix>,
    t_bar: Vec<EncodedMatrix>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StaticsDoc {
    schema_version: u32,
    kind: String,
    key: String,
    beta: Exact,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    per_user_beta: Option<Vec<Exact>>,
    topology: TopologyDoc,
    rounds: Vec<RoundDoc>,
}

const STATICS_KIND: &str = "ccoi_statics";

impl CCoIStatics {
    /// Serializes `R̄`, `T̄` and the scalars of every round. The derived
    /// operators are rebuilt on import.
    pub fn to_json(&self) -> Result<String> {
        let exact = |v: &[f64]| v.iter().map(|&x| Exact(x)).collect::<Vec<_>>();
        let doc = StaticsDoc {
            schema_version: SCHEMA_VERSION,
            kind: STATICS_KIND.into(),
            key: self.key.clone(),
            beta: Exact(self.reg.beta()),
            per_user_beta: self.reg.per_user_values().map(exact),
            topology: (&self.topology).into(),
            rounds: self
                .rounds
                .iter()
                .map(|r| RoundDoc {
                    varsigma_tilde: exact(&r.varsigma_tilde),
                    varsigma: exact(&r.varsigma),
                    r_bar: r.r_bar.iter().map(Into::into).collect(),
                    t_bar: r.t_bar.iter().map(Into::into).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).map_err(codec_err)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: StaticsDoc = serde_json::from_str(text).map_err(codec_err)?;
        if doc.schema_version != SCHEMA_VERSION || doc.kind != STATICS_KIND {
            return Err(Error::Codec(format!(
                "expected {STATICS_KIND} v{SCHEMA_VERSION}, found {} v{}",
                doc.kind, doc.schema_version
            )));
        }
        let topology = doc.topology.into_topology()?;
        let reg = match doc.per_user_beta {
            Some(v) => Regularization::per_user(doc.beta.0, v.into_iter().map(|b| b.0).collect())?,
            None => Regularization::uniform(doc.beta.0)?,
        };
        reg.check(&topology)?;
        if doc.rounds.is_empty() {
            return Err(Error::Codec("statics document has no rounds".into()));
        }
        let mut ops = OpAudit::default();
        let mut r_shift: Vec<_> = topology
            .ue_antennas()
            .iter()
            .enumerate()
            .map(|(k, &m)| HermitianFactor::new(&ComplexMatrix::scaled_identity(m, reg.for_user(k))))
            .collect::<Result<_>>()?;
        let mut rounds = Vec::with_capacity(doc.rounds.len());
        for r in doc.rounds {
            if r.varsigma.len() != topology.num_edges()
                || r.varsigma_tilde.len() != topology.num_edges()
                || r.r_bar.len() != topology.num_ue()
                || r.t_bar.len() != topology.num_bs()
            {
                return Err(Error::Codec("statics round does not match topology".into()));
            }
            let r_bar = r.r_bar.iter().map(EncodedMatrix::decode).collect::<Result<Vec<_>>>()?;
            let t_bar = r.t_bar.iter().map(EncodedMatrix::decode).collect::<Result<Vec<_>>>()?;
            let dims_ok = r_bar
                .iter()
                .zip(topology.ue_antennas())
                .all(|(m, &d)| m.shape() == (d, d))
                && t_bar
                    .iter()
                    .zip(topology.bs_antennas())
                    .all(|(m, &d)| m.shape() == (d, d));
            if !dims_ok {
                return Err(Error::Codec("statics matrix dimensions do not match topology".into()));
            }
            let round = StaticsRound::assemble(
                r.varsigma_tilde.into_iter().map(|x| x.0).collect(),
                r.varsigma.into_iter().map(|x| x.0).collect(),
                r_bar,
                t_bar,
                &r_shift,
                &reg,
                &mut ops,
            )?;
            r_shift = round.r_shift.clone();
            rounds.push(round);
        }
        Ok(Self {
            key: doc.key,
            topology,
            reg,
            rounds,
            ops,
        })
    }
}

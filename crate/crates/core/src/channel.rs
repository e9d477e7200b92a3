//! Kronecker-correlated channel synthesis.
//!
//! Each edge `(k, l)` carries `H = R^{1/2} W T^{1/2}` where `W` has i.i.d.
//! `CN(0, 1/N_l)` entries, `R = (gain * N_l / M_k) * Rtilde` and
//! `T = (M_k / N_l) * Ttilde` with `Rtilde`, `Ttilde` unit-diagonal
//! exponential correlation matrices. Hence `tr R = gain * N_l`,
//! `tr T = M_k` and `E[H H^H] = (tr T / N_l) R`.

use serde::{Deserialize, Serialize};

use crate::codec::{codec_err, EncodedMatrix, Exact, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::numerics::{complex_gaussian_matrix, exp_correlation, principal_sqrt, ComplexMatrix, Rng};
use crate::topology::NetworkTopology;

/// Correlation coefficients and link gain of one edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCorrelation {
    pub rho_r: f64,
    pub rho_t: f64,
    pub gain: f64,
}

/// How per-edge correlation parameters are chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum CorrelationPolicy {
    /// `rho_r, rho_t ~ U(0, rho_max)`, `gain ~ U(gain_min, gain_max)`, per edge.
    Random { rho_max: f64, gain_min: f64, gain_max: f64 },
    /// The same parameters on every edge.
    Fixed(EdgeCorrelation),
    /// One entry per edge, in edge-id order.
    PerEdge(Vec<EdgeCorrelation>),
}

impl Default for CorrelationPolicy {
    fn default() -> Self {
        Self::Random {
            rho_max: 0.7,
            gain_min: 0.1,
            gain_max: 1.0,
        }
    }
}

/// Second-order statistics of one link.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeStatistics {
    pub correlation: EdgeCorrelation,
    /// Receive covariance, `M_k x M_k`.
    pub r: ComplexMatrix,
    /// Transmit covariance, `N_l x N_l`.
    pub t: ComplexMatrix,
    r_sqrt: ComplexMatrix,
    t_sqrt: ComplexMatrix,
}

impl EdgeStatistics {
    /// Normalized covariances from correlation parameters.
    pub fn from_correlation(correlation: EdgeCorrelation, m_k: usize, n_l: usize) -> Result<Self> {
        if !(correlation.gain > 0.0) || !correlation.gain.is_finite() {
            return Err(Error::InvalidParam(format!(
                "link gain {} must be > 0",
                correlation.gain
            )));
        }
        let r = exp_correlation(correlation.rho_r, m_k)?.scale(correlation.gain * n_l as f64 / m_k as f64);
        let t = exp_correlation(correlation.rho_t, n_l)?.scale(m_k as f64 / n_l as f64);
        Self::from_covariances(correlation, r, t)
    }

    /// Statistics from explicit covariances (used on import).
    pub fn from_covariances(correlation: EdgeCorrelation, r: ComplexMatrix, t: ComplexMatrix) -> Result<Self> {
        let r_sqrt = principal_sqrt(&r)?;
        let t_sqrt = principal_sqrt(&t)?;
        Ok(Self {
            correlation,
            r,
            t,
            r_sqrt,
            t_sqrt,
        })
    }

    pub fn r_sqrt(&self) -> &ComplexMatrix {
        &self.r_sqrt
    }

    pub fn t_sqrt(&self) -> &ComplexMatrix {
        &self.t_sqrt
    }

    /// One channel realization `R^{1/2} W T^{1/2}`.
    pub fn draw(&self, rng: &mut Rng) -> ComplexMatrix {
        draw_kronecker(&self.r_sqrt, &self.t_sqrt, rng)
    }
}

/// `A W B^H` with `W ~ CN(0, 1/N)` entries, `N = B.rows()`. With `A`, `B`
/// principal square roots this is the Kronecker model; any other factors
/// with `A A^H = R`, `B B^H = T` give the same distribution.
pub fn draw_kronecker(rx_factor: &ComplexMatrix, tx_factor: &ComplexMatrix, rng: &mut Rng) -> ComplexMatrix {
    let m = rx_factor.rows();
    let n = tx_factor.rows();
    let w = complex_gaussian_matrix(rng, m, n, 1.0 / (n as f64).sqrt());
    &(rx_factor * &w) * &tx_factor.adjoint()
}

/// Channel statistics and one realization for every edge of a topology.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    topology: NetworkTopology,
    stats: Vec<EdgeStatistics>,
    realizations: Vec<ComplexMatrix>,
}

impl ChannelSet {
    pub fn new(
        topology: NetworkTopology,
        stats: Vec<EdgeStatistics>,
        realizations: Vec<ComplexMatrix>,
    ) -> Result<Self> {
        if stats.len() != topology.num_edges() || realizations.len() != topology.num_edges() {
            return Err(Error::DimensionMismatch(format!(
                "{} edges but {} statistics and {} realizations",
                topology.num_edges(),
                stats.len(),
                realizations.len()
            )));
        }
        for (id, &(k, l)) in topology.edges().iter().enumerate() {
            let (m, n) = (topology.ue_antennas()[k], topology.bs_antennas()[l]);
            let ok =
                realizations[id].shape() == (m, n) && stats[id].r.shape() == (m, m) && stats[id].t.shape() == (n, n);
            if !ok {
                return Err(Error::DimensionMismatch(format!(
                    "edge ({k}, {l}) expects H of {m}x{n}"
                )));
            }
            if !realizations[id].is_finite() {
                return Err(Error::NonFinite("channel realization"));
            }
        }
        Ok(Self {
            topology,
            stats,
            realizations,
        })
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn statistics(&self) -> &[EdgeStatistics] {
        &self.stats
    }

    /// `H_{k,l}` by edge id.
    pub fn h(&self, edge: usize) -> &ComplexMatrix {
        &self.realizations[edge]
    }

    pub fn realizations(&self) -> &[ComplexMatrix] {
        &self.realizations
    }

    /// `H_{k,l}` by node pair; `None` for non-edges.
    pub fn block(&self, k: usize, l: usize) -> Option<&ComplexMatrix> {
        self.topology.edge_id(k, l).map(|e| &self.realizations[e])
    }

    /// Replaces every realization with a fresh draw from the same statistics.
    pub fn redraw(&self, rng: &mut Rng) -> Self {
        let base = rng.next_u64();
        let realizations = self
            .stats
            .iter()
            .enumerate()
            .map(|(e, s)| s.draw(&mut Rng::with_stream(base, e as u64)))
            .collect();
        Self {
            topology: self.topology.clone(),
            stats: self.stats.clone(),
            realizations,
        }
    }

    /// `y_k = sum_{l in B_k} H_{k,l} x_l` for every UE.
    pub fn apply(&self, x_blocks: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
        (0..self.topology.num_ue())
            .map(|k| {
                let mut y = ComplexMatrix::zeros(self.topology.ue_antennas()[k], 1);
                for &(l, e) in self.topology.ue_links(k) {
                    y.add_assign(&(&self.realizations[e] * &x_blocks[l]));
                }
                y
            })
            .collect()
    }
}

/// Draws statistics and realizations for every edge.
///
/// One `u64` is taken from `rng`; edge `e` then uses the independent stream
/// `(that value, e)`, so the result does not depend on synthesis order.
pub fn synthesize_channel(topology: &NetworkTopology, policy: &CorrelationPolicy, rng: &mut Rng) -> Result<ChannelSet> {
    if let CorrelationPolicy::PerEdge(list) = policy {
        if list.len() != topology.num_edges() {
            return Err(Error::DimensionMismatch(format!(
                "{} per-edge correlations for {} edges",
                list.len(),
                topology.num_edges()
            )));
        }
    }
    if let CorrelationPolicy::Random {
        rho_max,
        gain_min,
        gain_max,
    } = *policy
    {
        if !(0.0..1.0).contains(&rho_max) {
            return Err(Error::InvalidRho(rho_max));
        }
        if !(gain_min > 0.0 && gain_max >= gain_min && gain_max.is_finite()) {
            return Err(Error::InvalidParam(format!("gain range [{gain_min}, {gain_max}]")));
        }
    }
    let base = rng.next_u64();
    let mut stats = Vec::with_capacity(topology.num_edges());
    let mut realizations = Vec::with_capacity(topology.num_edges());
    for (e, &(k, l)) in topology.edges().iter().enumerate() {
        let mut sub = Rng::with_stream(base, e as u64);
        let correlation = match policy {
            CorrelationPolicy::Random {
                rho_max,
                gain_min,
                gain_max,
            } => EdgeCorrelation {
                rho_r: sub.uniform(0.0, *rho_max),
                rho_t: sub.uniform(0.0, *rho_max),
                gain: sub.uniform(*gain_min, *gain_max),
            },
            CorrelationPolicy::Fixed(c) => *c,
            CorrelationPolicy::PerEdge(list) => list[e],
        };
        let s = EdgeStatistics::from_correlation(correlation, topology.ue_antennas()[k], topology.bs_antennas()[l])?;
        realizations.push(s.draw(&mut sub));
        stats.push(s);
    }
    ChannelSet::new(topology.clone(), stats, realizations)
}

/// Global `M x N` channel with zero blocks off the edge set.
pub fn assemble_global(channels: &ChannelSet) -> ComplexMatrix {
    let topo = channels.topology();
    let rows = topo.ue_offsets();
    let cols = topo.bs_offsets();
    let mut h = ComplexMatrix::zeros(topo.total_rx(), topo.total_tx());
    for (e, &(k, l)) in topo.edges().iter().enumerate() {
        h.set_block(rows[k], cols[l], channels.h(e));
    }
    h
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct TopologyDoc {
    bs_antennas: Vec<usize>,
    ue_antennas: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

impl From<&NetworkTopology> for TopologyDoc {
    fn from(topo: &NetworkTopology) -> Self {
        Self {
            bs_antennas: topo.bs_antennas().to_vec(),
            ue_antennas: topo.ue_antennas().to_vec(),
            edges: topo.edges().to_vec(),
        }
    }
}

impl TopologyDoc {
    pub(crate) fn into_topology(self) -> Result<NetworkTopology> {
        NetworkTopology::from_edges(self.bs_antennas, self.ue_antennas, self.edges)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    k: usize,
    l: usize,
    rho_r: Exact,
    rho_t: Exact,
    gain: Exact,
    h: EncodedMatrix,
    r: EncodedMatrix,
    t: EncodedMatrix,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelDoc {
    schema_version: u32,
    kind: String,
    topology: TopologyDoc,
    edges: Vec<EdgeDoc>,
}

const CHANNEL_KIND: &str = "channel_set";

impl ChannelSet {
    /// Serializes to the channel JSON document.
    pub fn to_json(&self) -> Result<String> {
        let topo = &self.topology;
        let doc = ChannelDoc {
            schema_version: SCHEMA_VERSION,
            kind: CHANNEL_KIND.into(),
            topology: topo.into(),
            edges: topo
                .edges()
                .iter()
                .enumerate()
                .map(|(e, &(k, l))| {
                    let s = &self.stats[e];
                    EdgeDoc {
                        k,
                        l,
                        rho_r: Exact(s.correlation.rho_r),
                        rho_t: Exact(s.correlation.rho_t),
                        gain: Exact(s.correlation.gain),
                        h: (&self.realizations[e]).into(),
                        r: (&s.r).into(),
                        t: (&s.t).into(),
                    }
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).map_err(codec_err)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ChannelDoc = serde_json::from_str(text).map_err(codec_err)?;
        if doc.schema_version != SCHEMA_VERSION || doc.kind != CHANNEL_KIND {
            return Err(Error::Codec(format!(
                "expected {CHANNEL_KIND} v{SCHEMA_VERSION}, found {} v{}",
                doc.kind, doc.schema_version
            )));
        }
        let topology = doc.topology.into_topology()?;
        if doc.edges.len() != topology.num_edges() {
            return Err(Error::Codec("edge records do not match topology".into()));
        }
        let mut stats = Vec::with_capacity(doc.edges.len());
        let mut realizations = Vec::with_capacity(doc.edges.len());
        for (rec, &pair) in doc.edges.iter().zip(topology.edges()) {
            if (rec.k, rec.l) != pair {
                return Err(Error::Codec(format!("edge record ({}, {}) out of order", rec.k, rec.l)));
            }
            let correlation = EdgeCorrelation {
                rho_r: rec.rho_r.0,
                rho_t: rec.rho_t.0,
                gain: rec.gain.0,
            };
            stats.push(EdgeStatistics::from_covariances(
                correlation,
                rec.r.decode()?,
                rec.t.decode()?,
            )?);
            realizations.push(rec.h.decode()?);
        }
        Self::new(topology, stats, realizations)
    }
}

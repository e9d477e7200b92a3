//! Gaussian belief propagation for the RZF precoder (BP-RZFBF).
//!
//! Variable nodes are the BS blocks `x_l`, factor nodes the UE residual
//! terms. With Gaussian messages each directed edge carries a mean and a
//! covariance-like matrix:
//!
//! ```text
//! factor k -> var l:  G     = sum_{j in B_k \ l} H_kj V_{j->k} H_kj^H + beta_k I
//!                     E_k→l = H_kl^H G^{-1} H_kl
//!                     F_k→l = H_kl^H G^{-1} (s_k - sum_{j in B_k \ l} H_kj x_{j->k})
//! var l -> factor k:  V_l→k = (sum_{i in U_l \ k} E_i→l + I)^{-1}
//!                     x_l→k = V_l→k sum_{i in U_l \ k} F_i→l
//! estimate:           x_l   = (sum_{i in U_l} E_i→l + I)^{-1} sum_{i in U_l} F_i→l
//! ```
//!
//! The schedule is synchronous flooding: a round computes every factor
//! message from the previous variable messages, then every variable message
//! from the new factor messages. All per-edge storage is indexed by the
//! topology's edge id.

use crate::accounting::{MessageCount, OpAudit, RoundReport};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, HermitianFactor};
use crate::oracle::Regularization;
use crate::topology::NetworkTopology;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BpConfig {
    /// Weight of the previous `(x, V)` message in `[0, 1)`; 0 disables damping.
    pub damping: f64,
}

impl Default for BpConfig {
    fn default() -> Self {
        Self { damping: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BpState {
    pub t: usize,
    /// `x_{l->k}` per edge.
    pub x_to_factor: Vec<ComplexMatrix>,
    /// `V_{l->k}` per edge.
    pub v_to_factor: Vec<ComplexMatrix>,
    /// `E_{k->l}` per edge.
    pub e_to_var: Vec<ComplexMatrix>,
    /// `F_{k->l}` per edge.
    pub f_to_var: Vec<ComplexMatrix>,
}

impl BpState {
    /// Number of directed messages held (two per edge).
    pub fn message_count(&self) -> usize {
        self.x_to_factor.len() + self.e_to_var.len()
    }
}

/// Factor-to-variable messages of one round.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorMessages {
    pub e: Vec<ComplexMatrix>,
    pub f: Vec<ComplexMatrix>,
}

/// Variable-to-factor messages of one round.
#[derive(Clone, Debug, PartialEq)]
pub struct VariableMessages {
    pub x: Vec<ComplexMatrix>,
    pub v: Vec<ComplexMatrix>,
}

/// Prior-only messages: `x_{l->k} = 0`, `V_{l->k} = I`, and zero factor messages.
pub fn bp_init(topology: &NetworkTopology) -> BpState {
    let n_of = |&(_, l): &(usize, usize)| topology.bs_antennas()[l];
    let edges = topology.edges();
    BpState {
        t: 0,
        x_to_factor: edges.iter().map(|e| ComplexMatrix::zeros(n_of(e), 1)).collect(),
        v_to_factor: edges.iter().map(|e| ComplexMatrix::identity(n_of(e))).collect(),
        e_to_var: edges.iter().map(|e| ComplexMatrix::zeros(n_of(e), n_of(e))).collect(),
        f_to_var: edges.iter().map(|e| ComplexMatrix::zeros(n_of(e), 1)).collect(),
    }
}

fn check_inputs(channels: &ChannelSet, s: &[ComplexMatrix], reg: &Regularization) -> Result<()> {
    let topo = channels.topology();
    reg.check(topo)?;
    if s.len() != topo.num_ue() || s.iter().zip(topo.ue_antennas()).any(|(b, &m)| b.shape() != (m, 1)) {
        return Err(Error::DimensionMismatch(
            "symbol blocks do not match UE antennas".into(),
        ));
    }
    Ok(())
}

/// Computes every `(E_{k->l}, F_{k->l})` from the current variable messages.
pub fn bp_factor_update(
    state: &BpState,
    channels: &ChannelSet,
    s: &[ComplexMatrix],
    reg: &Regularization,
    ops: &mut OpAudit,
) -> Result<FactorMessages> {
    check_inputs(channels, s, reg)?;
    let topo = channels.topology();
    let mut e_out = vec![ComplexMatrix::zeros(0, 0); topo.num_edges()];
    let mut f_out = vec![ComplexMatrix::zeros(0, 0); topo.num_edges()];
    for k in 0..topo.num_ue() {
        let links = topo.ue_links(k);
        let m = topo.ue_antennas()[k];
        // per-neighbour contributions H V H^H and H x, shared by all leave-one-out sums
        let cov: Vec<ComplexMatrix> = links
            .iter()
            .map(|&(_, e)| {
                let h = channels.h(e);
                &(h * &state.v_to_factor[e]) * &h.adjoint()
            })
            .collect();
        let mean: Vec<ComplexMatrix> = links
            .iter()
            .map(|&(_, e)| channels.h(e) * &state.x_to_factor[e])
            .collect();
        ops.csi_matvecs += links.len() as u64;
        for (idx, &(_, e)) in links.iter().enumerate() {
            let mut g = ComplexMatrix::scaled_identity(m, reg.for_user(k));
            let mut residual = s[k].clone();
            for (j, (c, y)) in cov.iter().zip(&mean).enumerate() {
                if j != idx {
                    g.add_assign(c);
                    residual.sub_assign(y);
                }
            }
            let factor = HermitianFactor::new(&g.hermitian_part())?;
            ops.csi_factorizations += 1;
            let h = channels.h(e);
            let hh = h.adjoint();
            e_out[e] = (&hh * &factor.solve(h)).hermitian_part();
            f_out[e] = &hh * &factor.solve(&residual);
        }
    }
    Ok(FactorMessages { e: e_out, f: f_out })
}

/// Computes every `(x_{l->k}, V_{l->k})` from the current factor messages.
pub fn bp_variable_update(state: &BpState, topology: &NetworkTopology, ops: &mut OpAudit) -> Result<VariableMessages> {
    let mut x_out = vec![ComplexMatrix::zeros(0, 0); topology.num_edges()];
    let mut v_out = vec![ComplexMatrix::zeros(0, 0); topology.num_edges()];
    for l in 0..topology.num_bs() {
        let n = topology.bs_antennas()[l];
        let links = topology.bs_links(l);
        let mut f_total = ComplexMatrix::zeros(n, 1);
        for &(_, e) in links {
            f_total.add_assign(&state.f_to_var[e]);
        }
        for &(k, e) in links {
            let mut precision = ComplexMatrix::identity(n);
            for &(i, e2) in links {
                if i != k {
                    precision.add_assign(&state.e_to_var[e2]);
                }
            }
            // F is a vector, so the leave-one-out sum is taken by subtraction
            let f_rest = &f_total - &state.f_to_var[e];
            let factor = HermitianFactor::new(&precision.hermitian_part())?;
            ops.csi_factorizations += 1;
            x_out[e] = factor.solve(&f_rest);
            v_out[e] = factor.inverse();
        }
    }
    Ok(VariableMessages { x: x_out, v: v_out })
}

/// Final beliefs `x_l` from the current factor messages.
pub fn bp_estimate(state: &BpState, topology: &NetworkTopology) -> Result<Vec<ComplexMatrix>> {
    (0..topology.num_bs())
        .map(|l| {
            let n = topology.bs_antennas()[l];
            let mut precision = ComplexMatrix::identity(n);
            let mut f_total = ComplexMatrix::zeros(n, 1);
            for &(_, e) in topology.bs_links(l) {
                precision.add_assign(&state.e_to_var[e]);
                f_total.add_assign(&state.f_to_var[e]);
            }
            Ok(HermitianFactor::new(&precision.hermitian_part())?.solve(&f_total))
        })
        .collect()
}

/// Traffic of one flooding round: one `(x, V)` and one `(E, F)` message per edge.
pub fn bp_round_messages(topology: &NetworkTopology) -> MessageCount {
    let mut count = MessageCount::default();
    for &(_, l) in topology.edges() {
        let n = topology.bs_antennas()[l] as u64;
        count.originated += 2;
        count.edge_deliveries += 2;
        count.scalars += 2 * (n + n * n);
    }
    count
}

/// One synchronous round: factor update, then variable update.
pub fn bp_round(
    state: &mut BpState,
    channels: &ChannelSet,
    s: &[ComplexMatrix],
    reg: &Regularization,
    config: &BpConfig,
) -> Result<RoundReport> {
    if !(0.0..1.0).contains(&config.damping) {
        return Err(Error::InvalidParam(format!(
            "damping {} outside [0, 1)",
            config.damping
        )));
    }
    let topo = channels.topology();
    let mut ops = OpAudit::default();
    let factor = bp_factor_update(state, channels, s, reg, &mut ops)?;
    state.e_to_var = factor.e;
    state.f_to_var = factor.f;
    let var = bp_variable_update(state, topo, &mut ops)?;
    if config.damping > 0.0 {
        let d = config.damping;
        for (old, new) in state.x_to_factor.iter_mut().zip(var.x) {
            *old = old.blend(&new, d);
        }
        for (old, new) in state.v_to_factor.iter_mut().zip(var.v) {
            *old = old.blend(&new, d);
        }
    } else {
        state.x_to_factor = var.x;
        state.v_to_factor = var.v;
    }
    state.t += 1;
    Ok(RoundReport {
        messages: bp_round_messages(topo),
        ops,
    })
}

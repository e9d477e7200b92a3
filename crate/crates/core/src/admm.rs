//! Sharing-form ADMM baseline for
//! `min sum_l ||x_l||^2 + (1/beta) ||s - sum_l H_l x_l||^2`.
//!
//! The coupling splits by UE: `v_k = sum_{l in B_k} H_kl x_l` is shared by
//! the `n_k = |B_k|` serving BSs. With `vbar_k = v_k / n_k`, one round is
//!
//! ```text
//! c_kl   = H_kl x_l' - vbar_k' + zbar_k' - u_k'
//! x_l    = argmin ||x||^2 + (rho/2) sum_{k in U_l} ||H_kl x - c_kl||^2
//!        = (2 I + rho sum_k H_kl^H H_kl)^{-1} rho sum_k H_kl^H c_kl
//! vbar_k = (1/n_k) sum_{l in B_k} H_kl x_l
//! zbar_k = (2 s_k / beta_k + rho (u_k' + vbar_k)) / (2 n_k / beta_k + rho)
//! u_k    = u_k' + vbar_k - zbar_k
//! ```
//!
//! The `x` system matrix does not change between rounds and is factored
//! once, on the first round. Residuals follow the usual definitions:
//! primal `||vbar - zbar||`, dual `rho ||n_k (zbar - zbar')||`, both
//! stacked over UEs.

use crate::accounting::{MessageCount, OpAudit, RoundReport};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, HermitianFactor};
use crate::oracle::Regularization;
use crate::topology::NetworkTopology;

#[derive(Clone, Debug)]
pub struct AdmmState {
    pub t: usize,
    pub rho: f64,
    pub x: Vec<ComplexMatrix>,
    pub v_bar: Vec<ComplexMatrix>,
    pub z_bar: Vec<ComplexMatrix>,
    pub u: Vec<ComplexMatrix>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    factors: Vec<Option<HermitianFactor>>,
}

pub fn admm_init(topology: &NetworkTopology, rho: f64) -> Result<AdmmState> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidPenalty(rho));
    }
    let zeros_m: Vec<_> = topology
        .ue_antennas()
        .iter()
        .map(|&m| ComplexMatrix::zeros(m, 1))
        .collect();
    Ok(AdmmState {
        t: 0,
        rho,
        x: topology
            .bs_antennas()
            .iter()
            .map(|&n| ComplexMatrix::zeros(n, 1))
            .collect(),
        v_bar: zeros_m.clone(),
        z_bar: zeros_m.clone(),
        u: zeros_m,
        primal_residual: 0.0,
        dual_residual: 0.0,
        factors: vec![None; topology.num_bs()],
    })
}

/// Each active BS sends `H_kl x_l` to its UEs and each UE sends its
/// correction `zbar_k - vbar_k - u_k` back, `M_k` scalars per delivery.
pub fn admm_round_messages(topology: &NetworkTopology) -> MessageCount {
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

pub fn admm_round(
    state: &mut AdmmState,
    channels: &ChannelSet,
    s: &[ComplexMatrix],
    reg: &Regularization,
) -> Result<RoundReport> {
    let topo = channels.topology();
    reg.check(topo)?;
    if s.len() != topo.num_ue() || s.iter().zip(topo.ue_antennas()).any(|(b, &m)| b.shape() != (m, 1)) {
        return Err(Error::DimensionMismatch(
            "symbol blocks do not match UE antennas".into(),
        ));
    }
    if state.x.len() != topo.num_bs() || state.u.len() != topo.num_ue() {
        return Err(Error::DimensionMismatch("ADMM state does not match topology".into()));
    }
    let rho = state.rho;
    let mut ops = OpAudit::default();
    // shared part of c_kl, identical for every BS serving k
    let correction: Vec<_> = (0..topo.num_ue())
        .map(|k| &(&state.z_bar[k] - &state.v_bar[k]) - &state.u[k])
        .collect();
    for l in 0..topo.num_bs() {
        let n = topo.bs_antennas()[l];
        if state.factors[l].is_none() {
            let mut gram = ComplexMatrix::scaled_identity(n, 2.0);
            for &(_, e) in topo.bs_links(l) {
                let h = channels.h(e);
                gram.add_assign(&(&h.adjoint() * h).scale(rho));
            }
            state.factors[l] = Some(HermitianFactor::new(&gram.hermitian_part())?);
            ops.csi_factorizations += 1;
        }
        let mut rhs = ComplexMatrix::zeros(n, 1);
        for &(k, e) in topo.bs_links(l) {
            let h = channels.h(e);
            let c = &(h * &state.x[l]) + &correction[k];
            rhs.add_assign(&(&h.adjoint() * &c));
            ops.csi_matvecs += 2;
        }
        state.x[l] = state.factors[l]
            .as_ref()
            .expect("factored above")
            .solve(&rhs.scale(rho));
        ops.prefactored_solves += 1;
    }
    let mut primal = 0.0;
    let mut dual = 0.0;
    for k in 0..topo.num_ue() {
        let links = topo.ue_links(k);
        let n_k = links.len() as f64;
        let beta = reg.for_user(k);
        let mut v = ComplexMatrix::zeros(topo.ue_antennas()[k], 1);
        for &(l, e) in links {
            v.add_assign(&(channels.h(e) * &state.x[l]));
            ops.csi_matvecs += 1;
        }
        let v_bar = v.scale(1.0 / n_k);
        let a = &state.u[k] + &v_bar;
        let z_bar = (&s[k].scale(2.0 / beta) + &a.scale(rho)).scale(1.0 / (2.0 * n_k / beta + rho));
        let gap = &v_bar - &z_bar;
        primal += gap.norm_sqr();
        dual += (n_k * rho).powi(2) * (&z_bar - &state.z_bar[k]).norm_sqr();
        state.u[k].add_assign(&gap);
        state.v_bar[k] = v_bar;
        state.z_bar[k] = z_bar;
    }
    state.primal_residual = primal.sqrt();
    state.dual_residual = dual.sqrt();
    state.t += 1;
    Ok(RoundReport {
        messages: admm_round_messages(topo),
        ops,
    })
}

//! Approximate message passing for the RZF precoder (AMP-RZFBF).
//!
//! BP's per-edge messages are collapsed into node quantities. Round `t`
//! reads only round `t - 1` BS state on the UE side and only round `t` UE
//! state on the BS side:
//!
//! ```text
//! UE k:   Omega_k = sum_{l in B_k} H_kl V_l H_kl^H
//!         nu_k    = s_k - sum_{l in B_k} H_kl x_l + Omega_k (Omega_k' + beta_k I)^{-1} nu_k'
//! BS l:   Sigma_l = sum_{k in U_l} H_kl^H (Omega_k + beta_k I)^{-1} H_kl
//!         g_l     = sum_{k in U_l} H_kl^H (Omega_k + beta_k I)^{-1} nu_k
//!         x_l     = (Sigma_l + I)^{-1} (Sigma_l x_l' + g_l)
//!         V_l     = (Sigma_l + I)^{-1}
//! ```
//!
//! Primes mark the previous round. The `x` update is the fused form of
//! `mu = x' + Sigma^{-1} g`, `x = (Sigma + I)^{-1} Sigma mu`; it needs no
//! inverse of `Sigma` and stays defined when `Sigma` is singular.
//! By default the first round carries no memory term; [`FirstMemory::ZeroOmega`]
//! instead starts from `Omega' = 0`, giving `Omega (beta I)^{-1} s`. The latter
//! overshoots badly for small `beta` and slows convergence.

use serde::{Deserialize, Serialize};

use crate::accounting::{MessageCount, OpAudit, RoundReport};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, HermitianFactor};
use crate::oracle::Regularization;
use crate::topology::NetworkTopology;

/// Operator order in the Onsager memory term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnsagerOrder {
    /// `Omega_t (Omega_{t-1} + beta I)^{-1} nu_{t-1}`.
    #[default]
    Derived,
    /// `(Omega_{t-1} + beta I)^{-1} Omega_t nu_{t-1}`.
    Printed,
}

/// Memory term of the first round, before any `Omega` has been formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstMemory {
    /// No memory term: the round-0 messages `x_{l->k}` are exactly zero, so
    /// there is nothing to correct.
    #[default]
    Skip,
    /// Treat the previous `Omega` as zero, giving `Omega (beta I)^{-1} s`.
    ZeroOmega,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AmpConfig {
    pub onsager_order: OnsagerOrder,
    pub first_memory: FirstMemory,
}

#[derive(Clone, Debug)]
pub struct AmpState {
    pub t: usize,
    /// `x_l` per BS.
    pub x: Vec<ComplexMatrix>,
    /// `x_l` of the previous round.
    pub x_prev: Vec<ComplexMatrix>,
    /// `V_l` per BS.
    pub v: Vec<ComplexMatrix>,
    /// `Sigma_l` per BS.
    pub sigma: Vec<ComplexMatrix>,
    /// `g_l = sum_k H_kl^H (Omega_k + beta I)^{-1} nu_k` per BS.
    pub score: Vec<ComplexMatrix>,
    /// `Omega_k` of the current round.
    pub omega: Vec<ComplexMatrix>,
    /// `Omega_k` of the previous round.
    pub omega_prev: Vec<ComplexMatrix>,
    /// `nu_k` per UE.
    pub nu: Vec<ComplexMatrix>,
    shifted_omega: Vec<Option<HermitianFactor>>,
}

impl AmpState {
    /// `mu_l = x_l' + Sigma_l^{-1} g_l`, defined only when `Sigma_l` is
    /// positive definite.
    pub fn mu(&self, l: usize) -> Result<ComplexMatrix> {
        let step = HermitianFactor::new(&self.sigma[l])?.solve(&self.score[l]);
        Ok(&self.x_prev[l] + &step)
    }
}

/// `x = 0`, `V = I`, `nu = s`, `Omega = 0`.
pub fn amp_init(topology: &NetworkTopology, s: &[ComplexMatrix]) -> AmpState {
    let n = topology.bs_antennas();
    let m = topology.ue_antennas();
    let zeros_n: Vec<_> = n.iter().map(|&n| ComplexMatrix::zeros(n, 1)).collect();
    AmpState {
        t: 0,
        x: zeros_n.clone(),
        x_prev: zeros_n.clone(),
        v: n.iter().map(|&n| ComplexMatrix::identity(n)).collect(),
        sigma: n.iter().map(|&n| ComplexMatrix::zeros(n, n)).collect(),
        score: zeros_n,
        omega: m.iter().map(|&m| ComplexMatrix::zeros(m, m)).collect(),
        omega_prev: m.iter().map(|&m| ComplexMatrix::zeros(m, m)).collect(),
        nu: s.to_vec(),
        shifted_omega: vec![None; m.len()],
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

/// UE phase: new `Omega_k` and Onsager-corrected residual `nu_k`.
pub fn amp_ue_update(
    state: &mut AmpState,
    channels: &ChannelSet,
    s: &[ComplexMatrix],
    reg: &Regularization,
    config: &AmpConfig,
    ops: &mut OpAudit,
) -> Result<()> {
    check_inputs(channels, s, reg)?;
    let topo = channels.topology();
    for k in 0..topo.num_ue() {
        let m = topo.ue_antennas()[k];
        let beta = reg.for_user(k);
        let mut omega = ComplexMatrix::zeros(m, m);
        let mut residual = s[k].clone();
        for &(l, e) in topo.ue_links(k) {
            let h = channels.h(e);
            omega.add_assign(&(&(h * &state.v[l]) * &h.adjoint()));
            residual.sub_assign(&(h * &state.x[l]));
            ops.csi_matvecs += 1;
        }
        let omega = omega.hermitian_part();
        let old_shift = match state.shifted_omega[k].take() {
            Some(f) => f,
            None => {
                ops.csi_factorizations += 1;
                HermitianFactor::new(&state.omega[k].shift_diagonal(beta))?
            }
        };
        let memory = match config.onsager_order {
            OnsagerOrder::Derived => &omega * &old_shift.solve(&state.nu[k]),
            OnsagerOrder::Printed => old_shift.solve(&(&omega * &state.nu[k])),
        };
        ops.prefactored_solves += 1;
        state.nu[k] = if state.t == 0 && config.first_memory == FirstMemory::Skip {
            residual
        } else {
            &residual + &memory
        };
        state.omega_prev[k] = std::mem::replace(&mut state.omega[k], omega);
    }
    Ok(())
}

/// BS phase: `Sigma_l`, `g_l`, then the new belief `(x_l, V_l)`.
pub fn amp_bs_update(
    state: &mut AmpState,
    channels: &ChannelSet,
    reg: &Regularization,
    ops: &mut OpAudit,
) -> Result<()> {
    let topo = channels.topology();
    reg.check(topo)?;
    // (Omega_k + beta I) is factored once per UE and reused by every BS in B_k
    let mut shifted = Vec::with_capacity(topo.num_ue());
    for k in 0..topo.num_ue() {
        shifted.push(HermitianFactor::new(&state.omega[k].shift_diagonal(reg.for_user(k)))?);
        ops.csi_factorizations += 1;
    }
    for l in 0..topo.num_bs() {
        let n = topo.bs_antennas()[l];
        let mut sigma = ComplexMatrix::zeros(n, n);
        let mut score = ComplexMatrix::zeros(n, 1);
        for &(k, e) in topo.bs_links(l) {
            let h = channels.h(e);
            let hh = h.adjoint();
            sigma.add_assign(&(&hh * &shifted[k].solve(h)));
            score.add_assign(&(&hh * &shifted[k].solve(&state.nu[k])));
            ops.prefactored_solves += 2;
            ops.csi_matvecs += 1;
        }
        let sigma = sigma.hermitian_part();
        let belief = HermitianFactor::new(&sigma.shift_diagonal(1.0))?;
        ops.csi_factorizations += 1;
        let x_new = belief.solve(&(&(&sigma * &state.x[l]) + &score));
        state.v[l] = belief.inverse();
        state.x_prev[l] = std::mem::replace(&mut state.x[l], x_new);
        state.sigma[l] = sigma;
        state.score[l] = score;
    }
    state.shifted_omega = shifted.into_iter().map(Some).collect();
    Ok(())
}

/// Traffic of one AMP round.
///
/// Every active BS originates two quantities (`H x` and `H V H^H` terms) and
/// every UE two (`nu` and `Omega`), so a full topology originates
/// `2 (K + L)` messages. Each quantity is delivered once per incident edge.
pub fn amp_round_messages(topology: &NetworkTopology) -> MessageCount {
    let active_bs = (0..topology.num_bs())
        .filter(|&l| !topology.bs_links(l).is_empty())
        .count() as u64;
    let mut count = MessageCount {
        originated: 2 * (topology.num_ue() as u64 + active_bs),
        ..MessageCount::default()
    };
    for &(k, _) in topology.edges() {
        let m = topology.ue_antennas()[k] as u64;
        // BS -> UE side and UE -> BS side, each a vector and a Hermitian block
        count.edge_deliveries += 4;
        count.scalars += 2 * (m + m * m);
    }
    count
}

/// One round: UE phase then BS phase.
pub fn amp_round(
    state: &mut AmpState,
    channels: &ChannelSet,
    s: &[ComplexMatrix],
    reg: &Regularization,
    config: &AmpConfig,
) -> Result<RoundReport> {
    let mut ops = OpAudit::default();
    amp_ue_update(state, channels, s, reg, config, &mut ops)?;
    amp_bs_update(state, channels, reg, &mut ops)?;
    state.t += 1;
    Ok(RoundReport {
        messages: amp_round_messages(channels.topology()),
        ops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{synthesize_channel, CorrelationPolicy};
    use crate::numerics::{complex_gaussian_matrix, hermitian_eigenvalues, relative_error, Rng};
    use crate::topology::{build_topology, TopologyMode, TopologyParams};

    fn instance(seed: u64) -> (ChannelSet, Vec<ComplexMatrix>) {
        let mut rng = Rng::new(seed);
        let p = TopologyParams::uniform(TopologyMode::NearestB { b: 2 }, 4, 4, 3, 2);
        let topo = build_topology(&p, &mut rng).unwrap();
        let ch = synthesize_channel(&topo, &CorrelationPolicy::default(), &mut rng).unwrap();
        let s = complex_gaussian_matrix(&mut rng, topo.total_rx(), 1, 1.0).split_rows(topo.ue_antennas());
        (ch, s)
    }

    #[test]
    fn init_copies_symbols() {
        let (ch, s) = instance(1);
        let st = amp_init(ch.topology(), &s);
        assert_eq!(st.nu, s);
        assert!(st.omega_prev.iter().all(|o| o.max_abs() == 0.0));
        assert!(st.x.iter().all(|x| x.max_abs() == 0.0));
        let again = amp_init(ch.topology(), &s);
        assert_eq!(again.nu, st.nu);
        assert_eq!(again.v, st.v);
    }

    #[test]
    fn first_ue_update_substitutes_init() {
        let (ch, s) = instance(2);
        let reg = Regularization::uniform(0.05).unwrap();
        let zero_omega = AmpConfig {
            first_memory: FirstMemory::ZeroOmega,
            ..AmpConfig::default()
        };
        let mut st = amp_init(ch.topology(), &s);
        let mut skip = st.clone();
        amp_ue_update(&mut st, &ch, &s, &reg, &zero_omega, &mut OpAudit::default()).unwrap();
        amp_ue_update(&mut skip, &ch, &s, &reg, &AmpConfig::default(), &mut OpAudit::default()).unwrap();
        let topo = ch.topology();
        for k in 0..topo.num_ue() {
            let mut omega = ComplexMatrix::zeros(2, 2);
            for &(_, e) in topo.ue_links(k) {
                omega.add_assign(&(ch.h(e) * &ch.h(e).adjoint()));
            }
            let expected_nu = &s[k] + &(&omega * &s[k]).scale(1.0 / 0.05);
            assert!(relative_error(&st.omega[k], &omega) < 1e-13);
            assert!(relative_error(&st.nu[k], &expected_nu) < 1e-12);
            assert_eq!(skip.nu[k], s[k]);
            assert_eq!(skip.omega[k], st.omega[k]);
        }
    }

    #[test]
    fn zero_symbols_stay_zero() {
        let (ch, s) = instance(3);
        let zeros: Vec<_> = s.iter().map(|b| ComplexMatrix::zeros(b.rows(), 1)).collect();
        let reg = Regularization::uniform(0.01).unwrap();
        let mut st = amp_init(ch.topology(), &zeros);
        for _ in 0..5 {
            amp_round(&mut st, &ch, &zeros, &reg, &AmpConfig::default()).unwrap();
            assert!(st.nu.iter().all(|v| v.max_abs() == 0.0));
            assert!(st.x.iter().all(|v| v.max_abs() == 0.0));
        }
    }

    #[test]
    fn fused_update_matches_two_step_form() {
        let (ch, s) = instance(4);
        let reg = Regularization::uniform(0.05).unwrap();
        let mut st = amp_init(ch.topology(), &s);
        for _ in 0..3 {
            amp_round(&mut st, &ch, &s, &reg, &AmpConfig::default()).unwrap();
        }
        for l in 0..ch.topology().num_bs() {
            let Ok(mu) = st.mu(l) else { continue };
            let two_step = HermitianFactor::new(&st.sigma[l].shift_diagonal(1.0))
                .unwrap()
                .solve(&(&st.sigma[l] * &mu));
            assert!(relative_error(&st.x[l], &two_step) < 1e-10);
        }
    }

    #[test]
    fn spectra_stay_in_range() {
        let (ch, s) = instance(5);
        let reg = Regularization::uniform(0.01).unwrap();
        let mut st = amp_init(ch.topology(), &s);
        for _ in 0..10 {
            amp_round(&mut st, &ch, &s, &reg, &AmpConfig::default()).unwrap();
            for v in &st.v {
                let eig = hermitian_eigenvalues(v).unwrap();
                assert!(eig[0] > 0.0 && *eig.last().unwrap() <= 1.0 + 1e-12);
            }
            for o in &st.omega {
                assert!(hermitian_eigenvalues(o).unwrap()[0] >= -1e-12);
            }
        }
    }

    #[test]
    fn full_topology_message_count() {
        for (l, k) in [(2, 2), (4, 4), (16, 16)] {
            let topo = build_topology(
                &TopologyParams::uniform(TopologyMode::Full, l, k, 2, 2),
                &mut Rng::new(0),
            )
            .unwrap();
            assert_eq!(amp_round_messages(&topo).originated, 2 * (k + l) as u64);
        }
    }
}

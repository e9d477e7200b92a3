mod common;

use coopbf::bp::{bp_estimate, bp_init, bp_round, BpConfig, BpState};
use coopbf::channel::{synthesize_channel, ChannelSet, CorrelationPolicy};
use coopbf::numerics::{complex_gaussian_matrix, hermitian_eigenvalues, relative_error, Rng};
use coopbf::oracle::{rzfbf_for_channels, Regularization};
use coopbf::topology::{NetworkTopology, TopologyMode};
use coopbf::ComplexMatrix;
use proptest::prelude::*;

fn state_change(a: &BpState, b: &BpState) -> f64 {
    [
        common::max_change(&a.x_to_factor, &b.x_to_factor),
        common::max_change(&a.v_to_factor, &b.v_to_factor),
        common::max_change(&a.e_to_var, &b.e_to_var),
        common::max_change(&a.f_to_var, &b.f_to_var),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

fn estimate(st: &BpState, ch: &ChannelSet) -> ComplexMatrix {
    ComplexMatrix::vstack(&bp_estimate(st, ch.topology()).unwrap())
}

/// Random bipartite tree: every new node hangs off an existing node of the
/// other kind.
fn random_tree(rng: &mut Rng, l: usize, k: usize) -> NetworkTopology {
    let mut edges = vec![(0, 0)];
    let (mut bs, mut ue) = (1, 1);
    while bs < l || ue < k {
        let add_bs = ue == k || (bs < l && rng.next_u64().is_multiple_of(2));
        if add_bs {
            edges.push(((rng.next_u64() % ue as u64) as usize, bs));
            bs += 1;
        } else {
            edges.push((ue, (rng.next_u64() % bs as u64) as usize));
            ue += 1;
        }
    }
    NetworkTopology::from_edges(vec![2; l], vec![1; k], edges).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn converged_messages_are_a_fixed_point_at_the_oracle(seed in 0u64..10_000) {
        let (ch, s) = common::instance(seed, TopologyMode::Full, 4, 4, 2, 2);
        let reg = Regularization::uniform(1e-2).unwrap();
        let oracle = rzfbf_for_channels(&ch, &ComplexMatrix::vstack(&s), &reg).unwrap();
        let mut st = bp_init(ch.topology());
        let mut converged = false;
        for _ in 0..5000 {
            let prev = st.clone();
            bp_round(&mut st, &ch, &s, &reg, &BpConfig::default()).unwrap();
            if state_change(&prev, &st) <= 1e-12 {
                converged = true;
                break;
            }
        }
        // loopy Gaussian BP need not converge; the property is about fixed points
        prop_assume!(converged);
        let fixed = st.clone();
        bp_round(&mut st, &ch, &s, &reg, &BpConfig::default()).unwrap();
        prop_assert!(state_change(&fixed, &st) <= 1e-10);
        let err = relative_error(&estimate(&st, &ch), &oracle.x);
        prop_assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn message_covariances_stay_between_zero_and_identity(seed in any::<u64>()) {
        let (ch, s) = common::instance(seed, TopologyMode::NearestB { b: 2 }, 5, 5, 2, 2);
        let reg = Regularization::uniform(1e-2).unwrap();
        let mut st = bp_init(ch.topology());
        for _ in 0..10 {
            bp_round(&mut st, &ch, &s, &reg, &BpConfig::default()).unwrap();
            for v in &st.v_to_factor {
                let eig = hermitian_eigenvalues(&v.hermitian_part()).unwrap();
                prop_assert!(eig[0] > 0.0);
                prop_assert!(*eig.last().unwrap() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn trees_are_exact_after_diameter_rounds(seed in any::<u64>(), l in 1usize..6, k in 1usize..6) {
        let mut rng = Rng::new(seed);
        let topo = random_tree(&mut rng, l, k);
        prop_assert!(topo.is_forest());
        let diameter = topo.diameter().unwrap();
        let ch = synthesize_channel(&topo, &CorrelationPolicy::default(), &mut rng).unwrap();
        let s = complex_gaussian_matrix(&mut rng, topo.total_rx(), 1, 1.0);
        let reg = Regularization::uniform(1e-2).unwrap();
        let oracle = rzfbf_for_channels(&ch, &s, &reg).unwrap();
        let blocks = s.split_rows(topo.ue_antennas());
        let mut st = bp_init(&topo);
        for _ in 0..diameter {
            bp_round(&mut st, &ch, &blocks, &reg, &BpConfig::default()).unwrap();
        }
        let err = relative_error(&estimate(&st, &ch), &oracle.x);
        prop_assert!(err <= 1e-8, "diameter {diameter}: {err}");
    }
}

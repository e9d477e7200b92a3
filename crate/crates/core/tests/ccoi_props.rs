mod common;

use coopbf::ccoi::{ccoi_init, ccoi_precompute, ccoi_round, CcoiConfig};
use coopbf::channel::{synthesize_channel, CorrelationPolicy, EdgeCorrelation};
use coopbf::numerics::{relative_error, Rng};
use coopbf::oracle::Regularization;
use coopbf::topology::{NetworkTopology, TopologyMode};
use coopbf::ComplexMatrix;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn statics_depend_only_on_statistics(seed in any::<u64>(), other in any::<u64>(), beta in prop::sample::select(vec![1e-3, 1e-2, 1.0])) {
        let (ch, _) = common::instance(seed, TopologyMode::NearestB { b: 2 }, 4, 4, 3, 2);
        let redrawn = ch.redraw(&mut Rng::new(other));
        let reg = Regularization::uniform(beta).unwrap();
        let a = ccoi_precompute(ch.topology(), ch.statistics(), &reg, 6).unwrap();
        let b = ccoi_precompute(redrawn.topology(), redrawn.statistics(), &reg, 6).unwrap();
        prop_assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn rounds_never_factor_csi(seed in any::<u64>()) {
        let (ch, s) = common::instance(seed, TopologyMode::NearestB { b: 3 }, 6, 6, 4, 2);
        let reg = Regularization::uniform(1e-2).unwrap();
        let statics = ccoi_precompute(ch.topology(), ch.statistics(), &reg, 10).unwrap();
        let mut st = ccoi_init(ch.topology(), &s);
        for _ in 0..12 {
            let report = ccoi_round(&mut st, &statics, &ch, &s, &CcoiConfig::default()).unwrap();
            prop_assert_eq!(report.ops.csi_factorizations, 0);
            prop_assert_eq!(report.ops.statistics_factorizations, 0);
        }
    }
}

struct SingleCell {
    frobenius: f64,
    trace_deviation: f64,
}

/// One BS and one UE with `n` antennas each and white covariances. Returns
/// the Frobenius error of the first-round surrogate against the sample mean
/// of `H H^H`, and the mean per-draw deviation of the normalized trace.
fn single_cell(n: usize, draws: usize) -> SingleCell {
    let topo = NetworkTopology::from_edges(vec![n], vec![n], [(0, 0)]).unwrap();
    let white = CorrelationPolicy::Fixed(EdgeCorrelation {
        rho_r: 0.0,
        rho_t: 0.0,
        gain: 1.0,
    });
    let mut rng = Rng::new(n as u64);
    let ch = synthesize_channel(&topo, &white, &mut rng).unwrap();
    let reg = Regularization::uniform(1e-2).unwrap();
    let statics = ccoi_precompute(&topo, ch.statistics(), &reg, 1).unwrap();
    let first = &statics.rounds()[0];
    assert_eq!(first.varsigma_tilde, vec![1.0]);
    let surrogate = &first.r_bar[0];
    let surrogate_trace = surrogate.trace().re / n as f64;
    let stat = &ch.statistics()[0];
    let mut mean = ComplexMatrix::zeros(n, n);
    let mut trace_deviation = 0.0;
    for _ in 0..draws {
        let h = stat.draw(&mut rng);
        // V = I before the first round
        let omega = &h * &h.adjoint();
        trace_deviation += (omega.trace().re / n as f64 - surrogate_trace).abs();
        mean.add_assign(&omega);
    }
    SingleCell {
        frobenius: relative_error(surrogate, &mean.scale(1.0 / draws as f64)),
        trace_deviation: trace_deviation / draws as f64,
    }
}

#[test]
fn first_surrogate_matches_sampling_and_self_averages() {
    let small = single_cell(8, 2000);
    let large = single_cell(64, 2000);
    assert!(small.frobenius < 0.05, "n = 8: {}", small.frobenius);
    assert!(large.frobenius < 0.05, "n = 64: {}", large.frobenius);
    assert!(
        large.trace_deviation < small.trace_deviation,
        "{} vs {}",
        large.trace_deviation,
        small.trace_deviation
    );
}

#![allow(dead_code)]

use coopbf::channel::{synthesize_channel, ChannelSet, CorrelationPolicy};
use coopbf::numerics::{complex_gaussian_matrix, Rng};
use coopbf::topology::{build_topology, TopologyMode, TopologyParams};
use coopbf::ComplexMatrix;

pub fn instance(
    seed: u64,
    mode: TopologyMode,
    l: usize,
    k: usize,
    n: usize,
    m: usize,
) -> (ChannelSet, Vec<ComplexMatrix>) {
    let mut rng = Rng::new(seed);
    let topo = build_topology(&TopologyParams::uniform(mode, l, k, n, m), &mut rng).unwrap();
    let ch = synthesize_channel(&topo, &CorrelationPolicy::default(), &mut rng).unwrap();
    let s = complex_gaussian_matrix(&mut rng, topo.total_rx(), 1, 1.0).split_rows(topo.ue_antennas());
    (ch, s)
}

/// `G G^H + shift I` for a random square `G`.
pub fn random_hpd(rng: &mut Rng, n: usize, shift: f64) -> ComplexMatrix {
    let g = complex_gaussian_matrix(rng, n, n, 1.0);
    (&g * &g.adjoint()).shift_diagonal(shift).hermitian_part()
}

pub fn max_change(a: &[ComplexMatrix], b: &[ComplexMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).max_abs()).fold(0.0, f64::max)
}

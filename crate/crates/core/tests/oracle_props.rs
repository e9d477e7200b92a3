mod common;

use coopbf::numerics::{complex_gaussian_matrix, hermitian_solve, relative_error, Rng, C64};
use coopbf::oracle::{gaussian_second_moments, mmse_virtual, power_normalize, rzfbf_centralized, QuadraticSide};
use coopbf::ComplexMatrix;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn push_through_duality(seed in any::<u64>(), m in 1usize..12, n in 1usize..12, beta in prop::sample::select(vec![1e-3, 1e-2, 1.0])) {
        let mut rng = Rng::new(seed);
        let h = complex_gaussian_matrix(&mut rng, m, n, 1.0);
        let s = complex_gaussian_matrix(&mut rng, m, 1, 1.0);
        let dual = rzfbf_centralized(&h, &s, beta).unwrap().x;
        let primal = hermitian_solve(&(&h.adjoint() * &h).shift_diagonal(beta).hermitian_part(), &(&h.adjoint() * &s)).unwrap();
        prop_assert!(relative_error(&dual, &primal) <= 1e-10, "{}", relative_error(&dual, &primal));
    }

    #[test]
    fn normalization_keeps_direction(seed in any::<u64>(), blocks in prop::collection::vec(1usize..4, 1..4), budget in 0.1f64..10.0) {
        let mut rng = Rng::new(seed);
        let n: usize = blocks.iter().sum();
        let h = complex_gaussian_matrix(&mut rng, 3, n, 1.0);
        let s = complex_gaussian_matrix(&mut rng, 3, 1, 1.0);
        let mut sol = rzfbf_centralized(&h, &s, 0.1).unwrap();
        sol.block_sizes = blocks.clone();
        let out = power_normalize(&sol, &vec![budget; blocks.len()]).unwrap();
        let alpha = out.alpha.unwrap();
        prop_assert!(alpha > 0.0);
        prop_assert!(relative_error(&out.x, &sol.x.scale(alpha)) <= 1e-15);
        let worst = out.blocks().iter().map(|b| b.norm_sqr()).fold(0.0, f64::max);
        prop_assert!((worst - budget).abs() <= 1e-9 * budget);
    }
}

#[test]
fn virtual_model_mean_is_the_precoder_on_100_instances() {
    let mut rng = Rng::new(2024);
    for i in 0..100 {
        let m = 1 + (rng.next_u64() % 32) as usize;
        let n = 1 + (rng.next_u64() % 32) as usize;
        let beta = [1e-3, 1e-2, 1.0][i % 3];
        let h = complex_gaussian_matrix(&mut rng, m, n, 1.0);
        let s = complex_gaussian_matrix(&mut rng, m, 1, 1.0);
        let a = mmse_virtual(&h, &s, beta).unwrap();
        let b = rzfbf_centralized(&h, &s, beta).unwrap().x;
        assert!(
            relative_error(&a, &b) <= 1e-9,
            "instance {i}: {}",
            relative_error(&a, &b)
        );
    }
}

/// Mean of the density proportional to `exp(-a |x|^2 + conj(b) x + conj(x) b)`
/// by tensor trapezoid quadrature over the real and imaginary parts.
fn quadrature_mean(a: f64, b: C64) -> C64 {
    let center = b / a;
    let half_width = 12.0 / a.sqrt();
    let steps = 400;
    let h = 2.0 * half_width / steps as f64;
    let mut mass = 0.0;
    let mut first = C64::new(0.0, 0.0);
    for i in 0..=steps {
        for j in 0..=steps {
            let x = C64::new(
                center.re - half_width + i as f64 * h,
                center.im - half_width + j as f64 * h,
            );
            let exponent = -a * x.norm_sqr() + 2.0 * (b.conj() * x).re;
            // shift by the peak value to keep the weights in range
            let w = (exponent - b.norm_sqr() / a).exp();
            mass += w;
            first += x * w;
        }
    }
    first / mass
}

#[test]
fn scalar_complex_gaussian_mean_by_quadrature() {
    for (a, b) in [
        (1.0, C64::new(0.3, -0.2)),
        (2.5, C64::new(-1.0, 0.7)),
        (0.4, C64::new(0.05, 0.9)),
    ] {
        let mean = quadrature_mean(a, b);
        let closed = b / a;
        assert!((mean - closed).norm() <= 1e-6, "a {a}: {mean} vs {closed}");
    }
}

fn random_psd(rng: &mut Rng, n: usize) -> ComplexMatrix {
    common::random_hpd(rng, n, 0.1).scale(1.0 / n as f64)
}

#[test]
fn second_moments_match_sampling() {
    let mut rng = Rng::new(77);
    let draws = 100_000;
    for case in 0..10 {
        let m = 2 + case % 3;
        let n = 2 + (case / 3) % 3;
        let xbar = complex_gaussian_matrix(&mut rng, m, n, 0.5);
        let a = random_psd(&mut rng, m);
        let b = random_psd(&mut rng, n);
        let c = random_psd(&mut rng, n);
        let d = random_psd(&mut rng, m);
        let a_half = coopbf::numerics::principal_sqrt(&a).unwrap();
        let b_half = coopbf::numerics::principal_sqrt(&b).unwrap();
        let mut left = ComplexMatrix::zeros(m, m);
        let mut right = ComplexMatrix::zeros(n, n);
        for _ in 0..draws {
            let w = complex_gaussian_matrix(&mut rng, m, n, 1.0);
            let x = &xbar + &(&(&a_half * &w) * &b_half);
            left.add_assign(&(&(&x * &c) * &x.adjoint()));
            right.add_assign(&(&(&x.adjoint() * &d) * &x));
        }
        let left = left.scale(1.0 / draws as f64);
        let right = right.scale(1.0 / draws as f64);
        let closed_left = gaussian_second_moments(&xbar, &a, &b, &c, QuadraticSide::XCXh).unwrap();
        let closed_right = gaussian_second_moments(&xbar, &a, &b, &d, QuadraticSide::XhDX).unwrap();
        assert!(
            relative_error(&left, &closed_left) < 0.01,
            "case {case}: {}",
            relative_error(&left, &closed_left)
        );
        assert!(
            relative_error(&right, &closed_right) < 0.01,
            "case {case}: {}",
            relative_error(&right, &closed_right)
        );
    }
}

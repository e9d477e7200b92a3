//! One line per acceptance criterion. Exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use coopbf::amp::AmpConfig;
use coopbf::ccoi::{ccoi_init, ccoi_precompute, ccoi_round, CcoiConfig};
use coopbf::channel::{synthesize_channel, CorrelationPolicy};
use coopbf::harness::{run_experiment, Algorithm, RoundTrace, RunOptions};
use coopbf::numerics::{complex_gaussian_matrix, principal_sqrt, relative_error, Rng};
use coopbf::oracle::{
    gaussian_second_moments, mmse_virtual, rzfbf_centralized, rzfbf_for_channels, QuadraticSide, Regularization,
};
use coopbf::symbols::{draw_symbols, SymbolKind};
use coopbf::topology::NetworkTopology;
use coopbf::ComplexMatrix;
use coopbf_cli::pipeline::{symbols, synthesize};
use coopbf_cli::{execute, parse_config, write_outputs, ExperimentConfig};

const SEEDS: u64 = 100;

// pinned tolerances
const ORACLE_REL: f64 = 1e-9;
const ORACLE_BUDGET: Duration = Duration::from_secs(5);
const BP_REL: f64 = 1e-6;
const BP_ROUNDS: usize = 100;
const BP_MIN_SEEDS: usize = 95;
const TREE_REL: f64 = 1e-8;
const AMP_REL: f64 = 1e-3;
const AMP_THROUGHPUT: f64 = 0.01;
const AMP_MIN_SEEDS: usize = 90;
const AMP_BUDGET: Duration = Duration::from_secs(30);
const CCOI_THROUGHPUT: f64 = 0.05;
const CCOI_MIN_SEEDS: usize = 90;
const ROUNDS: usize = 50;
const ADMM_SEEDS: u64 = 50;
const ADMM_ROUNDS: usize = 1000;
const ADMM_FACTOR: f64 = 2.0;
const MOMENT_DRAWS: usize = 100_000;
const MOMENT_REL: f64 = 0.01;
const MOMENT_BUDGET: Duration = Duration::from_secs(60);
const LARGE_BUDGET: Duration = Duration::from_secs(600);
const LARGE_AMP_FRACTION: f64 = 0.95;

type Check = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config(text: &str) -> ExperimentConfig {
    parse_config(text).expect("acceptance config parses")
}

fn fig2(run: &str) -> ExperimentConfig {
    config(&format!(
        r#"{{"L": 16, "K": 16, "N_l": 4, "M_k": 2,
            "topology": {{"mode": "nearest_b", "b": 3}},
            "algorithms": {{"run": [{run}], "iterations": {ROUNDS}, "beta": 0.01}},
            "metric": {{"sigma2": 0.01}}}}"#
    ))
}

fn median(mut v: Vec<usize>) -> f64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

fn rounds_to(trace: &RoundTrace, oracle: f64, fraction: f64) -> usize {
    trace.iterations_to_within(oracle, fraction).unwrap_or(trace.len() + 1)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(1);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let m = 1 + (rng.next_u64() % 32) as usize;
        let n = 1 + (rng.next_u64() % 32) as usize;
        let beta = [1e-3, 1e-2, 1.0][i % 3];
        let h = complex_gaussian_matrix(&mut rng, m, n, 1.0);
        let s = complex_gaussian_matrix(&mut rng, m, 1, 1.0);
        let a = mmse_virtual(&h, &s, beta).unwrap();
        let b = rzfbf_centralized(&h, &s, beta).unwrap().x;
        worst = worst.max(relative_error(&a, &b));
    }
    let took = start.elapsed();
    outcome(
        worst <= ORACLE_REL && took < ORACLE_BUDGET,
        format!("worst rel {worst:.2e} (<= {ORACLE_REL:e}), {took:.2?} (< {ORACLE_BUDGET:?})"),
    )
}

fn random_tree(rng: &mut Rng, l: usize, k: usize) -> NetworkTopology {
    let mut edges = vec![(0, 0)];
    let (mut bs, mut ue) = (1, 1);
    while bs < l || ue < k {
        if ue == k || (bs < l && rng.next_u64().is_multiple_of(2)) {
            edges.push(((rng.next_u64() % ue as u64) as usize, bs));
            bs += 1;
        } else {
            edges.push((ue, (rng.next_u64() % bs as u64) as usize));
            ue += 1;
        }
    }
    NetworkTopology::from_edges(vec![2; l], vec![2; k], edges).unwrap()
}

fn criterion_2() -> Outcome {
    let cfg = config(
        r#"{"L": 4, "K": 4, "N_l": 2, "M_k": 2, "topology": {"mode": "full"},
            "algorithms": {"run": ["bp"], "iterations": 100, "beta": 0.01}}"#,
    );
    let mut loopy = 0;
    for seed in 0..SEEDS {
        let out = execute(&cfg, seed, None, None, None).unwrap();
        let trace = out.trace(Algorithm::Bp).unwrap();
        if trace.rel_error[BP_ROUNDS - 1] <= BP_REL {
            loopy += 1;
        }
    }
    let reg = Regularization::uniform(1e-2).unwrap();
    let mut trees = 0;
    let mut worst_tree = 0.0f64;
    for seed in 0..SEEDS {
        let mut rng = Rng::new(seed);
        let l = 1 + (rng.next_u64() % 6) as usize;
        let k = 1 + (rng.next_u64() % 6) as usize;
        let topo = random_tree(&mut rng, l, k);
        let ch = synthesize_channel(&topo, &CorrelationPolicy::default(), &mut rng).unwrap();
        let s = draw_symbols(&mut rng, &topo, SymbolKind::Qpsk);
        let oracle = rzfbf_for_channels(&ch, s.stacked(), &reg).unwrap();
        let rounds = topo.diameter().unwrap().max(1);
        let trace = run_experiment(
            Algorithm::Bp,
            &ch,
            &s,
            &reg,
            1e-2,
            rounds,
            Some(&oracle.x),
            &RunOptions::default(),
        )
        .unwrap();
        let err = trace.rel_error[rounds - 1];
        worst_tree = worst_tree.max(err);
        if err <= TREE_REL {
            trees += 1;
        }
    }
    outcome(
        loopy >= BP_MIN_SEEDS && trees == SEEDS,
        format!(
            "full (4,4,2,2): {loopy}/{SEEDS} seeds at rel <= {BP_REL:e} by round {BP_ROUNDS} (need {BP_MIN_SEEDS}); \
             trees: {trees}/{SEEDS} exact, worst {worst_tree:.1e}"
        ),
    )
}

fn criterion_3() -> Outcome {
    let cfg = fig2(r#""amp""#);
    let start = Instant::now();
    let mut ok = 0;
    for seed in 0..SEEDS {
        let out = execute(&cfg, seed, None, None, None).unwrap();
        let trace = out.trace(Algorithm::Amp).unwrap();
        let fin = trace.final_throughput().unwrap();
        if trace.rel_error[ROUNDS - 1] <= AMP_REL
            && (fin - out.oracle_throughput).abs() <= AMP_THROUGHPUT * out.oracle_throughput
        {
            ok += 1;
        }
    }
    let took = start.elapsed();
    outcome(
        ok >= AMP_MIN_SEEDS && took < AMP_BUDGET,
        format!(
            "{ok}/{SEEDS} seeds with rel <= {AMP_REL:e} and throughput within 1% (need {AMP_MIN_SEEDS}), {took:.2?}"
        ),
    )
}

fn criterion_4() -> Outcome {
    let cfg = fig2(r#""amp", "ccoi""#);
    let mut ok = 0;
    let (mut amp_rounds, mut ccoi_rounds) = (Vec::new(), Vec::new());
    for seed in 0..SEEDS {
        let out = execute(&cfg, seed, None, None, None).unwrap();
        let ccoi = out.trace(Algorithm::Ccoi).unwrap();
        let fin = ccoi.final_throughput().unwrap();
        if (fin - out.oracle_throughput).abs() <= CCOI_THROUGHPUT * out.oracle_throughput {
            ok += 1;
        }
        ccoi_rounds.push(rounds_to(ccoi, out.oracle_throughput, 0.01));
        amp_rounds.push(rounds_to(
            out.trace(Algorithm::Amp).unwrap(),
            out.oracle_throughput,
            0.01,
        ));
    }
    let (a, c) = (median(amp_rounds), median(ccoi_rounds));
    outcome(
        ok >= CCOI_MIN_SEEDS && c >= a,
        format!("{ok}/{SEEDS} seeds within 5% (need {CCOI_MIN_SEEDS}); median rounds to 1%: ccoi {c} vs amp {a}"),
    )
}

fn criterion_5() -> Outcome {
    let mut cfg = fig2(r#""amp", "admm""#);
    cfg.algorithms.admm_rho = 1.0;
    let (mut amp_rounds, mut admm_rounds) = (Vec::new(), Vec::new());
    for seed in 0..ADMM_SEEDS {
        let channels = synthesize(&cfg, seed).unwrap();
        let s = symbols(&cfg, seed, &channels);
        let reg = Regularization::uniform(cfg.algorithms.beta).unwrap();
        let oracle = rzfbf_for_channels(&channels, s.stacked(), &reg).unwrap();
        let best = coopbf::harness::avg_throughput(&oracle.x, &channels, s.stacked(), cfg.metric.sigma2).unwrap();
        let options = RunOptions {
            amp: AmpConfig::default(),
            admm_rho: 1.0,
            ..RunOptions::default()
        };
        let amp = run_experiment(
            Algorithm::Amp,
            &channels,
            &s,
            &reg,
            cfg.metric.sigma2,
            ROUNDS,
            None,
            &options,
        )
        .unwrap();
        let admm = run_experiment(
            Algorithm::Admm,
            &channels,
            &s,
            &reg,
            cfg.metric.sigma2,
            ADMM_ROUNDS,
            None,
            &options,
        )
        .unwrap();
        amp_rounds.push(rounds_to(&amp, best, 0.05));
        admm_rounds.push(rounds_to(&admm, best, 0.05));
    }
    let (a, d) = (median(amp_rounds), median(admm_rounds));
    outcome(
        d >= ADMM_FACTOR * a,
        format!("median rounds to 5% on {ADMM_SEEDS} seeds: admm {d} vs amp {a} (need factor {ADMM_FACTOR})"),
    )
}

fn criterion_6() -> Outcome {
    let mut mismatches = Vec::new();
    for (l, k) in [(2u64, 2u64), (4, 4), (16, 16)] {
        let cfg = config(&format!(
            r#"{{"L": {l}, "K": {k}, "N_l": 2, "M_k": 2, "topology": {{"mode": "full"}},
                "algorithms": {{"run": ["bp", "amp"], "iterations": 3}}}}"#
        ));
        let out = execute(&cfg, 0, None, None, None).unwrap();
        for (alg, per_round) in [(Algorithm::Bp, 2 * k * l), (Algorithm::Amp, 2 * (k + l))] {
            let cumulative = &out.trace(alg).unwrap().msgs_originated;
            let mut prev = 0;
            for &c in cumulative {
                if c - prev != per_round {
                    mismatches.push(format!("{alg} at ({l},{k}): {} != {per_round}", c - prev));
                }
                prev = c;
            }
        }
    }
    let detail = if mismatches.is_empty() {
        "BP 2KL and AMP 2(K+L) per round at (2,2), (4,4), (16,16)".to_string()
    } else {
        mismatches.join("; ")
    };
    outcome(mismatches.is_empty(), detail)
}

fn criterion_7() -> Outcome {
    let cfg = fig2(r#""ccoi""#);
    let reg = Regularization::uniform(1e-2).unwrap();
    let mut csi_factorizations = 0;
    let mut identical = true;
    for seed in 0..10 {
        let channels = synthesize(&cfg, seed).unwrap();
        let s = symbols(&cfg, seed, &channels).blocks();
        let statics = ccoi_precompute(channels.topology(), channels.statistics(), &reg, ROUNDS).unwrap();
        let mut state = ccoi_init(channels.topology(), &s);
        for _ in 0..ROUNDS {
            let report = ccoi_round(&mut state, &statics, &channels, &s, &CcoiConfig::default()).unwrap();
            csi_factorizations += report.ops.csi_factorizations + report.ops.statistics_factorizations;
        }
        let other = channels.redraw(&mut Rng::new(1000 + seed));
        let again = ccoi_precompute(other.topology(), other.statistics(), &reg, ROUNDS).unwrap();
        identical &= other.realizations() != channels.realizations()
            && again.to_json().unwrap() == statics.to_json().unwrap()
            && again.key() == statics.key();
    }
    outcome(
        csi_factorizations == 0 && identical,
        format!("{csi_factorizations} factorizations over 10 x {ROUNDS} rounds; statics bit-identical after redraw: {identical}"),
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(8);
    let mut worst = 0.0f64;
    let psd = |rng: &mut Rng, n: usize| {
        let g = complex_gaussian_matrix(rng, n, n, 1.0);
        (&g * &g.adjoint())
            .shift_diagonal(0.1)
            .scale(1.0 / n as f64)
            .hermitian_part()
    };
    for case in 0..10 {
        let (m, n) = (2 + case % 3, 2 + (case / 3) % 3);
        let xbar = complex_gaussian_matrix(&mut rng, m, n, 0.5);
        let (a, b, c, d) = (psd(&mut rng, m), psd(&mut rng, n), psd(&mut rng, n), psd(&mut rng, m));
        let (a_half, b_half) = (principal_sqrt(&a).unwrap(), principal_sqrt(&b).unwrap());
        let mut left = ComplexMatrix::zeros(m, m);
        let mut right = ComplexMatrix::zeros(n, n);
        for _ in 0..MOMENT_DRAWS {
            let w = complex_gaussian_matrix(&mut rng, m, n, 1.0);
            let x = &xbar + &(&(&a_half * &w) * &b_half);
            left.add_assign(&(&(&x * &c) * &x.adjoint()));
            right.add_assign(&(&(&x.adjoint() * &d) * &x));
        }
        let scale = 1.0 / MOMENT_DRAWS as f64;
        let l_err = relative_error(
            &left.scale(scale),
            &gaussian_second_moments(&xbar, &a, &b, &c, QuadraticSide::XCXh).unwrap(),
        );
        let r_err = relative_error(
            &right.scale(scale),
            &gaussian_second_moments(&xbar, &a, &b, &d, QuadraticSide::XhDX).unwrap(),
        );
        worst = worst.max(l_err).max(r_err);
    }
    let took = start.elapsed();
    outcome(
        worst <= MOMENT_REL && took < MOMENT_BUDGET,
        format!("worst rel {worst:.2e} over 10 instances x {MOMENT_DRAWS} draws, {took:.2?}"),
    )
}

fn criterion_9() -> Outcome {
    let cfg = config(
        r#"{"L": 100, "K": 100, "N_l": 8, "M_k": 4,
            "algorithms": {"iterations": 50, "beta": 0.01}, "metric": {"sigma2": 0.01}}"#,
    );
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let out = execute(&cfg, 0, None, None, None).unwrap();
    write_outputs(dir.path(), &out).unwrap();
    let took = start.elapsed();
    let amp = out.trace(Algorithm::Amp).unwrap().final_throughput().unwrap();
    let ratio = amp / out.oracle_throughput;
    let all = Algorithm::ALL
        .iter()
        .all(|&a| out.trace(a).is_some_and(|t| t.len() == 50));
    outcome(
        all && took < LARGE_BUDGET && ratio >= LARGE_AMP_FRACTION,
        format!("all four ran: {all}; {took:.2?}; amp / oracle throughput {ratio:.4}"),
    )
}

fn criterion_10() -> Outcome {
    let cfg = config(r#"{"L": 8, "K": 8, "N_l": 4, "M_k": 2, "algorithms": {"iterations": 20}}"#);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut identical = true;
    for seed in [0, 17, 123] {
        write_outputs(a.path(), &execute(&cfg, seed, None, None, None).unwrap()).unwrap();
        write_outputs(b.path(), &execute(&cfg, seed, None, None, None).unwrap()).unwrap();
        for alg in Algorithm::ALL {
            let file = format!("{alg}.csv");
            identical &= std::fs::read(a.path().join(&file)).unwrap() == std::fs::read(b.path().join(&file)).unwrap();
        }
    }
    outcome(
        identical,
        format!("CSV bytes identical across reruns of 3 seeds: {identical}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Check; 10] = [
        ("oracle identity", criterion_1),
        ("BP convergence", criterion_2),
        ("AMP convergence", criterion_3),
        ("CCoI-aided AMP", criterion_4),
        ("ADMM is slower", criterion_5),
        ("message accounting", criterion_6),
        ("CCoI statics are CSI-free", criterion_7),
        ("Gaussian second moments", criterion_8),
        ("large-scale run", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = check();
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({})",
            i + 1,
            if result.pass { "PASS" } else { "FAIL" },
            name,
            result.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

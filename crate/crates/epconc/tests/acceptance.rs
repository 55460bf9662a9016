//! Acceptance suite: every release-gating property at its pinned
//! tolerance, one test per criterion. Each test prints a PASS line with
//! its runtime (visible under `--nocapture`); the assertions themselves
//! carry the tolerances.

use epconc::analysis::{
    binary_entropy, expected_concentrated_entropy, expected_pairs_given_j, weight_probability,
};
use epconc::circuits::{
    build_cascade_network, build_perm_network, counter_width, PermDirection,
};
use epconc::combinat::{binomial, binomial_expansion, rank, unrank, Rank};
use epconc::oracle::{brute_force_cascade, schmidt_squares, von_neumann_entropy};
use epconc::protocol::{
    enumerate_outcomes, prepare_full, run_protocol, run_trials, Engine, PairParams,
};
use epconc::statevec::{labels, BitString, Role, StateVector};
use num_complex::Complex64;
use num_rational::Ratio;
use rayon::prelude::*;
use std::time::{Duration, Instant};

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn report(name: &str, started: Instant, budget: Option<Duration>) {
    let elapsed = started.elapsed();
    println!("PASS {name} ({elapsed:.2?})");
    if let Some(limit) = budget {
        assert!(
            elapsed <= limit,
            "{name} exceeded its runtime budget: {elapsed:.2?} > {limit:.2?}"
        );
    }
}

#[test]
fn criterion_1_entropy_baseline() {
    let started = Instant::now();
    assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
    for n in 1..=5usize {
        for a2 in [0.1f64, 0.25, 0.5, 0.9] {
            let p = PairParams::new(a2.sqrt(), n).unwrap();
            let state = prepare_full(&p).unwrap();
            let squares = schmidt_squares(&state, &labels(Role::AliceData, n)).unwrap();
            let entropy = von_neumann_entropy(&squares);
            let expect = n as f64 * binary_entropy(a2).unwrap();
            assert!(
                (entropy - expect).abs() <= 1e-9,
                "n={n} alpha2={a2}: entanglement entropy {entropy} vs n*H = {expect}"
            );
        }
    }
    report("entropy baseline", started, Some(Duration::from_secs(1)));
}

#[test]
fn criterion_2_ranking_oracle_equivalence() {
    let started = Instant::now();
    // circuit route equals the recurrence route on every valid rank
    for n in 1..=8usize {
        for j in 0..=n {
            let circuit = build_perm_network(n, j, PermDirection::InverseF).unwrap();
            let order = circuit.all_labels();
            let eval = circuit.classical(&order).unwrap();
            let wn = circuit.register("len").unwrap().len();
            let wj = circuit.register("weight").unwrap().len();
            for y in 0..binomial(n, j).unwrap() {
                let input = (((((y << wn) | n as u64) << wj) | j as u64) << n) | 0;
                let out = eval.apply(input);
                let expect = unrank(Rank(y), n, j).unwrap();
                assert_eq!(
                    out & ((1 << n) - 1),
                    expect.value(),
                    "network disagrees with unrank at n={n} j={j} y={y}"
                );
                assert_eq!(out >> n, 0, "work registers dirty at n={n} j={j} y={y}");
            }
        }
    }
    // rank inverts unrank on the larger grid
    for n in 1..=12usize {
        for j in 0..=n {
            for y in 0..binomial(n, j).unwrap() {
                let s = unrank(Rank(y), n, j).unwrap();
                assert_eq!(rank(&s, j).unwrap(), Rank(y), "n={n} j={j} y={y}");
            }
        }
    }
    report("ranking oracle equivalence", started, Some(Duration::from_secs(10)));
}

#[test]
fn criterion_3_perfect_distillation() {
    let started = Instant::now();
    let failures: Vec<String> = (0..500u64)
        .into_par_iter()
        .flat_map_iter(|seed| {
            let mut bad = Vec::new();
            for a2 in [0.25f64, 0.5, 0.75] {
                for n in 1..=12usize {
                    let p = PairParams::new(a2.sqrt(), n).unwrap();
                    let o = run_protocol(&p, seed, Engine::Mirrored).unwrap();
                    if o.fidelity_vs_ideal < 1.0 - 1e-9 {
                        bad.push(format!("mirrored n={n} a2={a2} seed={seed}"));
                    }
                    if n <= 6 {
                        let o = run_protocol(&p, seed, Engine::Full).unwrap();
                        if o.fidelity_vs_ideal < 1.0 - 1e-9 {
                            bad.push(format!("full n={n} a2={a2} seed={seed}"));
                        }
                    }
                }
            }
            bad
        })
        .collect();
    assert!(failures.is_empty(), "imperfect outputs: {failures:?}");
    report("perfect distillation", started, Some(Duration::from_secs(60)));
}

#[test]
fn criterion_4_conditional_yield_formula() {
    let started = Instant::now();
    for n in 0..=16usize {
        for j in 0..=n {
            let c = binomial(n, j).unwrap();
            let formula = expected_pairs_given_j(n, j).unwrap();
            let enumerated = brute_force_cascade(c).mean();
            assert_eq!(formula, enumerated, "exact means differ at n={n} j={j}");
            if c > 1 {
                let k = binomial_expansion(n, j).unwrap().k;
                assert!(
                    formula >= Ratio::from_integer(k as i128 - 2),
                    "floor-log bound fails at n={n} j={j}: {formula} < {}",
                    k - 2
                );
            }
        }
    }
    report("conditional yield formula", started, Some(Duration::from_secs(5)));
}

#[test]
fn criterion_5_worked_example_three_pairs() {
    let started = Instant::now();
    let alpha = 0.8f64;
    let beta = 0.6f64;
    let p = PairParams::new(alpha, 3).unwrap();
    let state = prepare_full(&p).unwrap();
    // weight-graded coefficients on matched labels, zero elsewhere;
    // the three weight-2 terms are 011, 101, 110
    let mut expected = vec![Complex64::new(0.0, 0.0); 64];
    for (x, coeff) in [
        (0b000u64, alpha * alpha * alpha),
        (0b001, alpha * alpha * beta),
        (0b010, alpha * alpha * beta),
        (0b100, alpha * alpha * beta),
        (0b011, alpha * beta * beta),
        (0b101, alpha * beta * beta),
        (0b110, alpha * beta * beta),
        (0b111, beta * beta * beta),
    ] {
        expected[((x << 3) | x) as usize] = Complex64::new(coeff, 0.0);
    }
    for (idx, want) in expected.iter().enumerate() {
        let got = state.amplitude(idx as u64);
        assert!(
            (got - want).norm() <= 1e-12,
            "amplitude {idx:06b}: {got} vs {want}"
        );
    }
    report("worked example n=3", started, Some(Duration::from_secs(1)));
}

#[test]
fn criterion_6_monte_carlo_agreement() {
    let started = Instant::now();
    let trials = 20_000u64;
    let p = PairParams::new(SQRT_HALF, 3).unwrap();
    let table = run_trials(&p, trials, 7, Engine::Mirrored).unwrap();
    // exact mean 1/2 and exact variance 1/4 by branch enumeration
    let exact_mean = 0.5;
    let se = (0.25f64 / trials as f64).sqrt();
    let got = table.totals.empirical_mean;
    assert!(
        (got - exact_mean).abs() <= 3.0 * se,
        "empirical mean {got} not within 3 standard errors ({se:.5}) of {exact_mean}"
    );
    for j in 0..=3usize {
        let expect = binomial(3, j).unwrap() as f64 / 8.0;
        let freq = table.rows[j].trials as f64 / trials as f64;
        let band = 4.0 * (expect * (1.0 - expect) / trials as f64).sqrt();
        assert!(
            (freq - expect).abs() <= band,
            "weight {j}: frequency {freq} not within {band:.5} of {expect}"
        );
    }
    report("Monte-Carlo agreement", started, Some(Duration::from_secs(30)));
}

#[test]
fn criterion_7_concentrated_entropy_cross_check() {
    let started = Instant::now();
    // independent route: enumerate all strings, bucket by weight, and
    // sum branch probability times log2(branch count)
    let enumeration = |alpha: f64, n: usize| -> f64 {
        let a2 = alpha * alpha;
        let mut counts = vec![0u64; n + 1];
        for x in 0..1u64 << n {
            counts[x.count_ones() as usize] += 1;
        }
        (1..n)
            .map(|j| {
                let p = counts[j] as f64 * a2.powi((n - j) as i32) * (1.0 - a2).powi(j as i32);
                p * (counts[j] as f64).log2()
            })
            .sum()
    };
    let direct = expected_concentrated_entropy(SQRT_HALF, 3).unwrap();
    assert!((direct - enumeration(SQRT_HALF, 3)).abs() <= 1e-9);
    assert!((direct - 1.1887218755408672).abs() <= 1e-9);

    // stays within a logarithmic margin of the ceiling as n grows
    for n in 4..=20usize {
        let value = expected_concentrated_entropy(SQRT_HALF, n).unwrap();
        let ceiling = n as f64 * binary_entropy(0.5).unwrap();
        let floor = ceiling - 2.0 * (n as f64).log2() - 4.0;
        assert!(
            value <= ceiling + 1e-12 && value >= floor,
            "n={n}: {value} outside [{floor}, {ceiling}]"
        );
        if n <= 16 {
            assert!((value - enumeration(SQRT_HALF, n)).abs() <= 1e-9, "n={n}");
        }
    }
    report("concentrated entropy cross-check", started, None);
}

#[test]
fn criterion_8_engine_equivalence() {
    let started = Instant::now();
    for n in 1..=5usize {
        for a2 in [0.25f64, 0.5, 0.75] {
            let p = PairParams::new(a2.sqrt(), n).unwrap();
            let full = enumerate_outcomes(&p, Engine::Full).unwrap();
            let mirrored = enumerate_outcomes(&p, Engine::Mirrored).unwrap();
            assert_eq!(full.len(), mirrored.len(), "branch sets differ at n={n} a2={a2}");
            let mut total = 0.0;
            for (f, m) in full.iter().zip(mirrored.iter()) {
                assert_eq!(
                    (f.j, f.l, f.pairs),
                    (m.j, m.l, m.pairs),
                    "branch labels differ at n={n} a2={a2}"
                );
                assert!(
                    (f.probability - m.probability).abs() <= 1e-10,
                    "branch (j={}, pairs={}) at n={n} a2={a2}: {} vs {}",
                    f.j, f.pairs, f.probability, m.probability
                );
                total += f.probability;
            }
            assert!((total - 1.0).abs() <= 1e-10, "branches of n={n} a2={a2} sum to {total}");
        }
    }
    report("engine equivalence", started, Some(Duration::from_secs(30)));
}

#[test]
fn criterion_9_cascade_pre_measurement_state() {
    let started = Instant::now();
    for n in 1..=8usize {
        for j in 0..=n {
            let e = binomial_expansion(n, j).unwrap();
            let (c, k) = (e.value, e.k);
            let circuit = build_cascade_network(k).specialize("x", &e.bits).unwrap();
            let y_register = circuit.register("y").unwrap().to_vec();
            let flags = circuit.register("t").unwrap().to_vec();
            let counter = circuit.register("m").unwrap().to_vec();
            let wm = counter.len();

            // uniform rank superposition, flags raised, counter at k-1
            let coeff = Complex64::new(1.0 / (c as f64).sqrt(), 0.0);
            let mut amps = vec![Complex64::new(0.0, 0.0); 1 << k];
            for y in 0..c {
                amps[y as usize] = coeff;
            }
            let mut state = StateVector::from_amplitudes(y_register.clone(), amps).unwrap()
                .tensor(
                    &StateVector::basis_state(
                        flags.clone(),
                        &BitString::from_value(k, (1 << k) - 1).unwrap(),
                    )
                    .unwrap(),
                )
                .tensor(
                    &StateVector::basis_state(
                        counter.clone(),
                        &BitString::from_value(wm, k as u64 - 1).unwrap(),
                    )
                    .unwrap(),
                );
            circuit.apply_to_state(&mut state).unwrap();
            // the flags are back to all-ones on every branch; dropping
            // them leaves the displayed rank/counter joint state
            state.discard_fixed_qubits(&flags).unwrap();

            // expected state, built from the block decomposition: for
            // each set bit i, ranks sharing the expansion's leading bits
            // above i and a 0 at i form a block of 2^i with counter i
            let mut expected = vec![Complex64::new(0.0, 0.0); 1 << (k + wm)];
            for i in (0..k).rev() {
                if !e.bit(i) {
                    continue;
                }
                let base: u64 = ((i + 1)..k).filter(|&h| e.bit(h)).map(|h| 1u64 << h).sum();
                for y in base..base + (1 << i) {
                    expected[((y << wm) | i as u64) as usize] = coeff;
                }
            }
            for idx in 0..expected.len() {
                let got = state.amplitude(idx as u64);
                assert!(
                    (got - expected[idx]).norm() <= 1e-10,
                    "n={n} j={j} index {idx:b}: {got} vs {}",
                    expected[idx]
                );
            }
        }
    }
    report("cascade pre-measurement state", started, None);
}

#[test]
fn criterion_extra_weight_probabilities_match() {
    // supporting check used by several criteria: the engine's weight
    // branch probabilities equal the closed form
    let started = Instant::now();
    for n in 1..=5usize {
        let p = PairParams::new(0.62, n).unwrap();
        let branches = enumerate_outcomes(&p, Engine::Mirrored).unwrap();
        for j in 0..=n {
            let measured: f64 = branches.iter().filter(|b| b.j == j).map(|b| b.probability).sum();
            let expect = weight_probability(0.62, n, j).unwrap();
            assert!((measured - expect).abs() <= 1e-10, "n={n} j={j}");
        }
    }
    report("weight probabilities", started, None);
}

#[test]
fn criterion_extra_counter_width_convention() {
    // the counter register is wide enough for k-1 plus headroom
    let started = Instant::now();
    for k in 1..=14usize {
        let circuit = build_cascade_network(k);
        let wm = circuit.register("m").unwrap().len();
        assert_eq!(wm, counter_width(k.saturating_sub(1)) + 1);
        assert!((1usize << wm) > k - 1);
    }
    report("counter width convention", started, None);
}

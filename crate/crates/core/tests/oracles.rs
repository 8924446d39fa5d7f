//! Independent oracles in exact rational arithmetic (and brute-force
//! enumeration) checked against the floating-point implementation.

use gtaccess::bounds::{self, alpha, gamma};
use gtaccess::design::{constraint_residual_fixed, optimal_q};
use gtaccess::engine::{
    comp_decode, shadow_probability_fixed, simulate_probes, ActivitySet, Bits, GtMatrix,
};
use gtaccess::montecarlo::MonteCarlo;
use gtaccess::{ClusterSpec, NetworkConfig, SamplingPlan};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

fn r(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn pow(base: &BigRational, exp: u64) -> BigRational {
    (0..exp).fold(BigRational::one(), |acc, _| acc * base)
}

fn f(x: &BigRational) -> f64 {
    x.to_f64().expect("finite rational")
}

fn assert_rel(got: f64, want: &BigRational, tol: f64) {
    let w = f(want);
    let err = ((got - w) / w).abs();
    assert!(err < tol, "got {got:e}, want {w:e}, rel err {err:e}");
}

/// Fixed config as (n, k, beta numerator, beta denominator).
type FixedRow = (i64, i64, i64, i64);

fn fixed_cfg(rows: &[FixedRow]) -> NetworkConfig {
    NetworkConfig::new(
        rows.iter()
            .enumerate()
            .map(|(i, &(n, k, bn, bd))| {
                ClusterSpec::fixed(i as u32, n as usize, k as usize, bn as f64 / bd as f64)
            })
            .collect(),
    )
    .unwrap()
}

fn exact_q_fixed(rows: &[FixedRow]) -> Vec<BigRational> {
    let mass: BigRational = rows.iter().map(|&(_, k, bn, bd)| r(bn * k, bd)).sum();
    rows.iter()
        .map(|&(_, _, bn, bd)| r(bn, bd) / &mass)
        .collect()
}

fn exact_alpha(rows: &[FixedRow], q: &[BigRational]) -> BigRational {
    rows.iter()
        .zip(q)
        .map(|(&(_, k, _, _), q)| pow(&(BigRational::one() - q), k as u64))
        .product()
}

const FIXED_PAIR: [FixedRow; 2] = [(300, 3, 1, 1), (200, 2, 1, 2)];

#[test]
fn fixed_pair_alpha_is_exact() {
    let q = exact_q_fixed(&FIXED_PAIR);
    let a = exact_alpha(&FIXED_PAIR, &q);
    assert_eq!(a, r(1323, 4096));
    let cfg = fixed_cfg(&FIXED_PAIR);
    let plan = optimal_q(&cfg).unwrap();
    assert_rel(alpha(&plan, &cfg).unwrap(), &a, 1e-14);
}

#[test]
fn fixed_union_and_shadow_match_rationals() {
    let q = exact_q_fixed(&FIXED_PAIR);
    let a = exact_alpha(&FIXED_PAIR, &q);
    let cfg = fixed_cfg(&FIXED_PAIR);
    let plan = optimal_q(&cfg).unwrap();
    for t in [1u64, 10, 50, 200] {
        let shadows: Vec<BigRational> = q
            .iter()
            .map(|qj| pow(&(BigRational::one() - qj * &a), t))
            .collect();
        let union: BigRational = FIXED_PAIR
            .iter()
            .zip(&shadows)
            .map(|(&(n, k, _, _), s)| r(n - k, 1) * s)
            .sum();
        let got = bounds::union_bound_fixed(&plan, &cfg, t).unwrap().value;
        assert_rel(got, &union, 1e-12);
        for (j, s) in shadows.iter().enumerate() {
            assert_rel(
                shadow_probability_fixed(&plan, &cfg, j, t).unwrap(),
                s,
                1e-12,
            );
        }
    }
    // The T = 1 union bound written out by hand.
    let hand = r(297, 1) * (BigRational::one() - r(1323, 16384))
        + r(198, 1) * (BigRational::one() - r(1323, 32768));
    assert_rel(
        bounds::union_bound_fixed(&plan, &cfg, 1).unwrap().value,
        &hand,
        1e-14,
    );
}

#[test]
fn fixed_exp_bound_matches_closed_form() {
    let cfg = fixed_cfg(&FIXED_PAIR);
    let plan = gtaccess::design::optimal_base_scaled(&cfg).unwrap();
    let t = 40u64;
    let mass = 4.0;
    let q = 0.25;
    let want: f64 = [(297.0, 1.0), (198.0, 0.5)]
        .iter()
        .map(|&(m, b)| m * (-(t as f64) * q * b * (-q * mass).exp()).exp())
        .sum();
    let got = bounds::exp_bound_fixed(&plan, &cfg, t).unwrap().value;
    assert!((got - want).abs() / want < 1e-12);
}

#[test]
fn random_gamma_and_union_match_rationals() {
    let cfg = NetworkConfig::new(vec![
        ClusterSpec::random(1, 200, 0.02, 1.0),
        ClusterSpec::random(2, 400, 0.01, 0.5),
    ])
    .unwrap();
    let rows = [(200i64, r(1, 50), r(1, 1)), (400, r(1, 100), r(1, 2))];
    let mass: BigRational = rows.iter().map(|(n, p, b)| r(*n, 1) * p * b).sum();
    assert_eq!(mass, r(6, 1));
    let q: Vec<BigRational> = rows.iter().map(|(_, _, b)| b / &mass).collect();
    assert_eq!(q, vec![r(1, 6), r(1, 12)]);
    let g: BigRational = rows
        .iter()
        .zip(&q)
        .map(|((n, p, _), q)| pow(&(BigRational::one() - p * q), *n as u64))
        .product();
    let plan = optimal_q(&cfg).unwrap();
    assert_rel(gamma(&plan, &cfg).unwrap(), &g, 1e-12);
    for t in [1u64, 2, 5] {
        let union: BigRational = rows
            .iter()
            .zip(&q)
            .map(|((n, p, _), q)| {
                let per = BigRational::one() - q * &g / (BigRational::one() - p * q);
                r(*n, 1) * (BigRational::one() - p) * pow(&per, t)
            })
            .sum();
        assert_rel(
            bounds::union_bound_random(&plan, &cfg, t).unwrap().value,
            &union,
            1e-12,
        );
    }
}

#[test]
fn fixed_residual_sequence_is_exact() {
    let mut previous: Option<BigRational> = None;
    for scale in [1i64, 10, 100] {
        let rows = [
            (300 * scale, 3 * scale, 1, 1),
            (200 * scale, 2 * scale, 1, 2),
        ];
        let q = exact_q_fixed(&rows);
        let lhs: BigRational = rows
            .iter()
            .zip(&q)
            .map(|(&(_, k, _, _), q)| r(k, 1) * q / (BigRational::one() - q))
            .sum();
        let residual = lhs - BigRational::one();
        match scale {
            1 => assert_eq!(residual, r(2, 7)),
            10 => assert_eq!(residual, r(30, 39) + r(20, 79) - BigRational::one()),
            _ => assert_eq!(residual, r(300, 399) + r(200, 799) - BigRational::one()),
        }
        if let Some(prev) = &previous {
            assert!(&residual < prev);
        }
        let cfg = fixed_cfg(&rows);
        let plan = optimal_q(&cfg).unwrap();
        let got = constraint_residual_fixed(&plan, &cfg).unwrap().residual;
        assert_rel(got, &residual, 1e-12);
        previous = Some(residual);
    }
}

/// Exact COMP success probability for a tiny fixed network by enumerating
/// every matrix and every active set.
fn brute_force_success(sizes: &[(usize, usize)], q: &[BigRational], probes: usize) -> BigRational {
    let n: usize = sizes.iter().map(|s| s.0).sum();
    let cluster_of: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(c, s)| std::iter::repeat_n(c, s.0))
        .collect();
    let active_sets: Vec<Vec<usize>> = (0u32..1 << n)
        .filter(|mask| {
            sizes.iter().enumerate().all(|(c, &(_, k))| {
                (0..n)
                    .filter(|&i| cluster_of[i] == c && mask >> i & 1 == 1)
                    .count()
                    == k
            })
        })
        .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).collect())
        .collect();
    let weight_activity = r(1, active_sets.len() as i64);
    let bits = n * probes;
    let mut total = BigRational::zero();
    for m in 0u64..1 << bits {
        let mut weight = BigRational::one();
        let rows: Vec<Bits> = (0..n)
            .map(|i| {
                let row: Vec<bool> = (0..probes)
                    .map(|t| m >> (i * probes + t) & 1 == 1)
                    .collect();
                for &b in &row {
                    let qi = &q[cluster_of[i]];
                    weight *= if b {
                        qi.clone()
                    } else {
                        BigRational::one() - qi
                    };
                }
                Bits::from_bools(&row)
            })
            .collect();
        let matrix = GtMatrix::from_rows(&rows).unwrap();
        let wins = active_sets
            .iter()
            .filter(|a| {
                let act = ActivitySet::new(n, a.to_vec()).unwrap();
                let y = simulate_probes(&matrix, &act).unwrap();
                comp_decode(&matrix, &y).unwrap().estimated_active == act.active()
            })
            .count();
        total += weight * r(wins as i64, 1) * &weight_activity;
    }
    total
}

#[test]
fn monte_carlo_agrees_with_enumeration_on_tiny_network() {
    let sizes = [(3usize, 1usize), (2, 1)];
    let q = vec![r(1, 2), r(1, 4)];
    let probes = 3;
    let exact = brute_force_success(&sizes, &q, probes);
    let cfg = NetworkConfig::new(vec![
        ClusterSpec::fixed(0, 3, 1, 1.0),
        ClusterSpec::fixed(1, 2, 1, 0.5),
    ])
    .unwrap();
    let plan = SamplingPlan::manual(&cfg, vec![0.5, 0.25]).unwrap();

    // The union bound must dominate the exact error probability.
    let union = bounds::union_bound_fixed(&plan, &cfg, probes as u64)
        .unwrap()
        .value;
    assert!(1.0 - f(&exact) <= union + 1e-12);

    let est = MonteCarlo::new(100_000, 11)
        .unwrap()
        .estimate_success(&cfg, &plan, probes as u64)
        .unwrap();
    let p = f(&exact);
    let se = (p * (1.0 - p) / est.trials as f64).sqrt();
    assert!(
        (est.p_hat - p).abs() < 4.0 * se,
        "p_hat {} vs exact {p} (se {se})",
        est.p_hat
    );
}

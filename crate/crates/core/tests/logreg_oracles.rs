mod common;

use common::{central_differences, gradient_descent_oracle, max_relative_error, Problem};
use labelprobe::logreg::{fit_rows, objective_and_gradient, ClassWeighting, ClassWeights, ProbeConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn library_value(problem: &Problem, params: &[f64]) -> (f64, Vec<f64>) {
    let x = problem.matrix();
    let weights = ClassWeights::from_labels(&problem.y, problem.k, problem.weighting).unwrap();
    objective_and_gradient(params, x.view(), &problem.y, &weights, problem.c).unwrap()
}

fn random_params(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn weighting(balanced: bool) -> ClassWeighting {
    if balanced {
        ClassWeighting::Balanced
    } else {
        ClassWeighting::Uniform
    }
}

#[test]
fn gradient_matches_finite_differences_on_small_instance() {
    let problem = Problem::random(11, 5, 4, 3, 1.0, ClassWeighting::Balanced);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let params = random_params(&mut rng, problem.n_params(), 1.0);
    let (_, grad) = library_value(&problem, &params);
    let numeric = central_differences(|p| library_value(&problem, p).0, &params, 1e-6);
    assert!(max_relative_error(&grad, &numeric) <= 1e-5);
}

#[test]
fn value_and_gradient_match_explicit_loops() {
    for (seed, balanced) in [(1, true), (2, false), (3, true)] {
        let problem = Problem::random(seed, 17, 6, 4, 0.5, weighting(balanced));
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let params = random_params(&mut rng, problem.n_params(), 2.0);
        let (value, grad) = library_value(&problem, &params);
        let (expected, expected_grad) = problem.naive(&params);
        assert!((value - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        assert!(max_relative_error(&grad, &expected_grad) <= 1e-12);
    }
}

#[test]
fn fit_matches_gradient_descent_oracle() {
    let problem = Problem::random(7, 60, 8, 3, 10.0, ClassWeighting::Balanced);
    let cfg = ProbeConfig {
        c: problem.c,
        ..ProbeConfig::default()
    };
    let fitted = fit_rows(problem.matrix().view(), &problem.y, &problem.class_names(), &cfg).unwrap();
    let oracle = gradient_descent_oracle(&problem, 1_000_000);
    let rel = (fitted.report.objective - oracle).abs() / oracle.abs();
    assert!(rel <= 1e-6, "fit {} oracle {oracle} rel {rel}", fitted.report.objective);
}

#[test]
fn permuting_rows_leaves_fit_unchanged() {
    let problem = Problem::random(21, 40, 6, 4, 1.0, ClassWeighting::Balanced);
    let mut order: Vec<usize> = (0..problem.y.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let permuted = Problem {
        x: order.iter().map(|&i| problem.x[i].clone()).collect(),
        y: order.iter().map(|&i| problem.y[i]).collect(),
        ..problem.clone()
    };
    let cfg = ProbeConfig {
        c: problem.c,
        grad_tolerance: 1e-9,
        max_iterations: 1000,
        ..ProbeConfig::default()
    };
    let a = fit_rows(problem.matrix().view(), &problem.y, &problem.class_names(), &cfg).unwrap();
    let b = fit_rows(permuted.matrix().view(), &permuted.y, &permuted.class_names(), &cfg).unwrap();
    assert!((a.report.objective - b.report.objective).abs() <= 1e-8);

    let test = Problem::random(22, 200, 6, 4, 1.0, ClassWeighting::Balanced).matrix();
    assert_eq!(
        a.model.predict(test.view()).unwrap(),
        b.model.predict(test.view()).unwrap()
    );
}

#[test]
fn duplicating_a_class_keeps_its_balanced_share() {
    // s_c = N / (K n_c). Doubling n_c halves the per-row weight relative to
    // N, so every class still contributes N/K times its mean loss. The data
    // term therefore scales by exactly N'/N and class shares stay fixed.
    let problem = Problem::random(31, 24, 5, 3, 1.0, ClassWeighting::Balanced);
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let params = random_params(&mut rng, problem.n_params(), 1.0);
    let target = 1;
    let mut doubled = problem.clone();
    for (xi, &yi) in problem.x.iter().zip(&problem.y) {
        if yi == target {
            doubled.x.push(xi.clone());
            doubled.y.push(yi);
        }
    }
    let penalty: f64 = params[..problem.k * problem.d()].iter().map(|w| w * w).sum::<f64>() / (2.0 * problem.c);
    let (before, _) = library_value(&problem, &params);
    let (after, _) = library_value(&doubled, &params);
    let ratio = doubled.y.len() as f64 / problem.y.len() as f64;
    assert!(((after - penalty) - ratio * (before - penalty)).abs() <= 1e-10 * after.abs());

    let class_share = |p: &Problem| {
        let s = p.sample_weights();
        let per_class = |c: usize| -> f64 {
            p.x.iter()
                .zip(&p.y)
                .zip(&s)
                .filter(|((_, &y), _)| y == c)
                .map(|((xi, &y), &w)| {
                    let single = Problem {
                        x: vec![xi.clone()],
                        y: vec![y],
                        c: f64::INFINITY,
                        ..p.clone()
                    };
                    let uniform = Problem {
                        weighting: ClassWeighting::Uniform,
                        ..single
                    };
                    w * uniform.naive(&params).0
                })
                .sum()
        };
        per_class(target) / p.y.len() as f64
    };
    assert!((class_share(&problem) - class_share(&doubled)).abs() <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_finite_differences(
        seed in any::<u64>(),
        n in 1usize..=20,
        d in 1usize..=8,
        k in 2usize..=5,
        c_index in 0usize..3,
        balanced in any::<bool>(),
    ) {
        let n = n.max(k);
        let c = [0.1, 1.0, 10.0][c_index];
        let problem = Problem::random(seed, n, d, k, c, weighting(balanced));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let params = random_params(&mut rng, problem.n_params(), 1.0);
        let (_, grad) = library_value(&problem, &params);
        let numeric = central_differences(|p| library_value(&problem, p).0, &params, 1e-6);
        prop_assert!(max_relative_error(&grad, &numeric) <= 1e-5);
    }

    #[test]
    fn objective_is_midpoint_convex(seed in any::<u64>(), balanced in any::<bool>()) {
        let problem = Problem::random(seed, 15, 5, 3, 1.0, weighting(balanced));
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let a = random_params(&mut rng, problem.n_params(), 3.0);
        let b = random_params(&mut rng, problem.n_params(), 3.0);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let (fa, fb, fm) = (library_value(&problem, &a).0, library_value(&problem, &b).0, library_value(&problem, &mid).0);
        prop_assert!(fm <= 0.5 * (fa + fb) + 1e-10);
    }
}

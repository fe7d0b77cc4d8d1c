//! Minimizer-quality parity: the bounded quasi-Newton solver must match a
//! slow-but-sure projected-gradient-descent oracle and solve separable
//! box-constrained quadratics to clamp-exact optima.

use mlwave_core::optim::{minimize, BoxBounds, MinimizeOptions, ObjectiveEvaluation};
use rand::{Rng, SeedableRng};

fn rosenbrock(x: &[f64]) -> ObjectiveEvaluation {
    let mut value = 0.0;
    let mut gradient = vec![0.0; x.len()];
    for i in 0..x.len() - 1 {
        let a = x[i + 1] - x[i] * x[i];
        let b = 1.0 - x[i];
        value += 100.0 * a * a + b * b;
        gradient[i] += -400.0 * x[i] * a - 2.0 * b;
        gradient[i + 1] += 200.0 * a;
    }
    ObjectiveEvaluation { value, gradient }
}

/// Projected gradient descent with backtracking and step growth; slow but
/// independent of the quasi-Newton path.
fn projected_gradient_descent<F>(
    mut f: F,
    x0: &[f64],
    bounds: &BoxBounds,
    iters: usize,
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> ObjectiveEvaluation,
{
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut cur = f(&x);
    let mut step = 1e-3;
    for _ in 0..iters {
        let mut accepted = false;
        let mut trial_step = step;
        for _ in 0..60 {
            let mut xt: Vec<f64> = x
                .iter()
                .zip(&cur.gradient)
                .map(|(xi, gi)| xi - trial_step * gi)
                .collect();
            bounds.project(&mut xt);
            let et = f(&xt);
            if et.value < cur.value {
                x = xt;
                cur = et;
                step = trial_step * 2.0;
                accepted = true;
                break;
            }
            trial_step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let value = cur.value;
    (x, value)
}

#[test]
fn rosenbrock_in_box_matches_projected_gradient_oracle() {
    let bounds = BoxBounds::symmetric(6, 2.0);
    let x0 = [-1.2, 1.0, -1.2, 1.0, -1.2, 1.0];
    let quasi = minimize(
        rosenbrock,
        &x0,
        &bounds,
        &MinimizeOptions {
            max_iters: 800,
            grad_tol: 1e-10,
            memory: 8,
            ..MinimizeOptions::default()
        },
    )
    .unwrap();
    let (_, oracle_value) = projected_gradient_descent(rosenbrock, &x0, &bounds, 300_000);
    assert!(
        (quasi.value - oracle_value).abs() <= 1e-6,
        "quasi-Newton {} vs oracle {}",
        quasi.value,
        oracle_value
    );
}

#[test]
fn active_bound_quadratics_match_oracle() {
    // non-separable convex quadratic with the optimum outside the box
    let q = |x: &[f64]| {
        // f = sum (x_i - c_i)^2 + 0.5 * sum_{i<j} x_i x_j coupling
        let c = [2.0, -3.0, 1.5, 0.5];
        let mut value = 0.0;
        let mut gradient = vec![0.0; 4];
        for i in 0..4 {
            value += (x[i] - c[i]) * (x[i] - c[i]);
            gradient[i] += 2.0 * (x[i] - c[i]);
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                value += 0.25 * x[i] * x[j];
                gradient[i] += 0.25 * x[j];
                gradient[j] += 0.25 * x[i];
            }
        }
        ObjectiveEvaluation { value, gradient }
    };
    let bounds = BoxBounds::new(vec![-1.0; 4], vec![1.0; 4]).unwrap();
    let quasi = minimize(
        q,
        &[0.0; 4],
        &bounds,
        &MinimizeOptions {
            max_iters: 400,
            grad_tol: 1e-12,
            memory: 8,
            ..MinimizeOptions::default()
        },
    )
    .unwrap();
    let (oracle_x, oracle_value) = projected_gradient_descent(q, &[0.0; 4], &bounds, 200_000);
    assert!((quasi.value - oracle_value).abs() <= 1e-8);
    for (a, b) in quasi.x.iter().zip(&oracle_x) {
        assert!((a - b).abs() < 1e-5, "{:?} vs {:?}", quasi.x, oracle_x);
    }
}

#[test]
fn random_separable_quadratics_clamp_exactly() {
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(55);
    for _ in 0..50 {
        let dim = rng.random_range(2..8);
        let center: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let lower: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..0.0)).collect();
        let upper: Vec<f64> = lower
            .iter()
            .map(|l| l + rng.random_range(0.5..3.0))
            .collect();
        let bounds = BoxBounds::new(lower.clone(), upper.clone()).unwrap();
        let c = center.clone();
        let quad = move |x: &[f64]| ObjectiveEvaluation {
            value: x.iter().zip(&c).map(|(xi, ci)| (xi - ci) * (xi - ci)).sum(),
            gradient: x.iter().zip(&c).map(|(xi, ci)| 2.0 * (xi - ci)).collect(),
        };
        let r = minimize(
            quad,
            &vec![0.0; dim],
            &bounds,
            &MinimizeOptions {
                max_iters: 200,
                grad_tol: 1e-12,
                memory: 8,
                ..MinimizeOptions::default()
            },
        )
        .unwrap();
        for i in 0..dim {
            let expect = center[i].clamp(lower[i], upper[i]);
            assert!(
                (r.x[i] - expect).abs() < 1e-8,
                "component {i}: {} vs clamp {expect}",
                r.x[i]
            );
        }
    }
}

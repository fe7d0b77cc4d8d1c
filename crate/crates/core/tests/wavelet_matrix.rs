//! Pins the lifting transform against its explicit matrix form: applying
//! `forward` to every unit basis shape assembles the dense operator, which
//! must reproduce `forward` on random inputs to near machine precision.

use mlwave_core::geom::Vec3;
use mlwave_core::grid::QuadGridShape;
use mlwave_core::wavelet::{forward_positions, inverse_positions, WaveletLayout};
use rand::{Rng, SeedableRng};

fn dense_forward_matrix(layout: &WaveletLayout) -> Vec<Vec<f64>> {
    let n = layout.coefficient_count();
    let mut matrix = vec![vec![0.0; n]; n];
    for v in 0..n {
        let mut unit = vec![Vec3::ZERO; n];
        unit[v] = Vec3::new(1.0, 0.0, 0.0);
        let coeffs = forward_positions(layout, &unit);
        for (k, c) in coeffs.iter().enumerate() {
            matrix[k][v] = c.x;
        }
    }
    matrix
}

#[test]
fn forward_equals_explicit_matrix_on_random_shapes() {
    let layout = WaveletLayout::new(17, 17, 4).unwrap();
    let n = layout.coefficient_count();
    let matrix = dense_forward_matrix(&layout);
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2024);
    for _ in 0..5 {
        let positions: Vec<Vec3> = (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-50.0..50.0),
                    rng.random_range(-50.0..50.0),
                    rng.random_range(-50.0..50.0),
                )
            })
            .collect();
        let direct = forward_positions(&layout, &positions);
        for k in 0..n {
            let mut expect = Vec3::ZERO;
            for v in 0..n {
                expect += positions[v] * matrix[k][v];
            }
            assert!(
                (direct[k] - expect).max_abs() < 1e-10,
                "coefficient {k} deviates from the matrix form"
            );
        }
    }
}

#[test]
fn inverse_matrix_is_the_exact_inverse() {
    // D^-1 D must be the identity, column by column
    let layout = WaveletLayout::new(9, 9, 3).unwrap();
    let n = layout.coefficient_count();
    for v in 0..n {
        let mut unit = vec![Vec3::ZERO; n];
        unit[v] = Vec3::new(0.0, 1.0, 0.0);
        let back = inverse_positions(&layout, &forward_positions(&layout, &unit));
        for (u, p) in back.iter().enumerate() {
            let expect = if u == v { 1.0 } else { 0.0 };
            assert!((p.y - expect).abs() < 1e-11, "entry ({u},{v})");
        }
    }
}

#[test]
fn forward_of_shape_api_agrees_with_positions_api() {
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
    let positions: Vec<Vec3> = (0..33 * 33)
        .map(|_| {
            Vec3::new(
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
            )
        })
        .collect();
    let shape = QuadGridShape::new(33, 33, 5, positions.clone()).unwrap();
    let via_shape = mlwave_core::wavelet::forward(&shape).unwrap();
    let layout = WaveletLayout::new(33, 33, 5).unwrap();
    let via_positions = forward_positions(&layout, &positions);
    assert_eq!(via_shape.coeffs(), &via_positions[..]);
}

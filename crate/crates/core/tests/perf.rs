//! Runtime linearity of the transform: adding one subdivision level
//! (doubling the grid side) must grow the forward-transform time by a
//! factor near 4 — between 3 and 6 — across consecutive sizes.

use std::time::Instant;

use mlwave_core::geom::Vec3;
use mlwave_core::wavelet::{forward_positions, WaveletLayout};
use rand::{Rng, SeedableRng};

#[test]
fn forward_runtime_grows_linearly_with_vertex_count() {
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
    let mut times = Vec::new();
    for (side, levels) in [(129usize, 7usize), (257, 8), (513, 9)] {
        let layout = WaveletLayout::new(side, side, levels).unwrap();
        let positions: Vec<Vec3> = (0..side * side)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        // warm up, then take the best of several runs
        let mut best = f64::INFINITY;
        let mut sink = 0.0;
        for rep in 0..8 {
            let start = Instant::now();
            let coeffs = forward_positions(&layout, &positions);
            let dt = start.elapsed().as_secs_f64();
            sink += coeffs[0].x;
            if rep > 0 {
                best = best.min(dt);
            }
        }
        assert!(sink.is_finite());
        times.push(best);
    }
    for pair in times.windows(2) {
        let ratio = pair[1] / pair[0];
        assert!(
            (3.0..=6.0).contains(&ratio),
            "doubling the side scaled runtime by {ratio:.2} (times {times:?})"
        );
    }
}

//! Acceptance suite: one test per release criterion, each printing a
//! `ACCEPTANCE <n> ... PASS` line (run with `--nocapture` to see them all).
//! Every tolerance is pinned in code; numbers come from synthetic
//! populations and independent oracles, never from the implementation
//! under test.

use std::time::Instant;

use mlwave_core::fitting::{
    build_correspondences, fit, landmark_energy, smoothing_energy, surface_energy_frozen,
    temporal_energy, track, FitConfig,
};
use mlwave_core::geom::{Mat3, SimilarityTransform, Vec3};
use mlwave_core::grid::QuadGridShape;
use mlwave_core::model::{FitWeights, WaveletShapeModel};
use mlwave_core::optim::{minimize, BoxBounds, MinimizeOptions, ObjectiveEvaluation};
use mlwave_core::scan::TargetScan;
use mlwave_core::spatial::KdTree;
use mlwave_core::synth::{
    default_landmarks, distance_to_data, generate_population, landmarks_from_shape, sample_scan,
    Corruption, ScanOptions, SyntheticPopulationSpec,
};
use mlwave_core::tensor::{hosvd, Mode3Tensor};
use mlwave_core::training::{train, TrainOptions};
use mlwave_core::wavelet::{forward_positions, inverse_positions, WaveletLayout};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn random_positions(n: usize, rng: &mut ChaCha12Rng) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            Vec3::new(
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
            )
        })
        .collect()
}

/// Criterion 1: perfect reconstruction over 100 random grids across sizes
/// {9, 17, 33, 65}^2, max-abs error < 1e-9, under one second of transform
/// time in total.
#[test]
fn acceptance_1_wavelet_perfect_reconstruction() {
    let mut rng = ChaCha12Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut elapsed = 0.0f64;
    for (side, levels) in [(9usize, 3usize), (17, 4), (33, 5), (65, 6)] {
        let layout = WaveletLayout::new(side, side, levels).unwrap();
        for _ in 0..25 {
            let positions = random_positions(side * side, &mut rng);
            let start = Instant::now();
            let coeffs = forward_positions(&layout, &positions);
            let back = inverse_positions(&layout, &coeffs);
            elapsed += start.elapsed().as_secs_f64();
            let err = positions
                .iter()
                .zip(&back)
                .map(|(a, b)| (*a - *b).max_abs())
                .fold(0.0, f64::max);
            worst = worst.max(err);
        }
    }
    assert!(worst < 1e-9, "round-trip error {worst}");
    assert!(elapsed < 1.0, "transforms took {elapsed:.3}s");
    println!(
        "ACCEPTANCE 1 (wavelet perfect reconstruction): PASS — 100 grids, max error {worst:.3e}, {elapsed:.3}s"
    );
}

/// Criterion 2: linearity and explicit-matrix equivalence on 17x17 grids,
/// error < 1e-10.
#[test]
fn acceptance_2_wavelet_linearity_and_matrix() {
    let layout = WaveletLayout::new(17, 17, 4).unwrap();
    let n = layout.coefficient_count();
    // assemble D by transforming unit basis shapes
    let mut matrix = vec![vec![0.0f64; n]; n];
    for v in 0..n {
        let mut unit = vec![Vec3::ZERO; n];
        unit[v] = Vec3::new(1.0, 0.0, 0.0);
        for (k, c) in forward_positions(&layout, &unit).iter().enumerate() {
            matrix[k][v] = c.x;
        }
    }
    let mut rng = ChaCha12Rng::seed_from_u64(102);
    let mut worst_matrix = 0.0f64;
    let mut worst_linear = 0.0f64;
    for _ in 0..5 {
        let x = random_positions(n, &mut rng);
        let y = random_positions(n, &mut rng);
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let fx = forward_positions(&layout, &x);
        let fy = forward_positions(&layout, &y);
        let combo: Vec<Vec3> = x.iter().zip(&y).map(|(&p, &q)| p * a + q * b).collect();
        let fc = forward_positions(&layout, &combo);
        for k in 0..n {
            let mut expect = Vec3::ZERO;
            for v in 0..n {
                expect += x[v] * matrix[k][v];
            }
            worst_matrix = worst_matrix.max((fx[k] - expect).max_abs());
            worst_linear = worst_linear.max((fc[k] - (fx[k] * a + fy[k] * b)).max_abs());
        }
    }
    assert!(worst_matrix < 1e-10, "matrix equivalence error {worst_matrix}");
    assert!(worst_linear < 1e-10, "linearity error {worst_linear}");
    println!(
        "ACCEPTANCE 2 (wavelet linearity + explicit matrix): PASS — matrix {worst_matrix:.3e}, linearity {worst_linear:.3e}"
    );
}

/// Sign convention shared with the implementation: the largest-magnitude
/// entry of each column non-negative.
fn sign_fix(col: &mut [f64]) {
    let mut peak = 0usize;
    for (i, v) in col.iter().enumerate() {
        if v.abs() > col[peak].abs() + 1e-15 {
            peak = i;
        }
    }
    if col[peak] < 0.0 {
        for v in col.iter_mut() {
            *v = -*v;
        }
    }
}

/// Criterion 3: HOSVD equivalence against an independent dense-SVD oracle
/// on 50 random 3x6x5 tensors (±1e-8, sign-normalized) plus the Frobenius
/// truncation bound on every instance.
#[test]
fn acceptance_3_hosvd_oracle_and_bound() {
    let mut worst_factor = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(1000 + seed);
        let t = Mode3Tensor::from_values(
            (3, 6, 5),
            (0..90).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let (m2, m3) = (3usize, 3usize);
        let h = hosvd(&t, m2, m3).unwrap();
        for (mode, factors, sigma) in [
            (2usize, &h.mode2_factors, &h.mode2_singular),
            (3, &h.mode3_factors, &h.mode3_singular),
        ] {
            let unfolding = t.unfold(mode).unwrap();
            let na = nalgebra::DMatrix::from_row_slice(
                unfolding.rows(),
                unfolding.cols(),
                unfolding.data(),
            );
            let svd = na.svd(true, false);
            let u = svd.u.expect("left singular vectors requested");
            for c in 0..factors.cols() {
                let mut oracle: Vec<f64> = (0..u.nrows()).map(|r| u[(r, c)]).collect();
                sign_fix(&mut oracle);
                for (r, ov) in oracle.iter().enumerate() {
                    worst_factor = worst_factor.max((factors[(r, c)] - ov).abs());
                }
            }
            for (i, s) in sigma.iter().enumerate() {
                worst_factor = worst_factor.max((s - svd.singular_values[i]).abs());
            }
        }
        let err = t.sub(&h.reconstruct().unwrap()).unwrap().frobenius_norm();
        let bound: f64 = h.mode2_singular[m2..].iter().map(|s| s * s).sum::<f64>()
            + h.mode3_singular[m3..].iter().map(|s| s * s).sum::<f64>();
        assert!(
            err * err <= bound + 1e-10,
            "seed {seed}: truncation bound violated ({} > {bound})",
            err * err
        );
    }
    assert!(worst_factor < 1e-8, "oracle deviation {worst_factor}");
    println!(
        "ACCEPTANCE 3 (HOSVD oracle + truncation bound): PASS — 50 tensors, worst deviation {worst_factor:.3e}"
    );
}

fn gradient_model(seed: u64) -> WaveletShapeModel {
    let spec = SyntheticPopulationSpec::face_like(seed, 17, 17, 4, 6, 4);
    let ts = generate_population(&spec).unwrap();
    train(&ts, &TrainOptions::default()).unwrap()
}

fn random_weights(model: &WaveletShapeModel, rng: &mut ChaCha12Rng, span: f64) -> FitWeights {
    let mut w = FitWeights::zeros(model.coefficient_count(), model.m2, model.m3);
    for k in 0..model.coefficient_count() {
        for x in w.id_block_mut(k) {
            *x = rng.random_range(-span..span);
        }
        for x in w.expr_block_mut(k) {
            *x = rng.random_range(-span..span);
        }
    }
    w
}

/// Finite-difference check of a weight-space energy over a probe subset:
/// three components among the term's largest gradient entries (so the
/// error scale is the real gradient scale, not round-off on zeros) plus
/// three uniform picks.
fn subset_gradient_error(
    model: &WaveletShapeModel,
    weights: &FitWeights,
    rng: &mut ChaCha12Rng,
    mut term: impl FnMut(&FitWeights) -> (f64, FitWeights),
) -> f64 {
    let n = model.coefficient_count();
    let (_, full_grad) = term(weights);
    let mut ranked: Vec<(usize, bool, usize, f64)> = Vec::new();
    for k in 0..n {
        for (c, g) in full_grad.id_block(k).iter().enumerate() {
            ranked.push((k, true, c, g.abs()));
        }
        for (c, g) in full_grad.expr_block(k).iter().enumerate() {
            ranked.push((k, false, c, g.abs()));
        }
    }
    ranked.sort_by(|a, b| b.3.total_cmp(&a.3));
    // duplicate probes would overwrite each other and fake a zero FD slope
    let mut picks: Vec<(usize, bool, usize)> = Vec::new();
    while picks.len() < 3 {
        let (k, id_side, comp, _) = ranked[rng.random_range(0..50.min(ranked.len()))];
        if !picks.contains(&(k, id_side, comp)) {
            picks.push((k, id_side, comp));
        }
    }
    while picks.len() < 6 {
        let k = rng.random_range(0..n);
        let id_side = rng.random_range(0..2) == 0;
        let comp = rng.random_range(0..if id_side { model.m2 } else { model.m3 });
        if !picks.contains(&(k, id_side, comp)) {
            picks.push((k, id_side, comp));
        }
    }
    let base = weights.clone();
    let assemble = |x: &[f64]| {
        let mut w = base.clone();
        for (&(k, id_side, comp), &v) in picks.iter().zip(x) {
            if id_side {
                w.id_block_mut(k)[comp] = v;
            } else {
                w.expr_block_mut(k)[comp] = v;
            }
        }
        w
    };
    let x0: Vec<f64> = picks
        .iter()
        .map(|&(k, id_side, comp)| {
            if id_side {
                weights.id_block(k)[comp]
            } else {
                weights.expr_block(k)[comp]
            }
        })
        .collect();
    let objective = |x: &[f64]| {
        let w = assemble(x);
        let (value, grad) = term(&w);
        let gradient = picks
            .iter()
            .map(|&(k, id_side, comp)| {
                if id_side {
                    grad.id_block(k)[comp]
                } else {
                    grad.expr_block(k)[comp]
                }
            })
            .collect();
        ObjectiveEvaluation { value, gradient }
    };
    mlwave_core::optim::check_gradient(objective, &x0)
}

/// Criterion 4: analytic gradients of every energy term match central
/// finite differences (20 random states each, relative error < 1e-4), with
/// correspondences and the transform frozen.
#[test]
fn acceptance_4_gradient_suite() {
    let model = gradient_model(41);
    let mut rng = ChaCha12Rng::seed_from_u64(4000);
    let truth = model.mean_shape();
    let landmarks_idx = default_landmarks(17, 17);
    let scan = sample_scan(
        &truth,
        &ScanOptions {
            seed: 5,
            samples_per_cell: 3,
            corruptions: vec![Corruption::Noise { sigma: 0.4 }],
        },
    )
    .unwrap();
    let tree = KdTree::build(scan.points());
    let landmark_pairs: Vec<(usize, Vec3)> = landmarks_idx
        .iter()
        .map(|&v| (v, truth.position(v) + Vec3::new(0.5, -0.2, 0.8)))
        .collect();

    let mut worst = [0.0f64; 4];
    for state in 0..20 {
        let weights = random_weights(&model, &mut rng, 0.5);
        let transform = SimilarityTransform {
            scale: rng.random_range(0.8..1.2),
            rotation: Mat3::rotation_xyz(
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
            ),
            translation: Vec3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            ),
        };
        let anchor: Vec<Vec3> = truth
            .positions()
            .iter()
            .map(|&p| p + Vec3::new(0.3, -0.4, 0.2))
            .collect();
        let corr = build_correspondences(
            &model,
            &weights,
            &transform,
            &scan,
            &tree,
            &landmarks_idx,
            10.0,
        )
        .unwrap();

        let e = subset_gradient_error(&model, &weights, &mut rng, |w| {
            landmark_energy(&model, w, &transform, &landmark_pairs, 1.0).unwrap()
        });
        worst[0] = worst[0].max(e);
        let e = subset_gradient_error(&model, &weights, &mut rng, |w| {
            surface_energy_frozen(&model, w, &transform, &corr).unwrap()
        });
        worst[1] = worst[1].max(e);
        let e = subset_gradient_error(&model, &weights, &mut rng, |w| {
            temporal_energy(&model, w, &anchor, 1.0).unwrap()
        });
        worst[2] = worst[2].max(e);

        // smoothing gradient is with respect to positions
        let shape = model.synthesize_shape(&weights).unwrap();
        let positions = shape.positions().to_vec();
        let picks: Vec<usize> = (0..6).map(|_| rng.random_range(0..positions.len())).collect();
        let x0: Vec<f64> = picks.iter().map(|&v| positions[v].z).collect();
        let smooth_obj = |x: &[f64]| {
            let mut moved = positions.clone();
            for (&v, &z) in picks.iter().zip(x) {
                moved[v].z = z;
            }
            let s = QuadGridShape::new(17, 17, 4, moved).unwrap();
            let (value, grad) = smoothing_energy(&s, 100.0);
            ObjectiveEvaluation {
                value,
                gradient: picks.iter().map(|&v| grad[v].z).collect(),
            }
        };
        let e = mlwave_core::optim::check_gradient(smooth_obj, &x0);
        worst[3] = worst[3].max(e);
        let _ = state;
    }
    for (name, w) in ["landmark", "surface", "temporal", "smoothing"]
        .iter()
        .zip(&worst)
    {
        assert!(*w < 1e-4, "{name} gradient relative error {w}");
    }
    println!(
        "ACCEPTANCE 4 (gradient suite): PASS — worst rel. errors landmark {:.2e}, surface {:.2e}, temporal {:.2e}, smoothing {:.2e}",
        worst[0], worst[1], worst[2], worst[3]
    );
}

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

fn projected_gradient_descent<F>(mut f: F, x0: &[f64], bounds: &BoxBounds, iters: usize) -> f64
where
    F: FnMut(&[f64]) -> ObjectiveEvaluation,
{
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut cur = f(&x);
    let mut step = 1e-3;
    for _ in 0..iters {
        let mut accepted = false;
        let mut trial = step;
        for _ in 0..60 {
            let mut xt: Vec<f64> = x
                .iter()
                .zip(&cur.gradient)
                .map(|(xi, gi)| xi - trial * gi)
                .collect();
            bounds.project(&mut xt);
            let et = f(&xt);
            if et.value < cur.value {
                x = xt;
                cur = et;
                step = trial * 2.0;
                accepted = true;
                break;
            }
            trial *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    cur.value
}

/// Criterion 5: box-constrained quadratics solved to clamp-exact optima
/// (±1e-8) and the 6-D nonconvex test within 1e-6 of the
/// projected-gradient oracle's value.
#[test]
fn acceptance_5_optimizer_parity() {
    let mut rng = ChaCha12Rng::seed_from_u64(505);
    let mut worst_clamp = 0.0f64;
    for _ in 0..20 {
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
            worst_clamp = worst_clamp.max((r.x[i] - expect).abs());
        }
    }
    assert!(worst_clamp < 1e-8, "clamp deviation {worst_clamp}");

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
    let oracle = projected_gradient_descent(rosenbrock, &x0, &bounds, 300_000);
    let gap = (quasi.value - oracle).abs();
    assert!(gap <= 1e-6, "quasi-Newton {} vs oracle {oracle}", quasi.value);
    println!(
        "ACCEPTANCE 5 (optimizer parity): PASS — clamp deviation {worst_clamp:.3e}, Rosenbrock gap {gap:.3e}"
    );
}

/// The acceptance population of criteria 6-8 and 10: a 33x33 template,
/// 10 identities x 5 expressions.
fn acceptance_model(seed: u64) -> (SyntheticPopulationSpec, WaveletShapeModel, f64) {
    let spec = SyntheticPopulationSpec::face_like(seed, 33, 33, 5, 10, 5);
    let ts = generate_population(&spec).unwrap();
    let start = Instant::now();
    let model = train(&ts, &TrainOptions::default()).unwrap();
    (spec, model, start.elapsed().as_secs_f64())
}

/// A held-out scan target: synthesized from fresh weights inside the
/// surface hyper-box, so the round trip must recover it.
fn held_out_shape(model: &WaveletShapeModel, seed: u64) -> (FitWeights, QuadGridShape) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let w = random_weights(model, &mut rng, 0.4);
    let shape = model.synthesize_shape(&w).unwrap();
    (w, shape)
}

fn with_landmarks(scan: TargetScan, truth: &QuadGridShape) -> TargetScan {
    let idx = default_landmarks(truth.rows(), truth.cols());
    scan.with_landmarks(Some(landmarks_from_shape(truth, &idx)))
}

/// Criterion 6: end-to-end synthetic recovery. Train d2=10, d3=5 on a
/// 33x33 grid in under 10 s; a noiseless representable held-out scan fits
/// to mean distance < 0.1 mm; with 0.5 mm noise the median stays < 0.5 mm
/// and more than 90% of vertices land below 1 mm.
#[test]
fn acceptance_6_end_to_end_recovery() {
    let (_, model, train_time) = acceptance_model(61);
    assert!(train_time < 10.0, "training took {train_time:.2}s");
    let (_, truth) = held_out_shape(&model, 62);

    let cfg = FitConfig {
        rho_smooth: 0.0,
        surface_rounds: 2,
        joint_refine: true,
        ..FitConfig::default()
    };

    // noiseless, densely sampled (the nearest-point floor of the
    // distance-to-data metric is about 0.45x the sample spacing, so the
    // 0.1 mm bar needs a fine sampling)
    let clean = with_landmarks(
        sample_scan(
            &truth,
            &ScanOptions {
                seed: 63,
                samples_per_cell: 64,
                corruptions: vec![],
            },
        )
        .unwrap(),
        &truth,
    );
    let result = fit(&model, &clean, &cfg).unwrap();
    let mean: f64 = result.per_vertex_distance.iter().sum::<f64>()
        / result.per_vertex_distance.len() as f64;
    assert!(mean < 0.1, "noiseless mean distance {mean:.4} mm");

    // noisy variant
    let noisy = with_landmarks(
        sample_scan(
            &truth,
            &ScanOptions {
                seed: 64,
                samples_per_cell: 16,
                corruptions: vec![Corruption::Noise { sigma: 0.5 }],
            },
        )
        .unwrap(),
        &truth,
    );
    let result = fit(&model, &noisy, &cfg).unwrap();
    let report = distance_to_data(&result.transformed_shape(), &noisy, None).unwrap();
    assert!(
        report.summary.median < 0.5,
        "noisy median {:.4} mm",
        report.summary.median
    );
    assert!(
        report.summary.fraction_below_1mm > 0.9,
        "only {:.1}% below 1 mm",
        report.summary.fraction_below_1mm * 100.0
    );
    println!(
        "ACCEPTANCE 6 (end-to-end recovery): PASS — train {train_time:.2}s, noiseless mean {mean:.4} mm, noisy median {:.4} mm, {:.1}% < 1 mm",
        report.summary.median,
        report.summary.fraction_below_1mm * 100.0
    );
}

/// Criterion 7: occlusion robustness. A sphere deleting ~30% of the scan
/// points leaves the median distance over unoccluded vertices < 0.7 mm,
/// and every weight stays inside its relaxed lambda=0.5 hyper-box.
#[test]
fn acceptance_7_occlusion_robustness() {
    let (_, model, _) = acceptance_model(71);
    let (_, truth) = held_out_shape(&model, 72);

    // pick a radius covering roughly 30% of the points
    let probe = sample_scan(
        &truth,
        &ScanOptions {
            seed: 73,
            samples_per_cell: 8,
            corruptions: vec![],
        },
    )
    .unwrap();
    let center = truth.position(truth.index(16, 20));
    let mut radius = 30.0;
    let fraction = |radius: f64| {
        probe
            .points()
            .iter()
            .filter(|p| (**p - center).norm() <= radius)
            .count() as f64
            / probe.len() as f64
    };
    for _ in 0..40 {
        let f = fraction(radius);
        if f < 0.28 {
            radius *= 1.06;
        } else if f > 0.32 {
            radius *= 0.95;
        } else {
            break;
        }
    }
    let covered = fraction(radius);
    assert!(
        (0.25..=0.35).contains(&covered),
        "occlusion search failed: {covered}"
    );

    let occluded = with_landmarks(
        sample_scan(
            &truth,
            &ScanOptions {
                seed: 73,
                samples_per_cell: 8,
                corruptions: vec![Corruption::OcclusionSphere { center, radius }],
            },
        )
        .unwrap(),
        &truth,
    );
    let cfg = FitConfig {
        surface_rounds: 2,
        joint_refine: true,
        ..FitConfig::default()
    };
    let result = fit(&model, &occluded, &cfg).unwrap();

    // unoccluded vertices: truth position outside the sphere
    let mask: Vec<u32> = (0..truth.vertex_count() as u32)
        .filter(|&v| (truth.position(v as usize) - center).norm() > radius)
        .collect();
    let report = distance_to_data(&result.transformed_shape(), &occluded, Some(&mask)).unwrap();
    assert!(
        report.summary.median < 0.7,
        "occluded-fit median over unmasked vertices {:.4} mm",
        report.summary.median
    );

    // hyper-box feasibility, with the documented relaxation around the
    // initialization weights
    let lambda = cfg.lambda_surface;
    let mut occluded_coeffs = 0usize;
    for k in 0..model.coefficient_count() {
        let fully_occluded = model.supports[k]
            .iter()
            .all(|(v, _)| (truth.position(v) - center).norm() <= radius);
        if fully_occluded {
            occluded_coeffs += 1;
        }
        for (w, wi) in result
            .weights
            .id_block(k)
            .iter()
            .zip(result.initialization_weights.id_block(k))
            .chain(
                result
                    .weights
                    .expr_block(k)
                    .iter()
                    .zip(result.initialization_weights.expr_block(k)),
            )
        {
            let lo = (-lambda).min(*wi) - 1e-12;
            let hi = lambda.max(*wi) + 1e-12;
            assert!(
                *w >= lo && *w <= hi,
                "coefficient {k}: weight {w} outside [{lo}, {hi}]"
            );
        }
    }
    assert!(occluded_coeffs > 0, "occlusion sphere covered no coefficient support");
    println!(
        "ACCEPTANCE 7 (occlusion robustness): PASS — {:.0}% points removed, median {:.4} mm over {} unmasked vertices, {} fully-occluded coefficients inside their boxes",
        covered * 100.0,
        report.summary.median,
        mask.len(),
        occluded_coeffs
    );
}

/// Criterion 8: tracking. A 20-frame expression interpolation keeps the
/// identity weights bit-identical with mean per-frame vertex error
/// < 0.5 mm, and a constant sequence drifts < 1e-6 mm from frame 1.
#[test]
fn acceptance_8_tracking() {
    let (_, model, _) = acceptance_model(81);
    let mut rng = ChaCha12Rng::seed_from_u64(82);
    let n = model.coefficient_count();

    // fixed identity, interpolated expression
    let id = random_weights(&model, &mut rng, 0.4);
    let expr_a = random_weights(&model, &mut rng, 0.4);
    let expr_b = random_weights(&model, &mut rng, 0.4);
    let frame_weights = |t: f64| {
        let mut w = FitWeights::zeros(n, model.m2, model.m3);
        for k in 0..n {
            w.id_block_mut(k).copy_from_slice(id.id_block(k));
            for (c, (a, b)) in expr_a.expr_block(k).iter().zip(expr_b.expr_block(k)).enumerate() {
                w.expr_block_mut(k)[c] = a + (b - a) * t;
            }
        }
        w
    };

    let frames = 20usize;
    let mut truths = Vec::with_capacity(frames);
    let mut scans = Vec::with_capacity(frames);
    for t in 0..frames {
        let alpha = t as f64 / (frames - 1) as f64;
        let truth = model.synthesize_shape(&frame_weights(alpha)).unwrap();
        let mut scan = sample_scan(
            &truth,
            &ScanOptions {
                seed: 100 + t as u64,
                samples_per_cell: 8,
                corruptions: vec![],
            },
        )
        .unwrap();
        if t == 0 {
            scan = with_landmarks(scan, &truth);
        }
        truths.push(truth);
        scans.push(scan);
    }

    let cfg = FitConfig {
        rho_smooth: 0.0,
        surface_rounds: 2,
        track_rounds: 6,
        ..FitConfig::default()
    };
    let results = track(&model, &scans, &cfg).unwrap();
    assert_eq!(results.len(), frames);

    let mut worst_mean = 0.0f64;
    for (result, truth) in results.iter().zip(&truths) {
        assert_eq!(
            result.weights.id_flat(),
            results[0].weights.id_flat(),
            "identity weights changed across frames"
        );
        let mean: f64 = result
            .fitted_shape
            .positions()
            .iter()
            .zip(truth.positions())
            .map(|(a, b)| (*a - *b).norm())
            .sum::<f64>()
            / truth.vertex_count() as f64;
        worst_mean = worst_mean.max(mean);
    }
    assert!(worst_mean < 0.5, "per-frame mean vertex error {worst_mean:.4} mm");

    // constant sequence: frames 2.. must sit on frame 1
    let constant = vec![scans[0].clone(), scans[0].clone(), scans[0].clone(), scans[0].clone()];
    let still = track(&model, &constant, &cfg).unwrap();
    let reference = still[1].fitted_shape.positions();
    let mut drift = 0.0f64;
    for frame in &still[2..] {
        for (a, b) in frame.fitted_shape.positions().iter().zip(reference) {
            drift = drift.max((*a - *b).max_abs());
        }
    }
    assert!(drift < 1e-6, "constant-sequence drift {drift:.3e} mm");
    println!(
        "ACCEPTANCE 8 (tracking): PASS — 20 frames, worst mean vertex error {worst_mean:.4} mm, identity bit-identical, constant-sequence drift {drift:.3e} mm"
    );
}

/// Criterion 9: scaling. Training time over {50, 100, 200} samples grows
/// by a per-doubling factor inside [1.6, 2.6]; fitting wall time across
/// {17^2, 33^2, 65^2} grids has log-log slope < 1.6.
#[test]
fn acceptance_9_scaling() {
    // training: fixed 65x65 grid, samples 50 -> 100 -> 200; the growth
    // rate per doubling is the geometric mean over the two doublings
    let mut times = Vec::new();
    for (d2, d3) in [(10usize, 5usize), (10, 10), (10, 20)] {
        let spec = SyntheticPopulationSpec::face_like(91, 65, 65, 6, d2, d3);
        let ts = generate_population(&spec).unwrap();
        let mut best = f64::INFINITY;
        for _ in 0..5 {
            let start = Instant::now();
            let model = train(&ts, &TrainOptions::default()).unwrap();
            best = best.min(start.elapsed().as_secs_f64());
            assert!(model.coefficient_count() > 0);
        }
        times.push(best);
    }
    let r1 = times[1] / times[0];
    let r2 = times[2] / times[1];
    let per_doubling = (times[2] / times[0]).sqrt();
    assert!(
        (1.6..=2.6).contains(&per_doubling),
        "training growth {per_doubling:.2} per doubling outside [1.6, 2.6] (ratios [{r1:.2}, {r2:.2}], times {times:?})"
    );

    // fitting: wall time across grid sizes, same scan density per cell
    let mut fit_times = Vec::new();
    let mut sizes = Vec::new();
    for (side, levels) in [(17usize, 4usize), (33, 5), (65, 6)] {
        let spec = SyntheticPopulationSpec::face_like(92, side, side, levels, 6, 4);
        let ts = generate_population(&spec).unwrap();
        let model = train(&ts, &TrainOptions::default()).unwrap();
        let (_, truth) = held_out_shape(&model, 93);
        let scan = with_landmarks(
            sample_scan(
                &truth,
                &ScanOptions {
                    seed: 94,
                    samples_per_cell: 4,
                    corruptions: vec![],
                },
            )
            .unwrap(),
            &truth,
        );
        let start = Instant::now();
        let result = fit(&model, &scan, &FitConfig::default()).unwrap();
        fit_times.push(start.elapsed().as_secs_f64());
        sizes.push((side * side) as f64);
        assert!(!result.per_vertex_distance.is_empty());
    }
    let slope = (fit_times[2] / fit_times[0]).ln() / (sizes[2] / sizes[0]).ln();
    assert!(
        slope < 1.6,
        "fitting time slope {slope:.2} (times {fit_times:?})"
    );
    println!(
        "ACCEPTANCE 9 (scaling): PASS — training growth {per_doubling:.2}x per doubling (step ratios [{r1:.2}, {r2:.2}]), fitting log-log slope {slope:.2}"
    );
}

/// Criterion 10: the smoothing trade-off. On one noisy scan, the rho_S=0
/// run reaches a surface energy no larger than the rho_S=100 run, while
/// the rho_S=100 run's summed bi-Laplacian energy is strictly lower.
#[test]
fn acceptance_10_smoothing_tradeoff() {
    let (_, model, _) = acceptance_model(111);
    let (_, truth) = held_out_shape(&model, 112);
    let scan = with_landmarks(
        sample_scan(
            &truth,
            &ScanOptions {
                seed: 113,
                samples_per_cell: 8,
                corruptions: vec![Corruption::Noise { sigma: 0.5 }],
            },
        )
        .unwrap(),
        &truth,
    );
    let landmarks_idx = default_landmarks(33, 33);
    let tree = KdTree::build(scan.points());

    let mut surface = Vec::new();
    let mut bilap = Vec::new();
    for rho_smooth in [0.0, 100.0] {
        let cfg = FitConfig {
            rho_smooth,
            surface_rounds: 2,
            ..FitConfig::default()
        };
        let result = fit(&model, &scan, &cfg).unwrap();
        let (e_x, _) = mlwave_core::fitting::surface_energy(
            &model,
            &result.weights,
            &result.transform,
            &scan,
            &tree,
            &landmarks_idx,
            cfg.tau,
        )
        .unwrap();
        surface.push(e_x);
        let shape = &result.fitted_shape;
        let total: f64 = (0..shape.vertex_count())
            .map(|v| shape.bi_umbrella(v).norm_squared())
            .sum();
        bilap.push(total);
    }
    assert!(
        surface[0] <= surface[1],
        "rho_S=0 surface energy {} above rho_S=100's {}",
        surface[0],
        surface[1]
    );
    assert!(
        bilap[1] < bilap[0],
        "rho_S=100 bi-Laplacian energy {} not below rho_S=0's {}",
        bilap[1],
        bilap[0]
    );
    println!(
        "ACCEPTANCE 10 (smoothing trade-off): PASS — E_X {:.2} (rho_S=0) <= {:.2} (rho_S=100); bi-Laplacian {:.4} (rho_S=100) < {:.4} (rho_S=0)",
        surface[0], surface[1], bilap[1], bilap[0]
    );
}

//! Cross-module round trips: synthetic population -> training -> synthesis
//! and fitting, plus the transform-invariance and locality contracts.

use mlwave_core::fitting::{fit, FitConfig};
use mlwave_core::geom::{Mat3, SimilarityTransform, Vec3};
use mlwave_core::model::FitWeights;
use mlwave_core::scan::TargetScan;
use mlwave_core::synth::{
    generate_population, landmarks_from_shape, default_landmarks, sample_scan, ScanOptions,
    SyntheticPopulationSpec,
};
use mlwave_core::training::{project_weights, train, ProjectOptions, TrainOptions, TrainingSet};
use rand::{Rng, SeedableRng};

fn trained(seed: u64) -> (TrainingSet, mlwave_core::WaveletShapeModel) {
    let spec = SyntheticPopulationSpec::face_like(seed, 17, 17, 4, 6, 4);
    let ts = generate_population(&spec).unwrap();
    let model = train(&ts, &TrainOptions::default()).unwrap();
    (ts, model)
}

#[test]
fn rank2_population_is_captured_exactly() {
    // per-mode rank-2 amplitudes: every training sample must reconstruct
    // through its own projected weights
    let (ts, model) = trained(41);
    for i in 0..ts.identities() {
        for e in 0..ts.expressions() {
            let sample = ts.shape(i, e);
            let w = project_weights(&model, sample, ProjectOptions::default()).unwrap();
            let rebuilt = model.synthesize_shape(&w).unwrap();
            let err = rebuilt
                .positions()
                .iter()
                .zip(sample.positions())
                .map(|(a, b)| (*a - *b).max_abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "sample ({i},{e}): {err}");
        }
    }
}

#[test]
fn perturbing_one_coefficient_only_moves_its_support() {
    let (_, model) = trained(42);
    let n = model.coefficient_count();
    let base = FitWeights::zeros(n, model.m2, model.m3);
    let base_shape = model.synthesize_shape(&base).unwrap();
    // the finest-level coefficient whose value actually responds to the
    // perturbation (smooth synthetic faces leave many fine-detail cores at
    // zero)
    let layout = model.layout();
    let w2 = [0.0, -0.5, 0.0];
    let w3 = [0.8, 0.0, 0.0];
    let k = (1..=layout.levels())
        .rev()
        .flat_map(|level| layout.level_range(level))
        .find(|&k| {
            let cm = &model.coefficient_models[k];
            let delta = cm.synthesize(&w2, &w3).unwrap() - cm.synthesize(&[0.0; 3], &[0.0; 3]).unwrap();
            delta.max_abs() > 1e-6
        })
        .expect("some detail coefficient responds");
    let mut moved = base.clone();
    moved.id_block_mut(k).copy_from_slice(&w2);
    moved.expr_block_mut(k).copy_from_slice(&w3);
    let moved_shape = model.synthesize_shape(&moved).unwrap();
    let mut in_support = vec![false; n];
    for (v, _) in model.supports[k].iter() {
        in_support[v] = true;
    }
    for (v, covered) in in_support.iter().enumerate() {
        if !covered {
            assert_eq!(
                base_shape.position(v),
                moved_shape.position(v),
                "vertex {v} outside the support moved"
            );
        }
    }
    // and the support itself did move
    assert!(model.supports[k]
        .iter()
        .any(|(v, _)| (base_shape.position(v) - moved_shape.position(v)).max_abs() > 1e-9));
}

#[test]
fn fit_is_invariant_under_rigid_scan_motion() {
    let (_, model) = trained(43);
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(44);
    let n = model.coefficient_count();
    let mut truth_weights = FitWeights::zeros(n, model.m2, model.m3);
    for k in 0..n {
        for x in truth_weights.id_block_mut(k) {
            *x = rng.random_range(-0.35..0.35);
        }
        for x in truth_weights.expr_block_mut(k) {
            *x = rng.random_range(-0.35..0.35);
        }
    }
    let truth = model.synthesize_shape(&truth_weights).unwrap();
    let landmarks = default_landmarks(17, 17);
    let scan = sample_scan(&truth, &ScanOptions::default())
        .unwrap()
        .with_landmarks(Some(landmarks_from_shape(&truth, &landmarks)));

    let motion = SimilarityTransform {
        scale: 1.0,
        rotation: Mat3::rotation_xyz(0.3, -0.2, 0.5),
        translation: Vec3::new(25.0, -10.0, 40.0),
    };
    let moved: TargetScan = scan.transformed(&motion);

    let cfg = FitConfig::default();
    let a = fit(&model, &scan, &cfg).unwrap();
    let b = fit(&model, &moved, &cfg).unwrap();

    let worst = a
        .weights
        .id_flat()
        .iter()
        .zip(b.weights.id_flat())
        .chain(a.weights.expr_flat().iter().zip(b.weights.expr_flat()))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "weights changed under rigid motion: {worst}");

    // the recovered transform composes with the motion
    let composed = motion.compose(&a.transform);
    assert!((composed.scale - b.transform.scale).abs() < 1e-6);
    assert!((composed.translation - b.transform.translation).max_abs() < 1e-4);
}

#[test]
fn large_temporal_weight_shrinks_inter_frame_motion() {
    let (_, model) = trained(46);
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(47);
    let n = model.coefficient_count();
    // two-frame sequence with a genuine expression change
    let mut wa = FitWeights::zeros(n, model.m2, model.m3);
    let mut wb = FitWeights::zeros(n, model.m2, model.m3);
    for k in 0..n {
        for c in 0..model.m2 {
            let v = rng.random_range(-0.3..0.3);
            wa.id_block_mut(k)[c] = v;
            wb.id_block_mut(k)[c] = v;
        }
        for c in 0..model.m3 {
            wa.expr_block_mut(k)[c] = rng.random_range(-0.3..0.3);
            wb.expr_block_mut(k)[c] = rng.random_range(-0.3..0.3);
        }
    }
    let landmarks = default_landmarks(17, 17);
    let frame = |w: &FitWeights, seed: u64, with_lmk: bool| {
        let truth = model.synthesize_shape(w).unwrap();
        let scan = sample_scan(
            &truth,
            &ScanOptions {
                seed,
                samples_per_cell: 4,
                corruptions: vec![],
            },
        )
        .unwrap();
        if with_lmk {
            scan.with_landmarks(Some(landmarks_from_shape(&truth, &landmarks)))
        } else {
            scan
        }
    };
    let frames = vec![frame(&wa, 1, true), frame(&wb, 2, false)];
    let mut displacement = Vec::new();
    for rho_t in [1.0, 1e6] {
        let cfg = FitConfig {
            rho_smooth: 0.0,
            rho_temporal: rho_t,
            track_rounds: 4,
            ..FitConfig::default()
        };
        let results = mlwave_core::fitting::track(&model, &frames, &cfg).unwrap();
        let total: f64 = results[1]
            .fitted_shape
            .positions()
            .iter()
            .zip(results[0].fitted_shape.positions())
            .map(|(a, b)| (*a - *b).norm())
            .sum();
        displacement.push(total);
    }
    assert!(
        displacement[1] < displacement[0],
        "rho_T=1e6 moved {} vs rho_T=1 moved {}",
        displacement[1],
        displacement[0]
    );
    // the huge penalty pins the surface almost completely
    assert!(displacement[1] < 0.01 * displacement[0]);
}

#[test]
fn training_twice_is_bit_identical() {
    let spec = SyntheticPopulationSpec::face_like(45, 17, 17, 4, 5, 4);
    let ts = generate_population(&spec).unwrap();
    let a = train(&ts, &TrainOptions::default()).unwrap();
    let b = train(&ts, &TrainOptions::default()).unwrap();
    assert_eq!(a, b);
}

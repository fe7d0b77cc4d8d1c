//! End-to-end checks of the `mlwave` binary: the full
//! synth -> train -> fit -> eval pipeline, exit-code conventions, and
//! byte-level determinism of every output file.

use std::path::Path;
use std::process::{Command, Output};

fn mlwave() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mlwave"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn mlwave");
    assert!(
        out.status.success(),
        "command failed with {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn help_exits_zero_and_lists_subcommands() {
    let out = mlwave().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["train", "fit", "track", "transform", "synth", "eval"] {
        assert!(text.contains(sub), "help misses {sub}");
    }
}

#[test]
fn missing_required_flag_is_usage_error() {
    let out = mlwave().arg("fit").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = mlwave().args(["synth", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn corrupt_model_file_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.mwm");
    std::fs::write(&model, b"MLWAVMDLgarbage").unwrap();
    let scan = dir.path().join("scan.ply");
    std::fs::write(&scan, b"junk").unwrap();
    let out = mlwave()
        .args(["fit", "--model"])
        .arg(&model)
        .arg("--scan")
        .arg(&scan)
        .arg("--out")
        .arg(dir.path().join("f.obj"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn full_pipeline_with_deterministic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    let pop = base.join("pop");
    let scan = base.join("scan.ply");
    let lmk = base.join("lmk.txt");
    let truth = base.join("truth.obj");
    let mask = base.join("mask.txt");

    run_ok(
        mlwave()
            .args(["synth", "--seed", "5", "--rows", "17", "--cols", "17"])
            .args(["--levels", "4", "--identities", "5", "--expressions", "4"])
            .args(["--noise-sigma", "0.3", "--samples-per-cell", "4"])
            .args(["--occlude", "80,40,10,30", "--scan-seed", "2"])
            .arg("--out-dir")
            .arg(&pop)
            .arg("--scan-out")
            .arg(&scan)
            .arg("--scan-landmarks-out")
            .arg(&lmk)
            .arg("--scan-truth-out")
            .arg(&truth)
            .arg("--mask-out")
            .arg(&mask),
    );
    assert!(pop.join("manifest.txt").exists());
    assert!(pop.join("shape_000_000.obj").exists());

    // train twice with different thread counts: byte-identical models
    let model1 = base.join("model1.mwm");
    let model2 = base.join("model2.mwm");
    run_ok(
        mlwave()
            .args(["train", "--threads", "1", "--input"])
            .arg(pop.join("manifest.txt"))
            .arg("--out")
            .arg(&model1)
            .arg("--landmarks")
            .arg(pop.join("landmarks.txt")),
    );
    run_ok(
        mlwave()
            .args(["train", "--threads", "3", "--input"])
            .arg(pop.join("manifest.txt"))
            .arg("--out")
            .arg(&model2)
            .arg("--landmarks")
            .arg(pop.join("landmarks.txt")),
    );
    assert_eq!(read(&model1), read(&model2), "thread count changed the model file");

    // fit twice: identical outputs
    let fitted1 = base.join("fitted1.obj");
    let fitted2 = base.join("fitted2.obj");
    let report1 = base.join("fit1.csv");
    let report2 = base.join("fit2.csv");
    for (obj, csv) in [(&fitted1, &report1), (&fitted2, &report2)] {
        run_ok(
            mlwave()
                .args(["fit", "--rho-s", "100", "--model"])
                .arg(&model1)
                .arg("--scan")
                .arg(&scan)
                .arg("--landmarks")
                .arg(&lmk)
                .arg("--out")
                .arg(obj)
                .arg("--report")
                .arg(csv),
        );
    }
    assert_eq!(read(&fitted1), read(&fitted2), "fit output not deterministic");
    let norm = |p: &Path| {
        // the report echoes argv paths; normalize them out
        String::from_utf8(read(p))
            .unwrap()
            .replace("fit1", "fitX")
            .replace("fit2", "fitX")
            .replace("fitted1", "fittedX")
            .replace("fitted2", "fittedX")
    };
    assert_eq!(norm(&report1), norm(&report2), "fit report not deterministic");

    // eval with the occlusion mask
    let eval_csv = base.join("report.csv");
    run_ok(
        mlwave()
            .args(["eval", "--fitted"])
            .arg(&fitted1)
            .arg("--scan")
            .arg(&scan)
            .arg("--mask")
            .arg(&mask)
            .arg("--out")
            .arg(&eval_csv),
    );
    let eval_text = String::from_utf8(read(&eval_csv)).unwrap();
    assert!(eval_text.contains("# median_mm = "));
    assert!(eval_text.contains("curve,"));

    // transform dump of a grid OBJ
    let coeffs_csv = base.join("coeffs.csv");
    run_ok(
        mlwave()
            .args(["transform", "--input"])
            .arg(&truth)
            .arg("--out")
            .arg(&coeffs_csv),
    );
    let coeff_lines = String::from_utf8(read(&coeffs_csv))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("k,"))
        .count();
    assert_eq!(coeff_lines, 17 * 17);
}

#[test]
fn tracking_pipeline_writes_frames_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    let pop = base.join("pop");
    let scan = base.join("frame.ply");
    let lmk = base.join("lmk.txt");

    run_ok(
        mlwave()
            .args(["synth", "--seed", "8", "--rows", "9", "--cols", "9"])
            .args(["--levels", "3", "--identities", "4", "--expressions", "3"])
            .args(["--samples-per-cell", "4"])
            .arg("--out-dir")
            .arg(&pop)
            .arg("--scan-out")
            .arg(&scan)
            .arg("--scan-landmarks-out")
            .arg(&lmk),
    );
    let model = base.join("model.mwm");
    run_ok(
        mlwave()
            .args(["train", "--input"])
            .arg(pop.join("manifest.txt"))
            .arg("--out")
            .arg(&model),
    );
    // two identical frames; landmarks only on the first
    let manifest = base.join("frames.txt");
    std::fs::write(&manifest, "frame.ply lmk.txt\nframe.ply\n").unwrap();
    let out_dir = base.join("tracked");
    let report = base.join("track.csv");
    run_ok(
        mlwave()
            .args(["track", "--rho-s", "0", "--track-rounds", "4", "--model"])
            .arg(&model)
            .arg("--frames")
            .arg(&manifest)
            .arg("--out-dir")
            .arg(&out_dir)
            .arg("--report")
            .arg(&report),
    );
    assert!(out_dir.join("frame_0000.obj").exists());
    assert!(out_dir.join("frame_0001.obj").exists());
    let text = String::from_utf8(read(&report)).unwrap();
    assert!(text.contains("frame,final_energy,mean_distance_mm,median_distance_mm"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 3);
}

#[test]
fn config_file_applies_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    let pop = base.join("pop");
    let scan = base.join("scan.ply");
    let lmk = base.join("lmk.txt");
    run_ok(
        mlwave()
            .args(["synth", "--seed", "3", "--rows", "9", "--cols", "9"])
            .args(["--levels", "3", "--identities", "4", "--expressions", "3"])
            .arg("--out-dir")
            .arg(&pop)
            .arg("--scan-out")
            .arg(&scan)
            .arg("--scan-landmarks-out")
            .arg(&lmk),
    );
    let model = base.join("model.mwm");
    run_ok(
        mlwave()
            .args(["train", "--input"])
            .arg(pop.join("manifest.txt"))
            .arg("--out")
            .arg(&model),
    );
    let cfg = base.join("fit.toml");
    std::fs::write(&cfg, "rho_smooth = 0\ntau = 25\n").unwrap();
    let report = base.join("fit.csv");
    run_ok(
        mlwave()
            .args(["fit", "--tau", "15", "--config"])
            .arg(&cfg)
            .arg("--model")
            .arg(&model)
            .arg("--scan")
            .arg(&scan)
            .arg("--landmarks")
            .arg(&lmk)
            .arg("--out")
            .arg(base.join("f.obj"))
            .arg("--report")
            .arg(&report),
    );
    let text = String::from_utf8(read(&report)).unwrap();
    // flag beats config file; config file beats default
    assert!(text.contains("# tau = 15"));
    assert!(text.contains("# rho_smooth = 0"));

    let bad = base.join("bad.toml");
    std::fs::write(&bad, "no_such_key = 1\n").unwrap();
    let out = mlwave()
        .args(["fit", "--config"])
        .arg(&bad)
        .arg("--model")
        .arg(&model)
        .arg("--scan")
        .arg(&scan)
        .arg("--out")
        .arg(base.join("g.obj"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

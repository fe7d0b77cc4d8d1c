//! `mlwave`: train, fit, track, transform, synth, eval.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical
//! failure. Diagnostics go to stderr; machine-readable output goes only to
//! the files named on the command line.

use std::path::PathBuf;
use std::time::Instant;

use clap::{ArgAction, Args, Parser, Subcommand};

use mlwave::error::Error;
use mlwave::{landmark_file, manifest, model_file, obj, parallel, ply, report};
use mlwave_core::fitting::{fit, track, FitConfig, FitWarning};
use mlwave_core::geom::Vec3;
use mlwave_core::optim::MinimizeOptions;
use mlwave_core::scan::TargetScan;
use mlwave_core::synth::{
    default_landmarks, distance_to_data, generate_population, holdout_shape,
    landmarks_from_shape, sample_scan, Corruption, ScanOptions, SyntheticPopulationSpec,
};
use mlwave_core::training::TrainOptions;
use mlwave_core::wavelet;
use report::ConfigEcho;

#[derive(Parser)]
#[command(
    name = "mlwave",
    version,
    about = "Localized multilinear wavelet shape spaces: training, fitting, tracking"
)]
struct Cli {
    /// More stderr diagnostics (-v, -vv).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    /// Suppress non-error diagnostics.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic population (and optionally a corrupted scan).
    Synth(SynthArgs),
    /// Learn a model from a registered identity x expression grid.
    Train(TrainArgs),
    /// Fit a trained model to an oriented point cloud.
    Fit(FitArgs),
    /// Track a motion sequence of point clouds.
    Track(TrackArgs),
    /// Wavelet-transform a grid OBJ and dump the coefficients as CSV.
    Transform(TransformArgs),
    /// Measure distance-to-data of a fitted surface against a scan.
    Eval(EvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for the population (created if missing).
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 33)]
    rows: usize,
    #[arg(long, default_value_t = 33)]
    cols: usize,
    #[arg(long, default_value_t = 5)]
    levels: usize,
    #[arg(long, default_value_t = 10)]
    identities: usize,
    #[arg(long, default_value_t = 5)]
    expressions: usize,
    #[arg(long, default_value_t = 1.0)]
    amplitude_sigma: f64,

    /// Also write a scan sampled from a held-out shape to this path.
    #[arg(long)]
    scan_out: Option<PathBuf>,
    /// Seed for the held-out shape's amplitudes.
    #[arg(long, default_value_t = 9001)]
    holdout_seed: u64,
    /// Amplitude scale of the held-out shape relative to the population.
    #[arg(long, default_value_t = 0.5)]
    holdout_scale: f64,
    /// Sample an existing population cell instead of a held-out shape.
    #[arg(long, value_name = "IDENTITY,EXPRESSION")]
    scan_cell: Option<String>,
    #[arg(long, default_value_t = 0)]
    scan_seed: u64,
    #[arg(long, default_value_t = 2)]
    samples_per_cell: usize,
    /// Gaussian position noise sigma in mm.
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    /// Delete points inside a sphere: cx,cy,cz,radius (mm).
    #[arg(long, value_name = "CX,CY,CZ,R")]
    occlude: Option<String>,
    /// Keep each point with this probability.
    #[arg(long)]
    subsample: Option<f64>,
    /// Landmark file for the scan (from the clean held-out shape).
    #[arg(long)]
    scan_landmarks_out: Option<PathBuf>,
    /// Ground-truth OBJ of the clean held-out shape.
    #[arg(long)]
    scan_truth_out: Option<PathBuf>,
    /// Mask of vertices whose truth position lies outside the occlusion.
    #[arg(long)]
    mask_out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Manifest: one `identity expression path` line per training shape.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    m2: usize,
    #[arg(long, default_value_t = 3)]
    m3: usize,
    /// File with one landmark vertex index per line (stored in the model).
    #[arg(long)]
    landmarks: Option<PathBuf>,
    /// Worker threads (output is identical for any value).
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

/// Energy and schedule knobs shared by `fit` and `track`. Precedence:
/// built-in defaults, then the optional config file, then flags.
#[derive(Args, Clone)]
struct FitFlags {
    /// TOML file with fit settings (flags still win).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rho_l: Option<f64>,
    /// Smoothing weight, typically 0 or 100.
    #[arg(long)]
    rho_s: Option<f64>,
    #[arg(long)]
    rho_t: Option<f64>,
    /// Nearest-neighbor rejection threshold in mm.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    lambda_init: Option<f64>,
    #[arg(long)]
    lambda_surface: Option<f64>,
    #[arg(long)]
    init_passes: Option<usize>,
    #[arg(long)]
    surface_passes: Option<usize>,
    /// Repetitions of the surface schedule.
    #[arg(long)]
    rounds: Option<usize>,
    /// Per-frame surface rounds while tracking.
    #[arg(long)]
    track_rounds: Option<usize>,
    #[arg(long)]
    grad_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Polish with a joint bounded quasi-Newton solve after the
    /// per-coefficient schedule (tracking always does).
    #[arg(long)]
    joint_refine: bool,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    scan: PathBuf,
    /// Landmark file `model_index x y z`; omitting it skips initialization.
    #[arg(long)]
    landmarks: Option<PathBuf>,
    /// Fitted surface OBJ, written in scan coordinates.
    #[arg(long)]
    out: PathBuf,
    /// Fitted surface OBJ in model coordinates (before the similarity).
    #[arg(long)]
    out_model_frame: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    flags: FitFlags,
}

#[derive(Args)]
struct TrackArgs {
    #[arg(long)]
    model: PathBuf,
    /// Manifest: one `scan.ply [landmarks.txt]` line per frame.
    #[arg(long)]
    frames: PathBuf,
    /// Directory for per-frame OBJ output (scan coordinates).
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    flags: FitFlags,
}

#[derive(Args)]
struct TransformArgs {
    /// Quad-grid OBJ with the `# mlwave quadgrid` header.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Fitted surface OBJ (scan coordinates).
    #[arg(long)]
    fitted: PathBuf,
    #[arg(long)]
    scan: PathBuf,
    /// Mask file: one measured (unoccluded) vertex index per line.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

struct Log {
    level: i8, // -1 quiet, 0 normal, 1+ verbose
}

impl Log {
    fn info(&self, msg: impl AsRef<str>) {
        if self.level >= 0 {
            eprintln!("mlwave: {}", msg.as_ref());
        }
    }

    fn debug(&self, msg: impl AsRef<str>) {
        if self.level >= 1 {
            eprintln!("mlwave: {}", msg.as_ref());
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are successes, everything else is usage
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let log = Log {
        level: if cli.quiet { -1 } else { cli.verbose as i8 },
    };
    if let Err(e) = run(cli.command, &log) {
        eprintln!("mlwave: error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(command: Command, log: &Log) -> Result<(), Error> {
    match command {
        Command::Synth(args) => run_synth(args, log),
        Command::Train(args) => run_train(args, log),
        Command::Fit(args) => run_fit(args, log),
        Command::Track(args) => run_track(args, log),
        Command::Transform(args) => run_transform(args, log),
        Command::Eval(args) => run_eval(args, log),
    }
}

fn parse_floats(raw: &str, n: usize, what: &str) -> Result<Vec<f64>, Error> {
    let parts: Result<Vec<f64>, _> = raw.split(',').map(str::trim).map(str::parse).collect();
    match parts {
        Ok(v) if v.len() == n => Ok(v),
        _ => Err(Error::Usage(format!(
            "{what} must be {n} comma-separated numbers, got '{raw}'"
        ))),
    }
}

fn run_synth(args: SynthArgs, log: &Log) -> Result<(), Error> {
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| Error::io(args.out_dir.display().to_string(), e))?;
    let mut spec = SyntheticPopulationSpec::face_like(
        args.seed,
        args.rows,
        args.cols,
        args.levels,
        args.identities,
        args.expressions,
    );
    spec.amplitude_sigma = args.amplitude_sigma;
    wavelet::WaveletLayout::new(args.rows, args.cols, args.levels)?;

    let population = generate_population(&spec)?;
    let mut entries = Vec::new();
    for i in 0..args.identities {
        for e in 0..args.expressions {
            let name = format!("shape_{i:03}_{e:03}.obj");
            obj::write_obj(&args.out_dir.join(&name), population.shape(i, e))?;
            entries.push((i as u64, e as u64, name));
        }
    }
    manifest::write_training_manifest(&args.out_dir.join("manifest.txt"), &entries)?;
    let landmark_vertices = default_landmarks(args.rows, args.cols);
    landmark_file::write_index_list(&args.out_dir.join("landmarks.txt"), &landmark_vertices)?;
    log.info(format!(
        "population: {} shapes ({}x{}) in {}",
        entries.len(),
        args.identities,
        args.expressions,
        args.out_dir.display()
    ));

    if let Some(scan_out) = &args.scan_out {
        let truth = match &args.scan_cell {
            Some(cell) => {
                let v = parse_floats(cell, 2, "--scan-cell")?;
                let (i, e) = (v[0] as usize, v[1] as usize);
                if i >= args.identities || e >= args.expressions {
                    return Err(Error::Usage(format!(
                        "--scan-cell {i},{e} outside the {}x{} population",
                        args.identities, args.expressions
                    )));
                }
                population.shape(i, e).clone()
            }
            None => holdout_shape(&spec, args.holdout_seed, args.holdout_scale),
        };
        let mut corruptions = Vec::new();
        if args.noise_sigma > 0.0 {
            corruptions.push(Corruption::Noise {
                sigma: args.noise_sigma,
            });
        }
        let mut occlusion = None;
        if let Some(raw) = &args.occlude {
            let v = parse_floats(raw, 4, "--occlude")?;
            let center = Vec3::new(v[0], v[1], v[2]);
            occlusion = Some((center, v[3]));
            corruptions.push(Corruption::OcclusionSphere {
                center,
                radius: v[3],
            });
        }
        if let Some(fraction) = args.subsample {
            corruptions.push(Corruption::Subsample { fraction });
        }
        let scan = sample_scan(
            &truth,
            &ScanOptions {
                seed: args.scan_seed,
                samples_per_cell: args.samples_per_cell,
                corruptions,
            },
        )?;
        ply::write_ply(scan_out, &scan)?;
        log.info(format!(
            "scan: {} points in {}",
            scan.len(),
            scan_out.display()
        ));
        if let Some(path) = &args.scan_landmarks_out {
            let set = landmarks_from_shape(&truth, &landmark_vertices);
            landmark_file::write_landmarks(path, &set)?;
        }
        if let Some(path) = &args.scan_truth_out {
            obj::write_obj(path, &truth)?;
        }
        if let Some(path) = &args.mask_out {
            let measured: Vec<usize> = match occlusion {
                Some((center, radius)) => (0..truth.vertex_count())
                    .filter(|&v| (truth.position(v) - center).norm() > radius)
                    .collect(),
                None => (0..truth.vertex_count()).collect(),
            };
            landmark_file::write_index_list(path, &measured)?;
        }
    }
    Ok(())
}

fn run_train(args: TrainArgs, log: &Log) -> Result<(), Error> {
    let started = Instant::now();
    let ts = manifest::read_training_manifest(&args.input)?;
    log.debug(format!(
        "training grid: {} identities x {} expressions",
        ts.identities(),
        ts.expressions()
    ));
    let landmark_indices = match &args.landmarks {
        Some(path) => landmark_file::read_index_list(path)?
            .into_iter()
            .map(|v| v as u32)
            .collect(),
        None => Vec::new(),
    };
    let opts = TrainOptions {
        m2: args.m2,
        m3: args.m3,
        landmark_indices,
    };
    let model = parallel::train_parallel(&ts, &opts, args.threads)?;
    model_file::save_model(&args.out, &model)?;
    log.info(format!(
        "trained {} coefficient models in {:.2}s -> {}",
        model.coefficient_count(),
        started.elapsed().as_secs_f64(),
        args.out.display()
    ));
    Ok(())
}

fn load_fit_config(flags: &FitFlags) -> Result<(FitConfig, ConfigEcho), Error> {
    let mut cfg = FitConfig::default();
    if let Some(path) = &flags.config {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(&p, e))?;
        let table: toml::Table = text
            .parse()
            .map_err(|e| Error::format(&p, format!("invalid TOML: {e}")))?;
        let num = |key: &str| -> Result<Option<f64>, Error> {
            match table.get(key) {
                None => Ok(None),
                Some(v) => v
                    .as_float()
                    .or_else(|| v.as_integer().map(|i| i as f64))
                    .map(Some)
                    .ok_or_else(|| Error::format(&p, format!("key '{key}' must be a number"))),
            }
        };
        let count = |key: &str| -> Result<Option<usize>, Error> {
            match table.get(key) {
                None => Ok(None),
                Some(v) => v
                    .as_integer()
                    .filter(|&i| i >= 0)
                    .map(|i| Some(i as usize))
                    .ok_or_else(|| {
                        Error::format(&p, format!("key '{key}' must be a non-negative integer"))
                    }),
            }
        };
        for key in table.keys() {
            const KNOWN: &[&str] = &[
                "rho_landmark",
                "tau",
                "rho_smooth",
                "lambda_init",
                "lambda_surface",
                "rho_temporal",
                "init_passes",
                "surface_passes",
                "surface_rounds",
                "track_rounds",
                "grad_tol",
                "max_iters",
                "joint_refine",
            ];
            if !KNOWN.contains(&key.as_str()) {
                return Err(Error::format(&p, format!("unknown config key '{key}'")));
            }
        }
        if let Some(v) = num("rho_landmark")? {
            cfg.rho_landmark = v;
        }
        if let Some(v) = num("tau")? {
            cfg.tau = v;
        }
        if let Some(v) = num("rho_smooth")? {
            cfg.rho_smooth = v;
        }
        if let Some(v) = num("lambda_init")? {
            cfg.lambda_init = v;
        }
        if let Some(v) = num("lambda_surface")? {
            cfg.lambda_surface = v;
        }
        if let Some(v) = num("rho_temporal")? {
            cfg.rho_temporal = v;
        }
        if let Some(v) = count("init_passes")? {
            cfg.init_passes = v;
        }
        if let Some(v) = count("surface_passes")? {
            cfg.surface_passes = v;
        }
        if let Some(v) = count("surface_rounds")? {
            cfg.surface_rounds = v;
        }
        if let Some(v) = count("track_rounds")? {
            cfg.track_rounds = v;
        }
        if let Some(v) = num("grad_tol")? {
            cfg.optimizer.grad_tol = v;
        }
        if let Some(v) = count("max_iters")? {
            cfg.optimizer.max_iters = v;
        }
        if let Some(v) = table.get("joint_refine") {
            cfg.joint_refine = v.as_bool().ok_or_else(|| {
                Error::format(&p, "key 'joint_refine' must be a boolean")
            })?;
        }
    }
    // flags override the config file
    if let Some(v) = flags.rho_l {
        cfg.rho_landmark = v;
    }
    if let Some(v) = flags.tau {
        cfg.tau = v;
    }
    if let Some(v) = flags.rho_s {
        cfg.rho_smooth = v;
    }
    if let Some(v) = flags.lambda_init {
        cfg.lambda_init = v;
    }
    if let Some(v) = flags.lambda_surface {
        cfg.lambda_surface = v;
    }
    if let Some(v) = flags.rho_t {
        cfg.rho_temporal = v;
    }
    if let Some(v) = flags.init_passes {
        cfg.init_passes = v;
    }
    if let Some(v) = flags.surface_passes {
        cfg.surface_passes = v;
    }
    if let Some(v) = flags.rounds {
        cfg.surface_rounds = v;
    }
    if let Some(v) = flags.track_rounds {
        cfg.track_rounds = v;
    }
    if let Some(v) = flags.grad_tol {
        cfg.optimizer.grad_tol = v;
    }
    if let Some(v) = flags.max_iters {
        cfg.optimizer = MinimizeOptions {
            max_iters: v,
            ..cfg.optimizer
        };
    }
    if flags.joint_refine {
        cfg.joint_refine = true;
    }
    cfg.validate()?;

    let mut echo = ConfigEcho::default();
    echo.push("rho_landmark", cfg.rho_landmark);
    echo.push("tau", cfg.tau);
    echo.push("rho_smooth", cfg.rho_smooth);
    echo.push("lambda_init", cfg.lambda_init);
    echo.push("lambda_surface", cfg.lambda_surface);
    echo.push("rho_temporal", cfg.rho_temporal);
    echo.push("init_passes", cfg.init_passes);
    echo.push("surface_passes", cfg.surface_passes);
    echo.push("surface_rounds", cfg.surface_rounds);
    echo.push("track_rounds", cfg.track_rounds);
    echo.push("grad_tol", cfg.optimizer.grad_tol);
    echo.push("max_iters", cfg.optimizer.max_iters);
    echo.push("joint_refine", cfg.joint_refine);
    Ok((cfg, echo))
}

fn run_fit(args: FitArgs, log: &Log) -> Result<(), Error> {
    let started = Instant::now();
    let (cfg, mut echo) = load_fit_config(&args.flags)?;
    let model = model_file::load_model(&args.model)?;
    let mut scan = ply::read_ply(&args.scan)?;
    if let Some(path) = &args.landmarks {
        scan = scan.with_landmarks(Some(landmark_file::read_landmarks(path)?));
    }
    echo.push("model", args.model.display());
    echo.push("scan", args.scan.display());

    let result = fit(&model, &scan, &cfg)?;
    for warning in &result.warnings {
        match warning {
            FitWarning::NoLandmarks => {
                log.info("no landmarks given; initialization skipped, transform left as-is")
            }
        }
    }
    obj::write_obj(&args.out, &result.transformed_shape())?;
    if let Some(path) = &args.out_model_frame {
        obj::write_obj(path, &result.fitted_shape)?;
    }
    if let Some(path) = &args.report {
        report::write_fit_report(path, &echo, &result)?;
    }
    let mean: f64 = result.per_vertex_distance.iter().sum::<f64>()
        / result.per_vertex_distance.len().max(1) as f64;
    log.info(format!(
        "fit in {:.2}s, mean distance-to-data {:.4} mm -> {}",
        started.elapsed().as_secs_f64(),
        mean,
        args.out.display()
    ));
    Ok(())
}

fn run_track(args: TrackArgs, log: &Log) -> Result<(), Error> {
    let started = Instant::now();
    let (cfg, mut echo) = load_fit_config(&args.flags)?;
    let model = model_file::load_model(&args.model)?;
    let frames = manifest::read_frames_manifest(&args.frames)?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| Error::io(args.out_dir.display().to_string(), e))?;
    echo.push("model", args.model.display());
    echo.push("frames", frames.len());

    let mut scans: Vec<TargetScan> = Vec::with_capacity(frames.len());
    for frame in &frames {
        let mut scan = ply::read_ply(&frame.scan)?;
        if let Some(path) = &frame.landmarks {
            scan = scan.with_landmarks(Some(landmark_file::read_landmarks(path)?));
        }
        scans.push(scan);
    }
    let results = track(&model, &scans, &cfg)?;
    for (t, result) in results.iter().enumerate() {
        obj::write_obj(
            &args.out_dir.join(format!("frame_{t:04}.obj")),
            &result.transformed_shape(),
        )?;
    }
    if let Some(path) = &args.report {
        report::write_track_report(path, &echo, &results)?;
    }
    log.info(format!(
        "tracked {} frames in {:.2}s -> {}",
        results.len(),
        started.elapsed().as_secs_f64(),
        args.out_dir.display()
    ));
    Ok(())
}

fn run_transform(args: TransformArgs, log: &Log) -> Result<(), Error> {
    let shape = obj::read_obj(&args.input)?;
    let coeffs = wavelet::forward(&shape)?;
    let mut echo = ConfigEcho::default();
    echo.push("input", args.input.display());
    echo.push("rows", shape.rows());
    echo.push("cols", shape.cols());
    echo.push("levels", shape.levels());
    echo.push("ordering", wavelet::ORDERING_TAG);
    report::write_coefficients_csv(&args.out, &echo, &coeffs)?;
    log.info(format!(
        "wrote {} coefficients -> {}",
        coeffs.coeffs().len(),
        args.out.display()
    ));
    Ok(())
}

fn run_eval(args: EvalArgs, log: &Log) -> Result<(), Error> {
    let fitted = obj::read_obj(&args.fitted)?;
    let scan = ply::read_ply(&args.scan)?;
    let mask: Option<Vec<u32>> = match &args.mask {
        Some(path) => Some(
            landmark_file::read_index_list(path)?
                .into_iter()
                .map(|v| v as u32)
                .collect(),
        ),
        None => None,
    };
    let report_data = distance_to_data(&fitted, &scan, mask.as_deref())?;
    let mut echo = ConfigEcho::default();
    echo.push("fitted", args.fitted.display());
    echo.push("scan", args.scan.display());
    echo.push(
        "mask",
        args.mask
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "none".into()),
    );
    report::write_eval_report(&args.out, &echo, &report_data)?;
    log.info(format!(
        "median {:.4} mm, mean {:.4} mm, {:.1}% below 1 mm -> {}",
        report_data.summary.median,
        report_data.summary.mean,
        report_data.summary.fraction_below_1mm * 100.0,
        args.out.display()
    ));
    Ok(())
}

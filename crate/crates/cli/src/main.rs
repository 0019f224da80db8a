use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use coclo::filter::{
    calibrate_contact, calibration_from_toml, calibration_to_toml, ContactCalibration, FilterConfig,
};
use coclo::io::{
    read_sensor_log, read_trajectory, truth_trajectory, write_sensor_log, write_trajectory,
};
use coclo::metrics::{drift_report, report_csv, report_text, DriftReport};
use coclo::model::RobotModel;
use coclo::replay::{default_calibration, replay_frames, run_imu_baseline};
use coclo::sim::{default_duration, simulate, GaitParams, NoiseSpec, TerrainProfile};

#[derive(Parser)]
#[command(name = "coclo", version, about = "Contact-centric leg odometry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a hexapod walk and write its sensor log and truth trajectory.
    Simulate(SimulateArgs),
    /// Run the estimator over a sensor log.
    Replay(ReplayArgs),
    /// Tabulate drift of estimated trajectories against truth.
    Compare(CompareArgs),
    /// Derive per-leg contact-force calibration from a labelled walk.
    CalibrateContact(CalibrateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TerrainArg {
    Flat,
    Ramp,
    Stairs,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "flat")]
    terrain: TerrainArg,
    /// Ramp incline, degrees.
    #[arg(long, default_value_t = 16.35)]
    ramp_angle: f64,
    /// Stair tread depth, m.
    #[arg(long, default_value_t = 0.6)]
    step_width: f64,
    /// Stair riser height, m.
    #[arg(long, default_value_t = 0.15)]
    step_height: f64,
    /// Square perimeter on flat ground, or length of the ramp or stairs, m.
    #[arg(long)]
    extent: Option<f64>,
    /// Body speed, m/s.
    #[arg(long)]
    speed: Option<f64>,
    /// Seconds; defaults to the full path plus one gait cycle.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Disable all sensor noise and impact bursts.
    #[arg(long)]
    noiseless: bool,
    /// Robot model TOML; the bundled hexapod when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out_log: PathBuf,
    #[arg(long)]
    out_truth: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Coclo,
    /// IMU-only dead reckoning.
    Imu,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Filter configuration TOML; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Contact calibration TOML; an equal body-weight share per leg when omitted.
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "coclo")]
    estimator: EstimatorArg,
    #[arg(long)]
    out_trajectory: PathBuf,
    /// Write the drift report as JSON.
    #[arg(long, requires = "truth")]
    out_report: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    truth: PathBuf,
    /// Estimated trajectory CSVs; each row is named after its file stem.
    #[arg(required = true, num_args = 1..)]
    trajectories: Vec<PathBuf>,
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    log: PathBuf,
    /// Truth trajectory whose contact columns label stance (>= 0.5).
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn load_model(path: Option<&Path>) -> Result<RobotModel<f64>> {
    match path {
        Some(p) => RobotModel::load(p).with_context(|| format!("loading model {}", p.display())),
        None => Ok(RobotModel::reference_hexapod()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run_simulate(a: SimulateArgs) -> Result<()> {
    let model = load_model(a.model.as_deref())?;
    let mut terrain = match a.terrain {
        TerrainArg::Flat => TerrainProfile::flat(),
        TerrainArg::Ramp => TerrainProfile::ramp(a.ramp_angle),
        TerrainArg::Stairs => TerrainProfile::stairs(a.step_width, a.step_height),
    };
    if let Some(e) = a.extent {
        terrain.extent = e;
    }
    terrain.validate()?;
    let mut gait = GaitParams::default();
    if let Some(v) = a.speed {
        gait.body_speed = v;
    }
    let noise = if a.noiseless {
        NoiseSpec::zero()
    } else {
        NoiseSpec::default()
    };
    let duration = a
        .duration
        .unwrap_or_else(|| default_duration(&terrain, &gait));
    let trace = simulate(&model, &gait, &terrain, &noise, duration, a.seed)?;
    write_sensor_log(&a.out_log, &trace.frames)?;
    write_trajectory(&a.out_truth, &truth_trajectory(&trace))?;
    log::info!("{} frames over {duration} s", trace.frames.len());
    Ok(())
}

fn run_replay(a: ReplayArgs) -> Result<()> {
    let model = load_model(a.model.as_deref())?;
    let config = match &a.config {
        Some(p) => FilterConfig::load(p)?,
        None => FilterConfig::default(),
    };
    let calib: Vec<ContactCalibration> = match &a.calibration {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            calibration_from_toml(&text)?
        }
        None => default_calibration(&model, &config),
    };
    let frames = read_sensor_log(&a.log).with_context(|| format!("reading {}", a.log.display()))?;
    let truth = a
        .truth
        .as_deref()
        .map(read_trajectory)
        .transpose()
        .context("reading truth")?;
    let (trajectory, report) = match a.estimator {
        EstimatorArg::Coclo => {
            let out = replay_frames(&frames, truth.as_deref(), &model, &calib, &config)?;
            (out.trajectory, out.report)
        }
        EstimatorArg::Imu => {
            let t = run_imu_baseline(&frames, &model, &config)?;
            let r = truth.as_deref().map(|g| drift_report(&t, g)).transpose()?;
            (t, r)
        }
    };
    write_trajectory(&a.out_trajectory, &trajectory)?;
    if let Some(r) = report {
        print!("{}", report_text(&[(stem(&a.log), r)]));
        if let Some(p) = &a.out_report {
            write_text(p, &(serde_json::to_string_pretty(&r)? + "\n"))?;
        }
    }
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

fn run_compare(a: CompareArgs) -> Result<()> {
    let truth =
        read_trajectory(&a.truth).with_context(|| format!("reading {}", a.truth.display()))?;
    let runs = a
        .trajectories
        .iter()
        .map(|p| {
            let t = read_trajectory(p).with_context(|| format!("reading {}", p.display()))?;
            let r: DriftReport =
                drift_report(&t, &truth).with_context(|| p.display().to_string())?;
            Ok((stem(p), r))
        })
        .collect::<Result<Vec<_>>>()?;
    print!("{}", report_text(&runs));
    if let Some(p) = &a.out_csv {
        write_text(p, &report_csv(&runs))?;
    }
    Ok(())
}

fn run_calibrate(a: CalibrateArgs) -> Result<()> {
    let model = load_model(a.model.as_deref())?;
    let frames = read_sensor_log(&a.log).with_context(|| format!("reading {}", a.log.display()))?;
    let truth =
        read_trajectory(&a.truth).with_context(|| format!("reading {}", a.truth.display()))?;
    if truth.len() != frames.len()
        || truth
            .iter()
            .zip(&frames)
            .any(|(t, f)| t.timestamp != f.timestamp)
    {
        bail!("truth rows must match the log frame for frame");
    }
    let labels: Vec<Vec<bool>> = truth
        .iter()
        .map(|t| t.contact.iter().map(|&c| c >= 0.5).collect())
        .collect();
    let calib = calibrate_contact(&model, &frames, &labels)?;
    write_text(&a.out, &calibration_to_toml(&calib))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Replay(a) => run_replay(a),
        Command::Compare(a) => run_compare(a),
        Command::CalibrateContact(a) => run_calibrate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

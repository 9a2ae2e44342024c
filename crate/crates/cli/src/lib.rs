//! Subcommand implementations for the `angvel` binary.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use angvel_core::decomp::MaskMode;
use angvel_core::io;
use angvel_core::model::{self, LineRecord, PointState};
use angvel_core::modelfit::{self, FitConfig, FitResult, ObservedSpectrum};
use angvel_core::pipeline::{self, ProcessOutput, TrackStats};
use angvel_core::scenario::{EstimationMode, Scenario};
use angvel_core::scene::{self, kinematics_at, TargetTrajectory};
use angvel_core::{dsp, Error};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ANGVEL_OUT_DIR";

pub const EXIT_PIPELINE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "angvel", version, about = "Interferometric angular-velocity simulator and estimator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a capture and its ground truth from a scenario.
    Simulate(SimulateArgs),
    /// Run the processing chain on a capture.
    Process(ProcessArgs),
    /// Print the predicted spectral lines at one instant.
    Oracle(OracleArgs),
    /// Fit the line model to one interferometric frame.
    Fit(FitArgs),
    /// Simulate and process in one step and print the statistics.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct Overrides {
    /// known or detected
    #[arg(long)]
    pub mode: Option<EstimationMode>,
    #[arg(long)]
    pub per_antenna_masks: bool,
    #[arg(long)]
    pub mask_width_hz: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub floor_db: Option<f64>,
    #[arg(long)]
    pub smooth_frames: Option<usize>,
    #[arg(long)]
    pub zero_pad: Option<usize>,
}

impl Overrides {
    fn apply(&self, scn: &mut Scenario) -> Result<(), Error> {
        let p = &mut scn.processing;
        if let Some(m) = self.mode {
            p.mode = m;
        }
        if self.per_antenna_masks {
            p.mask_mode = MaskMode::PerAntenna;
        }
        if let Some(v) = self.mask_width_hz {
            p.mask_width_hz = v;
        }
        if let Some(v) = self.floor_db {
            p.floor_db = v;
        }
        if let Some(v) = self.smooth_frames {
            p.smooth_frames = v;
        }
        if let Some(v) = self.zero_pad {
            p.zero_pad = v;
        }
        scn.validate()
    }
}

#[derive(Debug, Args)]
pub struct ProcessArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Capture file; defaults to `<out>/capture.bin`.
    #[arg(long)]
    pub capture: Option<PathBuf>,
    /// Ground-truth CSV; defaults to the scenario's trajectories.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Instant in seconds.
    #[arg(long)]
    pub t: f64,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub capture: PathBuf,
    /// Fit the frame nearest this time.
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub zero_pad: Option<usize>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Map an error chain to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(e) if e.is_input_error() => EXIT_INPUT,
        Some(_) => EXIT_PIPELINE,
        None if err.chain().any(|e| e.is::<clap::Error>()) => EXIT_INPUT,
        None => EXIT_PIPELINE,
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a).map(|_| ()),
        Command::Process(a) => cmd_process(&a).map(|_| ()),
        Command::Oracle(a) => cmd_oracle(&a),
        Command::Fit(a) => cmd_fit(&a).map(|_| ()),
        Command::Eval(a) => cmd_eval(&a),
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, Error> {
    Scenario::load(path)
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })
}

pub struct SimulateOutput {
    pub capture_path: PathBuf,
    pub truth_path: PathBuf,
    pub n_targets: usize,
}

pub fn cmd_simulate(a: &SimulateArgs) -> anyhow::Result<SimulateOutput> {
    let mut scn = load_scenario(&a.scenario)?;
    if let Some(seed) = a.seed {
        scn.waveform.seed = seed;
    }
    simulate_into(&scn, &a.out)
}

fn simulate_into(scn: &Scenario, out: &Path) -> anyhow::Result<SimulateOutput> {
    let sim = pipeline::simulate(scn)?;
    ensure_dir(out)?;
    let capture_path = out.join("capture.bin");
    io::write_capture(&capture_path, &sim.capture, scn.waveform.seed, &scn.hash(), &scn.name)?;
    let truth_path = out.join("truth.csv");
    let f = fs::File::create(&truth_path).map_err(|e| Error::Io {
        path: truth_path.display().to_string(),
        source: e,
    })?;
    scene::write_ground_truth(f, &sim.trajectories)?;
    let resolved = out.join("scenario.resolved.toml");
    fs::write(&resolved, scn.to_toml_string()?).with_context(|| resolved.display().to_string())?;
    log::info!(
        "wrote {} samples, {} targets to {}",
        sim.capture.len(),
        sim.trajectories.len(),
        out.display()
    );
    Ok(SimulateOutput {
        capture_path,
        truth_path,
        n_targets: sim.trajectories.len(),
    })
}

#[derive(Debug, Serialize)]
pub struct StatsReport {
    pub scenario: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub mode: EstimationMode,
    pub mask_mode: MaskMode,
    pub smooth_frames: usize,
    pub floor_db: f64,
    pub n_frames: usize,
    pub tracks: Vec<TrackStats>,
}

fn truth_for(scn: &Scenario, truth: Option<&Path>) -> Result<Vec<TargetTrajectory>, Error> {
    match truth {
        Some(p) => scene::load_ground_truth(p),
        None => scn.trajectories(),
    }
}

pub fn cmd_process(a: &ProcessArgs) -> anyhow::Result<StatsReport> {
    let mut scn = load_scenario(&a.scenario)?;
    a.overrides.apply(&mut scn)?;
    let capture_path = a.capture.clone().unwrap_or_else(|| a.out.join("capture.bin"));
    let (capture, side) = io::read_capture(&capture_path)?;
    let truth = truth_for(&scn, a.truth.as_deref())?;
    let out = pipeline::process(&capture, &scn, &truth)?;
    ensure_dir(&a.out)?;
    let report = StatsReport {
        scenario: scn.name.clone(),
        scenario_hash: side.scenario_hash.clone(),
        seed: side.seed,
        mode: scn.processing.mode,
        mask_mode: scn.processing.mask_mode,
        smooth_frames: scn.processing.smooth_frames,
        floor_db: scn.processing.floor_db,
        n_frames: out.interferometric.n_frames(),
        tracks: out.stats.clone(),
    };
    write_outputs(&a.out, &out, &report)?;
    Ok(report)
}

/// Frequency spans of the CSV exports.
const ANTENNA_CSV_BAND_HZ: f64 = 400.0;
const INTERF_CSV_BAND_HZ: f64 = 20.0;

fn file(dir: &Path, name: &str) -> Result<fs::File, Error> {
    let p = dir.join(name);
    fs::File::create(&p).map_err(|e| Error::Io {
        path: p.display().to_string(),
        source: e,
    })
}

fn write_outputs(dir: &Path, out: &ProcessOutput, report: &StatsReport) -> Result<(), Error> {
    for (i, m) in out.antenna_maps.iter().enumerate() {
        io::write_map_binary(&dir.join(format!("antenna{}_tf.bin", i + 1)), m)?;
        io::write_map_csv(file(dir, &format!("antenna{}_tf.csv", i + 1))?, m, ANTENNA_CSV_BAND_HZ)?;
    }
    io::write_map_binary(&dir.join("interferometric_tf.bin"), &out.interferometric)?;
    io::write_map_csv(file(dir, "interferometric_tf.csv")?, &out.interferometric, INTERF_CSV_BAND_HZ)?;
    for t in &out.decomposed.tracks {
        io::write_map_binary(&dir.join(format!("track{}_response.bin", t.track_id)), &t.map)?;
        io::write_map_csv(
            file(dir, &format!("track{}_response.csv", t.track_id))?,
            &t.map,
            INTERF_CSV_BAND_HZ,
        )?;
    }
    for (r, s) in out.raw.iter().zip(&out.smoothed) {
        r.write_csv(file(dir, &format!("track{}_estimates.csv", r.track_id))?)?;
        s.write_csv(file(dir, &format!("track{}_estimates_smoothed.csv", s.track_id))?)?;
    }
    io::write_association_jsonl(file(dir, "association.jsonl")?, &out.decomposed.association)?;
    io::write_json(&dir.join("stats.json"), report)
}

#[derive(Debug, Serialize)]
struct OracleReport {
    t_s: f64,
    approximation_degraded: bool,
    full: Vec<LineRecord>,
    decomposed: Vec<LineRecord>,
}

pub fn cmd_oracle(a: &OracleArgs) -> anyhow::Result<()> {
    let scn = load_scenario(&a.scenario)?;
    let text = oracle_json(&scn, a.t)?;
    match &a.out {
        Some(p) => fs::write(p, text).with_context(|| p.display().to_string())?,
        None => println!("{text}"),
    }
    Ok(())
}

/// Full and decomposed line lists at `t` as pretty JSON.
pub fn oracle_json(scn: &Scenario, t: f64) -> Result<String, Error> {
    let geom = scn.geometry()?;
    let (t0, t1) = scn.span();
    if !(t >= t0 && t <= t1) {
        return Err(Error::Range(format!("t = {t} s outside scenario span [{t0}, {t1}] s")));
    }
    let points = scn
        .trajectories()?
        .iter()
        .map(|tr| {
            let k = kinematics_at(&tr.smoothed(scn.processing.truth_smoothing), &geom, t)?;
            Ok(PointState::from_kinematics(&k, tr.amplitude))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let pattern = scn.antenna.pattern();
    let full = model::full_response_lines(&points, &geom, &pattern)?;
    let dec = model::decomposed_response_lines(&points, &geom, &pattern)?;
    let report = OracleReport {
        t_s: t,
        approximation_degraded: full.approximation_degraded,
        full: full.to_records(),
        decomposed: dec.to_records(),
    };
    Ok(serde_json::to_string_pretty(&report)?)
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub frame_time_s: f64,
    pub truth: Vec<modelfit::FitParams>,
    pub fit: FitResult,
}

pub fn cmd_fit(a: &FitArgs) -> anyhow::Result<FitReport> {
    let scn = load_scenario(&a.scenario)?;
    let (capture, _) = io::read_capture(&a.capture)?;
    let p = &scn.processing;
    let filtered = dsp::highpass(&capture, p.highpass_order, p.highpass_cutoff_hz, p.highpass_zero_phase)?;
    let map = dsp::interferometric_stft(&filtered, &p.stft(), a.zero_pad.unwrap_or(p.zero_pad))?;
    let frame = map
        .frame_times_s
        .iter()
        .enumerate()
        .min_by(|x, y| (x.1 - a.t).abs().total_cmp(&(y.1 - a.t).abs()))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Validation("capture has no frames".into()))?;
    let obs = ObservedSpectrum::from_frame(&map, frame)?;
    let geom = scn.geometry()?;
    let trajs = scn.trajectories()?;
    let t = map.frame_times_s[frame];
    let truth = trajs
        .iter()
        .map(|tr| {
            let k = kinematics_at(tr, &geom, t)?;
            Ok(modelfit::FitParams {
                v_radial_mps: 0.5 * (k.v_radial_mps[0] + k.v_radial_mps[1]),
                omega_radps: k.omega_center(),
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let fit = modelfit::fit(&obs, trajs.len(), &geom, &FitConfig::default())?;
    let report = FitReport {
        frame_time_s: t,
        truth,
        fit,
    };
    ensure_dir(&a.out)?;
    io::write_json(&a.out.join("fit.json"), &report)?;
    Ok(report)
}

pub fn cmd_eval(a: &EvalArgs) -> anyhow::Result<()> {
    let mut scn = load_scenario(&a.scenario)?;
    if let Some(seed) = a.seed {
        scn.waveform.seed = seed;
    }
    a.overrides.apply(&mut scn)?;
    let sim = simulate_into(&scn, &a.out)?;
    // Process what was written, so eval matches simulate + process exactly.
    let resolved = a.out.join("scenario.resolved.toml");
    let report = cmd_process(&ProcessArgs {
        scenario: resolved,
        capture: Some(sim.capture_path),
        truth: None,
        out: a.out.clone(),
        overrides: Overrides {
            mode: None,
            per_antenna_masks: false,
            mask_width_hz: None,
            floor_db: None,
            smooth_frames: None,
            zero_pad: None,
        },
    })?;
    print_stats(&report);
    Ok(())
}

pub fn print_stats(r: &StatsReport) {
    println!(
        "{} ({:?} mode, {} frames, smoothing {})",
        r.scenario, r.mode, r.n_frames, r.smooth_frames
    );
    println!(
        "{:>6} {:>7} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "track", "target", "mu", "mu_hat", "std", "std_raw", "valid"
    );
    for t in &r.tracks {
        let target = t.target_id.map_or("-".to_string(), |v| v.to_string());
        match (t.smoothed, t.raw) {
            (Some(s), Some(raw)) => println!(
                "{:>6} {:>7} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10}",
                t.track_id, target, s.mu_true_radps, s.mu_est_radps, s.std_radps, raw.std_radps, s.n_valid_frames
            ),
            _ => println!("{:>6} {:>7} {:>10}", t.track_id, target, "no valid frames"),
        }
    }
}

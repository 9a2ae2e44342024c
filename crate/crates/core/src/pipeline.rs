//! End-to-end orchestration: scenario → capture, and capture → estimates.

use serde::{Deserialize, Serialize};

use crate::decomp::{self, DecomposedResponse, DopplerTrack, FrequencyMode};
use crate::dsp::{self, TimeFrequencyMap};
use crate::error::{Error, Result};
use crate::estimate::{self, EstimateSeries, EstimateStats, TruthSeries};
use crate::scenario::{EstimationMode, Scenario};
use crate::scene::{kinematics_at, ArrayGeometry, TargetTrajectory};
use crate::synth::{self, IqCapture};

#[derive(Debug, Clone)]
pub struct Simulation {
    pub capture: IqCapture,
    pub trajectories: Vec<TargetTrajectory>,
}

pub fn simulate(scn: &Scenario) -> Result<Simulation> {
    let geom = scn.geometry().map_err(|e| e.in_stage("geometry"))?;
    let trajectories = scn.trajectories().map_err(|e| e.in_stage("trajectories"))?;
    let capture = synth::synthesize(&geom, &trajectories, &scn.waveform(), &scn.antenna.pattern())
        .map_err(|e| e.in_stage("synthesis"))?;
    Ok(Simulation {
        capture,
        trajectories,
    })
}

/// Per-target ground truth sampled at frame times.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTruth {
    pub target_id: u32,
    pub doppler: DopplerTrack,
    pub omega: TruthSeries,
    /// Bearing about the array midpoint.
    pub theta_rad: Vec<f64>,
}

/// Kinematics of every trajectory (after `smoothing`-point pre-smoothing) at
/// the given times; times outside a trajectory's span are dropped.
pub fn frame_truth(
    trajectories: &[TargetTrajectory],
    geom: &ArrayGeometry,
    times: &[f64],
    smoothing: usize,
) -> Result<Vec<FrameTruth>> {
    trajectories
        .iter()
        .map(|tr| {
            let sm = tr.smoothed(smoothing);
            let (a, b) = sm.span();
            let mut ts = Vec::new();
            let mut dop = Vec::new();
            let mut om = Vec::new();
            let mut th = Vec::new();
            for &t in times.iter().filter(|&&t| t >= a && t <= b) {
                let k = kinematics_at(&sm, geom, t)?;
                ts.push(t);
                dop.push([k.doppler_hz(0, geom), k.doppler_hz(1, geom)]);
                om.push(k.omega_center());
                th.push(0.5 * (k.theta_rad[0] + k.theta_rad[1]));
            }
            Ok(FrameTruth {
                target_id: tr.target_id,
                doppler: DopplerTrack {
                    times_s: ts.clone(),
                    doppler_hz: dop,
                },
                omega: TruthSeries {
                    times_s: ts,
                    omega_radps: om,
                },
                theta_rad: th,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackStats {
    pub track_id: usize,
    pub target_id: Option<u32>,
    pub n_frames: usize,
    pub raw: Option<EstimateStats>,
    pub smoothed: Option<EstimateStats>,
}

#[derive(Debug, Clone)]
pub struct ProcessOutput {
    pub filtered: IqCapture,
    pub antenna_maps: [TimeFrequencyMap; 2],
    pub interferometric: TimeFrequencyMap,
    pub decomposed: DecomposedResponse,
    pub raw: Vec<EstimateSeries>,
    pub smoothed: Vec<EstimateSeries>,
    pub stats: Vec<TrackStats>,
    pub truth: Vec<FrameTruth>,
}

/// Run the processing chain on a capture. `truth` supplies the trajectories
/// used for known-frequency masks and for statistics; the number of tracks
/// equals the number of trajectories.
pub fn process(capture: &IqCapture, scn: &Scenario, truth: &[TargetTrajectory]) -> Result<ProcessOutput> {
    let p = &scn.processing;
    p.validate()?;
    let geom = scn.geometry()?;
    let n_targets = truth.len();

    let filtered = dsp::highpass(capture, p.highpass_order, p.highpass_cutoff_hz, p.highpass_zero_phase)
        .map_err(|e| e.in_stage("highpass"))?;
    let stft_cfg = p.stft();
    let (tf1, tf2) = dsp::antenna_stfts(&filtered, &stft_cfg).map_err(|e| e.in_stage("stft"))?;
    if tf1.n_frames() == 0 {
        return Err(Error::validation(format!(
            "capture of {} samples is shorter than one {}-sample frame",
            capture.len(),
            stft_cfg.window_len
        ))
        .in_stage("stft"));
    }
    let interferometric =
        dsp::interferometric_stft(&filtered, &stft_cfg, p.zero_pad).map_err(|e| e.in_stage("interferometric"))?;

    let frame_truths = frame_truth(truth, &geom, &tf1.frame_times_s, p.truth_smoothing)
        .map_err(|e| e.in_stage("ground truth"))?;
    let mode = match p.mode {
        EstimationMode::Known => FrequencyMode::Known(frame_truths.iter().map(|t| t.doppler.clone()).collect()),
        EstimationMode::Detected => FrequencyMode::Detected,
    };
    let decomposed = decomp::decompose_maps(&tf1, &tf2, &p.decompose_config(), n_targets, &mode)
        .map_err(|e| e.in_stage("decomposition"))?;

    // Track-to-target labels: identity when masks came from truth, GNN on
    // mean Doppler otherwise.
    let labels: Vec<Option<usize>> = match p.mode {
        EstimationMode::Known => (0..n_targets).map(Some).collect(),
        EstimationMode::Detected => match_tracks(&decomposed, &frame_truths),
    };

    let mut raw = Vec::with_capacity(n_targets);
    let mut smoothed = Vec::with_capacity(n_targets);
    let mut stats = Vec::with_capacity(n_targets);
    for (track, label) in decomposed.tracks.iter().zip(&labels) {
        let peaks = estimate::peak_track(&track.map, p.floor_db, Some(&track.valid), track.track_id);
        let series = match (p.full_angle, label) {
            (true, Some(t)) => {
                let ft = &frame_truths[*t];
                let theta = TruthSeries {
                    times_s: ft.omega.times_s.clone(),
                    omega_radps: ft.theta_rad.clone(),
                };
                estimate::to_omega_with_angle(&peaks, &geom, |t| theta.at(t))
            }
            _ => estimate::to_omega(&peaks, &geom),
        };
        let sm = estimate::smooth(&series, p.smooth_frames)?;
        let (r, s) = match label {
            Some(t) => (
                estimate::stats(&series, &frame_truths[*t].omega).ok(),
                estimate::stats(&sm, &frame_truths[*t].omega).ok(),
            ),
            None => (None, None),
        };
        stats.push(TrackStats {
            track_id: track.track_id,
            target_id: label.map(|t| frame_truths[t].target_id),
            n_frames: series.points.len(),
            raw: r,
            smoothed: s,
        });
        raw.push(series);
        smoothed.push(sm);
    }
    log::info!(
        "smoothing over {} frames ({:.2} s at the frame rate)",
        p.smooth_frames,
        p.smooth_frames as f64 * stft_cfg.hop() as f64 / capture.sample_rate_hz
    );

    Ok(ProcessOutput {
        filtered,
        antenna_maps: [tf1, tf2],
        interferometric,
        decomposed,
        raw,
        smoothed,
        stats,
        truth: frame_truths,
    })
}

/// Assign detected tracks to truth targets by minimum total distance between
/// each track's mean antenna-1 band center and the target's mean Doppler.
pub fn match_tracks(resp: &DecomposedResponse, truth: &[FrameTruth]) -> Vec<Option<usize>> {
    let mean_doppler: Vec<Option<f64>> = truth
        .iter()
        .map(|t| {
            let d = &t.doppler.doppler_hz;
            (!d.is_empty()).then(|| d.iter().map(|x| x[0]).sum::<f64>() / d.len() as f64)
        })
        .collect();
    let cost: Vec<Vec<f64>> = resp
        .tracks
        .iter()
        .map(|tr| {
            let c = tr.mean_center_hz();
            mean_doppler
                .iter()
                .map(|d| match (c, d) {
                    (Some(c), Some(d)) => (c - d).abs(),
                    _ => 1e12,
                })
                .collect()
        })
        .collect();
    if cost.is_empty() || truth.is_empty() {
        return vec![None; resp.tracks.len()];
    }
    decomp::min_cost_assignment(&cost)
        .into_iter()
        .enumerate()
        .map(|(i, a)| a.filter(|&j| cost[i][j] < 1e12))
        .collect()
}

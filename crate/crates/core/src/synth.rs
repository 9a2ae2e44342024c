//! Two-channel complex baseband capture synthesis.
//!
//! Each receiver sees the sum of point-scatterer phase histories
//! `a_n A(θ_{i,n}) exp(-j 2π f_c τ_{i,n}(t))` after ideal downconversion,
//! plus complex white Gaussian noise and a per-channel DC offset.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::scene::{ArrayGeometry, Point2, TargetTrajectory};

/// Receive antenna voltage pattern shared by both elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AntennaPattern {
    Isotropic,
    /// Gaussian main beam; `beamwidth_rad` is the full 3 dB (power) width.
    GaussianBeam {
        beamwidth_rad: f64,
        #[serde(default)]
        boresight_rad: f64,
    },
}

impl Default for AntennaPattern {
    fn default() -> Self {
        AntennaPattern::GaussianBeam {
            beamwidth_rad: 30f64.to_radians(),
            boresight_rad: 0.0,
        }
    }
}

impl AntennaPattern {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AntennaPattern::Isotropic => Ok(()),
            AntennaPattern::GaussianBeam {
                beamwidth_rad,
                boresight_rad,
            } => {
                if !(beamwidth_rad > 0.0) || !boresight_rad.is_finite() {
                    return Err(Error::validation("gaussian beamwidth must be positive"));
                }
                Ok(())
            }
        }
    }

    /// Complex voltage gain at bearing `theta_rad`.
    pub fn gain(&self, theta_rad: f64) -> Complex64 {
        match *self {
            AntennaPattern::Isotropic => Complex64::new(1.0, 0.0),
            AntennaPattern::GaussianBeam {
                beamwidth_rad,
                boresight_rad,
            } => {
                let u = (theta_rad - boresight_rad) / beamwidth_rad;
                // Power falls by half at ±beamwidth/2.
                Complex64::new((-2.0 * std::f64::consts::LN_2 * u * u).exp(), 0.0)
            }
        }
    }

    pub fn peak_gain(&self) -> f64 {
        1.0
    }
}

/// Sinusoidal platform vibration, applied as extra phase on a target's echo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VibrationTone {
    pub freq_hz: f64,
    /// Peak phase deviation in radians.
    pub deviation_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformConfig {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub start_s: f64,
    /// Per-sample SNR relative to the strongest single target; `None` disables noise.
    pub snr_db: Option<f64>,
    pub dc_offset: [Complex64; 2],
    pub rng_seed: u64,
    #[serde(default)]
    pub vibration: Vec<VibrationTone>,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 1920.0,
            duration_s: 10.0,
            start_s: 0.0,
            snr_db: Some(20.0),
            dc_offset: [Complex64::new(0.01, 0.0); 2],
            rng_seed: 0,
            vibration: Vec::new(),
        }
    }
}

impl WaveformConfig {
    pub fn n_samples(&self) -> usize {
        (self.sample_rate_hz * self.duration_s).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0) || !self.sample_rate_hz.is_finite() {
            return Err(Error::validation("sample rate must be positive"));
        }
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(Error::validation("duration must be positive"));
        }
        if self.n_samples() == 0 {
            return Err(Error::validation("duration shorter than one sample"));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::validation("snr_db must be finite"));
            }
        }
        Ok(())
    }
}

/// Two equal-length complex baseband channels.
#[derive(Debug, Clone, PartialEq)]
pub struct IqCapture {
    pub ch1: Vec<Complex64>,
    pub ch2: Vec<Complex64>,
    pub sample_rate_hz: f64,
    pub t0_s: f64,
}

impl IqCapture {
    pub fn new(
        ch1: Vec<Complex64>,
        ch2: Vec<Complex64>,
        sample_rate_hz: f64,
        t0_s: f64,
    ) -> Result<Self> {
        let cap = Self {
            ch1,
            ch2,
            sample_rate_hz,
            t0_s,
        };
        cap.validate()?;
        Ok(cap)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ch1.len() != self.ch2.len() {
            return Err(Error::validation(format!(
                "channel length mismatch: {} vs {}",
                self.ch1.len(),
                self.ch2.len()
            )));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::validation("sample rate must be positive"));
        }
        if !self
            .ch1
            .iter()
            .chain(self.ch2.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
        {
            return Err(Error::Numeric("capture contains non-finite samples".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ch1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ch1.is_empty()
    }

    pub fn channel(&self, i: usize) -> &[Complex64] {
        if i == 0 {
            &self.ch1
        } else {
            &self.ch2
        }
    }

    pub fn time_of(&self, k: usize) -> f64 {
        self.t0_s + k as f64 / self.sample_rate_hz
    }

    pub fn energy(&self) -> f64 {
        self.ch1
            .iter()
            .chain(self.ch2.iter())
            .map(|z| z.norm_sqr())
            .sum()
    }
}

fn distance(a: Point2, b: Point2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Noise-free echo of one target at both receivers for every sample time.
fn target_echo(
    traj: &TargetTrajectory,
    index: usize,
    geom: &ArrayGeometry,
    pattern: &AntennaPattern,
    wf: &WaveformConfig,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let n = wf.n_samples();
    // Vibration phases are staggered per target so platforms are not in lockstep.
    let vib_offset = index as f64 * 0.5 * PI;
    let per_sample: Vec<Result<(Complex64, Complex64)>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let t = wf.start_s + k as f64 / wf.sample_rate_hz;
            let p = traj.position_at(t)?;
            let r_tx = distance(p, geom.tx_position);
            let vib: f64 = wf
                .vibration
                .iter()
                .map(|v| v.deviation_rad * (2.0 * PI * v.freq_hz * t + vib_offset).sin())
                .sum();
            let mut out = [Complex64::new(0.0, 0.0); 2];
            for (i, o) in out.iter_mut().enumerate() {
                let rx = geom.rx(i);
                let theta = (p[0] - rx[0]).atan2(p[1] - rx[1]);
                let cycles = (r_tx + distance(p, rx)) / geom.wavelength_m;
                let phase = -2.0 * PI * (cycles - cycles.floor()) + vib;
                *o = traj.amplitude * pattern.gain(theta) * Complex64::from_polar(1.0, phase);
            }
            if !(out[0].re.is_finite() && out[1].re.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite echo for target {} at t = {t}",
                    traj.target_id
                )));
            }
            Ok((out[0], out[1]))
        })
        .collect();
    let mut ch1 = Vec::with_capacity(n);
    let mut ch2 = Vec::with_capacity(n);
    for r in per_sample {
        let (a, b) = r?;
        ch1.push(a);
        ch2.push(b);
    }
    Ok((ch1, ch2))
}

/// Synthesize a capture for the given scene.
pub fn synthesize(
    geom: &ArrayGeometry,
    trajectories: &[TargetTrajectory],
    wf: &WaveformConfig,
    pattern: &AntennaPattern,
) -> Result<IqCapture> {
    geom.validate()?;
    wf.validate()?;
    pattern.validate()?;
    let n = wf.n_samples();
    let t_first = wf.start_s;
    let t_last = wf.start_s + (n - 1) as f64 / wf.sample_rate_hz;
    for tr in trajectories {
        let (a, b) = tr.span();
        if a > t_first + 1e-9 || b < t_last - 1e-9 {
            return Err(Error::validation(format!(
                "target {} covers [{a}, {b}] s but capture needs [{t_first}, {t_last}] s",
                tr.target_id
            )));
        }
        let min_range = tr
            .samples()
            .iter()
            .map(|s| distance([s.x, s.y], geom.phase_center()))
            .fold(f64::INFINITY, f64::min);
        if min_range < 10.0 * geom.baseline_m {
            log::warn!(
                "target {} comes within {:.3} m of the array (< 10 baselines); far-field model degraded",
                tr.target_id,
                min_range
            );
        }
    }

    let mut ch1 = vec![wf.dc_offset[0]; n];
    let mut ch2 = vec![wf.dc_offset[1]; n];
    for (idx, tr) in trajectories.iter().enumerate() {
        let (e1, e2) = target_echo(tr, idx, geom, pattern, wf)?;
        for k in 0..n {
            ch1[k] += e1[k];
            ch2[k] += e2[k];
        }
    }

    if let Some(snr_db) = wf.snr_db {
        let p_ref = trajectories
            .iter()
            .map(|t| (t.amplitude * pattern.peak_gain()).powi(2))
            .fold(0.0, f64::max);
        // With no targets there is no reference power; fall back to unit power.
        let p_ref = if p_ref > 0.0 { p_ref } else { 1.0 };
        let sigma = (p_ref / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::Numeric(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(wf.rng_seed);
        for k in 0..n {
            ch1[k] += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
            ch2[k] += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }

    IqCapture::new(ch1, ch2, wf.sample_rate_hz, wf.start_s)
}

/// Apply per-channel gain (dB) and phase (rad) mismatch.
pub fn add_channel_imbalance(capture: &IqCapture, gain_db: [f64; 2], phase_rad: [f64; 2]) -> IqCapture {
    let scale = |i: usize| Complex64::from_polar(10f64.powf(gain_db[i] / 20.0), phase_rad[i]);
    let (s1, s2) = (scale(0), scale(1));
    IqCapture {
        ch1: capture.ch1.iter().map(|z| z * s1).collect(),
        ch2: capture.ch2.iter().map(|z| z * s2).collect(),
        sample_rate_hz: capture.sample_rate_hz,
        t0_s: capture.t0_s,
    }
}

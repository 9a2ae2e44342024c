//! Angular-velocity estimation from interferometric responses.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dsp::{interpolated_peak, TimeFrequencyMap};
use crate::error::{Error, Result};
use crate::scene::ArrayGeometry;

pub const DEFAULT_FLOOR_DB: f64 = -20.0;
pub const DEFAULT_SMOOTH_FRAMES: usize = 60;

/// One row of an estimate series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatePoint {
    pub frame_time_s: f64,
    pub f_hz: f64,
    pub omega_radps: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSeries {
    pub track_id: usize,
    pub points: Vec<EstimatePoint>,
}

impl EstimateSeries {
    pub fn n_valid(&self) -> usize {
        self.points.iter().filter(|p| p.valid).count()
    }

    pub fn valid_points(&self) -> impl Iterator<Item = &EstimatePoint> {
        self.points.iter().filter(|p| p.valid)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for p in &self.points {
            wr.serialize(p)?;
        }
        wr.flush().map_err(|e| Error::io("<series csv>", e))?;
        Ok(())
    }
}

/// Interpolated peak frequency of every frame. Frames whose strongest bin is
/// weaker than the map's global maximum by more than `floor_db` (a voltage
/// ratio: -20 dB is a factor of 0.1) are marked invalid. `mask`, when given,
/// invalidates frames up front and excludes them from the global maximum.
/// `omega_radps` is left at zero; see [`to_omega`].
pub fn peak_track(
    resp: &TimeFrequencyMap,
    floor_db: f64,
    mask: Option<&[bool]>,
    track_id: usize,
) -> EstimateSeries {
    let usable = |f: usize| mask.is_none_or(|m| m.get(f).copied().unwrap_or(false));
    let peaks: Vec<Option<(f64, f64)>> = (0..resp.n_frames())
        .map(|f| {
            if !usable(f) {
                return None;
            }
            let mags: Vec<f64> = resp.frame(f).iter().map(|z| z.norm()).collect();
            let max_bin = mags.iter().copied().fold(0.0, f64::max);
            interpolated_peak(&mags).map(|(bin, _)| (resp.freq_of_bin(bin), max_bin))
        })
        .collect();
    let global = peaks.iter().flatten().map(|p| p.1).fold(0.0, f64::max);
    let floor = global * 10f64.powf(floor_db / 20.0);
    let points = resp
        .frame_times_s
        .iter()
        .zip(&peaks)
        .map(|(&t, p)| match p {
            Some((f, m)) if global > 0.0 && *m >= floor => EstimatePoint {
                frame_time_s: t,
                f_hz: *f,
                omega_radps: 0.0,
                valid: true,
            },
            _ => EstimatePoint {
                frame_time_s: t,
                f_hz: f64::NAN,
                omega_radps: f64::NAN,
                valid: false,
            },
        })
        .collect();
    EstimateSeries { track_id, points }
}

/// Centered moving average of `f_hz` and `omega_radps` over valid frames.
/// The window spans `window_frames` frame slots; near the edges it is
/// truncated, and invalid frames inside it are skipped.
pub fn smooth(series: &EstimateSeries, window_frames: usize) -> Result<EstimateSeries> {
    if window_frames == 0 {
        return Err(Error::validation("smoothing window must be at least 1 frame"));
    }
    let n = series.points.len();
    let before = (window_frames - 1) / 2;
    let after = window_frames - 1 - before;
    // Prefix sums over valid frames.
    let mut cf = vec![0.0; n + 1];
    let mut co = vec![0.0; n + 1];
    let mut cn = vec![0usize; n + 1];
    for (i, p) in series.points.iter().enumerate() {
        let (f, o, c) = if p.valid { (p.f_hz, p.omega_radps, 1) } else { (0.0, 0.0, 0) };
        cf[i + 1] = cf[i] + f;
        co[i + 1] = co[i] + o;
        cn[i + 1] = cn[i] + c;
    }
    let points = series
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if !p.valid {
                return *p;
            }
            let lo = i.saturating_sub(before);
            let hi = (i + after + 1).min(n);
            if window_frames == 1 {
                return *p;
            }
            let cnt = (cn[hi] - cn[lo]) as f64;
            EstimatePoint {
                f_hz: (cf[hi] - cf[lo]) / cnt,
                omega_radps: (co[hi] - co[lo]) / cnt,
                ..*p
            }
        })
        .collect();
    Ok(EstimateSeries {
        track_id: series.track_id,
        points,
    })
}

/// Small-angle inversion: `omega = f · lambda / D`.
pub fn to_omega(series: &EstimateSeries, geom: &ArrayGeometry) -> EstimateSeries {
    let k = geom.wavelength_m / geom.baseline_m;
    let mut out = series.clone();
    for p in out.points.iter_mut().filter(|p| p.valid) {
        p.omega_radps = p.f_hz * k;
    }
    out
}

/// Full inversion `omega = f · lambda / (D cos theta)` with a known bearing.
/// Frames where `theta_at` has no value, or where cos theta is below 1e-3,
/// become invalid.
pub fn to_omega_with_angle(
    series: &EstimateSeries,
    geom: &ArrayGeometry,
    theta_at: impl Fn(f64) -> Option<f64>,
) -> EstimateSeries {
    let k = geom.wavelength_m / geom.baseline_m;
    let mut out = series.clone();
    for p in out.points.iter_mut().filter(|p| p.valid) {
        match theta_at(p.frame_time_s).map(f64::cos) {
            Some(c) if c.abs() >= 1e-3 => p.omega_radps = p.f_hz * k / c,
            _ => {
                p.valid = false;
                p.omega_radps = f64::NAN;
            }
        }
    }
    out
}

/// Ground-truth angular velocity sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSeries {
    pub times_s: Vec<f64>,
    pub omega_radps: Vec<f64>,
}

impl TruthSeries {
    /// Linear interpolation; `None` outside the sampled span.
    pub fn at(&self, t: f64) -> Option<f64> {
        let ts = &self.times_s;
        let n = ts.len();
        if n == 0 || t < ts[0] || t > ts[n - 1] {
            return None;
        }
        let j = ts.partition_point(|&x| x < t);
        if j == 0 {
            return Some(self.omega_radps[0]);
        }
        let (t0, t1) = (ts[j - 1], ts[j]);
        let u = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        Some(self.omega_radps[j - 1] + u * (self.omega_radps[j] - self.omega_radps[j - 1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateStats {
    pub mu_true_radps: f64,
    pub mu_est_radps: f64,
    pub std_radps: f64,
    pub n_valid_frames: usize,
}

impl EstimateStats {
    pub fn error_radps(&self) -> f64 {
        self.mu_est_radps - self.mu_true_radps
    }
}

/// Mean truth, mean estimate and sample standard deviation of the estimates,
/// over valid frames that fall inside the truth span.
pub fn stats(est: &EstimateSeries, truth: &TruthSeries) -> Result<EstimateStats> {
    let pairs: Vec<(f64, f64)> = est
        .valid_points()
        .filter_map(|p| truth.at(p.frame_time_s).map(|w| (w, p.omega_radps)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::validation(format!(
            "track {} has no valid frames inside the truth span",
            est.track_id
        )));
    }
    let n = pairs.len() as f64;
    let mu_true = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mu_est = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    // Deviations are taken from the first estimate so a constant series has
    // exactly zero spread.
    let x0 = pairs[0].1;
    let d_mean = pairs.iter().map(|p| p.1 - x0).sum::<f64>() / n;
    let std = if pairs.len() > 1 {
        (pairs.iter().map(|p| (p.1 - x0 - d_mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(EstimateStats {
        mu_true_radps: mu_true,
        mu_est_radps: mu_est,
        std_radps: std,
        n_valid_frames: pairs.len(),
    })
}

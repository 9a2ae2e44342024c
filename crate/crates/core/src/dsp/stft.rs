use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Rect,
    Hamming,
    #[default]
    Hann,
    Blackman,
}

impl WindowKind {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        (0..n)
            .map(|i| {
                let x = 2.0 * PI * i as f64 / nf;
                match self {
                    WindowKind::Rect => 1.0,
                    WindowKind::Hann => 0.5 - 0.5 * x.cos(),
                    WindowKind::Hamming => 0.54 - 0.46 * x.cos(),
                    WindowKind::Blackman => 0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_len: usize,
    pub fft_len: usize,
    pub overlap: usize,
    #[serde(default)]
    pub window_kind: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_len: 1024,
            fft_len: 1024,
            overlap: 960,
            window_kind: WindowKind::Hann,
        }
    }
}

impl StftConfig {
    pub fn hop(&self) -> usize {
        self.window_len - self.overlap
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 || self.overlap >= self.window_len || self.window_len > self.fft_len {
            return Err(Error::validation(format!(
                "invalid STFT config: need 0 <= overlap ({}) < window_len ({}) <= fft_len ({})",
                self.overlap, self.window_len, self.fft_len
            )));
        }
        Ok(())
    }

    /// Same framing with the transform zero-padded `factor` times.
    pub fn zero_padded(&self, factor: usize) -> Self {
        Self {
            fft_len: self.fft_len * factor.max(1),
            ..*self
        }
    }

    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.hop() + 1
        }
    }
}

/// Sequence of DC-centered two-sided spectra.
///
/// Bin `b` of a frame sits at `(b - fft_len/2) * fs / fft_len` Hz. Spectra
/// are divided by the window's coherent gain, so a unit complex exponential
/// on a bin center has magnitude 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFrequencyMap {
    pub label: String,
    pub sample_rate_hz: f64,
    pub fft_len: usize,
    pub window_len: usize,
    pub window_kind: WindowKind,
    pub frame_times_s: Vec<f64>,
    data: Vec<Complex64>,
}

impl TimeFrequencyMap {
    pub fn from_frames(
        label: impl Into<String>,
        sample_rate_hz: f64,
        fft_len: usize,
        window_len: usize,
        window_kind: WindowKind,
        frame_times_s: Vec<f64>,
        data: Vec<Complex64>,
    ) -> Result<Self> {
        if fft_len == 0 || data.len() != frame_times_s.len() * fft_len {
            return Err(Error::validation(format!(
                "frame data has {} values, expected {} frames × {fft_len}",
                data.len(),
                frame_times_s.len()
            )));
        }
        Ok(Self {
            label: label.into(),
            sample_rate_hz,
            fft_len,
            window_len,
            window_kind,
            frame_times_s,
            data,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.frame_times_s.len()
    }

    pub fn frame(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.fft_len..(i + 1) * self.fft_len]
    }

    pub fn frame_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.fft_len..(i + 1) * self.fft_len]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks(self.fft_len)
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn bin_width_hz(&self) -> f64 {
        self.sample_rate_hz / self.fft_len as f64
    }

    /// Frequency of a (possibly fractional) bin index.
    pub fn freq_of_bin(&self, bin: f64) -> f64 {
        (bin - (self.fft_len / 2) as f64) * self.bin_width_hz()
    }

    pub fn nearest_bin(&self, freq_hz: f64) -> Option<usize> {
        let b = (freq_hz / self.bin_width_hz()).round() + (self.fft_len / 2) as f64;
        if b >= 0.0 && b < self.fft_len as f64 {
            Some(b as usize)
        } else {
            None
        }
    }

    pub fn freq_axis_hz(&self) -> Vec<f64> {
        (0..self.fft_len).map(|b| self.freq_of_bin(b as f64)).collect()
    }

    /// Frequency resolution of the analysis window (independent of zero padding).
    pub fn resolution_hz(&self) -> f64 {
        self.sample_rate_hz / self.window_len as f64
    }

    /// Magnitude of the strongest bin over the whole map.
    pub fn max_magnitude(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Sum of several maps with identical framing.
    pub fn sum<'a>(label: &str, maps: impl IntoIterator<Item = &'a TimeFrequencyMap>) -> Option<Self> {
        let mut iter = maps.into_iter();
        let mut acc = iter.next()?.clone();
        acc.label = label.to_string();
        for m in iter {
            if m.data.len() != acc.data.len() {
                return None;
            }
            for (a, b) in acc.data.iter_mut().zip(&m.data) {
                *a += b;
            }
        }
        Some(acc)
    }
}

/// Rotate a natural-order spectrum so DC lands at index `n/2`.
pub fn fftshift(x: &mut [Complex64]) {
    let n = x.len();
    x.rotate_right(n / 2);
}

/// Inverse of [`fftshift`].
pub fn ifftshift(x: &mut [Complex64]) {
    let n = x.len();
    x.rotate_left(n / 2);
}

/// Short-time Fourier transform of one complex channel. Frame times are
/// window centers relative to the first sample at `t0_s`.
pub fn stft(
    channel: &[Complex64],
    fs: f64,
    t0_s: f64,
    cfg: &StftConfig,
    label: &str,
) -> Result<TimeFrequencyMap> {
    cfg.validate()?;
    if channel.len() < cfg.window_len {
        return Err(Error::validation(format!(
            "sequence of {} samples is shorter than one {}-sample window",
            channel.len(),
            cfg.window_len
        )));
    }
    let window = cfg.window_kind.coefficients(cfg.window_len);
    let gain: f64 = window.iter().sum();
    let n_frames = cfg.n_frames(channel.len());
    let hop = cfg.hop();
    let fft = FftPlanner::new().plan_fft_forward(cfg.fft_len);

    let mut data = vec![Complex64::new(0.0, 0.0); n_frames * cfg.fft_len];
    data.par_chunks_mut(cfg.fft_len)
        .enumerate()
        .for_each(|(f, buf)| {
            let start = f * hop;
            for (i, (x, w)) in channel[start..start + cfg.window_len]
                .iter()
                .zip(&window)
                .enumerate()
            {
                buf[i] = x * w;
            }
            fft.process(buf);
            for z in buf.iter_mut() {
                *z /= gain;
            }
            fftshift(buf);
        });
    let frame_times_s = (0..n_frames)
        .map(|f| t0_s + (f * hop) as f64 / fs + (cfg.window_len / 2) as f64 / fs)
        .collect();
    TimeFrequencyMap::from_frames(
        label,
        fs,
        cfg.fft_len,
        cfg.window_len,
        cfg.window_kind,
        frame_times_s,
        data,
    )
}

/// Quadratic interpolation around the strongest bin of `mags`.
///
/// Returns the fractional bin index and interpolated peak height. Edge bins
/// are returned without interpolation.
pub fn interpolated_peak(mags: &[f64]) -> Option<(f64, f64)> {
    let (k, &peak) = mags
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, &f64)>, (i, m)| match best {
            Some((_, bm)) if *m <= *bm => best,
            _ => Some((i, m)),
        })?;
    if k == 0 || k + 1 == mags.len() {
        return Some((k as f64, peak));
    }
    let (a, b, c) = (mags[k - 1], peak, mags[k + 1]);
    let denom = a - 2.0 * b + c;
    if denom.abs() < f64::MIN_POSITIVE || denom >= 0.0 {
        return Some((k as f64, peak));
    }
    let delta = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
    Some((k as f64 + delta, b - 0.25 * (a - c) * delta))
}

/// Local maxima of `mags` at least `floor` high, strongest first.
pub fn local_peaks(mags: &[f64], floor: f64) -> Vec<usize> {
    let n = mags.len();
    let mut peaks: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| mags[i] >= floor && mags[i] > mags[i - 1] && mags[i] >= mags[i + 1])
        .collect();
    peaks.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]).then(a.cmp(&b)));
    peaks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, fs: f64, n: usize, amp: f64) -> Vec<Complex64> {
        (0..n)
            .map(|k| Complex64::from_polar(amp, 2.0 * PI * freq * k as f64 / fs))
            .collect()
    }

    fn mags(frame: &[Complex64]) -> Vec<f64> {
        frame.iter().map(|z| z.norm()).collect()
    }

    #[test]
    fn config_validation() {
        assert!(StftConfig::default().validate().is_ok());
        assert_eq!(StftConfig::default().hop(), 64);
        let bad = StftConfig {
            overlap: 1024,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = StftConfig {
            fft_len: 512,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn tone_peaks_at_nearest_bin() {
        let fs = 1920.0;
        let x = tone(133.4, fs, 4096, 1.0);
        let tf = stft(&x, fs, 0.0, &StftConfig::default(), "t").unwrap();
        assert!((tf.bin_width_hz() - 1.875).abs() < 1e-12);
        let want = tf.nearest_bin(133.4).unwrap();
        for f in tf.frames() {
            let m = mags(f);
            let (k, _) = interpolated_peak(&m).unwrap();
            assert_eq!(k.round() as usize, want);
        }
    }

    #[test]
    fn unit_tone_on_bin_has_unit_peak() {
        let fs = 1920.0;
        let x = tone(75.0, fs, 2048, 1.0);
        for kind in [WindowKind::Rect, WindowKind::Hann, WindowKind::Hamming, WindowKind::Blackman] {
            let cfg = StftConfig {
                window_kind: kind,
                ..Default::default()
            };
            let tf = stft(&x, fs, 0.0, &cfg, "t").unwrap();
            let peak = mags(tf.frame(0)).into_iter().fold(0.0, f64::max);
            assert!((peak - 1.0).abs() < 0.02, "{kind:?}: {peak}");
        }
    }

    #[test]
    fn zero_input_gives_zero_frames() {
        let x = vec![Complex64::new(0.0, 0.0); 2048];
        let tf = stft(&x, 1920.0, 0.0, &StftConfig::default(), "z").unwrap();
        assert!(tf.data().iter().all(|z| z.norm() == 0.0));
        assert_eq!(tf.n_frames(), (2048 - 1024) / 64 + 1);
    }

    #[test]
    fn symmetric_tones_have_equal_peaks() {
        let fs = 1920.0;
        let x: Vec<_> = tone(133.4, fs, 2048, 1.0)
            .into_iter()
            .zip(tone(-133.4, fs, 2048, 1.0))
            .map(|(a, b)| a + b)
            .collect();
        let tf = stft(&x, fs, 0.0, &StftConfig::default(), "t").unwrap();
        let m = mags(tf.frame(3));
        let p = local_peaks(&m, 0.1);
        assert_eq!(p.len(), 2);
        let (a, b) = (m[p[0]], m[p[1]]);
        assert!((a - b).abs() / a < 0.05);
        assert!((tf.freq_of_bin(p[0] as f64).abs() - 133.4).abs() < 1.875);
    }

    #[test]
    fn frame_times_are_window_centers() {
        let x = vec![Complex64::new(1.0, 0.0); 1024 + 64 * 3];
        let tf = stft(&x, 1920.0, 2.0, &StftConfig::default(), "c").unwrap();
        assert_eq!(tf.n_frames(), 4);
        assert!((tf.frame_times_s[0] - (2.0 + 512.0 / 1920.0)).abs() < 1e-12);
        for w in tf.frame_times_s.windows(2) {
            assert!((w[1] - w[0] - 64.0 / 1920.0).abs() < 1e-12);
        }
    }

    #[test]
    fn short_sequence_rejected() {
        let x = vec![Complex64::new(1.0, 0.0); 1000];
        assert!(stft(&x, 1920.0, 0.0, &StftConfig::default(), "s").is_err());
    }

    #[test]
    fn quadratic_interpolation_refines_offbin_tone() {
        let fs = 1920.0;
        let cfg = StftConfig::default().zero_padded(8);
        let x = tone(1.44, fs, 1024, 1.0);
        let tf = stft(&x, fs, 0.0, &cfg, "i").unwrap();
        let (k, peak) = interpolated_peak(&mags(tf.frame(0))).unwrap();
        assert!((tf.freq_of_bin(k) - 1.44).abs() < 0.01);
        assert!((peak - 1.0).abs() < 0.01);
    }

    #[test]
    fn shift_helpers_are_inverse() {
        let mut v: Vec<Complex64> = (0..8).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let orig = v.clone();
        fftshift(&mut v);
        assert_eq!(v[4].re, 0.0);
        ifftshift(&mut v);
        assert_eq!(v, orig);
    }
}

//! Per-frame target detection by maximum integrated window power, and
//! spectral masking.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frequency support attributed to one target in one antenna frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionWindow {
    pub center_hz: f64,
    pub width_hz: f64,
    pub integrated_power: f64,
    pub frame_index: usize,
    pub antenna_id: usize,
}

impl DetectionWindow {
    pub fn band(&self) -> Band {
        Band {
            lo_hz: self.center_hz - 0.5 * self.width_hz,
            hi_hz: self.center_hz + 0.5 * self.width_hz,
        }
    }
}

/// Closed frequency interval `[lo_hz, hi_hz]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl Band {
    pub fn centered(center_hz: f64, width_hz: f64) -> Self {
        Self {
            lo_hz: center_hz - 0.5 * width_hz,
            hi_hz: center_hz + 0.5 * width_hz,
        }
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo_hz + self.hi_hz)
    }

    pub fn overlaps(&self, other: &Band) -> bool {
        self.lo_hz <= other.hi_hz && other.lo_hz <= self.hi_hz
    }

    pub fn union(&self, other: &Band) -> Band {
        Band {
            lo_hz: self.lo_hz.min(other.lo_hz),
            hi_hz: self.hi_hz.max(other.hi_hz),
        }
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo_hz && f <= self.hi_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskShape {
    /// Hard edges in the bin domain.
    #[default]
    Rect,
    /// Tukey taper; `alpha` is the tapered fraction of the band.
    Tukey { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DetectStrategy {
    /// Exact maximization; switches to greedy above `exact_limit`.
    #[default]
    Exact,
    Greedy,
}

/// Frequency of bin `b` of a DC-centered spectrum.
pub fn bin_freq(b: usize, n_bins: usize, bin_width_hz: f64) -> f64 {
    (b as f64 - (n_bins / 2) as f64) * bin_width_hz
}

/// Number of bins either side of the center bin covered by a window.
pub fn half_width_bins(width_hz: f64, bin_width_hz: f64) -> usize {
    (0.5 * width_hz / bin_width_hz + 1e-9).floor() as usize
}

/// Sum of `power` over each run of `len` consecutive bins, indexed by start.
fn window_sums(power: &[f64], len: usize) -> Vec<f64> {
    if len > power.len() {
        return Vec::new();
    }
    (0..=power.len() - len)
        .map(|s| power[s..s + len].iter().sum())
        .collect()
}

/// Start indices of `n` disjoint windows of `len` bins maximizing total
/// power; on ties the lower-frequency placement wins.
pub fn best_windows_exact(power: &[f64], len: usize, n: usize) -> Vec<usize> {
    let b = power.len();
    let sums = window_sums(power, len);
    // best[j][i]: max power using j windows inside bins [0, i).
    let mut best = vec![vec![f64::NEG_INFINITY; b + 1]; n + 1];
    let mut take = vec![vec![false; b + 1]; n + 1];
    best[0].iter_mut().for_each(|v| *v = 0.0);
    for j in 1..=n {
        for i in 1..=b {
            let skip = best[j][i - 1];
            let mut val = skip;
            if i >= len {
                let cand = best[j - 1][i - len] + sums[i - len];
                if cand > skip {
                    val = cand;
                    take[j][i] = true;
                }
            }
            best[j][i] = val;
        }
    }
    let mut starts = Vec::with_capacity(n);
    let (mut j, mut i) = (n, b);
    while j > 0 && i > 0 {
        if take[j][i] {
            starts.push(i - len);
            i -= len;
            j -= 1;
        } else {
            i -= 1;
        }
    }
    starts.reverse();
    starts
}

/// Repeatedly take the strongest window that does not overlap earlier picks.
pub fn best_windows_greedy(power: &[f64], len: usize, n: usize) -> Vec<usize> {
    let sums = window_sums(power, len);
    let mut order: Vec<usize> = (0..sums.len()).collect();
    order.sort_by(|&a, &b| sums[b].total_cmp(&sums[a]).then(a.cmp(&b)));
    let mut picked: Vec<usize> = Vec::with_capacity(n);
    for s in order {
        if picked.len() == n {
            break;
        }
        if picked.iter().all(|&p| s + len <= p || p + len <= s) {
            picked.push(s);
        }
    }
    picked.sort_unstable();
    picked
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub width_hz: f64,
    pub strategy: DetectStrategy,
    /// Largest `n_targets × n_bins` solved exactly.
    pub exact_limit: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            width_hz: 10.0,
            strategy: DetectStrategy::Exact,
            exact_limit: 1 << 22,
        }
    }
}

/// Find `n_targets` non-overlapping windows with the highest total
/// integrated power in a DC-centered power spectrum.
pub fn detect_in_power(
    power: &[f64],
    bin_width_hz: f64,
    n_targets: usize,
    cfg: &DetectConfig,
    frame_index: usize,
    antenna_id: usize,
) -> Result<Vec<DetectionWindow>> {
    if n_targets == 0 {
        return Err(Error::validation("n_targets must be at least 1"));
    }
    let half = half_width_bins(cfg.width_hz, bin_width_hz);
    if cfg.width_hz < 2.0 * bin_width_hz || half == 0 {
        return Err(Error::validation(format!(
            "window width {} Hz is narrower than two {bin_width_hz} Hz bins",
            cfg.width_hz
        )));
    }
    let len = 2 * half + 1;
    if len * n_targets > power.len() {
        return Err(Error::validation(format!(
            "{n_targets} windows of {} Hz do not fit in the band",
            cfg.width_hz
        )));
    }
    let exact = cfg.strategy == DetectStrategy::Exact && n_targets * power.len() <= cfg.exact_limit;
    let starts = if exact {
        best_windows_exact(power, len, n_targets)
    } else {
        best_windows_greedy(power, len, n_targets)
    };
    Ok(starts
        .into_iter()
        .map(|s| DetectionWindow {
            center_hz: bin_freq(s + half, power.len(), bin_width_hz),
            width_hz: cfg.width_hz,
            integrated_power: power[s..s + len].iter().sum(),
            frame_index,
            antenna_id,
        })
        .collect())
}

/// Detect on one frame of complex spectrum.
pub fn detect_targets(
    frame: &[Complex64],
    bin_width_hz: f64,
    n_targets: usize,
    cfg: &DetectConfig,
    frame_index: usize,
    antenna_id: usize,
) -> Result<Vec<DetectionWindow>> {
    let power: Vec<f64> = frame.iter().map(|z| z.norm_sqr()).collect();
    detect_in_power(&power, bin_width_hz, n_targets, cfg, frame_index, antenna_id)
}

/// Per-bin weight of a band under the given mask shape.
pub fn mask_weights(n_bins: usize, bin_width_hz: f64, band: &Band, shape: &MaskShape) -> Vec<f64> {
    (0..n_bins)
        .map(|b| {
            let f = bin_freq(b, n_bins, bin_width_hz);
            if !band.contains(f) {
                return 0.0;
            }
            match *shape {
                MaskShape::Rect => 1.0,
                MaskShape::Tukey { alpha } => {
                    let alpha = alpha.clamp(0.0, 1.0);
                    let width = band.hi_hz - band.lo_hz;
                    if alpha == 0.0 || width <= 0.0 {
                        return 1.0;
                    }
                    let x = (f - band.lo_hz) / width;
                    let edge = alpha / 2.0;
                    if x < edge {
                        0.5 * (1.0 - (std::f64::consts::PI * x / edge).cos())
                    } else if x > 1.0 - edge {
                        0.5 * (1.0 - (std::f64::consts::PI * (1.0 - x) / edge).cos())
                    } else {
                        1.0
                    }
                }
            }
        })
        .collect()
}

/// Keep the bins of a DC-centered spectrum inside `window`; zero the rest.
pub fn mask_spectrum(frame: &[Complex64], bin_width_hz: f64, window: &DetectionWindow) -> Vec<Complex64> {
    mask_band(frame, bin_width_hz, &window.band(), &MaskShape::Rect)
}

pub fn mask_band(
    frame: &[Complex64],
    bin_width_hz: f64,
    band: &Band,
    shape: &MaskShape,
) -> Vec<Complex64> {
    let w = mask_weights(frame.len(), bin_width_hz, band, shape);
    frame.iter().zip(w).map(|(z, w)| z * w).collect()
}

/// Median bin power, used as the per-frame noise floor.
pub fn noise_floor(power: &[f64]) -> f64 {
    if power.is_empty() {
        return 0.0;
    }
    let mut v = power.to_vec();
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

/// Mean power per bin inside `band`.
pub fn band_mean_power(power: &[f64], bin_width_hz: f64, band: &Band) -> f64 {
    let n = power.len();
    let (sum, cnt) = power
        .iter()
        .enumerate()
        .filter(|(b, _)| band.contains(bin_freq(*b, n, bin_width_hz)))
        .fold((0.0, 0usize), |(s, c), (_, p)| (s + p, c + 1));
    if cnt == 0 {
        0.0
    } else {
        sum / cnt as f64
    }
}

//! Closed-form line spectrum of the interferometer output.
//!
//! For point scatterers `n, k` the correlator output holds a line at
//!
//! ```text
//! f_{n,k} = -2 (v_{r,1,n} - v_{r,1,k}) / λ + ω_{1,k} D / λ
//! ```
//!
//! with amplitude `a_n A(θ_{1,n}) · conj(a_k A(θ_{2,k}))`. Radial velocities
//! use the range-rate sign convention of [`crate::scene`] (receding is
//! positive), hence the leading minus. Self terms (`n == k`) carry the
//! angular-velocity information; the `N(N-1)` cross terms are the
//! intermodulation distortion. The ideal decomposed response keeps only the
//! self terms with amplitude `|a_n A(θ_{1,n})|²`.
//!
//! These expressions assume far field and small bearings. Inputs beyond
//! [`DEGRADED_ANGLE_RAD`] are accepted but flagged.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{ArrayGeometry, KinematicState};
use crate::synth::AntennaPattern;

/// Bearing magnitude above which the small-angle line model is flagged.
pub const DEGRADED_ANGLE_RAD: f64 = 0.35;

/// Line-model inputs for one scatterer, referenced to antenna 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointState {
    pub v_radial_mps: f64,
    pub omega_radps: f64,
    pub theta_rad: [f64; 2],
    pub amplitude: f64,
}

impl PointState {
    pub fn new(v_radial_mps: f64, omega_radps: f64, theta_rad: [f64; 2], amplitude: f64) -> Self {
        Self {
            v_radial_mps,
            omega_radps,
            theta_rad,
            amplitude,
        }
    }

    pub fn from_kinematics(k: &KinematicState, amplitude: f64) -> Self {
        Self {
            v_radial_mps: k.v_radial_mps[0],
            omega_radps: k.omega_center(),
            theta_rad: k.theta_rad,
            amplitude,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.v_radial_mps.is_finite()
            && self.omega_radps.is_finite()
            && self.amplitude.is_finite()
            && self
                .theta_rad
                .iter()
                .all(|t| t.is_finite() && t.abs() < std::f64::consts::FRAC_PI_2);
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!("invalid point state {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    #[serde(rename = "self")]
    SelfTerm,
    #[serde(rename = "cross")]
    CrossTerm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralLine {
    pub freq_hz: f64,
    pub amplitude: Complex64,
    pub kind: LineKind,
    pub n: usize,
    pub k: usize,
}

/// Output of the oracle; `approximation_degraded` is set when any bearing
/// exceeds [`DEGRADED_ANGLE_RAD`].
#[derive(Debug, Clone, PartialEq)]
pub struct LineSet {
    pub lines: Vec<SpectralLine>,
    pub approximation_degraded: bool,
}

impl LineSet {
    pub fn self_terms(&self) -> impl Iterator<Item = &SpectralLine> {
        self.lines.iter().filter(|l| l.kind == LineKind::SelfTerm)
    }

    pub fn cross_terms(&self) -> impl Iterator<Item = &SpectralLine> {
        self.lines.iter().filter(|l| l.kind == LineKind::CrossTerm)
    }

    pub fn to_records(&self) -> Vec<LineRecord> {
        self.lines.iter().map(LineRecord::from).collect()
    }
}

/// Flat JSON form of a line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineRecord {
    pub freq_hz: f64,
    pub amp_re: f64,
    pub amp_im: f64,
    pub kind: LineKind,
    pub n: usize,
    pub k: usize,
}

impl From<&SpectralLine> for LineRecord {
    fn from(l: &SpectralLine) -> Self {
        Self {
            freq_hz: l.freq_hz,
            amp_re: l.amplitude.re,
            amp_im: l.amplitude.im,
            kind: l.kind,
            n: l.n,
            k: l.k,
        }
    }
}

fn check(points: &[PointState], geom: &ArrayGeometry, pattern: &AntennaPattern) -> Result<bool> {
    if points.is_empty() {
        return Err(Error::validation("line model needs at least one point"));
    }
    geom.validate()?;
    pattern.validate()?;
    for p in points {
        p.validate()?;
    }
    Ok(points
        .iter()
        .any(|p| p.theta_rad.iter().any(|t| t.abs() > DEGRADED_ANGLE_RAD)))
}

/// Frequency of the `(n, k)` line.
pub fn line_frequency(n: &PointState, k: &PointState, geom: &ArrayGeometry) -> f64 {
    -2.0 * (n.v_radial_mps - k.v_radial_mps) / geom.wavelength_m
        + k.omega_radps * geom.baseline_wavelengths()
}

/// All `N²` lines of the full (distorted) interferometric response.
/// Coincident lines are kept separate.
pub fn full_response_lines(
    points: &[PointState],
    geom: &ArrayGeometry,
    pattern: &AntennaPattern,
) -> Result<LineSet> {
    let approximation_degraded = check(points, geom, pattern)?;
    let mut lines = Vec::with_capacity(points.len() * points.len());
    for (n, pn) in points.iter().enumerate() {
        let a1 = pn.amplitude * pattern.gain(pn.theta_rad[0]);
        for (k, pk) in points.iter().enumerate() {
            let a2 = pk.amplitude * pattern.gain(pk.theta_rad[1]);
            lines.push(SpectralLine {
                freq_hz: line_frequency(pn, pk, geom),
                amplitude: a1 * a2.conj(),
                kind: if n == k {
                    LineKind::SelfTerm
                } else {
                    LineKind::CrossTerm
                },
                n,
                k,
            });
        }
    }
    Ok(LineSet {
        lines,
        approximation_degraded,
    })
}

/// The `N` self lines of the ideal decomposed response.
pub fn decomposed_response_lines(
    points: &[PointState],
    geom: &ArrayGeometry,
    pattern: &AntennaPattern,
) -> Result<LineSet> {
    let approximation_degraded = check(points, geom, pattern)?;
    let lines = points
        .iter()
        .enumerate()
        .map(|(n, p)| SpectralLine {
            freq_hz: p.omega_radps * geom.baseline_wavelengths(),
            amplitude: p.amplitude * pattern.gain(p.theta_rad[0])
                * (p.amplitude * pattern.gain(p.theta_rad[1])).conj(),
            kind: LineKind::SelfTerm,
            n,
            k: n,
        })
        .collect();
    Ok(LineSet {
        lines,
        approximation_degraded,
    })
}

/// Number of self and cross terms for `n` scatterers.
pub fn line_count_check(n: usize) -> (usize, usize) {
    (n, n * n.saturating_sub(1))
}

/// Uniform DC-centered frequency grid: bin `b` is at `(b - n_bins/2) · bin_width_hz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqGrid {
    pub n_bins: usize,
    pub bin_width_hz: f64,
}

impl FreqGrid {
    pub fn freq(&self, bin: usize) -> f64 {
        (bin as f64 - (self.n_bins / 2) as f64) * self.bin_width_hz
    }

    pub fn fractional_bin(&self, freq_hz: f64) -> f64 {
        freq_hz / self.bin_width_hz + (self.n_bins / 2) as f64
    }
}

/// Place each line's amplitude in its nearest bin (lines off the grid are dropped).
pub fn rasterize_nearest(lines: &[SpectralLine], grid: &FreqGrid) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); grid.n_bins];
    for l in lines {
        let b = grid.fractional_bin(l.freq_hz).round();
        if b >= 0.0 && (b as usize) < grid.n_bins {
            out[b as usize] += l.amplitude;
        }
    }
    out
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Spectral shape of a Hann-windowed line, unit height at its center; `x`
/// is the offset in resolution cells (`fs / window_len`).
pub fn hann_lobe(x: f64) -> f64 {
    sinc(x) + 0.5 * (sinc(x - 1.0) + sinc(x + 1.0))
}

/// Render lines as Hann main lobes of width set by `resolution_hz`, summed
/// coherently. Only cells within `±support_cells` of each line are touched.
pub fn rasterize_lobes(
    lines: &[SpectralLine],
    grid: &FreqGrid,
    resolution_hz: f64,
    support_cells: f64,
) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); grid.n_bins];
    add_lobes(&mut out, lines, grid, resolution_hz, support_cells);
    out
}

pub(crate) fn add_lobes(
    out: &mut [Complex64],
    lines: &[SpectralLine],
    grid: &FreqGrid,
    resolution_hz: f64,
    support_cells: f64,
) {
    let span_bins = support_cells * resolution_hz / grid.bin_width_hz;
    for l in lines {
        let center = grid.fractional_bin(l.freq_hz);
        let lo = (center - span_bins).ceil().max(0.0);
        let hi = (center + span_bins).floor().min(grid.n_bins as f64 - 1.0);
        if hi < lo {
            continue;
        }
        for b in lo as usize..=hi as usize {
            let x = (grid.freq(b) - l.freq_hz) / resolution_hz;
            out[b] += l.amplitude * hann_lobe(x);
        }
    }
}

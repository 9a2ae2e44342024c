//! Response decomposition.
//!
//! Each antenna's short-time spectrum is split into per-target supports,
//! supports are paired across the two antennas, and only like targets are
//! correlated. Each target track yields its own interferometric response
//! `R_{D,n}`, free of the cross terms produced by correlating unlike
//! targets. Their sum is available through [`DecomposedResponse::total`].
//!
//! Correlation of two masked spectra is carried out in the time domain:
//! each masked spectrum is inverse transformed, the two blocks are
//! conjugate-multiplied, and the product is transformed back with the
//! interferometric zero-padding factor. With no padding this equals the
//! circular cross-correlation of the two spectra.

pub mod assign;
pub mod detect;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, fftshift, ifftshift, StftConfig, TimeFrequencyMap};
use crate::error::{Error, Result};
use crate::synth::IqCapture;

pub use assign::{assignment_cost, min_cost_assignment};
pub use detect::{
    detect_targets, mask_band, mask_spectrum, Band, DetectConfig, DetectStrategy, DetectionWindow,
    MaskShape,
};

/// How per-target masks relate across the two antennas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// One mask per target applied to both antennas.
    #[default]
    Shared,
    /// Independent detection per antenna followed by cross-antenna association.
    PerAntenna,
}

/// Expected Doppler history of one target, `[antenna1, antenna2]` per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DopplerTrack {
    pub times_s: Vec<f64>,
    pub doppler_hz: Vec<[f64; 2]>,
}

impl DopplerTrack {
    /// Linear interpolation; `None` outside the sampled span.
    pub fn at(&self, t: f64) -> Option<[f64; 2]> {
        let ts = &self.times_s;
        if ts.is_empty() || t < ts[0] || t > ts[ts.len() - 1] {
            return None;
        }
        let j = ts.partition_point(|&x| x < t);
        if j == 0 {
            return Some(self.doppler_hz[0]);
        }
        let (t0, t1) = (ts[j - 1], ts[j]);
        let u = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        let (a, b) = (self.doppler_hz[j - 1], self.doppler_hz[j]);
        Some([a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])])
    }
}

/// Where per-target frequency supports come from.
#[derive(Debug, Clone, PartialEq)]
pub enum FrequencyMode {
    /// Supports centered on externally known Doppler histories, one per target.
    Known(Vec<DopplerTrack>),
    /// Supports found by maximum integrated window power.
    Detected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposeConfig {
    pub stft: StftConfig,
    pub zero_pad: usize,
    pub mask_width_hz: f64,
    pub mask_mode: MaskMode,
    pub mask_shape: MaskShape,
    /// Cross-antenna association gate.
    pub gate_hz: f64,
    /// Frame-to-frame track continuity gate.
    pub track_gate_hz: f64,
    /// Minimum mean in-window power relative to the frame's median bin power.
    pub detect_threshold_db: f64,
    pub strategy: DetectStrategy,
    /// Consecutive misses after which a track may take any unclaimed window.
    pub reacquire_frames: usize,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            zero_pad: dsp::DEFAULT_ZERO_PAD,
            mask_width_hz: 10.0,
            mask_mode: MaskMode::Shared,
            mask_shape: MaskShape::Rect,
            gate_hz: 5.0,
            track_gate_hz: 5.0,
            detect_threshold_db: 10.0,
            strategy: DetectStrategy::Exact,
            reacquire_frames: 15,
        }
    }
}

impl DecomposeConfig {
    fn detect_config(&self) -> DetectConfig {
        DetectConfig {
            width_hz: self.mask_width_hz,
            strategy: self.strategy,
            ..DetectConfig::default()
        }
    }
}

/// One cross-antenna pairing within a frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationPair {
    pub antenna1: usize,
    pub antenna2: usize,
    pub track: Option<usize>,
}

/// Pairings of one frame. `cost` is the total frequency separation of the
/// optimal assignment, including pairs later rejected by the gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameAssociation {
    pub frame: usize,
    pub pairs: Vec<AssociationPair>,
    pub unmatched1: Vec<usize>,
    pub unmatched2: Vec<usize>,
    pub cost: f64,
}

pub type AssociationMap = Vec<FrameAssociation>;

/// Global nearest neighbor pairing of antenna-1 and antenna-2 windows,
/// minimizing total center-frequency separation. Assigned pairs further
/// apart than `gate_hz` are reported as unmatched.
pub fn associate(gate_hz: f64, det1: &[DetectionWindow], det2: &[DetectionWindow]) -> FrameAssociation {
    let cost: Vec<Vec<f64>> = det1
        .iter()
        .map(|a| det2.iter().map(|b| (a.center_hz - b.center_hz).abs()).collect())
        .collect();
    let assignment = min_cost_assignment(&cost);
    let total = assignment_cost(&cost, &assignment);
    let mut pairs = Vec::new();
    let mut unmatched1 = Vec::new();
    let mut used2 = vec![false; det2.len()];
    for (i, a) in assignment.iter().enumerate() {
        match a {
            Some(j) if cost[i][*j] <= gate_hz => {
                used2[*j] = true;
                pairs.push(AssociationPair {
                    antenna1: i,
                    antenna2: *j,
                    track: None,
                });
            }
            _ => unmatched1.push(i),
        }
    }
    let unmatched2 = (0..det2.len()).filter(|&j| !used2[j]).collect();
    FrameAssociation {
        frame: det1.first().or(det2.first()).map_or(0, |d| d.frame_index),
        pairs,
        unmatched1,
        unmatched2,
        cost: total,
    }
}

/// Reconstructed interferometric response of one target track.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackResponse {
    pub track_id: usize,
    pub map: TimeFrequencyMap,
    pub valid: Vec<bool>,
    /// Mask band per frame for `[antenna1, antenna2]`; `None` where invalid.
    pub bands: Vec<Option<[Band; 2]>>,
}

impl TrackResponse {
    /// Mean mask center over valid frames, antenna 1.
    pub fn mean_center_hz(&self) -> Option<f64> {
        let c: Vec<f64> = self.bands.iter().flatten().map(|b| b[0].center()).collect();
        if c.is_empty() {
            None
        } else {
            Some(c.iter().sum::<f64>() / c.len() as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedResponse {
    pub tracks: Vec<TrackResponse>,
    pub association: AssociationMap,
}

impl DecomposedResponse {
    /// Sum of all per-track responses.
    pub fn total(&self) -> Option<TimeFrequencyMap> {
        TimeFrequencyMap::sum("decomposed_total", self.tracks.iter().map(|t| &t.map))
    }
}

/// A per-target support found in one frame before track labeling.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    bands: [Band; 2],
    pair: (usize, usize),
}

#[derive(Debug, Clone, Default)]
struct FrameCandidates {
    candidates: Vec<Candidate>,
    association: Option<FrameAssociation>,
}

fn power(frame: &[Complex64]) -> Vec<f64> {
    frame.iter().map(|z| z.norm_sqr()).collect()
}

fn band_ok(pow: &[f64], floor: f64, bin_width: f64, band: &Band, threshold: f64) -> bool {
    detect::band_mean_power(pow, bin_width, band) > floor * threshold
}

/// Correlate two DC-centered masked spectra: inverse transform both,
/// conjugate-multiply, transform with `zero_pad`× padding. Input spectra are
/// normalized by the window coherent gain; `scale` restores unit peak height
/// for a unit tone pair.
pub fn correlate_spectra(
    m1: &[Complex64],
    m2: &[Complex64],
    zero_pad: usize,
    scale: f64,
    planner: &mut FftPlanner<f64>,
) -> Vec<Complex64> {
    let n = m1.len();
    let inv = planner.plan_fft_inverse(n);
    let mut a = m1.to_vec();
    let mut b = m2.to_vec();
    ifftshift(&mut a);
    ifftshift(&mut b);
    inv.process(&mut a);
    inv.process(&mut b);
    let padded = n * zero_pad.max(1);
    let mut prod = vec![Complex64::new(0.0, 0.0); padded];
    let norm = scale / (n as f64 * n as f64);
    for (k, (x, y)) in a.iter().zip(&b).enumerate() {
        prod[k] = x * y.conj() * norm;
    }
    planner.plan_fft_forward(padded).process(&mut prod);
    fftshift(&mut prod);
    prod
}

fn window_gains(cfg: &StftConfig) -> (f64, f64) {
    let w = cfg.window_kind.coefficients(cfg.window_len);
    let g1: f64 = w.iter().sum();
    let g2: f64 = w.iter().map(|x| x * x).sum();
    (g1, g2)
}

/// Decompose a capture into per-target interferometric responses.
pub fn decompose_and_correlate(
    capture: &IqCapture,
    cfg: &DecomposeConfig,
    n_targets: usize,
    mode: &FrequencyMode,
) -> Result<DecomposedResponse> {
    let (tf1, tf2) = dsp::antenna_stfts(capture, &cfg.stft)?;
    decompose_maps(&tf1, &tf2, cfg, n_targets, mode)
}

/// As [`decompose_and_correlate`], starting from the antenna STFTs.
pub fn decompose_maps(
    tf1: &TimeFrequencyMap,
    tf2: &TimeFrequencyMap,
    cfg: &DecomposeConfig,
    n_targets: usize,
    mode: &FrequencyMode,
) -> Result<DecomposedResponse> {
    if tf1.n_frames() != tf2.n_frames() || tf1.fft_len != tf2.fft_len {
        return Err(Error::validation("antenna maps have different framing"));
    }
    if tf1.n_frames() == 0 {
        return Err(Error::validation("capture too short for a single frame"));
    }
    if !(cfg.mask_width_hz > 0.0) || cfg.zero_pad == 0 {
        return Err(Error::validation("mask width and zero padding must be positive"));
    }
    if let FrequencyMode::Known(tracks) = mode {
        if tracks.len() != n_targets {
            return Err(Error::validation(format!(
                "known-frequency mode needs {n_targets} Doppler tracks, got {}",
                tracks.len()
            )));
        }
    }
    if n_targets == 0 {
        return Ok(DecomposedResponse {
            tracks: Vec::new(),
            association: Vec::new(),
        });
    }

    let n_frames = tf1.n_frames();
    let bw = tf1.bin_width_hz();
    let threshold = 10f64.powf(cfg.detect_threshold_db / 10.0);

    // Per-frame supports, independent across frames.
    let per_frame: Vec<Result<FrameCandidates>> = (0..n_frames)
        .into_par_iter()
        .map(|f| frame_candidates(tf1, tf2, f, cfg, n_targets, mode, threshold))
        .collect();
    let per_frame: Vec<FrameCandidates> = per_frame.into_iter().collect::<Result<_>>()?;

    // Sequential labeling: slot n of each frame holds track n's support.
    let (labels, association) = match mode {
        FrequencyMode::Known(_) => label_known(&per_frame, n_targets),
        FrequencyMode::Detected => link_tracks(&per_frame, n_targets, cfg),
    };

    let (g1, g2) = window_gains(&cfg.stft);
    let scale = g1 * g1 / g2;
    let padded = tf1.fft_len * cfg.zero_pad;
    let frames: Vec<Vec<Option<(Vec<Complex64>, [Band; 2])>>> = (0..n_frames)
        .into_par_iter()
        .map_init(FftPlanner::new, |planner, f| {
            labels[f]
                .iter()
                .map(|slot| {
                    slot.map(|c| {
                        let m1 = mask_band(tf1.frame(f), bw, &c.bands[0], &cfg.mask_shape);
                        let m2 = mask_band(tf2.frame(f), bw, &c.bands[1], &cfg.mask_shape);
                        (correlate_spectra(&m1, &m2, cfg.zero_pad, scale, planner), c.bands)
                    })
                })
                .collect()
        })
        .collect();

    let mut tracks = Vec::with_capacity(n_targets);
    for n in 0..n_targets {
        let mut data = vec![Complex64::new(0.0, 0.0); n_frames * padded];
        let mut valid = vec![false; n_frames];
        let mut bands = vec![None; n_frames];
        for f in 0..n_frames {
            if let Some((spec, b)) = &frames[f][n] {
                data[f * padded..(f + 1) * padded].copy_from_slice(spec);
                valid[f] = true;
                bands[f] = Some(*b);
            }
        }
        let map = TimeFrequencyMap::from_frames(
            format!("track{n}"),
            tf1.sample_rate_hz,
            padded,
            tf1.window_len,
            tf1.window_kind,
            tf1.frame_times_s.clone(),
            data,
        )?;
        tracks.push(TrackResponse {
            track_id: n,
            map,
            valid,
            bands,
        });
    }
    Ok(DecomposedResponse {
        tracks,
        association,
    })
}

fn frame_candidates(
    tf1: &TimeFrequencyMap,
    tf2: &TimeFrequencyMap,
    f: usize,
    cfg: &DecomposeConfig,
    n_targets: usize,
    mode: &FrequencyMode,
    threshold: f64,
) -> Result<FrameCandidates> {
    let bw = tf1.bin_width_hz();
    let p1 = power(tf1.frame(f));
    let p2 = power(tf2.frame(f));
    let floor1 = detect::noise_floor(&p1);
    let floor2 = detect::noise_floor(&p2);
    let ok = |bands: &[Band; 2]| {
        band_ok(&p1, floor1, bw, &bands[0], threshold) && band_ok(&p2, floor2, bw, &bands[1], threshold)
    };

    match mode {
        FrequencyMode::Known(tracks) => {
            let t = tf1.frame_times_s[f];
            // Slot n is target n; failed slots get a band that is filtered out later.
            let candidates = tracks
                .iter()
                .enumerate()
                .map(|(n, tr)| {
                    let d = tr.at(t)?;
                    let bands = match cfg.mask_mode {
                        MaskMode::Shared => [Band::centered(d[0], cfg.mask_width_hz); 2],
                        MaskMode::PerAntenna => [
                            Band::centered(d[0], cfg.mask_width_hz),
                            Band::centered(d[1], cfg.mask_width_hz),
                        ],
                    };
                    ok(&bands).then_some(Candidate {
                        bands,
                        pair: (n, n),
                    })
                })
                .map(|c| {
                    c.unwrap_or(Candidate {
                        bands: [Band {
                            lo_hz: f64::NAN,
                            hi_hz: f64::NAN,
                        }; 2],
                        pair: (usize::MAX, usize::MAX),
                    })
                })
                .collect();
            Ok(FrameCandidates {
                candidates,
                association: None,
            })
        }
        FrequencyMode::Detected => {
            let dcfg = cfg.detect_config();
            match cfg.mask_mode {
                MaskMode::Shared => {
                    let combined: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a + b).collect();
                    let windows = detect::detect_in_power(&combined, bw, n_targets, &dcfg, f, 0)?;
                    let candidates = windows
                        .iter()
                        .enumerate()
                        .map(|(i, w)| Candidate {
                            bands: [w.band(); 2],
                            pair: (i, i),
                        })
                        .filter(|c| ok(&c.bands))
                        .collect();
                    Ok(FrameCandidates {
                        candidates,
                        association: None,
                    })
                }
                MaskMode::PerAntenna => {
                    let w1 = detect::detect_in_power(&p1, bw, n_targets, &dcfg, f, 0)?;
                    let w2 = detect::detect_in_power(&p2, bw, n_targets, &dcfg, f, 1)?;
                    let mut assoc = associate(cfg.gate_hz, &w1, &w2);
                    assoc.frame = f;
                    let candidates = assoc
                        .pairs
                        .iter()
                        .map(|p| {
                            let (b1, b2) = (w1[p.antenna1].band(), w2[p.antenna2].band());
                            // Overlapping supports are merged into one shared mask.
                            let bands = if b1.overlaps(&b2) {
                                [b1.union(&b2); 2]
                            } else {
                                [b1, b2]
                            };
                            Candidate {
                                bands,
                                pair: (p.antenna1, p.antenna2),
                            }
                        })
                        .filter(|c| ok(&c.bands))
                        .collect();
                    Ok(FrameCandidates {
                        candidates,
                        association: Some(assoc),
                    })
                }
            }
        }
    }
}

type Labels = Vec<Vec<Option<Candidate>>>;

fn label_known(per_frame: &[FrameCandidates], n_targets: usize) -> (Labels, AssociationMap) {
    let mut labels = Vec::with_capacity(per_frame.len());
    let mut assoc = Vec::with_capacity(per_frame.len());
    for (f, fc) in per_frame.iter().enumerate() {
        let slots: Vec<Option<Candidate>> = (0..n_targets)
            .map(|n| fc.candidates.get(n).copied().filter(|c| c.pair.0 != usize::MAX))
            .collect();
        let pairs = slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_some())
            .map(|(n, _)| AssociationPair {
                antenna1: n,
                antenna2: n,
                track: Some(n),
            })
            .collect();
        let missing: Vec<usize> = (0..n_targets).filter(|&n| slots[n].is_none()).collect();
        assoc.push(FrameAssociation {
            frame: f,
            pairs,
            unmatched1: missing.clone(),
            unmatched2: missing,
            cost: 0.0,
        });
        labels.push(slots);
    }
    (labels, assoc)
}

#[derive(Debug, Clone, Copy, Default)]
struct TrackState {
    last_center: Option<f64>,
    misses: usize,
}

/// Link unlabeled per-frame supports into tracks by frame-to-frame GNN on
/// the antenna-1 band center.
fn link_tracks(
    per_frame: &[FrameCandidates],
    n_targets: usize,
    cfg: &DecomposeConfig,
) -> (Labels, AssociationMap) {
    let mut states = vec![TrackState::default(); n_targets];
    let mut labels = Vec::with_capacity(per_frame.len());
    let mut assoc_map = Vec::with_capacity(per_frame.len());

    for (f, fc) in per_frame.iter().enumerate() {
        let cands = &fc.candidates;
        let centers: Vec<f64> = cands.iter().map(|c| c.bands[0].center()).collect();
        let mut slot: Vec<Option<usize>> = vec![None; n_targets];
        let mut claimed = vec![false; cands.len()];

        let initialized = states.iter().any(|s| s.last_center.is_some());
        if !initialized {
            // First frame with detections: label in order of frequency.
            let mut order: Vec<usize> = (0..cands.len()).collect();
            order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]));
            for (n, c) in order.into_iter().take(n_targets).enumerate() {
                slot[n] = Some(c);
                claimed[c] = true;
            }
        } else {
            let active: Vec<usize> = (0..n_targets)
                .filter(|&n| states[n].last_center.is_some())
                .collect();
            let cost: Vec<Vec<f64>> = active
                .iter()
                .map(|&n| {
                    let last = states[n].last_center.unwrap_or(0.0);
                    centers.iter().map(|c| (c - last).abs()).collect()
                })
                .collect();
            for (row, a) in min_cost_assignment(&cost).into_iter().enumerate() {
                if let Some(c) = a {
                    if cost[row][c] <= cfg.track_gate_hz {
                        slot[active[row]] = Some(c);
                        claimed[c] = true;
                    }
                }
            }
            // Long-lost or never-started tracks may take leftover supports.
            let free_tracks: Vec<usize> = (0..n_targets)
                .filter(|&n| {
                    slot[n].is_none()
                        && (states[n].last_center.is_none()
                            || states[n].misses >= cfg.reacquire_frames)
                })
                .collect();
            let free_cands: Vec<usize> = (0..cands.len()).filter(|&c| !claimed[c]).collect();
            if !free_tracks.is_empty() && !free_cands.is_empty() {
                let cost: Vec<Vec<f64>> = free_tracks
                    .iter()
                    .map(|&n| {
                        let last = states[n].last_center.unwrap_or(0.0);
                        free_cands.iter().map(|&c| (centers[c] - last).abs()).collect()
                    })
                    .collect();
                for (row, a) in min_cost_assignment(&cost).into_iter().enumerate() {
                    if let Some(col) = a {
                        slot[free_tracks[row]] = Some(free_cands[col]);
                        claimed[free_cands[col]] = true;
                    }
                }
            }
        }

        for (n, s) in slot.iter().enumerate() {
            match s {
                Some(c) => {
                    states[n].last_center = Some(centers[*c]);
                    states[n].misses = 0;
                }
                None => states[n].misses += 1,
            }
        }

        let mut assoc = fc.association.clone().unwrap_or_else(|| FrameAssociation {
            frame: f,
            pairs: cands
                .iter()
                .map(|c| AssociationPair {
                    antenna1: c.pair.0,
                    antenna2: c.pair.1,
                    track: None,
                })
                .collect(),
            unmatched1: Vec::new(),
            unmatched2: Vec::new(),
            cost: 0.0,
        });
        assoc.frame = f;
        for (n, s) in slot.iter().enumerate() {
            if let Some(c) = s {
                let key = cands[*c].pair;
                if let Some(p) = assoc
                    .pairs
                    .iter_mut()
                    .find(|p| (p.antenna1, p.antenna2) == key)
                {
                    p.track = Some(n);
                }
            }
        }
        assoc_map.push(assoc);
        labels.push(slot.iter().map(|s| s.map(|c| cands[c])).collect());
    }
    (labels, assoc_map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn win(center: f64, frame: usize, antenna: usize) -> DetectionWindow {
        DetectionWindow {
            center_hz: center,
            width_hz: 10.0,
            integrated_power: 1.0,
            frame_index: frame,
            antenna_id: antenna,
        }
    }

    #[test]
    fn association_example() {
        let a = associate(5.0, &[win(-100.0, 0, 0), win(50.0, 0, 0)], &[win(-99.0, 0, 1), win(51.0, 0, 1)]);
        assert_eq!(a.cost, 2.0);
        let pairs: Vec<(usize, usize)> = a.pairs.iter().map(|p| (p.antenna1, p.antenna2)).collect();
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn identical_sets_match_identically() {
        let d: Vec<_> = [-20.0, 3.0, 77.0].iter().map(|&c| win(c, 0, 0)).collect();
        let a = associate(5.0, &d, &d);
        assert_eq!(a.cost, 0.0);
        assert!(a.pairs.iter().all(|p| p.antenna1 == p.antenna2));
    }

    #[test]
    fn gate_rejects_far_pairs() {
        let d1: Vec<_> = [-20.0, 3.0].iter().map(|&c| win(c, 0, 0)).collect();
        let d2: Vec<_> = [180.0, 203.0].iter().map(|&c| win(c, 0, 1)).collect();
        let a = associate(5.0, &d1, &d2);
        assert!(a.pairs.is_empty());
        assert_eq!(a.unmatched1, vec![0, 1]);
        assert_eq!(a.unmatched2, vec![0, 1]);
    }

    #[test]
    fn unequal_counts_leave_misses() {
        let d1: Vec<_> = [-20.0, 3.0, 50.0].iter().map(|&c| win(c, 0, 0)).collect();
        let d2: Vec<_> = [3.5].iter().map(|&c| win(c, 0, 1)).collect();
        let a = associate(5.0, &d1, &d2);
        assert_eq!(a.pairs.len(), 1);
        assert_eq!((a.pairs[0].antenna1, a.pairs[0].antenna2), (1, 0));
        assert_eq!(a.unmatched1, vec![0, 2]);
    }

    #[test]
    fn time_domain_correlation_equals_circular_cross_correlation() {
        let n = 32;
        let mut state = 7u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let m1: Vec<Complex64> = (0..n).map(|_| Complex64::new(rnd(), rnd())).collect();
        let m2: Vec<Complex64> = (0..n).map(|_| Complex64::new(rnd(), rnd())).collect();
        let mut planner = FftPlanner::new();
        let got = correlate_spectra(&m1, &m2, 1, 1.0, &mut planner);

        // Direct evaluation in natural bin order: R[k] = (1/N) Σ_m M1[m] conj(M2[m - k]).
        let mut a = m1.clone();
        let mut b = m2.clone();
        ifftshift(&mut a);
        ifftshift(&mut b);
        let mut direct: Vec<Complex64> = (0..n)
            .map(|k| {
                (0..n)
                    .map(|m| a[m] * b[(m + n - k) % n].conj())
                    .sum::<Complex64>()
                    / n as f64
            })
            .collect();
        fftshift(&mut direct);
        for (g, d) in got.iter().zip(&direct) {
            assert!((g - d).norm() < 1e-12, "{g} vs {d}");
        }
    }

    #[test]
    fn doppler_track_interpolates() {
        let tr = DopplerTrack {
            times_s: vec![0.0, 1.0],
            doppler_hz: vec![[0.0, 10.0], [2.0, 20.0]],
        };
        assert_eq!(tr.at(0.5), Some([1.0, 15.0]));
        assert_eq!(tr.at(1.5), None);
    }
}

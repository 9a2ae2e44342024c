use angvel_core::decomp::{
    self, detect::mask_spectrum, DecomposeConfig, DetectionWindow, DopplerTrack, FrequencyMode,
};
use angvel_core::dsp::{self, interpolated_peak, StftConfig, TimeFrequencyMap};
use angvel_core::model::{self, PointState};
use angvel_core::pipeline;
use angvel_core::scene::{kinematics_at, ArrayGeometry, TargetTrajectory};
use angvel_core::synth::{synthesize, AntennaPattern, IqCapture, WaveformConfig};
use num_complex::Complex64;

fn geom() -> ArrayGeometry {
    ArrayGeometry::standard(40e9, 20.0).unwrap()
}

fn quiet(duration_s: f64) -> WaveformConfig {
    WaveformConfig {
        duration_s,
        snr_db: None,
        dc_offset: [Complex64::new(0.0, 0.0); 2],
        ..WaveformConfig::default()
    }
}

fn spiral(id: u32, range: f64, bearing: f64, rate: f64, omega: f64, t1: f64) -> TargetTrajectory {
    let c = geom().phase_center();
    TargetTrajectory::from_fn(id, 1.0, 0.0, t1, 240.0, move |t| {
        let r = range + rate * t;
        let a = bearing + omega * t;
        [c[0] + r * a.sin(), c[1] + r * a.cos()]
    })
    .unwrap()
}

fn tone_frame(freqs: &[f64]) -> TimeFrequencyMap {
    let x: Vec<Complex64> = (0..1024)
        .map(|k| {
            freqs
                .iter()
                .map(|f| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * f * k as f64 / 1920.0))
                .sum()
        })
        .collect();
    dsp::stft(&x, 1920.0, 0.0, &StftConfig::default(), "tones").unwrap()
}

fn window(center_hz: f64) -> DetectionWindow {
    DetectionWindow {
        center_hz,
        width_hz: 10.0,
        integrated_power: 0.0,
        frame_index: 0,
        antenna_id: 0,
    }
}

fn energy(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

#[test]
fn mask_away_from_tone_removes_it() {
    let map = tone_frame(&[133.4]);
    let frame = map.frame(0);
    let out = mask_spectrum(frame, map.bin_width_hz(), &window(-300.0));
    assert!(energy(&out) < 1e-6 * energy(frame));
}

#[test]
fn neighbour_residual_below_hann_sidelobes() {
    let map = tone_frame(&[-100.0, 100.0]);
    let frame = map.frame(0);
    let out = mask_spectrum(frame, map.bin_width_hz(), &window(-100.0));
    let peak_b = map.nearest_bin(100.0).unwrap();
    let b_peak = frame[peak_b].norm();
    let residual = (0..frame.len())
        .filter(|&b| (map.freq_of_bin(b as f64) - 100.0).abs() <= 5.0)
        .map(|b| out[b].norm())
        .fold(0.0, f64::max);
    assert!(residual == 0.0 || 20.0 * (residual / b_peak).log10() < -31.0);
    // Tone A passes almost untouched.
    let kept = energy(&out);
    let a_only = tone_frame(&[-100.0]);
    assert!((kept / energy(a_only.frame(0)) - 1.0).abs() < 0.01);
}

fn known_mode(trajs: &[TargetTrajectory], times: &[f64]) -> FrequencyMode {
    let truth = pipeline::frame_truth(trajs, &geom(), times, 1).unwrap();
    FrequencyMode::Known(
        truth
            .into_iter()
            .map(|t| DopplerTrack {
                times_s: t.doppler.times_s,
                doppler_hz: t.doppler.doppler_hz,
            })
            .collect(),
    )
}

fn peak_hz(map: &TimeFrequencyMap, f: usize) -> f64 {
    let mags: Vec<f64> = map.frame(f).iter().map(|z| z.norm()).collect();
    map.freq_of_bin(interpolated_peak(&mags).unwrap().0)
}

fn decompose(cap: &IqCapture, trajs: &[TargetTrajectory]) -> decomp::DecomposedResponse {
    let cfg = DecomposeConfig::default();
    let (tf1, tf2) = dsp::antenna_stfts(cap, &cfg.stft).unwrap();
    let mode = known_mode(trajs, &tf1.frame_times_s);
    decomp::decompose_maps(&tf1, &tf2, &cfg, trajs.len(), &mode).unwrap()
}

#[test]
fn single_target_matches_full_response() {
    let g = geom();
    let trajs = vec![spiral(1, 6.0, 0.0, 0.3, 0.072, 2.0)];
    let cap = synthesize(&g, &trajs, &quiet(2.0), &AntennaPattern::Isotropic).unwrap();
    let full = dsp::interferometric_stft(&cap, &StftConfig::default(), 8).unwrap();
    let dec = decompose(&cap, &trajs);
    for f in 0..full.n_frames() {
        assert!((peak_hz(&full, f) - peak_hz(&dec.tracks[0].map, f)).abs() <= 0.05);
    }
}

#[test]
fn opposed_targets_recover_their_own_fringe_rates() {
    let g = geom();
    let trajs = vec![spiral(1, 8.0, 0.0, -0.5, 0.072, 3.0), spiral(2, 3.0, 0.0, 0.5, -0.053, 3.0)];
    let cap = synthesize(&g, &trajs, &quiet(3.0), &AntennaPattern::Isotropic).unwrap();
    let dec = decompose(&cap, &trajs);
    let full = dsp::interferometric_stft(&cap, &StftConfig::default(), 8).unwrap();
    let f = full.n_frames() / 2;
    let t = full.frame_times_s[f];

    let p1 = peak_hz(&dec.tracks[0].map, f);
    let p2 = peak_hz(&dec.tracks[1].map, f);
    assert!((p1 - 1.44).abs() < 0.1, "{p1}");
    assert!((p2 + 1.06).abs() < 0.1, "{p2}");

    let points: Vec<PointState> = trajs
        .iter()
        .map(|tr| PointState::from_kinematics(&kinematics_at(tr, &g, t).unwrap(), 1.0))
        .collect();
    let lines = model::full_response_lines(&points, &g, &AntennaPattern::Isotropic).unwrap();
    for track in &dec.tracks {
        let mags: Vec<f64> = track.map.frame(f).iter().map(|z| z.norm()).collect();
        let peak = mags.iter().copied().fold(0.0, f64::max);
        for l in lines.cross_terms() {
            assert!((l.freq_hz.abs() - 266.8).abs() < 3.0);
            let b = track.map.nearest_bin(l.freq_hz).unwrap();
            assert!(20.0 * (mags[b].max(1e-300) / peak).log10() < -20.0);
        }
    }
}

#[test]
fn equal_doppler_targets_share_a_mask() {
    let g = geom();
    let trajs = vec![spiral(1, 5.0, -0.3, -0.15, 0.06, 2.0), spiral(2, 6.0, 0.35, -0.15, -0.07, 2.0)];
    let cap = synthesize(&g, &trajs, &quiet(2.0), &AntennaPattern::Isotropic).unwrap();
    let dec = decompose(&cap, &trajs);
    let f = dec.tracks[0].map.n_frames() / 2;
    let [a, _] = dec.tracks[0].bands[f].unwrap();
    let [b, _] = dec.tracks[1].bands[f].unwrap();
    // Both Doppler lines fall in each target's mask, so each track still
    // carries the other target's fringe: the documented failure mode.
    assert!(a.overlaps(&b));
    let m0 = &dec.tracks[0].map;
    let mags: Vec<f64> = m0.frame(f).iter().map(|z| z.norm()).collect();
    let peak = mags.iter().copied().fold(0.0, f64::max);
    let other = mags[m0.nearest_bin(-0.07 * 20.0 * (0.35f64).cos()).unwrap()];
    assert!(other / peak > 0.1);
}

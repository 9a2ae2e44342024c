use angvel_core::decomp::{self, DecomposeConfig, DetectionWindow, FrequencyMode};
use angvel_core::dsp::{self, StftConfig};
use angvel_core::model::{self, FreqGrid, PointState};
use angvel_core::modelfit::{self, FitConfig, ObservedSpectrum};
use angvel_core::scene::{ArrayGeometry, TargetTrajectory};
use angvel_core::synth::{synthesize, AntennaPattern, IqCapture, WaveformConfig};
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn capture(duration_s: f64) -> (ArrayGeometry, IqCapture) {
    let g = ArrayGeometry::standard(40e9, 20.0).unwrap();
    let a = TargetTrajectory::from_fn(1, 1.0, 0.0, duration_s, 120.0, |t| [0.5, 8.0 - 0.5 * t]).unwrap();
    let b = TargetTrajectory::from_fn(2, 1.0, 0.0, duration_s, 120.0, |t| [-0.3 + 0.1 * t, 3.0 + 0.5 * t]).unwrap();
    let wf = WaveformConfig {
        duration_s,
        ..WaveformConfig::default()
    };
    let cap = synthesize(&g, &[a, b], &wf, &AntennaPattern::default()).unwrap();
    (g, cap)
}

fn bench(c: &mut Criterion) {
    let (g, cap) = capture(10.0);
    let cfg = StftConfig::default();

    c.bench_function("highpass_10s", |b| b.iter(|| dsp::highpass(black_box(&cap), 3, 1.0, false).unwrap()));
    c.bench_function("antenna_stfts_10s", |b| b.iter(|| dsp::antenna_stfts(black_box(&cap), &cfg).unwrap()));
    c.bench_function("interferometric_stft_10s_x8", |b| {
        b.iter(|| dsp::interferometric_stft(black_box(&cap), &cfg, 8).unwrap())
    });

    let dcfg = DecomposeConfig::default();
    let (tf1, tf2) = dsp::antenna_stfts(&cap, &cfg).unwrap();
    c.bench_function("decompose_detected_10s", |b| {
        b.iter(|| decomp::decompose_maps(&tf1, &tf2, &dcfg, 2, &FrequencyMode::Detected).unwrap())
    });

    let win = |c: f64| DetectionWindow {
        center_hz: c,
        width_hz: 10.0,
        integrated_power: 1.0,
        frame_index: 0,
        antenna_id: 0,
    };
    let d1: Vec<_> = [-120.0, -3.0, 40.0, 133.0].map(win).to_vec();
    let d2: Vec<_> = [-118.0, 41.0, 0.0, 130.0].map(win).to_vec();
    c.bench_function("associate_4x4", |b| b.iter(|| decomp::associate(5.0, black_box(&d1), black_box(&d2))));

    let pts = [PointState::new(-0.5, 0.072, [0.0; 2], 1.0), PointState::new(0.5, -0.053, [0.0; 2], 1.0)];
    let lines = model::full_response_lines(&pts, &g, &AntennaPattern::Isotropic).unwrap();
    let grid = FreqGrid {
        n_bins: 8192,
        bin_width_hz: 1920.0 / 8192.0,
    };
    let fit_cfg = FitConfig::default();
    let obs = ObservedSpectrum::from_lines(&lines.lines, grid, 1920.0 / 1024.0, fit_cfg.support_cells);
    let mut group = c.benchmark_group("modelfit");
    group.sample_size(10);
    group.bench_function("fit_n2", |b| b.iter(|| modelfit::fit(black_box(&obs), 2, &g, &fit_cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);

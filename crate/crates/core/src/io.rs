//! File formats.
//!
//! Captures are raw little-endian `f32` quadruples `[I1 Q1 I2 Q2]` per sample
//! with a JSON sidecar of the same stem. Time-frequency maps are written as
//! row-major little-endian `f32` magnitudes in dB (one row per frame) with a
//! JSON sidecar, and optionally as long-format CSV over a frequency band.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::decomp::FrameAssociation;
use crate::dsp::TimeFrequencyMap;
use crate::error::{Error, Result};
use crate::synth::IqCapture;

pub const CAPTURE_FORMAT: &str = "iq_f32le_interleaved_2ch";
pub const MAP_FORMAT: &str = "tf_db_f32le_row_major";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureSidecar {
    pub format: String,
    pub sample_rate_hz: f64,
    pub t0_s: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub scenario_hash: String,
    #[serde(default)]
    pub scenario_name: String,
}

pub fn sidecar_path(data: &Path) -> PathBuf {
    data.with_extension("json")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Serialize `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_capture(path: &Path, capture: &IqCapture, seed: u64, scenario_hash: &str, scenario_name: &str) -> Result<()> {
    let mut w = create(path)?;
    for (a, b) in capture.ch1.iter().zip(&capture.ch2) {
        for v in [a.re, a.im, b.re, b.im] {
            w.write_all(&(v as f32).to_le_bytes()).map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    write_json(
        &sidecar_path(path),
        &CaptureSidecar {
            format: CAPTURE_FORMAT.to_string(),
            sample_rate_hz: capture.sample_rate_hz,
            t0_s: capture.t0_s,
            n_samples: capture.len(),
            seed,
            scenario_hash: scenario_hash.to_string(),
            scenario_name: scenario_name.to_string(),
        },
    )
}

pub fn read_capture(path: &Path) -> Result<(IqCapture, CaptureSidecar)> {
    let side_path = sidecar_path(path);
    let side: CaptureSidecar = read_json(&side_path)?;
    if side.format != CAPTURE_FORMAT {
        return Err(Error::validation(format!(
            "{}: unsupported capture format '{}'",
            side_path.display(),
            side.format
        )));
    }
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() != side.n_samples * 16 {
        return Err(Error::validation(format!(
            "{}: {} bytes, sidecar declares {} samples ({} bytes)",
            path.display(),
            bytes.len(),
            side.n_samples,
            side.n_samples * 16
        )));
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let mut ch1 = Vec::with_capacity(side.n_samples);
    let mut ch2 = Vec::with_capacity(side.n_samples);
    for q in vals.chunks_exact(4) {
        ch1.push(Complex64::new(q[0], q[1]));
        ch2.push(Complex64::new(q[2], q[3]));
    }
    let cap = IqCapture::new(ch1, ch2, side.sample_rate_hz, side.t0_s)?;
    Ok((cap, side))
}

/// Magnitude in dB, floored at -300 dB.
pub fn magnitude_db(z: Complex64) -> f64 {
    20.0 * z.norm().max(1e-15).log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSidecar {
    pub format: String,
    pub label: String,
    pub n_frames: usize,
    pub n_bins: usize,
    pub sample_rate_hz: f64,
    pub window_len: usize,
    pub freq0_hz: f64,
    pub bin_width_hz: f64,
    pub frame_times_s: Vec<f64>,
}

pub fn write_map_binary(path: &Path, map: &TimeFrequencyMap) -> Result<()> {
    let mut w = create(path)?;
    for z in map.data() {
        w.write_all(&(magnitude_db(*z) as f32).to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    write_json(
        &sidecar_path(path),
        &MapSidecar {
            format: MAP_FORMAT.to_string(),
            label: map.label.clone(),
            n_frames: map.n_frames(),
            n_bins: map.fft_len,
            sample_rate_hz: map.sample_rate_hz,
            window_len: map.window_len,
            freq0_hz: map.freq_of_bin(0.0),
            bin_width_hz: map.bin_width_hz(),
            frame_times_s: map.frame_times_s.clone(),
        },
    )
}

/// Long-format `time_s,freq_hz,magnitude_db` rows for bins with
/// `|f| <= band_hz`.
pub fn write_map_csv(w: impl Write, map: &TimeFrequencyMap, band_hz: f64) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["time_s", "freq_hz", "magnitude_db"])?;
    let freqs = map.freq_axis_hz();
    for (f, &t) in map.frame_times_s.iter().enumerate() {
        for (z, &fr) in map.frame(f).iter().zip(&freqs) {
            if fr.abs() <= band_hz {
                wr.write_record([
                    format!("{t:.6}"),
                    format!("{fr:.6}"),
                    format!("{:.4}", magnitude_db(*z)),
                ])?;
            }
        }
    }
    wr.flush().map_err(|e| Error::io("<map csv>", e))?;
    Ok(())
}

/// One JSON object per frame.
pub fn write_association_jsonl(w: impl Write, assoc: &[FrameAssociation]) -> Result<()> {
    let mut w = BufWriter::new(w);
    for a in assoc {
        serde_json::to_writer(&mut w, a)?;
        w.write_all(b"\n").map_err(|e| Error::io("<association>", e))?;
    }
    w.flush().map_err(|e| Error::io("<association>", e))
}
